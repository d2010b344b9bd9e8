//! Update dissemination: interval-driven pulling and the decimal push tree.

mod pull;
mod push;

pub use pull::{
    guess_leader, pull_interval, pull_once, serve_update, PostTurn, PullError, PullNode,
    PullStrategy, TransitionMark, UpdateRequest, UpdateResponse, UpdateResult, UpdateSource,
};
pub use push::{
    drains, full_push, hops, push_round, relative_index, Delivery, DeliveryReport, PushTree,
};
