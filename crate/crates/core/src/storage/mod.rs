//! Storage accounting and compaction: classification, prune, child chains,
//! meta-state cuts, the break-even model and storage curves.

mod breakeven;
mod child;
mod classify;
mod meta;
mod params;
mod prune;
mod series;

pub use breakeven::{breakeven, breakeven_for_tx_size, Advice, BreakevenError, ModeAdvice};
pub use child::{ChildChain, ChildEntry, ChildError, ChildManager, ChildState, GcPolicy};
pub use classify::{class_counts, classify, RevealView, TxClass};
pub use meta::{
    meta_state_cut, read_meta_block, replay_chain, replay_to, GameState, KeyValueState, MetaError,
    META_PREFIX,
};
pub use params::{bytes_to_mb, fmt_mb, StorageParams, BYTES_PER_MB};
pub use prune::{
    designated_gcn, prune, resolve_prune, should_prune, untidy_size, verify_prune, PruneError,
    PruneProof, PruneResolution, PruneTrigger,
};
pub use series::{
    bloat_count, child_slots, series_csv, storage_at, storage_series, MetaPlan, SeriesMode,
    SeriesPoint, SeriesScenario,
};
