use std::fmt::Write as _;

use crate::chain::{sha256, Hash32};
use crate::Tick;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub tick: Tick,
    pub node: String,
    pub kind: String,
    pub block: Option<Hash32>,
}

/// Newline-delimited `tick node kind block-hash` records; `-` marks a
/// record without a block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        tick: Tick,
        node: impl Into<String>,
        kind: impl Into<String>,
        block: Option<Hash32>,
    ) {
        self.records.push(EventRecord {
            tick,
            node: node.into(),
            kind: kind.into(),
            block,
        });
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let hash = r.block.map_or_else(|| "-".to_string(), |h| h.to_hex());
            let _ = writeln!(s, "{} {} {} {}", r.tick, r.node, r.kind, hash);
        }
        s
    }

    pub fn digest(&self) -> Hash32 {
        sha256(self.to_text().as_bytes())
    }
}
