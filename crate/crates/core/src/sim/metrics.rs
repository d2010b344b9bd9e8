use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::chain::{sha256, Hash32};
use crate::storage::{series_csv, SeriesPoint};
use crate::Tick;

/// Newline-delimited event records: `<tick> <node> <kind> <detail>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    text: String,
    records: usize,
}

impl Trace {
    pub fn push(&mut self, tick: Tick, node: &str, kind: &str, detail: impl AsRef<str>) {
        let detail = detail.as_ref();
        if detail.is_empty() {
            let _ = writeln!(self.text, "{tick} {node} {kind}");
        } else {
            let _ = writeln!(self.text, "{tick} {node} {kind} {detail}");
        }
        self.records += 1;
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    /// SHA-256 of the trace file contents.
    pub fn digest(&self) -> Hash32 {
        sha256(self.text.as_bytes())
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.text.lines()
    }

    /// Records whose kind field equals `kind`.
    pub fn count(&self, kind: &str) -> usize {
        self.lines()
            .filter(|l| l.split(' ').nth(2) == Some(kind))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalityRecord {
    pub node: String,
    pub block: Hash32,
    pub height: u64,
    pub created: Tick,
    pub finalized: Tick,
}

impl FinalityRecord {
    pub fn latency(&self) -> Tick {
        self.finalized.saturating_sub(self.created)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkRecord {
    pub tick: Tick,
    pub node: String,
    pub anchor: Hash32,
    pub resolution: String,
    pub adopted_other: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRecord {
    pub tick: Tick,
    pub caller: String,
    pub question: String,
    pub passed: bool,
    pub yes: usize,
    pub no: usize,
    pub silent: usize,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageSample {
    pub tick: Tick,
    pub node: String,
    pub tx_count: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub cf_latency: Vec<FinalityRecord>,
    /// Distinct fork points observed anywhere.
    pub forks: u64,
    pub resolutions: Vec<ForkRecord>,
    pub messages: BTreeMap<String, u64>,
    pub storage: Vec<StorageSample>,
    /// Distinct turns whose leader wrote nothing.
    pub missed_turns: u64,
    pub votes: Vec<VoteRecord>,
    pub data_blocks: u64,
    pub handovers: u64,
    pub finalizing: u64,
    pub rejected_blocks: u64,
    pub dual_leader_ticks: u64,
    pub equivocations: u64,
    pub forced_invalidations: u64,
    pub conflicting_finals: u64,
    pub graces: u64,
    pub resets: u64,
    pub prunes: u64,
    pub meta_cuts: u64,
    /// Highest turn completed at any honest node.
    pub turns_completed: u64,
}

impl Metrics {
    pub fn count_message(&mut self, kind: &str, n: u64) {
        *self.messages.entry(kind.to_string()).or_default() += n;
    }

    pub fn message_count(&self, kind: &str) -> u64 {
        self.messages.get(kind).copied().unwrap_or(0)
    }

    pub fn votes_passed(&self) -> usize {
        self.votes.iter().filter(|v| v.passed).count()
    }

    /// Largest stored size of `node` over the run.
    pub fn peak_storage(&self, node: &str) -> u64 {
        self.storage
            .iter()
            .filter(|s| s.node == node)
            .map(|s| s.bytes)
            .max()
            .unwrap_or(0)
    }

    pub fn final_storage(&self, node: &str) -> u64 {
        self.storage
            .iter()
            .rev()
            .find(|s| s.node == node)
            .map(|s| s.bytes)
            .unwrap_or(0)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mean = if self.cf_latency.is_empty() {
            0.0
        } else {
            self.cf_latency
                .iter()
                .map(|r| r.latency() as f64)
                .sum::<f64>()
                / self.cf_latency.len() as f64
        };
        let rows: [(&str, String); 18] = [
            ("data_blocks", self.data_blocks.to_string()),
            ("handovers", self.handovers.to_string()),
            ("finalizing", self.finalizing.to_string()),
            ("rejected_blocks", self.rejected_blocks.to_string()),
            ("forks", self.forks.to_string()),
            ("fork_resolutions", self.resolutions.len().to_string()),
            ("missed_turns", self.missed_turns.to_string()),
            ("votes", self.votes.len().to_string()),
            ("votes_passed", self.votes_passed().to_string()),
            ("dual_leader_ticks", self.dual_leader_ticks.to_string()),
            ("equivocations", self.equivocations.to_string()),
            (
                "forced_invalidations",
                self.forced_invalidations.to_string(),
            ),
            ("conflicting_finals", self.conflicting_finals.to_string()),
            ("graces", self.graces.to_string()),
            ("resets", self.resets.to_string()),
            ("prunes", self.prunes.to_string()),
            ("meta_cuts", self.meta_cuts.to_string()),
            ("turns_completed", self.turns_completed.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "cf_latency_mean = {mean:.3}");
        s
    }

    pub fn cf_latency_csv(&self) -> String {
        let mut s = String::from("node,block,height,created,finalized,latency\n");
        for r in &self.cf_latency {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.node,
                r.block.to_hex(),
                r.height,
                r.created,
                r.finalized,
                r.latency()
            );
        }
        s
    }

    pub fn forks_csv(&self) -> String {
        let mut s = String::from("tick,node,anchor,resolution,adopted_other\n");
        for r in &self.resolutions {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.tick,
                r.node,
                r.anchor.to_hex(),
                r.resolution,
                u8::from(r.adopted_other)
            );
        }
        s
    }

    pub fn messages_csv(&self) -> String {
        let mut s = String::from("kind,count\n");
        for (k, v) in &self.messages {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn votes_csv(&self) -> String {
        let mut s = String::from("tick,caller,question,passed,yes,no,silent,active\n");
        for v in &self.votes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                v.tick,
                v.caller,
                v.question,
                u8::from(v.passed),
                v.yes,
                v.no,
                v.silent,
                v.active
            );
        }
        s
    }

    /// Storage series of one node in the compaction module's CSV format.
    pub fn storage_csv(&self, node: &str, mode: &str) -> String {
        let points: Vec<SeriesPoint> = self
            .storage
            .iter()
            .filter(|s| s.node == node)
            .map(|s| SeriesPoint {
                tx_count: s.tx_count,
                mode: mode.to_string(),
                mb: crate::storage::bytes_to_mb(s.bytes),
            })
            .collect();
        series_csv(&points)
    }

    /// Write one CSV per metric family plus `summary.txt` into `dir`.
    pub fn export(&self, dir: &Path, mode: &str) -> io::Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("summary.txt".to_string(), self.summary()),
            ("cf_latency.csv".to_string(), self.cf_latency_csv()),
            ("forks.csv".to_string(), self.forks_csv()),
            ("messages.csv".to_string(), self.messages_csv()),
            ("votes.csv".to_string(), self.votes_csv()),
        ];
        let mut nodes: Vec<&str> = self.storage.iter().map(|s| s.node.as_str()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        for n in nodes {
            files.push((format!("storage_{n}.csv"), self.storage_csv(n, mode)));
        }
        for (name, body) in &files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}
