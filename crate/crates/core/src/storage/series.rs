//! Closed-form storage curves. Transactions arrive one per step, bloat is
//! interleaved by the configured ratio and every transaction is revealed
//! `reveal_delay` transactions after it was emitted. All transactions are
//! padded to the relevant size.

use std::fmt;

use super::params::{fmt_mb, StorageParams};
use crate::consensus::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesScenario {
    pub params: StorageParams,
    pub total_tx: u64,
    pub step: u64,
    pub reveal_delay: u64,
}

impl SeriesScenario {
    pub fn new(params: StorageParams, total_tx: u64, step: u64, reveal_delay: u64) -> Self {
        SeriesScenario {
            params,
            total_tx,
            step: step.max(1),
            reveal_delay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaPlan {
    /// Cut every `every` transactions.
    pub every: u64,
    /// Long-term size of the summarized state, MB.
    pub plateau: Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    None,
    /// Prune every `every` transactions.
    Prune {
        every: u64,
    },
    Child,
    Meta(MetaPlan),
    PruneMeta {
        every: u64,
        meta: MetaPlan,
    },
    ChildMeta(MetaPlan),
}

impl fmt::Display for SeriesMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesMode::None => "none",
            SeriesMode::Prune { .. } => "prune",
            SeriesMode::Child => "child",
            SeriesMode::Meta(_) => "meta",
            SeriesMode::PruneMeta { .. } => "prune+meta",
            SeriesMode::ChildMeta(_) => "child+meta",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesPoint {
    pub tx_count: u64,
    pub mode: String,
    pub mb: Fraction,
}

/// Bloat transactions among the first `m`.
pub fn bloat_count(m: u64, p: &StorageParams) -> u64 {
    let period = p.ratio_relevant + p.ratio_bloat;
    (m / period) * p.ratio_bloat + (m % period).saturating_sub(p.ratio_relevant)
}

/// Transactions per child chain.
pub fn child_slots(p: &StorageParams) -> u64 {
    (p.child_capacity / p.size_relevant)
        .floor()
        .to_integer()
        .max(1)
}

fn revealed(n: u64, s: &SeriesScenario) -> u64 {
    n.saturating_sub(s.reveal_delay)
}

/// Transactions freed of bloat in `[from, to)`.
fn bloat_between(from: u64, to: u64, p: &StorageParams) -> u64 {
    bloat_count(to.max(from), p) - bloat_count(from, p)
}

/// Allocation in MB after `n` transactions.
pub fn storage_at(n: u64, s: &SeriesScenario, mode: SeriesMode) -> Fraction {
    let p = &s.params;
    let size = p.size_relevant;
    let tx = |k: u64| size * Fraction::from_integer(k);
    let prune_point = |every: u64| revealed(every.max(1) * (n / every.max(1)), s);
    let child_point = || {
        let k = child_slots(p);
        k * (revealed(n, s) / k)
    };
    let cut = |m: &MetaPlan| {
        let c = m.every.max(1) * (n / m.every.max(1));
        let summarized = revealed(c, s);
        let relevant = summarized - bloat_count(summarized, p);
        let snap = if summarized == 0 {
            Fraction::from_integer(0)
        } else {
            m.plateau.min(tx(relevant))
        };
        (summarized, snap)
    };
    match mode {
        SeriesMode::None => tx(n),
        SeriesMode::Prune { every } => tx(n - bloat_count(prune_point(every), p)),
        SeriesMode::Child => tx(n - bloat_count(child_point(), p)),
        SeriesMode::Meta(m) => {
            let (c, snap) = cut(&m);
            snap + tx(n - c)
        }
        SeriesMode::PruneMeta { every, meta } => {
            let (c, snap) = cut(&meta);
            snap + tx(n - c - bloat_between(c, prune_point(every), p))
        }
        SeriesMode::ChildMeta(meta) => {
            let (c, snap) = cut(&meta);
            snap + tx(n - c - bloat_between(c, child_point(), p))
        }
    }
}

pub fn storage_series(s: &SeriesScenario, mode: SeriesMode) -> Vec<SeriesPoint> {
    let name = mode.to_string();
    (1..=s.total_tx / s.step)
        .map(|i| i * s.step)
        .map(|n| SeriesPoint {
            tx_count: n,
            mode: name.clone(),
            mb: storage_at(n, s, mode),
        })
        .collect()
}

pub fn series_csv(points: &[SeriesPoint]) -> String {
    let mut out = String::from("tx_count,mode,MB\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.tx_count, p.mode, fmt_mb(p.mb)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bloat_pattern() {
        let p = StorageParams::default();
        assert_eq!(bloat_count(0, &p), 0);
        assert_eq!(bloat_count(1, &p), 0);
        assert_eq!(bloat_count(2, &p), 1);
        assert_eq!(bloat_count(7, &p), 3);
        let q = StorageParams {
            ratio_relevant: 3,
            ratio_bloat: 1,
            ..p
        };
        assert_eq!(bloat_count(8, &q), 2);
        assert_eq!(bloat_count(11, &q), 2);
        assert_eq!(bloat_count(12, &q), 3);
        assert_eq!(child_slots(&p), 1000);
    }
}
