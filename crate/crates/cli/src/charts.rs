//! Chart data as CSV. Output is a pure function of the arguments.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pot_core::consensus::Fraction;
use pot_core::contracts::{fraud_resilience, Grouping};
use pot_core::storage::{
    breakeven, breakeven_for_tx_size, series_csv, storage_series, Advice, MetaPlan, SeriesMode,
    SeriesScenario, StorageParams,
};

use crate::{usage, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Tolerated hostile fraction per shuffle grouping against network size
    ShuffleBft,
    /// Chain size against transaction count per compaction mode
    Storage,
    /// Cost of encrypted hidden transactions against game hashes
    Breakeven,
}

#[derive(Debug, Clone, Args)]
pub struct ChartArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Largest network size (shuffle-bft)
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Transactions in the series (storage)
    #[arg(long, default_value_t = 600_000)]
    pub total: u64,
    /// Transactions between points (storage)
    #[arg(long, default_value_t = 50_000)]
    pub step: u64,
    /// Transactions between a commitment and its reveal (storage)
    #[arg(long, default_value_t = 0)]
    pub delay: u64,
    /// Prune period in transactions (storage)
    #[arg(long, default_value_t = 100_000)]
    pub prune_every: u64,
    /// Meta-state cut period in transactions (storage)
    #[arg(long, default_value_t = 100_000)]
    pub meta_every: u64,
    /// Long-term meta-state size in MB (storage)
    #[arg(long, default_value = "10")]
    pub plateau: String,
    /// Pad every transaction to 0.1 MB (storage)
    #[arg(long)]
    pub padded: bool,
    /// Average transaction size in bytes that bloat is padded to (breakeven)
    #[arg(long)]
    pub tx_bytes: Option<u64>,
    /// Directory receiving <figure>.csv; stdout otherwise
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fixed-point rendering rounded half up.
pub fn decimal(x: Fraction, places: u32) -> String {
    let scale = 10u64.pow(places);
    let scaled = (x * Fraction::from_integer(scale) + Fraction::new(1, 2))
        .floor()
        .to_integer();
    format!(
        "{}.{:0width$}",
        scaled / scale,
        scaled % scale,
        width = places as usize
    )
}

pub fn shuffle_bft(n_max: usize) -> String {
    let mut out = String::from("n,δ=1.0,ε=0.5,θ=1/3\n");
    let curves = [
        Grouping::FullMistrust,
        Grouping::GroupsOf(2),
        Grouping::GroupsOf(3),
    ];
    for n in 3..=n_max {
        let cells: Vec<String> = curves
            .iter()
            .map(|&g| fraud_resilience(g, n).map_or_else(String::new, |f| decimal(f, 6)))
            .collect();
        let _ = writeln!(out, "{n},{}", cells.join(","));
    }
    out
}

pub fn storage(a: &ChartArgs) -> Result<String, Failure> {
    let params = if a.padded {
        StorageParams::padded()
    } else {
        StorageParams::default()
    };
    let plateau = pot_core::consensus::parse_fraction(&a.plateau)
        .ok_or_else(|| usage(format!("--plateau: bad value `{}`", a.plateau)))?;
    if a.prune_every == 0 || a.meta_every == 0 {
        return Err(usage("--prune-every and --meta-every must be positive"));
    }
    let s = SeriesScenario::new(params, a.total, a.step, a.delay);
    let meta = MetaPlan {
        every: a.meta_every,
        plateau,
    };
    let modes = [
        SeriesMode::None,
        SeriesMode::Prune {
            every: a.prune_every,
        },
        SeriesMode::Child,
        SeriesMode::Meta(meta),
    ];
    let points: Vec<_> = modes
        .into_iter()
        .flat_map(|m| storage_series(&s, m))
        .collect();
    Ok(series_csv(&points))
}

pub fn breakeven_curve(tx_bytes: Option<u64>) -> Result<String, Failure> {
    let p = StorageParams::default();
    let mut out = String::from("bloat_factor,encrypted_MB,game_hash_MB,advice\n");
    for i in 0..=100u64 {
        let f = Fraction::new(i, 10_000);
        let m = match tx_bytes {
            Some(b) => breakeven_for_tx_size(f, b, &p),
            None => breakeven(f, &p),
        }
        .map_err(usage)?;
        let advice = match m.advice {
            Advice::Encrypted => "encrypted",
            Advice::GameHash => "game-hash",
        };
        let _ = writeln!(
            out,
            "{},{},{},{advice}",
            decimal(f, 4),
            decimal(m.encrypted_cost, 9),
            decimal(m.game_hash_cost, 9)
        );
    }
    Ok(out)
}

pub fn charts(a: &ChartArgs) -> Result<(), Failure> {
    let (name, csv) = match a.figure {
        Figure::ShuffleBft => {
            if a.n < 3 {
                return Err(usage("--n must be at least 3"));
            }
            ("shuffle-bft", shuffle_bft(a.n))
        }
        Figure::Storage => ("storage", storage(a)?),
        Figure::Breakeven => ("breakeven", breakeven_curve(a.tx_bytes)?),
    };
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, csv).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
        None => {
            out!("{csv}");
            Ok(())
        }
    }
}
