//! Python bindings: simulator runs, snapshot validation and the closed-form
//! helpers. Fractions cross the boundary as `(numerator, denominator)`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pot_core::chain::{read_snapshot, validate_chain};
use pot_core::config::{SimConfig, CONFIG_KEYS};
use pot_core::consensus::Fraction;
use pot_core::contracts::{fraud_resilience as resilience, mix64 as mix, Grouping};
use pot_core::sim::rfts::{run_rfts, RftsConfig};
use pot_core::sim::{parse_scenario, run};
use pot_core::storage::{
    series_csv, storage_series, MetaPlan, SeriesMode, SeriesScenario, StorageParams,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pair(f: Fraction) -> (u64, u64) {
    (*f.numer(), *f.denom())
}

/// Pull interval for relative index `x` and turn length `t`.
#[pyfunction]
fn pull_interval(x: i64, t: u64) -> (u64, u64) {
    pair(pot_core::peering::pull_interval(x, t))
}

/// Direct push targets of relative index `x` in a network of `n`.
#[pyfunction]
fn drains(x: usize, n: usize) -> Vec<usize> {
    pot_core::peering::drains(x, n)
}

#[pyfunction]
fn mix64(x: u64) -> u64 {
    mix(x)
}

/// Smallest hostile fraction that corrupts a shuffle. `k` is the party
/// size; 1 means every node shuffles on its own.
#[pyfunction]
#[pyo3(signature = (n, k=1))]
fn fraud_resilience(n: usize, k: usize) -> Option<(u64, u64)> {
    resilience(Grouping::GroupsOf(k), n).map(pair)
}

/// Storage curves as `tx_count,mode,MB` CSV for every compaction mode.
#[pyfunction]
#[pyo3(signature = (total, step, delay=0, every=100_000, plateau_mb=10))]
fn storage_csv(total: u64, step: u64, delay: u64, every: u64, plateau_mb: u64) -> PyResult<String> {
    if every == 0 {
        return Err(value_error("every must be positive"));
    }
    let s = SeriesScenario::new(StorageParams::default(), total, step, delay);
    let meta = MetaPlan {
        every,
        plateau: Fraction::from_integer(plateau_mb),
    };
    let points: Vec<_> = [
        SeriesMode::None,
        SeriesMode::Prune { every },
        SeriesMode::Child,
        SeriesMode::Meta(meta),
    ]
    .into_iter()
    .flat_map(|m| storage_series(&s, m))
    .collect();
    Ok(series_csv(&points))
}

#[pyfunction]
fn config_keys() -> Vec<&'static str> {
    CONFIG_KEYS.to_vec()
}

/// Run the simulator. `config` is `key = value` text, `scenario` a fault
/// script; keyword overrides are applied last.
#[pyfunction]
#[pyo3(signature = (config="", scenario="", **overrides))]
fn simulate<'py>(
    py: Python<'py>,
    config: &str,
    scenario: &str,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut c = SimConfig::parse(config).map_err(value_error)?;
    if let Some(o) = overrides {
        for (k, v) in o.iter() {
            let key: String = k.extract()?;
            c.set(&key, &v.str()?.to_cow()?).map_err(value_error)?;
        }
    }
    let events = parse_scenario(scenario).map_err(value_error)?;
    let r = run(&c, &events).map_err(value_error)?;
    let m = &r.metrics;
    let out = PyDict::new(py);
    out.set_item("digest", r.digest().to_hex())?;
    out.set_item("trace", r.trace.text())?;
    out.set_item("summary", m.summary())?;
    out.set_item("handovers", m.handovers)?;
    out.set_item("forks", m.forks)?;
    out.set_item("conflicting_finals", m.conflicting_finals)?;
    out.set_item("forced_invalidations", m.forced_invalidations)?;
    out.set_item("missed_turns", m.missed_turns)?;
    out.set_item("dual_leader_ticks", m.dual_leader_ticks)?;
    out.set_item("votes_passed", m.votes_passed())?;
    out.set_item(
        "tips",
        r.nodes
            .iter()
            .map(|n| n.chain().tip_hash().to_hex())
            .collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Findings for a chain snapshot; empty when the chain is well formed.
#[pyfunction]
fn validate_snapshot(data: &[u8]) -> PyResult<Vec<String>> {
    let chain = read_snapshot(data).map_err(value_error)?;
    Ok(validate_chain(&chain)
        .findings
        .iter()
        .map(|f| format!("height {}: {}", f.height, f.kind))
        .collect())
}

/// Play the space conquest game. `scripted` adds a withholding player and
/// a double spend.
#[pyfunction]
#[pyo3(signature = (players=3, rounds=30, seed=1, scripted=false))]
fn play_game<'py>(
    py: Python<'py>,
    players: usize,
    rounds: u64,
    seed: u64,
    scripted: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = if scripted {
        RftsConfig::scripted(seed)
    } else {
        RftsConfig::new(players, rounds, seed)
    };
    let g = run_rfts(&cfg).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("digest", g.digest().to_hex())?;
    out.set_item("victor", g.victor)?;
    out.set_item("granted", g.granted())?;
    out.set_item("conserved", g.conserved)?;
    out.set_item(
        "double_spend_invalidated",
        g.double_spend.as_ref().map(|d| d.invalidated.len()),
    )?;
    Ok(out)
}

#[pymodule]
fn pot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pull_interval, m)?)?;
    m.add_function(wrap_pyfunction!(drains, m)?)?;
    m.add_function(wrap_pyfunction!(mix64, m)?)?;
    m.add_function(wrap_pyfunction!(fraud_resilience, m)?)?;
    m.add_function(wrap_pyfunction!(storage_csv, m)?)?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(play_game, m)?)?;
    Ok(())
}
