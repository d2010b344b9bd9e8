use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pot_core::chain::{read_snapshot, validate_chain, write_snapshot, Chain, Hash32};
use pot_core::config::SimConfig;
use pot_core::sim::{parse_scenario, roster_keys, run as simulate, FaultEvent, SimResult};
use pot_core::storage::{class_counts, designated_gcn, prune as prune_chain, verify_prune};
use rayon::prelude::*;

use crate::{usage, Failure, SimFlags};

/// Defaults, then the config file, then flags.
pub fn load_config(flags: &SimFlags) -> Result<SimConfig, Failure> {
    let mut config = SimConfig::default();
    if let Some(path) = &flags.config {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        config
            .merge_text(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    for (key, value) in flags.pairs() {
        config
            .set(key, value)
            .map_err(|e| usage(format!("--{}: {e}", key.replace('_', "-"))))?;
    }
    Ok(config)
}

fn load_scenario(config: &SimConfig) -> Result<Vec<FaultEvent>, Failure> {
    let Some(path) = &config.scenario else {
        return Ok(Vec::new());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?;
    parse_scenario(&text).map_err(|e| usage(format!("{path}: {e}")))
}

fn simulate_config(config: &SimConfig) -> Result<SimResult, Failure> {
    let events = load_scenario(config)?;
    simulate(config, &events).map_err(usage)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn run(flags: &SimFlags, out: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(flags)?;
    let result = simulate_config(&config)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        write(&dir.join("trace.txt"), result.trace.text())?;
        write(&dir.join("config.txt"), config.to_text())?;
        write(
            &dir.join("chain.potc"),
            write_snapshot(result.nodes[0].chain()),
        )?;
        result
            .metrics
            .export(dir, &config.storage.to_string())
            .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    outln!("trace-digest {}", result.digest().to_hex());
    out!("{}", result.metrics.summary());
    Ok(())
}

pub fn validate(file: &Path, genesis: Option<&str>) -> Result<(), Failure> {
    let bytes = read(file)?;
    let genesis = genesis
        .map(|g| {
            g.parse::<Hash32>()
                .map_err(|_| usage(format!("bad genesis hash `{g}`")))
        })
        .transpose()?;
    let chain = match read_snapshot(&bytes) {
        Ok(c) => c,
        Err(e) => {
            outln!("{}: unreadable snapshot: {e}", file.display());
            return Err(Failure::Findings);
        }
    };
    let report = match genesis {
        Some(g) => chain.validate_against(g),
        None => validate_chain(&chain),
    };
    if report.is_empty() {
        outln!(
            "{}: ok, {} blocks, tip {}",
            file.display(),
            chain.len(),
            chain.tip_hash().to_hex()
        );
        return Ok(());
    }
    out!("{report}");
    outln!(
        "{}: {} findings at heights {:?}",
        file.display(),
        report.findings.len(),
        report.flagged_heights()
    );
    Err(Failure::Findings)
}

fn load_chain(file: &Path) -> Result<Chain, Failure> {
    read_snapshot(&read(file)?).map_err(|e| usage(format!("{}: {e}", file.display())))
}

pub fn prune(
    file: &Path,
    flags: &SimFlags,
    final_height: Option<u64>,
    out: &Path,
) -> Result<(), Failure> {
    let config = load_config(flags)?;
    let chain = load_chain(file)?;
    let Some(gcn) = designated_gcn(&chain, config.prune_cap) else {
        outln!(
            "untidy chain is within {} bytes; nothing to prune",
            config.prune_cap
        );
        return Ok(());
    };
    let key = roster_keys(&config)
        .into_iter()
        .find(|k| k.id() == &gcn)
        .ok_or_else(|| {
            usage(format!(
                "collector {} is not in the configured roster",
                gcn.label
            ))
        })?;
    let final_height = final_height.unwrap_or(chain.height());
    let (pruned, proof) = prune_chain(&chain, &key, &gcn, final_height).map_err(usage)?;
    if let Err(e) = verify_prune(&chain, &pruned, &proof, final_height) {
        outln!("prune output failed verification: {e}");
        return Err(Failure::Findings);
    }
    fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    write(&out.join("pruned.potc"), write_snapshot(&pruned))?;
    outln!(
        "pruned by {}: {} -> {} bytes, {} deleted, {} transcribed, fixed up to {}",
        gcn.label,
        chain.total_size(),
        pruned.total_size(),
        proof.deleted.len(),
        proof.transcribed.len(),
        proof.fixed_upto
    );
    Ok(())
}

/// Parse `key=v1,v2` axes into the cartesian product of settings.
fn grid(axes: &[String]) -> Result<Vec<Vec<(String, String)>>, Failure> {
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| usage(format!("--vary expects KEY=V1,V2,..., got `{axis}`")))?;
        let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(usage(format!("--vary {key}: no values")));
        }
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.trim().to_string(), v.trim().to_string()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

const SWEEP_COLUMNS: &str = "digest,handovers,forks,conflicting_finals,forced_invalidations,rejected_blocks,missed_turns,resets,votes_passed,storage_n0";

pub fn sweep(
    flags: &SimFlags,
    axes: &[String],
    jobs: Option<usize>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let base = load_config(flags)?;
    let points = grid(axes)?;
    let configs = points
        .iter()
        .map(|p| {
            let mut c = base.clone();
            for (k, v) in p {
                c.set(k, v).map_err(|e| usage(format!("--vary {k}: {e}")))?;
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(usage)?;
    let rows = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let r = simulate_config(c)?;
                let m = &r.metrics;
                Ok(format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.digest().to_hex(),
                    m.handovers,
                    m.forks,
                    m.conflicting_finals,
                    m.forced_invalidations,
                    m.rejected_blocks,
                    m.missed_turns,
                    m.resets,
                    m.votes_passed(),
                    m.final_storage("n0")
                ))
            })
            .collect::<Result<Vec<String>, Failure>>()
    })?;
    let keys: Vec<&str> = points[0].iter().map(|(k, _)| k.as_str()).collect();
    let mut csv = format!("{},{SWEEP_COLUMNS}\n", keys.join(","));
    for (p, row) in points.iter().zip(rows) {
        let values: Vec<&str> = p.iter().map(|(_, v)| v.as_str()).collect();
        csv.push_str(&format!("{},{row}\n", values.join(",")));
    }
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            write(&dir.join("sweep.csv"), csv)
        }
        None => {
            out!("{csv}");
            Ok(())
        }
    }
}

pub fn inspect(file: &Path) -> Result<(), Failure> {
    let chain = load_chain(file)?;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for b in chain.blocks() {
        *kinds.entry(format!("{:?}", b.kind)).or_default() += 1;
    }
    outln!("blocks {}", chain.len());
    outln!("height {}", chain.height());
    outln!("base {}", chain.base_height());
    outln!("fixed_upto {}", chain.fixed_upto());
    outln!("tip {}", chain.tip_hash().to_hex());
    outln!("bytes {}", chain.total_size());
    outln!("invalidated {}", chain.invalidated().len());
    for (k, n) in kinds {
        outln!("block.{k} {n}");
    }
    for (c, n) in class_counts(&chain) {
        outln!("tx.{c:?} {n}");
    }
    let findings = validate_chain(&chain).findings.len();
    outln!("findings {findings}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_a_cartesian_product() {
        let g = grid(&["seed=1,2".into(), "nodes=3,4,5".into()]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(
            g[0],
            vec![("seed".into(), "1".into()), ("nodes".into(), "3".into())]
        );
        assert_eq!(
            g[5],
            vec![("seed".into(), "2".into()), ("nodes".into(), "5".into())]
        );
        assert!(grid(&["seed".into()]).is_err());
        assert!(grid(&["seed=".into()]).is_err());
    }

    #[test]
    fn flags_apply_after_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "seed = 3\ntheta = 2/3\n").unwrap();
        let flags = SimFlags {
            config: Some(path),
            seed: Some("5".into()),
            ..SimFlags::default()
        };
        let c = load_config(&flags).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.get("theta").as_deref(), Some("2/3"));
        assert_eq!(c.nodes, SimConfig::default().nodes);
    }
}
