//! Scripted faults.
//!
//! One event per line, `#` starts a comment:
//!
//! ```text
//! AT <tick> PARTITION <group> <group> ...   # group = n0,n2 ; unlisted nodes are isolated
//! AT <tick> HEAL
//! AT <tick> CRASH <node>
//! AT <tick> RECOVER <node>
//! AT <tick> SILENCE <node> <duration>
//! AT <tick> BYZANTINE <node> <EQUIVOCATE_SPLIT|LATE_BLOCK|FLOOD_BLOAT|VOTE_NO>
//! AT <tick> SKEW <node> <offset>
//! ```
//!
//! Nodes are written `n<index>` or as a bare index.

use std::fmt;

use thiserror::Error;

use crate::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    /// Send one data block to half the peers and a conflicting one to the rest.
    EquivocateSplit,
    /// Publish the data block after the writing window closed.
    LateBlock,
    /// Stuff every block with extra bloat.
    FloodBloat,
    /// Oppose honest calls and call invalidations of honest data.
    VoteNo,
}

impl Behavior {
    pub fn name(self) -> &'static str {
        match self {
            Behavior::EquivocateSplit => "EQUIVOCATE_SPLIT",
            Behavior::LateBlock => "LATE_BLOCK",
            Behavior::FloodBloat => "FLOOD_BLOAT",
            Behavior::VoteNo => "VOTE_NO",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "EQUIVOCATE_SPLIT" | "EQUIVOCATESPLIT" => Behavior::EquivocateSplit,
            "LATE_BLOCK" | "LATEBLOCK" => Behavior::LateBlock,
            "FLOOD_BLOAT" | "FLOODBLOAT" => Behavior::FloodBloat,
            "VOTE_NO" | "VOTENO" => Behavior::VoteNo,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    Partition(Vec<Vec<usize>>),
    Heal,
    Crash(usize),
    Recover(usize),
    Silence { node: usize, duration: Tick },
    Byzantine { node: usize, behavior: Behavior },
    ClockSkew { node: usize, offset: i64 },
}

impl FaultKind {
    /// Nodes the event names.
    pub fn nodes(&self) -> Vec<usize> {
        match self {
            FaultKind::Partition(groups) => groups.iter().flatten().copied().collect(),
            FaultKind::Heal => Vec::new(),
            FaultKind::Crash(n) | FaultKind::Recover(n) => vec![*n],
            FaultKind::Silence { node, .. }
            | FaultKind::Byzantine { node, .. }
            | FaultKind::ClockSkew { node, .. } => vec![*node],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultEvent {
    pub at: Tick,
    pub kind: FaultKind,
}

impl FaultEvent {
    pub fn new(at: Tick, kind: FaultKind) -> Self {
        FaultEvent { at, kind }
    }
}

impl fmt::Display for FaultEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AT {} ", self.at)?;
        match &self.kind {
            FaultKind::Partition(groups) => {
                f.write_str("PARTITION")?;
                for g in groups {
                    let names: Vec<String> = g.iter().map(|n| format!("n{n}")).collect();
                    write!(f, " {}", names.join(","))?;
                }
                Ok(())
            }
            FaultKind::Heal => f.write_str("HEAL"),
            FaultKind::Crash(n) => write!(f, "CRASH n{n}"),
            FaultKind::Recover(n) => write!(f, "RECOVER n{n}"),
            FaultKind::Silence { node, duration } => write!(f, "SILENCE n{node} {duration}"),
            FaultKind::Byzantine { node, behavior } => {
                write!(f, "BYZANTINE n{node} {}", behavior.name())
            }
            FaultKind::ClockSkew { node, offset } => write!(f, "SKEW n{node} {offset}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("scenario line {line}: {reason}")]
pub struct ScenarioError {
    pub line: usize,
    pub reason: String,
}

fn parse_node(s: &str) -> Option<usize> {
    s.strip_prefix('n').unwrap_or(s).parse().ok()
}

/// Parse a scenario; events come back ordered by tick, ties in file order.
pub fn parse_scenario(text: &str) -> Result<Vec<FaultEvent>, ScenarioError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| ScenarioError {
            line: i + 1,
            reason: reason.to_string(),
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() < 3 || !words[0].eq_ignore_ascii_case("AT") {
            return Err(err("expected `AT <tick> <EVENT> <args>`"));
        }
        let at: Tick = words[1].parse().map_err(|_| err("bad tick"))?;
        let args = &words[3..];
        let node = |k: usize| {
            args.get(k)
                .and_then(|s| parse_node(s))
                .ok_or_else(|| err("bad node"))
        };
        let kind = match words[2].to_ascii_uppercase().as_str() {
            "PARTITION" => {
                if args.is_empty() {
                    return Err(err("PARTITION needs at least one group"));
                }
                let mut groups = Vec::new();
                for g in args {
                    let members: Option<Vec<usize>> = g.split(',').map(parse_node).collect();
                    groups.push(members.ok_or_else(|| err("bad group"))?);
                }
                FaultKind::Partition(groups)
            }
            "HEAL" => FaultKind::Heal,
            "CRASH" => FaultKind::Crash(node(0)?),
            "RECOVER" => FaultKind::Recover(node(0)?),
            "SILENCE" => FaultKind::Silence {
                node: node(0)?,
                duration: args
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad duration"))?,
            },
            "BYZANTINE" => FaultKind::Byzantine {
                node: node(0)?,
                behavior: args
                    .get(1)
                    .and_then(|s| Behavior::parse(s))
                    .ok_or_else(|| err("unknown behavior"))?,
            },
            "SKEW" | "CLOCKSKEW" => FaultKind::ClockSkew {
                node: node(0)?,
                offset: args
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad offset"))?,
            },
            other => return Err(err(&format!("unknown event `{other}`"))),
        };
        events.push(FaultEvent { at, kind });
    }
    events.sort_by_key(|e| e.at);
    Ok(events)
}

pub fn scenario_text(events: &[FaultEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}
