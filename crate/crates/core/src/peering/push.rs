use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

/// Roster-relative push tree: index 0 is the leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PushTree {
    pub n: usize,
    /// A source whose drain is offline pushes to the drain's drains itself.
    pub jump_pipes: bool,
    /// A neighbour on the same layer adopts an offline drain's drains.
    pub horizontal_pipes: bool,
}

impl PushTree {
    pub fn new(n: usize) -> Self {
        PushTree {
            n,
            jump_pipes: false,
            horizontal_pipes: false,
        }
    }
}

/// Indexes fed by `x`: the leader feeds 1..9, every other node feeds
/// `10x .. 10x+9`.
pub fn drains(x: usize, n: usize) -> Vec<usize> {
    let range = if x == 0 { 1..10 } else { x * 10..x * 10 + 10 };
    range.filter(|&d| d < n).collect()
}

/// Hops from the leader to index `x`: its decimal digit count.
pub fn hops(x: usize) -> u32 {
    if x == 0 {
        0
    } else {
        x.ilog10() + 1
    }
}

/// Index of roster position `pos` relative to leader position `leader`.
pub fn relative_index(pos: usize, leader: usize, n: usize) -> usize {
    (pos + n - leader % n) % n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub index: usize,
    pub hops: Option<u32>,
    pub source: Option<usize>,
}

impl Delivery {
    pub fn reached(&self) -> bool {
        self.hops.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReport {
    pub round: u64,
    pub deliveries: Vec<Delivery>,
    /// Times each index received the update; 1 everywhere under the plain tree.
    pub receipts: Vec<u32>,
}

impl DeliveryReport {
    pub fn reached(&self) -> BTreeSet<usize> {
        self.deliveries
            .iter()
            .filter(|d| d.reached())
            .map(|d| d.index)
            .collect()
    }

    pub fn unreached(&self) -> BTreeSet<usize> {
        self.deliveries
            .iter()
            .filter(|d| !d.reached())
            .map(|d| d.index)
            .collect()
    }

    pub fn max_hops(&self) -> u32 {
        self.deliveries
            .iter()
            .filter_map(|d| d.hops)
            .max()
            .unwrap_or(0)
    }

    pub fn hops_of(&self, index: usize) -> Option<u32> {
        self.deliveries.get(index).and_then(|d| d.hops)
    }

    /// `round,index,hops,reached`; unreached rows leave `hops` empty.
    pub fn to_csv(&self, header: bool) -> String {
        let mut s = String::new();
        if header {
            s.push_str("round,index,hops,reached\n");
        }
        for d in &self.deliveries {
            let h = d.hops.map(|h| h.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{}",
                self.round,
                d.index,
                h,
                u8::from(d.reached())
            );
        }
        s
    }
}

/// Breadth-first delivery from the leader over the drain rule. `online`
/// holds relative indexes; the leader is always treated as online.
pub fn push_round(tree: &PushTree, online: &BTreeSet<usize>, round: u64) -> DeliveryReport {
    let n = tree.n;
    let mut deliveries: Vec<Delivery> = (0..n)
        .map(|index| Delivery {
            index,
            hops: None,
            source: None,
        })
        .collect();
    let mut receipts = vec![0u32; n];
    if n == 0 {
        return DeliveryReport {
            round,
            deliveries,
            receipts,
        };
    }
    deliveries[0].hops = Some(0);
    receipts[0] = 1;
    let is_online = |i: usize| i == 0 || online.contains(&i);
    let layer_of = |i: usize| hops(i);
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        let h = deliveries[x].hops.expect("queued nodes are reached");
        // Targets this node serves: its own drains plus orphans it adopts.
        let mut targets: VecDeque<usize> = drains(x, n).into();
        while let Some(d) = targets.pop_front() {
            if is_online(d) {
                receipts[d] += 1;
                if deliveries[d].hops.is_none() {
                    deliveries[d].hops = Some(h + 1);
                    deliveries[d].source = Some(x);
                    queue.push_back(d);
                }
            } else if tree.jump_pipes {
                targets.extend(drains(d, n));
            }
        }
        if tree.horizontal_pipes && x != 0 {
            // Adopt the drains of an offline right-hand neighbour on the same layer.
            let right = x + 1;
            if right < n && layer_of(right) == layer_of(x) && !is_online(right) {
                for d in drains(right, n) {
                    if is_online(d) {
                        receipts[d] += 1;
                        if deliveries[d].hops.is_none() {
                            deliveries[d].hops = Some(h + 2);
                            deliveries[d].source = Some(x);
                            queue.push_back(d);
                        }
                    }
                }
            }
        }
    }
    DeliveryReport {
        round,
        deliveries,
        receipts,
    }
}

/// The leader contacts every node directly.
pub fn full_push(n: usize, online: &BTreeSet<usize>, round: u64) -> DeliveryReport {
    let deliveries = (0..n)
        .map(|i| {
            let up = i == 0 || online.contains(&i);
            Delivery {
                index: i,
                hops: up.then_some(u32::from(i != 0)),
                source: (up && i != 0).then_some(0),
            }
        })
        .collect::<Vec<_>>();
    let receipts = deliveries.iter().map(|d| u32::from(d.reached())).collect();
    DeliveryReport {
        round,
        deliveries,
        receipts,
    }
}
