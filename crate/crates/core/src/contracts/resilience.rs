//! How many hostile nodes a shared-pile shuffle tolerates. Nodes are
//! grouped into shuffle parties; fraud needs at least one hostile node in
//! every party.

use crate::consensus::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Every node is its own party.
    FullMistrust,
    /// Consecutive parties of `k` nodes; leftover nodes join the last one.
    GroupsOf(usize),
    /// Exactly `g` parties, nodes assigned round-robin.
    FixedGroups(usize),
}

/// Party membership for `n` nodes, or `None` when the grouping is unusable.
pub fn groups(grouping: Grouping, n: usize) -> Option<Vec<Vec<usize>>> {
    if n < 3 {
        return None;
    }
    match grouping {
        Grouping::FullMistrust => groups(Grouping::GroupsOf(1), n),
        Grouping::GroupsOf(k) => {
            if k == 0 {
                return None;
            }
            let count = (n / k).max(1);
            let mut out = vec![Vec::new(); count];
            for i in 0..n {
                out[(i / k).min(count - 1)].push(i);
            }
            Some(out)
        }
        Grouping::FixedGroups(g) => {
            if g == 0 || g > n {
                return None;
            }
            let mut out = vec![Vec::new(); g];
            for i in 0..n {
                out[i % g].push(i);
            }
            Some(out)
        }
    }
}

/// Smallest hostile fraction that can corrupt the shuffle.
pub fn fraud_resilience(grouping: Grouping, n: usize) -> Option<Fraction> {
    groups(grouping, n).map(|g| Fraction::new(g.len() as u64, n as u64))
}

/// Exhaustive check: the smallest hostile subset touching every group,
/// searched by increasing size.
pub fn brute_force_resilience(grouping: Grouping, n: usize) -> Option<Fraction> {
    let gs = groups(grouping, n)?;
    let member: Vec<usize> = {
        let mut m = vec![0; n];
        for (gi, g) in gs.iter().enumerate() {
            for &i in g {
                m[i] = gi;
            }
        }
        m
    };
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let mut hit = vec![false; gs.len()];
            for &i in &idx {
                hit[member[i]] = true;
            }
            if hit.iter().all(|h| *h) {
                return Some(Fraction::new(size as u64, n as u64));
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    None
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
