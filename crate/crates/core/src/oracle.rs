//! Ground truth for small instances: exhaustive enumeration and a
//! bound-pruned best-first search.

use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ascent::next_combination;
use crate::error::{Error, Result};
use crate::problem::PreprocessedInstance;

/// Largest subset count the exhaustive oracle will walk.
pub const ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Optimal objective, `-inf` when no selection satisfies the cap.
    pub opt: f64,
    /// Original indices of an optimal selection (fixed members included),
    /// ascending; empty when infeasible.
    pub argmax: Vec<usize>,
    /// Number of subsets visited.
    pub enumerated: u64,
    pub feasible_count: u64,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Check every size-`(N-p)` subset of the free set. Ties go to the
/// lexicographically first subset in sorted-V order.
pub fn enumerate_ed(pp: &PreprocessedInstance) -> Result<OracleResult> {
    let kv = pp.n_free();
    let k = pp.k_select();
    let count = binomial(kv as u64, k as u64);
    if count > ENUMERATION_CAP {
        return Err(Error::CapExceeded(format!(
            "C({kv}, {k}) = {count} subsets exceeds the enumeration cap"
        )));
    }

    let mut best = f64::NEG_INFINITY;
    let mut best_subset: Option<Vec<usize>> = None;
    let mut enumerated = 0u64;
    let mut feasible_count = 0u64;

    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        enumerated += 1;
        let x = pp.x_from_chosen(&subset);
        let xax = pp.kin().quad_form(&x);
        if xax <= pp.inst.theta2 {
            feasible_count += 1;
            let gx: f64 = pp.inst.g.iter().zip(&x).map(|(a, b)| a * b).sum();
            if gx > best {
                best = gx;
                best_subset = Some(subset.clone());
            }
        }
        if !next_combination(&mut subset, kv) {
            break;
        }
    }

    let argmax = match best_subset {
        Some(sub) => {
            let mut ids: Vec<usize> = sub.iter().map(|&p| pp.v[p]).collect();
            ids.extend(
                pp.f
                    .iter()
                    .zip(&pp.c_f)
                    .filter(|&(_, &c)| c > 0.0)
                    .map(|(&i, _)| i),
            );
            ids.sort_unstable();
            ids
        }
        None => Vec::new(),
    };

    Ok(OracleResult {
        opt: best,
        argmax,
        enumerated,
        feasible_count,
    })
}

/// Outcome of the best-first search.
#[derive(Debug, Clone, Serialize)]
pub struct BnbOutcome {
    pub result: OracleResult,
    /// Valid upper bound on the optimum at termination.
    pub upper_bound: f64,
    /// Certified relative gap `(bound - opt) / max(1, |opt|)`.
    pub rel_gap: f64,
    pub timed_out: bool,
}

#[derive(Debug)]
struct Node {
    bound: f64,
    depth: usize,
    n_pos: usize,
    /// Signs of positions `0..depth` in sorted-V order, bit = positive.
    mask: u128,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

/// Best-first branch and bound over the signs of the sorted free set,
/// bounding each node by the sorting relaxation of its suffix (the
/// coancestry row is dropped, so the bound is valid with or without the
/// sorting-optimality assumption).
pub fn branch_and_bound_ed(
    pp: &PreprocessedInstance,
    gap: f64,
    time_cap: Duration,
) -> Result<BnbOutcome> {
    assert!(gap >= 0.0);
    let kv = pp.n_free();
    let k = pp.k_select();
    if kv > 128 {
        return Err(Error::CapExceeded(format!(
            "branch and bound mask is capped at |V| <= 128, got {kv}"
        )));
    }
    let start = Instant::now();

    // prefix sums of gbar over sorted V for O(1) suffix bounds
    let mut prefix = vec![0.0; kv + 1];
    for i in 0..kv {
        prefix[i + 1] = prefix[i] + pp.gbar_v[i];
    }
    // best transformed objective achievable below (depth, n_pos): assigned
    // part is added by the caller
    let suffix_bound = |depth: usize, n_pos: usize| -> f64 {
        let rem_pos = k - n_pos;
        let plus = prefix[depth + rem_pos] - prefix[depth];
        let minus = prefix[kv] - prefix[depth + rem_pos];
        plus - minus
    };

    let mut incumbent = f64::NEG_INFINITY;
    let mut incumbent_subset: Option<Vec<usize>> = None;
    let mut enumerated = 0u64;
    let mut feasible_count = 0u64;
    let mut timed_out = false;

    let root_bound = 2.0 * suffix_bound(0, 0) + pp.gbar;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: root_bound,
        depth: 0,
        n_pos: 0,
        mask: 0,
    });
    let mut global_bound = root_bound;

    let certified = |bound: f64, incumbent: f64| -> bool {
        incumbent.is_finite() && bound - incumbent <= gap * incumbent.abs().max(1.0)
    };

    while let Some(node) = heap.pop() {
        global_bound = node.bound;
        if certified(global_bound, incumbent) {
            break;
        }
        if start.elapsed() > time_cap {
            timed_out = true;
            break;
        }

        if node.depth == kv {
            enumerated += 1;
            let subset: Vec<usize> = (0..kv).filter(|&i| node.mask >> i & 1 == 1).collect();
            let x = pp.x_from_chosen(&subset);
            if pp.kin().quad_form(&x) <= pp.inst.theta2 {
                feasible_count += 1;
                let gx: f64 = pp.inst.g.iter().zip(&x).map(|(a, b)| a * b).sum();
                if gx > incumbent {
                    incumbent = gx;
                    incumbent_subset = Some(subset);
                }
            }
            continue;
        }

        // branch on the sign of position `depth`
        let assigned: f64 = (0..node.depth)
            .map(|i| {
                let s = if node.mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                pp.gbar_v[i] * s
            })
            .sum();
        for positive in [true, false] {
            let n_pos = node.n_pos + positive as usize;
            if n_pos > k || (node.depth + 1 - n_pos) > kv - k {
                continue;
            }
            let s = if positive { 1.0 } else { -1.0 };
            let bound =
                2.0 * (assigned + s * pp.gbar_v[node.depth] + suffix_bound(node.depth + 1, n_pos))
                    + pp.gbar;
            if certified(bound, incumbent) {
                continue;
            }
            heap.push(Node {
                bound,
                depth: node.depth + 1,
                n_pos,
                mask: node.mask | (u128::from(positive) << node.depth),
            });
        }
    }
    if heap.is_empty() && !timed_out {
        // exhausted: the bound collapses onto the incumbent
        global_bound = incumbent;
    }

    let argmax = match &incumbent_subset {
        Some(sub) => {
            let mut ids: Vec<usize> = sub.iter().map(|&p| pp.v[p]).collect();
            ids.extend(
                pp.f
                    .iter()
                    .zip(&pp.c_f)
                    .filter(|&(_, &c)| c > 0.0)
                    .map(|(&i, _)| i),
            );
            ids.sort_unstable();
            ids
        }
        None => Vec::new(),
    };
    let rel_gap = if incumbent.is_finite() {
        ((global_bound - incumbent) / incumbent.abs().max(1.0)).max(0.0)
    } else {
        f64::INFINITY
    };

    Ok(BnbOutcome {
        result: OracleResult {
            opt: incumbent,
            argmax,
            enumerated,
            feasible_count,
        },
        upper_bound: global_bound.max(incumbent),
        rel_gap,
        timed_out,
    })
}
