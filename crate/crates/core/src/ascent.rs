//! Penalized steepest ascent over fixed-cardinality selections.
//!
//! The coancestry cap is folded into the objective as
//! `f_λ(x) = g'x - λ max(x'Ax - 2θ, 0)` and the search walks the swap
//! neighborhood: starting from a rounded relaxation solution, every exchange
//! of a chosen free index `i` for an unchosen free index `j` is scored, the
//! best strictly improving swap is taken, and the walk stops when none
//! improves. The count of `1/N` entries is invariant, so every iterate is a
//! valid selection of exactly `N` genotypes.
//!
//! Scoring all `(i, j)` pairs reuses `Ax` and `x'Ax`, computed once per
//! iteration: the quadratic form at the swapped point expands to
//! `x'Ax + (2/N)(Ax_j - Ax_i) + (A_ii + A_jj - 2A_ij)/N^2`.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinship::KinshipSystem;
use crate::problem::{preprocess, EdInstance, PreprocessedInstance};
use crate::relax::sdp::{x_from_y, SdpSolution};
use crate::relax::{RelaxKind, RelaxationResult};

/// A 0-or-`1/N` contribution vector with its objective pieces.
#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    /// Original indices of the `N` selected genotypes, ascending.
    pub chosen: Vec<usize>,
    pub x: Vec<f64>,
    pub gx: f64,
    pub xax: f64,
    /// `f_λ(x)` at the λ the selection was built with.
    pub penalty_value: f64,
    /// Whether `x'Ax <= 2θ`.
    pub feasible: bool,
}

impl Selection {
    /// Build from V-local chosen positions; fixed `1/N` members of `F` are
    /// part of the selection automatically.
    pub fn from_v_positions(pp: &PreprocessedInstance, positions: &[usize], lambda: f64) -> Self {
        let x = pp.x_from_chosen(positions);
        let (gx, xax) = pp.inst.objective_of(&x);
        let mut chosen: Vec<usize> = positions.iter().map(|&p| pp.v[p]).collect();
        chosen.extend(
            pp.f
                .iter()
                .zip(&pp.c_f)
                .filter(|&(_, &c)| c > 0.0)
                .map(|(&i, _)| i),
        );
        chosen.sort_unstable();
        assert_eq!(chosen.len(), pp.inst.n_select, "selection must have exactly N members");
        let feasible = xax <= pp.inst.theta2;
        Selection {
            chosen,
            x,
            gx,
            xax,
            penalty_value: gx - lambda * (xax - pp.inst.theta2).max(0.0),
            feasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StartKind {
    Lp,
    Socp,
    Sdp,
    Rounded,
    Custom,
}

/// A starting contribution vector for the ascent, in original indexing.
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub kind: StartKind,
    pub x: Vec<f64>,
}

impl StartPoint {
    pub fn from_relaxation(r: &RelaxationResult) -> Self {
        let kind = match r.kind {
            RelaxKind::Lp => StartKind::Lp,
            RelaxKind::Socp => StartKind::Socp,
            RelaxKind::Sdp => StartKind::Sdp,
        };
        StartPoint { kind, x: r.x.clone() }
    }

    /// Map an SDP sign relaxation to contributions via `x = (y + e) / (2N)`.
    pub fn from_sdp(sol: &SdpSolution, pp: &PreprocessedInstance) -> Self {
        StartPoint {
            kind: StartKind::Sdp,
            x: x_from_y(pp, &sol.y_v),
        }
    }

    pub fn from_selection(sel: &Selection) -> Self {
        StartPoint {
            kind: StartKind::Rounded,
            x: sel.x.clone(),
        }
    }

    pub fn custom(x: Vec<f64>) -> Self {
        StartPoint {
            kind: StartKind::Custom,
            x,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapRecord {
    pub i_out: usize,
    pub j_in: usize,
    pub f_value: f64,
}

/// Trace of one ascent run.
#[derive(Debug, Clone, Serialize)]
pub struct AscentTrace {
    pub iterations: usize,
    pub swaps: Vec<SwapRecord>,
    pub start_kind: StartKind,
    pub lambda: f64,
    /// Set when the iteration cap stopped the walk before a local maximum.
    pub capped: bool,
}

/// Meuwissen's Lagrangian multiplier for the equality-constrained
/// relaxation:
/// `λ0 = sqrt(((g'A^-1 g)(e'A^-1 e) - (g'A^-1 e)^2) / (8θ e'A^-1 e - 4))`.
pub fn lambda0(inst: &EdInstance) -> Result<f64> {
    let z = inst.z();
    let mut ainv_g = vec![0.0; z];
    inst.kin.ainv_matvec(&inst.g, &mut ainv_g);
    let ones = vec![1.0; z];
    let mut ainv_e = vec![0.0; z];
    inst.kin.ainv_matvec(&ones, &mut ainv_e);

    let gag: f64 = inst.g.iter().zip(&ainv_g).map(|(a, b)| a * b).sum();
    let eae: f64 = ainv_e.iter().sum();
    let gae: f64 = ainv_g.iter().sum();

    // Cauchy-Schwarz keeps the numerator nonnegative up to roundoff
    let num = (gag * eae - gae * gae).max(0.0);
    let den = 4.0 * inst.theta2 * eae - 4.0;
    if den <= 0.0 {
        return Err(Error::Domain(format!(
            "λ0 undefined: 2θ = {} is at most 1/(e'A^-1 e) = {}",
            inst.theta2,
            1.0 / eae
        )));
    }
    Ok((num / den).sqrt())
}

/// `f_λ(x) = g'x - λ max(x'Ax - 2θ, 0)`.
pub fn penalty_value(inst: &EdInstance, x: &[f64], lambda: f64) -> f64 {
    assert!(lambda >= 0.0);
    let (gx, xax) = inst.objective_of(x);
    gx - lambda * (xax - inst.theta2).max(0.0)
}

/// Per-iteration cache for swap scoring: `Ax` and `x'Ax` at the current
/// iterate, plus memoized `A` columns on the matrix-free path.
pub struct QuadCache<'a> {
    kin: &'a KinshipSystem,
    pub ax: Vec<f64>,
    pub xax: f64,
    inv_n: f64,
    cols: RefCell<HashMap<usize, Vec<f64>>>,
}

impl<'a> QuadCache<'a> {
    pub fn new(kin: &'a KinshipSystem, x: &[f64], n_select: usize) -> Self {
        let mut ax = vec![0.0; kin.z()];
        kin.a_matvec(x, &mut ax);
        let xax = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        QuadCache {
            kin,
            ax,
            xax,
            inv_n: 1.0 / n_select as f64,
            cols: RefCell::new(HashMap::new()),
        }
    }

    fn a_entry(&self, i: usize, j: usize) -> f64 {
        if let Some(a) = self.kin.dense_a() {
            return a[(i, j)];
        }
        let mut cols = self.cols.borrow_mut();
        let col = cols.entry(i).or_insert_with(|| {
            let mut c = vec![0.0; self.kin.z()];
            self.kin.a_column(i, &mut c);
            c
        });
        col[j]
    }

    /// Quadratic form at `x - e_i/N + e_j/N` from the cached products.
    pub fn swap_delta(&self, i: usize, j: usize) -> f64 {
        let diag = self.kin.diag();
        self.xax + 2.0 * self.inv_n * (self.ax[j] - self.ax[i])
            + self.inv_n * self.inv_n * (diag[i] + diag[j] - 2.0 * self.a_entry(i, j))
    }
}

/// The rounding step that seeds the walk: order the free positions by start
/// value (ties by original index) and give the top `N - p` a `1/N` share.
fn initial_shares(pp: &PreprocessedInstance, start: &StartPoint) -> Vec<bool> {
    let kv = pp.n_free();
    let mut order: Vec<usize> = (0..kv).collect();
    order.sort_by(|&a, &b| {
        start.x[pp.v[b]]
            .partial_cmp(&start.x[pp.v[a]])
            .unwrap()
            .then(pp.v[a].cmp(&pp.v[b]))
    });
    let mut in_share = vec![false; kv];
    for &pos in order.iter().take(pp.k_select()) {
        in_share[pos] = true;
    }
    in_share
}

/// The selection the ascent would start from, without walking.
pub fn round_start(pp: &PreprocessedInstance, start: &StartPoint, lambda: f64) -> Selection {
    let in_share = initial_shares(pp, start);
    let positions: Vec<usize> = (0..pp.n_free()).filter(|&p| in_share[p]).collect();
    Selection::from_v_positions(pp, &positions, lambda)
}

/// Round a start to the best `N - p` free entries, then repeatedly take the
/// steepest strictly improving swap. `max_iter` defaults to `10 |V|`.
pub fn steepest_ascent(
    pp: &PreprocessedInstance,
    start: &StartPoint,
    lambda: f64,
    max_iter: Option<usize>,
) -> (Selection, AscentTrace) {
    assert!(lambda >= 0.0);
    let kv = pp.n_free();
    let n = pp.inst.n_select;
    let theta2 = pp.inst.theta2;
    let g = &pp.inst.g;
    let inv_n = 1.0 / n as f64;
    let max_iter = max_iter.unwrap_or(10 * kv);

    let mut in_share = initial_shares(pp, start);

    let chosen_positions = |in_share: &[bool]| -> Vec<usize> {
        (0..kv).filter(|&p| in_share[p]).collect()
    };

    let mut x = pp.x_from_chosen(&chosen_positions(&in_share));
    let mut gx: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
    let mut swaps = Vec::new();
    let mut iterations = 0;
    let mut capped = false;

    loop {
        let cache = QuadCache::new(pp.kin(), &x, n);
        let f_cur = gx - lambda * (cache.xax - theta2).max(0.0);

        // scan V_{1/N} x V_0; ties go to the lexicographically smallest
        // (i, j) in original indexing
        let mut best: Option<(f64, usize, usize, usize, usize, f64)> = None;
        for ip in 0..kv {
            if !in_share[ip] {
                continue;
            }
            let i = pp.v[ip];
            for jp in 0..kv {
                if in_share[jp] {
                    continue;
                }
                let j = pp.v[jp];
                let quad = cache.swap_delta(i, j);
                let cand_gx = gx + (g[j] - g[i]) * inv_n;
                let f = cand_gx - lambda * (quad - theta2).max(0.0);
                let better = match best {
                    None => true,
                    Some((bf, bi, bj, ..)) => f > bf || (f == bf && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((f, i, j, ip, jp, cand_gx));
                }
            }
        }

        let Some((f_best, i, j, ip, jp, new_gx)) = best else {
            break; // nothing to swap (k = 0 or k = |V|)
        };
        if f_best <= f_cur {
            break;
        }
        if iterations >= max_iter {
            capped = true;
            break;
        }

        in_share[ip] = false;
        in_share[jp] = true;
        x[i] = 0.0;
        x[j] = inv_n;
        gx = new_gx;
        iterations += 1;
        swaps.push(SwapRecord {
            i_out: i,
            j_in: j,
            f_value: f_best,
        });
    }

    let selection = Selection::from_v_positions(pp, &chosen_positions(&in_share), lambda);
    let trace = AscentTrace {
        iterations,
        swaps,
        start_kind: start.kind,
        lambda,
        capped,
    };
    (selection, trace)
}

/// Result of the exact penalty-threshold computation.
#[derive(Debug, Clone, Copy)]
pub struct LambdaHat {
    pub lambda: f64,
    /// Smallest positive coancestry violation over the selection lattice
    /// (0 when no lattice point violates the cap).
    pub phi: f64,
    /// True when every lattice point already satisfies the cap, so any
    /// λ >= 0 makes the penalized and constrained problems agree.
    pub any_lambda: bool,
}

/// Oracle-scale cap for [`lambda_hat`].
pub const LAMBDA_HAT_CAP: usize = 20;

/// Enumerate the selection lattice and compute the exact penalty threshold
/// `λ̂ = (max g - min g + 1) / φ̂`, where `φ̂` is the smallest positive
/// violation of the coancestry cap over the lattice.
pub fn lambda_hat(inst: &std::sync::Arc<EdInstance>) -> Result<LambdaHat> {
    if inst.z() > LAMBDA_HAT_CAP {
        return Err(Error::CapExceeded(format!(
            "lattice enumeration is capped at Z <= {LAMBDA_HAT_CAP}"
        )));
    }
    let pp = preprocess(inst)?;
    let kv = pp.n_free();
    let k = pp.k_select();

    // preprocess guarantees k <= |V|, so the lattice is nonempty
    let mut min_positive = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let x = pp.x_from_chosen(&subset);
        let violation = (inst.kin.quad_form(&x) - inst.theta2).max(0.0);
        if violation > 0.0 {
            min_positive = min_positive.min(violation);
        }
        if !next_combination(&mut subset, kv) {
            break;
        }
    }

    if min_positive.is_infinite() {
        return Ok(LambdaHat {
            lambda: 0.0,
            phi: 0.0,
            any_lambda: true,
        });
    }
    let g_max = inst.g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g_min = inst.g.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LambdaHat {
        lambda: (g_max - g_min + 1.0) / min_positive,
        phi: min_positive,
        any_lambda: false,
    })
}

/// Advance `subset` to the next k-combination of `0..n` in lexicographic
/// order; false when exhausted. An empty subset has no successor.
pub(crate) fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (k - i) {
            subset[i] += 1;
            for t in (i + 1)..k {
                subset[t] = subset[t - 1] + 1;
            }
            return true;
        }
    }
    false
}
