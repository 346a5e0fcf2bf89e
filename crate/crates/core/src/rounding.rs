//! Randomized hyperplane rounding from the SDP solution.
//!
//! The moment matrix is factorized as `Y = V'V` (eigendecomposition, negative
//! eigenvalues clipped at zero), a direction `v` is drawn uniformly from the
//! unit sphere, and each free index receives the sign
//! `sign(v'v^0) sign(v'v^i)`. The expectation of the rounded objective is
//! bracketed by
//!
//! ```text
//!   (2/π) OPT_SDP + (1 - 2/π)(gbar - 2 gbar_V'e)   <=   E[2 gbar_V'ỹ + gbar]
//!   E[...]   <=   α OPT_SDP + (1 - α)(gbar + 2 gbar_V'e)
//! ```
//!
//! with `α = min_{0<t<=π} (2/π) t / (1 - cos t) ≈ 0.87856`. The raw rounded
//! sign vector may violate both the cardinality and the coancestry rows;
//! repair to a proper selection is a separate, explicit step.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::OnceLock;

use crate::ascent::Selection;
use crate::problem::PreprocessedInstance;
use crate::relax::sdp::SdpSolution;

/// Theoretical bracket and sampled expectation of the rounded objective.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub expected: f64,
    pub samples: usize,
    pub opt_sdp: f64,
    pub alpha: f64,
    /// Standard error of the sampled mean.
    pub std_error: f64,
}

/// The rounding constant, minimized once by golden-section search on
/// `(0, π]` to 1e-10.
pub fn alpha() -> f64 {
    static ALPHA: OnceLock<f64> = OnceLock::new();
    *ALPHA.get_or_init(|| {
        let h = |t: f64| (2.0 / std::f64::consts::PI) * t / (1.0 - t.cos());
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (1e-9, std::f64::consts::PI);
        let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
        while b - a > 1e-10 {
            if h(c) < h(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        h(0.5 * (a + b))
    })
}

/// Columns of the Gram factor `V` with `Y = V'V`, negative eigenvalues
/// clipped at zero.
fn gram_factor(y: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(y.clone());
    let n = y.nrows();
    let mut vt = DMatrix::zeros(n, n);
    for r in 0..n {
        let lam = eig.eigenvalues[r].max(0.0).sqrt();
        for c in 0..n {
            vt[(r, c)] = lam * eig.eigenvectors[(c, r)];
        }
    }
    vt
}

fn signs_from_direction(vt: &DMatrix<f64>, dir: &[f64]) -> Vec<i8> {
    let n = vt.nrows();
    // sign(0) = +1 by convention
    let dot = |col: usize| -> f64 { (0..n).map(|r| vt[(r, col)] * dir[r]).sum() };
    let s0 = if dot(0) >= 0.0 { 1i8 } else { -1i8 };
    (1..n)
        .map(|i| {
            let si = if dot(i) >= 0.0 { 1i8 } else { -1i8 };
            s0 * si
        })
        .collect()
}

fn unit_sphere_direction(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        // Box-Muller pairs; normalized Gaussian is uniform on the sphere
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// One rounding draw: a ±1 vector over the free set, deterministic for a
/// fixed seed.
pub fn round_once(sol: &SdpSolution, rng_seed: u64) -> Vec<i8> {
    let vt = gram_factor(&sol.y_mat);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dir = unit_sphere_direction(&mut rng, vt.nrows());
    signs_from_direction(&vt, &dir)
}

/// Sample the rounded objective and report it against the theoretical
/// bracket. Sample `k` draws from stream `k` of the seed, so the mean does
/// not depend on how the loop is partitioned.
pub fn estimate_expectation(
    sol: &SdpSolution,
    pp: &PreprocessedInstance,
    samples: usize,
    seed: u64,
) -> BoundsReport {
    assert!(samples >= 1);
    let vt = gram_factor(&sol.y_mat);
    let n = vt.nrows();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let dir = unit_sphere_direction(&mut rng, n);
        let y = signs_from_direction(&vt, &dir);
        let val = 2.0
            * pp.gbar_v
                .iter()
                .zip(&y)
                .map(|(g, &s)| g * s as f64)
                .sum::<f64>()
            + pp.gbar;
        sum += val;
        sum_sq += val * val;
    }
    let expected = sum / samples as f64;
    let var = (sum_sq / samples as f64 - expected * expected).max(0.0);
    let std_error = (var / samples as f64).sqrt();

    let spread = 2.0 * pp.gbar_v.iter().sum::<f64>();
    let two_over_pi = 2.0 / std::f64::consts::PI;
    let al = alpha();
    BoundsReport {
        lower: two_over_pi * sol.objective + (1.0 - two_over_pi) * (pp.gbar - spread),
        upper: al * sol.objective + (1.0 - al) * (pp.gbar + spread),
        expected,
        samples,
        opt_sdp: sol.objective,
        alpha: al,
        std_error,
    }
}

/// Flip the weakest surplus signs until exactly `N - p` free entries are
/// positive, then materialize the selection. Surplus positives are flipped
/// from the smallest `gbar` upward; missing positives are recruited from the
/// largest-`gbar` negatives.
pub fn repair_to_selection(y: &[i8], pp: &PreprocessedInstance, lambda: f64) -> Selection {
    assert_eq!(y.len(), pp.n_free());
    let k = pp.k_select();
    // positions of positives in V order (gbar is non-increasing along V)
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0).collect();
    if pos.len() > k {
        pos.truncate(k);
    } else if pos.len() < k {
        let mut want = k - pos.len();
        for i in 0..y.len() {
            if want == 0 {
                break;
            }
            if y[i] <= 0 {
                pos.push(i);
                want -= 1;
            }
        }
        pos.sort_unstable();
    }
    Selection::from_v_positions(pp, &pos, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinship::build_numerator;
    use crate::pedigree::Pedigree;
    use crate::problem::{preprocess, EdInstance};
    use crate::relax::SolveStatus;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn fake_solution(y: DMatrix<f64>, objective: f64) -> SdpSolution {
        let y_v: Vec<f64> = (1..y.nrows()).map(|i| y[(0, i)]).collect();
        SdpSolution {
            y_mat: y,
            y_v,
            objective,
            status: SolveStatus::Optimal,
            residuals: BTreeMap::new(),
            wall_time: 0.0,
        }
    }

    fn founders_pp(g: Vec<f64>, theta2: f64, n: usize) -> PreprocessedInstance {
        let z = g.len();
        let text = (1..=z).fold("id,sire,dam\n".to_string(), |acc, i| {
            acc + &format!("{i},0,0\n")
        });
        let p = Pedigree::parse(&text).unwrap();
        let kin = Arc::new(build_numerator(&p).unwrap());
        preprocess(&Arc::new(EdInstance::new(kin, g, theta2, n).unwrap())).unwrap()
    }

    #[test]
    fn alpha_matches_known_constant() {
        let a = alpha();
        assert!((a - 0.87856).abs() <= 1e-4, "alpha = {a}");
        assert!(a >= 0.8785 && a <= 0.8786);
    }

    #[test]
    fn all_ones_matrix_rounds_to_all_ones() {
        let y = DMatrix::from_element(4, 4, 1.0);
        let sol = fake_solution(y, 0.0);
        for seed in 0..20 {
            assert_eq!(round_once(&sol, seed), vec![1, 1, 1]);
        }
    }

    #[test]
    fn identity_block_rounds_to_fair_coins() {
        let y = DMatrix::identity(3, 3);
        let sol = fake_solution(y, 0.0);
        let n = 4000;
        let mut up = [0usize; 2];
        for seed in 0..n {
            let v = round_once(&sol, seed as u64);
            for i in 0..2 {
                if v[i] > 0 {
                    up[i] += 1;
                }
            }
        }
        for count in up {
            let frac = count as f64 / n as f64;
            assert!((frac - 0.5).abs() < 0.05, "frac = {frac}");
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let y = DMatrix::identity(4, 4);
        let sol = fake_solution(y, 0.0);
        assert_eq!(round_once(&sol, 123), round_once(&sol, 123));
    }

    #[test]
    fn equal_ebvs_collapse_the_bracket() {
        let pp = founders_pp(vec![2.0; 4], 1.0, 2);
        let sol = crate::relax::sdp::solve_sdp(&pp, 1e-8).unwrap();
        let rep = estimate_expectation(&sol, &pp, 50, 7);
        assert_abs_diff_eq!(rep.lower, pp.gbar, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.upper, pp.gbar, epsilon = 1e-6);
        assert_abs_diff_eq!(rep.expected, pp.gbar, epsilon = 1e-9);
    }

    #[test]
    fn bracket_orders_correctly_and_contains_expectation() {
        let pp = founders_pp(vec![5.0, 4.0, 2.0, 1.0], 0.8, 2);
        let sol = crate::relax::sdp::solve_sdp(&pp, 1e-8).unwrap();
        let rep = estimate_expectation(&sol, &pp, 1000, 11);
        assert!(rep.lower <= rep.upper + 1e-9);
        assert!(rep.lower <= rep.expected + 3.0 * rep.std_error);
        assert!(rep.expected <= rep.upper + 3.0 * rep.std_error);
    }

    #[test]
    fn objective_of_signs_is_bracketed_pointwise() {
        let pp = founders_pp(vec![5.0, 4.0, 2.0, 1.0], 0.8, 2);
        let sol = crate::relax::sdp::solve_sdp(&pp, 1e-8).unwrap();
        let spread = 2.0 * pp.gbar_v.iter().sum::<f64>();
        for seed in 0..50u64 {
            let y = round_once(&sol, seed);
            assert!(y.iter().all(|&s| s == 1 || s == -1));
            let val = 2.0
                * pp.gbar_v
                    .iter()
                    .zip(&y)
                    .map(|(g, &s)| g * s as f64)
                    .sum::<f64>()
                + pp.gbar;
            assert!(val >= pp.gbar - spread - 1e-12);
            assert!(val <= pp.gbar + spread + 1e-12);
        }
    }

    /// Exact expectation over a rank-2 factor by arc enumeration: each column
    /// is a point on the circle, the sign pattern is constant on arcs between
    /// the normals' boundary angles, and each arc's probability is its length
    /// over 2π.
    fn exact_expectation_rank2(angles: &[f64], pp: &PreprocessedInstance) -> f64 {
        // boundary angles where sign(v·v^i) flips: t_i + π/2 (mod π)
        let mut cuts: Vec<f64> = Vec::new();
        for &t in angles {
            cuts.push((t + std::f64::consts::FRAC_PI_2).rem_euclid(2.0 * std::f64::consts::PI));
            cuts.push((t - std::f64::consts::FRAC_PI_2).rem_euclid(2.0 * std::f64::consts::PI));
        }
        cuts.push(0.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        cuts.push(2.0 * std::f64::consts::PI);

        let mut expectation = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let weight = (w[1] - w[0]) / (2.0 * std::f64::consts::PI);
            let s = |t: f64| {
                if (mid - t).cos() >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            };
            let s0 = s(angles[0]);
            let val = 2.0
                * pp.gbar_v
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g * s0 * s(angles[i + 1]))
                    .sum::<f64>()
                + pp.gbar;
            expectation += weight * val;
        }
        expectation
    }

    #[test]
    fn sampled_mean_matches_rank2_arc_enumeration() {
        let pp = founders_pp(vec![5.0, 4.0, 2.0], 0.8, 2);
        // rank-2 moment matrix from circle points
        let angles = [0.0f64, 0.4, 2.2, 2.9];
        let n = angles.len();
        let mut y = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                y[(i, j)] = (angles[i] - angles[j]).cos();
            }
        }
        let sol = fake_solution(y, 0.0);
        let rep = estimate_expectation(&sol, &pp, 100_000, 31);
        let exact = exact_expectation_rank2(&angles, &pp);
        let tol = 3.0 * rep.std_error;
        assert!(
            (rep.expected - exact).abs() <= tol,
            "sampled {} vs exact {} (3σ = {})",
            rep.expected,
            exact,
            tol
        );
    }

    #[test]
    fn gw_probability_matches_on_rank2_inputs() {
        // empirical P(ỹ_i = +1) vs 1 - arccos(Y_0i)/π
        let angles = [0.0f64, 1.1, 2.5];
        let n = angles.len();
        let mut y = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                y[(i, j)] = (angles[i] - angles[j]).cos();
            }
        }
        let sol = fake_solution(y.clone(), 0.0);
        let samples = 40_000;
        let mut ups = vec![0usize; n - 1];
        for seed in 0..samples {
            let v = round_once(&sol, seed as u64);
            for (i, &s) in v.iter().enumerate() {
                if s > 0 {
                    ups[i] += 1;
                }
            }
        }
        for i in 0..n - 1 {
            let want = 1.0 - y[(0, i + 1)].acos() / std::f64::consts::PI;
            let got = ups[i] as f64 / samples as f64;
            let sigma = (want * (1.0 - want) / samples as f64).sqrt();
            assert!(
                (got - want).abs() <= 4.0 * sigma + 1e-3,
                "i = {i}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn repair_keeps_correct_count() {
        let pp = founders_pp(vec![5.0, 4.0, 2.0, 1.0], 0.8, 2);
        // already balanced: unchanged
        let sel = repair_to_selection(&[1, 1, -1, -1], &pp, 1.0);
        assert_eq!(sel.chosen, vec![0, 1]);
        // all +1 with k = 2: keep the two largest gbar (first in V order)
        let sel = repair_to_selection(&[1, 1, 1, 1], &pp, 1.0);
        assert_eq!(sel.chosen, vec![0, 1]);
        // all -1: recruit the largest gbar
        let sel = repair_to_selection(&[-1, -1, -1, -1], &pp, 1.0);
        assert_eq!(sel.chosen, vec![0, 1]);
    }

    #[test]
    fn repair_single_positive_keeps_largest() {
        let pp = founders_pp(vec![1.0, 4.0, 2.0], 1.0, 1);
        // V sorted by g: original indices (1, 2, 0); all +1 with k = 1 keeps
        // the highest-g index 1
        let sel = repair_to_selection(&[1, 1, 1], &pp, 1.0);
        assert_eq!(sel.chosen, vec![1]);
    }

    #[test]
    fn repair_on_t1_counts_shares() {
        let p = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n3,1,2\n4,1,2\n").unwrap();
        let kin = Arc::new(build_numerator(&p).unwrap());
        let inst = Arc::new(EdInstance::new(kin, vec![4.0, 3.0, 2.0, 1.0], 0.8, 2).unwrap());
        let pp = preprocess(&inst).unwrap();
        for pattern in [[1i8, 1, 1, -1], [-1, 1, -1, 1], [1, -1, -1, -1]] {
            let sel = repair_to_selection(&pattern, &pp, 1.0);
            assert_eq!(sel.x.iter().filter(|&&v| v == 0.5).count(), 2);
            assert_abs_diff_eq!(sel.x.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
