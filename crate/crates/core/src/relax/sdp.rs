//! The SDP relaxation of the lifted ±1 formulation, for small free sets.
//!
//! The decision variable is the `(1+|V|) x (1+|V|)` moment matrix
//!
//! ```text
//!   Y = [ 1    y_V' ]
//!       [ y_V  Y_VV ]  ⪰ 0
//! ```
//!
//! maximizing `2 gbar_V' y_V + gbar` subject to the lifted coancestry row
//! `A_VV • Y_VV + 2 cbar_F' y_V <= 2 thetabar`, the cardinality rows
//! `e'y_V = Nbar` and `(ee') • Y_VV = Nbar^2`, and unit diagonal. The
//! cardinality pair forces a zero eigenvalue at every feasible point, so the
//! problem has no interior; the solver therefore accepts a reduced gap of
//! 1e-5 and reports such solutions as `NearOptimal`.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::PreprocessedInstance;
use crate::relax::socp::csc_from_triplets;
use crate::relax::SolveStatus;

/// Dense-solver cap on `|V|`.
pub const SDP_CAP: usize = 400;

/// Gap below which a prematurely terminated solve still counts as usable.
pub const NEAR_OPTIMAL_GAP: f64 = 1e-5;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Solution of the lifted relaxation.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// The full `(1+|V|) x (1+|V|)` moment matrix (index 0 is the lift row).
    pub y_mat: DMatrix<f64>,
    /// The sign relaxation `y_V` (row 0, entries 1..).
    pub y_v: Vec<f64>,
    /// `2 gbar_V' y_V + gbar`.
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: BTreeMap<String, f64>,
    pub wall_time: f64,
}

/// Position of `(i, j)`, `i <= j`, in the column-major upper triangle.
#[inline]
fn tri_pos(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// Scatter a symmetric coefficient matrix entry into svec form: diagonal
/// entries map 1:1, off-diagonals carry the sqrt(2) scaling.
#[inline]
fn svec_entry(i: usize, j: usize, v: f64) -> (usize, f64) {
    if i == j {
        (tri_pos(i, j), v)
    } else {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        (tri_pos(lo, hi), SQRT2 * v)
    }
}

/// Solve the SDP relaxation at the requested gap tolerance (clamped to
/// `>= 1e-7`; the problem has no interior, so tighter targets are not
/// meaningful).
pub fn solve_sdp(pp: &PreprocessedInstance, tol: f64) -> Result<SdpSolution> {
    let kv = pp.n_free();
    if kv > SDP_CAP {
        return Err(Error::CapExceeded(format!(
            "SDP relaxation is capped at |V| <= {SDP_CAP}, got {kv}"
        )));
    }
    let tol = tol.max(1e-7);
    let start = Instant::now();

    let n1 = kv + 1; // moment matrix order
    let d = n1 * (n1 + 1) / 2;
    let nbar = pp.nbar as f64;
    let a_vv = pp.a_vv();

    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row = 0usize;
    let push_entry = |trips: &mut Vec<(usize, usize, f64)>, row: usize, i, j, v| {
        let (col, val) = svec_entry(i, j, v);
        trips.push((row, col, val));
    };

    // zero cone
    // Y00 = 1
    push_entry(&mut trips, row, 0, 0, 1.0);
    b.push(1.0);
    row += 1;
    // -2 Nbar Y00 + 2 e'y = 0: the symmetric fringe matrix has ones at
    // (0, i) and (i, 0); each unordered pair is pushed once
    push_entry(&mut trips, row, 0, 0, -2.0 * nbar);
    for i in 1..=kv {
        push_entry(&mut trips, row, 0, i, 1.0);
    }
    b.push(0.0);
    row += 1;
    // -Nbar^2 Y00 + (ee') • Y_VV = 0
    push_entry(&mut trips, row, 0, 0, -nbar * nbar);
    for i in 1..=kv {
        for j in i..=kv {
            push_entry(&mut trips, row, i, j, 1.0);
        }
    }
    b.push(0.0);
    row += 1;
    // Y_ii - Y00 = 0
    for i in 1..=kv {
        push_entry(&mut trips, row, 0, 0, -1.0);
        push_entry(&mut trips, row, i, i, 1.0);
        b.push(0.0);
        row += 1;
    }
    let n_zero = row;

    // nonnegative cone: the lifted coancestry row
    push_entry(&mut trips, row, 0, 0, -2.0 * pp.thetabar);
    for (i, &c) in pp.cbar_f.iter().enumerate() {
        push_entry(&mut trips, row, 0, i + 1, c);
    }
    for i in 0..kv {
        for j in i..kv {
            push_entry(&mut trips, row, i + 1, j + 1, a_vv[(i, j)]);
        }
    }
    b.push(0.0);
    row += 1;

    // PSD cone: s = x
    for t in 0..d {
        trips.push((row + t, t, -1.0));
        b.push(0.0);
    }
    row += d;

    let a_mat = csc_from_triplets(row, d, trips);
    let p_mat = CscMatrix::zeros((d, d));
    let mut q = vec![0.0; d];
    for (i, &gb) in pp.gbar_v.iter().enumerate() {
        // objective matrix C has gbar on the (0, i) fringe; maximize C • Y
        let (col, val) = svec_entry(0, i + 1, gb);
        q[col] = -val;
    }
    let cones = vec![
        SupportedConeT::ZeroConeT(n_zero),
        SupportedConeT::NonnegativeConeT(1),
        SupportedConeT::PSDTriangleConeT(n1),
    ];

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .reduced_tol_gap_abs(NEAR_OPTIMAL_GAP)
        .reduced_tol_gap_rel(NEAR_OPTIMAL_GAP)
        .reduced_tol_feas(NEAR_OPTIMAL_GAP)
        .build()
        .map_err(|e| Error::SolverFailure(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
        .map_err(|e| Error::SolverFailure(format!("model build: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let gap = (sol.obj_val - sol.obj_val_dual).abs();
    let rel_gap = gap / sol.obj_val.abs().max(1.0);
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::Infeasible(
                "SDP relaxation is primal infeasible".into(),
            ))
        }
        SolverStatus::MaxIterations | SolverStatus::InsufficientProgress
            if rel_gap <= NEAR_OPTIMAL_GAP && sol.r_prim <= NEAR_OPTIMAL_GAP =>
        {
            SolveStatus::NearOptimal
        }
        other => {
            return Err(Error::SolverFailure(format!(
                "SDP solve terminated with {other:?} after {} iterations (gap {gap:.2e})",
                sol.iterations
            )))
        }
    };

    // unpack svec into the symmetric moment matrix
    let mut y_mat = DMatrix::zeros(n1, n1);
    for j in 0..n1 {
        for i in 0..=j {
            let raw = sol.x[tri_pos(i, j)];
            let v = if i == j { raw } else { raw / SQRT2 };
            y_mat[(i, j)] = v;
            y_mat[(j, i)] = v;
        }
    }
    let y_v: Vec<f64> = (1..n1).map(|i| y_mat[(0, i)]).collect();
    let objective = pp.transformed_objective(&y_v);

    let eig = nalgebra::SymmetricEigen::new(y_mat.clone());
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let diag_dev = (1..n1)
        .map(|i| (y_mat[(i, i)] - 1.0).abs())
        .fold(0.0, f64::max);

    let mut residuals = BTreeMap::new();
    residuals.insert("min_eig".into(), min_eig);
    residuals.insert("y00".into(), (y_mat[(0, 0)] - 1.0).abs());
    residuals.insert("diag_dev".into(), diag_dev);
    residuals.insert("gap".into(), gap);
    residuals.insert("r_prim".into(), sol.r_prim);
    residuals.insert("r_dual".into(), sol.r_dual);

    Ok(SdpSolution {
        y_mat,
        y_v,
        objective,
        status,
        residuals,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Closed form of the rounding-analysis floor: the minimum of `2 gbar_V' y`
/// over unit-diagonal PSD moment matrices is `-2 gbar_V' e`.
pub fn rho0_sdp(pp: &PreprocessedInstance) -> f64 {
    -2.0 * pp.gbar_v.iter().sum::<f64>()
}

/// Quadratic form of the moment matrix along the no-interior certificate
/// direction `(1, -e/Nbar)` (or `(0, e)` when `Nbar = 0`); near zero at
/// every feasible point.
pub fn check_no_interior(sol: &SdpSolution, pp: &PreprocessedInstance) -> f64 {
    let kv = pp.n_free();
    let mut u = vec![0.0; kv + 1];
    if pp.nbar != 0 {
        u[0] = 1.0;
        for ui in u.iter_mut().skip(1) {
            *ui = -1.0 / pp.nbar as f64;
        }
    } else {
        for ui in u.iter_mut().skip(1) {
            *ui = 1.0;
        }
    }
    let uv = nalgebra::DVector::from_row_slice(&u);
    (uv.transpose() * &sol.y_mat * &uv)[(0, 0)]
}

/// Contribution vector induced by a sign relaxation: `x_V = (y + e) / (2N)`
/// on the free set, fixed values elsewhere.
pub fn x_from_y(pp: &PreprocessedInstance, y_v: &[f64]) -> Vec<f64> {
    let n2 = 2.0 * pp.inst.n_select as f64;
    let mut x = vec![0.0; pp.z()];
    for (&i, &c) in pp.f.iter().zip(&pp.c_f) {
        x[i] = c;
    }
    for (&i, &y) in pp.v.iter().zip(y_v) {
        x[i] = (y + 1.0) / n2;
    }
    x
}
