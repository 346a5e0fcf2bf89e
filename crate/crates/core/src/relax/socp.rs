//! The SOCP relaxation in the sparse-friendly variables `z = A x`.
//!
//! With `B'B = A^-1` the coancestry cap turns into the cone membership
//! `(sqrt(2θ), Bz) ∈ K^{1+Z}`, and every other constraint row is a sparse row
//! of `A^-1`:
//!
//! ```text
//!   max  (A^-1 g)' z
//!   s.t. (A^-1 e)' z = 1
//!        (sqrt(2θ), Bz) ∈ K^{1+Z}
//!        0 <= [A^-1 z]_i <= 1/N   for i in V
//!        [A^-1 z]_i = c_i         for i in F
//! ```
//!
//! Fixed variables stay in the model as equality rows: eliminating them would
//! destroy the sparsity of `A^-1` and `B`.

use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::problem::PreprocessedInstance;
use crate::relax::{RelaxKind, RelaxationResult, SolveStatus};

pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_ITER: u32 = 200;

/// The assembled Eq.-style model in the variable `z = A x`.
#[derive(Debug, Clone)]
pub struct SocpModel {
    /// Objective vector `A^-1 g`.
    pub c: Vec<f64>,
    /// Simplex row `A^-1 e`.
    pub aeq: Vec<f64>,
    /// Free indices with box rows `0 <= [A^-1 z]_i <= 1/N`.
    pub box_rows: Vec<usize>,
    /// Fixed indices with equality rows `[A^-1 z]_i = c_i`.
    pub fixed_rows: Vec<(usize, f64)>,
    pub theta2: f64,
    pub n_select: usize,
    z: usize,
}

/// Assemble the SOCP model by sparse products with `A^-1`; `A` is never
/// inverted densely.
pub fn build_socp(pp: &PreprocessedInstance) -> SocpModel {
    let kin = pp.kin();
    let z = kin.z();
    let mut c = vec![0.0; z];
    kin.ainv_matvec(&pp.inst.g, &mut c);
    let ones = vec![1.0; z];
    let mut aeq = vec![0.0; z];
    kin.ainv_matvec(&ones, &mut aeq);

    SocpModel {
        c,
        aeq,
        box_rows: pp.v.clone(),
        fixed_rows: pp.f.iter().copied().zip(pp.c_f.iter().copied()).collect(),
        theta2: pp.inst.theta2,
        n_select: pp.inst.n_select,
        z,
    }
}

/// Column-sorted CSC from triplets, for handing to the cone solver.
pub(crate) fn csc_from_triplets(
    m: usize,
    n: usize,
    mut trips: Vec<(usize, usize, f64)>,
) -> CscMatrix<f64> {
    trips.sort_unstable_by_key(|t| (t.1, t.0));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(trips.len());
    for (r, c, v) in trips {
        debug_assert!(r < m && c < n);
        match merged.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => merged.push((r, c, v)),
        }
    }
    let mut colptr = vec![0usize; n + 1];
    for &(_, c, _) in &merged {
        colptr[c + 1] += 1;
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(
        m,
        n,
        colptr,
        merged.iter().map(|t| t.0).collect(),
        merged.iter().map(|t| t.2).collect(),
    )
}

/// Solve the model with a primal-dual interior-point method over the product
/// cone (zero rows, box slacks, one second-order cone).
pub fn solve_socp(pp: &PreprocessedInstance, model: &SocpModel, tol: f64) -> Result<RelaxationResult> {
    assert!(tol > 0.0);
    let start = Instant::now();
    let kin = pp.kin();
    let z = model.z;
    let n_f = model.n_select as f64;

    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row = 0usize;

    // zero cone: simplex row, then one equality row per fixed index
    for (j, &v) in model.aeq.iter().enumerate() {
        if v != 0.0 {
            trips.push((row, j, v));
        }
    }
    b.push(1.0);
    row += 1;
    for &(i, ci) in &model.fixed_rows {
        let (cols, vals) = kin.ainv().row(i);
        for (&cj, &vj) in cols.iter().zip(vals) {
            trips.push((row, cj, vj));
        }
        b.push(ci);
        row += 1;
    }
    let n_zero = row;

    // nonnegative cone: lower rows -[A^-1 z]_i <= 0, then upper rows
    // [A^-1 z]_i <= 1/N
    for &i in &model.box_rows {
        let (cols, vals) = kin.ainv().row(i);
        for (&cj, &vj) in cols.iter().zip(vals) {
            trips.push((row, cj, -vj));
        }
        b.push(0.0);
        row += 1;
    }
    for &i in &model.box_rows {
        let (cols, vals) = kin.ainv().row(i);
        for (&cj, &vj) in cols.iter().zip(vals) {
            trips.push((row, cj, vj));
        }
        b.push(1.0 / n_f);
        row += 1;
    }
    let n_nonneg = 2 * model.box_rows.len();

    // second-order cone: s0 = sqrt(2θ), s_1.. = Bz
    b.push(model.theta2.sqrt());
    row += 1;
    for i in 0..z {
        let (cols, vals) = kin.b_factor().row(i);
        for (&cj, &vj) in cols.iter().zip(vals) {
            trips.push((row, cj, -vj));
        }
        b.push(0.0);
        row += 1;
    }

    let a_mat = csc_from_triplets(row, z, trips);
    let p_mat = CscMatrix::zeros((z, z));
    let q: Vec<f64> = model.c.iter().map(|v| -v).collect();
    let cones = vec![
        SupportedConeT::ZeroConeT(n_zero),
        SupportedConeT::NonnegativeConeT(n_nonneg),
        SupportedConeT::SecondOrderConeT(1 + z),
    ];

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(MAX_ITER)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .build()
        .map_err(|e| Error::SolverFailure(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
        .map_err(|e| Error::SolverFailure(format!("model build: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::Infeasible(
                "SOCP relaxation is primal infeasible".into(),
            ))
        }
        other => {
            return Err(Error::SolverFailure(format!(
                "SOCP solve terminated with {other:?} after {} iterations",
                sol.iterations
            )))
        }
    };

    // recover x = A^-1 z by a sparse product
    let mut x = vec![0.0; z];
    kin.ainv_matvec(&sol.x, &mut x);
    let (gx, xax) = pp.inst.objective_of(&x);

    let mut residuals = BTreeMap::new();
    residuals.insert("sum_to_one".into(), (x.iter().sum::<f64>() - 1.0).abs());
    let share = 1.0 / n_f;
    let box_violation = model
        .box_rows
        .iter()
        .map(|&i| (-x[i]).max(x[i] - share).max(0.0))
        .fold(0.0, f64::max);
    residuals.insert("box".into(), box_violation);
    residuals.insert("quad_slack".into(), model.theta2 - xax);
    residuals.insert("gap".into(), (sol.obj_val - sol.obj_val_dual).abs());
    residuals.insert("r_prim".into(), sol.r_prim);
    residuals.insert("r_dual".into(), sol.r_dual);

    Ok(RelaxationResult {
        kind: RelaxKind::Socp,
        x,
        objective: gx,
        status,
        residuals,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
