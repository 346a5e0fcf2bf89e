//! ED instances, variable fixing, and the transformed constants shared by
//! every relaxation.
//!
//! Preprocessing fixes `x_i = 1/N` wherever `l_i > 0` and `x_i = 0` wherever
//! `u_i < 1/N`, splits the indices into the fixed set `F` and the free set
//! `V` (sorted by descending breeding value), and rewrites the problem in the
//! signed variables `y_V = 2N x_V - e`, producing
//!
//! ```text
//!   gbar_V   = (g_V - g_min e) / (4N)
//!   gbar     = (g_V - g_min e)'e / (2N) + (g_F - g_min e)'c_F + g_min
//!   cbar_F   = A_VV e + 2N A_VF c_F                  (length |V|)
//!   thetabar = 2N^2 (2θ - c_F' A_FF c_F) - e'A_VV e / 2 - 2N c_F' A_FV e
//!   Nbar     = 2(N - p) - |V|
//! ```
//!
//! so that `g'x = 2 gbar_V' y_V + gbar` for every feasible `x` and the
//! coancestry cap becomes `y'A_VV y + 2 cbar_F' y <= 2 thetabar`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kinship::KinshipSystem;
use crate::pedigree::Pedigree;
use crate::relax::lp::sum_smallest;

/// A raw equal-deployment instance.
#[derive(Debug, Clone)]
pub struct EdInstance {
    pub kin: Arc<KinshipSystem>,
    /// Estimated breeding values, length `Z`.
    pub g: Vec<f64>,
    /// The coancestry cap, supplied as `2θ`.
    pub theta2: f64,
    /// Number of genotypes to select.
    pub n_select: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl EdInstance {
    /// Instance with free bounds `0 <= x <= 1`.
    pub fn new(kin: Arc<KinshipSystem>, g: Vec<f64>, theta2: f64, n_select: usize) -> Result<Self> {
        let z = kin.z();
        Self::with_bounds(kin, g, theta2, n_select, vec![0.0; z], vec![1.0; z])
    }

    pub fn with_bounds(
        kin: Arc<KinshipSystem>,
        g: Vec<f64>,
        theta2: f64,
        n_select: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let z = kin.z();
        if g.len() != z || lower.len() != z || upper.len() != z {
            return Err(Error::InvalidInstance(format!(
                "vector lengths must equal Z = {z}"
            )));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInstance("EBVs must be finite".into()));
        }
        if theta2.is_nan() || theta2 <= 0.0 {
            return Err(Error::InvalidInstance("2θ must be positive".into()));
        }
        if n_select == 0 || n_select > z {
            return Err(Error::InvalidInstance(format!(
                "N must satisfy 1 <= N <= Z, got {n_select}"
            )));
        }
        Ok(EdInstance {
            kin,
            g,
            theta2,
            n_select,
            lower,
            upper,
        })
    }

    pub fn z(&self) -> usize {
        self.kin.z()
    }

    /// Objective pieces at a contribution vector: `(g'x, x'Ax)`.
    pub fn objective_of(&self, x: &[f64]) -> (f64, f64) {
        assert_eq!(x.len(), self.z());
        let gx = self.g.iter().zip(x).map(|(gi, xi)| gi * xi).sum();
        (gx, self.kin.quad_form(x))
    }
}

/// The fixed/free split plus all transformed constants.
#[derive(Debug, Clone)]
pub struct PreprocessedInstance {
    pub inst: Arc<EdInstance>,
    /// Free indices, sorted by descending `g` (ties by original index).
    pub v: Vec<usize>,
    /// Fixed indices, ascending.
    pub f: Vec<usize>,
    /// Fixed values over `f` (0 or 1/N), aligned with `f`.
    pub c_f: Vec<f64>,
    /// Number of indices fixed at `1/N`.
    pub p: usize,
    pub gbar_v: Vec<f64>,
    pub gbar: f64,
    pub cbar_f: Vec<f64>,
    pub thetabar: f64,
    pub nbar: i64,
    /// `(Nbar^2 + |V|^2 - 2|V|) / 4`, always a nonnegative integer.
    pub nhat: usize,
}

/// Fix variables from the bounds, sort the free set, and compute the
/// transformed constants.
///
/// Returns `Error::Infeasible` when the bounds contradict each other or the
/// cardinality budget, and `Error::Degenerate` carrying the fully determined
/// contribution vector when fewer than two variables remain free.
pub fn preprocess(inst: &Arc<EdInstance>) -> Result<PreprocessedInstance> {
    let z = inst.z();
    let n = inst.n_select;
    let share = 1.0 / n as f64;

    let mut v = Vec::new();
    let mut f = Vec::new();
    let mut c_f = Vec::new();
    for i in 0..z {
        let (lo, hi) = (inst.lower[i], inst.upper[i]);
        if lo > hi {
            return Err(Error::Infeasible(format!("l[{i}] > u[{i}]")));
        }
        if lo > share {
            return Err(Error::Infeasible(format!("l[{i}] exceeds 1/N")));
        }
        if hi < 0.0 {
            return Err(Error::Infeasible(format!("u[{i}] is negative")));
        }
        if lo > 0.0 && hi < share {
            return Err(Error::Infeasible(format!(
                "bounds of index {i} exclude both 0 and 1/N"
            )));
        }
        if lo > 0.0 {
            f.push(i);
            c_f.push(share);
        } else if hi < share {
            f.push(i);
            c_f.push(0.0);
        } else {
            v.push(i);
        }
    }

    let p = c_f.iter().filter(|&&c| c > 0.0).count();
    if p > n {
        return Err(Error::Infeasible(format!(
            "{p} variables are forced to 1/N but only N = {n} may be selected"
        )));
    }
    let k = n - p;
    if k > v.len() {
        return Err(Error::Infeasible(format!(
            "must select {k} more genotypes but only {} remain free",
            v.len()
        )));
    }

    if v.len() <= 1 {
        // Everything is determined: a lone free variable absorbs the residual
        // contribution, which must itself be 0 or 1/N.
        let mut x = vec![0.0; z];
        for (&i, &c) in f.iter().zip(&c_f) {
            x[i] = c;
        }
        if let Some(&i) = v.first() {
            // k <= |V| = 1 here, so the residual is 0 or 1/N
            x[i] = k as f64 * share;
        } else if k != 0 {
            return Err(Error::Infeasible(
                "no free variables left but the selection is short".into(),
            ));
        }
        return Err(Error::Degenerate { x });
    }

    // descending g, ties by original index (stable)
    v.sort_by(|&a, &b| {
        inst.g[b]
            .partial_cmp(&inst.g[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let g_min = inst.g.iter().cloned().fold(f64::INFINITY, f64::min);
    let n_f = n as f64;
    let gbar_v: Vec<f64> = v.iter().map(|&i| (inst.g[i] - g_min) / (4.0 * n_f)).collect();
    let gbar = v.iter().map(|&i| (inst.g[i] - g_min) / (2.0 * n_f)).sum::<f64>()
        + f.iter()
            .zip(&c_f)
            .map(|(&i, &c)| (inst.g[i] - g_min) * c)
            .sum::<f64>()
        + g_min;

    // cbar_F = [A (e_V ⊕ 2N c_F)]_V
    let mut m = vec![0.0; z];
    for &i in &v {
        m[i] = 1.0;
    }
    for (&i, &c) in f.iter().zip(&c_f) {
        m[i] = 2.0 * n_f * c;
    }
    let mut am = vec![0.0; z];
    inst.kin.a_matvec(&m, &mut am);
    let cbar_f: Vec<f64> = v.iter().map(|&i| am[i]).collect();

    // thetabar needs e'A_VV e, c_F' A_FV e_V and c_F' A_FF c_F
    let mut ev = vec![0.0; z];
    for &i in &v {
        ev[i] = 1.0;
    }
    let mut aev = vec![0.0; z];
    inst.kin.a_matvec(&ev, &mut aev);
    let e_avv_e: f64 = v.iter().map(|&i| aev[i]).sum();
    let cf_afv_e: f64 = f.iter().zip(&c_f).map(|(&i, &c)| c * aev[i]).sum();

    let mut cf_full = vec![0.0; z];
    for (&i, &c) in f.iter().zip(&c_f) {
        cf_full[i] = c;
    }
    let mut acf = vec![0.0; z];
    inst.kin.a_matvec(&cf_full, &mut acf);
    let cf_aff_cf: f64 = f.iter().zip(&c_f).map(|(&i, &c)| c * acf[i]).sum();

    let thetabar = 2.0 * n_f * n_f * (inst.theta2 - cf_aff_cf) - 0.5 * e_avv_e - 2.0 * n_f * cf_afv_e;
    let nbar = 2 * k as i64 - v.len() as i64;
    // (Nbar^2 + |V|^2 - 2|V|)/4 in the overflow-free integer form
    let nhat = k * k + v.len() * (v.len() - 1) / 2 - v.len() * k;

    Ok(PreprocessedInstance {
        inst: inst.clone(),
        v,
        f,
        c_f,
        p,
        gbar_v,
        gbar,
        cbar_f,
        thetabar,
        nbar,
        nhat,
    })
}

impl PreprocessedInstance {
    pub fn z(&self) -> usize {
        self.inst.z()
    }

    pub fn kin(&self) -> &KinshipSystem {
        &self.inst.kin
    }

    /// Free-variable count `|V|`.
    pub fn n_free(&self) -> usize {
        self.v.len()
    }

    /// How many genotypes remain to be chosen from `V`: `N - p`.
    pub fn k_select(&self) -> usize {
        self.inst.n_select - self.p
    }

    /// The transformed objective `2 gbar_V' y + gbar`.
    pub fn transformed_objective(&self, y: &[f64]) -> f64 {
        2.0 * self.gbar_v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + self.gbar
    }

    /// Full contribution vector from signs over `V` (+1 -> 1/N, -1 -> 0).
    pub fn x_from_signs(&self, y: &[i8]) -> Vec<f64> {
        assert_eq!(y.len(), self.v.len());
        let share = 1.0 / self.inst.n_select as f64;
        let mut x = vec![0.0; self.z()];
        for (&i, &c) in self.f.iter().zip(&self.c_f) {
            x[i] = c;
        }
        for (&i, &yi) in self.v.iter().zip(y) {
            x[i] = if yi > 0 { share } else { 0.0 };
        }
        x
    }

    /// Full contribution vector from V-local chosen positions.
    pub fn x_from_chosen(&self, chosen_v: &[usize]) -> Vec<f64> {
        let share = 1.0 / self.inst.n_select as f64;
        let mut x = vec![0.0; self.z()];
        for (&i, &c) in self.f.iter().zip(&self.c_f) {
            x[i] = c;
        }
        for &pos in chosen_v {
            x[self.v[pos]] = share;
        }
        x
    }

    /// The `A_VV` submatrix in sorted-V order.
    pub fn a_vv(&self) -> nalgebra::DMatrix<f64> {
        self.kin().a_submatrix(&self.v)
    }

    /// Strict-upper-triangle entries of `A_VV` as a flat multiset.
    pub fn a_vv_upper(&self) -> Vec<f64> {
        let a = self.a_vv();
        let k = self.v.len();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(a[(i, j)]);
            }
        }
        out
    }
}

/// Outcome of the Assumption-1 data check.
#[derive(Debug, Clone, Copy)]
pub struct Assumption1 {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Guard for the `O(|V|^2)` multiset materialized by [`check_assumption1`].
pub const ASSUMPTION1_CAP: usize = 4096;

/// Evaluate the Assumption-1 inequality
/// `S_Nhat(A_W) <= (2 thetabar - 2 Tr(A_VV) + e'A_VV e - 2 cbar_F' yhat) / 4`
/// with `yhat` = +1 on the `N - p` best entries and -1 elsewhere.
pub fn check_assumption1(pp: &PreprocessedInstance) -> Result<Assumption1> {
    let kv = pp.n_free();
    if kv > ASSUMPTION1_CAP {
        return Err(Error::CapExceeded(format!(
            "assumption check materializes |V|^2/2 entries; |V| = {kv} exceeds {ASSUMPTION1_CAP}"
        )));
    }
    let a = pp.a_vv();
    let mut upper = Vec::with_capacity(kv * (kv - 1) / 2);
    let mut trace = 0.0;
    let mut total = 0.0;
    for i in 0..kv {
        trace += a[(i, i)];
        total += a[(i, i)];
        for j in (i + 1)..kv {
            upper.push(a[(i, j)]);
            total += 2.0 * a[(i, j)];
        }
    }
    let lhs = sum_smallest(&upper, pp.nhat);
    let k = pp.k_select();
    let cbar_yhat: f64 = pp
        .cbar_f
        .iter()
        .enumerate()
        .map(|(i, &c)| if i < k { c } else { -c })
        .sum();
    let rhs = (2.0 * pp.thetabar - 2.0 * trace + total - 2.0 * cbar_yhat) / 4.0;
    Ok(Assumption1 {
        holds: lhs <= rhs,
        lhs,
        rhs,
    })
}

/// Load an EBV file (`id,ebv`); every pedigree id must be covered exactly
/// once.
pub fn load_ebv<P: AsRef<Path>>(path: P, ped: &Pedigree) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut g = vec![f64::NAN; ped.len()];
    let mut seen = vec![false; ped.len()];
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim_start_matches('\u{feff}').trim() != "id,ebv" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `id,ebv`".into(),
        });
    }
    for (lineno, raw) in lines {
        let line = lineno + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let (id_s, v_s) = row.split_once(',').ok_or(Error::Parse {
            line,
            msg: "expected `id,ebv`".into(),
        })?;
        let id: u32 = id_s.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad id `{id_s}`"),
        })?;
        let v: f64 = v_s.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad ebv `{v_s}`"),
        })?;
        let pos = ped.position(id).ok_or(Error::Parse {
            line,
            msg: format!("id {id} not in pedigree"),
        })?;
        if seen[pos] {
            return Err(Error::DuplicateId(id));
        }
        seen[pos] = true;
        g[pos] = v;
    }
    if let Some(pos) = seen.iter().position(|&s| !s) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no ebv for id {}", ped.ids()[pos]),
        });
    }
    Ok(g)
}

/// Load a bounds file (`id,lower,upper`); absent ids default to `l = 0`,
/// `u = 1`.
pub fn load_bounds<P: AsRef<Path>>(path: P, ped: &Pedigree) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lower = vec![0.0; ped.len()];
    let mut upper = vec![1.0; ped.len()];
    let mut seen: HashMap<u32, ()> = HashMap::new();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if header.trim_start_matches('\u{feff}').trim() != "id,lower,upper" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `id,lower,upper`".into(),
        });
    }
    for (lineno, raw) in lines {
        let line = lineno + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: "expected `id,lower,upper`".into(),
            });
        }
        let id: u32 = fields[0].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad id `{}`", fields[0]),
        })?;
        if seen.insert(id, ()).is_some() {
            return Err(Error::DuplicateId(id));
        }
        let pos = ped.position(id).ok_or(Error::Parse {
            line,
            msg: format!("id {id} not in pedigree"),
        })?;
        lower[pos] = fields[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad lower `{}`", fields[1]),
        })?;
        upper[pos] = fields[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad upper `{}`", fields[2]),
        })?;
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinship::build_numerator;
    use crate::pedigree::Pedigree;
    use approx::assert_abs_diff_eq;

    pub(crate) fn t1_kin() -> Arc<KinshipSystem> {
        let p = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n3,1,2\n4,1,2\n").unwrap();
        Arc::new(build_numerator(&p).unwrap())
    }

    fn t1_instance(theta2: f64) -> Arc<EdInstance> {
        Arc::new(EdInstance::new(t1_kin(), vec![4.0, 3.0, 2.0, 1.0], theta2, 2).unwrap())
    }

    #[test]
    fn no_fixing_sorts_v_by_g() {
        let inst = t1_instance(0.8);
        let pp = preprocess(&inst).unwrap();
        assert!(pp.f.is_empty());
        assert_eq!(pp.p, 0);
        assert_eq!(pp.v, vec![0, 1, 2, 3]);

        // shuffled g still comes out sorted
        let kin = t1_kin();
        let inst2 =
            Arc::new(EdInstance::new(kin, vec![2.0, 4.0, 1.0, 3.0], 0.8, 2).unwrap());
        let pp2 = preprocess(&inst2).unwrap();
        assert_eq!(pp2.v, vec![1, 3, 0, 2]);
    }

    #[test]
    fn forced_fix_at_share() {
        let kin = t1_kin();
        let inst = Arc::new(
            EdInstance::with_bounds(
                kin,
                vec![4.0, 3.0, 2.0, 1.0],
                0.8,
                2,
                vec![0.5, 0.0, 0.0, 0.0],
                vec![1.0; 4],
            )
            .unwrap(),
        );
        let pp = preprocess(&inst).unwrap();
        assert_eq!(pp.f, vec![0]);
        assert_eq!(pp.c_f, vec![0.5]);
        assert_eq!(pp.p, 1);
        assert_eq!(pp.v, vec![1, 2, 3]);
    }

    #[test]
    fn t1_nbar_and_nhat() {
        let pp = preprocess(&t1_instance(0.8)).unwrap();
        assert_eq!(pp.nbar, 0);
        assert_eq!(pp.nhat, 2);
        // the two integer forms agree
        let kv = pp.n_free() as i64;
        assert_eq!(
            (pp.nbar * pp.nbar + kv * kv - 2 * kv) / 4,
            pp.nhat as i64
        );
    }

    #[test]
    fn transform_identity_on_feasible_points() {
        let inst = t1_instance(0.8);
        let pp = preprocess(&inst).unwrap();
        // all 2-subsets of {0..3}
        for a in 0..4usize {
            for b in (a + 1)..4 {
                let mut x = vec![0.0; 4];
                x[a] = 0.5;
                x[b] = 0.5;
                let y: Vec<f64> = pp
                    .v
                    .iter()
                    .map(|&i| 2.0 * 2.0 * x[i] - 1.0)
                    .collect();
                let lhs = 2.0
                    * pp.gbar_v.iter().zip(&y).map(|(u, w)| u * w).sum::<f64>()
                    + pp.gbar;
                let (gx, _) = inst.objective_of(&x);
                assert_abs_diff_eq!(lhs, gx, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn transformed_quadratic_matches_original() {
        let inst = t1_instance(0.8);
        let pp = preprocess(&inst).unwrap();
        let a_vv = pp.a_vv();
        for a in 0..4usize {
            for b in (a + 1)..4 {
                let mut x = vec![0.0; 4];
                x[a] = 0.5;
                x[b] = 0.5;
                let y: Vec<f64> =
                    pp.v.iter().map(|&i| 4.0 * x[i] - 1.0).collect();
                let yv = nalgebra::DVector::from_row_slice(&y);
                let quad = (yv.transpose() * &a_vv * &yv)[(0, 0)]
                    + 2.0 * pp.cbar_f.iter().zip(&y).map(|(c, w)| c * w).sum::<f64>();
                let (_, xax) = inst.objective_of(&x);
                // y'Ay + 2c'y <= 2 thetabar  <=>  x'Ax <= 2θ, and the slacks
                // agree up to the 4N^2 scaling
                let scaled_slack = 2.0 * pp.thetabar - quad;
                let orig_slack = inst.theta2 - xax;
                assert_abs_diff_eq!(scaled_slack, 16.0 * orig_slack, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gbar_v_is_nonnegative_and_sorted() {
        let pp = preprocess(&t1_instance(0.8)).unwrap();
        assert!(pp.gbar_v.iter().all(|&v| v >= 0.0));
        assert!(pp.gbar_v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn infeasible_bounds_detected() {
        let kin = t1_kin();
        let g = vec![4.0, 3.0, 2.0, 1.0];
        let mk = |l: Vec<f64>, u: Vec<f64>| {
            let inst =
                Arc::new(EdInstance::with_bounds(kin.clone(), g.clone(), 0.8, 2, l, u).unwrap());
            preprocess(&inst)
        };
        // l > u
        assert!(matches!(
            mk(vec![0.6, 0.0, 0.0, 0.0], vec![0.4, 1.0, 1.0, 1.0]),
            Err(Error::Infeasible(_))
        ));
        // l > 1/N
        assert!(matches!(
            mk(vec![0.6, 0.0, 0.0, 0.0], vec![1.0; 4]),
            Err(Error::Infeasible(_))
        ));
        // u < 0
        assert!(matches!(
            mk(vec![0.0; 4], vec![1.0, 1.0, 1.0, -0.1]),
            Err(Error::Infeasible(_))
        ));
        // p > N: three forced to 1/2 with N = 2
        assert!(matches!(
            mk(vec![0.5, 0.5, 0.5, 0.0], vec![1.0; 4]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn degenerate_returns_fixed_solution() {
        let p = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n").unwrap();
        let kin = Arc::new(build_numerator(&p).unwrap());
        let inst = Arc::new(
            EdInstance::with_bounds(
                kin,
                vec![2.0, 1.0],
                1.0,
                1,
                vec![0.5, 0.0],
                vec![1.0, 0.4],
            )
            .unwrap(),
        );
        match preprocess(&inst) {
            Err(Error::Degenerate { x }) => {
                assert_eq!(x, vec![1.0, 0.0]);
            }
            other => panic!("expected Degenerate, got {other:?}"),
        }
    }

    #[test]
    fn assumption1_identity_kinship() {
        let p = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n3,0,0\n4,0,0\n").unwrap();
        let kin = Arc::new(build_numerator(&p).unwrap());
        let inst = Arc::new(EdInstance::new(kin, vec![4.0, 3.0, 2.0, 1.0], 1.0, 2).unwrap());
        let pp = preprocess(&inst).unwrap();
        let a1 = check_assumption1(&pp).unwrap();
        assert_eq!(a1.lhs, 0.0);
    }

    #[test]
    fn assumption1_matches_direct_reevaluation() {
        let inst = t1_instance(0.8);
        let pp = preprocess(&inst).unwrap();
        let a1 = check_assumption1(&pp).unwrap();

        // independent evaluation straight from the definitions
        let a = pp.a_vv();
        let kv = pp.n_free();
        let mut ups: Vec<f64> = Vec::new();
        for i in 0..kv {
            for j in (i + 1)..kv {
                ups.push(a[(i, j)]);
            }
        }
        ups.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let lhs: f64 = ups[..pp.nhat].iter().sum();
        let e = nalgebra::DVector::from_element(kv, 1.0);
        let eae = (e.transpose() * &a * &e)[(0, 0)];
        let trace: f64 = (0..kv).map(|i| a[(i, i)]).sum();
        let yhat: Vec<f64> = (0..kv)
            .map(|i| if i < pp.k_select() { 1.0 } else { -1.0 })
            .collect();
        let cy: f64 = pp.cbar_f.iter().zip(&yhat).map(|(c, y)| c * y).sum();
        let rhs = (2.0 * pp.thetabar - 2.0 * trace + eae - 2.0 * cy) / 4.0;

        assert_abs_diff_eq!(a1.lhs, lhs, epsilon = 1e-12);
        assert_abs_diff_eq!(a1.rhs, rhs, epsilon = 1e-12);
        assert_eq!(a1.holds, lhs <= rhs);
        // hand numbers for T1 with 2θ = 0.8: thetabar = 8*0.8 - 4.5 = 1.9,
        // cbar = A e = (2, 2, 2.5, 2.5), cbar'yhat = -1, so
        // lhs = 0 + 0.5 and rhs = (3.8 - 8 + 9 + 2)/4 = 1.7
        assert_abs_diff_eq!(a1.lhs, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a1.rhs, 1.7, epsilon = 1e-12);
        assert!(a1.holds);
    }

    #[test]
    fn assumption1_holds_for_large_theta() {
        let inst = t1_instance(10.0);
        let pp = preprocess(&inst).unwrap();
        assert!(check_assumption1(&pp).unwrap().holds);
    }

    #[test]
    fn objective_of_examples() {
        let p = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n").unwrap();
        let kin = Arc::new(build_numerator(&p).unwrap());
        let inst = Arc::new(EdInstance::new(kin, vec![2.0, 1.0], 1.0, 1).unwrap());
        assert_eq!(inst.objective_of(&[1.0, 0.0]), (2.0, 1.0));

        let inst = t1_instance(0.8);
        let (_, xax) = inst.objective_of(&[0.5, 0.5, 0.0, 0.0]);
        assert_abs_diff_eq!(xax, 0.5, epsilon = 1e-12);
        let (gx, xax) = inst.objective_of(&[0.5, 0.0, 0.5, 0.0]);
        assert_abs_diff_eq!(gx, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xax, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn sort_permutation_round_trips() {
        let kin = t1_kin();
        let inst = Arc::new(EdInstance::new(kin, vec![2.0, 4.0, 1.0, 3.0], 0.8, 2).unwrap());
        let pp = preprocess(&inst).unwrap();
        let mut back = vec![usize::MAX; 4];
        for (local, &orig) in pp.v.iter().enumerate() {
            back[orig] = local;
        }
        for (local, &orig) in pp.v.iter().enumerate() {
            assert_eq!(back[orig], local);
        }
        assert!(back.iter().all(|&b| b != usize::MAX));
    }

    #[test]
    fn ebv_and_bounds_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ped = Pedigree::parse("id,sire,dam\n1,0,0\n2,0,0\n3,1,2\n").unwrap();

        let ebv_path = dir.path().join("ebv.csv");
        std::fs::write(&ebv_path, "id,ebv\n1,2.5\n3,-0.5\n2,1.0\n").unwrap();
        assert_eq!(load_ebv(&ebv_path, &ped).unwrap(), vec![2.5, 1.0, -0.5]);

        // missing coverage
        std::fs::write(&ebv_path, "id,ebv\n1,2.5\n").unwrap();
        assert!(matches!(load_ebv(&ebv_path, &ped), Err(Error::Parse { .. })));
        // duplicate id
        std::fs::write(&ebv_path, "id,ebv\n1,2.5\n1,2.5\n2,1\n3,1\n").unwrap();
        assert!(matches!(load_ebv(&ebv_path, &ped), Err(Error::DuplicateId(1))));

        let bounds_path = dir.path().join("bounds.csv");
        std::fs::write(&bounds_path, "id,lower,upper\n2,0.25,0.75\n").unwrap();
        let (lo, hi) = load_bounds(&bounds_path, &ped).unwrap();
        assert_eq!(lo, vec![0.0, 0.25, 0.0]);
        assert_eq!(hi, vec![1.0, 0.75, 1.0]);
    }

    mod props {
        use super::*;
        use crate::pedigree::generate_pedigree;
        use proptest::prelude::*;
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// For every 0-or-1/N point, the transformed objective
            /// 2 gbar_V'(2N x_V - e) + gbar reproduces g'x.
            #[test]
            fn transform_identity_round_trips(
                g in proptest::collection::vec(-10.0f64..10.0, 8),
                n in 1usize..=4,
                seed in any::<u64>(),
            ) {
                let ped = generate_pedigree(4, 1, 2, 3);
                let z = ped.len();
                prop_assume!(z == 8);
                let kin = Arc::new(build_numerator(&ped).unwrap());
                let inst = Arc::new(EdInstance::new(kin, g, 0.7, n).unwrap());
                let pp = preprocess(&inst).unwrap();

                let mut idx: Vec<usize> = (0..z).collect();
                idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let mut x = vec![0.0; z];
                for &i in &idx[..n] {
                    x[i] = 1.0 / n as f64;
                }
                let y: Vec<f64> = pp.v.iter().map(|&i| 2.0 * n as f64 * x[i] - 1.0).collect();
                let (gx, _) = inst.objective_of(&x);
                prop_assert!((pp.transformed_objective(&y) - gx).abs() <= 1e-10);
            }

            /// Nhat never exceeds the upper-triangle size, so the smallest-
            /// entries sum in the assumption check is always well defined.
            #[test]
            fn nhat_fits_the_triangle(
                n in 1usize..=6,
                z in 4usize..=12,
                seed in any::<u64>(),
            ) {
                prop_assume!(n < z);
                let ped = generate_pedigree(4, 2, 2, seed);
                prop_assume!(ped.len() >= z);
                let csv: String = ped.to_csv().lines().take(z + 1).map(|l| format!("{l}\n")).collect();
                let ped = Pedigree::parse(&csv).unwrap();
                let kin = Arc::new(build_numerator(&ped).unwrap());
                let g: Vec<f64> = (0..z).map(|i| (i as f64 * 0.77).sin()).collect();
                let inst = Arc::new(EdInstance::new(kin, g, 0.9, n).unwrap());
                let pp = preprocess(&inst).unwrap();
                let kv = pp.n_free();
                prop_assert!(pp.nhat <= kv * (kv - 1) / 2);
            }
        }
    }
}
