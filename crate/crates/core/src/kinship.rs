//! The Wright numerator matrix `A`, its sparse inverse, and the sparse
//! factor `B` with `B'B = A^-1`.
//!
//! Everything rests on the decomposition `A = T D T'`, where `T^-1 = I - P/2`
//! (`P` is the parent incidence matrix: row `i` holds ones in the sire/dam
//! columns) and `D = diag(d)` holds the Mendelian sampling variances
//!
//! ```text
//!   d_i = 1                          no known parent
//!   d_i = 1 - A_ss / 4               one known parent s
//!   d_i = 1 - (A_ss + A_dd) / 4      both parents known
//! ```
//!
//! so `A^-1 = (I - P/2)' D^-1 (I - P/2)` assembles row by row with Henderson's
//! rules and `B = D^-1/2 (I - P/2)` has at most three nonzeros per row. `A`
//! itself is dense; it is materialized only up to [`DENSE_CAP`] individuals,
//! and products with `A` always run through the two sparse triangular sweeps
//! (`O(Z)` per product).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pedigree::Pedigree;
use crate::sparse::CsrMatrix;

/// Largest pedigree for which `A` is kept densely (entry lookups become
/// O(1)); beyond this, entries and columns are recovered on demand from the
/// `T D T'` sweeps.
pub const DENSE_CAP: usize = 2048;

/// Mendelian variances below this are treated as a corrupt pedigree.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// The numerator matrix and its sparse companions, immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct KinshipSystem {
    z: usize,
    parents: Vec<[Option<usize>; 2]>,
    /// Dense `A` when `z <= DENSE_CAP`.
    dense_a: Option<DMatrix<f64>>,
    diag_a: Vec<f64>,
    mendelian: Vec<f64>,
    ainv: CsrMatrix,
    b: CsrMatrix,
}

/// Build the kinship system for a pedigree.
pub fn build_numerator(p: &Pedigree) -> Result<KinshipSystem> {
    KinshipSystem::build(p, DENSE_CAP)
}

impl KinshipSystem {
    fn build(p: &Pedigree, dense_cap: usize) -> Result<KinshipSystem> {
        let z = p.len();
        let parents = p.parents().to_vec();

        let (dense_a, diag_a) = if z <= dense_cap {
            let a = tabular_a(&parents);
            let diag = (0..z).map(|i| a[(i, i)]).collect();
            (Some(a), diag)
        } else {
            (None, diag_by_columns(&parents)?)
        };

        let mut mendelian = Vec::with_capacity(z);
        for (i, ps) in parents.iter().enumerate() {
            let d = match (ps[0], ps[1]) {
                (None, None) => 1.0,
                (Some(q), None) | (None, Some(q)) => 1.0 - 0.25 * diag_a[q],
                (Some(s), Some(dd)) => 1.0 - 0.25 * (diag_a[s] + diag_a[dd]),
            };
            if d < SINGULARITY_TOL {
                return Err(Error::Singularity { index: i, d });
            }
            mendelian.push(d);
        }

        // Henderson's rules: A^-1 = sum_i alpha_i t_i t_i' with t_i the i-th
        // row of I - P/2 and alpha_i = 1/d_i.
        let mut trips = Vec::with_capacity(9 * z);
        let mut b_trips = Vec::with_capacity(3 * z);
        for i in 0..z {
            let alpha = 1.0 / mendelian[i];
            let root = alpha.sqrt();
            trips.push((i, i, alpha));
            b_trips.push((i, i, root));
            for &q in parents[i].iter().flatten() {
                trips.push((i, q, -alpha / 2.0));
                trips.push((q, i, -alpha / 2.0));
                trips.push((q, q, alpha / 4.0));
                b_trips.push((i, q, -root / 2.0));
            }
            if let [Some(s), Some(dd)] = parents[i] {
                trips.push((s, dd, alpha / 4.0));
                trips.push((dd, s, alpha / 4.0));
            }
        }
        let ainv = CsrMatrix::from_triplets(z, z, trips);
        let b = CsrMatrix::from_triplets(z, z, b_trips);

        Ok(KinshipSystem {
            z,
            parents,
            dense_a,
            diag_a,
            mendelian,
            ainv,
            b,
        })
    }

    pub fn z(&self) -> usize {
        self.z
    }

    /// Diagonal of `A` (1 + inbreeding coefficient).
    pub fn diag(&self) -> &[f64] {
        &self.diag_a
    }

    /// Mendelian sampling variances `d`.
    pub fn mendelian(&self) -> &[f64] {
        &self.mendelian
    }

    pub fn ainv(&self) -> &CsrMatrix {
        &self.ainv
    }

    pub fn b_factor(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn dense_a(&self) -> Option<&DMatrix<f64>> {
        self.dense_a.as_ref()
    }

    /// `u = T' x`: backward sweep of the unit upper-triangular system
    /// `(I - P'/2) u = x`.
    fn t_transpose_apply(&self, x: &[f64], u: &mut [f64]) {
        u.copy_from_slice(x);
        for c in (0..self.z).rev() {
            let uc = u[c];
            if uc != 0.0 {
                for &q in self.parents[c].iter().flatten() {
                    u[q] += 0.5 * uc;
                }
            }
        }
    }

    /// `y = T v`: forward sweep of `(I - P/2) y = v`.
    fn t_apply(&self, v: &[f64], y: &mut [f64]) {
        for i in 0..self.z {
            let mut acc = v[i];
            for &q in self.parents[i].iter().flatten() {
                acc += 0.5 * y[q];
            }
            y[i] = acc;
        }
    }

    /// `out = A x` via the two triangular sweeps.
    pub fn a_matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.z);
        assert_eq!(out.len(), self.z);
        let mut u = vec![0.0; self.z];
        self.t_transpose_apply(x, &mut u);
        for i in 0..self.z {
            u[i] *= self.mendelian[i];
        }
        self.t_apply(&u, out);
    }

    /// `x' A x` via one sweep: `u = T'x`, result `sum d_i u_i^2`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.z);
        let mut u = vec![0.0; self.z];
        self.t_transpose_apply(x, &mut u);
        u.iter()
            .zip(&self.mendelian)
            .map(|(ui, di)| di * ui * ui)
            .sum()
    }

    /// Column `j` of `A`.
    pub fn a_column(&self, j: usize, out: &mut [f64]) {
        if let Some(a) = &self.dense_a {
            for i in 0..self.z {
                out[i] = a[(i, j)];
            }
        } else {
            let mut e = vec![0.0; self.z];
            e[j] = 1.0;
            self.a_matvec(&e, out);
        }
    }

    /// Entry `A[i, j]`. O(1) on the dense path, O(Z) otherwise.
    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        if let Some(a) = &self.dense_a {
            a[(i, j)]
        } else {
            let mut col = vec![0.0; self.z];
            self.a_column(j, &mut col);
            col[i]
        }
    }

    /// Dense principal submatrix of `A` over the given indices.
    pub fn a_submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        if let Some(a) = &self.dense_a {
            DMatrix::from_fn(k, k, |r, c| a[(idx[r], idx[c])])
        } else {
            let mut m = DMatrix::zeros(k, k);
            let mut col = vec![0.0; self.z];
            for (c, &jc) in idx.iter().enumerate() {
                self.a_column(jc, &mut col);
                for (r, &ir) in idx.iter().enumerate() {
                    m[(r, c)] = col[ir];
                }
            }
            m
        }
    }

    /// `out = A^-1 x` (sparse product).
    pub fn ainv_matvec(&self, x: &[f64], out: &mut [f64]) {
        self.ainv.matvec(x, out);
    }
}

/// Full tabular method: `A_ii = 1 + A_sd/2`, `A_ij = (A_js + A_jd)/2` with
/// missing parents contributing zero.
fn tabular_a(parents: &[[Option<usize>; 2]]) -> DMatrix<f64> {
    let z = parents.len();
    let mut a = DMatrix::zeros(z, z);
    for i in 0..z {
        let [s, d] = parents[i];
        for j in 0..i {
            let mut v = 0.0;
            if let Some(s) = s {
                v += 0.5 * a[(j, s)];
            }
            if let Some(d) = d {
                v += 0.5 * a[(j, d)];
            }
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        let mut diag = 1.0;
        if let (Some(s), Some(d)) = (s, d) {
            diag += 0.5 * a[(s, d)];
        }
        a[(i, i)] = diag;
    }
    a
}

/// Diagonal of `A` without materializing it: entry `j` of `T D T' e_j`,
/// computed incrementally so that `d` and the diagonal stay in lockstep.
fn diag_by_columns(parents: &[[Option<usize>; 2]]) -> Result<Vec<f64>> {
    let z = parents.len();
    let mut diag = vec![0.0; z];
    let mut d = vec![0.0; z];
    let mut u = vec![0.0; z];
    let mut y = vec![0.0; z];
    for j in 0..z {
        let dj = match parents[j] {
            [None, None] => 1.0,
            [Some(q), None] | [None, Some(q)] => 1.0 - 0.25 * diag[q],
            [Some(s), Some(dd)] => 1.0 - 0.25 * (diag[s] + diag[dd]),
        };
        if dj < SINGULARITY_TOL {
            return Err(Error::Singularity { index: j, d: dj });
        }
        d[j] = dj;

        // u = T' e_j restricted to 0..=j (ancestors only)
        u[..=j].fill(0.0);
        u[j] = 1.0;
        for c in (0..=j).rev() {
            let uc = u[c];
            if uc != 0.0 {
                for &q in parents[c].iter().flatten() {
                    u[q] += 0.5 * uc;
                }
            }
        }
        // y = T (D u), entry j only needs indices <= j
        for i in 0..=j {
            let mut acc = d[i] * u[i];
            for &q in parents[i].iter().flatten() {
                acc += 0.5 * y[q];
            }
            y[i] = acc;
        }
        diag[j] = y[j];
    }
    Ok(diag)
}
