//! Conic relaxations of the ED problem: LP by sorting, SOCP, and SDP.

pub mod lp;
pub mod sdp;
pub mod socp;

use std::collections::BTreeMap;

use serde::Serialize;

pub use lp::{rho_lp, solve_lp_by_sorting, sum_smallest};
pub use sdp::{check_no_interior, rho0_sdp, solve_sdp, SdpSolution};
pub use socp::{build_socp, solve_socp, SocpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelaxKind {
    Lp,
    Socp,
    Sdp,
}

impl std::fmt::Display for RelaxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelaxKind::Lp => write!(f, "LP"),
            RelaxKind::Socp => write!(f, "SOCP"),
            RelaxKind::Sdp => write!(f, "SDP"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Failed,
}

/// A solved relaxation: the recovered contribution vector, its objective,
/// and solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxationResult {
    pub kind: RelaxKind,
    /// Contribution vector in original indexing, length `Z`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: BTreeMap<String, f64>,
    pub wall_time: f64,
}
