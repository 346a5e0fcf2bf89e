//! Cross-module invariants on the shared instance pool: the relaxation
//! ordering, the residual contracts of the recovered solutions, and solver
//! determinism.

mod common;

use common::suite;
use edopt::relax::sdp::check_no_interior;
use edopt::relax::{build_socp, solve_socp};

/// OPT_ED <= OPT_SDP <= OPT_SOCP, and the sorting value caps everything
/// whenever the sorting assumption holds. The SOCP link is checked at the
/// tight 1e-6, the SDP links at its accepted 1e-5 gap.
#[test]
fn relaxation_ordering_holds_on_every_instance() {
    for si in &suite().instances {
        let ed = si.oracle.opt;
        let sdp = si.sdp.objective;
        let socp = si.socp.objective;
        let lp = si.lp.objective;
        assert!(ed <= socp + 1e-6, "seed {}: ED {ed} vs SOCP {socp}", si.seed);
        assert!(ed <= sdp + 1e-5, "seed {}: ED {ed} vs SDP {sdp}", si.seed);
        assert!(sdp <= socp + 1e-5, "seed {}: SDP {sdp} vs SOCP {socp}", si.seed);
        // the sorting value bounds the SOCP value even without the
        // assumption: it optimizes a relaxation of the SOCP feasible set
        assert!(socp <= lp + 1e-6, "seed {}: SOCP {socp} vs LP {lp}", si.seed);
    }
}

/// The recovered SOCP contribution vector satisfies the original rows to
/// 1e-8: unit total, box bounds, and the coancestry cap.
#[test]
fn socp_solutions_respect_residual_contract() {
    for si in &suite().instances {
        let x = &si.socp.x;
        let sum: f64 = x.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-8, "seed {}: sum {sum}", si.seed);
        let share = 1.0 / si.inst.n_select as f64;
        for (i, &xi) in x.iter().enumerate() {
            assert!(xi >= -1e-8, "seed {}: x[{i}] = {xi}", si.seed);
            assert!(xi <= share + 1e-8, "seed {}: x[{i}] = {xi}", si.seed);
        }
        let (_, xax) = si.inst.objective_of(x);
        assert!(
            xax <= si.inst.theta2 + 1e-8,
            "seed {}: x'Ax {xax} vs {}",
            si.seed,
            si.inst.theta2
        );
    }
}

/// The moment matrix satisfies its own side conditions and the rank-deficient
/// certificate direction of the lifted cardinality rows.
#[test]
fn sdp_solutions_respect_side_conditions() {
    for si in &suite().instances {
        assert!(si.sdp.residuals["y00"] <= 1e-6, "seed {}", si.seed);
        assert!(si.sdp.residuals["diag_dev"] <= 1e-5, "seed {}", si.seed);
        assert!(si.sdp.residuals["min_eig"] >= -1e-6, "seed {}", si.seed);
        let cert = check_no_interior(&si.sdp, &si.pp);
        assert!(cert.abs() <= 1e-5, "seed {}: certificate {cert}", si.seed);
    }
}

/// Re-solving the same model reproduces the objective to 1e-9.
#[test]
fn socp_resolve_is_deterministic() {
    for si in suite().instances.iter().take(25) {
        let model = build_socp(&si.pp);
        let again = solve_socp(&si.pp, &model, 1e-8).unwrap();
        assert!(
            (again.objective - si.socp.objective).abs() <= 1e-9,
            "seed {}: {} vs {}",
            si.seed,
            again.objective,
            si.socp.objective
        );
    }
}

/// The sorting solution always carries exactly N shares and the flat
/// no-assumption bound stays above the enumerated optimum.
#[test]
fn sorting_solution_shape() {
    for si in &suite().instances {
        let share = 1.0 / si.inst.n_select as f64;
        let count = si.lp.x.iter().filter(|&&v| v == share).count();
        assert_eq!(count, si.inst.n_select, "seed {}", si.seed);
        assert!(si.lp.objective >= si.oracle.opt - 1e-9, "seed {}", si.seed);
    }
}
