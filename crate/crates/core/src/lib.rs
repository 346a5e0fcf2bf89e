//! Equal-deployment (ED) genotype selection.
//!
//! The ED problem picks exactly `N` genotypes out of `Z` candidates, each
//! contributing `1/N`, so that the total breeding value `g'x` is maximized
//! while the group-coancestry constraint `x'Ax <= 2θ` keeps the selection
//! diverse. `A` is the Wright numerator matrix derived from a pedigree.
//!
//! The crate provides the full pipeline:
//!
//! * [`pedigree`] — pedigree ingestion and the kinship system `A`, its sparse
//!   inverse, and the sparse factor `B` with `B'B = A^-1`;
//! * [`problem`] — instance setup, variable fixing, and the transformed
//!   constants used by every relaxation;
//! * [`relax`] — LP (by sorting), SOCP, and small-scale SDP relaxations;
//! * [`rounding`] — randomized hyperplane rounding from the SDP solution and
//!   its expectation bounds;
//! * [`ascent`] — the penalized steepest-ascent search over fixed-cardinality
//!   selections, seeded from any relaxation;
//! * [`oracle`] — exhaustive and branch-and-bound ground truth for small
//!   instances, used throughout the test suite.

pub mod ascent;
pub mod error;
pub mod kinship;
pub mod oracle;
pub mod pedigree;
pub mod problem;
pub mod relax;
pub mod rounding;
pub mod sparse;

pub use ascent::{lambda0, penalty_value, steepest_ascent, AscentTrace, Selection, StartPoint};
pub use error::Error;
pub use kinship::{build_numerator, KinshipSystem};
pub use oracle::{branch_and_bound_ed, enumerate_ed, OracleResult};
pub use pedigree::{generate_pedigree, load_pedigree, Pedigree};
pub use problem::{preprocess, EdInstance, PreprocessedInstance};
pub use relax::{RelaxKind, RelaxationResult, SolveStatus};
pub use rounding::{estimate_expectation, repair_to_selection, round_once, BoundsReport};
