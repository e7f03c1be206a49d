//! Hermitian linear algebra and the semidefinite feasibility engine.
//!
//! Complex Hermitian SDPs are solved through the real symmetric embedding
//! of each matrix variable (dimension doubles, PSD status is preserved
//! exactly), with the embedding structure built into the constraint
//! matrix rather than imposed as extra equalities.

mod herm;
mod problem;
mod solver;

pub use herm::{eigen_spectrum, psd_factor, rank1_approx, real_embedding, HermitianMatrix};
pub use problem::{ConicProblem, HermVarId, LinExpr, Objective, PsdExpr, ScalarId};
pub use solver::{solve, ConicOutcome, ConicStatus, Tolerances};
