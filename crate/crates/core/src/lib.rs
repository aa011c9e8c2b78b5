//! Truthful primal-dual approximation for unsplittable flow and multi-unit
//! combinatorial auctions with large capacities.
//!
//! All solvers are generic over a floating-point [`Scalar`]; the `*F64` and
//! `*F32` aliases below name the common instantiations.

pub mod benchgen;
pub mod cli;
pub mod engine;
pub mod mechanism;
pub mod model;
pub mod muca;
pub mod oracle;
pub mod path;
pub mod pricing;
pub mod repeat;
pub mod report;
pub mod scalar;
pub mod ufp;

use thiserror::Error;

pub use engine::{Certificate, CertificateSource, DualAssignment, ExitReason, IterationRecord, Selection, StopRule, Trace};
pub use model::{BundleRequest, Edge, InstanceError, Item, MucaInstance, NormalizedInstance, Request, UfpInstance};
pub use muca::{bundle_score, solve_muca, solve_muca_with, MucaSolution};
pub use path::{shortest_path, Graph, Path};
pub use repeat::{solve_ufp_repeat, solve_ufp_repeat_with, RepeatSolution};
pub use scalar::Scalar;
pub use ufp::{dual_certificate, solve_ufp, solve_ufp_with, SolverConfig, UfpSolution};

/// Reasons a solver refuses to run or aborts.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("capacity ratio B = {0} is below 1; no feasibility guarantee")]
    BTooSmall(f64),
    #[error("epsilon = {0} must lie in (0, 1]")]
    EpsilonOutOfRange(f64),
    #[error("eps * B = {0} exceeds the exponent range of the scalar type")]
    ExponentRange(f64),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type UfpInstanceF64 = UfpInstance<f64>;
pub type UfpInstanceF32 = UfpInstance<f32>;
pub type NormalizedInstanceF64 = NormalizedInstance<f64>;
pub type NormalizedInstanceF32 = NormalizedInstance<f32>;
pub type MucaInstanceF64 = MucaInstance<f64>;
pub type MucaInstanceF32 = MucaInstance<f32>;
pub type UfpSolutionF64 = UfpSolution<f64>;
pub type UfpSolutionF32 = UfpSolution<f32>;
pub type MucaSolutionF64 = MucaSolution<f64>;
pub type MucaSolutionF32 = MucaSolution<f32>;
pub type RepeatSolutionF64 = RepeatSolution<f64>;
pub type RepeatSolutionF32 = RepeatSolution<f32>;
pub type PathF64 = Path<f64>;
pub type PathF32 = Path<f32>;
