//! Stochastic delay differential equations driven by Lévy noise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay_measure;
pub mod error;
pub mod functional;
pub mod fundamental;
pub mod levy;
pub mod path;
pub mod rng;
pub mod skorokhod;
pub mod solver;
pub mod stationary;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use delay_measure::{Abscissa, Atom, DelayMeasure, DriftStencil};
pub use error::{Result, SddeError};
pub use functional::{DiffusionFunctional, FunctionalKind, InnerMap};
pub use fundamental::{compute_r, deterministic_solution, FundamentalSolution};
pub use levy::{JumpFamily, JumpSpec, LevyIncrements, LevyTriplet, MomentValue};
pub use path::{GridPath, Jump, PathView, Segment};
pub use rng::PathSeed;
pub use skorokhod::{
    feller_counterexample, skorokhod_distance, FellerReport, SkorokhodBound, TimeChange,
};
pub use solver::{
    coupled_pair, segment_at, solve_euler, solve_observed, solve_voc, solve_with_noise,
    stationary_ou_segment, DriftScheme, NodeInfo, SddeProblem,
};
pub use stationary::{
    analytic_covariance, analytic_spectral_density, analytic_variance, cp_power_law_fit,
    krylov_bogoliubov, nonuniqueness_demo, tightness_diagnostic, EmpiricalMeasure, Estimate,
    KbOptions, NonUniqueOptions, NonUniqueReport, PowerLawFit, SecondOrderReport, TightnessTable,
};
