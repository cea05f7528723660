//! Stationary solutions: occupation-measure estimates, analytic second-order
//! formulas, the compound Poisson power law, tightness diagnostics and the
//! non-uniqueness example.

mod analytic;
mod estimators;
mod kb;
mod nonunique;
mod powerlaw;
mod tightness;

pub use analytic::{
    analytic_covariance, analytic_spectral_density, analytic_variance, spectral_inverse, Ef2Source,
    SecondOrderReport,
};
pub use estimators::{
    autocovariance_fft, batch_means, estimate_autocovariance, periodogram, Estimate, BATCHES,
};
pub use kb::{krylov_bogoliubov, EmpiricalMeasure, KbOptions};
pub use nonunique::{nonuniqueness_demo, NonUniqueOptions, NonUniqueReport, SigmaRow};
pub use powerlaw::{cp_power_law_fit, power_law_setup, PowerLawFit};
pub use tightness::{tightness_diagnostic, TightnessTable};

#[cfg(test)]
mod tests;
