//! Analytic coverage bound: moment-matched Gamma signal, interference
//! Laplace transform and the truncated series linking them.

pub mod coverage;
pub mod gamma;
pub mod laplace;
pub mod quadrature;
pub mod series;

pub use coverage::{
    conditional_coverage, coverage_curve, coverage_probability, AnalyticEstimate, ConditionalCoverage,
};
pub use gamma::{gamma_ccdf_series, moment_match_gamma, GammaApprox};
pub use laplace::{
    laplace_derivatives, laplace_derivatives_of, laplace_interference, FixedInterference, InterferenceField,
    LaplaceEval, LaplaceExponents,
};
pub use series::{mixed_poisson_pmf, series_values, DirectSeries, SeriesEvaluator, TabulatedSeries};
