//! Power-law fitting and the two-sample Kolmogorov-Smirnov test.

mod ks;
mod powerlaw;

pub use ks::{
    asymptotic_p, exact_p, kolmogorov_q, ks_numerator, ks_numerator_against, ks_sorted,
    ks_two_sample, ks_two_sample_with, result_from_numerator, KsError, KsMethod, KsResult,
    EXACT_LIMIT,
};
pub use powerlaw::{
    fit_power_law, fit_power_law_with, hill_alpha, sample_power_law, FitError, FitMethod,
    FitOptions, PowerLawFit, MAX_CANDIDATES, MIN_SAMPLES, MIN_TAIL,
};
