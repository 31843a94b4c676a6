//! Statistical and analytic checks on sampled ensembles: integration by
//! parts, quasi-invariance, kernel consistency, moment bounds, Hölder
//! scaling and the smallness constants of the moment estimates.

pub mod catalog;
pub mod conditions;
pub mod dlr;
pub mod identities;
pub mod moments;
pub mod verdict;

pub use catalog::{catalog, coefficient_function, resolve_all, Feature, ResolvedFunction, Shape, TestFunction, CATALOG_VERSION};
pub use conditions::{condition_constants, ConditionConstants, ConditionOptions};
pub use dlr::{dlr_test, PointObservable, RedrawConfig, SubVolume};
pub use identities::{flow_estimates, flow_test, ibp_test, FlowEstimate, MIN_SAMPLES};
pub use moments::{
    gaussian_increment_variance, holder_scaling, kolmogorov_constants, log_spaced, moment_suite, site_moments, structure_moments, wick_check, HolderFit,
    HolderReport, GreenConvention, KolmogorovConstants, MomentQuantity, MomentRow, MomentSpec, MomentSuiteReport, StructurePoint,
};
pub use verdict::{all_pass, write_verdicts_csv, write_verdicts_csv_versioned, write_verdicts_json, Sidedness, TestVerdict, VerifyContext, DEFAULT_THRESHOLD};
