//! Special functions and exact null laws.

pub mod beta;
pub mod kolmogorov;
pub mod marginal;
pub mod normal;
pub mod quad;

pub use beta::{null_cdf_m, regularized_incomplete_beta, IncompleteBeta, NullCdf, NullCdfTable};
pub use kolmogorov::{
    kolmogorov_cdf, kolmogorov_quantile, kolmogorov_sf, packing_gumbel_cdf,
    packing_gumbel_quantile,
};
pub use marginal::{fvml_log_normalizer, watson_log_z, watson_marginal, Marginal, MarginalKind};
pub use normal::{normal_cdf, normal_pdf, normal_quantile, normal_sf};
