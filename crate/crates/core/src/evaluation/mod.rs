//! Comparison of fitted distributions with references.

pub mod ecdf;
pub mod mmd;
pub mod probit_jeffreys;
pub mod reference;

pub use ecdf::{ecdf, ecdf_envelope, ks_distance, ks_two_sample, mean_norm_error, EcdfCurve, Envelope};
pub use mmd::{mmd2_unbiased, mmd2_unbiased_with, null_scale, KernelSpec, Mmd, NullScale};
pub use probit_jeffreys::{
    mh_theta_reference, mh_theta_with_prior, probit_fisher, probit_fisher_mc, probit_jeffreys_grid, FisherResult,
    GridConfig, JeffreysGrid, QuadratureConfig, ThetaChain,
};
pub use reference::{
    constrained_gaussvar_prior_cdf, constrained_gaussvar_prior_pdf, dirichlet_marginal, gaussvar_jeffreys_posterior,
    log_uniform_constrained_prior, multinomial_jeffreys_posterior, multinomial_jeffreys_prior, sample_dirichlet,
    ConstrainedPosterior, InverseGammaRef, TabulatedCdf,
};
