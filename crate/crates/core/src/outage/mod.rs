//! Analytic outage bounds.
//!
//! The bounds replace the secondary covariance by its statistical version
//! `Q̃s = Σ_{i<=k} (μ̃ - 1/α_i)^+ v_i v_i^H` and the PR cross channel by the
//! eigenvalues `h` of `H2^H H2`. Both the interference-temperature and the
//! leakage outage events then reduce to `q_1 > threshold(h)`, where `q_1` is
//! the largest statistical power, so each bound is `E_h[1 - F_q1(threshold(h))]`.

pub mod bounds;
pub mod cauchy_binet;
pub mod quad;
pub mod quadform;
pub mod wishart;

pub use bounds::{
    ilop_bound, ilop_bound_with, itop_bound, itop_bound_with, statistical_covariance,
    statistical_waterlevel, BoundResult, BoundSpec, GainModel, WaterLevelEstimate,
};
pub use cauchy_binet::{cauchy_binet_integral, CauchyBinetResult};
pub use quadform::{
    quadform_largest_eig_cdf, BackendPolicy, CdfBackend, LargestEigCdf, QuadformParams,
};
pub use wishart::{wishart_joint_density, wishart_kw, wishart_topk_density};
