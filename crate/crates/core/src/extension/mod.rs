//! Half-space extension of boundary vectors: kernel-integral profiles, their
//! boundary limits recovering the fractional power, and an independent
//! boundary-value solve of the degenerate strip problem with even
//! reflection.

pub mod bvp;
pub mod limits;
pub mod profile;

pub use bvp::{
    reflect_even, reflection_residual, reflection_residual_with_probe, solve_extension_bvp,
    solve_extension_bvp_operator, BlockOperator, BvpOpts, ExtensionBvpField, ReflectionReport,
};
pub use limits::{
    derivative_bound_scan, fornberg_weights, frac_norm_scan, neumann_limits,
    neumann_limits_poisson, ode_residual, quotient_coefficient, strong_limit_check,
    DerivativeBoundReport, FracNormReport, LimitReport, OdeResidualReport, StrongLimitReport,
};
pub use profile::{
    default_y_ladder, extend_poisson, extend_poisson_at, extend_spectral, extend_spectral_at,
    extend_subordination, extend_subordination_at, profile_distance, ExtensionOpts,
    ExtensionProfile, ExtensionRoute,
};
