//! Operator calculus on assembled matrices: semigroup sampling, fractional
//! powers through two independent routes (singular integral vs.
//! diagonalization), resolvents and sector scans, contour-defined
//! holomorphic functions, and the form sector check.

pub mod form;
pub mod fracpow;
pub mod resolvent;
pub mod semigroup;
pub mod spectral;

pub use form::{dirichlet_form_check, FormReport};
pub use fracpow::{frac_power_apply_balakrishnan, QuadratureOpts};
pub use resolvent::{
    phi_of_t, resolvent_apply, sectoriality_scan, ContourOpts, SectorialityReport, SignConvention,
};
pub use semigroup::{semigroup_apply, SemigroupSamples};
pub use spectral::{
    frac_power_apply_spectral, frac_power_matrix_spectral, spectrum, SpectralPowerAction,
    SpectrumReport,
};
