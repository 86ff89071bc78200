//! Empirical checks of regularity behavior for assembled operators and
//! their fractional powers: Dirichlet-type solves with prescribed
//! complement data, ratio scans over metric balls, oscillation-decay fits,
//! second-derivative norm scans, and degeneracy-direction scans.

pub mod flag;
pub mod harnack;
pub mod holder;
pub mod nondiv;
pub mod solve;

pub use flag::{flag_condition_check, FlagReport, PointFlag};
pub use harnack::{
    harnack_ensemble, harnack_ratio, local_boundedness_check, BallStat, BoundednessReport,
    BoundednessStat, EnsembleReport, HarnackReport, TracePoint,
};
pub use holder::{boundary_holder_check, holder_fit, HolderFit};
pub use nondiv::{
    c1alpha_probe, fourier_mode, low_pass_noise, point_mass, w2p_global_scan, C1AlphaReport,
    W2pReport,
};
pub use solve::{
    solve_fractional_dirichlet, solve_fractional_dirichlet_capped, FractionalSolve, DENSE_CAP,
};
