//! Numerical toolkit for degenerate elliptic operators in divergence and
//! non-divergence form: finite-volume assembly on weighted grids, fractional
//! powers of the resulting matrices through several independent routes,
//! half-space extension profiles with weighted normal limits, and regularity
//! diagnostics (Harnack ratios, local boundedness, Hölder fits, sector and
//! form checks).

pub mod assemble;
pub mod balls;
pub mod calculus;
pub mod dense;
pub mod error;
pub mod extension;
pub mod field;
pub mod grid;
pub mod metric;
pub mod operator;
pub mod special;
pub mod verify;

pub use error::{CoreError, Result};
pub use field::{CoeffField, CoeffKind, WeightField};
pub use grid::{Boundary, GridSpec};
pub use operator::{AssembledOperator, OperatorFamily};
