//! Dense-matrix numerics: values, autodiff tape, optimizer, gradient checks.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::AdamState;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamEntry, WorstEntry};
pub use matrix::{DenseMatrix, Precision};
pub use tape::{Tape, TapeId, DEFAULT_LEAKY_SLOPE};

pub(crate) use tape::degree_normalize_value;
