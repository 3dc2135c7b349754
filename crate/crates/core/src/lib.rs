//! Entropy decay for Ornstein-Uhlenbeck and heat flows on truncated Hermite
//! expansions, with numerical checks of the associated functional inequalities.

pub mod entropy;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod field;
pub mod hermite;
pub mod io;
pub mod lab;
pub mod potential;
mod tensor;
pub mod tridiag;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{
    analyze, estimate_bounds, synthesize, BoundsEstimate, DenseGrid, FieldSample, GridField, SpectralField,
    TOL_POS,
};
pub use hermite::{gauss_hermite_rule, hermite_eval_all, tensor_eval, HermiteBasis, MultiIndex, QuadratureRule};
