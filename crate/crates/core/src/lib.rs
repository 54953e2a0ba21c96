//! Discretize, solve and certify KKT systems of semilinear parabolic optimal
//! control problems with mixed pointwise control-state constraints.

pub mod cli;
pub mod error;
pub mod expr;
pub mod field_io;
pub mod grid;
pub mod kkt;
pub mod linalg;
pub mod operator;
pub mod optimizer;
pub mod oracle;
pub mod problem;
pub mod regularity;
pub mod soc;
pub mod solvers;

pub use error::{Error, Result};
