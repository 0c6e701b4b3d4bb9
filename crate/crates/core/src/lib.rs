//! Structure-preserving model order reduction for frequency-affine
//! second-order systems.

pub mod aaa;
pub mod balance;
pub mod campaign;
pub mod error;
pub mod exec;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod reduce;
pub mod select;
pub mod synthetic;
pub mod system;

pub use error::{Error, Result};
pub use exec::Execution;
pub use linalg::{CMat, RMat, C64};
pub use system::{AffineTerm, CaseTag, Coefficient, Operator, ScalarFunction, StructuredSystem};
