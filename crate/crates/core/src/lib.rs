pub mod cli;
pub mod error;
pub mod fit;
pub mod functionals;
pub mod grid;
pub mod group;
pub mod paths;
pub mod perturb;
pub mod quad;
pub mod reparam;
pub mod roots;
pub mod spline;
pub mod stationary;
pub mod stencil;
pub mod virasoro;

pub use error::{Error, Result};
