pub mod activations;
pub mod autodiff;
mod binio;
pub mod bloch;
pub mod complex;
pub mod dataset;
pub mod dictionary;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod linalg;
pub mod matcher;
pub mod model;
pub mod network;
pub mod params;
pub mod training;

pub use complex::{cmul, inner_product, l2_norm, CVector, Complex};
pub use error::{Error, Result};
pub use linalg::{matvec, CMatrix, Matrix, Scalar};
pub use params::{Label, TissueParams};
