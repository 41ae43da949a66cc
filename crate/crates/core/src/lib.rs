pub mod bench;
pub mod distpca;
pub mod error;
pub mod lela;
pub mod linalg;
pub mod matprod;
pub mod rng;
pub mod sampling;
pub mod waltmin;

pub use error::{LelaError, Result};
