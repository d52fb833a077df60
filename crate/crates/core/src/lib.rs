//! Geometric phase of the Dirac scattering operator on finite momentum-cutoff models.

pub mod dressing;
pub mod dyson;
pub mod error;
pub mod evolve;
pub mod lab;
pub mod linalg;
pub mod model;
pub mod par;
pub mod polarized;
pub mod quadrature;
pub mod symbolic;
pub mod transport;

pub use error::{LabError, Result};
