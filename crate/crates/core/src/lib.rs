pub mod branch;
pub mod curve;
pub mod error;
pub mod figures;
pub mod io;
pub mod ivp;
pub mod radial;
pub mod roots;
pub mod spectral;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
