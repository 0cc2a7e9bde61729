pub mod attack;
pub mod ckks;
pub mod error;
pub mod fed;
pub mod io;
pub mod ring;
pub mod vit;

pub use error::{Error, Result, WireError};
