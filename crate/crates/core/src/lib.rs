pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod graphon;
pub mod inference;
pub mod io;
pub mod iv;
pub mod normal;
pub mod plot;
pub mod rng;
pub mod sim;
pub mod smooth;

pub use error::{Result, RgamError};
