pub mod cert;
pub mod error;
pub mod fft;
pub mod kahane;
pub mod lacunary;
pub mod norms;
pub mod pipeline;
pub mod principal;
pub mod riesz;
pub mod trigpoly;

pub use error::{Error, Result};
pub use trigpoly::{GridFunction, GridMask, TrigPoly, C64};
