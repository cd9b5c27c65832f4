//! Robust fixed-order controller synthesis for interval plants via
//! LMI certificates.

pub mod cli;
pub mod error;
pub mod lmi;
pub mod poly;
pub mod realize;
pub mod sdp;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
