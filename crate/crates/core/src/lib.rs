//! Relevance attribution in the frequency and time-frequency domains for
//! time-series classifiers.
//!
//! A classifier trained on raw samples is explained in a different input
//! domain by prepending a fixed inverse-Fourier layer and propagating
//! relevance through it. See [`attribution`] for the propagation methods
//! and [`inspection`] for the closed-form spectral redistribution.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod inspection;
pub mod io;
mod linalg;
pub mod net;
pub mod par;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
