//! Scalar-generic signal-processing primitives.

pub mod butterworth;
pub mod fft;
pub mod window;
