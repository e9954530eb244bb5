//! Bi-hemispheric EEG emotion classification.
//!
//! The crate covers the full path from raw scalp recordings to emotion
//! predictions:
//!
//! ```text
//! Recording (21 channels, µV)
//!   ├─ preprocess   mastoid re-reference → LPF → HPF → delay trim
//!   ├─ spectral     Hann STFT magnitudes, band-limited, log-compressed
//!   ├─ hemisplit    left / right electrode streams (Fz, Cz shared, Pz dropped)
//!   ├─ model        per stream Conv1D → MaxPool → Dropout → LSTM → Dropout,
//!   │               concat → Dense(ReLU, L2) → Dense → softmax
//!   └─ harness      Adam training, accuracy, confusion matrix, temporal scan
//! ```
//!
//! Signal-processing primitives in [`dsp`] are generic over the scalar type
//! through [`Real`]; the differentiable engine in [`autodiff`] is fixed to
//! `f64` so that finite-difference gradient checks stay meaningful.

pub mod autodiff;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod features_io;
pub mod harness;
pub mod hemisplit;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod spectral;
pub mod temporal;

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};

/// Floating-point scalar accepted by the signal-processing primitives.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }
}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

pub type Complex32 = num_complex::Complex<f32>;
pub type Complex64 = num_complex::Complex<f64>;

pub type FftPlan32 = dsp::fft::FftPlan<f32>;
pub type FftPlan64 = dsp::fft::FftPlan<f64>;

pub type SosCascade32 = dsp::butterworth::SosCascade<f32>;
pub type SosCascade64 = dsp::butterworth::SosCascade<f64>;

pub use autodiff::{AdamState, Graph, Mode, Tensor, Var};
pub use dataset::{Channel, Dataset, Emotion, Recording, Split, SynthSpec};
pub use harness::{EvalReport, ExperimentConfig, Variant};
pub use hemisplit::{HemiPair, HemiPartition};
pub use model::{ModelConfig, ModelParams};
pub use preprocess::{PreprocConfig, PreprocRecording, Stage};
pub use spectral::{FeatureKind, SpectralConfig, SpectralTensor};
pub use temporal::{IntervalSpec, TemporalScanReport};
