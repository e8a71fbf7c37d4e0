//! Perceived-intensity ego-noise subtraction for vibrotactile feedback.
//!
//! A vibration signal is decomposed into intrinsic mode functions, each mode
//! is converted to perceived intensity and binned into 20 Hz bands, a
//! per-band noise estimate learned from the robot's own vibration is
//! subtracted in that perceptual domain, and the residual total intensity is
//! rendered as an amplitude-modulated carrier (200 Hz by default) that feels
//! as strong as the residual.
//!
//! The DSP core is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod baseline;
pub mod cli;
pub mod emd;
pub mod error;
pub mod io;
pub mod noise_filter;
pub mod perception;
pub mod pipeline;
pub mod scalar;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PerceptionModelF64 = perception::PerceptionModel<f64>;
pub type PerceptionModelF32 = perception::PerceptionModel<f32>;
pub type IntensityF64 = perception::Intensity<f64>;
pub type ImfSetF64 = emd::ImfSet<f64>;
pub type ImfSetF32 = emd::ImfSet<f32>;
pub type IntensitySpectrumF64 = spectrum::IntensitySpectrum<f64>;
pub type IntensitySpectrumF32 = spectrum::IntensitySpectrum<f32>;
pub type NoiseFilterF64 = noise_filter::NoiseFilter<f64>;
pub type NoiseFilterF32 = noise_filter::NoiseFilter<f32>;
pub type SynthStateF64 = synth::SynthState<f64>;
pub type SynthStateF32 = synth::SynthState<f32>;
pub type EngineF64 = pipeline::Engine<f64>;
pub type EngineF32 = pipeline::Engine<f32>;
