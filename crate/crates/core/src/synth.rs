//! Amplitude-modulated carrier synthesis.
//!
//! The residual perceived intensity of a frame is mapped back to the carrier
//! amplitude that produces the same intensity at the carrier frequency, and
//! one hop of carrier is rendered with the amplitude ramped linearly from the
//! previous hop's target. Phase is carried across hops and wrapped to
//! `[0, 2pi)` after each one.

use crate::error::{Error, Result};
use crate::perception::{Intensity, PerceptionModel};
use crate::scalar::Scalar;

pub const DEFAULT_CARRIER_HZ: f64 = 200.0;

/// Carrier amplitude whose perceived intensity at `carrier` equals `total`.
pub fn target_amplitude<T: Scalar>(model: &PerceptionModel<T>, total: Intensity<T>, carrier: T) -> Result<T> {
    model.amplitude_for_intensity(total.value(), carrier)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthState<T> {
    carrier: T,
    sample_rate: T,
    phase: T,
    prev_amplitude: T,
    saturation_count: u64,
}

impl<T: Scalar> SynthState<T> {
    pub fn new(carrier: T, sample_rate: T) -> Result<Self> {
        if !(carrier >= T::of(100.0) && carrier < T::of(20_000.0)) {
            return Err(Error::domain(format!("carrier {carrier} Hz outside [100, 20000)")));
        }
        if !(sample_rate.is_finite() && sample_rate > T::of(2.0) * carrier) {
            return Err(Error::domain(format!("sample rate {sample_rate} Hz must exceed twice the carrier")));
        }
        Ok(SynthState { carrier, sample_rate, phase: T::zero(), prev_amplitude: T::zero(), saturation_count: 0 })
    }

    /// Starts at `phase` (wrapped into `[0, 2pi)`).
    pub fn with_phase(mut self, phase: T) -> Self {
        self.phase = wrap(phase);
        self
    }

    pub fn carrier(&self) -> T {
        self.carrier
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn phase(&self) -> T {
        self.phase
    }

    pub fn prev_amplitude(&self) -> T {
        self.prev_amplitude
    }

    /// Samples clamped to [-1, 1] since construction.
    pub fn saturation_count(&self) -> u64 {
        self.saturation_count
    }

    /// Phase increment per sample in radians.
    pub fn step(&self) -> T {
        T::TAU() * self.carrier / self.sample_rate
    }

    /// Renders `out.len()` samples ramping from the previous target to
    /// `target`. Returns how many samples were clamped to [-1, 1].
    pub fn render_into(&mut self, target: T, out: &mut [T]) -> Result<usize> {
        if out.is_empty() {
            return Err(Error::domain("render needs at least one sample"));
        }
        if !(target.is_finite() && target >= T::zero()) {
            return Err(Error::domain(format!("target amplitude must be finite and >= 0, got {target}")));
        }
        let n = T::of_usize(out.len());
        let step = self.step();
        let start = self.prev_amplitude;
        let slope = (target - start) / n;
        let one = T::one();
        let mut clipped = 0;
        for (k, slot) in out.iter_mut().enumerate() {
            let kk = T::of_usize(k + 1);
            let a = start + slope * kk;
            let v = a * (self.phase + kk * step).sin();
            *slot = if v > one {
                clipped += 1;
                one
            } else if v < -one {
                clipped += 1;
                -one
            } else {
                v
            };
        }
        self.phase = wrap(self.phase + n * step);
        self.prev_amplitude = target;
        self.saturation_count += clipped as u64;
        Ok(clipped)
    }

    pub fn render_frame(&mut self, target: T, n_samples: usize) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); n_samples];
        self.render_into(target, &mut out)?;
        Ok(out)
    }
}

fn wrap<T: Scalar>(phase: T) -> T {
    let tau = T::TAU();
    let w = phase % tau;
    let w = if w < T::zero() { w + tau } else { w };
    // `w + tau` can round up to exactly tau for tiny negative inputs.
    if w >= tau {
        T::zero()
    } else {
        w
    }
}
