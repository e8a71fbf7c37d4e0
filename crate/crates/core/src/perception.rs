//! Psychophysical intensity model.
//!
//! Perceived intensity of a vibration of amplitude `a` at frequency `f` is
//!
//! ```text
//! I = ((a / AT(f))^2)^alpha(f)
//! ```
//!
//! where `AT(f)` is the detection threshold amplitude and `alpha(f)` the
//! intensity exponent. Both curves are given as a knot table. `AT` is
//! interpolated linearly in log-frequency / log-threshold space, `alpha`
//! linearly in log-frequency. Amplitudes are in normalized signal units
//! (1.0 = digital full scale); the physical calibration lives in the table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lowest frequency the model is evaluated at, in Hz.
pub const MIN_HZ: f64 = 100.0;
/// Highest frequency the model is evaluated at, in Hz.
pub const MAX_HZ: f64 = 20_000.0;

/// A non-negative, finite perceived intensity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Intensity<T>(T);

impl<T: Scalar> Intensity<T> {
    pub fn new(value: T) -> Result<Self> {
        if value.is_finite() && value >= T::zero() {
            Ok(Intensity(value))
        } else {
            Err(Error::domain(format!("intensity must be finite and >= 0, got {value}")))
        }
    }

    pub fn zero() -> Self {
        Intensity(T::zero())
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// One row of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot<T> {
    pub hz: T,
    pub threshold: T,
    pub exponent: T,
}

/// Serialized form of a knot, as it appears in the `perception` config section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotRecord {
    pub hz: f64,
    pub threshold: f64,
    pub exponent: f64,
}

/// The `perception` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub knots: Vec<KnotRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gain: Option<f64>,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            knots: DEFAULT_KNOTS
                .iter()
                .map(|&(hz, threshold, exponent)| KnotRecord { hz, threshold, exponent })
                .collect(),
            reference_gain: None,
        }
    }
}

/// Shipped coefficient table.
///
/// This is an approximation of published Pacinian-channel data, not a fitted
/// model: the threshold curve is U-shaped with its minimum at 250 Hz (about
/// -60 dBFS) and rises roughly 12 dB/octave on the high side, and the exponent
/// falls slowly with frequency. Replace it through the `perception` config
/// section when a calibrated table for the actual sensor/actuator chain exists.
pub const DEFAULT_KNOTS: [(f64, f64, f64); 10] = [
    (100.0, 0.0040, 0.60),
    (150.0, 0.0022, 0.58),
    (250.0, 0.0010, 0.55),
    (400.0, 0.0016, 0.52),
    (700.0, 0.0050, 0.48),
    (1000.0, 0.010, 0.45),
    (2000.0, 0.040, 0.42),
    (5000.0, 0.25, 0.38),
    (10000.0, 1.0, 0.36),
    (20000.0, 4.0, 0.35),
];

/// Frequency-dependent threshold and exponent curves.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionModel<T> {
    knots: Vec<Knot<T>>,
    log_hz: Vec<T>,
    log_threshold: Vec<T>,
    reference_gain: T,
}

impl<T: Scalar> Default for PerceptionModel<T> {
    fn default() -> Self {
        Self::load(&PerceptionConfig::default()).expect("shipped table is valid")
    }
}

impl<T: Scalar> PerceptionModel<T> {
    /// Validates a config section and builds the model. All violations are
    /// reported together, each naming the offending knot index.
    pub fn load(config: &PerceptionConfig) -> Result<Self> {
        let mut failures = Vec::new();
        let knots = &config.knots;
        if knots.len() < 2 {
            failures.push(format!("need at least 2 knots, got {}", knots.len()));
        }
        for (i, k) in knots.iter().enumerate() {
            if !(k.hz.is_finite() && k.hz > 0.0) {
                failures.push(format!("knot {i}: frequency must be finite and > 0, got {}", k.hz));
            }
            if !(k.threshold.is_finite() && k.threshold > 0.0) {
                failures.push(format!("knot {i}: threshold must be finite and > 0, got {}", k.threshold));
            }
            if !(k.exponent.is_finite() && k.exponent > 0.0) {
                failures.push(format!("knot {i}: exponent must be finite and > 0, got {}", k.exponent));
            }
            if i > 0 && !(k.hz > knots[i - 1].hz) {
                failures.push(format!(
                    "knot {i}: frequency {} Hz is not greater than knot {} ({} Hz)",
                    k.hz,
                    i - 1,
                    knots[i - 1].hz
                ));
            }
        }
        if let (Some(first), Some(last)) = (knots.first(), knots.last()) {
            if first.hz > MIN_HZ {
                failures.push(format!("knot 0: first knot at {} Hz leaves a coverage gap above {MIN_HZ} Hz", first.hz));
            }
            if last.hz < MAX_HZ {
                failures.push(format!(
                    "knot {}: last knot at {} Hz leaves a coverage gap below {MAX_HZ} Hz",
                    knots.len() - 1,
                    last.hz
                ));
            }
        }
        let gain = config.reference_gain.unwrap_or(1.0);
        if !(gain.is_finite() && gain > 0.0) {
            failures.push(format!("reference_gain must be finite and > 0, got {gain}"));
        }
        if !failures.is_empty() {
            return Err(Error::Validation(failures));
        }

        let knots: Vec<Knot<T>> = knots
            .iter()
            .map(|k| Knot { hz: T::of(k.hz), threshold: T::of(k.threshold), exponent: T::of(k.exponent) })
            .collect();
        Ok(PerceptionModel {
            log_hz: knots.iter().map(|k| k.hz.ln()).collect(),
            log_threshold: knots.iter().map(|k| k.threshold.ln()).collect(),
            knots,
            reference_gain: T::of(gain),
        })
    }

    pub fn to_config(&self) -> PerceptionConfig {
        PerceptionConfig {
            knots: self
                .knots
                .iter()
                .map(|k| KnotRecord { hz: k.hz.as_f64(), threshold: k.threshold.as_f64(), exponent: k.exponent.as_f64() })
                .collect(),
            reference_gain: Some(self.reference_gain.as_f64()),
        }
    }

    pub fn knots(&self) -> &[Knot<T>] {
        &self.knots
    }

    /// Signal units per physical unit of the sensor chain. Informational.
    pub fn reference_gain(&self) -> T {
        self.reference_gain
    }

    fn check_range(f: T) -> Result<()> {
        if f >= T::of(MIN_HZ) && f <= T::of(MAX_HZ) {
            Ok(())
        } else {
            Err(Error::domain(format!("frequency {f} Hz outside [{MIN_HZ}, {MAX_HZ}]")))
        }
    }

    /// Segment `i` such that `knots[i].hz <= f <= knots[i+1].hz`, plus the
    /// log-frequency interpolation weight. `Err(i)` means `f` sits on knot `i`.
    fn locate(&self, f: T) -> std::result::Result<(usize, T), usize> {
        let upper = self.knots.partition_point(|k| k.hz < f);
        if upper < self.knots.len() && self.knots[upper].hz == f {
            return Err(upper);
        }
        // f lies strictly inside the table since coverage was validated.
        let i = upper.saturating_sub(1).min(self.knots.len() - 2);
        let t = (f.ln() - self.log_hz[i]) / (self.log_hz[i + 1] - self.log_hz[i]);
        Ok((i, t))
    }

    fn threshold_unchecked(&self, f: T) -> T {
        match self.locate(f) {
            Err(k) => self.knots[k].threshold,
            Ok((i, t)) => {
                let lt = self.log_threshold[i] + t * (self.log_threshold[i + 1] - self.log_threshold[i]);
                lt.exp()
            }
        }
    }

    fn exponent_unchecked(&self, f: T) -> T {
        match self.locate(f) {
            Err(k) => self.knots[k].exponent,
            Ok((i, t)) => {
                let (a, b) = (self.knots[i].exponent, self.knots[i + 1].exponent);
                a + t * (b - a)
            }
        }
    }

    /// Threshold amplitude `AT(f)`.
    pub fn threshold_at(&self, f: T) -> Result<T> {
        Self::check_range(f)?;
        Ok(self.threshold_unchecked(f))
    }

    /// Intensity exponent `alpha(f)`.
    pub fn exponent_at(&self, f: T) -> Result<T> {
        Self::check_range(f)?;
        Ok(self.exponent_unchecked(f))
    }

    /// Perceived intensity of a vibration with amplitude `a` at `f` Hz.
    pub fn perceived_intensity(&self, a: T, f: T) -> Result<Intensity<T>> {
        if !(a >= T::zero()) || !a.is_finite() {
            return Err(Error::domain(format!("amplitude must be finite and >= 0, got {a}")));
        }
        Self::check_range(f)?;
        let ratio = a / self.threshold_unchecked(f);
        Intensity::new((ratio * ratio).powf(self.exponent_unchecked(f)))
    }

    /// Amplitude at `f` Hz whose perceived intensity is `i`.
    pub fn amplitude_for_intensity(&self, i: T, f: T) -> Result<T> {
        if !(i >= T::zero()) || !i.is_finite() {
            return Err(Error::domain(format!("intensity must be finite and >= 0, got {i}")));
        }
        Self::check_range(f)?;
        let two = T::one() + T::one();
        Ok(self.threshold_unchecked(f) * i.powf(T::one() / (two * self.exponent_unchecked(f))))
    }
}
