//! Deterministic synthetic stimuli: motor-like ego-noise, tones and bursts.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One additive component of a scenario. Amplitudes are peak values in
/// signal units; for `broadband` it is the peak-equivalent `sqrt(2) * RMS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Component {
    Tone {
        frequency: f64,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        start: f64,
        #[serde(default)]
        length: Option<f64>,
    },
    /// Fundamental plus integer harmonics, the k-th at `amplitude / k`.
    /// `harmonics` counts the fundamental.
    HarmonicStack {
        frequency: f64,
        amplitude: f64,
        harmonics: usize,
        #[serde(default)]
        phase: f64,
    },
    /// Gaussian noise band-limited to `[low_hz, high_hz]`.
    Broadband {
        amplitude: f64,
        low_hz: f64,
        high_hz: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Tone starting at `start` for `length` seconds. `decay` is an
    /// exponential time constant; `ramp` applies raised-cosine onset and
    /// offset tapers of that many seconds. Omitted means rectangular gating.
    Burst {
        frequency: f64,
        amplitude: f64,
        start: f64,
        length: f64,
        #[serde(default)]
        decay: Option<f64>,
        #[serde(default)]
        ramp: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Seconds.
    pub duration: f64,
    /// Default seed for components that do not set their own.
    #[serde(default)]
    pub seed: u64,
    pub components: Vec<Component>,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Stationary motor-like noise used by `bench` and the calibration tests:
    /// a 150 Hz harmonic stack over broadband noise covering 200-1500 Hz.
    pub fn stationary_ego_noise(duration: f64, seed: u64) -> Self {
        ScenarioSpec {
            duration,
            seed,
            components: vec![
                Component::HarmonicStack { frequency: 150.0, amplitude: 0.02, harmonics: 4, phase: 0.0 },
                Component::Broadband { amplitude: 0.01, low_hz: 200.0, high_hz: 1500.0, seed: None },
            ],
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let mut failures = Vec::new();
        if !(self.duration.is_finite() && self.duration > 0.0) {
            failures.push(format!("duration must be > 0, got {}", self.duration));
        }
        let mut freq = |i: usize, what: &str, f: f64| {
            if !(f > 0.0 && f < nyquist) {
                failures.push(format!("component {i}: {what} {f} Hz outside (0, {nyquist})"));
            }
        };
        for (i, c) in self.components.iter().enumerate() {
            match *c {
                Component::Tone { frequency, .. } | Component::Burst { frequency, .. } => freq(i, "frequency", frequency),
                Component::HarmonicStack { frequency, harmonics, .. } => {
                    freq(i, "frequency", frequency);
                    freq(i, "top harmonic", frequency * harmonics as f64);
                }
                Component::Broadband { low_hz, high_hz, .. } => {
                    freq(i, "low_hz", low_hz);
                    freq(i, "high_hz", high_hz);
                }
            }
        }
        for (i, c) in self.components.iter().enumerate() {
            let amp = match *c {
                Component::Tone { amplitude, .. }
                | Component::HarmonicStack { amplitude, .. }
                | Component::Broadband { amplitude, .. }
                | Component::Burst { amplitude, .. } => amplitude,
            };
            if !(0.0..=1.0).contains(&amp) {
                failures.push(format!("component {i}: amplitude {amp} outside [0, 1]"));
            }
            match *c {
                Component::HarmonicStack { harmonics: 0, .. } => {
                    failures.push(format!("component {i}: harmonics must be >= 1"))
                }
                Component::Broadband { low_hz, high_hz, .. } if low_hz >= high_hz => {
                    failures.push(format!("component {i}: low_hz must be below high_hz"))
                }
                Component::Burst { length, decay, .. } if !(length > 0.0) || decay.is_some_and(|d| !(d > 0.0)) => {
                    failures.push(format!("component {i}: burst length and decay must be > 0"))
                }
                Component::Burst { length, ramp: Some(r), .. } if !(r > 0.0 && 2.0 * r <= length) => {
                    failures.push(format!("component {i}: burst ramp must be > 0 and at most half the length"))
                }
                _ => {}
            }
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failures))
        }
    }
}

fn time_span(start: f64, length: Option<f64>, fs: f64, n: usize) -> std::ops::Range<usize> {
    let a = ((start * fs).round().max(0.0) as usize).min(n);
    let b = match length {
        Some(l) => (((start + l) * fs).round().max(0.0) as usize).min(n),
        None => n,
    };
    a..b.max(a)
}

fn band_limited_noise(n: usize, fs: f64, low: f64, high: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> =
        (0..n).map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, bin) in buf.iter_mut().enumerate() {
        // Bin k and its mirror n-k share the frequency k * fs / n.
        let f = k.min(n - k) as f64 * fs / n as f64;
        if !(f >= low && f <= high) {
            *bin = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let scale = amplitude / (2f64.sqrt() * rms);
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

/// Renders a scenario. Identical spec and rate give bit-identical output.
pub fn generate(scenario: &ScenarioSpec, sample_rate: u32) -> Result<Vec<f64>> {
    scenario.validate(sample_rate)?;
    let fs = sample_rate as f64;
    let n = (scenario.duration * fs).round() as usize;
    let mut out = vec![0.0; n];
    for (i, c) in scenario.components.iter().enumerate() {
        match *c {
            Component::Tone { frequency, amplitude, phase, start, length } => {
                for k in time_span(start, length, fs, n) {
                    out[k] += amplitude * (TAU * frequency * k as f64 / fs + phase).sin();
                }
            }
            Component::HarmonicStack { frequency, amplitude, harmonics, phase } => {
                for (k, slot) in out.iter_mut().enumerate() {
                    let t = k as f64 / fs;
                    for h in 1..=harmonics {
                        let hf = h as f64;
                        *slot += amplitude / hf * (TAU * frequency * hf * t + phase * hf).sin();
                    }
                }
            }
            Component::Broadband { amplitude, low_hz, high_hz, seed } => {
                if n > 0 {
                    let seed = seed.unwrap_or(scenario.seed.wrapping_add(i as u64));
                    let noise = band_limited_noise(n, fs, low_hz, high_hz, amplitude, seed);
                    out.iter_mut().zip(noise).for_each(|(o, v)| *o += v);
                }
            }
            Component::Burst { frequency, amplitude, start, length, decay, ramp } => {
                let span = time_span(start, Some(length), fs, n);
                let onset = span.start;
                for k in span {
                    let t = (k - onset) as f64 / fs;
                    let mut env = decay.map_or(1.0, |tau| (-t / tau).exp());
                    if let Some(r) = ramp {
                        let edge = t.min(length - t);
                        if edge < r {
                            env *= 0.5 - 0.5 * (PI * edge / r).cos();
                        }
                    }
                    out[k] += amplitude * env * (TAU * frequency * t).sin();
                }
            }
        }
    }
    Ok(out)
}
