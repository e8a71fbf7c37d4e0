use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emd::SiftParams;
use crate::error::{Error, Result};
use crate::noise_filter::{FilterInit, DEFAULT_FLOOR};
use crate::perception::PerceptionConfig;
use crate::spectrum::BandScheme;
use crate::synth::DEFAULT_CARRIER_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Adapt the noise filter while processing.
    #[default]
    Calibrate,
    /// Subtract with a frozen filter.
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub sample_rate: u32,
    pub hop_ms: f64,
    pub window_ms: f64,
    pub mode: Mode,
    pub auto_freeze: bool,
    pub convergence_window: usize,
    pub convergence_epsilon: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            sample_rate: 48_000,
            hop_ms: 2.5,
            window_ms: 25.0,
            mode: Mode::Calibrate,
            auto_freeze: false,
            convergence_window: 40,
            convergence_epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub floor: f64,
    pub init: FilterInit,
    pub bands: BandScheme,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection { floor: DEFAULT_FLOOR, init: FilterInit::Floor, bands: BandScheme::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub carrier_hz: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { carrier_hz: DEFAULT_CARRIER_HZ }
    }
}

/// Complete engine configuration: one TOML file with sections `pipeline`,
/// `emd`, `perception`, `filter` and `synth`. Missing sections take defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub pipeline: PipelineSection,
    pub emd: SiftParams,
    pub perception: PerceptionConfig,
    pub filter: FilterSection,
    pub synth: SynthSection,
}

/// Sample counts derived from a validated config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub hop: usize,
    pub window: usize,
}

fn whole_samples(rate: u32, ms: f64) -> Option<usize> {
    let n = rate as f64 * ms / 1000.0;
    let r = n.round();
    ((n - r).abs() < 1e-9 && r >= 1.0).then_some(r as usize)
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig = toml::from_str(text)?;
        config.framing()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates every section and returns hop and window lengths in samples.
    pub fn framing(&self) -> Result<Framing> {
        let p = &self.pipeline;
        let mut failures = Vec::new();
        if p.sample_rate == 0 {
            failures.push("pipeline.sample_rate must be > 0".to_string());
        }
        let hop = whole_samples(p.sample_rate, p.hop_ms);
        let window = whole_samples(p.sample_rate, p.window_ms);
        if hop.is_none() {
            failures.push(format!("pipeline.hop_ms {} is not a whole number of samples at {} Hz", p.hop_ms, p.sample_rate));
        }
        if window.is_none() {
            failures.push(format!(
                "pipeline.window_ms {} is not a whole number of samples at {} Hz",
                p.window_ms, p.sample_rate
            ));
        }
        if let (Some(h), Some(w)) = (hop, window) {
            if w % h != 0 {
                failures.push(format!("pipeline: hop ({h} samples) must divide the window ({w} samples)"));
            }
            if w < crate::emd::MIN_WINDOW {
                failures.push(format!("pipeline: window of {w} samples is shorter than {}", crate::emd::MIN_WINDOW));
            }
        }
        // Enough of the lowest band to see it oscillate: 2.5 periods.
        if p.window_ms / 1000.0 * self.filter.bands.f_lo < 2.5 - 1e-9 {
            failures.push(format!(
                "pipeline.window_ms {} covers fewer than 2.5 periods of the lowest band ({} Hz)",
                p.window_ms, self.filter.bands.f_lo
            ));
        }
        if p.convergence_window < 1 {
            failures.push("pipeline.convergence_window must be >= 1".to_string());
        }
        if !(p.convergence_epsilon.is_finite() && p.convergence_epsilon > 0.0) {
            failures.push(format!("pipeline.convergence_epsilon must be > 0, got {}", p.convergence_epsilon));
        }
        if !(self.filter.floor.is_finite() && self.filter.floor >= 0.0) {
            failures.push(format!("filter.floor must be finite and >= 0, got {}", self.filter.floor));
        }
        let carrier = self.synth.carrier_hz;
        if !(carrier >= 100.0 && carrier < 20_000.0) {
            failures.push(format!("synth.carrier_hz {carrier} outside [100, 20000)"));
        } else if (p.sample_rate as f64) <= 2.0 * carrier {
            failures.push(format!("pipeline.sample_rate must exceed twice synth.carrier_hz ({carrier})"));
        }
        for section in [
            self.emd.validate(),
            self.filter.bands.validate(),
            crate::perception::PerceptionModel::<f64>::load(&self.perception).map(|_| ()),
        ] {
            match section {
                Ok(()) => {}
                Err(Error::Validation(f)) => failures.extend(f),
                Err(e) => failures.push(e.to_string()),
            }
        }
        if failures.is_empty() {
            Ok(Framing { hop: hop.unwrap(), window: window.unwrap() })
        } else {
            Err(Error::Validation(failures))
        }
    }
}
