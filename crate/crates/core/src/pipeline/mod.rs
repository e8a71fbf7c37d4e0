//! Streaming engine.
//!
//! Every hop (2.5 ms by default) the engine appends the new samples to a ring
//! buffer, computes the perceived-intensity spectrum of the trailing analysis
//! window, updates the noise filter when calibrating, subtracts it, and
//! renders one hop of AM carrier carrying the residual total intensity. The
//! output hop depends only on input up to and including the current hop.

mod config;
mod ring;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{EngineConfig, FilterSection, Framing, Mode, PipelineSection, SynthSection};
pub use ring::HopRing;

use crate::error::{Error, Result};
use crate::noise_filter::NoiseFilter;
use crate::perception::PerceptionModel;
use crate::scalar::Scalar;
use crate::spectrum::{self, ImfComponent, IntensitySpectrum};
use crate::synth::{self, SynthState};

/// Per-hop bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame_index: u64,
    pub input_total_intensity: f64,
    pub residual_total_intensity: f64,
    /// Largest relative filter change this hop; 0 when the filter did not update.
    pub filter_max_delta: f64,
    /// Wall-clock processing time in seconds. Not part of the signal path.
    pub processing_time: f64,
    pub deadline_missed: bool,
    /// Output samples clamped to [-1, 1] in this hop.
    pub saturation_count: u64,
}

/// Aggregate per-hop timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub frames: usize,
    /// Hop duration in seconds.
    pub deadline: f64,
    pub mean: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub deadline_misses: usize,
}

impl PerfReport {
    pub fn from_times(times: &[f64], deadline: f64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::state("no processed frames to report on"));
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Ok(PerfReport {
            frames: times.len(),
            deadline,
            mean: times.iter().sum::<f64>() / times.len() as f64,
            p95: rank(0.95),
            p99: rank(0.99),
            max: sorted[sorted.len() - 1],
            deadline_misses: times.iter().filter(|&&t| t > deadline).count(),
        })
    }
}

/// Summary of one `run_stream` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub sample_rate: u32,
    pub hop_samples: usize,
    pub frames: usize,
    pub input_samples: u64,
    pub output_samples: u64,
    /// Zeros appended to complete the last hop; its output is truncated to
    /// the real input length.
    pub trailing_padded_samples: usize,
    pub converged: bool,
    pub freeze_frame: Option<u64>,
    pub saturation_count: u64,
    pub deadline_misses: usize,
    pub mean_input_intensity: f64,
    pub mean_residual_intensity: f64,
    pub perf: Option<PerfReport>,
    #[serde(skip)]
    pub frame_stats: Vec<FrameStats>,
}

/// Pull-based mono sample input.
pub trait SampleSource<T> {
    fn sample_rate(&self) -> u32;

    /// Fills `buf` from the front and returns how many samples were written.
    /// Fewer than `buf.len()` means the source is exhausted.
    fn read(&mut self, buf: &mut [T]) -> Result<usize>;
}

pub trait SampleSink<T> {
    fn write(&mut self, samples: &[T]) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Source over an in-memory slice.
#[derive(Debug, Clone)]
pub struct SliceSource<'a, T> {
    samples: &'a [T],
    pos: usize,
    sample_rate: u32,
}

impl<'a, T> SliceSource<'a, T> {
    pub fn new(samples: &'a [T], sample_rate: u32) -> Self {
        SliceSource { samples, pos: 0, sample_rate }
    }
}

impl<T: Copy> SampleSource<T> for SliceSource<'_, T> {
    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn read(&mut self, buf: &mut [T]) -> Result<usize> {
        let n = buf.len().min(self.samples.len() - self.pos);
        buf[..n].copy_from_slice(&self.samples[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl<T: Copy> SampleSink<T> for Vec<T> {
    fn write(&mut self, samples: &[T]) -> Result<()> {
        self.extend_from_slice(samples);
        Ok(())
    }
}

/// Sink that drops everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<T> SampleSink<T> for NullSink {
    fn write(&mut self, _samples: &[T]) -> Result<()> {
        Ok(())
    }
}

type HopHook = Box<dyn FnMut(u64) + Send>;

/// One stream's processing state. `process_hop` calls must be made in order.
pub struct Engine<T: Scalar> {
    config: EngineConfig,
    framing: Framing,
    sample_rate: T,
    carrier: T,
    model: PerceptionModel<T>,
    filter: NoiseFilter<T>,
    synth: SynthState<T>,
    ring: HopRing<T>,
    window: Vec<T>,
    frame_index: u64,
    freeze_frame: Option<u64>,
    stats: Vec<FrameStats>,
    last_components: Vec<ImfComponent<T>>,
    last_input: IntensitySpectrum<T>,
    last_residual: IntensitySpectrum<T>,
    hook: Option<HopHook>,
}

impl<T: Scalar> std::fmt::Debug for Engine<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("mode", &self.config.pipeline.mode)
            .field("framing", &self.framing)
            .field("frame_index", &self.frame_index)
            .field("frozen", &self.filter.is_frozen())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> Engine<T> {
    /// Builds an engine. Without a filter, a fresh one is created from the
    /// `filter` section. In run mode the filter is frozen.
    pub fn new(config: EngineConfig, filter: Option<NoiseFilter<T>>) -> Result<Self> {
        let framing = config.framing()?;
        let model = PerceptionModel::load(&config.perception)?;
        let scheme = config.filter.bands;
        let mut filter = match filter {
            Some(f) => {
                if *f.scheme() != scheme {
                    let s = f.scheme();
                    return Err(Error::Validation(vec![format!(
                        "filter band scheme {}..{} Hz / {} Hz ({} bands) does not match config {}..{} Hz / {} Hz ({} bands)",
                        s.f_lo,
                        s.f_hi,
                        s.width,
                        f.values().len(),
                        scheme.f_lo,
                        scheme.f_hi,
                        scheme.width,
                        scheme.count()
                    )]));
                }
                f
            }
            None => NoiseFilter::new(scheme, T::of(config.filter.floor))?.with_init(config.filter.init),
        };
        let history = crate::noise_filter::DEFAULT_HISTORY.max(config.pipeline.convergence_window);
        filter = filter.with_history(history);
        if config.pipeline.mode == Mode::Run {
            filter.freeze();
        }
        let sample_rate = T::of(config.pipeline.sample_rate as f64);
        let carrier = T::of(config.synth.carrier_hz);
        let bands = scheme.count();
        Ok(Engine {
            synth: SynthState::new(carrier, sample_rate)?,
            framing,
            sample_rate,
            carrier,
            model,
            filter,
            ring: HopRing::new(framing.window),
            window: vec![T::zero(); framing.window],
            frame_index: 0,
            freeze_frame: None,
            stats: Vec::new(),
            last_components: Vec::new(),
            last_input: IntensitySpectrum::zeros(bands, 0),
            last_residual: IntensitySpectrum::zeros(bands, 0),
            hook: None,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn framing(&self) -> Framing {
        self.framing
    }

    pub fn hop_samples(&self) -> usize {
        self.framing.hop
    }

    /// Hop duration in seconds; the per-hop processing deadline.
    pub fn deadline(&self) -> f64 {
        self.framing.hop as f64 / self.config.pipeline.sample_rate as f64
    }

    pub fn model(&self) -> &PerceptionModel<T> {
        &self.model
    }

    pub fn filter(&self) -> &NoiseFilter<T> {
        &self.filter
    }

    pub fn into_filter(self) -> NoiseFilter<T> {
        self.filter
    }

    pub fn synth(&self) -> &SynthState<T> {
        &self.synth
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn freeze_frame(&self) -> Option<u64> {
        self.freeze_frame
    }

    pub fn stats(&self) -> &[FrameStats] {
        &self.stats
    }

    /// IMF attributions of the most recent hop.
    pub fn last_components(&self) -> &[ImfComponent<T>] {
        &self.last_components
    }

    pub fn last_input_spectrum(&self) -> &IntensitySpectrum<T> {
        &self.last_input
    }

    pub fn last_residual_spectrum(&self) -> &IntensitySpectrum<T> {
        &self.last_residual
    }

    /// Freezes the filter now (operator command).
    pub fn freeze(&mut self) {
        if !self.filter.is_frozen() {
            self.filter.freeze();
            self.freeze_frame = Some(self.frame_index);
        }
    }

    pub fn is_converged(&self) -> bool {
        self.filter
            .is_converged(self.config.pipeline.convergence_window, T::of(self.config.pipeline.convergence_epsilon))
    }

    /// Installs a callback run inside the timed section of every hop, with the
    /// hop's frame index. Meant for latency tests.
    pub fn set_hop_hook(&mut self, hook: impl FnMut(u64) + Send + 'static) {
        self.hook = Some(Box::new(hook));
    }

    pub fn process_hop(&mut self, hop: &[T]) -> Result<(Vec<T>, FrameStats)> {
        let mut out = vec![T::zero(); self.framing.hop];
        let stats = self.process_hop_into(hop, &mut out)?;
        Ok((out, stats))
    }

    /// Processes one hop of input, writing one hop of output.
    pub fn process_hop_into(&mut self, hop: &[T], out: &mut [T]) -> Result<FrameStats> {
        let n = self.framing.hop;
        if hop.len() != n || out.len() != n {
            return Err(Error::domain(format!(
                "hop must be {n} samples (got input {}, output {})",
                hop.len(),
                out.len()
            )));
        }
        if let Some(i) = hop.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("hop sample {i} is not finite")));
        }
        let started = Instant::now();
        let frame_index = self.frame_index;

        self.ring.push(hop);
        self.ring.copy_to(&mut self.window);
        let scheme = self.config.filter.bands;
        self.last_components = spectrum::frame_components(&self.window, self.sample_rate, &scheme, &self.config.emd)?;
        let input = spectrum::spectrum_from_components(&self.last_components, &self.model, &scheme, frame_index)?;

        let mut delta = T::zero();
        if self.config.pipeline.mode == Mode::Calibrate && !self.filter.is_frozen() {
            delta = self.filter.update(&input)?;
            if self.config.pipeline.auto_freeze && self.is_converged() {
                self.filter.freeze();
                self.freeze_frame = Some(frame_index);
            }
        }
        let residual = self.filter.subtract(&input)?;
        let input_total = input.total();
        let residual_total = residual.total();
        let target = synth::target_amplitude(&self.model, residual_total, self.carrier)?;
        let clipped = self.synth.render_into(target, out)?;
        self.last_input = input;
        self.last_residual = residual;

        if let Some(hook) = self.hook.as_mut() {
            hook(frame_index);
        }
        let elapsed = started.elapsed().as_secs_f64();
        let stats = FrameStats {
            frame_index,
            input_total_intensity: input_total.value().as_f64(),
            residual_total_intensity: residual_total.value().as_f64(),
            filter_max_delta: delta.as_f64(),
            processing_time: elapsed,
            deadline_missed: elapsed > self.deadline(),
            saturation_count: clipped as u64,
        };
        self.stats.push(stats.clone());
        self.frame_index += 1;
        Ok(stats)
    }

    /// Consumes `source` hop by hop and writes one output sample per input
    /// sample to `sink`. A trailing partial hop is zero-padded for processing.
    pub fn run_stream<S, K>(&mut self, source: &mut S, sink: &mut K) -> Result<RunReport>
    where
        S: SampleSource<T> + ?Sized,
        K: SampleSink<T> + ?Sized,
    {
        let rate = self.config.pipeline.sample_rate;
        if source.sample_rate() != rate {
            return Err(Error::Config(format!(
                "source sample rate {} Hz does not match engine rate {rate} Hz",
                source.sample_rate()
            )));
        }
        let hop = self.framing.hop;
        let first = self.stats.len();
        let mut inbuf = vec![T::zero(); hop];
        let mut outbuf = vec![T::zero(); hop];
        let mut input_samples = 0u64;
        let mut padded = 0usize;
        loop {
            let got = source.read(&mut inbuf)?;
            if got == 0 {
                break;
            }
            input_samples += got as u64;
            inbuf[got..].iter_mut().for_each(|v| *v = T::zero());
            self.process_hop_into(&inbuf, &mut outbuf)?;
            sink.write(&outbuf[..got])?;
            if got < hop {
                padded = hop - got;
                break;
            }
        }
        sink.finish()?;

        let frame_stats = self.stats[first..].to_vec();
        let frames = frame_stats.len();
        let mean = |f: fn(&FrameStats) -> f64| {
            if frames == 0 {
                0.0
            } else {
                frame_stats.iter().map(f).sum::<f64>() / frames as f64
            }
        };
        let times: Vec<f64> = frame_stats.iter().map(|s| s.processing_time).collect();
        Ok(RunReport {
            mode: self.config.pipeline.mode,
            sample_rate: rate,
            hop_samples: hop,
            frames,
            input_samples,
            output_samples: input_samples,
            trailing_padded_samples: padded,
            converged: self.freeze_frame.is_some() || self.is_converged(),
            freeze_frame: self.freeze_frame,
            saturation_count: frame_stats.iter().map(|s| s.saturation_count).sum(),
            deadline_misses: frame_stats.iter().filter(|s| s.deadline_missed).count(),
            mean_input_intensity: mean(|s| s.input_total_intensity),
            mean_residual_intensity: mean(|s| s.residual_total_intensity),
            perf: PerfReport::from_times(&times, self.deadline()).ok(),
            frame_stats,
        })
    }

    /// Timing over every hop processed so far.
    pub fn perf_report(&self) -> Result<PerfReport> {
        let times: Vec<f64> = self.stats.iter().map(|s| s.processing_time).collect();
        PerfReport::from_times(&times, self.deadline())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(mode: Mode) -> Engine<f64> {
        let mut c = EngineConfig::default();
        c.pipeline.mode = mode;
        Engine::new(c, None).unwrap()
    }

    #[test]
    fn silence_in_silence_out() {
        let mut e = engine(Mode::Calibrate);
        for _ in 0..20 {
            let (out, st) = e.process_hop(&[0.0; 120]).unwrap();
            assert!(out.iter().all(|&v| v == 0.0));
            assert_eq!(st.input_total_intensity, 0.0);
            assert_eq!(st.residual_total_intensity, 0.0);
        }
        assert_eq!(e.frame_index(), 20);
    }

    #[test]
    fn wrong_hop_length_is_domain_error() {
        let mut e = engine(Mode::Calibrate);
        assert!(matches!(e.process_hop(&[0.0; 119]), Err(Error::Domain(_))));
        assert!(matches!(e.process_hop(&[f64::NAN; 120]), Err(Error::Domain(_))));
    }

    #[test]
    fn run_mode_freezes_supplied_filter() {
        let e = engine(Mode::Run);
        assert!(e.filter().is_frozen());
    }

    #[test]
    fn mismatched_filter_scheme_is_rejected() {
        let f = NoiseFilter::<f64>::new(crate::spectrum::BandScheme::new(100.0, 1000.0, 20.0).unwrap(), 1e-6).unwrap();
        assert!(matches!(Engine::new(EngineConfig::default(), Some(f)), Err(Error::Validation(_))));
    }

    #[test]
    fn one_second_is_400_hops() {
        let mut e = engine(Mode::Calibrate);
        let x: Vec<f64> = (0..48_000).map(|k| 0.01 * (k as f64 * 0.3).sin()).collect();
        let mut out = Vec::new();
        let r = e.run_stream(&mut SliceSource::new(&x, 48_000), &mut out).unwrap();
        assert_eq!(r.frames, 400);
        assert_eq!(out.len(), 48_000);
        assert_eq!(r.trailing_padded_samples, 0);
    }

    #[test]
    fn partial_hop_is_padded_and_truncated() {
        let mut e = engine(Mode::Calibrate);
        let x = vec![0.0; 250];
        let mut out = Vec::new();
        let r = e.run_stream(&mut SliceSource::new(&x, 48_000), &mut out).unwrap();
        assert_eq!(r.frames, 3);
        assert_eq!(out.len(), 250);
        assert_eq!(r.trailing_padded_samples, 110);
    }

    #[test]
    fn empty_source_gives_empty_report() {
        let mut e = engine(Mode::Calibrate);
        let mut out = Vec::new();
        let r = e.run_stream(&mut SliceSource::new(&[], 48_000), &mut out).unwrap();
        assert_eq!(r.frames, 0);
        assert!(out.is_empty());
        assert!(r.perf.is_none());
        assert!(matches!(e.perf_report(), Err(Error::State(_))));
    }

    #[test]
    fn rate_mismatch_is_config_error() {
        let mut e = engine(Mode::Calibrate);
        let mut out = Vec::new();
        let r = e.run_stream(&mut SliceSource::new(&[0.0; 10], 44_100), &mut out);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn perf_percentiles() {
        let times: Vec<f64> = (1..=100).map(|k| k as f64 * 1e-4).collect();
        let p = PerfReport::from_times(&times, 2.5e-3).unwrap();
        assert_eq!(p.p95, 95e-4);
        assert_eq!(p.p99, 99e-4);
        assert_eq!(p.max, 100e-4);
        assert!(p.p99 <= p.max);
        assert_eq!(p.deadline_misses, 75);
        assert!((p.mean - 50.5e-4).abs() < 1e-12);
    }

    #[test]
    fn stall_hook_records_a_miss() {
        let mut e = engine(Mode::Calibrate);
        e.set_hop_hook(|i| {
            if i == 3 {
                std::thread::sleep(std::time::Duration::from_millis(4));
            }
        });
        for _ in 0..6 {
            e.process_hop(&[0.0; 120]).unwrap();
        }
        let p = e.perf_report().unwrap();
        assert!(p.deadline_misses >= 1);
        assert!(e.stats()[3].deadline_missed);
    }

    #[test]
    fn manual_freeze_records_frame() {
        let mut e = engine(Mode::Calibrate);
        e.process_hop(&[0.0; 120]).unwrap();
        e.freeze();
        assert_eq!(e.freeze_frame(), Some(1));
        assert!(e.filter().is_frozen());
        let before = e.filter().clone();
        e.process_hop(&[0.1; 120]).unwrap();
        assert_eq!(e.filter(), &before);
    }
}
