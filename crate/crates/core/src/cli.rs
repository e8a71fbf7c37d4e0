//! Command-line workflows: `calibrate`, `process`, `synth`, `analyze`, `bench`.
//!
//! Exit codes: 0 success, 1 validation or processing error, 2 I/O error or
//! bad usage.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baseline::amplitude_subtraction_residual;
use crate::error::{Error, Result};
use crate::io::{self, report, Encoding, ScenarioSpec, SpectrumCsv, WavSink, WavSource, WavSpec};
use crate::noise_filter::{FilterInit, NoiseFilter};
use crate::pipeline::{Engine, EngineConfig, Mode, NullSink, PerfReport, RunReport, SampleSource, SliceSource};

#[derive(Debug, Parser)]
#[command(name = "tactile-ism", version, about = "Perceived-intensity ego-noise subtraction for vibrotactile feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutEncoding {
    Float,
    Int16,
}

impl From<OutEncoding> for Encoding {
    fn from(e: OutEncoding) -> Self {
        match e {
            OutEncoding::Float => Encoding::Float32,
            OutEncoding::Int16 => Encoding::Int16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Floor,
    SeedFirst,
}

impl From<InitArg> for FilterInit {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Floor => FilterInit::Floor,
            InitArg::SeedFirst => FilterInit::SeedFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    AmplitudeSubtraction,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adapt a noise filter to an ego-noise recording and save it.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        filter_out: PathBuf,
        /// Freeze the filter as soon as it converges.
        #[arg(long)]
        auto_freeze: bool,
        /// Override `filter.init` from the config.
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Per-frame CSV sidecar.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the calibration-mode output signal.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subtract ego-noise with a frozen filter and re-synthesize the AM output.
    Process {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        filter: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-frame CSV; a JSON summary is written next to it.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value = "float")]
        encoding: OutEncoding,
    },
    /// Render a synthetic scenario to a WAV file.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 48_000)]
        rate: u32,
        #[arg(long, value_enum, default_value = "float")]
        encoding: OutEncoding,
    },
    /// Per-frame band intensities, residuals and filter values as CSV.
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        filter: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Add the residual an amplitude-domain subtraction would leave.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Long-format `frame_index,band_lo_hz,intensity` rows of the input spectra.
        #[arg(long)]
        spectra: Option<PathBuf>,
    },
    /// Time the per-hop processing on synthetic ego-noise.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        /// Also write the timing summary as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tactile-ism: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p),
        None => {
            let c = EngineConfig::default();
            c.framing()?;
            Ok(c)
        }
    }
}

fn load_filter(path: &Path) -> Result<NoiseFilter<f64>> {
    NoiseFilter::from_json(&std::fs::read_to_string(path)?)
}

fn print_json<S: Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn summary_path(report: &Path) -> PathBuf {
    report.with_extension("json")
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn open_input(path: &Path, config: &EngineConfig) -> Result<WavSource> {
    let src = WavSource::open(path)?;
    src.spec().check_processing(config.pipeline.sample_rate)?;
    Ok(src)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Calibrate { config, input, filter_out, auto_freeze, init, report, out } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(init) = init {
                config.filter.init = init.into();
            }
            let floor_init = config.filter.init == FilterInit::Floor;
            let report_doc = calibrate(config, &input, &filter_out, auto_freeze, report.as_deref(), out.as_deref())?;
            if floor_init && report_doc.freeze_frame.is_some() {
                eprintln!(
                    "tactile-ism: warning: the filter grows very slowly from its floor, so its relative changes \
                     look converged long before it has learned the noise; consider --init seed-first"
                );
            }
            print_json(&report_doc)
        }
        Command::Process { config, filter, input, out, report, encoding } => {
            let r = process(load_config(config.as_deref())?, &filter, &input, &out, &report, encoding.into())?;
            print_json(&r)
        }
        Command::Synth { scenario, out, rate, encoding } => {
            let n = synth(&ScenarioSpec::load(&scenario)?, &out, rate, encoding.into())?;
            println!("wrote {n} samples at {rate} Hz to {}", out.display());
            Ok(())
        }
        Command::Analyze { config, filter, input, csv, baseline, spectra } => {
            let s = analyze(load_config(config.as_deref())?, &filter, &input, &csv, baseline.is_some(), spectra.as_deref())?;
            print_json(&s)
        }
        Command::Bench { config, seconds, json } => {
            let p = bench(load_config(config.as_deref())?, seconds)?;
            if let Some(path) = json {
                report::write_json(path, &p)?;
            }
            print_json(&p)
        }
    }
}

/// Runs calibration over a recording and writes the filter document.
pub fn calibrate(
    mut config: EngineConfig,
    input: &Path,
    filter_out: &Path,
    auto_freeze: bool,
    frame_csv: Option<&Path>,
    out: Option<&Path>,
) -> Result<RunReport> {
    config.pipeline.mode = Mode::Calibrate;
    config.pipeline.auto_freeze |= auto_freeze;
    let mut source = open_input(input, &config)?;
    let mut engine = Engine::<f64>::new(config, None)?;
    let report = match out {
        Some(path) => {
            let mut sink = WavSink::create(path, source.spec())?;
            engine.run_stream(&mut source, &mut sink)?
        }
        None => engine.run_stream(&mut source, &mut NullSink)?,
    };
    std::fs::write(filter_out, engine.filter().to_json()? + "\n")?;
    if let Some(path) = frame_csv {
        report::write_frame_csv(BufWriter::new(File::create(path)?), &report.frame_stats, engine.deadline())?;
    }
    Ok(report)
}

/// Subtracts with a frozen filter and writes the AM output and reports.
pub fn process(
    mut config: EngineConfig,
    filter: &Path,
    input: &Path,
    out: &Path,
    frame_csv: &Path,
    encoding: Encoding,
) -> Result<RunReport> {
    config.pipeline.mode = Mode::Run;
    let filter = load_filter(filter)?;
    let mut source = open_input(input, &config)?;
    let mut engine = Engine::<f64>::new(config, Some(filter))?;
    let mut sink = WavSink::create(out, WavSpec::mono(source.spec().sample_rate, encoding))?;
    let report = engine.run_stream(&mut source, &mut sink)?;
    report::write_frame_csv(BufWriter::new(File::create(frame_csv)?), &report.frame_stats, engine.deadline())?;
    report::write_json(summary_path(frame_csv), &report)?;
    Ok(report)
}

pub fn synth(scenario: &ScenarioSpec, out: &Path, rate: u32, encoding: Encoding) -> Result<usize> {
    let samples = io::generate(scenario, rate)?;
    io::write_wav(out, WavSpec::mono(rate, encoding), &samples)?;
    Ok(samples.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeSummary {
    pub frames: usize,
    pub bands: usize,
    pub mean_input_intensity: f64,
    pub mean_residual_intensity: f64,
    pub mean_baseline_residual_intensity: Option<f64>,
    pub csv: PathBuf,
    pub filter_csv: PathBuf,
}

/// Writes one wide CSV row per hop: totals, then `in_<band_lo>` and
/// `res_<band_lo>` for every band (and `base_<band_lo>` with the baseline).
/// Filter values go to `<stem>.filter.csv`.
pub fn analyze(
    mut config: EngineConfig,
    filter: &Path,
    input: &Path,
    csv_path: &Path,
    with_baseline: bool,
    spectra: Option<&Path>,
) -> Result<AnalyzeSummary> {
    config.pipeline.mode = Mode::Run;
    let filter = load_filter(filter)?;
    let mut source = open_input(input, &config)?;
    let mut engine = Engine::<f64>::new(config, Some(filter))?;
    let scheme = *engine.filter().scheme();
    let hop = engine.hop_samples();
    let hop_seconds = engine.deadline();

    let labels: Vec<String> = (0..scheme.count()).map(|b| scheme.band_lo(b).to_string()).collect();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    let mut header: Vec<String> =
        ["frame_index", "t_sec", "input_intensity", "residual_intensity"].iter().map(|s| s.to_string()).collect();
    if with_baseline {
        header.push("baseline_residual_intensity".into());
    }
    header.extend(labels.iter().map(|l| format!("in_{l}")));
    header.extend(labels.iter().map(|l| format!("res_{l}")));
    if with_baseline {
        header.extend(labels.iter().map(|l| format!("base_{l}")));
    }
    w.write_record(&header)?;

    let mut spectra_csv = match spectra {
        Some(p) => Some(SpectrumCsv::new(BufWriter::new(File::create(p)?), scheme)?),
        None => None,
    };

    let mut inbuf = vec![0.0f64; hop];
    let mut outbuf = vec![0.0f64; hop];
    let (mut frames, mut sum_in, mut sum_res, mut sum_base) = (0usize, 0.0, 0.0, 0.0);
    loop {
        let got = SampleSource::<f64>::read(&mut source, &mut inbuf)?;
        if got == 0 {
            break;
        }
        inbuf[got..].iter_mut().for_each(|v| *v = 0.0);
        let stats = engine.process_hop_into(&inbuf, &mut outbuf)?;
        let input_spec = engine.last_input_spectrum();
        let residual = engine.last_residual_spectrum();
        let mut row = vec![
            stats.frame_index.to_string(),
            (stats.frame_index as f64 * hop_seconds).to_string(),
            stats.input_total_intensity.to_string(),
            stats.residual_total_intensity.to_string(),
        ];
        let base = if with_baseline {
            let b = amplitude_subtraction_residual(engine.last_components(), engine.filter(), engine.model(), stats.frame_index)?;
            let total = b.total().value();
            row.push(total.to_string());
            sum_base += total;
            Some(b)
        } else {
            None
        };
        row.extend(input_spec.values().iter().map(f64::to_string));
        row.extend(residual.values().iter().map(f64::to_string));
        if let Some(b) = &base {
            row.extend(b.values().iter().map(f64::to_string));
        }
        w.write_record(&row)?;
        if let Some(s) = spectra_csv.as_mut() {
            s.write(input_spec, false)?;
        }
        frames += 1;
        sum_in += stats.input_total_intensity;
        sum_res += stats.residual_total_intensity;
        if got < hop {
            break;
        }
    }
    w.flush()?;
    if let Some(s) = spectra_csv {
        s.finish()?;
    }

    let filter_csv = sidecar(csv_path, "filter.csv");
    let mut fw = csv::Writer::from_writer(BufWriter::new(File::create(&filter_csv)?));
    fw.write_record(["band_lo_hz", "filter"])?;
    for (l, v) in labels.iter().zip(engine.filter().values()) {
        fw.write_record([l.clone(), v.to_string()])?;
    }
    fw.flush()?;

    let mean = |s: f64| if frames == 0 { 0.0 } else { s / frames as f64 };
    Ok(AnalyzeSummary {
        frames,
        bands: scheme.count(),
        mean_input_intensity: mean(sum_in),
        mean_residual_intensity: mean(sum_res),
        mean_baseline_residual_intensity: with_baseline.then(|| mean(sum_base)),
        csv: csv_path.to_path_buf(),
        filter_csv,
    })
}

/// Calibrates on `seconds` of synthetic stationary ego-noise (the most
/// expensive mode: spectrum, update and subtraction every hop) and reports
/// per-hop timing.
pub fn bench(mut config: EngineConfig, seconds: f64) -> Result<PerfReport> {
    if !(seconds > 0.0) {
        return Err(Error::domain(format!("bench needs a positive duration, got {seconds}")));
    }
    config.pipeline.mode = Mode::Calibrate;
    config.pipeline.auto_freeze = false;
    let rate = config.pipeline.sample_rate;
    let input = io::generate(&ScenarioSpec::stationary_ego_noise(seconds, 1), rate)?;
    let mut engine = Engine::<f64>::new(config, None)?;
    engine.run_stream(&mut SliceSource::new(&input, rate), &mut NullSink)?;
    engine.perf_report()
}
