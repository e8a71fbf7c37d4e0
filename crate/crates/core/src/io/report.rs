//! CSV and JSON report files. Floats use Rust's shortest round-trip
//! formatting, so every value parses back to the exact number computed.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::FrameStats;
use crate::scalar::Scalar;
use crate::spectrum::{BandScheme, IntensitySpectrum};

pub const FRAME_COLUMNS: [&str; 7] =
    ["frame_index", "t_sec", "input_intensity", "residual_intensity", "filter_max_delta", "proc_us", "missed"];

/// Per-frame sidecar: one row per hop.
pub fn write_frame_csv<W: Write>(out: W, stats: &[FrameStats], hop_seconds: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRAME_COLUMNS)?;
    for s in stats {
        w.write_record([
            s.frame_index.to_string(),
            (s.frame_index as f64 * hop_seconds).to_string(),
            s.input_total_intensity.to_string(),
            s.residual_total_intensity.to_string(),
            s.filter_max_delta.to_string(),
            format!("{:.3}", s.processing_time * 1e6),
            u8::from(s.deadline_missed).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed row of the per-frame sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub frame_index: u64,
    pub t_sec: f64,
    pub input_intensity: f64,
    pub residual_intensity: f64,
    pub filter_max_delta: f64,
    pub proc_us: f64,
    pub missed: bool,
}

pub fn read_frame_csv(path: impl AsRef<Path>) -> Result<Vec<FrameRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != FRAME_COLUMNS {
        return Err(Error::Parse(format!("unexpected frame CSV header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(FrameRow {
                frame_index: rec[0].parse().map_err(|e| Error::Parse(format!("{:?}: {e}", &rec[0])))?,
                t_sec: num(&rec[1])?,
                input_intensity: num(&rec[2])?,
                residual_intensity: num(&rec[3])?,
                filter_max_delta: num(&rec[4])?,
                proc_us: num(&rec[5])?,
                missed: &rec[6] == "1",
            })
        })
        .collect()
}

/// Long-format spectrum rows: `frame_index, band_lo_hz, intensity`.
pub struct SpectrumCsv<W: Write> {
    w: csv::Writer<W>,
    scheme: BandScheme,
}

impl<W: Write> SpectrumCsv<W> {
    pub fn new(out: W, scheme: BandScheme) -> Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_index", "band_lo_hz", "intensity"])?;
        Ok(SpectrumCsv { w, scheme })
    }

    /// Writes every band of `s`, or only the non-zero ones when `sparse`.
    pub fn write<T: Scalar>(&mut self, s: &IntensitySpectrum<T>, sparse: bool) -> Result<()> {
        for (i, &v) in s.values().iter().enumerate() {
            if sparse && v == T::zero() {
                continue;
            }
            self.w.write_record([
                s.frame_index.to_string(),
                self.scheme.band_lo(i).to_string(),
                v.as_f64().to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_csv_round_trips_values() {
        let stats: Vec<FrameStats> = (0..5)
            .map(|i| FrameStats {
                frame_index: i,
                input_total_intensity: 0.1 + i as f64 / 3.0,
                residual_total_intensity: (i as f64).sqrt() / 7.0,
                filter_max_delta: 1e-300 * i as f64,
                processing_time: 1.234e-4,
                deadline_missed: i == 2,
                saturation_count: 0,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_frame_csv(std::fs::File::create(&path).unwrap(), &stats, 0.0025).unwrap();
        let rows = read_frame_csv(&path).unwrap();
        assert_eq!(rows.len(), 5);
        for (r, s) in rows.iter().zip(&stats) {
            assert_eq!(r.frame_index, s.frame_index);
            assert_eq!(r.input_intensity.to_bits(), s.input_total_intensity.to_bits());
            assert_eq!(r.residual_intensity.to_bits(), s.residual_total_intensity.to_bits());
            assert_eq!(r.filter_max_delta.to_bits(), s.filter_max_delta.to_bits());
            assert_eq!(r.missed, s.deadline_missed);
        }
        assert_eq!(rows[4].t_sec, 0.01);
    }

    #[test]
    fn spectrum_rows() {
        let mut v = vec![0.0f64; 995];
        v[5] = 0.75;
        let s = IntensitySpectrum::from_values(v, 12).unwrap();
        let mut buf = Vec::new();
        let mut w = SpectrumCsv::new(&mut buf, BandScheme::default()).unwrap();
        w.write(&s, true).unwrap();
        w.finish().unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frame_index,band_lo_hz,intensity\n12,200,0.75\n");
    }
}
