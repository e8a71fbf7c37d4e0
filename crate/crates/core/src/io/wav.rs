use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavWriter};

use crate::error::{Error, Result};
use crate::pipeline::{SampleSink, SampleSource};
use crate::scalar::Scalar;

const I16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// 16-bit signed integer PCM, scaled by 1/32768.
    Int16,
    /// 32-bit IEEE float PCM.
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub sample_rate: u32,
    pub channels: u16,
    pub encoding: Encoding,
}

impl WavSpec {
    pub fn mono(sample_rate: u32, encoding: Encoding) -> Self {
        WavSpec { sample_rate, channels: 1, encoding }
    }

    fn from_hound(spec: hound::WavSpec) -> Result<Self> {
        let encoding = match (spec.sample_format, spec.bits_per_sample) {
            (SampleFormat::Int, 16) => Encoding::Int16,
            (SampleFormat::Float, 32) => Encoding::Float32,
            (format, bits) => {
                return Err(Error::Validation(vec![format!(
                    "encoding: {bits}-bit {format:?} PCM is unsupported (use 16-bit int or 32-bit float)"
                )]))
            }
        };
        Ok(WavSpec { sample_rate: spec.sample_rate, channels: spec.channels, encoding })
    }

    fn to_hound(self) -> hound::WavSpec {
        let (bits_per_sample, sample_format) = match self.encoding {
            Encoding::Int16 => (16, SampleFormat::Int),
            Encoding::Float32 => (32, SampleFormat::Float),
        };
        hound::WavSpec { channels: self.channels, sample_rate: self.sample_rate, bits_per_sample, sample_format }
    }

    /// Checks that a file can feed an engine running at `engine_rate`.
    pub fn check_processing(&self, engine_rate: u32) -> Result<()> {
        let mut failures = Vec::new();
        if self.channels != 1 {
            failures.push(format!("channels: input has {} channels, processing needs 1", self.channels));
        }
        if self.sample_rate != engine_rate {
            failures.push(format!(
                "sample_rate: input is {} Hz, engine runs at {engine_rate} Hz",
                self.sample_rate
            ));
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failures))
        }
    }
}

fn open(path: &Path) -> Result<(WavReader<BufReader<File>>, WavSpec)> {
    let reader = WavReader::open(path)?;
    let spec = WavSpec::from_hound(reader.spec())?;
    Ok((reader, spec))
}

/// Reads a whole file. Multi-channel data is returned interleaved.
pub fn read_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<(WavSpec, Vec<T>)> {
    let (mut reader, spec) = open(path.as_ref())?;
    let samples = match spec.encoding {
        Encoding::Int16 => reader
            .samples::<i16>()
            .map(|s| s.map(|v| T::of(v as f64 / I16_SCALE)))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Encoding::Float32 => reader
            .samples::<f32>()
            .map(|s| s.map(|v| T::of(v as f64)))
            .collect::<std::result::Result<Vec<_>, _>>()?,
    };
    Ok((spec, samples))
}

fn to_i16<T: Scalar>(v: T) -> i16 {
    (v.as_f64() * I16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write_wav<T: Scalar>(path: impl AsRef<Path>, spec: WavSpec, samples: &[T]) -> Result<()> {
    let mut sink = WavSink::create(path, spec)?;
    SampleSink::<T>::write(&mut sink, samples)?;
    SampleSink::<T>::finish(&mut sink)
}

/// Streaming mono reader.
pub struct WavSource {
    reader: WavReader<BufReader<File>>,
    spec: WavSpec,
}

impl WavSource {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let (reader, spec) = open(path.as_ref())?;
        Ok(WavSource { reader, spec })
    }

    pub fn spec(&self) -> WavSpec {
        self.spec
    }

    /// Samples left to read, counting all channels.
    pub fn remaining(&self) -> u32 {
        self.reader.len()
    }
}

impl<T: Scalar> SampleSource<T> for WavSource {
    fn sample_rate(&self) -> u32 {
        self.spec.sample_rate
    }

    fn read(&mut self, buf: &mut [T]) -> Result<usize> {
        let mut n = 0;
        match self.spec.encoding {
            Encoding::Int16 => {
                for (slot, s) in buf.iter_mut().zip(self.reader.samples::<i16>()) {
                    *slot = T::of(s? as f64 / I16_SCALE);
                    n += 1;
                }
            }
            Encoding::Float32 => {
                for (slot, s) in buf.iter_mut().zip(self.reader.samples::<f32>()) {
                    *slot = T::of(s? as f64);
                    n += 1;
                }
            }
        }
        Ok(n)
    }
}

/// Streaming writer; call [`SampleSink::finish`] to patch the header.
pub struct WavSink {
    writer: Option<WavWriter<BufWriter<File>>>,
    spec: WavSpec,
}

impl WavSink {
    pub fn create(path: impl AsRef<Path>, spec: WavSpec) -> Result<Self> {
        let writer = WavWriter::create(path, spec.to_hound())?;
        Ok(WavSink { writer: Some(writer), spec })
    }
}

impl<T: Scalar> SampleSink<T> for WavSink {
    fn write(&mut self, samples: &[T]) -> Result<()> {
        let writer = self.writer.as_mut().ok_or_else(|| Error::state("wav sink already finished"))?;
        match self.spec.encoding {
            Encoding::Int16 => {
                for &s in samples {
                    writer.write_sample(to_i16(s))?;
                }
            }
            Encoding::Float32 => {
                for &s in samples {
                    writer.write_sample(s.as_f64() as f32)?;
                }
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(w) = self.writer.take() {
            w.finalize()?;
        }
        Ok(())
    }
}
