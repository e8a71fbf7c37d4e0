//! File formats and synthetic stimuli.

pub mod generate;
pub mod report;
pub mod wav;

pub use generate::{generate, Component, ScenarioSpec};
pub use report::{read_frame_csv, write_frame_csv, FrameRow, SpectrumCsv};
pub use wav::{read_wav, write_wav, Encoding, WavSink, WavSource, WavSpec};
