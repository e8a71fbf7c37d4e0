//! Per-band perceived-intensity spectrum of one analysis window.
//!
//! Each IMF contributes one `(frequency, amplitude)` pair; its perceived
//! intensity is added to the band its frequency falls into. Bands are
//! left-closed and right-open, so a frequency on an edge belongs to the band
//! above it. Content below `f_lo` or at/above `f_hi` is dropped.

use serde::{Deserialize, Serialize};

use crate::emd::{self, SiftParams};
use crate::error::{Error, Result};
use crate::perception::{Intensity, PerceptionModel};
use crate::scalar::Scalar;

/// Uniform partition of `[f_lo, f_hi)` into bands of `width` Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandScheme {
    pub f_lo: f64,
    pub f_hi: f64,
    pub width: f64,
}

impl Default for BandScheme {
    /// 100 Hz to 20 kHz in 20 Hz bands: 995 bands.
    fn default() -> Self {
        BandScheme { f_lo: 100.0, f_hi: 20_000.0, width: 20.0 }
    }
}

impl BandScheme {
    pub fn new(f_lo: f64, f_hi: f64, width: f64) -> Result<Self> {
        let scheme = BandScheme { f_lo, f_hi, width };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        let mut failures = Vec::new();
        if !(self.f_lo.is_finite() && self.f_lo >= 0.0) {
            failures.push(format!("bands.f_lo must be finite and >= 0, got {}", self.f_lo));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            failures.push(format!("bands.width must be finite and > 0, got {}", self.width));
        }
        if !(self.f_hi.is_finite() && self.f_hi > self.f_lo) {
            failures.push(format!("bands.f_hi must be finite and > f_lo, got {}", self.f_hi));
        }
        if failures.is_empty() {
            let count = (self.f_hi - self.f_lo) / self.width;
            if count.fract() != 0.0 {
                failures.push(format!(
                    "bands: (f_hi - f_lo) / width = {count} is not a whole number of bands"
                ));
            }
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failures))
        }
    }

    pub fn count(&self) -> usize {
        ((self.f_hi - self.f_lo) / self.width) as usize
    }

    /// Band containing `f`, or `None` outside `[f_lo, f_hi)`.
    pub fn band_index(&self, f: f64) -> Option<usize> {
        if !(f >= self.f_lo && f < self.f_hi) {
            return None;
        }
        let i = ((f - self.f_lo) / self.width).floor() as usize;
        // Guards the last band against rounding in the division.
        Some(i.min(self.count() - 1))
    }

    /// Lower edge of band `i` in Hz.
    pub fn band_lo(&self, i: usize) -> f64 {
        self.f_lo + i as f64 * self.width
    }
}

/// Perceived intensity per band for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySpectrum<T> {
    values: Vec<T>,
    pub frame_index: u64,
}

impl<T: Scalar> IntensitySpectrum<T> {
    pub fn zeros(count: usize, frame_index: u64) -> Self {
        IntensitySpectrum { values: vec![T::zero(); count], frame_index }
    }

    /// Builds a spectrum from raw band values, which must be finite and >= 0.
    pub fn from_values(values: Vec<T>, frame_index: u64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::domain(format!("band {i} intensity {} is negative or not finite", values[i])));
        }
        Ok(IntensitySpectrum { values, frame_index })
    }

    pub(crate) fn from_values_unchecked(values: Vec<T>, frame_index: u64) -> Self {
        IntensitySpectrum { values, frame_index }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of all band intensities.
    pub fn total(&self) -> Intensity<T> {
        total_intensity(self)
    }
}

pub fn total_intensity<T: Scalar>(s: &IntensitySpectrum<T>) -> Intensity<T> {
    Intensity::new(s.values.iter().fold(T::zero(), |acc, &v| acc + v)).unwrap_or_else(|_| Intensity::zero())
}

/// What one IMF contributes to a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImfComponent<T> {
    pub frequency: T,
    pub amplitude: T,
    /// `None` when the frequency falls outside the band scheme.
    pub band: Option<usize>,
}

/// Decomposes `window` and attributes each IMF to a band.
pub fn frame_components<T: Scalar>(
    window: &[T],
    sample_rate: T,
    scheme: &BandScheme,
    params: &SiftParams,
) -> Result<Vec<ImfComponent<T>>> {
    let set = emd::decompose(window, params)?;
    set.imfs
        .iter()
        .map(|imf| {
            let frequency = imf.dominant_frequency(sample_rate)?;
            Ok(ImfComponent { frequency, amplitude: imf.amplitude(), band: scheme.band_index(frequency.as_f64()) })
        })
        .collect()
}

/// Accumulates component intensities into a spectrum.
pub fn spectrum_from_components<T: Scalar>(
    components: &[ImfComponent<T>],
    model: &PerceptionModel<T>,
    scheme: &BandScheme,
    frame_index: u64,
) -> Result<IntensitySpectrum<T>> {
    let mut values = vec![T::zero(); scheme.count()];
    for c in components {
        if let Some(b) = c.band {
            let i = model.perceived_intensity(c.amplitude, c.frequency)?;
            values[b] = values[b] + i.value();
        }
    }
    Ok(IntensitySpectrum::from_values_unchecked(values, frame_index))
}

/// Perceived-intensity spectrum of one analysis window.
pub fn frame_spectrum<T: Scalar>(
    window: &[T],
    sample_rate: T,
    model: &PerceptionModel<T>,
    scheme: &BandScheme,
    params: &SiftParams,
) -> Result<IntensitySpectrum<T>> {
    let components = frame_components(window, sample_rate, scheme, params)?;
    spectrum_from_components(&components, model, scheme, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, a: f64, phase: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a * (2.0 * PI * f * k as f64 / 48000.0 + phase).sin()).collect()
    }

    #[test]
    fn default_scheme_has_995_bands() {
        let s = BandScheme::default();
        s.validate().unwrap();
        assert_eq!(s.count(), 995);
        assert_eq!(s.band_lo(994), 19980.0);
    }

    #[test]
    fn scheme_validation() {
        assert!(BandScheme::new(100.0, 20000.0, 30.0).is_err());
        assert!(BandScheme::new(100.0, 100.0, 20.0).is_err());
        assert!(BandScheme::new(-1.0, 100.0, 20.0).is_err());
        assert!(BandScheme::new(0.0, 100.0, 0.0).is_err());
        assert_eq!(BandScheme::new(0.0, 100.0, 25.0).unwrap().count(), 4);
    }

    #[test]
    fn band_index_edges() {
        let s = BandScheme::default();
        assert_eq!(s.band_index(100.0), Some(0));
        assert_eq!(s.band_index(200.0), Some(5));
        assert_eq!(s.band_index(219.999), Some(5));
        assert_eq!(s.band_index(220.0), Some(6));
        assert_eq!(s.band_index(19999.999), Some(994));
        assert_eq!(s.band_index(20000.0), None);
        assert_eq!(s.band_index(99.999), None);
        assert_eq!(s.band_index(0.0), None);
        assert_eq!(s.band_index(f64::NAN), None);
    }

    #[test]
    fn silence_gives_zero_spectrum() {
        let model = PerceptionModel::<f64>::default();
        let s = frame_spectrum(&vec![0.0; 1200], 48000.0, &model, &BandScheme::default(), &SiftParams::default())
            .unwrap();
        assert_eq!(s.len(), 995);
        assert!(s.values().iter().all(|&v| v == 0.0));
        assert_eq!(s.total().value(), 0.0);
    }

    #[test]
    fn threshold_tone_has_unit_intensity_in_its_band() {
        let model = PerceptionModel::<f64>::default();
        let at = model.threshold_at(200.0).unwrap();
        let x = tone(200.0, at, 0.3, 1200);
        let s = frame_spectrum(&x, 48000.0, &model, &BandScheme::default(), &SiftParams::default()).unwrap();
        assert!((s.values()[5] - 1.0).abs() < 0.02, "band 5 = {}", s.values()[5]);
        for (i, &v) in s.values().iter().enumerate() {
            if i != 5 {
                assert!(v < 0.01, "band {i} = {v}");
            }
        }
    }

    #[test]
    fn totals() {
        let mut v = vec![0.0f64; 995];
        assert_eq!(total_intensity(&IntensitySpectrum::from_values(v.clone(), 0).unwrap()).value(), 0.0);
        v[17] = 3.5;
        assert_eq!(total_intensity(&IntensitySpectrum::from_values(v.clone(), 0).unwrap()).value(), 3.5);
        v[17] = 1.0;
        v[3] = 2.0;
        v[900] = 0.5;
        assert_eq!(total_intensity(&IntensitySpectrum::from_values(v, 0).unwrap()).value(), 3.5);
    }

    #[test]
    fn from_values_rejects_negative() {
        assert!(IntensitySpectrum::from_values(vec![1.0, -0.1], 0).is_err());
        assert!(IntensitySpectrum::from_values(vec![1.0, f64::NAN], 0).is_err());
    }

    #[test]
    fn components_share_bands_additively() {
        let model = PerceptionModel::<f64>::default();
        let scheme = BandScheme::default();
        let c = ImfComponent { frequency: 300.0, amplitude: model.threshold_at(300.0).unwrap(), band: Some(10) };
        let s = spectrum_from_components(&[c, c], &model, &scheme, 7).unwrap();
        assert!((s.values()[10] - 2.0).abs() < 1e-12);
        assert_eq!(s.frame_index, 7);
        let skipped = ImfComponent { frequency: 60.0, amplitude: 1.0, band: None };
        let s = spectrum_from_components(&[skipped], &model, &scheme, 0).unwrap();
        assert_eq!(s.total().value(), 0.0);
    }
}
