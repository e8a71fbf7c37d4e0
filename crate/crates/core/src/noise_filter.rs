//! Adaptive per-band ego-noise filter in the perceived-intensity domain.
//!
//! While calibrating, each band value `F` moves toward a larger input
//! intensity `I` by
//!
//! ```text
//! F' = F + (I - F) * (F / I)^2        (only when I > F)
//! ```
//!
//! The `(F / I)^2` factor damps the step for inputs far above the current
//! estimate, so isolated loud frames barely move the filter. For `0 < F < I`
//! the update never overshoots: `F < F' <= I`. `F = 0` is a fixed point, which
//! is why values start at a positive floor (or are seeded, see
//! [`FilterInit::SeedFirst`]).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectrum::{BandScheme, IntensitySpectrum};

pub const DEFAULT_FLOOR: f64 = 1e-6;
/// Number of per-update deltas kept for convergence checks.
pub const DEFAULT_HISTORY: usize = 1024;

const DOCUMENT_FORMAT: &str = "tactile-ism-filter";
const DOCUMENT_VERSION: u32 = 1;

/// How band values leave their initial floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterInit {
    /// Start at the floor and grow only through the damped update.
    #[default]
    Floor,
    /// A band still at the floor takes the first intensity it observes above
    /// the floor; later observations use the damped update. Seeding steps are
    /// not counted as convergence deltas.
    SeedFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFilter<T> {
    scheme: BandScheme,
    values: Vec<T>,
    update_count: u64,
    floor: T,
    init: FilterInit,
    recent_deltas: VecDeque<T>,
    history: usize,
    frozen: bool,
}

impl<T: Scalar> NoiseFilter<T> {
    /// Every band starts at `floor`.
    pub fn new(scheme: BandScheme, floor: T) -> Result<Self> {
        scheme.validate()?;
        if !(floor.is_finite() && floor >= T::zero()) {
            return Err(Error::domain(format!("filter floor must be finite and >= 0, got {floor}")));
        }
        Ok(NoiseFilter {
            values: vec![floor; scheme.count()],
            scheme,
            update_count: 0,
            floor,
            init: FilterInit::Floor,
            recent_deltas: VecDeque::with_capacity(DEFAULT_HISTORY),
            history: DEFAULT_HISTORY,
            frozen: false,
        })
    }

    pub fn with_init(mut self, init: FilterInit) -> Self {
        self.init = init;
        self
    }

    /// Keeps the last `n` update deltas (at least 1).
    pub fn with_history(mut self, n: usize) -> Self {
        self.history = n.max(1);
        while self.recent_deltas.len() > self.history {
            self.recent_deltas.pop_front();
        }
        self
    }

    pub fn scheme(&self) -> &BandScheme {
        &self.scheme
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn init_mode(&self) -> FilterInit {
        self.init
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn recent_deltas(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        self.recent_deltas.iter().copied()
    }

    pub fn last_delta(&self) -> Option<T> {
        self.recent_deltas.back().copied()
    }

    fn check_len(&self, s: &IntensitySpectrum<T>) -> Result<()> {
        if s.len() == self.values.len() {
            Ok(())
        } else {
            Err(Error::domain(format!("spectrum has {} bands, filter has {}", s.len(), self.values.len())))
        }
    }

    /// Gated damped update with one frame's spectrum. Returns the largest
    /// relative change `|dF| / max(F, floor)` over all bands.
    pub fn update(&mut self, s: &IntensitySpectrum<T>) -> Result<T> {
        if self.frozen {
            return Err(Error::state("filter is frozen"));
        }
        self.check_len(s)?;
        let mut max_delta = T::zero();
        for (f, &i) in self.values.iter_mut().zip(s.values()) {
            let current = *f;
            if !(i > current) {
                continue;
            }
            if self.init == FilterInit::SeedFirst && current <= self.floor {
                *f = i;
                continue;
            }
            let r = current / i;
            let next = current + (i - current) * r * r;
            let denom = current.max(self.floor);
            if denom > T::zero() {
                max_delta = max_delta.max((next - current).abs() / denom);
            }
            *f = next;
        }
        self.update_count += 1;
        if self.recent_deltas.len() == self.history {
            self.recent_deltas.pop_front();
        }
        self.recent_deltas.push_back(max_delta);
        Ok(max_delta)
    }

    /// Band-wise `max(I - F, 0)`.
    pub fn subtract(&self, s: &IntensitySpectrum<T>) -> Result<IntensitySpectrum<T>> {
        self.check_len(s)?;
        let values = s.values().iter().zip(&self.values).map(|(&i, &f)| (i - f).max(T::zero())).collect();
        Ok(IntensitySpectrum::from_values_unchecked(values, s.frame_index))
    }

    /// True once at least `window` updates happened and each of the last
    /// `window` deltas is below `epsilon`. A window longer than the retained
    /// history never converges.
    pub fn is_converged(&self, window: usize, epsilon: T) -> bool {
        if window == 0 || (self.update_count as usize) < window || self.recent_deltas.len() < window {
            return false;
        }
        self.recent_deltas.iter().rev().take(window).all(|&d| d < epsilon)
    }

    /// Ends calibration. A frozen filter rejects further updates.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn save(&self) -> FilterDocument {
        FilterDocument {
            format: DOCUMENT_FORMAT.to_string(),
            version: DOCUMENT_VERSION,
            scheme: self.scheme,
            floor: self.floor.as_f64(),
            init: self.init,
            update_count: self.update_count,
            frozen: self.frozen,
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn load(doc: &FilterDocument) -> Result<Self> {
        let mut failures = Vec::new();
        if doc.format != DOCUMENT_FORMAT {
            failures.push(format!("format is {:?}, expected {DOCUMENT_FORMAT:?}", doc.format));
        }
        if doc.version != DOCUMENT_VERSION {
            failures.push(format!("unsupported version {}", doc.version));
        }
        if let Err(Error::Validation(f)) = doc.scheme.validate() {
            failures.extend(f);
        } else if doc.values.len() != doc.scheme.count() {
            failures.push(format!(
                "values has {} bands, scheme {}..{} Hz / {} Hz needs {}",
                doc.values.len(),
                doc.scheme.f_lo,
                doc.scheme.f_hi,
                doc.scheme.width,
                doc.scheme.count()
            ));
        }
        if !(doc.floor.is_finite() && doc.floor >= 0.0) {
            failures.push(format!("floor must be finite and >= 0, got {}", doc.floor));
        }
        for (i, &v) in doc.values.iter().enumerate() {
            if !(v.is_finite() && v >= doc.floor) {
                failures.push(format!("band {i}: value {v} is not finite or below the floor"));
            }
        }
        if !failures.is_empty() {
            return Err(Error::Validation(failures));
        }
        Ok(NoiseFilter {
            scheme: doc.scheme,
            values: doc.values.iter().map(|&v| T::of(v)).collect(),
            update_count: doc.update_count,
            floor: T::of(doc.floor),
            init: doc.init,
            recent_deltas: VecDeque::with_capacity(DEFAULT_HISTORY),
            history: DEFAULT_HISTORY,
            frozen: doc.frozen,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.save())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FilterDocument = serde_json::from_str(text)?;
        Self::load(&doc)
    }
}

/// Persisted filter state. Values are written with shortest round-trip
/// decimal formatting, so save/load is bit-exact for `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDocument {
    pub format: String,
    pub version: u32,
    pub scheme: BandScheme,
    pub floor: f64,
    #[serde(default)]
    pub init: FilterInit,
    pub update_count: u64,
    #[serde(default)]
    pub frozen: bool,
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(values: &[(usize, f64)]) -> IntensitySpectrum<f64> {
        let mut v = vec![0.0; 995];
        for &(i, x) in values {
            v[i] = x;
        }
        IntensitySpectrum::from_values(v, 0).unwrap()
    }

    fn filter_with(values: &[(usize, f64)]) -> NoiseFilter<f64> {
        let mut f = NoiseFilter::new(BandScheme::default(), 0.0).unwrap();
        for &(i, x) in values {
            f.values[i] = x;
        }
        f
    }

    #[test]
    fn init_fills_floor() {
        let f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap();
        assert_eq!(f.values().len(), 995);
        assert!(f.values().iter().all(|&v| v == 1e-6));
        assert_eq!(f.update_count(), 0);
        assert!(!f.is_frozen());
        let z = NoiseFilter::<f64>::new(BandScheme::default(), 0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(matches!(NoiseFilter::<f64>::new(BandScheme::default(), -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn update_substitutions() {
        let mut f = filter_with(&[(0, 1.0), (1, 1.0), (2, 1.0)]);
        f.update(&spec_with(&[(0, 2.0), (1, 0.5), (2, 4.0)])).unwrap();
        assert_eq!(f.values()[0], 1.25);
        assert_eq!(f.values()[1], 1.0);
        assert_eq!(f.values()[2], 1.1875);
        assert_eq!(f.update_count(), 1);
        assert_eq!(f.last_delta(), Some(0.25));
    }

    #[test]
    fn zero_floor_never_grows() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 0.0).unwrap();
        for _ in 0..10 {
            f.update(&spec_with(&[(4, 3.0)])).unwrap();
        }
        assert_eq!(f.values()[4], 0.0);
        assert_eq!(f.last_delta(), Some(0.0));
    }

    #[test]
    fn seed_first_takes_first_observation() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 0.0).unwrap().with_init(FilterInit::SeedFirst);
        f.update(&spec_with(&[(4, 3.0)])).unwrap();
        assert_eq!(f.values()[4], 3.0);
        assert_eq!(f.last_delta(), Some(0.0));
        f.update(&spec_with(&[(4, 6.0), (9, 0.5)])).unwrap();
        assert_eq!(f.values()[4], 3.0 + 3.0 * 0.25);
        assert_eq!(f.values()[9], 0.5);
        assert_eq!(f.last_delta(), Some(0.25));
    }

    #[test]
    fn subtract_clamps() {
        let f = filter_with(&[(0, 1.0), (1, 2.0)]);
        let out = f.subtract(&spec_with(&[(0, 3.0), (1, 1.0)])).unwrap();
        assert_eq!(&out.values()[..2], &[2.0, 0.0]);

        let zero = NoiseFilter::<f64>::new(BandScheme::default(), 0.0).unwrap();
        let s = spec_with(&[(3, 0.7), (500, 2.0)]);
        assert_eq!(zero.subtract(&s).unwrap(), s);

        let same = filter_with(&[(3, 0.7), (500, 2.0)]);
        assert!(same.subtract(&s).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_domain_error() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap();
        let short = IntensitySpectrum::from_values(vec![1.0; 994], 0).unwrap();
        assert!(matches!(f.update(&short), Err(Error::Domain(_))));
        assert!(matches!(f.subtract(&short), Err(Error::Domain(_))));
    }

    #[test]
    fn frozen_filter_rejects_updates() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap();
        f.freeze();
        let before = f.clone();
        assert!(matches!(f.update(&spec_with(&[(0, 1.0)])), Err(Error::State(_))));
        assert_eq!(f, before);
        assert!(f.subtract(&spec_with(&[(0, 1.0)])).is_ok());
    }

    #[test]
    fn convergence_needs_full_window() {
        let mut f = filter_with(&[(0, 0.5)]);
        let s = spec_with(&[(0, 1.0)]);
        for _ in 0..5 {
            f.update(&s).unwrap();
        }
        assert!(!f.is_converged(40, 0.01));
        assert!(!f.is_converged(0, 0.01));
    }

    #[test]
    fn constant_input_converges() {
        let mut f = filter_with(&[(0, 0.5), (7, 2.0)]);
        let s = spec_with(&[(0, 1.0), (7, 4.0)]);
        let mut n = 0;
        while !f.is_converged(40, 0.01) {
            f.update(&s).unwrap();
            n += 1;
            assert!(n < 200);
        }
        assert!((f.values()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn alternating_frames_do_not_converge() {
        // Loud frames at 1.5x the current value keep the delta above 0.2;
        // quiet frames leave the value alone.
        let mut f = filter_with(&[(0, 1.0)]);
        for k in 0..200 {
            let level = if k % 2 == 0 { 1.5 * f.values()[0] } else { 0.1 };
            f.update(&spec_with(&[(0, level)])).unwrap();
        }
        assert!(!f.is_converged(40, 0.01));
    }

    #[test]
    fn history_is_bounded() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap().with_history(8);
        for _ in 0..20 {
            f.update(&spec_with(&[])).unwrap();
        }
        assert_eq!(f.recent_deltas().len(), 8);
        assert!(f.is_converged(8, 0.01));
        assert!(!f.is_converged(9, 0.01));
    }

    #[test]
    fn save_load_is_bit_exact() {
        let mut f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap().with_init(FilterInit::SeedFirst);
        let mut v = vec![0.0; 995];
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64 * 0.731).sin().abs() / 3.0 + 1e-7;
        }
        f.update(&IntensitySpectrum::from_values(v.clone(), 0).unwrap()).unwrap();
        let w: Vec<f64> = v.iter().map(|x| x * 1.37).collect();
        f.update(&IntensitySpectrum::from_values(w, 1).unwrap()).unwrap();
        f.freeze();
        let back = NoiseFilter::<f64>::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.values().len(), 995);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.floor(), f.floor());
        assert_eq!(back.update_count(), 2);
        assert!(back.is_frozen());
        assert_eq!(back.init_mode(), FilterInit::SeedFirst);
    }

    #[test]
    fn load_rejects_wrong_band_count() {
        let f = NoiseFilter::<f64>::new(BandScheme::default(), 1e-6).unwrap();
        let mut doc = f.save();
        doc.values.pop();
        let Err(Error::Validation(msgs)) = NoiseFilter::<f64>::load(&doc) else {
            panic!("expected validation error")
        };
        assert!(msgs[0].contains("994"));
    }

    #[test]
    fn load_rejects_malformed_json() {
        assert!(matches!(NoiseFilter::<f64>::from_json("{\"format\": 3}"), Err(Error::Parse(_))));
        assert!(NoiseFilter::<f64>::from_json("not json").is_err());
    }
}
