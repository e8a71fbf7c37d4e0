//! Empirical Mode Decomposition of one analysis window.
//!
//! Sifting builds upper and lower envelopes with natural cubic splines
//! through the local maxima and minima, subtracts their mean, and repeats
//! until the Cauchy-type criterion
//!
//! ```text
//! SD = sum((h_prev - h_new)^2) / sum(h_prev^2)
//! ```
//!
//! drops below `sd_threshold` or `max_sift_iterations` is hit. Extracted IMFs
//! are subtracted from the running residual, so the decomposition is complete
//! up to floating-point rounding.

mod boundary;
mod spline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use boundary::Side;
use spline::SplineWorkspace;

/// Shortest window `decompose` accepts.
pub const MIN_WINDOW: usize = 16;
/// Steps smaller than this many ulps of the window peak are treated as flat
/// when locating extrema during decomposition.
const RIPPLE_ULPS: f64 = 1024.0;

/// How envelopes are continued past the ends of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Reflect the two outermost extrema of each kind about the outermost
    /// extremum or the end sample.
    #[default]
    Mirror,
    /// Pin both envelopes to the end samples.
    Endpoint,
}

/// Sifting controls; the `emd` config section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftParams {
    pub max_imfs: usize,
    pub max_sift_iterations: usize,
    pub sd_threshold: f64,
    pub boundary: Boundary,
}

impl Default for SiftParams {
    fn default() -> Self {
        SiftParams { max_imfs: 8, max_sift_iterations: 10, sd_threshold: 0.2, boundary: Boundary::Mirror }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        let mut failures = Vec::new();
        if self.max_imfs < 1 {
            failures.push("emd.max_imfs must be >= 1".to_string());
        }
        if self.max_sift_iterations < 1 {
            failures.push("emd.max_sift_iterations must be >= 1".to_string());
        }
        if !(self.sd_threshold.is_finite() && self.sd_threshold > 0.0) {
            failures.push(format!("emd.sd_threshold must be finite and > 0, got {}", self.sd_threshold));
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failures))
        }
    }
}

/// One intrinsic mode function, same length as the analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct Imf<T>(Vec<T>);

impl<T: Scalar> Imf<T> {
    pub fn samples(&self) -> &[T] {
        &self.0
    }

    pub fn into_samples(self) -> Vec<T> {
        self.0
    }

    pub fn dominant_frequency(&self, sample_rate: T) -> Result<T> {
        dominant_frequency(&self.0, sample_rate)
    }

    pub fn amplitude(&self) -> T {
        imf_amplitude(&self.0)
    }
}

/// IMFs ordered highest-frequency first, plus the final residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet<T> {
    pub imfs: Vec<Imf<T>>,
    pub residual: Vec<T>,
}

impl<T: Scalar> ImfSet<T> {
    /// Elementwise sum of all IMFs and the residual.
    pub fn reconstruct(&self) -> Vec<T> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, &v) in out.iter_mut().zip(imf.samples()) {
                *o = *o + v;
            }
        }
        out
    }
}

/// Indices of interior local maxima and minima. A flat run counts once, at
/// its centre, and only if the signal turns around across it.
pub fn find_extrema<T: Scalar>(x: &[T], maxima: &mut Vec<usize>, minima: &mut Vec<usize>) {
    find_extrema_within(x, T::zero(), maxima, minima);
}

/// As [`find_extrema`], but neighbouring samples within `tol` of each other
/// count as flat, so rounding-level ripple is not mistaken for oscillation.
pub fn find_extrema_within<T: Scalar>(x: &[T], tol: T, maxima: &mut Vec<usize>, minima: &mut Vec<usize>) {
    maxima.clear();
    minima.clear();
    let n = x.len();
    if n < 3 {
        return;
    }
    let flat = |a: T, b: T| (a - b).abs() <= tol;
    let mut i = 1;
    while i < n - 1 {
        let prev = x[i - 1];
        if flat(x[i], prev) {
            i += 1;
            continue;
        }
        // Extend over a plateau starting at i.
        let mut j = i;
        while j + 1 < n - 1 && flat(x[j + 1], x[i]) {
            j += 1;
        }
        let next = x[j + 1];
        if flat(next, x[i]) {
            i = j + 1;
            continue;
        }
        if x[i] > prev && x[i] > next {
            maxima.push((i + j) / 2);
        } else if x[i] < prev && x[i] < next {
            minima.push((i + j) / 2);
        }
        i = j + 1;
    }
}

/// Number of sign changes, ignoring samples that are zero to within
/// `sqrt(eps)` of the peak magnitude.
pub fn count_sign_changes<T: Scalar>(x: &[T]) -> usize {
    let peak = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if peak == T::zero() {
        return 0;
    }
    let tol = peak * T::epsilon().sqrt();
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for &v in x {
        if v.abs() <= tol {
            continue;
        }
        let positive = v > T::zero();
        if let Some(prev) = last {
            if prev != positive {
                changes += 1;
            }
        }
        last = Some(positive);
    }
    changes
}

/// Frequency of an IMF from its zero-crossing count: `Z * fs / (2 N)` where
/// `Z` counts sign changes of the mean-removed IMF. Zero when there are none.
pub fn dominant_frequency<T: Scalar>(imf: &[T], sample_rate: T) -> Result<T> {
    let n = imf.len();
    if n < MIN_WINDOW {
        return Err(Error::domain(format!("IMF has {n} samples, need at least {MIN_WINDOW}")));
    }
    let mean = imf.iter().fold(T::zero(), |s, &v| s + v) / T::of_usize(n);
    let centred: Vec<T> = imf.iter().map(|&v| v - mean).collect();
    let z = count_sign_changes(&centred);
    Ok(T::of_usize(z) * sample_rate / (T::of(2.0) * T::of_usize(n)))
}

/// Peak-equivalent amplitude, `sqrt(2) * RMS`. Zero for an empty slice.
pub fn imf_amplitude<T: Scalar>(imf: &[T]) -> T {
    if imf.is_empty() {
        return T::zero();
    }
    let power = imf.iter().fold(T::zero(), |s, &v| s + v * v) / T::of_usize(imf.len());
    (T::of(2.0) * power).sqrt()
}

struct Sifter<T> {
    maxima: Vec<usize>,
    minima: Vec<usize>,
    knot_x: Vec<T>,
    knot_y: Vec<T>,
    upper: Vec<T>,
    lower: Vec<T>,
    spline: SplineWorkspace<T>,
    tol: T,
}

impl<T: Scalar> Sifter<T> {
    fn new(n: usize, tol: T) -> Self {
        Sifter {
            tol,
            maxima: Vec::new(),
            minima: Vec::new(),
            knot_x: Vec::new(),
            knot_y: Vec::new(),
            upper: vec![T::zero(); n],
            lower: vec![T::zero(); n],
            spline: SplineWorkspace::new(),
        }
    }

    /// Knots for one envelope: reflected or pinned ends around `idx`.
    fn fill_knots(&mut self, h: &[T], idx: &[usize], left: &[(i64, usize)], right: &[(i64, usize)]) {
        self.knot_x.clear();
        self.knot_y.clear();
        let knots = left.iter().copied().chain(idx.iter().map(|&i| (i as i64, i))).chain(right.iter().copied());
        for (p, i) in knots {
            debug_assert!(self.knot_x.last().is_none_or(|&x| x < T::of(p as f64)));
            self.knot_x.push(T::of(p as f64));
            self.knot_y.push(h[i]);
        }
    }

    /// Extrema and zero-crossing counts differ by at most one.
    fn is_imf(&mut self, h: &[T]) -> bool {
        find_extrema_within(h, self.tol, &mut self.maxima, &mut self.minima);
        let extrema = self.maxima.len() + self.minima.len();
        extrema.abs_diff(count_sign_changes(h)) <= 1
    }

    /// Replaces `h` by `h - (upper + lower) / 2`. Returns the SD of the step,
    /// or `None` if `h` no longer has both kinds of extrema.
    fn sift_once(&mut self, h: &mut [T], boundary: Boundary) -> Option<T> {
        find_extrema_within(h, self.tol, &mut self.maxima, &mut self.minima);
        if self.maxima.is_empty() || self.minima.is_empty() {
            return None;
        }
        let maxima = std::mem::take(&mut self.maxima);
        let minima = std::mem::take(&mut self.minima);
        let (left, right) = match boundary {
            Boundary::Mirror => (boundary::left(h, &maxima, &minima), boundary::right(h, &maxima, &minima)),
            Boundary::Endpoint => {
                let last = h.len() - 1;
                let start = vec![(0, 0)];
                let end = vec![(last as i64, last)];
                (Side { max: start.clone(), min: start }, Side { max: end.clone(), min: end })
            }
        };
        self.fill_knots(h, &maxima, &left.max, &right.max);
        self.spline.eval_on_grid(&self.knot_x, &self.knot_y, &mut self.upper);
        self.fill_knots(h, &minima, &left.min, &right.min);
        self.spline.eval_on_grid(&self.knot_x, &self.knot_y, &mut self.lower);
        self.maxima = maxima;
        self.minima = minima;

        let half = T::of(0.5);
        let mut num = T::zero();
        let mut den = T::zero();
        for ((v, &u), &l) in h.iter_mut().zip(&self.upper).zip(&self.lower) {
            let mean = (u + l) * half;
            num = num + mean * mean;
            den = den + *v * *v;
            *v = *v - mean;
        }
        Some(if den > T::zero() { num / den } else { T::zero() })
    }
}

/// Decomposes `window` into IMFs and a residual.
///
/// Extraction stops after `max_imfs` IMFs, or when the residual has fewer
/// than two interior extrema (or lacks either a maximum or a minimum).
/// Extrema are located ignoring rounding-level ripple. A
/// window with no oscillation yields no IMFs and is its own residual.
pub fn decompose<T: Scalar>(window: &[T], params: &SiftParams) -> Result<ImfSet<T>> {
    params.validate()?;
    let n = window.len();
    if n < MIN_WINDOW {
        return Err(Error::domain(format!("window has {n} samples, need at least {MIN_WINDOW}")));
    }
    if let Some(i) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("window sample {i} is not finite")));
    }

    let threshold = T::of(params.sd_threshold);
    let peak = window.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut sifter = Sifter::new(n, peak * T::epsilon() * T::of(RIPPLE_ULPS));
    let mut residual = window.to_vec();
    let mut imfs = Vec::new();

    while imfs.len() < params.max_imfs {
        find_extrema_within(&residual, sifter.tol, &mut sifter.maxima, &mut sifter.minima);
        let (n_max, n_min) = (sifter.maxima.len(), sifter.minima.len());
        if n_max + n_min < 2 || n_max == 0 || n_min == 0 {
            break;
        }

        let mut h = residual.clone();
        for _ in 0..params.max_sift_iterations {
            match sifter.sift_once(&mut h, params.boundary) {
                Some(sd) if sd < threshold && sifter.is_imf(&h) => break,
                Some(_) => {}
                None => break,
            }
        }

        for (r, &v) in residual.iter_mut().zip(&h) {
            *r = *r - v;
        }
        imfs.push(Imf(h));
    }

    Ok(ImfSet { imfs, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, phase: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|k| amp * (2.0 * PI * freq * k as f64 / fs + phase).sin()).collect()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn extrema_handle_plateaus() {
        let (mut mx, mut mn) = (Vec::new(), Vec::new());
        find_extrema(&[0.0, 1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 0.0], &mut mx, &mut mn);
        assert_eq!(mx, vec![2]);
        assert_eq!(mn, vec![5]);
        // A shelf on a rising slope is not an extremum.
        find_extrema(&[0.0, 1.0, 1.0, 2.0, 3.0], &mut mx, &mut mn);
        assert!(mx.is_empty() && mn.is_empty());
    }

    #[test]
    fn constant_window_has_no_imfs() {
        let w = vec![0.25f64; 64];
        let set = decompose(&w, &SiftParams::default()).unwrap();
        assert!(set.imfs.is_empty());
        assert_eq!(set.residual, w);
    }

    #[test]
    fn monotonic_window_has_no_imfs() {
        let w: Vec<f64> = (0..64).map(|k| (k as f64).sqrt()).collect();
        let set = decompose(&w, &SiftParams::default()).unwrap();
        assert!(set.imfs.is_empty());
    }

    #[test]
    fn rejects_short_and_non_finite_windows() {
        let p = SiftParams::default();
        assert!(matches!(decompose(&[0.0f64; 15], &p), Err(Error::Domain(_))));
        let mut w = vec![0.0f64; 32];
        w[7] = f64::NAN;
        assert!(matches!(decompose(&w, &p), Err(Error::Domain(_))));
        w[7] = f64::INFINITY;
        assert!(matches!(decompose(&w, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_params() {
        let w = sine(1000.0, 1.0, 0.3, 64, 48000.0);
        for p in [
            SiftParams { max_imfs: 0, ..Default::default() },
            SiftParams { max_sift_iterations: 0, ..Default::default() },
            SiftParams { sd_threshold: 0.0, ..Default::default() },
        ] {
            assert!(matches!(decompose(&w, &p), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn pure_sine_lands_in_first_imf() {
        // 1 kHz over 25 ms at 48 kHz.
        let x = sine(1000.0, 0.5, 0.0, 1200, 48000.0);
        let set = decompose(&x, &SiftParams::default()).unwrap();
        assert!(!set.imfs.is_empty());
        let c = correlation(set.imfs[0].samples(), &x);
        assert!(c > 0.99, "correlation {c}");
        let e_in: f64 = x.iter().map(|v| v * v).sum();
        let e_res: f64 = set.residual.iter().map(|v| v * v).sum();
        assert!(e_res < 0.01 * e_in, "residual energy ratio {}", e_res / e_in);
    }

    #[test]
    fn endpoint_boundary_also_decomposes() {
        let x = sine(1000.0, 0.5, 0.3, 1200, 48000.0);
        let p = SiftParams { boundary: Boundary::Endpoint, ..Default::default() };
        let set = decompose(&x, &p).unwrap();
        assert!(correlation(set.imfs[0].samples(), &x) > 0.95);
    }

    #[test]
    fn max_imfs_caps_extraction() {
        let x: Vec<f64> = (0..1200).map(|k| ((k * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let p = SiftParams { max_imfs: 2, ..Default::default() };
        assert_eq!(decompose(&x, &p).unwrap().imfs.len(), 2);
    }

    #[test]
    fn dominant_frequency_counts_crossings() {
        // Sign-change oracle on the synthesized tones: a phase offset keeps
        // every zero crossing strictly between samples.
        let fs = 48000.0;
        for (f, z) in [(1000.0, 50usize), (200.0, 10)] {
            let x = sine(f, 0.3, 0.3, 1200, fs);
            let oracle = x.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
            assert_eq!(oracle, z);
            let est = dominant_frequency(&x, fs).unwrap();
            assert_eq!(est, z as f64 * fs / 2400.0);
            assert_eq!(est, f);
        }
        assert_eq!(dominant_frequency(&[0.0f64; 32], fs).unwrap(), 0.0);
        assert_eq!(dominant_frequency(&[0.7f64; 32], fs).unwrap(), 0.0);
        assert!(dominant_frequency(&[0.0f64; 8], fs).is_err());
    }

    #[test]
    fn amplitude_estimates() {
        let x = sine(1000.0, 0.4, 0.1, 1200, 48000.0);
        assert!((imf_amplitude(&x) - 0.4).abs() < 0.004);
        assert_eq!(imf_amplitude(&[0.0f64; 16]), 0.0);
        let square: Vec<f64> = (0..1200).map(|k| if (k / 24) % 2 == 0 { 0.3 } else { -0.3 }).collect();
        assert!((imf_amplitude(&square) - 0.3 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn decomposition_is_deterministic() {
        let x: Vec<f64> = (0..1200).map(|k| ((k as f64) * 0.37).sin() + 0.3 * ((k as f64) * 0.05).cos()).collect();
        let a = decompose(&x, &SiftParams::default()).unwrap();
        let b = decompose(&x, &SiftParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = sine(1000.0, 0.5, 0.3, 1200, 48000.0).into_iter().map(|v| v as f32).collect();
        let set = decompose(&x, &SiftParams::default()).unwrap();
        let back = set.reconstruct();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
