//! Amplitude-domain spectral subtraction, kept only as a comparison point for
//! reports. Band amplitudes (power sum of the IMFs in each band) have the
//! filter's noise-equivalent amplitude subtracted, and the remainder is
//! converted to perceived intensity.

use crate::error::Result;
use crate::noise_filter::NoiseFilter;
use crate::perception::{PerceptionModel, MAX_HZ, MIN_HZ};
use crate::scalar::Scalar;
use crate::spectrum::{ImfComponent, IntensitySpectrum};

pub fn amplitude_subtraction_residual<T: Scalar>(
    components: &[ImfComponent<T>],
    filter: &NoiseFilter<T>,
    model: &PerceptionModel<T>,
    frame_index: u64,
) -> Result<IntensitySpectrum<T>> {
    let scheme = filter.scheme();
    let mut power = vec![T::zero(); scheme.count()];
    for c in components {
        if let Some(b) = c.band {
            power[b] = power[b] + c.amplitude * c.amplitude;
        }
    }
    let mut values = vec![T::zero(); scheme.count()];
    for (b, p) in power.iter().enumerate() {
        if *p == T::zero() {
            continue;
        }
        let f = T::of(scheme.band_lo(b).clamp(MIN_HZ, MAX_HZ));
        let noise_amp = model.amplitude_for_intensity(filter.values()[b], f)?;
        let left = (p.sqrt() - noise_amp).max(T::zero());
        values[b] = model.perceived_intensity(left, f)?.value();
    }
    IntensitySpectrum::from_values(values, frame_index)
}
