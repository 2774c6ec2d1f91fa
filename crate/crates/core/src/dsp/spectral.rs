use serde::{Deserialize, Serialize};

use super::{DspError, PowerSpectrum};
use crate::scalar::Scalar;

/// Lower clamp for log arguments.
pub const LOG_FLOOR: f64 = 1e-12;
/// Returned by the conventional bandwidth when the spectrum has no spread.
pub const BANDWIDTH_FLOOR: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthVariant {
    /// Deviation taken from the log centroid itself: `f - F_centroid`.
    #[default]
    Literal,
    /// Deviation from the linear centroid `exp(F_centroid)`.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub centroid_log: f64,
    pub bandwidth_log: f64,
}

impl SpectralFeatures {
    pub fn of<T: Scalar>(ps: &PowerSpectrum<T>, variant: BandwidthVariant) -> Result<Self, DspError> {
        let c = spectral_centroid(ps)?;
        let b = spectral_bandwidth(ps, c, variant)?;
        Ok(SpectralFeatures { centroid_log: c, bandwidth_log: b })
    }
}

fn ln_clamped(v: f64) -> f64 {
    v.max(LOG_FLOOR).ln()
}

fn total(ps: &PowerSpectrum<impl Scalar>) -> Result<f64, DspError> {
    let t: f64 = ps.psd.iter().map(|p| p.as_f64()).sum();
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(DspError::ZeroPower)
    }
}

/// `ln(sum f * PSD(f)) - ln(sum PSD(f))`.
pub fn spectral_centroid<T: Scalar>(ps: &PowerSpectrum<T>) -> Result<f64, DspError> {
    let power = total(ps)?;
    let weighted: f64 = ps.freqs.iter().zip(&ps.psd).map(|(f, p)| f.as_f64() * p.as_f64()).sum();
    Ok(ln_clamped(weighted) - ln_clamped(power))
}

/// `0.5 ln(sum PSD(f) (f - c)^2) - 0.5 ln(sum PSD(f))` with `c` chosen by
/// `variant`.
pub fn spectral_bandwidth<T: Scalar>(ps: &PowerSpectrum<T>, centroid_log: f64, variant: BandwidthVariant) -> Result<f64, DspError> {
    let power = total(ps)?;
    let centre = match variant {
        BandwidthVariant::Literal => centroid_log,
        BandwidthVariant::Conventional => centroid_log.exp(),
    };
    let spread: f64 = ps
        .freqs
        .iter()
        .zip(&ps.psd)
        .map(|(f, p)| {
            let d = f.as_f64() - centre;
            p.as_f64() * d * d
        })
        .sum();
    if variant == BandwidthVariant::Conventional {
        // exp(ln f0) is not exactly f0, so "no spread" is relative
        let variance = spread / power;
        if variance <= 1e-12 * centre.max(1.0).powi(2) {
            return Ok(BANDWIDTH_FLOOR);
        }
    }
    Ok(0.5 * ln_clamped(spread) - 0.5 * ln_clamped(power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn delta(f0_bin: usize, n: usize, df: f64) -> PowerSpectrum<f64> {
        let freqs = (0..n).map(|k| k as f64 * df).collect();
        let mut psd = vec![0.0; n];
        psd[f0_bin] = 3.0;
        PowerSpectrum { freqs, psd }
    }

    #[test]
    fn delta_centroid() {
        let ps = delta(10, 64, 10.0);
        assert!((spectral_centroid(&ps).unwrap() - 100f64.ln()).abs() < 1e-9);
        assert!((100f64.ln() - 4.6052).abs() < 1e-4);
    }

    #[test]
    fn uniform_centroid() {
        let ps = PowerSpectrum { freqs: (1..=9).map(f64::from).collect(), psd: vec![1.0; 9] };
        assert!((spectral_centroid(&ps).unwrap() - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn delta_bandwidths() {
        let ps = delta(10, 64, 10.0);
        let c = spectral_centroid(&ps).unwrap();
        let lit = spectral_bandwidth(&ps, c, BandwidthVariant::Literal).unwrap();
        assert!((lit - (100.0 - 100f64.ln()).ln()).abs() < 1e-9);
        assert!((lit - 4.5581).abs() < 1e-4);
        let conv = spectral_bandwidth(&ps, c, BandwidthVariant::Conventional).unwrap();
        assert_eq!(conv, BANDWIDTH_FLOOR);
    }

    #[test]
    fn two_bin_conventional() {
        let ps = PowerSpectrum { freqs: vec![50.0, 150.0], psd: vec![1.0, 1.0] };
        let c = spectral_centroid(&ps).unwrap();
        assert!((c.exp() - 100.0).abs() < 1e-9);
        let b = spectral_bandwidth(&ps, c, BandwidthVariant::Conventional).unwrap();
        assert!((b - 0.5 * 2500f64.ln()).abs() < 1e-9);
        assert!((b - 3.912).abs() < 1e-3);
    }

    #[test]
    fn zero_power() {
        let ps = PowerSpectrum { freqs: vec![0.0, 1.0], psd: vec![0.0, 0.0] };
        assert_eq!(spectral_centroid(&ps), Err(DspError::ZeroPower));
        assert_eq!(spectral_bandwidth(&ps, 0.0, BandwidthVariant::Literal), Err(DspError::ZeroPower));
    }

    proptest! {
        #[test]
        fn centroid_scale_invariant(psd in proptest::collection::vec(0.0f64..10.0, 2..100), a in 1e-3f64..1e3) {
            prop_assume!(psd.iter().sum::<f64>() > 1e-3);
            let freqs: Vec<f64> = (0..psd.len()).map(|k| k as f64 * 7.5).collect();
            let base = PowerSpectrum { freqs: freqs.clone(), psd: psd.clone() };
            let scaled = PowerSpectrum { freqs, psd: psd.iter().map(|p| p * a).collect() };
            let (c0, c1) = (spectral_centroid(&base).unwrap(), spectral_centroid(&scaled).unwrap());
            prop_assert!((c0 - c1).abs() < 1e-9);
            let b0 = spectral_bandwidth(&base, c0, BandwidthVariant::Literal).unwrap();
            prop_assert!(b0.is_finite());
        }
    }
}
