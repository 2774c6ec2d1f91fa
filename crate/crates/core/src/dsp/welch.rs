use super::stft::FrameFft;
use super::{frame_count, hann_periodic, DspError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum<T> {
    pub freqs: Vec<T>,
    pub psd: Vec<T>,
}

impl<T: Scalar> PowerSpectrum<T> {
    pub fn total_power(&self) -> T {
        self.psd.iter().copied().sum()
    }

    /// `sum psd * df`, i.e. the signal variance for a density estimate.
    pub fn integrated(&self) -> T {
        let df = if self.freqs.len() > 1 { self.freqs[1] - self.freqs[0] } else { T::one() };
        self.total_power() * df
    }

    pub fn peak_frequency(&self) -> T {
        let i = (0..self.psd.len())
            .max_by(|&a, &b| self.psd[a].partial_cmp(&self.psd[b]).unwrap())
            .unwrap_or(0);
        self.freqs[i]
    }
}

const MIN_LEN: usize = 256;

/// Welch estimate: Hann segments of 1024 samples (256 for shorter inputs),
/// 50% overlap, per-segment mean removal, one-sided density in power/Hz.
pub fn welch_psd<T: Scalar>(signal: &[T], rate: f64) -> Result<PowerSpectrum<T>, DspError> {
    if signal.len() < MIN_LEN {
        return Err(DspError::TooShort { len: signal.len(), needed: MIN_LEN });
    }
    let nperseg = if signal.len() >= 1024 { 1024 } else { 256 };
    let step = nperseg / 2;
    let n_seg = frame_count(signal.len(), nperseg, step);
    let n_bins = nperseg / 2 + 1;
    let window: Vec<T> = hann_periodic(nperseg);
    let win_energy: T = window.iter().map(|&w| w * w).sum();
    let scale = T::one() / (T::lit(rate) * win_energy);

    let mut fft = FrameFft::new(nperseg);
    let mut frame = vec![T::zero(); nperseg];
    let mut power = vec![T::zero(); n_bins];
    let mut acc = vec![T::zero(); n_bins];
    for s in 0..n_seg {
        let seg = &signal[s * step..s * step + nperseg];
        let mean = seg.iter().copied().sum::<T>() / T::from_usize_lossy(nperseg);
        for (f, &x) in frame.iter_mut().zip(seg) {
            *f = x - mean;
        }
        fft.power(&frame, &mut power);
        for (a, &p) in acc.iter_mut().zip(&power) {
            *a += p;
        }
    }
    let inv = T::one() / T::from_usize_lossy(n_seg);
    let two = T::lit(2.0);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || k == n_bins - 1 { T::one() } else { two };
            a * inv * scale * one_sided
        })
        .collect();
    let freqs = (0..n_bins).map(|k| T::lit(k as f64 * rate / nperseg as f64)).collect();
    Ok(PowerSpectrum { freqs, psd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_integrates_to_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..48000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ps = welch_psd(&x, 48000.0).unwrap();
        let total = ps.integrated();
        assert!((total - 1.0).abs() < 0.1, "{total}");
        assert!(ps.psd.iter().all(|&p| p >= 0.0));
        assert!(ps.freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tone_peak() {
        let rate = 48000.0;
        let x: Vec<f64> = (0..48000).map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / rate).sin()).collect();
        let ps = welch_psd(&x, rate).unwrap();
        let df = rate / 1024.0;
        assert!((ps.peak_frequency() - 440.0).abs() <= df);
    }

    #[test]
    fn short_input_uses_256() {
        let x = vec![0.5f32; 600];
        let ps = welch_psd(&x, 1600.0).unwrap();
        assert_eq!(ps.freqs.len(), 129);
        assert!(welch_psd(&[0.0f32; 255], 1600.0).is_err());
    }
}
