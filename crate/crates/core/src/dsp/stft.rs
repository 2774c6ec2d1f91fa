use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{hann_periodic, DspError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinAxis {
    LinearHz,
    Mel,
}

/// Non-negative time-frequency grid stored row-major as `bins x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub values: Vec<T>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub bin_axis: BinAxis,
    pub frame_hop: usize,
    pub source_rate: f64,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn get(&self, bin: usize, frame: usize) -> T {
        self.values[bin * self.n_frames + frame]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_bins, self.n_frames)
    }

    /// Bin with the largest value in `frame`.
    pub fn argmax_bin(&self, frame: usize) -> usize {
        (0..self.n_bins)
            .max_by(|&a, &b| self.get(a, frame).partial_cmp(&self.get(b, frame)).unwrap())
            .unwrap_or(0)
    }
}

/// `(N - W) / H + 1` full frames, zero if the signal is shorter than a window.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window || hop == 0 {
        0
    } else {
        (len - window) / hop + 1
    }
}

/// Hop for a window with fractional overlap, rounded down to whole samples
/// (50 samples at 75% overlap gives 12).
pub fn stft_hop(window_len: usize, overlap: f64) -> usize {
    ((window_len as f64) * (1.0 - overlap)).floor().max(1.0) as usize
}

pub(crate) struct FrameFft<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Scalar> FrameFft<T> {
    pub(crate) fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        FrameFft { fft, window: hann_periodic(len), buf: vec![Complex::default(); len], scratch }
    }

    /// Writes `|X_k|^2` for `k in 0..=len/2` of the windowed frame.
    pub(crate) fn power(&mut self, frame: &[T], out: &mut [T]) {
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, T::zero());
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.norm_sqr();
        }
    }
}

/// Hann-windowed magnitude STFT with no centring padding.
pub fn stft_mag<T: Scalar>(signal: &[T], rate: f64, window_len: usize, overlap: f64) -> Result<Spectrogram<T>, DspError> {
    if window_len < 2 || !(0.0..1.0).contains(&overlap) {
        return Err(DspError::InvalidParameter(format!("window {window_len}, overlap {overlap}")));
    }
    if signal.len() < window_len {
        return Err(DspError::TooShort { len: signal.len(), needed: window_len });
    }
    let hop = stft_hop(window_len, overlap);
    let n_frames = frame_count(signal.len(), window_len, hop);
    let n_bins = window_len / 2 + 1;
    let mut fft = FrameFft::new(window_len);
    let mut power = vec![T::zero(); n_bins];
    let mut values = vec![T::zero(); n_bins * n_frames];
    for f in 0..n_frames {
        fft.power(&signal[f * hop..f * hop + window_len], &mut power);
        for (b, p) in power.iter().enumerate() {
            values[b * n_frames + f] = p.sqrt();
        }
    }
    Ok(Spectrogram { values, n_bins, n_frames, bin_axis: BinAxis::LinearHz, frame_hop: hop, source_rate: rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn acc_segment_shape() {
        let s = stft_mag(&vec![0.1f32; 3200], 1600.0, 50, 0.75).unwrap();
        assert_eq!(s.frame_hop, 12);
        assert_eq!(s.shape(), (26, 263));
    }

    #[test]
    fn silence_is_zero() {
        let s = stft_mag(&vec![0.0f64; 3200], 1600.0, 50, 0.75).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_peaks_at_bin_six() {
        let x: Vec<f64> = (0..3200).map(|i| (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 1600.0).sin()).collect();
        let s = stft_mag(&x, 1600.0, 50, 0.75).unwrap();
        let expected = (200.0f64 / (1600.0 / 50.0)).round() as usize;
        assert_eq!(expected, 6);
        for f in 0..s.n_frames {
            assert_eq!(s.argmax_bin(f), expected, "frame {f}");
        }
        // direct DFT oracle for the first frame
        let w: Vec<f64> = hann_periodic(50);
        for k in 0..26 {
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..50 {
                let ph = -2.0 * std::f64::consts::PI * (k * n) as f64 / 50.0;
                re += x[n] * w[n] * ph.cos();
                im += x[n] * w[n] * ph.sin();
            }
            assert!(((re * re + im * im).sqrt() - s.get(k, 0)).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(stft_mag(&[0.0f32; 49], 1600.0, 50, 0.75), Err(DspError::TooShort { .. })));
    }

    proptest! {
        #[test]
        fn frame_formula(n in 50usize..2000, w in 2usize..50, ov in 0.0f64..0.9) {
            let x = vec![0.5f32; n];
            let s = stft_mag(&x, 1000.0, w, ov).unwrap();
            let hop = stft_hop(w, ov);
            prop_assert_eq!(s.n_frames, (n - w) / hop + 1);
            prop_assert_eq!(s.n_bins, w / 2 + 1);
            prop_assert!(s.values.iter().all(|&v| v >= 0.0));
        }
    }
}
