use super::stft::FrameFft;
use super::{frame_count, BinAxis, DspError, Spectrogram};
use crate::scalar::Scalar;

/// Decibel floor for log-Mel features.
pub const DB_FLOOR: f64 = -80.0;

/// HTK Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters stored sparsely as `(first_bin, weights)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    pub filters: Vec<(usize, Vec<T>)>,
    pub n_fft_bins: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl<T: Scalar> MelFilterbank<T> {
    /// Sum of filter weights falling on an FFT bin.
    pub fn bin_weight(&self, bin: usize) -> T {
        self.filters
            .iter()
            .filter(|(start, w)| bin >= *start && bin < start + w.len())
            .map(|(start, w)| w[bin - start])
            .sum()
    }

    fn apply(&self, power: &[T], out: &mut [T]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.filters) {
            *o = w.iter().zip(&power[*start..]).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// HTK-style triangular filterbank over `fft_len / 2 + 1` bins, without area
/// normalisation.
pub fn mel_filterbank<T: Scalar>(n_mels: usize, fft_len: usize, rate: f64, fmin: f64, fmax: f64) -> MelFilterbank<T> {
    let n_bins = fft_len / 2 + 1;
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * rate / fft_len as f64;
    let filters = (0..n_mels)
        .map(|m| {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let weights: Vec<(usize, f64)> = (0..n_bins)
                .map(|k| {
                    let f = bin_hz(k);
                    let up = (f - left) / (centre - left);
                    let down = (right - f) / (right - centre);
                    (k, up.min(down).max(0.0))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            match (weights.first(), weights.last()) {
                (Some(&(first, _)), Some(&(last, _))) => {
                    let mut dense = vec![T::zero(); last - first + 1];
                    for (k, w) in weights {
                        dense[k - first] = T::lit(w);
                    }
                    (first, dense)
                }
                // narrower than one FFT bin
                _ => (0, Vec::new()),
            }
        })
        .collect();
    MelFilterbank { filters, n_fft_bins: n_bins, fmin, fmax }
}

/// Power Mel spectrogram with centred frames (reflect padding of `fft_len/2`
/// on both sides), so a signal of `N` samples yields `1 + N / hop` frames.
/// Filters span 20 Hz to Nyquist.
pub fn mel_spectrogram<T: Scalar>(
    signal: &[T],
    rate: f64,
    n_mels: usize,
    hop: usize,
    fft_len: usize,
) -> Result<Spectrogram<T>, DspError> {
    if hop == 0 || fft_len < 2 || n_mels == 0 {
        return Err(DspError::InvalidParameter(format!("n_mels {n_mels}, hop {hop}, fft_len {fft_len}")));
    }
    if signal.len() < fft_len {
        return Err(DspError::TooShort { len: signal.len(), needed: fft_len });
    }
    let pad = fft_len / 2;
    let n = signal.len();
    let mut padded = Vec::with_capacity(n + 2 * pad);
    padded.extend((1..=pad).rev().map(|i| signal[i.min(n - 1)]));
    padded.extend_from_slice(signal);
    padded.extend((1..=pad).map(|i| signal[n - 1 - i.min(n - 1)]));

    let bank = mel_filterbank::<T>(n_mels, fft_len, rate, 20.0, rate / 2.0);
    let n_frames = frame_count(padded.len(), fft_len, hop);
    let mut fft = FrameFft::new(fft_len);
    let mut power = vec![T::zero(); fft_len / 2 + 1];
    let mut mel = vec![T::zero(); n_mels];
    let mut values = vec![T::zero(); n_mels * n_frames];
    for f in 0..n_frames {
        fft.power(&padded[f * hop..f * hop + fft_len], &mut power);
        bank.apply(&power, &mut mel);
        for (m, v) in mel.iter().enumerate() {
            values[m * n_frames + f] = *v;
        }
    }
    Ok(Spectrogram { values, n_bins: n_mels, n_frames, bin_axis: BinAxis::Mel, frame_hop: hop, source_rate: rate })
}

/// `10 log10(p / max p)` floored at [`DB_FLOOR`]; an all-zero input maps to
/// the floor everywhere.
pub fn power_to_db<T: Scalar>(power: &[T]) -> Vec<T> {
    let max = power.iter().fold(T::zero(), |m, &v| m.max(v));
    let floor = T::lit(DB_FLOOR);
    if max <= T::zero() {
        return vec![floor; power.len()];
    }
    let eps = T::lit(1e-12);
    power
        .iter()
        .map(|&p| (T::lit(10.0) * (p.max(eps) / max).log10()).max(floor))
        .collect()
}
