//! Per-segment feature recipes for each modality.

use serde::{Deserialize, Serialize};

use super::{
    filter, fuse, mel_spectrogram, power_to_db, stft_mag, DspError, FeatureTensor, FilterKind, Layout,
    TkoVector,
};
use crate::ingest::{ACC_RATE, MIC_RATE};
use crate::scalar::Scalar;

/// High-pass applied to both channels before material features.
pub const MATERIAL_HIGHPASS_HZ: f64 = 20.0;
/// Low-pass applied to ACC before the Teager-Kaiser operator.
pub const GAIT_CUTOFF_HZ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    MicMel,
    AccStft,
    AccMel,
    Tko,
    Fused,
}

impl FeatureKind {
    pub fn layout(self) -> Layout {
        match self {
            FeatureKind::MicMel => Layout::MicMel64x61,
            FeatureKind::AccStft => Layout::AccStft,
            FeatureKind::AccMel => Layout::AccMel64x41,
            FeatureKind::Tko => Layout::Tko,
            FeatureKind::Fused => Layout::Fused64x102,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::MicMel => "mic_mel",
            FeatureKind::AccStft => "acc_stft",
            FeatureKind::AccMel => "acc_mel",
            FeatureKind::Tko => "tko",
            FeatureKind::Fused => "fused",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureKind> {
        [FeatureKind::MicMel, FeatureKind::AccStft, FeatureKind::AccMel, FeatureKind::Tko, FeatureKind::Fused]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// 1 s MIC segment: high-pass, 64-band power Mel (FFT 2048, hop 800), dB.
pub fn mic_mel_feature<T: Scalar>(samples: &[T]) -> Result<FeatureTensor<T>, DspError> {
    let x = filter(samples, FilterKind::HighPass, MATERIAL_HIGHPASS_HZ, MIC_RATE)?;
    let mut s = mel_spectrogram(&x, MIC_RATE, 64, 800, 2048)?;
    s.values = power_to_db(&s.values);
    FeatureTensor::from_spectrogram(s, Layout::MicMel64x61)
}

/// 2 s ACC segment: high-pass, 64-band power Mel (FFT 256, hop 80), dB.
pub fn acc_mel_feature<T: Scalar>(samples: &[T]) -> Result<FeatureTensor<T>, DspError> {
    let x = filter(samples, FilterKind::HighPass, MATERIAL_HIGHPASS_HZ, ACC_RATE)?;
    let mut s = mel_spectrogram(&x, ACC_RATE, 64, 80, 256)?;
    s.values = power_to_db(&s.values);
    FeatureTensor::from_spectrogram(s, Layout::AccMel64x41)
}

/// 2 s ACC segment: high-pass, linear magnitude STFT (50-sample window, 75% overlap).
pub fn acc_stft_feature<T: Scalar>(samples: &[T]) -> Result<FeatureTensor<T>, DspError> {
    let x = filter(samples, FilterKind::HighPass, MATERIAL_HIGHPASS_HZ, ACC_RATE)?;
    FeatureTensor::from_spectrogram(stft_mag(&x, ACC_RATE, 50, 0.75)?, Layout::AccStft)
}

/// 2 s ACC segment: low-pass, Teager-Kaiser energy, peak smoothing.
pub fn tko_feature<T: Scalar>(samples: &[T]) -> Result<TkoVector<T>, DspError> {
    let x = filter(samples, FilterKind::LowPass, GAIT_CUTOFF_HZ, ACC_RATE)?;
    TkoVector::from_segment(&x, 1.0 / ACC_RATE)
}

pub fn fused_feature<T: Scalar>(mic: &[T], acc: &[T]) -> Result<FeatureTensor<T>, DspError> {
    fuse(&mic_mel_feature(mic)?, &acc_mel_feature(acc)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u32) -> Vec<f32> {
        let mut s = seed.wrapping_mul(2654435761).max(1);
        (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 17;
                s ^= s << 5;
                (s as f32 / u32::MAX as f32) - 0.5
            })
            .collect()
    }

    #[test]
    fn baseline_dimensions() {
        let mic = noise(48000, 1);
        let acc = noise(3200, 2);
        let m = mic_mel_feature(&mic).unwrap();
        assert_eq!((m.rows(), m.cols()), (64, 61));
        let a = acc_mel_feature(&acc).unwrap();
        assert_eq!((a.rows(), a.cols()), (64, 41));
        let s = acc_stft_feature(&acc).unwrap();
        assert_eq!((s.rows(), s.cols()), (26, 263));
        let f = fused_feature(&mic, &acc).unwrap();
        assert_eq!((f.rows(), f.cols()), (64, 102));
        assert_eq!(tko_feature(&acc).unwrap().phi_smooth.len(), 3200);
        assert!(m.values().iter().all(|v| v.is_finite() && *v <= 0.0 && *v >= -80.0));
    }

    #[test]
    fn kind_names() {
        for k in ["mic_mel", "acc_stft", "acc_mel", "tko", "fused"] {
            assert_eq!(FeatureKind::parse(k).unwrap().name(), k);
        }
    }
}
