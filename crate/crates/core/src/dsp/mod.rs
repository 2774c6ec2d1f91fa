//! Signal transforms: zero-phase filtering, STFT and Mel spectrograms, the
//! Teager-Kaiser gait energy features, Welch PSD, log spectral moments, and
//! ACC+MIC feature fusion.

mod features;
mod filter;
mod fuse;
mod mel;
mod spectral;
mod stft;
mod tensor_io;
mod tko;
mod welch;
mod window;

pub use features::{
    acc_mel_feature, acc_stft_feature, fused_feature, mic_mel_feature, tko_feature, FeatureKind,
    GAIT_CUTOFF_HZ, MATERIAL_HIGHPASS_HZ,
};
pub use filter::{butterworth_sections, filter, sosfiltfilt, Biquad, FilterKind};
pub use fuse::{fuse, standardize, FeatureTensor, Layout};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, power_to_db, MelFilterbank, DB_FLOOR};
pub use spectral::{spectral_bandwidth, spectral_centroid, BandwidthVariant, SpectralFeatures, BANDWIDTH_FLOOR, LOG_FLOOR};
pub use stft::{frame_count, stft_hop, stft_mag, BinAxis, Spectrogram};
pub use tensor_io::{read_tensor, read_tensors, write_tensor, TENSOR_HEADER_LEN};
pub use tko::{tko, tko_smooth, TkoVector};
pub use welch::{welch_psd, PowerSpectrum};
pub use window::hann_periodic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("signal of length {len} is shorter than required {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("spectrum has zero total power")]
    ZeroPower,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DspError {
    fn from(e: std::io::Error) -> Self {
        DspError::Io(e.to_string())
    }
}
