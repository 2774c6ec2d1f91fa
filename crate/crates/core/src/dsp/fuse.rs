use serde::{Deserialize, Serialize};

use super::{DspError, Spectrogram};
use crate::scalar::Scalar;

/// Feature layouts with their exact dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    MicMel64x61,
    AccStft,
    AccMel64x41,
    Fused64x102,
    Tko,
}

impl Layout {
    pub fn dims(self) -> (usize, usize) {
        match self {
            Layout::MicMel64x61 => (64, 61),
            Layout::AccStft => (26, 263),
            Layout::AccMel64x41 => (64, 41),
            Layout::Fused64x102 => (64, 102),
            Layout::Tko => (1, 3200),
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Layout::MicMel64x61 => 1,
            Layout::AccStft => 2,
            Layout::AccMel64x41 => 3,
            Layout::Fused64x102 => 4,
            Layout::Tko => 5,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Layout> {
        [Layout::MicMel64x61, Layout::AccStft, Layout::AccMel64x41, Layout::Fused64x102, Layout::Tko]
            .into_iter()
            .find(|l| l.tag() == tag)
    }
}

/// A 2-D feature grid (row-major) whose shape matches its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    values: Vec<T>,
    layout: Layout,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn new(values: Vec<T>, rows: usize, cols: usize, layout: Layout) -> Result<Self, DspError> {
        if layout.dims() != (rows, cols) || values.len() != rows * cols {
            return Err(DspError::ShapeMismatch(format!(
                "{layout:?} needs {:?}, got {rows}x{cols} with {} values",
                layout.dims(),
                values.len()
            )));
        }
        Ok(FeatureTensor { values, layout })
    }

    pub fn from_spectrogram(s: Spectrogram<T>, layout: Layout) -> Result<Self, DspError> {
        Self::new(s.values, s.n_bins, s.n_frames, layout)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn rows(&self) -> usize {
        self.layout.dims().0
    }

    pub fn cols(&self) -> usize {
        self.layout.dims().1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.values[r * self.cols() + c]
    }
}

/// Zero mean, unit (population) variance; constant input maps to zeros.
pub fn standardize<T: Scalar>(values: &[T]) -> Vec<T> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    if !(var > T::lit(1e-20)) {
        return vec![T::zero(); values.len()];
    }
    let inv = T::one() / var.sqrt();
    values.iter().map(|&v| (v - mean) * inv).collect()
}

/// Standardises each input, then concatenates frames with MIC first.
pub fn fuse<T: Scalar>(mic_mel: &FeatureTensor<T>, acc_mel: &FeatureTensor<T>) -> Result<FeatureTensor<T>, DspError> {
    if mic_mel.layout != Layout::MicMel64x61 || acc_mel.layout != Layout::AccMel64x41 {
        return Err(DspError::ShapeMismatch(format!(
            "fusion expects MIC 64x61 and ACC 64x41, got {:?} and {:?}",
            mic_mel.layout, acc_mel.layout
        )));
    }
    let mic = standardize(&mic_mel.values);
    let acc = standardize(&acc_mel.values);
    let (rows, mc, ac) = (64, mic_mel.cols(), acc_mel.cols());
    let mut out = Vec::with_capacity(rows * (mc + ac));
    for r in 0..rows {
        out.extend_from_slice(&mic[r * mc..(r + 1) * mc]);
        out.extend_from_slice(&acc[r * ac..(r + 1) * ac]);
    }
    FeatureTensor::new(out, rows, mc + ac, Layout::Fused64x102)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fused_shape_and_order() {
        let mic = FeatureTensor::new((0..64 * 61).map(|v| v as f64).collect(), 64, 61, Layout::MicMel64x61).unwrap();
        let acc = FeatureTensor::new(vec![5.0; 64 * 41], 64, 41, Layout::AccMel64x41).unwrap();
        let f = fuse(&mic, &acc).unwrap();
        assert_eq!((f.rows(), f.cols()), (64, 102));
        let std_mic = standardize(mic.values());
        assert_eq!(f.get(3, 10), std_mic[3 * 61 + 10]);
        assert_eq!(f.get(3, 70), 0.0); // constant ACC standardises to zero
    }

    #[test]
    fn zeros_fuse_to_zeros() {
        let mic = FeatureTensor::new(vec![0.0f32; 64 * 61], 64, 61, Layout::MicMel64x61).unwrap();
        let acc = FeatureTensor::new(vec![0.0f32; 64 * 41], 64, 41, Layout::AccMel64x41).unwrap();
        assert!(fuse(&mic, &acc).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_shapes() {
        assert!(matches!(
            FeatureTensor::new(vec![0.0f32; 64 * 40], 64, 40, Layout::AccMel64x41),
            Err(DspError::ShapeMismatch(_))
        ));
        let mic = FeatureTensor::new(vec![0.0f32; 64 * 61], 64, 61, Layout::MicMel64x61).unwrap();
        assert!(fuse(&mic, &mic).is_err());
    }

    #[test]
    fn standardize_moments() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin() * 4.0 + 2.0).collect();
        let s = standardize(&x);
        let mean = s.iter().sum::<f64>() / 100.0;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }
}
