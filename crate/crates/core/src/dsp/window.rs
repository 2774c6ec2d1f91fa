use crate::scalar::Scalar;

/// Periodic (DFT-even) Hann window.
pub fn hann_periodic<T: Scalar>(len: usize) -> Vec<T> {
    let two_pi = T::PI() + T::PI();
    let n = T::from_usize_lossy(len);
    (0..len)
        .map(|i| T::lit(0.5) - T::lit(0.5) * (two_pi * T::from_usize_lossy(i) / n).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_peak() {
        let w: Vec<f64> = hann_periodic(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }
}
