use super::DspError;
use crate::scalar::Scalar;

/// Teager-Kaiser energy of one ACC segment, raw and peak-smoothed.
#[derive(Debug, Clone, PartialEq)]
pub struct TkoVector<T> {
    pub phi: Vec<T>,
    pub phi_smooth: Vec<T>,
    /// Sampling period in seconds.
    pub ts: f64,
}

impl<T: Scalar> TkoVector<T> {
    pub fn from_segment(samples: &[T], ts: f64) -> Result<Self, DspError> {
        let phi = tko(samples, ts)?;
        let phi_smooth = tko_smooth(&phi)?;
        Ok(TkoVector { phi, phi_smooth, ts })
    }
}

const MIN_LEN: usize = 5;

#[inline]
fn clamped<T: Copy>(x: &[T], i: isize) -> T {
    x[i.clamp(0, x.len() as isize - 1) as usize]
}

/// Five-point Teager-Kaiser operator
/// `(2x[n]^2 + (x[n+1] - x[n-1])^2 - x[n](x[n+2] + x[n-2])) / (4 Ts^2)`
/// without half-wave rectification. Out-of-range neighbours replicate the
/// nearest edge sample, so the output has the input's length.
pub fn tko<T: Scalar>(x: &[T], ts: f64) -> Result<Vec<T>, DspError> {
    if x.len() < MIN_LEN {
        return Err(DspError::TooShort { len: x.len(), needed: MIN_LEN });
    }
    if !(ts > 0.0) {
        return Err(DspError::InvalidParameter(format!("sampling period {ts}")));
    }
    let denom = T::lit(4.0 * ts * ts);
    let two = T::lit(2.0);
    let n = x.len();
    let op = |xm2: T, xm1: T, x0: T, xp1: T, xp2: T| {
        let d = xp1 - xm1;
        (two * x0 * x0 + d * d - x0 * (xp2 + xm2)) / denom
    };
    let edge = |i: usize| {
        let i = i as isize;
        op(clamped(x, i - 2), clamped(x, i - 1), x[i as usize], clamped(x, i + 1), clamped(x, i + 2))
    };
    let mut out = Vec::with_capacity(n);
    out.extend((0..2).map(edge));
    out.extend(x.windows(5).map(|w| op(w[0], w[1], w[2], w[3], w[4])));
    out.extend((n - 2..n).map(edge));
    Ok(out)
}

/// Moving maximum over 3 samples followed by a moving average over 5, both
/// with edge replication.
pub fn tko_smooth<T: Scalar>(phi: &[T]) -> Result<Vec<T>, DspError> {
    if phi.len() < MIN_LEN {
        return Err(DspError::TooShort { len: phi.len(), needed: MIN_LEN });
    }
    let n = phi.len() as isize;
    let peak: Vec<T> = (0..n)
        .map(|i| clamped(phi, i - 1).max(phi[i as usize]).max(clamped(phi, i + 1)))
        .collect();
    let fifth = T::lit(0.2);
    Ok((0..n)
        .map(|i| {
            let s = clamped(&peak, i - 2)
                + clamped(&peak, i - 1)
                + peak[i as usize]
                + clamped(&peak, i + 1)
                + clamped(&peak, i + 2);
            s * fifth
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_cancels_everywhere() {
        let phi = tko(&vec![3.5f64; 40], 1.0 / 1600.0).unwrap();
        assert!(phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_pattern() {
        let mut x = vec![0.0f64; 21];
        x[10] = 1.0;
        let phi = tko(&x, 1.0).unwrap();
        for (i, &v) in phi.iter().enumerate() {
            let expected = match i {
                10 => 0.5,
                9 | 11 => 0.25,
                _ => 0.0,
            };
            assert_eq!(v, expected, "index {i}");
        }
    }

    #[test]
    fn smoothed_impulse() {
        let mut phi = vec![0.0f64; 21];
        phi[10] = 1.0;
        let s = tko_smooth(&phi).unwrap();
        let expected = [1.0, 2.0, 3.0, 3.0, 3.0, 2.0, 1.0].map(|v| v / 5.0);
        for (k, e) in expected.iter().enumerate() {
            assert!((s[7 + k] - e).abs() < 1e-15);
        }
        assert_eq!(s[6], 0.0);
        assert_eq!(s[14], 0.0);
        let c = tko_smooth(&vec![2.5f64; 9]).unwrap();
        assert!(c.iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn errors() {
        assert!(matches!(tko(&[1.0f32; 4], 1.0), Err(DspError::TooShort { .. })));
        assert!(tko(&[1.0f32; 8], 0.0).is_err());
        assert!(tko_smooth(&[1.0f32; 4]).is_err());
    }

    #[test]
    fn length_preserved() {
        let v = TkoVector::from_segment(&vec![0.3f32; 3200], 1.0 / 1600.0).unwrap();
        assert_eq!(v.phi.len(), 3200);
        assert_eq!(v.phi_smooth.len(), 3200);
    }

    proptest! {
        #[test]
        fn quadratic_scaling(x in proptest::collection::vec(-2.0f64..2.0, 5..200), a in -10.0f64..10.0) {
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let p = tko(&x, 0.5).unwrap();
            let q = tko(&scaled, 0.5).unwrap();
            for (pi, qi) in p.iter().zip(&q) {
                prop_assert!((a * a * pi - qi).abs() <= 1e-9 * (1.0 + qi.abs()));
            }
        }

        #[test]
        fn shift_covariance(x in proptest::collection::vec(-2.0f64..2.0, 20..200), d in 1usize..8) {
            let mut delayed = vec![0.0; d];
            delayed.extend_from_slice(&x);
            let p = tko(&x, 1.0).unwrap();
            let q = tko(&delayed, 1.0).unwrap();
            for n in 2..x.len() - 2 {
                prop_assert_eq!(p[n], q[n + d]);
            }
        }
    }
}
