use super::DspError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    HighPass,
    LowPass,
}

/// Second-order section with `a0 = 1`, run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input of 1 a steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Butterworth design of even `order` as cascaded biquads (bilinear transform
/// with frequency pre-warping).
pub fn butterworth_sections(kind: FilterKind, order: usize, cutoff: f64, rate: f64) -> Result<Vec<Biquad>, DspError> {
    let nyquist = rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(DspError::InvalidCutoff { cutoff, nyquist });
    }
    if order == 0 || order % 2 != 0 {
        return Err(DspError::InvalidParameter(format!("order {order} must be even and positive")));
    }
    let k = (std::f64::consts::PI * cutoff / rate).tan();
    let sections = (1..=order / 2)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i - 1) as f64 / (2 * order) as f64;
            let q = 1.0 / (2.0 * theta.cos());
            let norm = 1.0 / (1.0 + k / q + k * k);
            let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
            let b = match kind {
                FilterKind::LowPass => {
                    let b0 = k * k * norm;
                    [b0, 2.0 * b0, b0]
                }
                FilterKind::HighPass => [norm, -2.0 * norm, norm],
            };
            Biquad { b, a }
        })
        .collect();
    Ok(sections)
}

/// Zero-phase forward-backward filtering with odd extension at both ends and
/// steady-state initial conditions.
pub fn sosfiltfilt<T: Scalar>(sections: &[Biquad], signal: &[T]) -> Vec<T> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let ntaps = 2 * sections.len() + 1;
    let pad = (3 * ntaps).min(n - 1);
    let x: Vec<f64> = signal.iter().map(|v| v.as_f64()).collect();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(&x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let cascade = |buf: &mut [f64]| {
        let mut level = buf[0];
        for s in sections {
            let zi = s.step_state();
            s.run(buf, [zi[0] * level, zi[1] * level]);
            level *= s.dc_gain();
        }
    };
    cascade(&mut ext);
    ext.reverse();
    cascade(&mut ext);
    ext.reverse();
    ext[pad..pad + n].iter().map(|&v| T::lit(v)).collect()
}

/// 4th-order Butterworth, applied forward and backward.
pub fn filter<T: Scalar>(signal: &[T], kind: FilterKind, cutoff: f64, rate: f64) -> Result<Vec<T>, DspError> {
    let sections = butterworth_sections(kind, 4, cutoff, rate)?;
    Ok(sosfiltfilt(&sections, signal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RATE: f64 = 1600.0;

    fn sine(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / RATE).sin()).collect()
    }

    // amplitude of a tone via a single-bin DFT over an integer number of periods
    fn tone_amplitude(x: &[f64], f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * f * i as f64 / RATE;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        2.0 * (re * re + im * im).sqrt() / x.len() as f64
    }

    #[test]
    fn dc_rejected_by_highpass() {
        let y = filter(&vec![1.0f64; 3200], FilterKind::HighPass, 20.0, RATE).unwrap();
        let max = y[100..3100].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-3, "{max}");
    }

    #[test]
    fn passband_and_stopband() {
        let n = 6400;
        let core = 800..5600; // 3 s, integer periods for 5 Hz and 100 Hz
        let lp5 = filter(&sine(5.0, n), FilterKind::LowPass, 20.0, RATE).unwrap();
        let a = tone_amplitude(&lp5[core.clone()], 5.0);
        assert!((a - 1.0).abs() < 0.01, "5 Hz lowpass amplitude {a}");

        let hp100 = filter(&sine(100.0, n), FilterKind::HighPass, 20.0, RATE).unwrap();
        let a = tone_amplitude(&hp100[core.clone()], 100.0);
        assert!((a - 1.0).abs() < 0.01, "100 Hz highpass amplitude {a}");

        let lp100 = filter(&sine(100.0, n), FilterKind::LowPass, 20.0, RATE).unwrap();
        let a = tone_amplitude(&lp100[core], 100.0);
        assert!(20.0 * a.log10() <= -40.0, "100 Hz lowpass attenuation {} dB", 20.0 * a.log10());
    }

    #[test]
    fn invalid_cutoffs() {
        for c in [0.0, -5.0, 800.0, 1000.0] {
            assert!(matches!(filter(&[0.0f32; 10], FilterKind::LowPass, c, RATE), Err(DspError::InvalidCutoff { .. })));
        }
    }

    #[test]
    fn output_length_preserved_f32() {
        for n in [1usize, 2, 5, 40, 3200] {
            let x: Vec<f32> = (0..n).map(|i| i as f32).collect();
            assert_eq!(filter(&x, FilterKind::HighPass, 20.0, RATE).unwrap().len(), n);
        }
    }

    proptest! {
        #[test]
        fn linearity(x in proptest::collection::vec(-1.0f64..1.0, 64..400), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (i as f64 * 0.37).sin() + v * 0.3).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = filter(&mix, FilterKind::HighPass, 20.0, RATE).unwrap();
            let fx = filter(&x, FilterKind::HighPass, 20.0, RATE).unwrap();
            let fy = filter(&y, FilterKind::HighPass, 20.0, RATE).unwrap();
            let scale = lhs.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            for i in 0..x.len() {
                let rhs = a * fx[i] + b * fy[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-6 * scale);
            }
        }
    }
}
