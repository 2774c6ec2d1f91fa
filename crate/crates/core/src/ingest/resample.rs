use crate::scalar::Scalar;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rational polyphase resampling from `from_hz` to `to_hz` with a
/// Hann-windowed sinc anti-aliasing filter (`half_taps` zero crossings per side).
/// Rates must be integral.
pub fn resample_polyphase<T: Scalar>(input: &[T], from_hz: u64, to_hz: u64, half_taps: usize) -> Vec<T> {
    assert!(from_hz > 0 && to_hz > 0, "rates must be positive");
    if from_hz == to_hz || input.is_empty() {
        return input.to_vec();
    }
    let g = gcd(from_hz, to_hz);
    let up = (to_hz / g) as usize;
    let down = (from_hz / g) as usize;
    let cutoff = 1.0 / up.max(down) as f64; // normalised to the upsampled Nyquist
    let half_len = half_taps * up.max(down);
    let filter_len = 2 * half_len + 1;
    let h: Vec<f64> = (0..filter_len)
        .map(|i| {
            let t = i as f64 - half_len as f64;
            let sinc = if t == 0.0 {
                1.0
            } else {
                let x = std::f64::consts::PI * cutoff * t;
                x.sin() / x
            };
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (filter_len - 1) as f64).cos();
            cutoff * sinc * w * up as f64
        })
        .collect();

    let out_len = (input.len() * up).div_ceil(down);
    let n = input.len() as isize;
    (0..out_len)
        .map(|j| {
            // position on the upsampled grid, centred on the filter
            let u = (j * down) as isize;
            let first_k = (u - half_len as isize).div_euclid(up as isize).max(0);
            let last_k = ((u + half_len as isize).div_euclid(up as isize)).min(n - 1);
            let mut acc = 0.0;
            for k in first_k..=last_k {
                let tap = u - k * up as isize + half_len as isize;
                if (0..filter_len as isize).contains(&tap) {
                    acc += input[k as usize].as_f64() * h[tap as usize];
                }
            }
            T::lit(acc)
        })
        .collect()
}
