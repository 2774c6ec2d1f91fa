use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vibwalk_core::dsp::{spectral_centroid, tko, tko_smooth, welch_psd, PowerSpectrum};

fn at(x: &[f64], i: isize) -> f64 {
    let last = x.len() as isize - 1;
    x[if i < 0 { 0 } else if i > last { last } else { i } as usize]
}

fn tko_oracle(x: &[f64], ts: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for n in 0..x.len() as isize {
        let d = at(x, n + 1) - at(x, n - 1);
        out[n as usize] = (2.0 * at(x, n) * at(x, n) + d * d - at(x, n) * (at(x, n + 2) + at(x, n - 2))) / (4.0 * ts * ts);
    }
    out
}

fn smooth_oracle(phi: &[f64]) -> Vec<f64> {
    let mut peak = vec![0.0; phi.len()];
    for n in 0..phi.len() as isize {
        let mut m = f64::NEG_INFINITY;
        for k in n - 1..=n + 1 {
            m = m.max(at(phi, k));
        }
        peak[n as usize] = m;
    }
    let mut out = vec![0.0; phi.len()];
    for n in 0..phi.len() as isize {
        let mut s = 0.0;
        for k in n - 2..=n + 2 {
            s += at(&peak, k);
        }
        out[n as usize] = s / 5.0;
    }
    out
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300))
}

#[test]
fn tko_matches_index_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let ts = 1.0 / 1600.0;
    for _ in 0..50 {
        let x: Vec<f64> = (0..3200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = tko(&x, ts).unwrap();
        assert!(close(&phi, &tko_oracle(&x, ts), 1e-9));
        assert!(close(&tko_smooth(&phi).unwrap(), &smooth_oracle(&phi), 1e-9));
    }
}

fn periodogram_oracle(x: &[f64], rate: f64) -> Vec<f64> {
    let n = 1024;
    let w: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect();
    let u: f64 = w.iter().map(|v| v * v).sum();
    let mut psd = vec![0.0; n / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + n <= x.len() {
        let seg = &x[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for (k, p) in psd.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in seg.iter().enumerate() {
                let arg = -2.0 * std::f64::consts::PI * (k * i % n) as f64 / n as f64;
                re += (v - mean) * w[i] * arg.cos();
                im += (v - mean) * w[i] * arg.sin();
            }
            let scale = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            *p += scale * (re * re + im * im) / (rate * u);
        }
        count += 1;
        start += n / 2;
    }
    psd.iter().map(|p| p / count as f64).collect()
}

#[test]
fn welch_matches_direct_periodogram_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rate = 48000.0;
    // one second of footstep-like signal: noise bursts plus two resonances
    let x: Vec<f64> = (0..48000)
        .map(|i| {
            let t = i as f64 / rate;
            let env = (-((t * 1.7).fract()) * 30.0).exp();
            let n: f64 = StandardNormal.sample(&mut rng);
            env * (0.6 * (2.0 * std::f64::consts::PI * 900.0 * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 4100.0 * t).sin() + 0.2 * n)
        })
        .collect();
    let got = welch_psd(&x, rate).unwrap();
    let want = periodogram_oracle(&x, rate);
    let peak = want.iter().copied().fold(0.0, f64::max);
    for (g, w) in got.psd.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-6 * w.abs().max(peak * 1e-9), "{g} vs {w}");
    }
}

#[test]
fn centroid_of_delta_spectra() {
    for f0 in [37.0, 100.0, 2500.0, 17000.0] {
        let freqs: Vec<f64> = (0..100).map(|k| k as f64 * f0 / 10.0).collect();
        let mut psd = vec![0.0; 100];
        psd[10] = 3.5;
        let c = spectral_centroid(&PowerSpectrum { freqs, psd }).unwrap();
        assert!((c - f64::ln(f0)).abs() < 1e-9);
    }
}
