//! Synthetic walking recordings with designed spectral signatures.
//!
//! Every step is an impact at the subject's cadence (around 1.7 Hz) that
//! rings a pair of damped resonances. Material `i` rings the MIC channel at
//! `320 * 1.2^i` Hz and `2.3x` that, and the ACC channels at `55 * 1.11^i`
//! Hz, so neighbouring materials sit several Mel bands apart. Each step also
//! carries a sub-20 Hz heel-toe pulse on both ACC channels, rearfoot first.
//!
//! Wet sessions shift all resonances down 8% and double their damping.
//! Noisy sessions add loud broadband noise and a wandering interference
//! tone to MIC (ACC gets a tenth as much).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use vibwalk_core::ingest::{write_manifest, write_samples, DatasetManifest, FileRef, Session, SessionFiles, SensorKind, ACC_RATE, MIC_RATE};
use vibwalk_core::{Condition, Material};

use crate::HarnessError;

pub const GAIT_HZ: f64 = 1.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_subjects: u32,
    pub materials: Vec<Material>,
    pub seconds_per_session: f64,
    pub seed: u64,
    /// Conditions recorded for every material; `[Dry]` when empty.
    #[serde(default)]
    pub conditions: Vec<Condition>,
}

impl FixtureSpec {
    pub fn new(n_subjects: u32, materials: &[Material], seconds_per_session: f64, seed: u64) -> Self {
        FixtureSpec { n_subjects, materials: materials.to_vec(), seconds_per_session, seed, conditions: vec![] }
    }

    pub fn with_conditions(mut self, c: &[Condition]) -> Self {
        self.conditions = c.to_vec();
        self
    }

    fn conditions(&self) -> Vec<Condition> {
        if self.conditions.is_empty() {
            vec![Condition::Dry]
        } else {
            self.conditions.clone()
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.n_subjects == 0 {
            return Err(HarnessError::BadSpec("need at least one subject".into()));
        }
        if self.materials.is_empty() {
            return Err(HarnessError::BadSpec("need at least one material".into()));
        }
        if !(self.seconds_per_session >= 2.0) || self.seconds_per_session.fract() != 0.0 {
            return Err(HarnessError::BadSpec(format!("seconds_per_session must be a whole number >= 2, got {}", self.seconds_per_session)));
        }
        let mut m = self.materials.clone();
        m.sort();
        m.dedup();
        if m.len() != self.materials.len() {
            return Err(HarnessError::BadSpec("duplicate material".into()));
        }
        Ok(())
    }
}

pub fn mic_resonance_hz(m: Material) -> f64 {
    320.0 * 1.2f64.powi(m.index() as i32)
}

pub fn acc_resonance_hz(m: Material) -> f64 {
    55.0 * 1.11f64.powi(m.index() as i32)
}

fn stream_seed(seed: u64, subject: u32, m: Material, c: Condition, sensor: SensorKind) -> u64 {
    // splitmix64 over the packed identifiers
    let mut z = seed ^ ((subject as u64) << 40) ^ ((m.index() as u64) << 24) ^ ((c as u64) << 16) ^ sensor as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Subject {
    cadence_hz: f64,
    gain: f64,
    detune: f64,
}

fn subject_traits(seed: u64, id: u32) -> Subject {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, id, Material::Carpet, Condition::Clean, SensorKind::Mic) ^ 0xA5A5);
    Subject { cadence_hz: GAIT_HZ * rng.random_range(0.94..1.06), gain: rng.random_range(0.7..1.3), detune: rng.random_range(0.985..1.015) }
}

/// Sum of damped two-mode rings at each step, over `n` samples.
#[allow(clippy::too_many_arguments)]
fn ring_train(n: usize, rate: f64, steps: &[f64], f0: f64, damping: f64, gain: f64, rng: &mut ChaCha8Rng, out: &mut [f32]) {
    let modes = [(f0, 1.0), (2.3 * f0, 0.55)];
    let tail = (6.0 / damping * rate) as usize;
    for &t0 in steps {
        let amp = gain * rng.random_range(0.8..1.2);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let start = (t0 * rate) as usize;
        for k in 0..tail.min(n.saturating_sub(start)) {
            let t = k as f64 / rate;
            let env = (-damping * t).exp();
            let mut v = 0.0;
            for (f, a) in modes {
                v += a * (std::f64::consts::TAU * f * t + phase).sin();
            }
            out[start + k] += (amp * env * v) as f32;
        }
    }
}

fn gait_pulse(n: usize, rate: f64, steps: &[f64], offset_s: f64, gain: f64, out: &mut [f32]) {
    // half-sine pressure pulse, 0.25 s long
    let len = (0.25 * rate) as usize;
    for &t0 in steps {
        let start = ((t0 + offset_s) * rate) as usize;
        for k in 0..len.min(n.saturating_sub(start)) {
            out[start + k] += (gain * (std::f64::consts::PI * k as f64 / len as f64).sin()) as f32;
        }
    }
}

fn synthesize(spec: &FixtureSpec, subject: u32, m: Material, c: Condition, sensor: SensorKind) -> Vec<f32> {
    let traits = subject_traits(spec.seed, subject);
    let rate = sensor.nominal_rate();
    let n = (spec.seconds_per_session * rate) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, subject, m, c, sensor));
    let period = 1.0 / traits.cadence_hz;
    let mut steps = Vec::new();
    let mut t = rng.random_range(0.0..period);
    while t < spec.seconds_per_session {
        steps.push(t);
        t += period * rng.random_range(0.97..1.03);
    }
    let (shift, damp_mul) = if c == Condition::Wet { (0.92, 2.0) } else { (1.0, 1.0) };
    let mut out = vec![0f32; n];
    let noise = Normal::new(0.0, 0.02).unwrap();
    match sensor {
        SensorKind::Mic => {
            let f0 = mic_resonance_hz(m) * traits.detune * shift;
            ring_train(n, rate, &steps, f0, 40.0 * damp_mul, traits.gain, &mut rng, &mut out);
        }
        SensorKind::AccForefoot | SensorKind::AccRearfoot => {
            let f0 = acc_resonance_hz(m) * traits.detune * shift;
            let offset = if sensor == SensorKind::AccRearfoot { 0.0 } else { 0.12 };
            let shifted: Vec<f64> = steps.iter().map(|s| s + offset).collect();
            ring_train(n, rate, &shifted, f0, 25.0 * damp_mul, traits.gain, &mut rng, &mut out);
            gait_pulse(n, rate, &steps, offset, 0.8 * traits.gain, &mut out);
        }
    }
    let loud: f64 = if c == Condition::Noisy { if sensor == SensorKind::Mic { 1.0 } else { 0.1 } } else { 0.0 };
    let interference = Normal::new(0.0, 0.6 * loud.max(1e-12)).unwrap();
    let f_int: f64 = rng.random_range(500.0..1500.0);
    for (i, v) in out.iter_mut().enumerate() {
        let mut x = noise.sample(&mut rng);
        if loud > 0.0 {
            let t = i as f64 / rate;
            let f = f_int * (1.0 + 0.3 * (0.4 * t).sin());
            x += interference.sample(&mut rng) + loud * 0.8 * (std::f64::consts::TAU * f * t).sin() * (0.5 + 0.5 * (3.1 * t).sin());
        }
        *v += x as f32;
    }
    out
}

/// Writes a fixture dataset and its manifest under `out`; returns the
/// manifest path.
pub fn make_fixtures(spec: &FixtureSpec, out: &Path) -> Result<PathBuf, HarnessError> {
    spec.validate()?;
    std::fs::create_dir_all(out)?;
    let mut sessions = Vec::new();
    for subject in 1..=spec.n_subjects {
        let sdir = format!("s{subject:02}");
        std::fs::create_dir_all(out.join(&sdir))?;
        for &m in &spec.materials {
            for c in spec.conditions() {
                let mut files = SessionFiles::default();
                for sensor in SensorKind::ALL {
                    let rel = PathBuf::from(&sdir).join(format!("{}_{}_{}.f32", m.name(), c.name(), sensor.name()));
                    write_samples(&out.join(&rel), &synthesize(spec, subject, m, c, sensor))?;
                    files.set(sensor, FileRef::Path(rel));
                }
                sessions.push(Session { subject_id: subject, material: m, condition: c, plate: false, duration_s: spec.seconds_per_session, files });
            }
        }
    }
    let manifest = DatasetManifest { root: out.to_path_buf(), subjects: (1..=spec.n_subjects).collect(), sessions };
    let path = out.join("manifest.json");
    write_manifest(&manifest, &path).map_err(|e| HarnessError::BadSpec(e.to_string()))?;
    std::fs::write(out.join("fixture_spec.json"), serde_json::to_string_pretty(spec)?)?;
    Ok(path)
}

/// Six well-separated materials used by the desk-scale runs.
pub const DESK_MATERIALS: [Material; 6] = [Material::Carpet, Material::Sand, Material::Tile, Material::Wood, Material::Asphalt, Material::Grass];

/// Expected sample counts for a fixture session.
pub fn expected_samples(spec: &FixtureSpec) -> (usize, usize) {
    ((spec.seconds_per_session * ACC_RATE) as usize, (spec.seconds_per_session * MIC_RATE) as usize)
}
