use serde::{Deserialize, Serialize};

use super::{AnalysisError, Summary};
use crate::dsp::{filter, welch_psd, BandwidthVariant, FilterKind, SpectralFeatures, MATERIAL_HIGHPASS_HZ};
use crate::ingest::{decode_recording, load_manifest, SegmentIndex, SensorKind, MIC_RATE};
use crate::scalar::Scalar;
use crate::taxonomy::Material;

pub const MIN_GRAIN_SEGMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrainObservation {
    pub material: Material,
    pub diameter_m: f64,
    pub centroid: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    LogDiameter,
    Diameter,
}

impl Abscissa {
    fn x(self, d: f64) -> f64 {
        match self {
            Abscissa::LogDiameter => d.ln(),
            Abscissa::Diameter => d,
        }
    }
}

/// Fits of both features against one abscissa: over every segment and over
/// the per-material means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFits {
    pub abscissa: Abscissa,
    pub centroid: LinearFit,
    pub bandwidth: LinearFit,
    pub centroid_means: LinearFit,
    pub bandwidth_means: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainMeans {
    pub material: Material,
    pub diameter_m: f64,
    pub n: usize,
    pub centroid: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainReport {
    pub variant: BandwidthVariant,
    pub per_material: Vec<GrainMeans>,
    pub log_fit: FeatureFits,
    pub linear_fit: FeatureFits,
    /// Means non-decreasing in diameter.
    pub centroid_monotone: bool,
    pub bandwidth_monotone: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    LinearFit { slope, intercept: my - slope * mx, r_value: pearson(x, y), n: x.len() }
}

/// Welch-PSD spectral features of high-passed MIC segments of grain materials.
/// Segments of other materials are ignored.
pub fn grain_observations<'a, T: Scalar>(
    segments: impl IntoIterator<Item = (Material, &'a [T])>,
    rate: f64,
    variant: BandwidthVariant,
) -> Result<Vec<GrainObservation>, AnalysisError> {
    let mut out = Vec::new();
    for (material, samples) in segments {
        let Some(diameter_m) = material.grain_diameter_m() else { continue };
        let x = filter(samples, FilterKind::HighPass, MATERIAL_HIGHPASS_HZ, rate)?;
        let f = SpectralFeatures::of(&welch_psd(&x, rate)?, variant)?;
        out.push(GrainObservation { material, diameter_m, centroid: f.centroid_log, bandwidth: f.bandwidth_log });
    }
    Ok(out)
}

fn fits(obs: &[GrainObservation], means: &[GrainMeans], abscissa: Abscissa) -> FeatureFits {
    let x: Vec<f64> = obs.iter().map(|o| abscissa.x(o.diameter_m)).collect();
    let c: Vec<f64> = obs.iter().map(|o| o.centroid).collect();
    let b: Vec<f64> = obs.iter().map(|o| o.bandwidth).collect();
    let mx: Vec<f64> = means.iter().map(|m| abscissa.x(m.diameter_m)).collect();
    let mc: Vec<f64> = means.iter().map(|m| m.centroid).collect();
    let mb: Vec<f64> = means.iter().map(|m| m.bandwidth).collect();
    FeatureFits {
        abscissa,
        centroid: linear_fit(&x, &c),
        bandwidth: linear_fit(&x, &b),
        centroid_means: linear_fit(&mx, &mc),
        bandwidth_means: linear_fit(&mx, &mb),
    }
}

/// Linear fits of both features against grain diameter. Requires at least
/// ten observations of each of the four grains.
pub fn grain_regression(obs: &[GrainObservation], variant: BandwidthVariant) -> Result<GrainReport, AnalysisError> {
    let mut per_material = Vec::new();
    for material in Material::GRAINS {
        let diameter_m = material.grain_diameter_m().expect("grain");
        let sel: Vec<&GrainObservation> = obs.iter().filter(|o| o.material == material).collect();
        if sel.len() < MIN_GRAIN_SEGMENTS {
            return Err(AnalysisError::InsufficientData { material, got: sel.len(), needed: MIN_GRAIN_SEGMENTS });
        }
        let n = sel.len() as f64;
        per_material.push(GrainMeans {
            material,
            diameter_m,
            n: sel.len(),
            centroid: sel.iter().map(|o| o.centroid).sum::<f64>() / n,
            bandwidth: sel.iter().map(|o| o.bandwidth).sum::<f64>() / n,
        });
    }
    per_material.sort_by(|a, b| a.diameter_m.total_cmp(&b.diameter_m));
    let monotone = |f: fn(&GrainMeans) -> f64| per_material.windows(2).all(|w| f(&w[1]) >= f(&w[0]));
    Ok(GrainReport {
        variant,
        log_fit: fits(obs, &per_material, Abscissa::LogDiameter),
        linear_fit: fits(obs, &per_material, Abscissa::Diameter),
        centroid_monotone: monotone(|m| m.centroid),
        bandwidth_monotone: monotone(|m| m.bandwidth),
        per_material,
    })
}

/// Runs the regression over every MIC segment of the grain sessions listed
/// in a segment index.
pub fn grain_from_index(index: &SegmentIndex, variant: BandwidthVariant) -> Result<GrainReport, AnalysisError> {
    let manifest = load_manifest(&index.manifest)?;
    let mut obs = Vec::new();
    let mut sessions: Vec<usize> = index
        .segments
        .iter()
        .filter(|s| s.sensor == SensorKind::Mic && s.material.grain_diameter_m().is_some())
        .map(|s| s.session)
        .collect();
    sessions.dedup();
    for si in sessions {
        let rec = decode_recording::<f64>(&manifest, &manifest.sessions[si], SensorKind::Mic)?;
        let starts: Vec<(usize, usize)> = index
            .segments
            .iter()
            .filter(|s| s.session == si && s.sensor == SensorKind::Mic)
            .map(|s| (s.start_index, s.len))
            .collect();
        let material = manifest.sessions[si].material;
        obs.extend(grain_observations(starts.iter().map(|&(s, l)| (material, &rec.samples[s..s + l])), MIC_RATE, variant)?);
    }
    grain_regression(&obs, variant)
}

impl Summary for GrainReport {
    fn summary(&self) -> String {
        let mut s = format!("grain-size regression ({:?} bandwidth)\n", self.variant);
        for m in &self.per_material {
            s += &format!(
                "  {:<14} d={:<7} n={:<5} centroid={:.4} bandwidth={:.4}\n",
                m.material.name(),
                m.diameter_m,
                m.n,
                m.centroid,
                m.bandwidth
            );
        }
        for f in [&self.log_fit, &self.linear_fit] {
            s += &format!(
                "  {:?}: centroid R={:.4} (means {:.4}), bandwidth R={:.4} (means {:.4})\n",
                f.abscissa, f.centroid.r_value, f.centroid_means.r_value, f.bandwidth.r_value, f.bandwidth_means.r_value
            );
        }
        s += &format!("  monotone in diameter: centroid {}, bandwidth {}\n", self.centroid_monotone, self.bandwidth_monotone);
        s
    }
}
