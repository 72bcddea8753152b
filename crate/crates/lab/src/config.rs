//! Scenario configuration: parsing, validation and default resolution.

use std::path::{Path, PathBuf};

use manelab_core::spectral::{make_spectrum, Spectrum, SpectrumFamily};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Power,
    Quadratic,
    Explicit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub family: Family,
    #[serde(default)]
    pub params: SpectrumParams,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
}

fn d_n_max() -> usize {
    64
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { family: Family::Linear, params: SpectrumParams::default(), n_max: d_n_max() }
    }
}

/// `tau` is the half period `T` of the drive; the effective half period is
/// `tau * T_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default = "d_one")]
    pub amplitude: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_plateau")]
    pub plateau_fraction: f64,
    #[serde(default = "d_one", rename = "T_scale")]
    pub t_scale: f64,
}

fn d_one() -> f64 {
    1.0
}
fn d_tau() -> f64 {
    4.0
}
fn d_plateau() -> f64 {
    0.9
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig { amplitude: 1.0, tau: d_tau(), plateau_fraction: d_plateau(), t_scale: 1.0 }
    }
}

impl DriveConfig {
    pub fn t_half(&self) -> f64 {
        self.tau * self.t_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    #[serde(rename = "L")]
    pub l: f64,
    pub n0: usize,
    pub n_kick_max: usize,
    pub kappa: f64,
    pub kappa_seg: f64,
    /// Scales the equilibrium heights of the cone attractor.
    pub beta_scale: f64,
    /// Modes carried by the coupled integrator.
    pub n_trunc: usize,
    pub periods: usize,
    pub samples_per_period: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Overrides the calibrated rotation speed.
    pub epsilon: Option<f64>,
    /// Initial separation `amplitude * e_mode`.
    pub initial_mode: usize,
    pub initial_amplitude: f64,
    /// Truncation of the numerical monodromy.
    pub floquet_modes: usize,
    pub floquet_tol: f64,
    pub decay_mode: usize,
    pub decay_iterations: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            l: 2.5,
            n0: 4,
            n_kick_max: 6,
            kappa: 0.03,
            kappa_seg: 0.5,
            beta_scale: 1.0,
            n_trunc: 16,
            periods: 6,
            samples_per_period: 16,
            rtol: 1e-10,
            atol: 1e-12,
            epsilon: None,
            initial_mode: 1,
            initial_amplitude: 1.0,
            floquet_modes: 8,
            floquet_tol: 1e-12,
            decay_mode: 2,
            decay_iterations: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudKind {
    Cube,
    Section4,
    Grid,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub cloud: CloudKind,
    /// Geometric scales `"eps_hi:eps_lo:count"`.
    pub scales: Option<String>,
    pub s_list: Vec<f64>,
    /// Cube levels `n`.
    pub levels: Vec<usize>,
    pub grid_points: usize,
    pub file: Option<PathBuf>,
    /// Modes of the cone attractor.
    pub section4_modes: usize,
    pub disk_spacing: f64,
    pub segment_points: usize,
    pub segment_floor: f64,
    /// Truncation of the smoothness criterion.
    pub smoothness_modes: usize,
    /// Report `D_eps` next to every covering number.
    pub doubling: Option<bool>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            cloud: CloudKind::Cube,
            scales: None,
            s_list: vec![0.0, 1.0, 2.0],
            levels: vec![4, 16, 36, 64],
            grid_points: 20,
            file: None,
            section4_modes: 200,
            disk_spacing: 0.02,
            segment_points: 64,
            segment_floor: 1e-6,
            smoothness_modes: 2000,
            doubling: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusExpectation {
    pub gamma: f64,
    pub trend: String,
}

/// Expected verdict per experiment; `None` means not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    pub gap_check: Option<String>,
    pub floquet_shift: Option<String>,
    pub floquet_decay: Option<String>,
    pub simulate: Option<String>,
    pub modulus: Vec<ModulusExpectation>,
    pub dimension: Option<String>,
}

impl Default for Expectations {
    fn default() -> Self {
        Expectations {
            gap_check: None,
            floquet_shift: Some("shift_pattern".into()),
            floquet_decay: Some("super_exponential".into()),
            simulate: Some("super_exponential".into()),
            modulus: vec![
                ModulusExpectation { gamma: 0.5, trend: "bounded".into() },
                ModulusExpectation { gamma: 0.0, trend: "upward".into() },
            ],
            dimension: None,
        }
    }
}

const GAP_VERDICTS: &[&str] = &["obstruction", "gap_holds", "unbounded_gap", "inconclusive"];
const SHIFT_VERDICTS: &[&str] = &["shift_pattern", "no_pattern"];
const DECAY_VERDICTS: &[&str] = &["super_exponential", "not_certified"];
const PAIR_VERDICTS: &[&str] = &["super_exponential", "exponential_only", "degenerate", "inconclusive"];
const TRENDS: &[&str] = &["bounded", "upward", "empty"];
const DIMENSION_VERDICTS: &[&str] = &["diverging", "finite", "bounded_profile", "unbounded_profile"];

/// Geometric scales parsed from `"a:b:n"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    pub hi: f64,
    pub lo: f64,
    pub count: usize,
}

impl ScaleSpec {
    pub fn parse(s: &str) -> Result<Self, LabError> {
        let bad = |why: &str| LabError::Config(format!("scales \"{s}\": {why}; expected \"eps_hi:eps_lo:count\""));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad("need three fields"));
        }
        let hi: f64 = parts[0].parse().map_err(|_| bad("eps_hi is not a number"))?;
        let lo: f64 = parts[1].parse().map_err(|_| bad("eps_lo is not a number"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("count is not an integer"))?;
        if !(hi > 0.0 && lo > 0.0 && hi.is_finite() && lo.is_finite()) || hi <= lo {
            return Err(bad("need eps_hi > eps_lo > 0"));
        }
        if count < 2 {
            return Err(bad("need at least two scales"));
        }
        Ok(ScaleSpec { hi, lo, count })
    }

    pub fn ln_scales(&self) -> Vec<f64> {
        manelab_core::geometry::geometric_ln_scales(self.hi, self.lo, self.count)
    }
}

fn check_choice(field: &str, value: &Option<String>, allowed: &[&str]) -> Result<(), LabError> {
    match value {
        Some(v) if !allowed.contains(&v.as_str()) => Err(LabError::Config(format!(
            "expect.{field}: unknown verdict \"{v}\" (one of {})",
            allowed.join(", ")
        ))),
        _ => Ok(()),
    }
}

fn positive(field: &str, x: f64) -> Result<(), LabError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{field} must be positive and finite, got {x}")))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Materializes defaults that depend on other fields and validates.
    pub fn resolve(mut self) -> Result<Self, LabError> {
        let p = &mut self.spectrum.params;
        match self.spectrum.family {
            Family::Linear => {
                p.c.get_or_insert(1.0);
            }
            Family::Power => {
                if p.kappa.is_none() {
                    return Err(LabError::Config("spectrum.params.kappa is required for the power family".into()));
                }
            }
            Family::Quadratic => {}
            Family::Explicit => {
                let n = p.values.as_ref().map(Vec::len).ok_or_else(|| {
                    LabError::Config("spectrum.params.values is required for the explicit family".into())
                })?;
                self.spectrum.n_max = n;
            }
        }
        let g = &mut self.geometry;
        if g.scales.is_none() {
            g.scales = match g.cloud {
                CloudKind::Cube => None,
                CloudKind::Section4 => Some("0.3:0.04:8".into()),
                CloudKind::Grid => Some("0.5:0.004:8".into()),
                CloudKind::File => Some("0.5:0.004:8".into()),
            };
        }
        if g.doubling.is_none() {
            g.doubling = Some(matches!(g.cloud, CloudKind::Grid | CloudKind::File));
        }
        if g.cloud == CloudKind::File && g.file.is_none() {
            return Err(LabError::Config("geometry.file is required for a file cloud".into()));
        }
        if self.expect.dimension.is_none() {
            self.expect.dimension = match g.cloud {
                CloudKind::Cube => Some("diverging".into()),
                CloudKind::Grid => Some("finite".into()),
                CloudKind::Section4 => Some("bounded_profile".into()),
                CloudKind::File => None,
            };
        }
        if self.expect.gap_check.is_none() {
            self.expect.gap_check = Some(self.default_gap_expectation()?.into());
        }
        self.output.formats.sort();
        self.output.formats.dedup();
        self.validate()?;
        Ok(self)
    }

    fn default_gap_expectation(&self) -> Result<&'static str, LabError> {
        let spec = self.spectrum()?;
        Ok(match manelab_core::spectral::spectral_gap(&spec) {
            manelab_core::spectral::GapValue::Unbounded => "unbounded_gap",
            manelab_core::spectral::GapValue::Finite(g) if g > 2.0 * self.dynamics.l => "gap_holds",
            _ => "obstruction",
        })
    }

    fn validate(&self) -> Result<(), LabError> {
        if self.spectrum.n_max < 3 {
            return Err(LabError::Config(format!("spectrum.n_max must be at least 3, got {}", self.spectrum.n_max)));
        }
        self.spectrum()?;
        let d = &self.drive;
        positive("drive.amplitude", d.amplitude)?;
        positive("drive.tau", d.tau)?;
        positive("drive.T_scale", d.t_scale)?;
        if !(d.plateau_fraction > 0.5 && d.plateau_fraction < 1.0) {
            return Err(LabError::Config(format!("drive.plateau_fraction must lie in (0.5, 1), got {}", d.plateau_fraction)));
        }
        let y = &self.dynamics;
        positive("dynamics.L", y.l)?;
        positive("dynamics.beta_scale", y.beta_scale)?;
        positive("dynamics.rtol", y.rtol)?;
        positive("dynamics.atol", y.atol)?;
        positive("dynamics.floquet_tol", y.floquet_tol)?;
        if let Some(e) = y.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(LabError::Config(format!("dynamics.epsilon must be finite and nonnegative, got {e}")));
            }
        }
        if y.initial_mode == 0 || y.initial_mode > y.n_trunc {
            return Err(LabError::Config(format!(
                "dynamics.initial_mode must lie in 1..={}, got {}",
                y.n_trunc, y.initial_mode
            )));
        }
        if !y.initial_amplitude.is_finite() {
            return Err(LabError::Config("dynamics.initial_amplitude must be finite".into()));
        }
        if y.periods == 0 || y.samples_per_period == 0 {
            return Err(LabError::Config("dynamics.periods and samples_per_period must be positive".into()));
        }
        if y.decay_iterations < 4 {
            return Err(LabError::Config("dynamics.decay_iterations must be at least 4".into()));
        }
        if y.floquet_modes < 3 {
            return Err(LabError::Config("dynamics.floquet_modes must be at least 3".into()));
        }
        let g = &self.geometry;
        if let Some(s) = &g.scales {
            ScaleSpec::parse(s)?;
        }
        if g.s_list.is_empty() || g.s_list.iter().any(|s| !s.is_finite()) {
            return Err(LabError::Config("geometry.s_list must be a nonempty list of finite numbers".into()));
        }
        if g.cloud == CloudKind::Cube && (g.levels.is_empty() || g.levels.contains(&0)) {
            return Err(LabError::Config("geometry.levels must be a nonempty list of positive levels".into()));
        }
        if g.grid_points < 2 {
            return Err(LabError::Config("geometry.grid_points must be at least 2".into()));
        }
        positive("geometry.disk_spacing", g.disk_spacing)?;
        positive("geometry.segment_floor", g.segment_floor)?;
        if self.output.formats.is_empty() {
            return Err(LabError::Config("output.formats must name at least one format".into()));
        }
        let e = &self.expect;
        check_choice("gap_check", &e.gap_check, GAP_VERDICTS)?;
        check_choice("floquet_shift", &e.floquet_shift, SHIFT_VERDICTS)?;
        check_choice("floquet_decay", &e.floquet_decay, DECAY_VERDICTS)?;
        check_choice("simulate", &e.simulate, PAIR_VERDICTS)?;
        check_choice("dimension", &e.dimension, DIMENSION_VERDICTS)?;
        for m in &e.modulus {
            check_choice("modulus.trend", &Some(m.trend.clone()), TRENDS)?;
            if !(m.gamma >= 0.0 && m.gamma.is_finite()) {
                return Err(LabError::Config(format!("expect.modulus.gamma must be nonnegative, got {}", m.gamma)));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<SpectrumFamily, LabError> {
        let p = &self.spectrum.params;
        Ok(match self.spectrum.family {
            Family::Linear => SpectrumFamily::Linear { c: p.c.unwrap_or(1.0) },
            Family::Power => SpectrumFamily::Power {
                kappa: p.kappa.ok_or_else(|| LabError::Config("spectrum.params.kappa missing".into()))?,
            },
            Family::Quadratic => SpectrumFamily::Quadratic,
            Family::Explicit => SpectrumFamily::Explicit,
        })
    }

    /// The configured spectrum.
    pub fn spectrum(&self) -> Result<Spectrum, LabError> {
        self.spectrum_with(self.spectrum.n_max)
    }

    /// The configured family on at least `n` modes. Explicit lists cannot
    /// be extended.
    pub fn spectrum_with(&self, n: usize) -> Result<Spectrum, LabError> {
        let n = n.max(self.spectrum.n_max);
        let spec = match self.spectrum.family {
            Family::Explicit => {
                let v = self.spectrum.params.values.clone().unwrap_or_default();
                if v.len() < n {
                    return Err(LabError::Config(format!(
                        "experiment needs {n} eigenvalues, the explicit list has {}",
                        v.len()
                    )));
                }
                Spectrum::explicit(v)
            }
            _ => make_spectrum(self.family()?, n),
        };
        spec.map_err(|e| LabError::Config(format!("spectrum: {e}")))
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_resolves_to_defaults() {
        let c = Config::from_json("{}").unwrap().resolve().unwrap();
        assert_eq!(c.spectrum.params.c, Some(1.0));
        assert_eq!(c.expect.gap_check.as_deref(), Some("obstruction"));
        assert_eq!(c.expect.dimension.as_deref(), Some("diverging"));
        assert_eq!(c.drive.t_half(), 4.0);
        let again = Config::from_json(&c.canonical_json()).unwrap().resolve().unwrap();
        assert_eq!(again, c);
        assert_eq!(again.sha256(), c.sha256());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Config::from_json(r#"{"spectrum": {"family": "linear", "nmax": 3}}"#).unwrap_err();
        assert!(e.to_string().contains("nmax"), "{e}");
        assert!(Config::from_json(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn family_specific_checks() {
        let e = Config::from_json(r#"{"spectrum": {"family": "power"}}"#).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("kappa"));
        let c = Config::from_json(r#"{"spectrum": {"family": "explicit", "params": {"values": [1, 2, 4, 5]}}}"#)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.spectrum.n_max, 4);
        assert!(c.spectrum_with(10).is_err());
        let q = Config::from_json(r#"{"spectrum": {"family": "quadratic"}}"#).unwrap().resolve().unwrap();
        assert_eq!(q.expect.gap_check.as_deref(), Some("unbounded_gap"));
        let small = Config::from_json(r#"{"dynamics": {"L": 0.4}}"#).unwrap().resolve().unwrap();
        assert_eq!(small.expect.gap_check.as_deref(), Some("gap_holds"));
    }

    #[test]
    fn scale_specs() {
        let s = ScaleSpec::parse("0.3:0.04:8").unwrap();
        assert_eq!((s.hi, s.lo, s.count), (0.3, 0.04, 8));
        assert_eq!(s.ln_scales().len(), 8);
        assert!(ScaleSpec::parse("0.04:0.3:8").is_err());
        assert!(ScaleSpec::parse("0.3:0.04").is_err());
        assert!(ScaleSpec::parse("a:0.04:3").is_err());
    }

    #[test]
    fn bad_verdict_names_are_rejected() {
        let e = Config::from_json(r#"{"expect": {"simulate": "fast"}}"#).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("expect.simulate"));
    }
}
