use crate::branchflow::FlowConfig;
use crate::error::{Error, Result};
use crate::orbits::OrbitOptions;
use crate::potential::{builtin, piecewise_polynomial_1d, ModelParams, PotentialModel};
use crate::semiclassics::{Cutoff, Profile, SpectralWindow};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Run configuration, stored as TOML. The README lists the fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub window: WindowSpec,
    pub run: RunSpec,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
}

/// A built-in model by name, or `custom1d` with one interface and a
/// polynomial on each side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub k0: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confinement: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Interface position of `custom1d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<f64>,
    /// Coefficients in powers of `x - interface` for `x < interface`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    Bump,
    Plateau,
    Gaussian,
}

impl ProfileName {
    /// `width` is the half-width of the bump profiles and the standard
    /// deviation of the Gaussian.
    pub fn cutoff(self, center: f64, width: f64) -> Cutoff {
        match self {
            ProfileName::Bump => Cutoff::new(center, width, Profile::Bump),
            ProfileName::Plateau => Cutoff::new(center, width, Profile::PlateauBump),
            ProfileName::Gaussian => Cutoff::gaussian(center, width),
        }
    }
}

fn gaussian() -> ProfileName {
    ProfileName::Gaussian
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub energy_center: f64,
    pub energy_width: f64,
    #[serde(default = "gaussian")]
    pub energy_profile: ProfileName,
    pub time_center: f64,
    pub time_width: f64,
    #[serde(default = "gaussian")]
    pub time_profile: ProfileName,
}

impl WindowSpec {
    pub fn spectral_window(&self) -> SpectralWindow {
        SpectralWindow::new(
            self.energy_profile.cutoff(self.energy_center, self.energy_width),
            self.time_profile.cutoff(self.time_center, self.time_width),
        )
    }

    /// Same shapes with the time window moved to `t0`.
    pub fn recentered(&self, t0: f64) -> SpectralWindow {
        WindowSpec { time_center: t0, ..self.clone() }.spectral_window()
    }
}

fn nine() -> usize {
    9
}

fn margin() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub h: Vec<f64>,
    /// Evaluation energies; defaults to the window center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    pub n_max: usize,
    /// Longest period searched; defaults to the end of the time window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    #[serde(default = "nine")]
    pub cylinder_samples: usize,
    /// Cylinders extend this far beyond the evaluation energies.
    #[serde(default = "margin")]
    pub cylinder_margin: f64,
    #[serde(default)]
    pub seed: u64,
}

fn unit_tol() -> f64 {
    1e-4
}

fn slope_tol() -> f64 {
    0.2
}

fn amplitude_tol() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub newton: f64,
    /// Absolute glancing threshold; defaults to `1e-5 sqrt(E)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glancing: Option<f64>,
    #[serde(default = "unit_tol")]
    pub degeneracy: f64,
    /// Allowed deviation of a fitted exponent from `k0 N`.
    #[serde(default = "slope_tol")]
    pub slope: f64,
    /// Allowed relative deviation of the fitted prefactor.
    #[serde(default = "amplitude_tol")]
    pub amplitude: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub allow_degenerate: bool,
}

fn eight() -> f64 {
    8.0
}

/// Off-spectrum window for the decay test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSpec {
    pub energy_center: f64,
    pub energy_width: f64,
    pub time_center: f64,
    pub time_width: f64,
    #[serde(default = "gaussian")]
    pub profile: ProfileName,
    pub h: Vec<f64>,
    /// Smallest accepted ratio between successive amplitudes.
    #[serde(default = "eight")]
    pub drop: f64,
}

impl PoissonSpec {
    pub fn spectral_window(&self) -> SpectralWindow {
        SpectralWindow::new(
            self.profile.cutoff(self.energy_center, self.energy_width),
            self.profile.cutoff(self.time_center, self.time_width),
        )
    }
}

fn unit_factor() -> f64 {
    1.0
}

fn fifty() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Fault injection: scales every jump before the reflection-law check.
    #[serde(default = "unit_factor")]
    pub corrupt_jump_factor: f64,
    /// Random samples per sampled invariant.
    #[serde(default = "fifty")]
    pub samples: usize,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec { corrupt_jump_factor: 1.0, samples: 50 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive and finite")));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.rtol", t.rtol),
            ("tolerances.atol", t.atol),
            ("tolerances.newton", t.newton),
            ("tolerances.degeneracy", t.degeneracy),
            ("tolerances.slope", t.slope),
            ("tolerances.amplitude", t.amplitude),
            ("window.energy_width", self.window.energy_width),
            ("window.time_width", self.window.time_width),
        ] {
            if !pos(v) {
                return bad(name);
            }
        }
        if let Some(g) = t.glancing {
            if !pos(g) {
                return bad("tolerances.glancing");
            }
        }
        if self.run.h.is_empty() || !self.run.h.iter().all(|&h| pos(h)) {
            return bad("every run.h entry");
        }
        if let Some(l) = self.run.l_max {
            if !pos(l) {
                return bad("run.l_max");
            }
        }
        if self.output.workers == 0 {
            return bad("output.workers");
        }
        if let Some(p) = &self.poisson {
            if p.h.is_empty() || !p.h.iter().all(|&h| pos(h)) || !pos(p.energy_width) || !pos(p.time_width) {
                return bad("poisson widths and h");
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<PotentialModel> {
        let m = &self.model;
        if m.name == "custom1d" {
            let need = |v: &Option<Vec<f64>>, key: &str| {
                v.clone().ok_or_else(|| Error::Config(format!("custom1d requires model.{key}")))
            };
            let (left, right) = (need(&m.left, "left")?, need(&m.right, "right")?);
            let a = m.interface.unwrap_or(0.0);
            let grows = |c: &[f64]| {
                let deg = c.iter().rposition(|&x| x != 0.0);
                deg.is_some_and(|d| d % 2 == 0 && d > 0 && c[d] > 0.0)
            };
            let confining = grows(&left) && grows(&right);
            let mut model = piecewise_polynomial_1d(a, left, right, m.k0)?;
            model.confinement.confining = confining;
            return Ok(model);
        }
        let d = ModelParams::default();
        let p = ModelParams {
            k0: m.k0,
            coefficient: m.coefficient.unwrap_or(d.coefficient),
            omega: m.omega.clone().unwrap_or(d.omega),
            confinement: m.confinement.unwrap_or(d.confinement),
            semi_axes: m.semi_axes.clone().unwrap_or(d.semi_axes),
            dimension: m.dimension.unwrap_or(if m.name.ends_with("2d") { 2 } else { 1 }),
        };
        builtin(&m.name, &p)
    }

    pub fn window(&self) -> SpectralWindow {
        self.window.spectral_window()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.run.energies.clone().unwrap_or_else(|| vec![self.window.energy_center])
    }

    pub fn l_max(&self) -> f64 {
        self.run.l_max.unwrap_or_else(|| self.window().rho_hat.support().1)
    }

    pub fn orbit_options(&self) -> OrbitOptions {
        let t = &self.tolerances;
        OrbitOptions {
            flow: FlowConfig {
                rtol: t.rtol,
                atol: t.atol,
                eps_g: t.glancing,
                ..FlowConfig::default()
            },
            newton_tol: t.newton,
            unit_tol: t.degeneracy,
            ..OrbitOptions::default()
        }
    }

    pub fn check_spec(&self) -> CheckSpec {
        self.check.clone().unwrap_or_default()
    }

    /// Configuration for `model` with default window and tolerances.
    pub fn template(model: &str) -> RunConfig {
        RunConfig {
            model: ModelSpec {
                name: model.into(),
                k0: 2,
                coefficient: None,
                omega: None,
                confinement: None,
                semi_axes: None,
                dimension: None,
                interface: None,
                left: None,
                right: None,
            },
            window: WindowSpec {
                energy_center: 1.0,
                energy_width: 0.3,
                energy_profile: ProfileName::Gaussian,
                time_center: 2.0,
                time_width: 0.07,
                time_profile: ProfileName::Gaussian,
            },
            run: RunSpec {
                h: vec![0.02, 0.01],
                energies: None,
                n_max: 2,
                l_max: None,
                cylinder_samples: 9,
                cylinder_margin: 0.1,
                seed: 0,
            },
            tolerances: Tolerances {
                rtol: 1e-12,
                atol: 1e-13,
                newton: 1e-9,
                glancing: None,
                degeneracy: 1e-4,
                slope: 0.2,
                amplitude: 0.25,
            },
            output: OutputSpec { dir: "out".into(), workers: 1, allow_degenerate: false },
            poisson: None,
            check: None,
        }
    }
}
