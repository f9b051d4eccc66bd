//! Scenario files.
//!
//! A scenario is TOML with a mandatory `schema_version`. Unknown keys are
//! rejected at every level. Syntax and type errors carry the line and
//! column from the TOML parser. Range errors name the offending field,
//! e.g. `setup[1].mass`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use catlift_core::decoherence::{DephasingRate, Gas, MeanSpeed, NoiseModel};
use catlift_core::gie::{self, GravCouplings};
use catlift_core::interferometer::{LengthUnit, TrapSetup};
use catlift_core::units::M_AIR;
use serde::Deserialize;

/// The only schema this build reads.
pub const SCHEMA_VERSION: u32 = 1;

/// The three trap set-ups of the comparison table.
pub const DEFAULT_CONFIG: &str = include_str!("../scenarios/table.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
}

fn field_err(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), reason: reason.into() }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// δx multiplies √2·x0, the phase-space position unit.
    #[default]
    PhaseSpace,
    /// δx multiplies x0.
    GroundStateSpread,
}

impl From<Unit> for LengthUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::PhaseSpace => LengthUnit::PhaseSpace,
            Unit::GroundStateSpread => LengthUnit::GroundStateSpread,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupConfig {
    pub name: Option<String>,
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega: f64,
    /// Initial half-superposition in units of `unit`.
    pub delta_x: f64,
    #[serde(default)]
    pub unit: Unit,
    /// Distance to the partner trap, m.
    pub distance: Option<f64>,
    /// Trap axis relative to the separation, rad.
    #[serde(default)]
    pub theta: f64,
    /// Material density, kg/m³.
    #[serde(default = "default_density")]
    pub density: f64,
    /// Replaces the computed g_G.
    pub g_g: Option<f64>,
    /// Replaces the computed f_G.
    pub f_g: Option<f64>,
}

fn default_density() -> f64 {
    3.5e3
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Inverted-segment duration. Absent means the GIE optimum of each set-up.
    pub t_minus: Option<f64>,
    /// Duration of the cat-creation push.
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Constant force on the mass for `force`, N.
    #[serde(default)]
    pub force: f64,
}

fn default_t0() -> f64 {
    PI
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { t_minus: None, t0: PI, force: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dephasing {
    #[default]
    Stated,
    StrictLindblad,
}

impl From<Dephasing> for DephasingRate {
    fn from(d: Dephasing) -> Self {
        match d {
            Dephasing::Stated => DephasingRate::Stated,
            Dephasing::StrictLindblad => DephasingRate::StrictLindblad,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    #[default]
    Rms,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasConfig {
    /// Pa
    pub pressure: f64,
    /// K
    pub temperature: f64,
    /// kg
    pub molecule_mass: f64,
    pub speed: Speed,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig { pressure: 0.0, temperature: 1.0, molecule_mass: M_AIR, speed: Speed::Rms }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Position decoherence rate in units of ω.
    pub gamma_x: f64,
    /// Qubit dephasing rate, Hz.
    pub gamma_q: f64,
    pub dephasing: Dephasing,
    /// Run-to-run force spread, N.
    pub sigma_f: f64,
    /// Relative switching jitter. Absent means multiples of the bound.
    pub sigma_eps: Option<f64>,
    pub gas: GasConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WignerConfig {
    /// Protocol times after the cat is created.
    pub times: Vec<f64>,
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub points: usize,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig { times: vec![0.0], x: [-6.0, 6.0], p: [-6.0, 6.0], points: 61 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Monte Carlo draws per robustness row.
    pub samples: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// Range of t_− for sweeps.
    pub t_range: [f64; 2],
    pub t_points: usize,
    /// Range searched for the GIE optimum.
    pub optimum_range: [f64; 2],
    /// Optimum search grid points per π.
    pub per_pi: usize,
    /// Extra Γ_q/ω values for `gie`.
    pub gamma_q_ratios: Vec<f64>,
    /// Jitter values for `robustness`, as multiples of the jitter bound.
    pub bound_multiples: Vec<f64>,
    pub wigner: WignerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            samples: 100_000,
            format: Format::Csv,
            out: None,
            t_range: [0.0, 5.0 * PI],
            t_points: 41,
            optimum_range: [2.0 * PI, 6.0 * PI],
            per_pi: 200,
            gamma_q_ratios: vec![0.0],
            bound_multiples: vec![0.5, 1.0, 2.0],
            wigner: WignerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(rename = "setup")]
    pub setups: Vec<SetupConfig>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version { found: cfg.schema_version });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.setups.is_empty() {
            return Err(field_err("setup", "at least one [[setup]] is required"));
        }
        for (i, s) in self.setups.iter().enumerate() {
            let at = |k: &str| format!("setup[{i}].{k}");
            positive(&at("mass"), s.mass)?;
            positive(&at("omega"), s.omega)?;
            non_negative(&at("delta_x"), s.delta_x)?;
            positive(&at("density"), s.density)?;
            finite(&at("theta"), s.theta)?;
            if let Some(d) = s.distance {
                positive(&at("distance"), d)?;
            }
            if let Some(g) = s.g_g {
                finite(&at("g_g"), g)?;
            }
            if let Some(f) = s.f_g {
                finite(&at("f_g"), f)?;
            }
        }
        let p = &self.protocol;
        if let Some(t) = p.t_minus {
            non_negative("protocol.t_minus", t)?;
        }
        non_negative("protocol.t0", p.t0)?;
        finite("protocol.force", p.force)?;
        let n = &self.noise;
        non_negative("noise.gamma_x", n.gamma_x)?;
        non_negative("noise.gamma_q", n.gamma_q)?;
        non_negative("noise.sigma_f", n.sigma_f)?;
        if let Some(s) = n.sigma_eps {
            positive("noise.sigma_eps", s)?;
        }
        non_negative("noise.gas.pressure", n.gas.pressure)?;
        positive("noise.gas.temperature", n.gas.temperature)?;
        positive("noise.gas.molecule_mass", n.gas.molecule_mass)?;
        let r = &self.run;
        if r.samples < 1000 {
            return Err(field_err("run.samples", "must be at least 1000"));
        }
        range("run.t_range", r.t_range)?;
        if r.t_points < 2 {
            return Err(field_err("run.t_points", "must be at least 2"));
        }
        range("run.optimum_range", r.optimum_range)?;
        if r.per_pi < 200 {
            return Err(field_err("run.per_pi", "must be at least 200"));
        }
        for (i, &g) in r.gamma_q_ratios.iter().enumerate() {
            non_negative(&format!("run.gamma_q_ratios[{i}]"), g)?;
        }
        for (i, &k) in r.bound_multiples.iter().enumerate() {
            positive(&format!("run.bound_multiples[{i}]"), k)?;
        }
        for (i, &t) in r.wigner.times.iter().enumerate() {
            non_negative(&format!("run.wigner.times[{i}]"), t)?;
        }
        for (k, v) in [("run.wigner.x", r.wigner.x), ("run.wigner.p", r.wigner.p)] {
            if !(v[0].is_finite() && v[1].is_finite() && v[0] < v[1]) {
                return Err(field_err(k, "expected [low, high] with low < high"));
            }
        }
        if r.wigner.points < 2 {
            return Err(field_err("run.wigner.points", "must be at least 2"));
        }
        Ok(())
    }

    /// Kernel-level description of set-up `i`.
    pub fn trap(&self, i: usize) -> Result<TrapSetup, ConfigError> {
        let s = &self.setups[i];
        let mut t = TrapSetup::new(s.mass, s.omega, s.delta_x)
            .map_err(|e| field_err(format!("setup[{i}]"), e.to_string()))?
            .with_unit(s.unit.into())
            .with_theta(s.theta);
        if let Some(d) = s.distance {
            t = t.with_distance(d);
        }
        Ok(t)
    }

    /// Gravitational couplings of set-up `i` after any overrides.
    pub fn couplings(&self, i: usize) -> Result<GravCouplings, ConfigError> {
        let s = &self.setups[i];
        let trap = self.trap(i)?;
        let mut c = match s.distance {
            Some(_) => gie::grav_couplings(&trap).map_err(|e| field_err(format!("setup[{i}]"), e.to_string()))?,
            None if s.g_g.is_some() => GravCouplings { g: 0.0, f: 0.0, theta: s.theta },
            None => return Err(field_err(format!("setup[{i}].distance"), "required unless g_g is given")),
        };
        if let Some(g) = s.g_g {
            c.g = g;
        }
        if let Some(f) = s.f_g {
            c.f = f;
        }
        Ok(c)
    }

    /// Display name of set-up `i`.
    pub fn setup_name(&self, i: usize) -> String {
        self.setups[i].name.clone().unwrap_or_else(|| format!("setup-{}", i + 1))
    }

    /// Noise model of set-up `i`, with the particle radius from its density.
    pub fn noise_model(&self, i: usize) -> Result<NoiseModel, ConfigError> {
        let s = &self.setups[i];
        let radius = catlift_core::decoherence::sphere_radius(s.mass, s.density)
            .map_err(|e| field_err(format!("setup[{i}]"), e.to_string()))?;
        let g = &self.noise.gas;
        let gas = Gas {
            pressure: g.pressure,
            radius,
            temperature: g.temperature,
            molecule_mass: g.molecule_mass,
            speed: match g.speed {
                Speed::Rms => MeanSpeed::Rms,
                Speed::Mean => MeanSpeed::Mean,
            },
        };
        let n = NoiseModel {
            gamma_x: self.noise.gamma_x,
            gamma_q: self.noise.gamma_q,
            sigma_f: self.noise.sigma_f,
            gas: Some(gas),
        };
        n.validate().map_err(|e| field_err("noise", e.to_string()))?;
        Ok(n)
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be non-negative, got {v}")))
    }
}

fn range(field: &str, r: [f64; 2]) -> Result<(), ConfigError> {
    if r[0] >= 0.0 && r[1].is_finite() && r[0] < r[1] {
        Ok(())
    } else {
        Err(field_err(field, "expected [low, high] with 0 <= low < high"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses() {
        let c = ScenarioConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(c.setups.len(), 3);
        assert_eq!(c.setups[1].unit, Unit::GroundStateSpread);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let text = "schema_version = 1\n[[setup]]\nmass = 1e-14\nomega = 100.0\ndelta_x = 1.0\ncolour = 3\n";
        let e = ScenarioConfig::parse(text).unwrap_err().to_string();
        assert!(e.contains("colour") && e.contains("line 6"), "{e}");
    }

    #[test]
    fn range_errors_name_the_field() {
        let text = "schema_version = 1\n[[setup]]\nmass = -1.0\nomega = 100.0\ndelta_x = 1.0\n";
        let e = ScenarioConfig::parse(text).unwrap_err().to_string();
        assert!(e.starts_with("setup[0].mass"), "{e}");
    }

    #[test]
    fn other_schema_versions_are_rejected() {
        let text = "schema_version = 2\n[[setup]]\nmass = 1.0\nomega = 1.0\ndelta_x = 1.0\n";
        assert!(matches!(ScenarioConfig::parse(text), Err(ConfigError::Version { found: 2 })));
    }
}
