//! Run configuration: JSON on disk, defaults for every omitted key, dotted
//! `key=value` overrides, and validation before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dsmc::{DsmcConfig, InitialLaw, OuReservoir, ReservoirSpec};
use crate::entropy::{validate_reservoirs, JumpReservoir};
use crate::error::{Error, Result};
use crate::kernel::{AngularKernel, KernelKind, DEFAULT_NODES};
use crate::spectral::{validate_mixture, RadialGrid, DEFAULT_GRID_N, DEFAULT_R_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Ness,
    Evolve,
    Dsmc,
    Entropy,
    Validate,
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Experiment::Ness => "ness",
            Experiment::Evolve => "evolve",
            Experiment::Dsmc => "dsmc",
            Experiment::Entropy => "entropy",
            Experiment::Validate => "validate",
        };
        f.write_str(s)
    }
}

/// Two-temperature reservoir mixture `R = Σ w_i M_{T_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    pub weights: Vec<f64>,
    pub temps: Vec<f64>,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            weights: vec![0.5, 0.5],
            temps: vec![0.2, 7.0 / 15.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub r_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID_N,
            r_max: DEFAULT_R_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub t_end: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub record_every: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_end: 40.0,
            tol: 1e-8,
            max_iter: 1000,
            record_every: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    /// Initial law; the reservoir mixture when absent.
    pub initial: Option<MixtureConfig>,
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuSection {
    pub reservoirs: Vec<OuReservoir>,
    pub collisions: bool,
}

impl Default for OuSection {
    fn default() -> Self {
        Self {
            reservoirs: vec![
                OuReservoir {
                    eta: 1.0,
                    temperature: 0.2,
                },
                OuReservoir {
                    eta: 1.0,
                    temperature: 0.6,
                },
            ],
            collisions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsmcSection {
    pub n_particles: usize,
    pub replicas: usize,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: f64,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialLaw,
    /// Thermostat reservoirs. When absent the run uses the collision
    /// reservoir `R` with coupling `gamma`.
    pub ou: Option<OuSection>,
}

impl Default for DsmcSection {
    fn default() -> Self {
        let d = DsmcConfig::default();
        Self {
            n_particles: d.n_particles,
            replicas: d.replicas,
            dt: d.dt,
            t_end: d.t_end,
            record_every: d.record_every,
            snapshot_times: d.snapshot_times,
            initial: d.initial,
            ou: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub reservoirs: Vec<JumpReservoir>,
    /// Start a relaxation run from `M_T` at this temperature; only the
    /// steady-state ledger is computed when absent.
    pub initial_temperature: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: f64,
    pub density_points: usize,
}

impl Default for EntropySection {
    fn default() -> Self {
        Self {
            reservoirs: vec![
                JumpReservoir {
                    eta: 1.0,
                    temperature: 0.2,
                },
                JumpReservoir {
                    eta: 1.0,
                    temperature: 0.6,
                },
            ],
            initial_temperature: None,
            dt: 0.01,
            t_end: 2.0,
            record_every: 0.05,
            density_points: 2049,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub dsmc_particles: usize,
    pub dsmc_replicas: usize,
    /// Run the suite a second time and compare the written files.
    pub check_determinism: bool,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            dsmc_particles: 100_000,
            dsmc_replicas: 16,
            check_determinism: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub gamma: f64,
    pub kernel: KernelKind,
    pub kernel_nodes: usize,
    pub reservoir: MixtureConfig,
    pub grid: GridConfig,
    pub numerics: Numerics,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub evolve: EvolveSection,
    pub dsmc: DsmcSection,
    pub entropy: EntropySection,
    pub validate: ValidateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Ness,
            gamma: 0.5,
            kernel: KernelKind::Isotropic,
            kernel_nodes: DEFAULT_NODES,
            reservoir: MixtureConfig::default(),
            grid: GridConfig::default(),
            numerics: Numerics::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            evolve: EvolveSection::default(),
            dsmc: DsmcSection::default(),
            entropy: EntropySection::default(),
            validate: ValidateSection::default(),
        }
    }
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("{x} must be positive")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("{} must lie in (0, 1)", self.gamma)));
        }
        AngularKernel::new(self.kernel, self.kernel_nodes)?;
        validate_mixture(&self.reservoir.weights, &self.reservoir.temps)?;
        RadialGrid::new(self.grid.n, self.grid.r_max)?;
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.dt <= crate::evolve::MAX_DT) {
            return Err(Error::config("numerics.dt", format!("{} must lie in (0, 0.25]", n.dt)));
        }
        positive("numerics.t_end", n.t_end)?;
        positive("numerics.tol", n.tol)?;
        positive("numerics.record_every", n.record_every)?;
        if n.max_iter == 0 {
            return Err(Error::config("numerics.max_iter", "must be at least 1"));
        }
        if let Some(init) = &self.evolve.initial {
            validate_mixture(&init.weights, &init.temps)
                .map_err(|e| Error::config("evolve.initial", e.to_string()))?;
        }
        if let Some(s) = self.evolve.snapshot_every {
            positive("evolve.snapshot_every", s)?;
        }
        self.dsmc_config()
            .validate()
            .map_err(|e| prefix(e, "dsmc"))?;
        validate_reservoirs(&self.entropy.reservoirs).map_err(|e| prefix(e, "entropy"))?;
        let e = &self.entropy;
        if !(e.dt > 0.0 && e.dt <= 0.25) {
            return Err(Error::config("entropy.dt", format!("{} must lie in (0, 0.25]", e.dt)));
        }
        positive("entropy.t_end", e.t_end)?;
        positive("entropy.record_every", e.record_every)?;
        if let Some(t) = e.initial_temperature {
            positive("entropy.initial_temperature", t)?;
        }
        if e.density_points < 64 {
            return Err(Error::config("entropy.density_points", "must be at least 64"));
        }
        if self.validate.dsmc_particles < 2 || self.validate.dsmc_replicas < 2 {
            return Err(Error::config(
                "validate",
                "dsmc_particles and dsmc_replicas must be at least 2",
            ));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<AngularKernel> {
        AngularKernel::new(self.kernel, self.kernel_nodes)
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.n, self.grid.r_max)
    }

    /// DSMC settings with the reservoir, kernel and seed taken from the
    /// top-level keys.
    pub fn dsmc_config(&self) -> DsmcConfig {
        let d = &self.dsmc;
        let reservoir = match &d.ou {
            Some(ou) => ReservoirSpec::Ou {
                reservoirs: ou.reservoirs.clone(),
                collisions: ou.collisions,
            },
            None => ReservoirSpec::MixtureCollision {
                weights: self.reservoir.weights.clone(),
                temps: self.reservoir.temps.clone(),
                gamma: self.gamma,
            },
        };
        DsmcConfig {
            n_particles: d.n_particles,
            dt: d.dt,
            t_end: d.t_end,
            seed: self.seed,
            replicas: d.replicas,
            reservoir,
            kernel: self.kernel,
            initial: d.initial.clone(),
            record_every: d.record_every,
            snapshot_times: d.snapshot_times.clone(),
        }
    }
}

fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::Config { key, msg } => Error::config(format!("{section}.{key}"), msg),
        other => Error::config(section, other.to_string()),
    }
}

/// Parse a JSON document into a validated config. Unknown keys and type
/// mismatches are reported with their key path.
pub fn from_value(value: Value) -> Result<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn from_str(text: &str) -> Result<RunConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::config("", format!("malformed JSON: {e}")))?;
    from_value(value)
}

/// Read `path` (or start from an empty object), apply `key=value`
/// overrides, then parse.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config("--config", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config("--config", format!("{}: malformed JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

/// Set a dotted key, e.g. `numerics.dt=0.01`. The value is read as JSON
/// and falls back to a plain string.
pub fn apply_override(value: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config(assignment, "empty key"));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            _ => {
                return Err(Error::config(
                    parts[..i].join("."),
                    "is not an object and cannot hold nested keys",
                ))
            }
        };
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ness_config_fills_defaults() {
        let cfg = from_str(r#"{"experiment": "ness", "gamma": 0.5}"#).unwrap();
        assert_eq!(cfg.experiment, Experiment::Ness);
        assert_eq!(cfg.kernel, KernelKind::Isotropic);
        assert_eq!(cfg.reservoir.temps, vec![0.2, 7.0 / 15.0]);
        assert_eq!(cfg.grid.n, 2048);
        assert_eq!(cfg.grid.r_max, 16.0);
        assert_eq!(cfg.numerics.tol, 1e-8);
    }

    #[test]
    fn gamma_outside_unit_interval_is_named() {
        match from_str(r#"{"gamma": 1.5}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_its_path() {
        match from_str(r#"{"numerics": {"dtt": 0.1}}"#) {
            Err(Error::Config { key, msg }) => {
                assert_eq!(key, "numerics.dtt");
                assert!(msg.contains("unknown field"));
            }
            other => panic!("{other:?}"),
        }
        match from_str(r#"{"grid": {"n": "many"}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "grid.n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echoed_config_round_trips() {
        let cfg = from_str(r#"{"experiment": "dsmc", "kernel": {"kind": "linear", "a": 0.5}}"#).unwrap();
        let echoed = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(from_str(&echoed).unwrap(), cfg);
    }

    #[test]
    fn overrides_set_nested_keys() {
        let mut v = serde_json::json!({"gamma": 0.5});
        apply_override(&mut v, "numerics.dt=0.01").unwrap();
        apply_override(&mut v, "experiment=evolve").unwrap();
        apply_override(&mut v, "dsmc.ou.reservoirs=[{\"eta\":2,\"temperature\":0.4}]").unwrap();
        let cfg = from_value(v).unwrap();
        assert_eq!(cfg.numerics.dt, 0.01);
        assert_eq!(cfg.experiment, Experiment::Evolve);
        assert_eq!(cfg.dsmc.ou.unwrap().reservoirs[0].eta, 2.0);
        let mut v = serde_json::json!({"gamma": 0.5});
        assert!(apply_override(&mut v, "gamma.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn section_errors_carry_the_section() {
        match from_str(r#"{"dsmc": {"dt": 0.5}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "dsmc.dt"),
            other => panic!("{other:?}"),
        }
        match from_str(r#"{"entropy": {"reservoirs": []}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "entropy.reservoirs"),
            other => panic!("{other:?}"),
        }
    }
}
