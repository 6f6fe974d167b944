//! TOML configuration with command-line overrides.
//!
//! Every key can be overridden with `--set section.key=value`; the common
//! ones also have dedicated flags. Overrides are applied to the parsed TOML
//! document before it is typed, so both routes share one validation path.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spde_core::convergence::{ExperimentConfig, ReferenceScheme};
use spde_core::problems::{BbarConvention, BuiltinProblem, ProblemSettings};
use spde_core::schemes::{SchemeId, StepOptions};
use spde_core::spectral::RegularityParams;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub id: BuiltinProblem,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    pub rho_a: f64,
    pub rho_q: f64,
    pub initial_amplitude: f64,
    pub grid_points: Option<usize>,
    pub fd_fallback: bool,
    pub lambdas: Option<Vec<f64>>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let s = ProblemSettings::default();
        let p = s.params;
        Self {
            id: s.id,
            n: 8,
            k: 8,
            sigma: s.sigma,
            horizon: s.horizon,
            gamma: p.gamma,
            beta: p.beta,
            alpha: p.alpha,
            delta: p.delta,
            theta: p.theta,
            rho_a: p.rho_a,
            rho_q: p.rho_q,
            initial_amplitude: s.initial_amplitude,
            grid_points: s.grid_points,
            fd_fallback: s.fd_fallback,
            lambdas: None,
        }
    }
}

impl ProblemSection {
    pub fn params(&self) -> RegularityParams {
        RegularityParams {
            gamma: self.gamma,
            beta: self.beta,
            alpha: self.alpha,
            delta: self.delta,
            theta: self.theta,
            rho_a: self.rho_a,
            rho_q: self.rho_q,
        }
    }

    pub fn settings(&self) -> ProblemSettings {
        ProblemSettings {
            id: self.id,
            sigma: self.sigma,
            horizon: self.horizon,
            params: self.params(),
            initial_amplitude: self.initial_amplitude,
            grid_points: self.grid_points,
            fd_fallback: self.fd_fallback,
            lambdas: self.lambdas.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub ids: Vec<SchemeId>,
    pub dfmm_bbar_convention: BbarConvention,
    pub q_euler: Option<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            ids: vec![SchemeId::Dfm],
            dfmm_bbar_convention: BbarConvention::default(),
            q_euler: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    #[serde(rename = "M_ref")]
    pub m_ref: usize,
    #[serde(rename = "N_ref")]
    pub n_ref: Option<usize>,
    #[serde(rename = "K_ref")]
    pub k_ref: Option<usize>,
    pub paths: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub reference: ReferenceScheme,
    pub threads: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            m: vec![8, 16, 32],
            m_ref: 256,
            n_ref: None,
            k_ref: None,
            paths: 100,
            seed: 0,
            output: None,
            reference: ReferenceScheme::Auto,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub budgets: Vec<f64>,
    pub unit_cost: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            budgets: vec![1e3, 1e6],
            unit_cost: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub scheme: SchemeSection,
    pub experiment: ExperimentSection,
    pub cost: CostSection,
}

impl Config {
    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            dfmm_bbar: self.scheme.dfmm_bbar_convention,
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            problem: self.problem.settings(),
            schemes: self.scheme.ids.clone(),
            n_values: vec![self.problem.n],
            k_values: vec![self.problem.k],
            m_values: e.m.clone(),
            n_ref: e.n_ref.unwrap_or(self.problem.n),
            k_ref: e.k_ref.unwrap_or(self.problem.k),
            m_ref: e.m_ref,
            paths: e.paths,
            seed: e.seed,
            reference: e.reference,
            step_options: self.step_options(),
            threads: e.threads,
        }
    }

    /// Re-check the invariants serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        self.problem.settings().validate().map_err(CliError::from_core)?;
        if self.problem.n == 0 || self.problem.k == 0 {
            return Err(CliError::Config("problem.N and problem.K must be positive".into()));
        }
        if self.scheme.ids.is_empty() {
            return Err(CliError::Config("scheme.ids is empty".into()));
        }
        if let Some(q) = self.scheme.q_euler {
            if !(q > 0.0 && q.is_finite()) {
                return Err(CliError::Config(format!("scheme.q_euler must be positive, got {q}")));
            }
        }
        if self.experiment.m.is_empty() || self.experiment.m.contains(&0) {
            return Err(CliError::Config("experiment.M must list positive step counts".into()));
        }
        if !(self.cost.unit_cost > 0.0 && self.cost.unit_cost.is_finite()) {
            return Err(CliError::Config(format!(
                "cost.unit_cost must be positive, got {}",
                self.cost.unit_cost
            )));
        }
        Ok(())
    }
}

/// Command-line values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub schemes: Option<Vec<String>>,
    pub problem: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// `section.key=value` pairs, values in TOML syntax.
    pub set: Vec<String>,
}

fn insert(doc: &mut Table, section: &str, key: &str, value: Value) -> Result<(), CliError> {
    let entry = doc
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("`{section}` is not a section"))),
    }
}

fn parse_value(raw: &str) -> Value {
    // bare words such as `dfm` are taken as strings
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn apply(doc: &mut Table, o: &Overrides) -> Result<(), CliError> {
    let int = |x: usize| Value::Integer(x as i64);
    if let Some(s) = &o.schemes {
        insert(
            doc,
            "scheme",
            "ids",
            Value::Array(s.iter().map(|x| Value::String(x.clone())).collect()),
        )?;
    }
    if let Some(p) = &o.problem {
        insert(doc, "problem", "id", Value::String(p.clone()))?;
    }
    if let Some(n) = o.n {
        insert(doc, "problem", "N", int(n))?;
    }
    if let Some(k) = o.k {
        insert(doc, "problem", "K", int(k))?;
    }
    if let Some(m) = &o.m {
        insert(
            doc,
            "experiment",
            "M",
            Value::Array(m.iter().map(|&x| int(x)).collect()),
        )?;
    }
    if let Some(p) = o.paths {
        insert(doc, "experiment", "paths", int(p))?;
    }
    if let Some(s) = o.seed {
        let seed = i64::try_from(s).map_err(|_| CliError::Config(format!("seed {s} is too large")))?;
        insert(doc, "experiment", "seed", Value::Integer(seed))?;
    }
    if let Some(t) = o.threads {
        insert(doc, "experiment", "threads", int(t))?;
    }
    if let Some(out) = &o.out {
        insert(doc, "experiment", "output", Value::String(out.display().to_string()))?;
    }
    for item in &o.set {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects section.key=value, got `{item}`")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::Config(format!("--set key `{path}` needs a section, e.g. problem.sigma")))?;
        insert(doc, section, key, parse_value(raw.trim()))?;
    }
    Ok(())
}

/// Read `path` (or start from defaults), apply `overrides`, and validate.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Config, CliError> {
    let mut doc = match path {
        None => Table::new(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    apply(&mut doc, overrides)?;
    let mut config: Config = Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("invalid configuration: {}", e.message())))?;
    if config.experiment.threads.is_none() {
        if let Ok(raw) = std::env::var("SPDE_KIT_THREADS") {
            let threads = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("SPDE_KIT_THREADS must be a positive integer, got `{raw}`")))?;
            config.experiment.threads = Some(threads);
        }
    }
    config.validate()?;
    Ok(config)
}
