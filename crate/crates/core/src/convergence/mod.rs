//! Monte-Carlo strong errors with coupled noise, order fits and CSV output.
//!
//! Errors are measured against a reference path at `(N_ref, K_ref, M_ref)`
//! driven by the same Brownian path: the coarse increments of every level
//! are exact block sums of the fine ones. Since no closed-form solutions
//! exist for the built-in problems, the reported errors are Cauchy-style
//! errors relative to that fine reference.

mod csv;
mod diagnostics;
mod fit;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use csv::{emit_csv, parse_csv, CSV_HEADER};
pub use diagnostics::{
    dfm_milstein_defect, iterated_integral_error, moment_profile, DefectPoint, IteratedIntegralPoint, MomentProfile,
};
pub use fit::{fit_order, theoretical_bound, theoretical_bound_builtin, BoundTerms, OrderFit};

use crate::cost::CostLedger;
use crate::error::{invalid, Error, Result};
use crate::problems::{ProblemSettings, ProblemSpec};
use crate::qwiener::{coarsen, sample_increment, NoiseIncrement, RngStream};
use crate::schemes::{simulate_path, NoiseSource, SchemeId, StepOptions};
use crate::spectral::SpectralVector;

/// Largest tolerated fraction of blown-up paths per table row.
pub const MAX_BLOW_UP_FRACTION: f64 = 0.01;

/// Scheme that produces the reference path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceScheme {
    /// MIL when an analytic `B'B` exists, DFM otherwise.
    #[default]
    Auto,
    Mil,
    Dfm,
    /// Each scheme against itself at the reference resolution.
    Same,
}

impl std::str::FromStr for ReferenceScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "mil" => Ok(Self::Mil),
            "dfm" => Ok(Self::Dfm),
            "same" => Ok(Self::Same),
            other => Err(invalid("reference", format!("unknown reference `{other}`"))),
        }
    }
}

/// One strong-error experiment. Rows are produced for every scheme and every
/// combination of `n_values × k_values × m_values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSettings,
    pub schemes: Vec<SchemeId>,
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub n_ref: usize,
    pub k_ref: usize,
    pub m_ref: usize,
    pub paths: usize,
    pub seed: u64,
    pub reference: ReferenceScheme,
    pub step_options: StepOptions,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSettings::default(),
            schemes: vec![SchemeId::Dfm],
            n_values: vec![8],
            k_values: vec![8],
            m_values: vec![8, 16, 32],
            n_ref: 8,
            k_ref: 8,
            m_ref: 256,
            paths: 100,
            seed: 0,
            reference: ReferenceScheme::Auto,
            step_options: StepOptions::default(),
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.paths < 2 {
            return Err(invalid("paths", format!("need at least 2 paths, got {}", self.paths)));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "no scheme selected"));
        }
        for (name, values) in [("N", &self.n_values), ("K", &self.k_values), ("M", &self.m_values)] {
            if values.is_empty() || values.contains(&0) {
                return Err(invalid(
                    "resolutions",
                    format!("{name} values must be a nonempty list of positive integers"),
                ));
            }
        }
        if self.m_ref == 0 || self.n_ref == 0 || self.k_ref == 0 {
            return Err(invalid("reference", "reference resolutions must be positive"));
        }
        if let Some(m) = self.m_values.iter().find(|&&m| !self.m_ref.is_multiple_of(m)) {
            return Err(invalid(
                "M_ref",
                format!("M_ref = {} is not divisible by M = {m}", self.m_ref),
            ));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n > self.n_ref) {
            return Err(invalid("N_ref", format!("N = {n} exceeds N_ref = {}", self.n_ref)));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k > self.k_ref) {
            return Err(invalid("K_ref", format!("K = {k} exceeds K_ref = {}", self.k_ref)));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "need at least one worker thread"));
        }
        Ok(())
    }

    fn levels(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &k in &self.k_values {
                for &m in &self.m_values {
                    out.push((n, k, m));
                }
            }
        }
        out
    }
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub scheme: SchemeId,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Paths that entered the estimate.
    pub paths: usize,
    /// `(E ||X_ref(T) − Y(T)||²_H)^{1/2}`.
    pub rmse: f64,
    /// Standard error of `rmse` (delta method on the mean squared error).
    pub mc_stderr: f64,
    /// Cost of one path.
    pub ledger: CostLedger,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// Blow-up notices for excluded paths.
    pub warnings: Vec<String>,
}

impl ErrorTable {
    /// Rows of `scheme` at fixed `(n, k)`, sorted by `M`.
    pub fn temporal_rows(&self, scheme: SchemeId, n: usize, k: usize) -> Vec<&ErrorRow> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .filter(|r| r.scheme == scheme && r.n == n && r.k == k)
            .collect();
        rows.sort_by_key(|r| r.m);
        rows
    }

    /// Fitted temporal order of `scheme`, regressing rmse on `h = T/M`.
    pub fn temporal_order(&self, scheme: SchemeId, n: usize, k: usize, horizon: f64) -> Result<OrderFit> {
        let pts: Vec<(f64, f64)> = self
            .temporal_rows(scheme, n, k)
            .iter()
            .map(|r| (horizon / r.m as f64, r.rmse))
            .collect();
        fit_order(&pts)
    }

    fn sort(&mut self) {
        self.rows.sort_by_key(|a| (a.scheme as u8, a.m, a.n, a.k));
    }
}

/// `(mean of squares, rmse, stderr of rmse)` of per-path squared errors.
pub fn rmse_with_stderr(squared: &[f64]) -> (f64, f64, f64) {
    let p = squared.len() as f64;
    let mean = squared.iter().sum::<f64>() / p;
    let var = squared.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (p - 1.0).max(1.0);
    let rmse = mean.sqrt();
    let stderr_ms = (var / p).sqrt();
    let stderr = if rmse > 0.0 { stderr_ms / (2.0 * rmse) } else { 0.0 };
    (mean, rmse, stderr)
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Experiment(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct PathOutcome {
    // one entry per (scheme, level); Err holds the blow-up message
    errors: Vec<std::result::Result<(f64, f64, CostLedger), String>>,
}

struct Prepared {
    reference: ProblemSpec,
    levels: Vec<(usize, usize, usize, ProblemSpec)>,
    reference_scheme: Vec<SchemeId>,
}

fn reference_scheme(choice: ReferenceScheme, reference: &ProblemSpec, scheme: SchemeId) -> SchemeId {
    match choice {
        ReferenceScheme::Mil => SchemeId::Mil,
        ReferenceScheme::Dfm => SchemeId::Dfm,
        ReferenceScheme::Same => scheme,
        ReferenceScheme::Auto if reference.has_analytic_bprime_b() => SchemeId::Mil,
        ReferenceScheme::Auto => SchemeId::Dfm,
    }
}

fn prepare(cfg: &ExperimentConfig, family: &dyn Fn(usize, usize) -> Result<ProblemSpec>) -> Result<Prepared> {
    cfg.validate()?;
    let reference = family(cfg.n_ref, cfg.k_ref)?;
    let mut levels = Vec::new();
    for (n, k, m) in cfg.levels() {
        let p = family(n, k)?;
        for &s in &cfg.schemes {
            s.check_supported(&p)?;
        }
        levels.push((n, k, m, p));
    }
    let reference_scheme: Vec<_> = cfg
        .schemes
        .iter()
        .map(|&s| reference_scheme(cfg.reference, &reference, s))
        .collect();
    for &s in &reference_scheme {
        s.check_supported(&reference)?;
    }
    Ok(Prepared {
        reference,
        levels,
        reference_scheme,
    })
}

/// Fine increments of one path at `(K_ref, M_ref)`.
pub fn fine_increments(p: &ProblemSpec, m_ref: usize, seed: u64, path_id: u64) -> Result<Vec<NoiseIncrement>> {
    let mut rng = RngStream::new(seed, path_id);
    let h = p.horizon() / m_ref as f64;
    (0..m_ref).map(|_| sample_increment(p.noise(), h, &mut rng)).collect()
}

fn run_path(cfg: &ExperimentConfig, prep: &Prepared, path_id: u64) -> PathOutcome {
    let fine = match fine_increments(&prep.reference, cfg.m_ref, cfg.seed, path_id) {
        Ok(f) => f,
        Err(e) => {
            let n = cfg.schemes.len() * prep.levels.len();
            return PathOutcome {
                errors: vec![Err(e.to_string()); n],
            };
        }
    };
    let opts = &cfg.step_options;
    // reference terminal values, one per distinct reference scheme
    let mut references: Vec<(SchemeId, std::result::Result<SpectralVector, String>)> = Vec::new();
    for &r in &prep.reference_scheme {
        if references.iter().all(|(s, _)| *s != r) {
            let out = simulate_path(&prep.reference, r, opts, cfg.m_ref, NoiseSource::Injected(&fine))
                .map(|(y, _)| y)
                .map_err(|e| format!("reference {r}: {e}"));
            references.push((r, out));
        }
    }
    let mut coarse_cache: Vec<((usize, usize), Vec<NoiseIncrement>)> = Vec::new();
    let mut errors = Vec::with_capacity(cfg.schemes.len() * prep.levels.len());
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        let reference = &references
            .iter()
            .find(|(s, _)| *s == prep.reference_scheme[si])
            .expect("reference computed")
            .1;
        for (_, k, m, p) in &prep.levels {
            let reference = match reference {
                Ok(r) => r,
                Err(e) => {
                    errors.push(Err(e.clone()));
                    continue;
                }
            };
            let coarse = match coarse_cache.iter().position(|(key, _)| *key == (*k, *m)) {
                Some(i) => &coarse_cache[i].1,
                None => match coarsen(&fine, *m, *k) {
                    Ok(c) => {
                        coarse_cache.push(((*k, *m), c));
                        &coarse_cache.last().expect("just pushed").1
                    }
                    Err(e) => {
                        errors.push(Err(e.to_string()));
                        continue;
                    }
                },
            };
            let start = Instant::now();
            let result = simulate_path(p, scheme, opts, *m, NoiseSource::Injected(coarse));
            let ms = start.elapsed().as_secs_f64() * 1e3;
            errors.push(
                result
                    .map(|(y, ledger)| {
                        let d = y.distance(reference);
                        (d * d, ms, ledger)
                    })
                    .map_err(|e| format!("{scheme} at M = {m}: {e}")),
            );
        }
    }
    PathOutcome { errors }
}

/// Estimate strong errors for every configured scheme and level.
///
/// Paths run in parallel; results are reduced in `path_id` order so the table
/// does not depend on scheduling. Paths that blow up are excluded from their
/// row with a warning; more than 1% of excluded paths fails the experiment.
pub fn strong_error(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    strong_error_with(cfg, &|n, k| cfg.problem.instantiate(n, k))
}

/// [`strong_error`] for a custom problem family; `family(n, k)` builds the
/// member with `n` Galerkin and `k` noise modes. `cfg.problem` still supplies
/// the validated settings but is not instantiated.
pub fn strong_error_with(
    cfg: &ExperimentConfig,
    family: &(dyn Fn(usize, usize) -> Result<ProblemSpec> + Sync),
) -> Result<ErrorTable> {
    let prep = prepare(cfg, family)?;
    let outcomes: Vec<PathOutcome> = with_threads(cfg.threads, || {
        (0..cfg.paths as u64)
            .into_par_iter()
            .map(|id| run_path(cfg, &prep, id))
            .collect()
    })?;

    let mut table = ErrorTable::default();
    let mut idx = 0;
    for &scheme in &cfg.schemes {
        for (n, k, m, _) in &prep.levels {
            let mut squared = Vec::with_capacity(cfg.paths);
            let mut wall = 0.0;
            let mut ledger = CostLedger::default();
            let mut failures = Vec::new();
            for (path_id, outcome) in outcomes.iter().enumerate() {
                match &outcome.errors[idx] {
                    Ok((sq, ms, l)) => {
                        squared.push(*sq);
                        wall += ms;
                        ledger = *l;
                    }
                    Err(msg) => failures.push(format!("path {path_id}: {msg}")),
                }
            }
            idx += 1;
            if failures.len() as f64 > MAX_BLOW_UP_FRACTION * cfg.paths as f64 || squared.len() < 2 {
                return Err(Error::Experiment(format!(
                    "{scheme} at (N, K, M) = ({n}, {k}, {m}): {} of {} paths failed, first: {}",
                    failures.len(),
                    cfg.paths,
                    failures.first().map(String::as_str).unwrap_or("-")
                )));
            }
            table.warnings.extend(failures);
            let (_, rmse, mc_stderr) = rmse_with_stderr(&squared);
            table.rows.push(ErrorRow {
                scheme,
                n: *n,
                k: *k,
                m: *m,
                paths: squared.len(),
                rmse,
                mc_stderr,
                ledger,
                wall_ms: wall,
            });
        }
    }
    table.sort();
    Ok(table)
}
