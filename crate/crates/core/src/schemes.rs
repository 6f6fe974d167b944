//! One-step integrators and the path driver.
//!
//! Every step maps `(Y, h, ΔW)` to `P_N e^{Ah}(…)` (or the resolvent for the
//! implicit scheme) and returns the functional evaluations it spent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::CostLedger;
use crate::error::{invalid, Error, Result};
use crate::problems::{BbarConvention, Direction, ProblemSpec};
use crate::qwiener::{sample_increment, NoiseIncrement, RngStream};
use crate::spectral::SpectralVector;

/// Norm above which a path is declared blown up.
pub const BLOW_UP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    /// Exponential Euler.
    Ees,
    /// Linear implicit Euler.
    Lie,
    /// Milstein with exact `B'B`.
    Mil,
    /// Derivative-free Milstein.
    Dfm,
    /// Derivative-free Milstein specialized to pointwise coefficients.
    Dfmm,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [Self::Ees, Self::Lie, Self::Mil, Self::Dfm, Self::Dfmm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ees => "EES",
            Self::Lie => "LIE",
            Self::Mil => "MIL",
            Self::Dfm => "DFM",
            Self::Dfmm => "DFMM",
        }
    }

    /// Reject scheme/problem pairs the scheme cannot handle.
    pub fn check_supported(self, p: &ProblemSpec) -> Result<()> {
        match self {
            Self::Dfmm if !p.is_nemytskij() => Err(Error::Unsupported {
                scheme: "DFMM",
                requirement: "Nemytskij problem",
            }),
            Self::Mil if !p.has_bprime_b() => Err(Error::Unsupported {
                scheme: "MIL",
                requirement: "an analytic B'B or the finite-difference fallback",
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                invalid(
                    "scheme",
                    format!("unknown scheme `{s}` (expected ees, lie, mil, dfm or dfmm)"),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepOptions {
    pub dfmm_bbar: BbarConvention,
}

/// Result of one step: the new state, what it cost and the time it advanced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: SpectralVector,
    pub ledger: CostLedger,
    pub time: f64,
}

fn check_step(p: &ProblemSpec, y: &SpectralVector, h: f64, dw: &NoiseIncrement) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    if (dw.h() - h).abs() > 1e-12 * h.max(1.0) {
        return Err(invalid("dW", format!("increment spans {} but the step is {h}", dw.h())));
    }
    if dw.len() != p.k() {
        return Err(Error::DimensionMismatch {
            context: "noise increment",
            expected: p.k(),
            found: dw.len(),
        });
    }
    if y.dim() != p.n() {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: p.n(),
            found: y.dim(),
        });
    }
    Ok(())
}

fn draws(p: &ProblemSpec) -> CostLedger {
    CostLedger::counts(0, 0, 0, p.noise().active() as u64)
}

/// `e^{Ah} x` with a blow-up check on the result.
fn finish(p: &ProblemSpec, x: SpectralVector, h: f64, implicit: bool, ledger: CostLedger) -> Result<StepRecord> {
    let state = if implicit {
        p.spectrum().apply_resolvent(&x, h)?
    } else {
        p.spectrum().apply_semigroup(&x, h)?
    };
    check_blow_up(&state, 0)?;
    Ok(StepRecord { state, ledger, time: h })
}

/// Fail on non-finite coefficients or `||Y|| > 1e12`.
pub fn check_blow_up(y: &SpectralVector, step: usize) -> Result<()> {
    if let Some(i) = y.coeffs().iter().position(|c| !c.is_finite()) {
        return Err(Error::BlowUp {
            step,
            reason: format!("coefficient {i} is not finite"),
        });
    }
    let norm = y.norm();
    if norm > BLOW_UP_NORM {
        return Err(Error::BlowUp {
            step,
            reason: format!("state norm {norm:.3e} exceeds {BLOW_UP_NORM:e}"),
        });
    }
    Ok(())
}

/// `Y + hF(Y) + B(Y)ΔW`, shared by the Euler-type schemes and MIL.
fn euler_part(
    p: &ProblemSpec,
    y: &SpectralVector,
    h: f64,
    dw: &NoiseIncrement,
    ledger: &mut CostLedger,
) -> Result<SpectralVector> {
    let mut x = y.clone();
    x.axpy(h, &p.apply_f(y, ledger)?)?;
    x.axpy(1.0, &p.apply_b(y, Direction::Increment(dw), ledger)?)?;
    Ok(x)
}

/// Exponential Euler `P_N e^{Ah}(Y + hF(Y) + B(Y)ΔW)`.
pub fn step_ees(p: &ProblemSpec, y: &SpectralVector, h: f64, dw: &NoiseIncrement) -> Result<StepRecord> {
    check_step(p, y, h, dw)?;
    let mut ledger = draws(p);
    let x = euler_part(p, y, h, dw, &mut ledger)?;
    finish(p, x, h, false, ledger)
}

/// Linear implicit Euler `(I − Ah)^{-1}(Y + hF(Y) + B(Y)ΔW)`.
pub fn step_lie(p: &ProblemSpec, y: &SpectralVector, h: f64, dw: &NoiseIncrement) -> Result<StepRecord> {
    check_step(p, y, h, dw)?;
    let mut ledger = draws(p);
    let x = euler_part(p, y, h, dw, &mut ledger)?;
    finish(p, x, h, true, ledger)
}

/// Milstein: the exponential Euler argument plus `Σ_ij w_ij B'B(i, j)`.
pub fn step_mil(p: &ProblemSpec, y: &SpectralVector, h: f64, dw: &NoiseIncrement) -> Result<StepRecord> {
    check_step(p, y, h, dw)?;
    SchemeId::Mil.check_supported(p)?;
    let mut ledger = draws(p);
    let mut x = euler_part(p, y, h, dw, &mut ledger)?;
    x.axpy(1.0, &p.milstein_correction(y, dw, &mut ledger)?)?;
    finish(p, x, h, false, ledger)
}

/// The derivative-free stages `g + m` shared by DFM and DFMM, where
/// `g = B(Y)ΔW` and `m = (B(Y + √h/2 g)ΔW − g)/√h`.
fn increment_stages(
    p: &ProblemSpec,
    y: &SpectralVector,
    h: f64,
    dw: &NoiseIncrement,
    pointwise: bool,
    ledger: &mut CostLedger,
) -> Result<SpectralVector> {
    let apply = |v: &SpectralVector, ledger: &mut CostLedger| {
        if pointwise {
            p.apply_b_pointwise(v, dw, ledger)
        } else {
            p.apply_b(v, Direction::Increment(dw), ledger)
        }
    };
    let sqrt_h = h.sqrt();
    let g = apply(y, ledger)?;
    let mut stage = y.clone();
    stage.axpy(0.5 * sqrt_h, &g)?;
    let mut out = apply(&stage, ledger)?;
    // g + (B(S₊)ΔW − g)/√h
    for (o, gi) in out.coeffs_mut().iter_mut().zip(g.coeffs()) {
        *o = gi + (*o - gi) / sqrt_h;
    }
    Ok(out)
}

/// Derivative-free Milstein `P_N e^{Ah}(Y + hF + g + m + c)`.
pub fn step_dfm(p: &ProblemSpec, y: &SpectralVector, h: f64, dw: &NoiseIncrement) -> Result<StepRecord> {
    check_step(p, y, h, dw)?;
    let mut ledger = draws(p);
    let mut x = y.clone();
    x.axpy(h, &p.apply_f(y, &mut ledger)?)?;
    x.axpy(1.0, &increment_stages(p, y, h, dw, false, &mut ledger)?)?;
    let columns = p.diffusion_columns(y)?;
    x.axpy(1.0, &p.derivative_free_correction(y, &columns, h, &mut ledger)?)?;
    finish(p, x, h, false, ledger)
}

/// Pointwise derivative-free Milstein: the correction sum collapses to one
/// grid difference weighted by the chosen convention.
pub fn step_dfmm(
    p: &ProblemSpec,
    y: &SpectralVector,
    h: f64,
    dw: &NoiseIncrement,
    opts: &StepOptions,
) -> Result<StepRecord> {
    check_step(p, y, h, dw)?;
    SchemeId::Dfmm.check_supported(p)?;
    let mut ledger = draws(p);
    let mut x = y.clone();
    x.axpy(h, &p.apply_f(y, &mut ledger)?)?;
    x.axpy(1.0, &increment_stages(p, y, h, dw, true, &mut ledger)?)?;
    x.axpy(1.0, &p.dfmm_correction(y, h, opts.dfmm_bbar, &mut ledger)?)?;
    finish(p, x, h, false, ledger)
}

/// Dispatch one step of `scheme`.
pub fn step(
    scheme: SchemeId,
    p: &ProblemSpec,
    y: &SpectralVector,
    h: f64,
    dw: &NoiseIncrement,
    opts: &StepOptions,
) -> Result<StepRecord> {
    match scheme {
        SchemeId::Ees => step_ees(p, y, h, dw),
        SchemeId::Lie => step_lie(p, y, h, dw),
        SchemeId::Mil => step_mil(p, y, h, dw),
        SchemeId::Dfm => step_dfm(p, y, h, dw),
        SchemeId::Dfmm => step_dfmm(p, y, h, dw, opts),
    }
}

/// Where a path gets its increments.
#[derive(Debug)]
#[allow(clippy::large_enum_variant)] // built once per path, never stored in bulk
pub enum NoiseSource<'a> {
    /// Sample step by step from the stream.
    Rng(RngStream),
    /// Use precomputed increments, one per step.
    Injected(&'a [NoiseIncrement]),
}

/// Run `scheme` from the initial value over `M` uniform steps of `T/M`.
pub fn simulate_path(
    p: &ProblemSpec,
    scheme: SchemeId,
    opts: &StepOptions,
    m: usize,
    noise: NoiseSource<'_>,
) -> Result<(SpectralVector, CostLedger)> {
    simulate_path_observed(p, scheme, opts, m, noise, |_, _| {})
}

/// [`simulate_path`] calling `observe(m, Y_m)` after every step.
pub fn simulate_path_observed(
    p: &ProblemSpec,
    scheme: SchemeId,
    opts: &StepOptions,
    m: usize,
    mut noise: NoiseSource<'_>,
    mut observe: impl FnMut(usize, &SpectralVector),
) -> Result<(SpectralVector, CostLedger)> {
    if m == 0 {
        return Err(invalid("M", "need at least one step"));
    }
    scheme.check_supported(p)?;
    let h = p.horizon() / m as f64;
    if let NoiseSource::Injected(list) = &noise {
        if list.len() != m {
            return Err(invalid(
                "increments",
                format!("expected {m} increments, got {}", list.len()),
            ));
        }
        let span: f64 = list.iter().map(|w| w.h()).sum();
        if (span - p.horizon()).abs() > 1e-9 * p.horizon() {
            return Err(invalid(
                "increments",
                format!("increments span {span}, not T = {}", p.horizon()),
            ));
        }
    }
    let mut y = p.initial().clone();
    let mut ledger = CostLedger::default();
    for step_index in 0..m {
        let sampled;
        let dw = match &mut noise {
            NoiseSource::Rng(rng) => {
                sampled = sample_increment(p.noise(), h, rng)?;
                &sampled
            }
            NoiseSource::Injected(list) => &list[step_index],
        };
        let record = step(scheme, p, &y, h, dw, opts).map_err(|e| at_step(e, step_index + 1))?;
        ledger += record.ledger;
        y = record.state;
        observe(step_index + 1, &y);
    }
    Ok((y, ledger))
}

fn at_step(err: Error, step: usize) -> Error {
    match err {
        Error::BlowUp { reason, .. } => Error::BlowUp { step, reason },
        Error::NonFinite { quantity, index } => Error::BlowUp {
            step,
            reason: format!("non-finite {quantity} at grid point {index}"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests;
