//! Information-cost accounting.
//!
//! Only scalar evaluations of the nonlinear coefficients (each costing `c`)
//! and standard normal draws (each costing one unit) are charged; linear
//! algebra is treated as free. Unknown constants in the asymptotic cost and
//! error expressions are set to one, so exponents are exact while magnitudes
//! hold only up to constants.

use std::ops::{Add, AddAssign};

use crate::error::{invalid, Result};
use crate::schemes::SchemeId;
use crate::spectral::RegularityParams;

/// Additive counters of functional evaluations and Gaussian draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostLedger {
    pub f_evals: u64,
    pub b_evals: u64,
    pub bprime_evals: u64,
    pub gauss_draws: u64,
    /// Cost `c` of one functional evaluation.
    pub unit_cost: f64,
}

impl Default for CostLedger {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl CostLedger {
    pub fn new(unit_cost: f64) -> Self {
        Self {
            f_evals: 0,
            b_evals: 0,
            bprime_evals: 0,
            gauss_draws: 0,
            unit_cost,
        }
    }

    pub fn counts(f_evals: u64, b_evals: u64, bprime_evals: u64, gauss_draws: u64) -> Self {
        Self {
            f_evals,
            b_evals,
            bprime_evals,
            gauss_draws,
            unit_cost: 1.0,
        }
    }

    pub fn with_unit_cost(mut self, unit_cost: f64) -> Self {
        self.unit_cost = unit_cost;
        self
    }

    /// `c · (f + b + b') + draws`.
    pub fn scalar(&self) -> f64 {
        self.unit_cost * (self.f_evals + self.b_evals + self.bprime_evals) as f64 + self.gauss_draws as f64
    }

    pub fn functional_evals(&self) -> u64 {
        self.f_evals + self.b_evals + self.bprime_evals
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.f_evals += other.f_evals;
        self.b_evals += other.b_evals;
        self.bprime_evals += other.bprime_evals;
        self.gauss_draws += other.gauss_draws;
    }

    /// Counts multiplied by `m` (the ledger of `m` identical steps).
    pub fn times(&self, m: u64) -> Self {
        Self {
            f_evals: self.f_evals * m,
            b_evals: self.b_evals * m,
            bprime_evals: self.bprime_evals * m,
            gauss_draws: self.gauss_draws * m,
            unit_cost: self.unit_cost,
        }
    }

    pub fn same_counts(&self, other: &CostLedger) -> bool {
        self.f_evals == other.f_evals
            && self.b_evals == other.b_evals
            && self.bprime_evals == other.bprime_evals
            && self.gauss_draws == other.gauss_draws
    }
}

impl Add for CostLedger {
    type Output = CostLedger;

    fn add(mut self, rhs: CostLedger) -> CostLedger {
        self.merge(&rhs);
        self
    }
}

impl AddAssign for CostLedger {
    fn add_assign(&mut self, rhs: CostLedger) {
        self.merge(&rhs);
    }
}

/// Per-step counts `(F, B, B', draws)` of each scheme with `N` Galerkin and
/// `K` active noise modes.
///
/// DFMM charges one `N`-functional block for each of `f(Y)`, `b(Y)`, the
/// `b` stage in the `ΔW` direction and the single `b` stage of the
/// correction, so one step costs `4N + K`.
pub fn per_step_cost(scheme: SchemeId, n: usize, k: usize) -> CostLedger {
    let (n, k) = (n as u64, k as u64);
    match scheme {
        SchemeId::Mil => CostLedger::counts(n, k * n, k * n * n, k),
        SchemeId::Lie | SchemeId::Ees => CostLedger::counts(n, k * n, 0, k),
        SchemeId::Dfm => CostLedger::counts(n, 3 * k * n, 0, k),
        SchemeId::Dfmm => CostLedger::counts(n, 3 * n, 0, k),
    }
}

/// Ledger of `M` steps.
pub fn total_cost(scheme: SchemeId, n: usize, k: usize, m: usize) -> Result<CostLedger> {
    if n == 0 || k == 0 || m == 0 {
        return Err(invalid("N, K, M", "all resolutions must be at least 1"));
    }
    Ok(per_step_cost(scheme, n, k).times(m as u64))
}

/// Default temporal order assumed for the Euler-type schemes.
pub fn default_q_euler(params: &RegularityParams) -> f64 {
    params.gamma.min(0.5)
}

fn temporal_order(scheme: SchemeId, params: &RegularityParams, q_euler: Option<f64>) -> Result<f64> {
    let q = match scheme {
        SchemeId::Lie | SchemeId::Ees => q_euler.unwrap_or_else(|| default_q_euler(params)),
        _ => params.q(),
    };
    if !(q > 0.0 && q.is_finite()) {
        return Err(invalid("q", format!("temporal order must be positive, got {q}")));
    }
    Ok(q)
}

/// Exponents `(N, K, M)` of the optimal allocation as powers of the budget,
/// and the resulting effective order.
fn allocation_exponents(scheme: SchemeId, params: &RegularityParams, q_euler: Option<f64>) -> Result<([f64; 3], f64)> {
    params.validate()?;
    let q = temporal_order(scheme, params, q_euler)?;
    let a = params.gamma * params.rho_a;
    let b = params.alpha * params.rho_q;
    if !(a > 0.0) {
        return Err(invalid("gamma", "γ ρ_A must be positive"));
    }
    Ok(match scheme {
        SchemeId::Mil => {
            let d = (2.0 * b + a) * q + a * b;
            ([b * q / d, a * q / d, a * b / d], a * b * q / d)
        }
        SchemeId::Dfm | SchemeId::Lie | SchemeId::Ees => {
            let d = (a + b) * q + a * b;
            ([b * q / d, a * q / d, a * b / d], a * b * q / d)
        }
        SchemeId::Dfmm => {
            let mx = a.max(b);
            let s = mx + q;
            ([mx * q / (a * s), mx * q / (b * s), mx / s], mx * q / s)
        }
    })
}

/// Decay exponent of the error against total cost after optimally balancing
/// `N`, `K` and `M`. `q_euler` is only consulted for LIE/EES.
pub fn effective_order(scheme: SchemeId, params: &RegularityParams, q_euler: Option<f64>) -> Result<f64> {
    allocation_exponents(scheme, params, q_euler).map(|(_, order)| order)
}

/// The three error summands `N^{-γρ_A}`, `K^{-αρ_Q}`, `M^{-q}` at an allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub spatial: f64,
    pub noise: f64,
    pub temporal: f64,
}

impl BalanceReport {
    /// Largest over smallest summand.
    pub fn ratio(&self) -> f64 {
        let terms = [self.spatial, self.noise, self.temporal];
        let max = terms.iter().copied().fold(f64::MIN, f64::max);
        let min = terms.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn within_slack(&self) -> bool {
        self.ratio() <= ALLOCATION_SLACK
    }
}

/// Largest resolution an allocation may request.
pub const MAX_RESOLUTION: f64 = 1e15;

/// Allowed max/min spread of the error summands after rounding up.
pub const ALLOCATION_SLACK: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub scheme: SchemeId,
    pub budget: f64,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Exponents of `N`, `K`, `M` as powers of the budget.
    pub exponents: [f64; 3],
    pub predicted_error_exponent: f64,
    pub balance_report: BalanceReport,
}

/// Budget-constrained choice of `(N, K, M)`, each the ceiling of the budget
/// raised to its optimal exponent.
pub fn optimal_allocation(
    scheme: SchemeId,
    params: &RegularityParams,
    q_euler: Option<f64>,
    budget: f64,
) -> Result<AllocationResult> {
    if !(budget >= 1.0 && budget.is_finite()) {
        return Err(invalid("budget", format!("budget must be at least 1, got {budget}")));
    }
    let (exponents, order) = allocation_exponents(scheme, params, q_euler)?;
    let q = temporal_order(scheme, params, q_euler)?;
    let round = |e: f64| {
        let x = (budget.powf(e) - 1e-9).ceil().max(1.0);
        if x > MAX_RESOLUTION {
            return Err(invalid(
                "budget",
                format!("allocation c̄^{e:.3} = {x:.3e} exceeds {MAX_RESOLUTION:e}"),
            ));
        }
        Ok(x as usize)
    };
    let (n, k, m) = (round(exponents[0])?, round(exponents[1])?, round(exponents[2])?);
    let balance_report = BalanceReport {
        spatial: (n as f64).powf(-params.gamma * params.rho_a),
        noise: (k as f64).powf(-params.alpha * params.rho_q),
        temporal: (m as f64).powf(-q),
    };
    Ok(AllocationResult {
        scheme,
        budget,
        n,
        k,
        m,
        exponents,
        predicted_error_exponent: order,
        balance_report,
    })
}
