//! Assumption checks for the configured problem.
//!
//! The Lipschitz lines are sampled estimates over random pairs near the
//! initial value; they can confirm finiteness, not prove a global bound.

use spde_core::problems::Direction;
use spde_core::spectral::OperatorSpectrum;
use spde_core::{CostLedger, ProblemSpec, RngStream, SpectralVector};

use crate::config::Config;
use crate::CliError;

pub const COMMUTATIVITY_TOL: f64 = 1e-6;
const COMMUTATIVITY_STATES: usize = 50;
const COMMUTATIVITY_MODES: usize = 6;
const LIPSCHITZ_PAIRS: usize = 20;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: impl AsRef<str>) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

// the initial value plus a decaying random perturbation
fn random_state(p: &ProblemSpec, rng: &mut RngStream) -> SpectralVector {
    let mut v = p.initial().clone();
    for (i, c) in v.coeffs_mut().iter_mut().enumerate() {
        *c += 0.5 * rng.standard_normal() / (i + 1) as f64;
    }
    v
}

fn hs_columns(p: &ProblemSpec, v: &SpectralVector) -> spde_core::Result<Vec<SpectralVector>> {
    let mut ledger = CostLedger::default();
    (0..p.k())
        .map(|j| p.apply_b(v, Direction::Mode(j), &mut ledger))
        .collect()
}

fn lipschitz(p: &ProblemSpec, seed: u64) -> spde_core::Result<(f64, f64)> {
    let mut rng = RngStream::new(seed, u64::MAX);
    let (mut lf, mut lb) = (0.0f64, 0.0f64);
    let mut ledger = CostLedger::default();
    for _ in 0..LIPSCHITZ_PAIRS {
        let u = random_state(p, &mut rng);
        let v = random_state(p, &mut rng);
        let d = u.distance(&v);
        if d == 0.0 {
            continue;
        }
        let f = p.apply_f(&u, &mut ledger)?.distance(&p.apply_f(&v, &mut ledger)?);
        let hs: f64 = hs_columns(p, &u)?
            .iter()
            .zip(hs_columns(p, &v)?)
            .map(|(a, b)| a.distance(&b).powi(2))
            .sum();
        lf = lf.max(f / d);
        lb = lb.max(hs.sqrt() / d);
    }
    Ok((lf, lb))
}

fn problem_checks(cfg: &Config, p: &ProblemSpec, r: &mut Report) -> spde_core::Result<()> {
    let (lf, lb) = lipschitz(p, cfg.experiment.seed)?;
    r.line(
        lf.is_finite(),
        "F Lipschitz",
        format!("sampled |F(u) − F(v)| / |u − v| ≤ {lf:.4e}"),
    );
    r.line(
        lb.is_finite(),
        "B Lipschitz",
        format!("sampled |B(u) − B(v)|_HS / |u − v| ≤ {lb:.4e}"),
    );

    let gamma = cfg.problem.gamma;
    let x0 = p.spectrum().sobolev_norm(p.initial(), gamma)?;
    r.line(x0.is_finite(), "initial value", format!("|X_0|_(γ={gamma}) = {x0:.6e}"));

    let bprime = if p.has_analytic_bprime_b() {
        "analytic"
    } else if p.has_bprime_b() {
        "finite differences"
    } else {
        "unavailable"
    };
    r.line(p.has_bprime_b(), "B'B", bprime);

    for &scheme in &cfg.scheme.ids {
        match scheme.check_supported(p) {
            Ok(()) => r.line(true, "scheme", format!("{scheme} applicable")),
            Err(e) => r.line(false, "scheme", e.to_string()),
        }
    }

    let mut rng = RngStream::new(cfg.experiment.seed, u64::MAX - 1);
    let states: Vec<SpectralVector> = (0..COMMUTATIVITY_STATES).map(|_| random_state(p, &mut rng)).collect();
    let residual = p.commutativity_sweep(&states, COMMUTATIVITY_MODES)?;
    r.line(
        residual <= COMMUTATIVITY_TOL,
        "commutativity",
        format!(
            "max residual {residual:.3e} over {COMMUTATIVITY_STATES} states and modes < {COMMUTATIVITY_MODES} (tolerance {COMMUTATIVITY_TOL:e})"
        ),
    );
    Ok(())
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    let settings = cfg.problem.settings();
    let (n, k) = (cfg.problem.n, cfg.problem.k);
    let mut r = Report { failed: 0 };
    println!("validating {} with N={n} K={k}", settings.id);

    let lambdas: Vec<f64> = match &settings.lambdas {
        Some(l) => l.clone(),
        None => OperatorSpectrum::dirichlet_laplacian(n).lambdas().to_vec(),
    };
    let inf = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    r.line(
        !lambdas.is_empty() && inf > 0.0 && inf.is_finite(),
        "spectrum",
        format!("inf λ = {inf:.6e}, need inf λ > 0"),
    );
    if lambdas.len() < n {
        r.line(
            false,
            "spectrum",
            format!("{} eigenvalues given, N = {n} needed", lambdas.len()),
        );
    }

    // load() has already rejected invalid parameters, so this line documents them
    let params = settings.params;
    r.line(
        params.validate().is_ok(),
        "regularity",
        format!(
            "γ={} β={} α={} δ={} θ={} ρ_A={} ρ_Q={} q={}",
            params.gamma,
            params.beta,
            params.alpha,
            params.delta,
            params.theta,
            params.rho_a,
            params.rho_q,
            params.q()
        ),
    );
    r.line(
        params.rho_q > 1.0,
        "trace class",
        format!("η_j = j^-ρ_Q is summable iff ρ_Q > 1, ρ_Q = {}", params.rho_q),
    );

    match settings.instantiate(n, k) {
        Ok(p) => problem_checks(cfg, &p, &mut r)?,
        Err(e) => println!("SKIP problem checks: {e}"),
    }

    if r.failed > 0 {
        return Err(CliError::Numerical(format!("{} check(s) failed", r.failed)));
    }
    println!("all checks passed");
    Ok(())
}
