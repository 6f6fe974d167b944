use std::fs::File;
use std::path::PathBuf;
use std::time::Instant;

use spde_core::convergence::{emit_csv, strong_error, ReferenceScheme};
use spde_core::cost::{effective_order, optimal_allocation, per_step_cost, total_cost};
use spde_core::{simulate_path, NoiseSource, RngStream, SchemeId};

use crate::config::Config;
use crate::CliError;

pub const DEFAULT_OUTPUT: &str = "convergence.csv";

pub fn simulate(cfg: &Config) -> Result<(), CliError> {
    let settings = cfg.problem.settings();
    let (n, k) = (cfg.problem.n, cfg.problem.k);
    let p = settings.instantiate(n, k)?;
    let opts = cfg.step_options();
    for &scheme in &cfg.scheme.ids {
        scheme.check_supported(&p)?;
    }
    println!(
        "problem {} N={n} K={k} T={} seed={} unit_cost={}",
        settings.id, settings.horizon, cfg.experiment.seed, cfg.cost.unit_cost
    );
    for &scheme in &cfg.scheme.ids {
        for &m in &cfg.experiment.m {
            let started = Instant::now();
            let rng = RngStream::new(cfg.experiment.seed, 0);
            let (y, ledger) = simulate_path(&p, scheme, &opts, m, NoiseSource::Rng(rng))?;
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let ledger = ledger.with_unit_cost(cfg.cost.unit_cost);
            let head: Vec<String> = y.coeffs().iter().take(5).map(|c| format!("{c:.12e}")).collect();
            println!("{scheme} M={m}");
            println!("  |Y_M|_H      {:.12e}", y.norm());
            println!("  coeffs[0..5] {}", head.join(" "));
            println!(
                "  ledger       F={} B={} B'={} draws={} cost={}",
                ledger.f_evals,
                ledger.b_evals,
                ledger.bprime_evals,
                ledger.gauss_draws,
                ledger.scalar()
            );
            println!("  wall         {wall_ms:.3} ms");
        }
    }
    Ok(())
}

pub fn convergence(cfg: &Config) -> Result<(), CliError> {
    let out: PathBuf = cfg.experiment.output.clone().unwrap_or_else(|| DEFAULT_OUTPUT.into());
    let ec = cfg.experiment_config();
    ec.validate()?;
    // fail before the expensive part if the CSV cannot be written
    File::create(&out).map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
    let table = strong_error(&ec).inspect_err(|_| {
        let _ = std::fs::remove_file(&out);
    })?;
    let reference = match ec.reference {
        ReferenceScheme::Same => "each scheme itself",
        ReferenceScheme::Mil => "MIL",
        ReferenceScheme::Dfm => "DFM",
        ReferenceScheme::Auto => {
            if ec.problem.instantiate(ec.n_ref, ec.k_ref)?.has_analytic_bprime_b() {
                "MIL"
            } else {
                "DFM"
            }
        }
    };
    println!(
        "strong errors at T={} against a reference with N={} K={} M={} ({reference}), {} paths, seed {}",
        ec.problem.horizon, ec.n_ref, ec.k_ref, ec.m_ref, ec.paths, ec.seed
    );
    println!("errors are measured relative to the reference path, not to the exact solution");
    println!(
        "{:<6}{:>5}{:>5}{:>7}{:>14}{:>14}{:>14}{:>11}",
        "scheme", "N", "K", "M", "rmse", "mc_stderr", "cost", "wall_ms"
    );
    for r in &table.rows {
        let ledger = r.ledger.with_unit_cost(cfg.cost.unit_cost);
        println!(
            "{:<6}{:>5}{:>5}{:>7}{:>14.6e}{:>14.3e}{:>14}{:>11.2}",
            r.scheme.name(),
            r.n,
            r.k,
            r.m,
            r.rmse,
            r.mc_stderr,
            ledger.scalar(),
            r.wall_ms
        );
    }
    for w in &table.warnings {
        println!("warning: {w}");
    }

    let mut rows = table.clone();
    for r in &mut rows.rows {
        r.ledger = r.ledger.with_unit_cost(cfg.cost.unit_cost);
    }
    emit_csv(&rows, &out)?;
    println!("wrote {}", out.display());

    println!("fitted temporal orders (rmse ~ h^slope):");
    for &scheme in &ec.schemes {
        match table.temporal_order(scheme, ec.n_values[0], ec.k_values[0], ec.problem.horizon) {
            Ok(fit) => println!(
                "  {:<5} slope {:.3} ± {:.3}  r² {:.4}",
                scheme.name(),
                fit.slope,
                fit.slope_stderr,
                fit.r_squared
            ),
            Err(e) => println!("  {:<5} no fit: {e}", scheme.name()),
        }
    }
    Ok(())
}

pub fn cost(cfg: &Config) -> Result<(), CliError> {
    let params = cfg.problem.params();
    params.validate()?;
    let q_euler = cfg.scheme.q_euler;
    let c = cfg.cost.unit_cost;
    let (n, k) = (cfg.problem.n, cfg.problem.k);
    println!("cost model: unit cost c = {c} per functional evaluation, 1 per Gaussian draw");
    println!("error constants are taken as 1; exponents are exact, magnitudes are not");

    println!("\nper-step and total counts at N={n} K={k}");
    println!(
        "{:<6}{:>7}{:>10}{:>12}{:>12}{:>8}{:>14}",
        "scheme", "M", "F", "B", "B'", "draws", "cost"
    );
    for scheme in SchemeId::ALL {
        let step = per_step_cost(scheme, n, k).with_unit_cost(c);
        let mut rows = vec![("1".to_string(), step)];
        for &m in &cfg.experiment.m {
            rows.push((m.to_string(), total_cost(scheme, n, k, m)?.with_unit_cost(c)));
        }
        for (m, l) in rows {
            println!(
                "{:<6}{:>7}{:>10}{:>12}{:>12}{:>8}{:>14}",
                scheme.name(),
                m,
                l.f_evals,
                l.b_evals,
                l.bprime_evals,
                l.gauss_draws,
                l.scalar()
            );
        }
    }

    println!("\neffective orders (error ~ cost^-order)");
    for scheme in SchemeId::ALL {
        let order = effective_order(scheme, &params, q_euler)?;
        let note = match scheme {
            SchemeId::Lie | SchemeId::Ees => format!(
                "  (q_euler = {})",
                q_euler.unwrap_or_else(|| spde_core::cost::default_q_euler(&params))
            ),
            _ => String::new(),
        };
        println!("  {:<5} {order:.4}{note}", scheme.name());
    }

    println!("\nallocations (N, K, M) = ceil(budget^exponent)");
    println!(
        "{:<6}{:>10}{:>9}{:>9}{:>9}{:>8}{:>8}{:>8}{:>9}{:>12}",
        "scheme", "budget", "N", "K", "M", "e_N", "e_K", "e_M", "order", "max/min"
    );
    let mut csv_rows = Vec::new();
    for scheme in SchemeId::ALL {
        for &budget in &cfg.cost.budgets {
            let a = optimal_allocation(scheme, &params, q_euler, budget)?;
            let [en, ek, em] = a.exponents;
            let ratio = a.balance_report.ratio();
            println!(
                "{:<6}{:>10.0e}{:>9}{:>9}{:>9}{:>8.4}{:>8.4}{:>8.4}{:>9.4}{:>12.3}",
                scheme.name(),
                budget,
                a.n,
                a.k,
                a.m,
                en,
                ek,
                em,
                a.predicted_error_exponent,
                ratio
            );
            let step = per_step_cost(scheme, a.n, a.k).with_unit_cost(c);
            let total = step.times(a.m as u64);
            csv_rows.push([
                scheme.name().to_string(),
                budget.to_string(),
                a.n.to_string(),
                a.k.to_string(),
                a.m.to_string(),
                en.to_string(),
                ek.to_string(),
                em.to_string(),
                a.predicted_error_exponent.to_string(),
                step.scalar().to_string(),
                total.scalar().to_string(),
                ratio.to_string(),
            ]);
        }
    }

    if let Some(out) = &cfg.experiment.output {
        let io = |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", out.display()));
        let mut w = csv::Writer::from_path(out).map_err(io)?;
        w.write_record([
            "scheme",
            "budget",
            "N",
            "K",
            "M",
            "exp_N",
            "exp_K",
            "exp_M",
            "effective_order",
            "step_cost",
            "total_cost",
            "balance_ratio",
        ])
        .map_err(io)?;
        for r in &csv_rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
        println!("\nwrote {}", out.display());
    }
    Ok(())
}
