use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::qwiener::QSpectrum;
use crate::spectral::{OperatorSpectrum, RegularityParams};

/// Least-squares line through `(log x, log err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope; zero for exact fits and for three points
    /// on a line.
    pub slope_stderr: f64,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(invalid(
            "points",
            format!("need at least 3 points, got {}", points.len()),
        ));
    }
    if let Some((x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(invalid(
            "points",
            format!("values must be positive and finite, got ({x}, {y})"),
        ));
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

/// The three terms of the strong-error bound, each already multiplied by `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `C λ_{N+1}^{-γ}`.
    pub spatial: f64,
    /// `C η_{K+1}^{α}`.
    pub noise: f64,
    /// `C M^{-min(2(γ−β), γ)}`.
    pub temporal: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.spatial + self.noise + self.temporal
    }
}

/// Evaluate the bound from the first neglected eigenvalues.
///
/// `lambda_tail` is `λ_{N+1}` and `eta_tail` is `η_{K+1}`. An infinite
/// `lambda_tail` or zero `eta_tail` gives a vanishing term.
pub fn theoretical_bound(params: &RegularityParams, lambda_tail: f64, eta_tail: f64, m: usize, c: f64) -> BoundTerms {
    let q = (2.0 * (params.gamma - params.beta)).min(params.gamma);
    BoundTerms {
        spatial: c * lambda_tail.powf(-params.gamma),
        noise: c * eta_tail.powf(params.alpha),
        temporal: c * (m as f64).powf(-q),
    }
}

/// [`theoretical_bound`] with tails from the built-in laws `λ_i = π² i²` and
/// `η_j = j^{-ρ_Q}`, read off at `N = spectrum.len()` and `K = noise.len()`.
pub fn theoretical_bound_builtin(
    params: &RegularityParams,
    spectrum: &OperatorSpectrum,
    noise: &QSpectrum,
    m: usize,
    c: f64,
) -> BoundTerms {
    let n1 = (spectrum.len() + 1) as f64;
    let k1 = (noise.len() + 1) as f64;
    theoretical_bound(params, PI * PI * n1 * n1, k1.powf(-params.rho_q), m, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_laws() {
        let fit = fit_order(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-14);

        let pts: Vec<_> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h: &f64| (h, h * h)).collect();
        assert_abs_diff_eq!(fit_order(&pts).unwrap().slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn jittered_half_order() {
        let jitter = [0.3, -0.8, 1.0, -0.2, 0.6, -1.0];
        let pts: Vec<_> = jitter
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let h = 0.5f64.powi(i as i32 + 2);
                (h, h.sqrt() * (1.0 + 0.01 * j))
            })
            .collect();
        let fit = fit_order(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05, "{fit:?}");
        assert!(fit.slope_stderr > 0.0);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(fit_order(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_order(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_order(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).is_err());
        assert!(fit_order(&[(2.0, 1.0), (2.0, 3.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn bound_terms() {
        let params = RegularityParams::default();
        let spectrum = OperatorSpectrum::dirichlet_laplacian(9);
        let noise = QSpectrum::power_law(9, 2.0).unwrap();
        let b = theoretical_bound_builtin(&params, &spectrum, &noise, 100, 1.0);
        assert_abs_diff_eq!(b.spatial, 1.0 / (10.0 * PI), epsilon = 1e-14);
        assert_abs_diff_eq!(b.noise, 0.1, epsilon = 1e-14);
        let q = (2.0 * (params.gamma - params.beta)).min(params.gamma);
        assert_abs_diff_eq!(b.temporal, 100f64.powf(-q), epsilon = 1e-14);
        assert_abs_diff_eq!(b.total(), b.spatial + b.noise + b.temporal, epsilon = 0.0);
    }

    #[test]
    fn bound_terms_vanish_in_the_limit() {
        let params = RegularityParams::default();
        let b = theoretical_bound(&params, f64::INFINITY, 0.0, usize::MAX, 1.0);
        assert_eq!(b.spatial, 0.0);
        assert_eq!(b.noise, 0.0);
        assert!(b.temporal < 1e-9);
        let coarse = theoretical_bound(&params, 1e2, 1e-2, 10, 1.0);
        let fine = theoretical_bound(&params, 1e6, 1e-6, 10_000, 1.0);
        assert!(fine.spatial < coarse.spatial && fine.noise < coarse.noise && fine.temporal < coarse.temporal);
    }
}
