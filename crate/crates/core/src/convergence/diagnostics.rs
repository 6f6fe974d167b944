//! Monte-Carlo diagnostics beyond the strong-error table.

use rayon::prelude::*;

use super::fine_increments;
use crate::error::{invalid, Result};
use crate::problems::ProblemSpec;
use crate::qwiener::{coarsen, second_order_weights, NoiseIncrement, QSpectrum, RngStream};
use crate::schemes::{check_blow_up, simulate_path_observed, step_dfm, step_mil, NoiseSource, SchemeId, StepOptions};
use crate::spectral::SpectralVector;

/// Mean squared accumulated defect at one step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectPoint {
    pub h: f64,
    pub m: usize,
    pub mean_sq: f64,
    pub stderr: f64,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let p = values.len() as f64;
    let mean = values.iter().sum::<f64>() / p;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (p - 1.0).max(1.0);
    (mean, (var / p).sqrt())
}

// Σ_l e^{A(T − t_{l+1})} (MIL(Y_l) − DFM(Y_l)) along the DFM path.
fn accumulated_defect(p: &ProblemSpec, noise: &[NoiseIncrement]) -> Result<f64> {
    let h = p.horizon() / noise.len() as f64;
    let mut y = p.initial().clone();
    let mut acc = SpectralVector::zeros(p.n());
    for (l, dw) in noise.iter().enumerate() {
        let mil = step_mil(p, &y, h, dw)?;
        let dfm = step_dfm(p, &y, h, dw)?;
        acc = p.spectrum().apply_semigroup(&acc, h)?;
        acc.axpy(1.0, &mil.state)?;
        acc.axpy(-1.0, &dfm.state)?;
        y = dfm.state;
        check_blow_up(&y, l + 1)?;
    }
    Ok(acc.norm_sq())
}

/// `E ||Σ_l e^{A(T − t_{l+1})}(MIL(Y_l) − DFM(Y_l))||²_H` along DFM paths,
/// one point per step count in `m_values`.
///
/// MIL and DFM see the same increment in every step, and all step counts are
/// driven by one Brownian path per sample, coarsened from the finest level.
pub fn dfm_milstein_defect(p: &ProblemSpec, m_values: &[usize], samples: usize, seed: u64) -> Result<Vec<DefectPoint>> {
    if samples < 2 {
        return Err(invalid("samples", "need at least 2 samples"));
    }
    let m_max = m_values
        .iter()
        .copied()
        .max()
        .ok_or_else(|| invalid("M", "no step counts"))?;
    if let Some(m) = m_values.iter().find(|&&m| m == 0 || m_max % m != 0) {
        return Err(invalid(
            "M",
            format!("{m} does not divide the finest step count {m_max}"),
        ));
    }
    SchemeId::Mil.check_supported(p)?;
    let per_sample: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|id| {
            let fine = fine_increments(p, m_max, seed, id)?;
            m_values
                .iter()
                .map(|&m| accumulated_defect(p, &coarsen(&fine, m, p.k())?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(m_values
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let column: Vec<f64> = per_sample.iter().map(|s| s[i]).collect();
            let (mean_sq, stderr) = mean_stderr(&column);
            DefectPoint {
                h: p.horizon() / m as f64,
                m,
                mean_sq,
                stderr,
            }
        })
        .collect())
}

/// RMS gap between the brute-force iterated integral and its split form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IteratedIntegralPoint {
    pub subdivisions: usize,
    pub rms: f64,
}

/// Scalar check of the splitting `∫_t^{t+h} (W_s − W_t) dW_s = (ΔW² − h)/2`.
///
/// Each sample draws `max(subdivisions)` fine increments over `[0, h]`; the
/// brute-force sum `Σ_k (W_{s_k} − W_0)(W_{s_{k+1}} − W_{s_k})` at a coarser
/// subdivision uses block sums of those increments. The split value comes
/// from [`second_order_weights`] with `K = 1`, `η = 1`.
pub fn iterated_integral_error(
    h: f64,
    subdivisions: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<IteratedIntegralPoint>> {
    let finest = subdivisions
        .iter()
        .copied()
        .max()
        .ok_or_else(|| invalid("subdivisions", "empty list"))?;
    if let Some(s) = subdivisions.iter().find(|&&s| s == 0 || finest % s != 0) {
        return Err(invalid("subdivisions", format!("{s} does not divide {finest}")));
    }
    if !(h > 0.0) || samples == 0 {
        return Err(invalid("h, samples", "need h > 0 and at least one sample"));
    }
    let q = QSpectrum::new(vec![1.0])?;
    let sq_gaps: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = RngStream::new(seed, id);
            let sd = (h / finest as f64).sqrt();
            let fine: Vec<f64> = (0..finest).map(|_| sd * rng.standard_normal()).collect();
            let total: f64 = fine.iter().sum();
            let split = second_order_weights(&NoiseIncrement::new(vec![total], h)?, &q)?.get(0, 0);
            Ok(subdivisions
                .iter()
                .map(|&s| {
                    let mut w = 0.0;
                    let mut brute = 0.0;
                    for block in fine.chunks(finest / s) {
                        let dw: f64 = block.iter().sum();
                        brute += w * dw;
                        w += dw;
                    }
                    (brute - split).powi(2)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(subdivisions
        .iter()
        .enumerate()
        .map(|(i, &s)| IteratedIntegralPoint {
            subdivisions: s,
            rms: (sq_gaps.iter().map(|g| g[i]).sum::<f64>() / samples as f64).sqrt(),
        })
        .collect())
}

/// Step-wise fourth moments of one `M`-step experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProfile {
    /// `E ||Y_m||^4_{H_δ}` for `m = 0..=M`.
    pub moments: Vec<f64>,
}

impl MomentProfile {
    pub fn max(&self) -> f64 {
        self.moments.iter().copied().fold(0.0, f64::max)
    }

    /// Step at which the maximum is attained.
    pub fn argmax(&self) -> usize {
        let max = self.max();
        self.moments.iter().position(|&x| x == max).unwrap_or(0)
    }

    pub fn terminal(&self) -> f64 {
        *self.moments.last().expect("profile includes Y_0")
    }
}

/// `E ||Y_m||^4_{H_δ}` for `0 ≤ m ≤ M` along an `M`-step path, estimated
/// from `paths` independent paths with `δ` from the problem parameters.
/// The initial value `Y_0` is part of the sequence.
pub fn moment_profile(
    p: &ProblemSpec,
    scheme: SchemeId,
    opts: &StepOptions,
    m: usize,
    paths: usize,
    seed: u64,
) -> Result<MomentProfile> {
    if paths == 0 {
        return Err(invalid("paths", "need at least one path"));
    }
    let delta = p.params().delta;
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut moments = vec![0.0; m + 1];
            moments[0] = p.spectrum().sobolev_norm(p.initial(), delta)?.powi(4);
            let mut norm_err = None;
            simulate_path_observed(
                p,
                scheme,
                opts,
                m,
                NoiseSource::Rng(RngStream::new(seed, id)),
                |step, y| match p.spectrum().sobolev_norm(y, delta) {
                    Ok(s) => moments[step] = s.powi(4),
                    Err(e) => norm_err = Some(e),
                },
            )?;
            match norm_err {
                Some(e) => Err(e),
                None => Ok(moments),
            }
        })
        .collect::<Result<_>>()?;
    let moments = (0..=m)
        .map(|step| per_path.iter().map(|v| v[step]).sum::<f64>() / paths as f64)
        .collect();
    Ok(MomentProfile { moments })
}
