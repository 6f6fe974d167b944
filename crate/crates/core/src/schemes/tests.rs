use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::cost::per_step_cost;
use crate::problems::{BuiltinProblem, Coefficients, NemytskijModel, ProblemSettings};
use crate::qwiener::QSpectrum;
use crate::spectral::{OperatorSpectrum, RegularityParams};

fn settings() -> ProblemSettings {
    ProblemSettings::default()
}

fn assert_close(a: &SpectralVector, b: &SpectralVector, tol: f64) {
    assert_eq!(a.dim(), b.dim());
    for (i, (x, y)) in a.coeffs().iter().zip(b.coeffs()).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "coefficient {i}: {x} vs {y} (diff {:e})",
            (x - y).abs()
        );
    }
}

fn random_state(n: usize, rng: &mut RngStream) -> SpectralVector {
    SpectralVector::new((0..n).map(|i| 0.5 * rng.standard_normal() / (i + 1) as f64).collect())
}

/// Pointwise problem on a custom spectrum.
fn pointwise_on(
    lambdas: Vec<f64>,
    k: usize,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    b: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> ProblemSpec {
    let n = lambdas.len();
    let model = NemytskijModel::new(n, k, None, Arc::new(move |_, v| f(v)), Arc::new(move |_, v| b(v)), None).unwrap();
    ProblemSpec::new(
        "custom",
        OperatorSpectrum::new(lambdas, "custom").unwrap(),
        QSpectrum::power_law(k, 2.0).unwrap(),
        RegularityParams::default(),
        1.0,
        ProblemSettings::default().initial(n),
        Arc::new(model),
    )
    .unwrap()
}

/// The scalar SDE `dy = f(y) dt + y dW` written as a one-mode problem.
#[derive(Debug)]
struct ScalarLinear;

impl Coefficients for ScalarLinear {
    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn drift(&self, v: &[f64]) -> crate::Result<Vec<f64>> {
        Ok(vec![v[0].sin()])
    }

    fn diffusion(&self, v: &[f64], u: &[f64]) -> crate::Result<Vec<f64>> {
        Ok(vec![v[0] * u[0]])
    }

    fn bprime_b(&self, v: &[f64], _i: usize, _j: usize, _galerkin: bool) -> Option<crate::Result<Vec<f64>>> {
        Some(Ok(vec![v[0]]))
    }
}

fn increment(p: &ProblemSpec, h: f64, seed: u64) -> NoiseIncrement {
    sample_increment(p.noise(), h, &mut RngStream::new(seed, 0)).unwrap()
}

const OPTS: StepOptions = StepOptions {
    dfmm_bbar: BbarConvention::Aligned,
};

#[test]
fn zero_coefficients_give_pure_semigroup_flow() {
    let p = pointwise_on(
        OperatorSpectrum::dirichlet_laplacian(6).lambdas().to_vec(),
        4,
        |_| 0.0,
        |_| 0.0,
    );
    let y = random_state(6, &mut RngStream::new(1, 0));
    let h = 0.01;
    let dw = increment(&p, h, 2);
    let want = p.spectrum().apply_semigroup(&y, h).unwrap();
    for s in [SchemeId::Ees, SchemeId::Mil, SchemeId::Dfm, SchemeId::Dfmm] {
        assert_close(&step(s, &p, &y, h, &dw, &OPTS).unwrap().state, &want, 1e-15);
    }
    let lie = step_lie(&p, &y, h, &dw).unwrap().state;
    assert_close(&lie, &p.spectrum().apply_resolvent(&y, h).unwrap(), 1e-15);
}

#[test]
fn vanishing_spectrum_gives_euler_step() {
    let p = pointwise_on(vec![1e-12; 4], 4, |v| 1.0 - v / (1.0 + v * v), |_| 0.0);
    let y = random_state(4, &mut RngStream::new(3, 0));
    let h = 0.1;
    let dw = increment(&p, h, 4);
    let mut euler = y.clone();
    euler
        .axpy(h, &p.apply_f(&y, &mut CostLedger::default()).unwrap())
        .unwrap();
    for s in SchemeId::ALL {
        assert_close(&step(s, &p, &y, h, &dw, &OPTS).unwrap().state, &euler, 1e-9);
    }
}

#[test]
fn affine_diffusion_makes_dfm_equal_mil() {
    let p = settings().affine(10, 6, (0.3, -0.5), (0.2, 0.4)).unwrap();
    let mut rng = RngStream::new(5, 0);
    for h in [0.1, 0.01, 0.001] {
        let y = random_state(10, &mut rng);
        let dw = sample_increment(p.noise(), h, &mut rng).unwrap();
        let dfm = step_dfm(&p, &y, h, &dw).unwrap().state;
        let mil = step_mil(&p, &y, h, &dw).unwrap().state;
        assert_close(&dfm, &mil, 1e-12);
    }
}

#[test]
fn affine_diffusion_with_finite_difference_mil() {
    // no analytic derivative: MIL runs on finite differences, which are exact
    // up to rounding for affine coefficients
    let p = settings()
        .pointwise(
            "affine-fd",
            6,
            4,
            Arc::new(|_, v| v),
            Arc::new(|_, v| 0.1 + 0.3 * v),
            None,
        )
        .unwrap();
    let y = random_state(6, &mut RngStream::new(6, 0));
    let dw = increment(&p, 0.05, 7);
    let dfm = step_dfm(&p, &y, 0.05, &dw).unwrap().state;
    let mil = step_mil(&p, &y, 0.05, &dw).unwrap().state;
    assert_close(&dfm, &mil, 1e-8);
}

#[test]
fn scalar_milstein_update() {
    let p = ProblemSpec::new(
        "scalar",
        OperatorSpectrum::new(vec![1e-12], "near zero").unwrap(),
        QSpectrum::new(vec![0.5]).unwrap(),
        RegularityParams::default(),
        1.0,
        SpectralVector::new(vec![0.8]),
        Arc::new(ScalarLinear),
    )
    .unwrap();
    let h = 0.02;
    for seed in 0..5 {
        let dw = increment(&p, h, seed);
        let y = 0.8f64;
        let w = dw.coeffs()[0];
        let want = y + h * y.sin() + y * w + 0.5 * y * (w * w - 0.5 * h);
        let got = step_mil(&p, &SpectralVector::new(vec![y]), h, &dw).unwrap().state;
        assert_abs_diff_eq!(got.coeffs()[0], want, epsilon = 1e-12);
    }
}

#[test]
fn resolvent_examples() {
    let p = pointwise_on(vec![1.0], 1, |_| 0.0, |_| 0.0);
    let y = SpectralVector::new(vec![0.6]);
    let half = step_lie(&p, &y, 1.0, &increment(&p, 1.0, 0)).unwrap().state;
    assert_abs_diff_eq!(half.coeffs()[0], 0.3, epsilon = 1e-15);

    let heat = settings().instantiate(6, 6).unwrap();
    let y = random_state(6, &mut RngStream::new(8, 0));
    let tiny = step_lie(&heat, &y, 1e-12, &increment(&heat, 1e-12, 1)).unwrap().state;
    // the noise term is of size √h
    assert_close(&tiny, &y, 1e-6);
}

#[test]
fn stiff_mode_damping() {
    let p = pointwise_on(vec![1e3], 1, |_| 0.0, |_| 0.0);
    let y = SpectralVector::new(vec![1.0]);
    let dw = increment(&p, 0.1, 0);
    let lie = step_lie(&p, &y, 0.1, &dw).unwrap().state;
    let ees = step_ees(&p, &y, 0.1, &dw).unwrap().state;
    assert_abs_diff_eq!(lie.coeffs()[0], 1.0 / 101.0, epsilon = 1e-15);
    assert_abs_diff_eq!(ees.coeffs()[0], (-100.0f64).exp(), epsilon = 1e-50);
    assert!(lie.is_finite() && ees.is_finite());
}

#[test]
fn second_order_terms_vanish_without_state_dependent_diffusion() {
    let mut rng = RngStream::new(9, 0);
    for b in [0.0, 0.3] {
        let p = pointwise_on(
            OperatorSpectrum::dirichlet_laplacian(5).lambdas().to_vec(),
            5,
            |v| v.cos(),
            move |_| b,
        );
        let y = random_state(5, &mut rng);
        let dw = sample_increment(p.noise(), 0.01, &mut rng).unwrap();
        let ees = step_ees(&p, &y, 0.01, &dw).unwrap().state;
        for s in [SchemeId::Mil, SchemeId::Dfm, SchemeId::Dfmm] {
            assert_close(&step(s, &p, &y, 0.01, &dw, &OPTS).unwrap().state, &ees, 1e-9);
        }
    }
}

#[test]
fn ees_golden_value_on_heatmul() {
    // locked from the first build; guards against silent changes to the
    // quadrature, the noise stream or the step itself
    let p = settings().instantiate(4, 4).unwrap();
    let dw = increment(&p, 0.01, 42);
    let out = step_ees(&p, p.initial(), 0.01, &dw).unwrap().state;
    assert_close(&out, &SpectralVector::new(GOLDEN_EES.to_vec()), 1e-14);
}

const GOLDEN_EES: [f64; 4] = [
    0.33051357278358673,
    0.004741796996567683,
    0.000802721548541914,
    0.00021964554673148192,
];

#[test]
fn ledger_per_step_matches_cost_table() {
    let p = settings().instantiate(8, 8).unwrap();
    let y = p.initial().clone();
    let dw = increment(&p, 0.01, 10);
    for s in SchemeId::ALL {
        let rec = step(s, &p, &y, 0.01, &dw, &OPTS).unwrap();
        assert_eq!(rec.ledger, per_step_cost(s, 8, 8), "{s}");
        assert_abs_diff_eq!(rec.time, 0.01);
    }
    let dfmm = per_step_cost(SchemeId::Dfmm, 8, 8).functional_evals();
    assert!(dfmm <= 4 * 8);
    assert!(per_step_cost(SchemeId::Dfmm, 8, 8).scalar() <= (4 * 8 + 8) as f64);
}

#[test]
fn mil_path_ledger() {
    let p = settings().instantiate(2, 3).unwrap();
    let (_, ledger) = simulate_path(&p, SchemeId::Mil, &OPTS, 4, NoiseSource::Rng(RngStream::new(0, 0))).unwrap();
    assert_eq!(ledger, CostLedger::counts(8, 24, 48, 12));
}

#[test]
fn dead_modes_cost_no_draws() {
    let model = NemytskijModel::new(
        4,
        3,
        None,
        Arc::new(|_, _| 0.0),
        Arc::new(|_, v| 0.1 * v),
        Some(Arc::new(|_, _| 0.1)),
    )
    .unwrap();
    let p = ProblemSpec::new(
        "dead",
        OperatorSpectrum::dirichlet_laplacian(4),
        QSpectrum::new(vec![1.0, 0.5, 0.0]).unwrap(),
        RegularityParams::default(),
        1.0,
        settings().initial(4),
        Arc::new(model),
    )
    .unwrap();
    let (_, ledger) = simulate_path(&p, SchemeId::Dfm, &OPTS, 2, NoiseSource::Rng(RngStream::new(0, 0))).unwrap();
    assert_eq!(ledger, CostLedger::counts(8, 2 * 3 * 2 * 4, 0, 4));
}

#[test]
fn one_step_path_equals_step() {
    let p = settings().instantiate(6, 4).unwrap();
    for s in SchemeId::ALL {
        let mut rng = RngStream::new(11, 3);
        let dw = sample_increment(p.noise(), 1.0, &mut rng.clone()).unwrap();
        let (path, _) = simulate_path(&p, s, &OPTS, 1, NoiseSource::Rng(rng.clone())).unwrap();
        let one = step(s, &p, p.initial(), 1.0, &dw, &OPTS).unwrap().state;
        assert_eq!(path, one, "{s}");
        rng.standard_normal();
    }
}

#[test]
fn injected_zero_noise_without_drift_is_semigroup() {
    // constant diffusion: with ΔW = 0 every noise term and correction vanishes
    let p = pointwise_on(
        OperatorSpectrum::dirichlet_laplacian(5).lambdas().to_vec(),
        3,
        |_| 0.0,
        |_| 0.3,
    );
    let m = 8;
    let h = 1.0 / m as f64;
    let zeros: Vec<_> = (0..m).map(|_| NoiseIncrement::zero(3, h).unwrap()).collect();
    let flow = p.spectrum().apply_semigroup(p.initial(), 1.0).unwrap();
    for s in [SchemeId::Ees, SchemeId::Dfm, SchemeId::Mil, SchemeId::Dfmm] {
        let (y, _) = simulate_path(&p, s, &OPTS, m, NoiseSource::Injected(&zeros)).unwrap();
        assert_close(&y, &flow, 1e-14);
    }
    let (lie, _) = simulate_path(&p, SchemeId::Lie, &OPTS, m, NoiseSource::Injected(&zeros)).unwrap();
    let mut want = p.initial().clone();
    for _ in 0..m {
        want = p.spectrum().apply_resolvent(&want, h).unwrap();
    }
    assert_close(&lie, &want, 1e-15);
}

#[test]
fn injected_increments_are_validated() {
    let p = settings().instantiate(4, 4).unwrap();
    let short: Vec<_> = (0..3).map(|_| NoiseIncrement::zero(4, 0.25).unwrap()).collect();
    assert!(simulate_path(&p, SchemeId::Ees, &OPTS, 4, NoiseSource::Injected(&short)).is_err());
    assert!(simulate_path(&p, SchemeId::Ees, &OPTS, 3, NoiseSource::Injected(&short)).is_err());
    assert!(simulate_path(&p, SchemeId::Ees, &OPTS, 0, NoiseSource::Rng(RngStream::new(0, 0))).is_err());
}

#[test]
fn dfmm_requires_pointwise_problem() {
    let p = ProblemSettings::new(BuiltinProblem::RankOne).instantiate(4, 4).unwrap();
    let err = simulate_path(&p, SchemeId::Dfmm, &OPTS, 2, NoiseSource::Rng(RngStream::new(0, 0))).unwrap_err();
    assert_eq!(err.to_string(), "DFMM requires Nemytskij problem");
    // the general scheme handles it
    assert!(simulate_path(&p, SchemeId::Dfm, &OPTS, 2, NoiseSource::Rng(RngStream::new(0, 0))).is_ok());
}

#[test]
fn mil_without_derivative_is_rejected() {
    let p = settings()
        .pointwise("no-derivative", 4, 4, Arc::new(|_, _| 0.0), Arc::new(|_, v| v), None)
        .unwrap()
        .with_fd_fallback(false);
    let err = simulate_path(&p, SchemeId::Mil, &OPTS, 2, NoiseSource::Rng(RngStream::new(0, 0))).unwrap_err();
    assert!(matches!(err, Error::Unsupported { scheme: "MIL", .. }));
}

#[test]
fn blow_up_reports_step_index() {
    let p = settings()
        .pointwise(
            "explosive",
            4,
            4,
            Arc::new(|_, v| 1e3 * (1.0 + v.abs())),
            Arc::new(|_, _| 0.0),
            None,
        )
        .unwrap();
    let err = simulate_path(&p, SchemeId::Ees, &OPTS, 16, NoiseSource::Rng(RngStream::new(0, 0))).unwrap_err();
    match err {
        Error::BlowUp { step, .. } => assert!(step > 1 && step <= 16, "step {step}"),
        other => panic!("unexpected {other}"),
    }
    let nan = settings()
        .pointwise(
            "nan",
            4,
            4,
            Arc::new(|_, v| if v > 0.0 { f64::NAN } else { 0.0 }),
            Arc::new(|_, _| 0.0),
            None,
        )
        .unwrap();
    let err = simulate_path(&nan, SchemeId::Dfm, &OPTS, 4, NoiseSource::Rng(RngStream::new(0, 0))).unwrap_err();
    assert!(matches!(err, Error::BlowUp { step: 1, .. }), "{err}");
}

#[test]
fn dfmm_conventions_are_close_to_dfm_on_heatmul() {
    let p = settings().instantiate(16, 16).unwrap();
    let mut rng = RngStream::new(12, 0);
    let y = random_state(16, &mut rng);
    let h = 0.01;
    let dw = sample_increment(p.noise(), h, &mut rng).unwrap();
    let dfm = step_dfm(&p, &y, h, &dw).unwrap().state;
    let aligned = step_dfmm(
        &p,
        &y,
        h,
        &dw,
        &StepOptions {
            dfmm_bbar: BbarConvention::Aligned,
        },
    )
    .unwrap()
    .state;
    let plain = step_dfmm(
        &p,
        &y,
        h,
        &dw,
        &StepOptions {
            dfmm_bbar: BbarConvention::Plain,
        },
    )
    .unwrap()
    .state;
    let scale = y.distance(&dfm).max(1e-300);
    // both variants only change the O(h) diagonal correction
    assert!(
        aligned.distance(&dfm) < 0.05 * scale,
        "{} vs {scale}",
        aligned.distance(&dfm)
    );
    assert!(aligned.distance(&dfm) <= plain.distance(&dfm));
}

#[test]
fn rankone_runs_through_every_general_scheme() {
    let p = ProblemSettings::new(BuiltinProblem::RankOne).instantiate(8, 8).unwrap();
    for s in [SchemeId::Ees, SchemeId::Lie, SchemeId::Mil, SchemeId::Dfm] {
        let (y, ledger) = simulate_path(&p, s, &OPTS, 16, NoiseSource::Rng(RngStream::new(1, 1))).unwrap();
        assert!(y.is_finite());
        assert_eq!(ledger, per_step_cost(s, 8, 8).times(16));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paths_are_deterministic(seed in 0u64..1000, path in 0u64..1000, s in 0usize..5) {
        let scheme = SchemeId::ALL[s];
        let p = settings().instantiate(6, 5).unwrap();
        let a = simulate_path(&p, scheme, &OPTS, 8, NoiseSource::Rng(RngStream::new(seed, path))).unwrap();
        let b = simulate_path(&p, scheme, &OPTS, 8, NoiseSource::Rng(RngStream::new(seed, path))).unwrap();
        prop_assert_eq!(a.0.coeffs(), b.0.coeffs());
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn path_ledger_is_m_times_table_row(n in 1usize..9, k in 1usize..9, m in 1usize..6, s in 0usize..5) {
        let scheme = SchemeId::ALL[s];
        let p = settings().instantiate(n, k).unwrap();
        let (_, ledger) = simulate_path(&p, scheme, &OPTS, m, NoiseSource::Rng(RngStream::new(0, 0))).unwrap();
        prop_assert_eq!(ledger, per_step_cost(scheme, n, k).times(m as u64));
    }

    #[test]
    fn scheme_names_round_trip(s in 0usize..5) {
        let id = SchemeId::ALL[s];
        prop_assert_eq!(id.to_string().to_lowercase().parse::<SchemeId>().unwrap(), id);
    }
}
