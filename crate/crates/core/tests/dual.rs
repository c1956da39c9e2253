use mrd_core::closed_form::r_gaussian;
use mrd_core::dual::*;
use mrd_core::ensembles::d1bar_iid;
use mrd_core::solvers::min_d0_iid;
use mrd_core::{kl_to_product, DistortionMatrix, MrdError, Pmf, Rate};
use proptest::prelude::*;

fn binary_model() -> DiscreteModel {
    let u = Pmf::uniform(2);
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    DiscreteModel::new(u.clone(), u, d0, DistortionMatrix::hamming(2)).unwrap()
}

fn gauss() -> GaussianModel {
    GaussianModel::sign(1.0, 1.0).unwrap()
}

/// Hides a model's closed-form `R_max` so the generic extrapolation runs.
struct NoOverride<M>(M);

impl<M: GeneralModel> GeneralModel for NoOverride<M> {
    fn d0_prod(&self) -> f64 {
        self.0.d0_prod()
    }
    fn d1_prod(&self) -> f64 {
        self.0.d1_prod()
    }
    fn d0_min(&self) -> f64 {
        self.0.d0_min()
    }
    fn log_mgf(&self, lambda: f64) -> mrd_core::Result<f64> {
        self.0.log_mgf(lambda)
    }
    fn tilted_d1(&self, lambda: f64) -> mrd_core::Result<f64> {
        self.0.tilted_d1(lambda)
    }
}

fn random_model(seed: &[f64]) -> (Pmf, Pmf, DistortionMatrix, DistortionMatrix) {
    let px = Pmf::from_weights(&seed[0..3].iter().map(|v| v + 0.2).collect::<Vec<_>>()).unwrap();
    let q = Pmf::from_weights(&seed[3..6].iter().map(|v| v + 0.2).collect::<Vec<_>>()).unwrap();
    let d0 = DistortionMatrix::from_fn(3, 3, |x, y| if x == y { 0.0 } else { 0.2 + 2.0 * seed[6 + 3 * x + y] }).unwrap();
    let d1 = DistortionMatrix::from_fn(3, 3, |x, y| seed[15 + 3 * x + y]).unwrap();
    (px, q, d0, d1)
}

#[test]
fn zero_tilt_is_zero() {
    let sampled = SampledModel::gaussian_sign(1.0, 1.0, SamplingBudget { n_outer: 200, n_inner: 50, ..Default::default() }, 3).unwrap();
    let models: Vec<Box<dyn GeneralModel>> = vec![Box::new(binary_model()), Box::new(gauss()), Box::new(sampled)];
    for m in &models {
        assert_eq!(log_mgf(m.as_ref(), 0.0).unwrap(), 0.0);
        assert!(log_mgf(m.as_ref(), 0.5).is_err());
    }
}

#[test]
fn gaussian_log_mgf_closed_form() {
    let v = log_mgf(&gauss(), -0.5).unwrap();
    assert!((v - (-0.5 * 2f64.ln() - 0.25)).abs() < 1e-14);
    assert!((v + 0.596_573_590_279_972_6).abs() < 1e-12);
}

#[test]
fn binary_log_mgf_closed_form() {
    let m = binary_model();
    for l in [-0.1, -1.0, -7.0] {
        let want = 0.5 * ((1.0 + f64::exp(l)) / 2.0).ln();
        assert!((log_mgf(&m, l).unwrap() - want).abs() < 1e-14);
    }
}

#[test]
fn product_level_gives_zero_tilt() {
    let g = gauss();
    let t = solve_lambda_star(&g, 2.0).unwrap();
    assert_eq!(t.lambda_star, 0.0);
    assert_eq!(rate_from_d0(&g, 2.0).unwrap(), Rate::ZERO);
    assert!(matches!(solve_lambda_star(&g, 2.5), Err(MrdError::Domain(_))));
    assert!(matches!(solve_lambda_star(&g, 0.0), Err(MrdError::Domain(_))));
}

#[test]
fn gaussian_exact_tilt_at_minus_one() {
    let g = gauss();
    let d0 = g.log_mgf_derivative(-1.0).unwrap();
    assert!((d0 - 4.0 / 9.0).abs() < 1e-14);
    let t = solve_lambda_star(&g, d0).unwrap();
    assert!((t.lambda_star + 1.0).abs() < 1e-6, "{t:?}");
    assert_eq!(t.representation, TiltRepresentation::Exact);
    assert!((g.tilted_rho(-1.0).unwrap() - 2.0 / 7f64.sqrt()).abs() < 1e-14);
    assert!((g.tilted_d1(-1.0).unwrap() - 0.227_185_525_828_505_03).abs() < 1e-12);
    let r = rate_from_d0(&g, d0).unwrap().in_nats();
    assert!((r - 0.438_195_033_222_943_73).abs() < 1e-9, "{r}");
    let p = mismatched_d1(&g, Rate::nats(r)).unwrap();
    assert!((p.d1 - 0.227_185_525_828_505_03).abs() < 1e-8, "{p:?}");
    assert!((p.d0 - 4.0 / 9.0).abs() < 1e-8);
}

#[test]
fn gaussian_primal_dual_agreement() {
    let g = gauss();
    for i in 0..10 {
        let d0 = 0.05 + (1.9 - 0.05) * i as f64 / 9.0;
        let dual = rate_from_d0(&g, d0).unwrap().in_nats();
        let primal = r_gaussian(d0, 1.0, 1.0).unwrap();
        assert!((dual - primal).abs() < 1e-6, "D0={d0}: {dual} vs {primal}");
    }
}

#[test]
fn matched_tilt_returns_d0() {
    let g = GaussianModel::quadratic(1.0, 2.0).unwrap();
    let p = mismatched_d1(&g, Rate::bits(0.7)).unwrap();
    assert!((p.d1 - p.d0).abs() < 1e-12);
}

#[test]
fn binary_rate_at_reference_d0() {
    let m = binary_model();
    let r = rate_from_d0(&m, 0.055_013_932_219_179_8).unwrap();
    assert!((r.in_bits() - 0.25).abs() < 1e-8, "{}", r.in_bits());
    assert!((r_max(&m).unwrap().in_bits() - 0.5).abs() < 1e-14);
    assert!(mismatched_d1(&m, Rate::bits(0.6)).is_err());
    let p = mismatched_d1(&m, Rate::bits(0.25)).unwrap();
    assert!((p.d1 - 0.305_013_932_219_179_8).abs() < 1e-8, "{p:?}");
}

#[test]
fn generic_r_max_matches_closed_form() {
    let m = binary_model();
    let generic = r_max(&NoOverride(binary_model())).unwrap();
    assert!((generic.in_nats() - r_max(&m).unwrap().in_nats()).abs() < 1e-6, "{generic:?}");
    assert!(r_max(&NoOverride(gauss())).unwrap().in_nats().is_infinite());
    assert!(r_max(&gauss()).unwrap().in_nats().is_infinite());
}

#[test]
fn sampled_gaussian_tracks_exact() {
    let budget = SamplingBudget { n_outer: 4000, n_inner: 800, ..Default::default() };
    let s = SampledModel::gaussian_sign(1.0, 1.0, budget, 11).unwrap();
    let g = gauss();
    let se = s.log_mgf_std_error(-1.0).unwrap();
    assert!((s.log_mgf(-1.0).unwrap() - g.log_mgf(-1.0).unwrap()).abs() < 6.0 * se + 0.01);
    let p = mismatched_d1(&s, Rate::nats(0.438_195_033_222_943_73)).unwrap();
    assert!((p.d1 - 0.227_185_525_828_505_03).abs() < 0.02, "{p:?}");
    let t = solve_lambda_star(&s, p.d0).unwrap();
    assert_eq!(t.representation, TiltRepresentation::Weighted);
    assert!((t.d0_value - p.d0).abs() < 1e-6);
    let tight = SampledModel::gaussian_sign(1.0, 1.0, SamplingBudget { n_outer: 50, n_inner: 20, max_std_error: 1e-6 }, 1).unwrap();
    assert!(matches!(tight.log_mgf(-1.0), Err(MrdError::SamplingBudget(_))));
}

#[test]
fn sampled_is_deterministic() {
    let b = SamplingBudget { n_outer: 300, n_inner: 100, ..Default::default() };
    let a = SampledModel::gaussian_sign(1.0, 1.0, b, 5).unwrap();
    let c = SampledModel::gaussian_sign(1.0, 1.0, b, 5).unwrap();
    assert_eq!(a.log_mgf(-0.7).unwrap(), c.log_mgf(-0.7).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jensen_bounds_and_convexity(seed in prop::collection::vec(0.0f64..1.0, 24)) {
        let (px, q, d0, d1) = random_model(&seed);
        let m = DiscreteModel::new(px, q, d0, d1).unwrap();
        let g = gauss();
        let grid: Vec<f64> = (0..40).map(|i| -0.05 * i as f64 - 0.01).collect();
        let models: [&dyn GeneralModel; 2] = [&m, &g];
        for model in models {
            for &l in &grid {
                let v = model.log_mgf(l).unwrap();
                prop_assert!(v <= 1e-15);
                prop_assert!(v >= l * model.d0_prod() - 1e-12);
                let h = 1e-3;
                let second = model.log_mgf(l - h).unwrap() - 2.0 * v + model.log_mgf(l + h).unwrap();
                prop_assert!(second / (h * h) >= -1e-8 || l + h > 0.0);
                let exact = model.log_mgf_derivative(l).unwrap();
                let fd = finite_difference_derivative(model, l).unwrap();
                prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1e-12), "{exact} {fd}");
            }
        }
    }

    #[test]
    fn lambda_star_monotone(a in 0.1f64..1.9, b in 0.1f64..1.9) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let g = gauss();
        prop_assert!(solve_lambda_star(&g, lo).unwrap().lambda_star < solve_lambda_star(&g, hi).unwrap().lambda_star);
    }

    #[test]
    fn discrete_primal_dual(seed in prop::collection::vec(0.0f64..1.0, 24), frac in 0.1f64..0.9) {
        let (px, q, d0, d1) = random_model(&seed);
        let m = DiscreteModel::new(px.clone(), q.clone(), d0.clone(), d1).unwrap();
        let rate = Rate::nats(frac * r_max(&m).unwrap().in_nats());
        let s1 = min_d0_iid(&px, &q, &d0, rate).unwrap();
        let kl = kl_to_product(&s1.minimizer, &px, &q).unwrap().nats();
        let dual = rate_from_d0(&m, s1.d0_star).unwrap().in_nats();
        prop_assert!((dual - kl).abs() < 1e-8, "{dual} vs {kl}");
    }

    #[test]
    fn discrete_matches_iid_ensemble(seed in prop::collection::vec(0.0f64..1.0, 24), frac in 0.05f64..0.95) {
        let (px, q, d0, d1) = random_model(&seed);
        let m = DiscreteModel::new(px.clone(), q.clone(), d0.clone(), d1.clone()).unwrap();
        let rate = Rate::nats(frac * r_max(&m).unwrap().in_nats());
        let dual = mismatched_d1(&m, rate).unwrap();
        let primal = d1bar_iid(&px, &q, &d0, &d1, rate).unwrap();
        prop_assert!((dual.d1 - primal.d1).abs() < 1e-6, "{dual:?} {primal:?}");
        let tilted_d0 = m.log_mgf_derivative(solve_lambda_star(&m, dual.d0).unwrap().lambda_star).unwrap();
        prop_assert!((tilted_d0 - dual.d0).abs() < 1e-8);
    }
}
