use super::*;
use crate::prob::{expected_distortion, kl_to_product};

const DELTA_HALF_BIT: f64 = 0.110_027_864_438_359_55;

fn one_sided() -> DistortionMatrix {
    DistortionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()
}

fn ternary_d0() -> DistortionMatrix {
    DistortionMatrix::hamming(3)
}

fn ternary_d1() -> DistortionMatrix {
    DistortionMatrix::from_fn(3, 3, |x, y| f64::from(u8::from(x != y && x != 2))).unwrap()
}

fn cloud() -> JointPmf {
    let t = 1.0 / 3.0;
    JointPmf::from_matrix([Axis::U, Axis::Xhat], &[vec![t, t, 0.0], vec![0.0, 0.0, t]]).unwrap()
}

#[test]
fn sinkhorn_zero_tilt_is_product() {
    let px = Pmf::new(vec![0.3, 0.7]).unwrap();
    let q = Pmf::new(vec![0.6, 0.4]).unwrap();
    let j = sinkhorn_tilt(&px, &q, &DistortionMatrix::hamming(2), 0.0, 1e-13).unwrap();
    let prod = JointPmf::product(&px, &q);
    for (a, b) in j.probs().iter().zip(prod.probs()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn sinkhorn_strong_tilt_is_diagonal() {
    let u = Pmf::uniform(2);
    let j = sinkhorn_tilt(&u, &u, &DistortionMatrix::hamming(2), -60.0, 1e-13).unwrap();
    assert!((j.get(&[0, 0]) - 0.5).abs() < 1e-12);
    assert!(j.get(&[0, 1]) < 1e-20);
    assert!(sinkhorn_tilt(&u, &Pmf::new(vec![1.0, 0.0]).unwrap(), &DistortionMatrix::hamming(2), -1.0, 1e-12).is_err());
}

#[test]
fn cc_zero_rate_is_product() {
    let u = Pmf::uniform(2);
    let r = min_d0_cc(&u, &u, &DistortionMatrix::hamming(2), Rate::ZERO).unwrap();
    assert!((r.d0_star - 0.5).abs() < 1e-14);
}

#[test]
fn cc_binary_hamming() {
    let u = Pmf::uniform(2);
    let r = min_d0_cc(&u, &u, &DistortionMatrix::hamming(2), Rate::bits(0.5)).unwrap();
    assert!((r.d0_star - DELTA_HALF_BIT).abs() < 1e-9, "{}", r.d0_star);
    assert!((r.divergences[0].bits() - 0.5).abs() < 1e-9);
    assert!(r.active[0]);
    assert!(r.multipliers[0] < 0.0);
    let check = expected_distortion(&r.minimizer, &DistortionMatrix::hamming(2), None).unwrap();
    assert!((check - r.d0_star).abs() < 1e-12);
}

#[test]
fn cc_one_sided() {
    let u = Pmf::uniform(2);
    let r = min_d0_cc(&u, &u, &one_sided(), Rate::bits(0.5)).unwrap();
    assert!((r.d0_star - DELTA_HALF_BIT / 2.0).abs() < 1e-9, "{}", r.d0_star);
}

#[test]
fn iid_one_sided() {
    let u = Pmf::uniform(2);
    let r = min_d0_iid(&u, &u, &one_sided(), Rate::bits(0.25)).unwrap();
    assert!((r.d0_star - DELTA_HALF_BIT / 2.0).abs() < 1e-9, "{}", r.d0_star);
    let d = kl_to_product(&r.minimizer, &u, &u).unwrap().bits();
    assert!(d <= 0.25 + 1e-12 && d >= 0.25 - 1e-8 / std::f64::consts::LN_2);
    let sat = min_d0_iid(&u, &u, &one_sided(), Rate::bits(0.6)).unwrap();
    assert_eq!(sat.d0_star, 0.0);
    assert!((iid_saturation_rate(&u, &u, &one_sided()).unwrap().in_bits() - 0.5).abs() < 1e-14);
    let zero = min_d0_iid(&u, &u, &one_sided(), Rate::ZERO).unwrap();
    assert!((zero.d0_star - 0.25).abs() < 1e-15);
}

#[test]
fn stripped_symbols_are_reinserted() {
    let px = Pmf::new(vec![0.5, 0.0, 0.5]).unwrap();
    let q = Pmf::new(vec![0.5, 0.5, 0.0]).unwrap();
    let r = min_d0_cc(&px, &q, &DistortionMatrix::hamming(3), Rate::bits(0.3)).unwrap();
    assert_eq!(r.minimizer.shape(), &[3, 3]);
    assert_eq!(r.minimizer.get(&[1, 0]), 0.0);
    assert_eq!(r.minimizer.get(&[0, 2]), 0.0);
}

#[test]
fn superposition_ternary_point() {
    let u = Pmf::uniform(3);
    let cs = ConstraintSet::superposition(
        u,
        cloud(),
        Rate::bits(0.217_971_997_8),
        Rate::bits(0.653_068_104_5 - 0.217_971_997_8),
    );
    let r = min_d0_multi(&cs, &ternary_d0(), None).unwrap();
    let p02 = 0.05;
    let p01 = p02 * p02 / (1.0 / 3.0 - 2.0 * p02);
    assert!((r.d0_star - 2.0 * (p01 + 2.0 * p02)).abs() < 1e-6, "{}", r.d0_star);
    let b = max_d1_over_ties(&cs, &ternary_d0(), &ternary_d1(), None, r.d0_star, DEFAULT_EPS_TIE).unwrap();
    assert!((b.d1_max - 2.0 * (p01 + p02)).abs() < 2e-5, "{b:?}");
}

#[test]
fn trivial_cloud_matches_cc() {
    let px = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
    let q = Pmf::new(vec![0.4, 0.4, 0.2]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
    let cloud = JointPmf::from_flat(vec![Axis::U, Axis::Xhat], vec![1, 3], q.probs().to_vec()).unwrap();
    let rate = Rate::bits(0.4);
    let cc = min_d0_cc(&px, &q, &d0, rate).unwrap();
    let sc = min_d0_multi(&ConstraintSet::superposition(px, cloud, Rate::bits(0.1), Rate::bits(0.3)), &d0, None).unwrap();
    assert!((cc.d0_star - sc.d0_star).abs() < 1e-8, "{} {}", cc.d0_star, sc.d0_star);
}

#[test]
fn expurgated_reductions() {
    let px = Pmf::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
    let q1 = Pmf::new(vec![0.3, 0.7]).unwrap();
    let q2 = Pmf::new(vec![0.6, 0.4]).unwrap();
    let d0 = DistortionMatrix::from_fn(4, 2, |x, y| ((x % 2) as f64 - y as f64).abs() + 0.1 * (x / 2) as f64).unwrap();
    let rate = Rate::bits(0.3);
    let cs = ConstraintSet::expurgated(px.clone(), q1.clone(), q2.clone(), rate, Rate::ZERO);
    let ex = min_d0_multi(&cs, &d0, Some(&Psi::first(2, 2))).unwrap();
    let cc = min_d0_cc(&px, &q1, &d0, rate).unwrap();
    assert!((ex.d0_star - cc.d0_star).abs() < 1e-8, "{} {}", ex.d0_star, cc.d0_star);

    let cs = ConstraintSet::expurgated(px.clone(), q1, q2.clone(), Rate::ZERO, rate);
    let ex = min_d0_multi(&cs, &d0, Some(&Psi::second(2, 2))).unwrap();
    let cc = min_d0_cc(&px, &q2, &d0, rate).unwrap();
    assert!((ex.d0_star - cc.d0_star).abs() < 1e-8, "{} {}", ex.d0_star, cc.d0_star);
}

#[test]
fn parallel_expurgated_matches_matched() {
    let u4 = Pmf::uniform(4);
    let u2 = Pmf::uniform(2);
    let lam = 0.3;
    let d0 = DistortionMatrix::from_fn(4, 4, |x, y| {
        lam * f64::from(u8::from(x / 2 != y / 2)) + (1.0 - lam) * f64::from(u8::from(x % 2 != y % 2))
    })
    .unwrap();
    let d1 = DistortionMatrix::from_fn(4, 4, |x, y| {
        0.5 * (f64::from(u8::from(x / 2 != y / 2)) + f64::from(u8::from(x % 2 != y % 2)))
    })
    .unwrap();
    let cs = ConstraintSet::expurgated(u4, u2.clone(), u2, Rate::bits(0.5), Rate::bits(0.5));
    let psi = Psi::pair(2, 2);
    let r = min_d0_multi(&cs, &d0, Some(&psi)).unwrap();
    assert!((r.d0_star - DELTA_HALF_BIT).abs() < 1e-7, "{}", r.d0_star);
    let b = max_d1_over_ties(&cs, &d0, &d1, Some(&psi), r.d0_star, DEFAULT_EPS_TIE).unwrap();
    assert!((b.d1_max - DELTA_HALF_BIT).abs() < 1e-5, "{b:?}");
}

#[test]
fn ties_matched_and_fat() {
    let u = Pmf::uniform(2);
    let h = DistortionMatrix::hamming(2);
    let cs = ConstraintSet::cc(u.clone(), u.clone(), Rate::bits(0.5));
    let r = min_d0_multi(&cs, &h, None).unwrap();
    let b = max_d1_over_ties(&cs, &h, &h, None, r.d0_star, DEFAULT_EPS_TIE).unwrap();
    assert!((b.d1_max - r.d0_star).abs() < 1e-8, "{b:?}");

    let cs = ConstraintSet::iid(u.clone(), u, Rate::bits(0.75));
    let r = min_d0_multi(&cs, &one_sided(), None).unwrap();
    let b = max_d1_over_ties(&cs, &one_sided(), &h, None, r.d0_star, DEFAULT_EPS_TIE).unwrap();
    assert!((b.d1_max - 0.444_986_067_780_820_2).abs() < 1e-6, "{b:?}");
    assert!((b.d1_at_minimizer - 0.25).abs() < 1e-9, "{b:?}");
    assert!((b.d1_min - 0.055_013_932_219_179_78).abs() < 1e-6, "{b:?}");
}

#[test]
fn barrier_binary_hamming() {
    let u = Pmf::uniform(2);
    let cs = ConstraintSet::cc(u.clone(), u, Rate::bits(0.5));
    let problem = Problem::new(&cs, &DistortionMatrix::hamming(2), None).unwrap();
    let cost = problem.cost(|x, y| DistortionMatrix::hamming(2).get(x, y));
    let opts = SolverOptions { method: Method::Barrier, ..SolverOptions::default() };
    let raw = solve_raw(&problem, &cost, &opts, None).unwrap();
    let d: f64 = raw.p.iter().zip(&cost).map(|(a, b)| a * b).sum();
    assert!(problem.divergence(&raw.p, 0) <= Rate::bits(0.5).in_nats() + 1e-10);
    assert!((d - DELTA_HALF_BIT).abs() < 1e-8, "{d}");
}

#[test]
fn rejects_bad_scopes() {
    let u = Pmf::uniform(2);
    let mut cs = ConstraintSet::cc(u.clone(), u, Rate::bits(0.5));
    cs.caps[0].scope = CapScope::Second;
    assert!(min_d0_multi(&cs, &DistortionMatrix::hamming(2), None).is_err());
}

mod agreement {
    use super::*;
    use proptest::prelude::*;

    fn pmf(w: Vec<f64>) -> Pmf {
        Pmf::from_weights(&w).unwrap()
    }

    fn tilted() -> SolverOptions {
        SolverOptions {
            method: Method::Tilted,
            max_cycles: 30,
            max_inner: 300,
            ..SolverOptions::default()
        }
    }

    /// Barrier value after checking feasibility, and the tilted value when
    /// that search converges.
    fn both(problem: &Problem, cost: &[f64], rates: &[f64]) -> (f64, Option<f64>) {
        let value = |p: &[f64]| p.iter().zip(cost).map(|(a, b)| a * b).sum::<f64>();
        let opts = SolverOptions { method: Method::Barrier, ..SolverOptions::default() };
        let raw = solve_raw(problem, cost, &opts, None).unwrap();
        for (k, r) in rates.iter().enumerate() {
            assert!(problem.divergence(&raw.p, k) <= r + 1e-12);
        }
        let tilt = solve_raw(problem, cost, &tilted(), None).ok().map(|t| value(&t.p));
        (value(&raw.p), tilt)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cc_solvers_agree(
            wx in prop::collection::vec(0.1f64..1.0, 3),
            wq in prop::collection::vec(0.1f64..1.0, 3),
            d in prop::collection::vec(0.0f64..1.0, 9),
            rate in 0.05f64..1.2,
        ) {
            let d0 = DistortionMatrix::new(d.chunks(3).map(<[f64]>::to_vec).collect()).unwrap();
            let cs = ConstraintSet::cc(pmf(wx), pmf(wq), Rate::nats(rate));
            let problem = Problem::new(&cs, &d0, None).unwrap();
            let cost = problem.cost(|x, y| d0.get(x, y));
            let (barrier, tilt) = both(&problem, &cost, &[rate]);
            if let Some(tilt) = tilt {
                prop_assert!((tilt - barrier).abs() < 1e-8, "{tilt} {barrier}");
            }
        }

        #[test]
        fn expurgated_solvers_agree(
            wx in prop::collection::vec(0.1f64..1.0, 3),
            w1 in prop::collection::vec(0.1f64..1.0, 2),
            w2 in prop::collection::vec(0.1f64..1.0, 2),
            d in prop::collection::vec(0.0f64..1.0, 12),
            r1 in 0.02f64..0.6,
            r2 in 0.02f64..0.6,
        ) {
            let d0 = DistortionMatrix::new(d.chunks(4).map(<[f64]>::to_vec).collect()).unwrap();
            let psi = Psi::pair(2, 2);
            let cs = ConstraintSet::expurgated(pmf(wx), pmf(w1), pmf(w2), Rate::nats(r1), Rate::nats(r2));
            let problem = Problem::new(&cs, &d0, Some(&psi)).unwrap();
            let cost = problem.cost(|x, y| d0.get(x, y));
            let (barrier, tilt) = both(&problem, &cost, &[r1, r2, r1 + r2]);
            if let Some(tilt) = tilt {
                prop_assert!((tilt - barrier).abs() < 1e-8, "{tilt} {barrier}");
            }
        }
    }
}
