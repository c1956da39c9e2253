use mrd_core::closed_form::*;
use mrd_core::TieRule;
use proptest::prelude::*;

const DELTA_HALF_BIT: f64 = 0.110_027_864_438_359_55;

fn h2(a: f64) -> f64 {
    mrd_core::binary_entropy(a).unwrap()
}

/// Sign disagreement of a standard bivariate normal, by 2-D Simpson quadrature.
fn quadrant_quadrature(rho: f64) -> f64 {
    let n = 1200;
    let l = 9.0;
    let h = l / n as f64;
    let det = 1.0 - rho * rho;
    let dens = |x: f64, y: f64| {
        (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * det)).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    };
    let w = |i: usize| match i {
        0 => 1.0,
        i if i == n => 1.0,
        i if i % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let mut s = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            s += w(i) * w(j) * dens(i as f64 * h, -(j as f64) * h);
        }
    }
    2.0 * s * h * h / 9.0
}

#[test]
fn binary_reference_values() {
    assert_eq!(binary_curve(1.0, BinaryEnsemble::Matched, TieRule::Pessimistic).unwrap(), 0.0);
    for tie in [TieRule::Pessimistic, TieRule::Uniform] {
        let v = binary_curve(0.25, BinaryEnsemble::Iid, tie).unwrap();
        assert!((v - 0.305_013_932_219_179_8).abs() < 1e-12, "{v}");
    }
    assert_eq!(binary_curve(0.75, BinaryEnsemble::Iid, TieRule::Uniform).unwrap(), 0.25);
    let pess = binary_curve(0.75, BinaryEnsemble::Iid, TieRule::Pessimistic).unwrap();
    assert!((pess - 0.444_986_067_780_820_2).abs() < 1e-12);
    assert!(binary_curve(1.2, BinaryEnsemble::Cc, TieRule::Pessimistic).is_err());
}

#[test]
fn binary_matched_inverts_entropy() {
    for i in 0..10 {
        let r = 0.05 + 0.1 * i as f64;
        let d = binary_curve(r, BinaryEnsemble::Matched, TieRule::Pessimistic).unwrap();
        assert!((1.0 - h2(d) - r).abs() < 1e-10, "R={r}");
    }
}

#[test]
fn binary_iid_jump_at_half_bit() {
    let eps = 1e-9;
    let left = binary_curve(0.5 - eps, BinaryEnsemble::Iid, TieRule::Pessimistic).unwrap();
    let right = binary_curve(0.5 + eps, BinaryEnsemble::Iid, TieRule::Pessimistic).unwrap();
    assert!((left - 0.25).abs() < 1e-3 && (right - 0.25).abs() < 1e-3, "{left} {right}");
    assert!(binary_curve(0.75, BinaryEnsemble::Iid, TieRule::Pessimistic).unwrap() > 0.4);
}

#[test]
fn parallel_values() {
    for e in [ParallelEnsemble::Independent, ParallelEnsemble::Expurgated, ParallelEnsemble::Matched] {
        assert!(parallel_curve(2.0, 0.3, e).unwrap().abs() < 1e-12);
    }
    let ex = parallel_curve(1.0, 0.3, ParallelEnsemble::Expurgated).unwrap();
    assert!((ex - DELTA_HALF_BIT).abs() < 1e-12);
    assert_eq!(ex, parallel_curve(1.0, 0.3, ParallelEnsemble::Matched).unwrap());
    let (a, b) = parallel_independent(1.0, 0.3).unwrap();
    assert!((a - 0.210_128_792_747_759_23).abs() < 1e-8, "{a}");
    assert!((b - 0.043_534_890_621_183_14).abs() < 1e-8, "{b}");
    let ind = parallel_curve(1.0, 0.3, ParallelEnsemble::Independent).unwrap();
    assert!((ind - 0.126_831_841_684_471_18).abs() < 1e-8);
    assert!(ind > ex);
}

#[test]
fn ternary_matched_forward_point() {
    let p = ternary_matched(0.653_068_104_547_349_8).unwrap();
    assert!((p.p02 - 0.05).abs() < 1e-10, "{p:?}");
    assert!((p.p01 - 0.010_714_285_714_285_714).abs() < 1e-10);
    assert!((p.d1 - 0.121_428_571_428_571_43).abs() < 1e-10);
    assert!((p.r0_bits - 0.217_971_997_833_325_03).abs() < 1e-9);
}

#[test]
fn ternary_zero_rate_limit() {
    let p = ternary_matched(1e-9).unwrap();
    assert!((p.p02 - 1.0 / 9.0).abs() < 1e-3 && (p.p01 - 1.0 / 9.0).abs() < 1e-3, "{p:?}");
    assert!((p.d1 - 4.0 / 9.0).abs() < 2e-3);
    assert!(ternary_matched(0.0).is_err());
    assert!(ternary_matched(2.0).is_err());
}

#[test]
fn ternary_iu_values() {
    assert!((ternary_iu(0.0).unwrap() - 0.918_295_834_054_489_5).abs() < 1e-12);
    assert!((ternary_iu(1.0 / 6.0).unwrap() - 0.251_629_167_387_822_85).abs() < 1e-12);
    // The cloud label is independent of X at the zero-rate point.
    assert!(ternary_iu(1.0 / 9.0).unwrap().abs() < 1e-12);
    assert!(ternary_iu(0.2).is_err());
}

#[test]
fn ternary_cc_matches_reference() {
    assert!((ternary_cc(0.5).unwrap() - 0.172_859_845_953_529_41).abs() < 1e-12);
}

#[test]
fn gaussian_recipe_at_minus_one() {
    let p = gaussian_point(-1.0, 1.0, 1.0).unwrap();
    assert!((p.var_x - 0.6f64.sqrt()).abs() < 1e-14);
    assert!((p.rho - 2.0 / 3.0).abs() < 1e-14);
    assert!((p.d0 - 0.516_397_779_494_322_2).abs() < 1e-12, "{p:?}");
    assert!((p.d1 - 0.267_720_472_801_230_01).abs() < 1e-12);
    assert!((quadrant_quadrature(p.rho) - p.d1).abs() < 1e-5);
    assert!(gaussian_point(0.0, 1.0, 1.0).is_err());
}

#[test]
fn gaussian_recipe_zero_tilt_limit() {
    let p = gaussian_point(-1e-9, 1.0, 1.0).unwrap();
    assert!(p.rho.abs() < 1e-8);
    assert!((p.d0 - 2.0).abs() < 1e-7);
    assert!(p.rate_nats < 1e-12);
}

#[test]
fn gaussian_curve_rows() {
    let pts = gaussian_curve(&[-0.1, -1.0, -10.0], 1.0, 1.0).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts.windows(2).all(|w| w[0].rate_bits < w[1].rate_bits && w[0].d1 > w[1].d1));
    assert!(gaussian_curve(&[0.5], 1.0, 1.0).is_err());
    assert!((gaussian_matched_rate(0.05).unwrap() - 0.713_603_042_884_044_3).abs() < 1e-12);
}

proptest! {
    #[test]
    fn quadrant_identity(rho in -0.95f64..0.95) {
        prop_assert!((quadrant_quadrature(rho) - sign_disagreement(rho)).abs() < 1e-5);
    }

    #[test]
    fn ternary_round_trip(r in 0.05f64..1.55) {
        let p = ternary_matched(r).unwrap();
        prop_assert!(p.p02 <= 1.0 / 9.0 + 1e-12);
        prop_assert!((ternary_mi(p.p01, p.p02).unwrap() - r).abs() < 1e-10);
        prop_assert!(p.r0_bits <= r + 1e-12);
    }

    #[test]
    fn iu_decreasing(a in 0.0f64..(1.0 / 9.0), b in 0.0f64..(1.0 / 9.0)) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(ternary_iu(lo).unwrap() >= ternary_iu(hi).unwrap() - 1e-12);
    }

    #[test]
    fn cc_equals_matched(r in 0.0f64..1.0) {
        let m = binary_curve(r, BinaryEnsemble::Matched, TieRule::Pessimistic).unwrap();
        prop_assert_eq!(m, binary_curve(r, BinaryEnsemble::Cc, TieRule::Uniform).unwrap());
    }
}
