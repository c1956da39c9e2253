use mrd_core::ensembles::{
    best_split, d1bar_cc, d1bar_expurgated, d1bar_iid, d1bar_superposition, optimize_q_grid,
};
use mrd_core::{Axis, DistortionMatrix, EnsembleKind, EnsembleSpec, JointPmf, Pmf, Psi, Rate};

const DELTA_HALF_BIT: f64 = 0.110_027_864_438_359_55;

fn one_sided() -> DistortionMatrix {
    DistortionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()
}

fn ternary_d1() -> DistortionMatrix {
    DistortionMatrix::from_fn(3, 3, |x, y| f64::from(u8::from(x != y && x != 2))).unwrap()
}

fn parallel_metrics(weight: f64) -> (DistortionMatrix, DistortionMatrix) {
    let bits = |s: usize| (s / 2, s % 2);
    let d0 = DistortionMatrix::from_fn(4, 4, |x, y| {
        let ((x1, x2), (y1, y2)) = (bits(x), bits(y));
        weight * f64::from(u8::from(x1 != y1)) + (1.0 - weight) * f64::from(u8::from(x2 != y2))
    })
    .unwrap();
    let d1 = DistortionMatrix::from_fn(4, 4, |x, y| {
        let ((x1, x2), (y1, y2)) = (bits(x), bits(y));
        0.5 * f64::from(u8::from(x1 != y1) + u8::from(x2 != y2))
    })
    .unwrap();
    (d0, d1)
}

#[test]
fn cc_binary_matched() {
    let u = Pmf::uniform(2);
    let h = DistortionMatrix::hamming(2);
    let p = d1bar_cc(&u, &u, &h, &h, Rate::bits(0.5)).unwrap();
    assert!((p.d1 - DELTA_HALF_BIT).abs() < 1e-7, "{p:?}");
    assert!((p.d0 - p.d1).abs() < 1e-7);
    assert_eq!(p.ensemble, EnsembleKind::Cc);
}

#[test]
fn cc_one_sided_attains_matched() {
    let u = Pmf::uniform(2);
    let p = d1bar_cc(&u, &u, &one_sided(), &DistortionMatrix::hamming(2), Rate::bits(0.5)).unwrap();
    assert!((p.d1 - DELTA_HALF_BIT).abs() < 1e-6, "{p:?}");
    assert!((p.d0 - DELTA_HALF_BIT / 2.0).abs() < 1e-7, "{p:?}");
}

#[test]
fn cc_ternary_symmetric_channel() {
    // d1 = 2 delta / 3 with log2(3) - H2(delta) - delta = R.
    let u = Pmf::uniform(3);
    let cases = [
        (0.25, 0.252_133_988_812_637_36),
        (0.5, 0.172_859_845_953_529_41),
        (1.0, 0.069_238_227_809_190_17),
    ];
    for (r, want) in cases {
        let p = d1bar_cc(&u, &u, &DistortionMatrix::hamming(3), &ternary_d1(), Rate::bits(r)).unwrap();
        assert!((p.d1 - want).abs() < 1e-6, "R={r}: {p:?}");
    }
}

#[test]
fn iid_binary_one_sided() {
    let u = Pmf::uniform(2);
    let h = DistortionMatrix::hamming(2);
    let low = d1bar_iid(&u, &u, &one_sided(), &h, Rate::bits(0.25)).unwrap();
    assert!((low.d1 - (DELTA_HALF_BIT / 2.0 + 0.25)).abs() < 1e-6, "{low:?}");
    let high = d1bar_iid(&u, &u, &one_sided(), &h, Rate::bits(0.75)).unwrap();
    assert!((high.d1 - 0.444_986_067_780_820_2).abs() < 1e-5, "{high:?}");
    assert!(high.d1_min < 0.06, "{high:?}");
}

#[test]
fn iid_never_beats_cc_when_matched() {
    let px = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
    let q = Pmf::new(vec![0.4, 0.4, 0.2]).unwrap();
    let d = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
    for r in [0.1, 0.3, 0.6, 1.0] {
        let cc = d1bar_cc(&px, &q, &d, &d, Rate::bits(r)).unwrap();
        let iid = d1bar_iid(&px, &q, &d, &d, Rate::bits(r)).unwrap();
        assert!(iid.d1 <= cc.d1 + 1e-8, "R={r}: {} > {}", iid.d1, cc.d1);
    }
}

#[test]
fn cc_mismatched_against_convex_oracle() {
    // Values from an independent conic solver. At R = 0.2 the optimum is unique;
    // at 0.5 and 0.9 the d0 floor is reached with a slack cap and the tie set is fat.
    let px = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
    let q = Pmf::new(vec![0.4, 0.4, 0.2]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
    let d1 = DistortionMatrix::hamming(3);
    let cases = [
        (0.2, 0.579_349_613_912_282, 0.499_676_675_256_460_4),
        (0.5, 0.45, 0.425_797_451_533_168_8),
        (0.9, 0.45, 0.5),
    ];
    for (r, d0_want, d1_want) in cases {
        let p = d1bar_cc(&px, &q, &d0, &d1, Rate::bits(r)).unwrap();
        assert!((p.d0 - d0_want).abs() < 1e-7, "R={r}: {p:?}");
        assert!((p.d1 - d1_want).abs() < 1e-6, "R={r}: {p:?}");
        assert!(p.d1_min <= p.d1 && p.d1 == p.d1_max);
    }
}

#[test]
fn superposition_against_convex_oracle() {
    let px = Pmf::new(vec![0.25, 0.35, 0.4]).unwrap();
    let cloud = JointPmf::from_matrix([Axis::U, Axis::Xhat], &[vec![0.2, 0.15, 0.05], vec![0.1, 0.2, 0.3]]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 1.0], vec![0.7, 0.4, 0.0]]).unwrap();
    let d1 = DistortionMatrix::new(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 0.2], vec![1.0, 1.0, 0.0]]).unwrap();
    let cases = [
        (0.1, 0.3, 0.216_338_792_575_972_33, 0.277_567_876_927_102),
        (0.3, 0.4, 0.134_025_222_693_167_6, 0.178_571_359_345_956_44),
    ];
    for (r0, r1, d0_want, d1_want) in cases {
        let p = d1bar_superposition(&px, &cloud, &d0, &d1, Rate::bits(r0), Rate::bits(r1)).unwrap();
        assert!((p.d0 - d0_want).abs() < 1e-7, "{p:?}");
        assert!((p.d1 - d1_want).abs() < 1e-7, "{p:?}");
        assert!((p.rate_bits - (r0 + r1)).abs() < 1e-12);
    }
}

#[test]
fn expurgated_against_convex_oracle() {
    let px = Pmf::new(vec![0.3, 0.3, 0.4]).unwrap();
    let q1 = Pmf::new(vec![0.3, 0.7]).unwrap();
    let q2 = Pmf::new(vec![0.6, 0.4]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 0.6, 0.4, 1.0], vec![0.8, 0.0, 1.0, 0.3], vec![1.0, 0.5, 0.2, 0.0]]).unwrap();
    let d1 = DistortionMatrix::new(vec![vec![0.0, 1.0, 1.0, 1.0], vec![1.0, 0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0, 0.0]]).unwrap();
    let psi = Psi::pair(2, 2);
    let cases = [
        (0.2, 0.3, 0.219_513_099_888_074_5, 0.356_247_194_093_561),
        (0.5, 0.1, 0.253_177_934_349_738_7, 0.349_794_364_231_686),
    ];
    for (r1, r2, d0_want, d1_want) in cases {
        let p = d1bar_expurgated(&px, &q1, &q2, &psi, &d0, &d1, Rate::bits(r1), Rate::bits(r2)).unwrap();
        assert!((p.d0 - d0_want).abs() < 1e-7, "{p:?}");
        assert!((p.d1 - d1_want).abs() < 1e-7, "{p:?}");
    }
}

#[test]
fn superposition_trivial_cloud_is_cc() {
    let px = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
    let q = Pmf::new(vec![0.4, 0.4, 0.2]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
    let d1 = DistortionMatrix::hamming(3);
    let cloud = JointPmf::from_flat(vec![Axis::U, Axis::Xhat], vec![1, 3], q.probs().to_vec()).unwrap();
    let cc = d1bar_cc(&px, &q, &d0, &d1, Rate::bits(0.3)).unwrap();
    let sc = d1bar_superposition(&px, &cloud, &d0, &d1, Rate::bits(0.1), Rate::bits(0.2)).unwrap();
    assert!((cc.d1 - sc.d1).abs() < 1e-6, "{cc:?} {sc:?}");
}

#[test]
fn expurgated_reduces_to_cc() {
    let px = Pmf::new(vec![0.3, 0.3, 0.4]).unwrap();
    let q1 = Pmf::new(vec![0.3, 0.7]).unwrap();
    let q2 = Pmf::new(vec![0.6, 0.4]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 0.6], vec![0.8, 0.0], vec![1.0, 0.5]]).unwrap();
    let d1 = DistortionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let r = Rate::bits(0.3);
    let first = d1bar_expurgated(&px, &q1, &q2, &Psi::first(2, 2), &d0, &d1, r, Rate::ZERO).unwrap();
    let cc1 = d1bar_cc(&px, &q1, &d0, &d1, r).unwrap();
    assert!((first.d1 - cc1.d1).abs() < 1e-6, "{first:?} {cc1:?}");
    let second = d1bar_expurgated(&px, &q1, &q2, &Psi::second(2, 2), &d0, &d1, Rate::ZERO, r).unwrap();
    let cc2 = d1bar_cc(&px, &q2, &d0, &d1, r).unwrap();
    assert!((second.d1 - cc2.d1).abs() < 1e-6, "{second:?} {cc2:?}");
}

#[test]
fn parallel_source_expurgated_matches_matched() {
    let u = Pmf::uniform(4);
    let h = Pmf::uniform(2);
    let (d0, d1) = parallel_metrics(0.3);
    let cases = [
        (0.5, 0.214_501_744_859_828_75),
        (1.0, DELTA_HALF_BIT),
        (1.5, 0.041_692_690_273_656_70),
    ];
    for (r, want) in cases {
        let half = Rate::bits(r / 2.0);
        let p = d1bar_expurgated(&u, &h, &h, &Psi::pair(2, 2), &d0, &d1, half, half).unwrap();
        assert!((p.d1 - want).abs() < 1e-5, "R={r}: {p:?}");
    }
    // Independent codewords do strictly worse at 1 bit.
    let cc = d1bar_cc(&u, &u, &d0, &d1, Rate::bits(1.0)).unwrap();
    assert!((cc.d1 - 0.126_831_841_684_471_18).abs() < 1e-5, "{cc:?}");
}

#[test]
fn split_sweep_finds_ternary_split() {
    let u = Pmf::uniform(3);
    let t = 1.0 / 3.0;
    let cloud = JointPmf::from_matrix([Axis::U, Axis::Xhat], &[vec![t, t, 0.0], vec![0.0, 0.0, t]]).unwrap();
    let template = EnsembleSpec::Superposition {
        q_uxhat: cloud.clone(),
        r0: Rate::ZERO,
        r1: Rate::ZERO,
    };
    let total = Rate::bits(0.653_068_104_5);
    let (best, spec) = best_split(&template, &u, &DistortionMatrix::hamming(3), &ternary_d1(), total, Some(Rate::bits(0.01))).unwrap();
    // Matched value 2 (p01 + p02) at p02 = 0.05.
    let p02: f64 = 0.05;
    let matched = 2.0 * (p02 * p02 / (1.0 / 3.0 - 2.0 * p02) + p02);
    assert!(best.d1 < matched + 2e-3, "{best:?}");
    assert_eq!(spec.split_total().map(|r| (r.in_bits() * 1e9).round()), Some((total.in_bits() * 1e9).round()));
    let cc = d1bar_cc(&u, &u, &DistortionMatrix::hamming(3), &ternary_d1(), total).unwrap();
    assert!(best.d1 < cc.d1 - 1e-3);
}

#[test]
fn q_grid_contract() {
    let u = Pmf::uniform(2);
    let h = DistortionMatrix::hamming(2);
    let template = EnsembleSpec::Cc { q: u.clone() };
    let (best, spec) = optimize_q_grid(&template, &u, &h, &h, Rate::bits(0.5), 2).unwrap();
    assert_eq!(spec, EnsembleSpec::Cc { q: u.clone() });
    assert!((best.d1 - DELTA_HALF_BIT).abs() < 1e-6);
    let (finer, _) = optimize_q_grid(&template, &u, &h, &h, Rate::bits(0.5), 10).unwrap();
    assert!((finer.d1 - best.d1).abs() < 1e-9);
}
