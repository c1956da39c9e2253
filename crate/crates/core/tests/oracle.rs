use mrd_core::oracle::grid_oracle_cc;
use mrd_core::{DistortionMatrix, Pmf, Rate};

#[test]
fn oracle_matches_conic_reference() {
    let px = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
    let q = Pmf::new(vec![0.4, 0.4, 0.2]).unwrap();
    let d0 = DistortionMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 0.5, 0.0]]).unwrap();
    let d1 = DistortionMatrix::hamming(3);
    for (r, a, b) in [(0.2, 0.579_349_613_912_282, 0.499_676_675_256_460_4), (0.5, 0.45, 0.425_797_451_533_168_8)] {
        let o = grid_oracle_cc(&px, &q, &d0, &d1, Rate::bits(r), 1e-3, 1e-9).unwrap();
        assert!((o.d0_star - a).abs() < 1e-4, "{o:?}");
        assert!((o.d1_max - b).abs() < 1e-3, "{o:?}");
    }
}

#[test]
fn oracle_binary_matched() {
    let u = Pmf::uniform(2);
    let h = DistortionMatrix::hamming(2);
    let o = grid_oracle_cc(&u, &u, &h, &h, Rate::bits(0.5), 1e-3, 1e-9).unwrap();
    assert_eq!(o.step, 1e-3);
    assert!((o.d0_star - 0.110_027_864_438_359_55).abs() < 1e-8, "{o:?}");
    assert!((o.d1_max - o.d0_star).abs() < 1e-8);
}
