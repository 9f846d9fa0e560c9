use std::f64::consts::PI;
use std::sync::OnceLock;

use galbrun::c64;
use galbrun::coefficients::numrange::lambda_min_hermitian_part;
use galbrun::coefficients::{sector_angle, validate_level, Mat3, ProblemConfig};
use galbrun::helmholtz::{decompose, Decomposition, DEFAULT_CUTOFF};
use proptest::prelude::*;

fn mat3() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9((-2.0..2.0f64, -2.0..2.0f64))
        .prop_map(|v| std::array::from_fn(|i| std::array::from_fn(|j| c64::new(v[3 * i + j].0, v[3 * i + j].1))))
}

fn map(m: &Mat3, f: impl Fn(usize, usize, c64) -> c64) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| f(i, j, m[i][j])))
}

fn square() -> &'static Decomposition {
    static D: OnceLock<Decomposition> = OnceLock::new();
    D.get_or_init(|| {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/square.toml");
        let mut cfg = ProblemConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap();
        cfg.degree = 2;
        let vp = validate_level(&cfg, 0).unwrap();
        let d = decompose(&vp, DEFAULT_CUTOFF, false).unwrap().0;
        assert!(d.dim_w() > 0 && d.dim_z() > 0);
        d
    })
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<c64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(|v| v.into_iter().map(|(a, b)| c64::new(a, b)).collect())
}

fn gram_norm(d: &Decomposition, x: &[c64]) -> f64 {
    x.iter().zip(d.gram.matvec(x)).map(|(a, b)| (a.conj() * b).re).sum::<f64>().sqrt()
}

fn dist(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sector_angle_is_in_range(m in mat3()) {
        let t = sector_angle(&m);
        prop_assert!((0.0..=PI + 1e-12).contains(&t));
    }

    #[test]
    fn sector_angle_ignores_positive_scaling_and_conjugation(m in mat3(), s in 0.01..100.0f64) {
        let t = sector_angle(&m);
        prop_assert!((sector_angle(&map(&m, |_, _, z| z * s)) - t).abs() < 1e-8);
        prop_assert!((sector_angle(&map(&m, |_, _, z| z.conj())) - t).abs() < 1e-8);
    }

    #[test]
    fn sector_angle_is_unitarily_invariant(m in mat3(), phases in prop::array::uniform3(-PI..PI), perm in 0usize..6) {
        let p = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][perm];
        let d: Vec<c64> = phases.iter().map(|&a| c64::from_polar(1.0, a)).collect();
        let u = map(&m, |i, j, _| m[p[i]][p[j]] * d[i] * d[j].conj());
        prop_assert!((sector_angle(&u) - sector_angle(&m)).abs() < 1e-8);
    }

    #[test]
    fn coercive_hermitian_part_bounds_the_angle(m in mat3()) {
        if lambda_min_hermitian_part(&m) > 1e-6 {
            prop_assert!(sector_angle(&m) < PI / 2.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projectors_partition_and_are_idempotent(x in cvec(square().ndofs())) {
        let d = square();
        let (pw, pz, pv) = (d.apply_pw(&x), d.apply_pz(&x), d.apply_pv(&x));
        let sum: Vec<c64> = pw.iter().zip(&pz).zip(&pv).map(|((a, b), c)| a + b + c).collect();
        prop_assert!(dist(&sum, &x) < 1e-12);
        prop_assert!(dist(&d.apply_pw(&pw), &pw) < 1e-10);
        prop_assert!(dist(&d.apply_pz(&pz), &pz) < 1e-10);
        prop_assert!(d.apply_pw(&pz).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn t_is_an_isometric_involution(x in cvec(square().ndofs())) {
        let d = square();
        let tx = d.apply_t(&x);
        prop_assert!(dist(&d.apply_t(&tx), &x) < 1e-10);
        prop_assert!((gram_norm(d, &tx) - gram_norm(d, &x)).abs() < 1e-10 * (1.0 + gram_norm(d, &x)));
    }
}
