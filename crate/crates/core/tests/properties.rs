use proptest::prelude::*;
use psf_core::kahane::{auto_moment_killer, build_moment_killer, AtomicMeasure};
use psf_core::lacunary::LacunaryModel;
use psf_core::norms::{a_norm, besicovitch_dimension, luxemburg_norm, OrliczFunction};
use psf_core::pipeline::{dilate_mask, inverse_residual, near_inverse, verify_certificate, CertKind, CertParams};
use psf_core::riesz::{build_riesz, build_x, mix, RieszSpec};
use psf_core::trigpoly::restrict;
use psf_core::{Error, GridMask, TrigPoly, C64};

fn poly(max_freq: i64, len: usize) -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec((-max_freq..=max_freq, -1.0f64..1.0, -1.0f64..1.0), 1..len)
        .prop_map(|v| TrigPoly::from_terms(v.into_iter().map(|(n, a, b)| (n, C64::new(a, b)))))
}

fn close(a: &TrigPoly, b: &TrigPoly, tol: f64) -> bool {
    let d = a.sub(b);
    d.terms().iter().all(|t| t.1.norm() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn multiply_matches_convolution(a in poly(3000, 40), b in poly(3000, 40)) {
        let fast = a.multiply(&b);
        let slow = a.multiply_direct(&b);
        prop_assert!(close(&fast, &slow, 1e-11), "{:?}", fast.sub(&slow).terms().first());
    }

    #[test]
    fn multiply_is_bilinear(a in poly(50, 12), b in poly(50, 12), c in poly(50, 12), t in -2.0f64..2.0) {
        let lhs = a.add(&b.scale_re(t)).multiply(&c);
        let rhs = a.multiply(&c).add(&b.multiply(&c).scale_re(t));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn parseval_on_grid(a in poly(100, 30)) {
        let g = a.sample(256);
        prop_assert!((g.mean_sq() - a.energy()).abs() <= 1e-12 * (1.0 + a.energy()));
    }

    #[test]
    fn dilation_is_node_exact(a in poly(20, 10), m in 1u64..40, bits in prop::collection::vec(any::<bool>(), 64)) {
        let g = 64usize;
        let base = a.sample(g);
        let dil = a.dilate(m).sample(g);
        for i in 0..g {
            let j = (i as u64 * m % g as u64) as usize;
            prop_assert!((dil.samples()[i] - base.samples()[j]).norm() < 1e-12);
        }
        let e = GridMask::new(bits.clone());
        let em = dilate_mask(&e, m);
        for i in 0..g {
            prop_assert_eq!(em.bits()[i], bits[(i as u64 * m % g as u64) as usize]);
        }
    }

    #[test]
    fn restriction_splits_energy(a in poly(30, 20), bits in prop::collection::vec(any::<bool>(), 128)) {
        let g = 128;
        let mask = GridMask::new(bits);
        let (inside, out) = restrict(&a, &mask, g).unwrap();
        let s = a.sample(g);
        let back = inside.sample(g);
        for ((v, w), &m) in s.samples().iter().zip(back.samples()).zip(mask.bits()) {
            let want = if m { *v } else { C64::new(0.0, 0.0) };
            prop_assert!((w - want).norm() < 1e-12);
        }
        // disjoint supports on the nodes
        prop_assert!((back.mean_sq() + out * out - s.mean_sq()).abs() < 1e-12 * (1.0 + s.mean_sq()));
    }

    #[test]
    fn a_norm_decreases_in_r(a in poly(40, 20), r in 1.0f64..6.0, dr in 0.0f64..4.0) {
        prop_assert!(a_norm(&a, r + dr) <= a_norm(&a, r) * (1.0 + 1e-12));
    }

    #[test]
    fn luxemburg_is_a_norm(
        x in prop::collection::vec(-3.0f64..3.0, 1..12),
        y in prop::collection::vec(-3.0f64..3.0, 12),
        c in -5.0f64..5.0,
        q in 1.5f64..5.0,
    ) {
        let phi = OrliczFunction::power(q).unwrap();
        let n = |v: &[f64]| luxemburg_norm(v, &phi).unwrap().value;
        let y = &y[..x.len()];
        let nx = n(&x);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((n(&cx) - c.abs() * nx).abs() <= 1e-10 * (1.0 + c.abs() * nx));
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        prop_assert!(n(&sum) <= (nx + n(y)) * (1.0 + 1e-10) + 1e-12);
        // power Orlicz functions give the l^q norm
        let lq = x.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q);
        prop_assert!((nx - lq).abs() <= 1e-10 * (1.0 + lq));
    }

    #[test]
    fn dimension_increases(g in 0.001f64..0.49, dg in 0.0001f64..0.009) {
        let a = besicovitch_dimension(g).unwrap();
        let b = besicovitch_dimension(g + dg).unwrap();
        prop_assert!(a < b && b < 1.0 && a > 0.0);
    }

    #[test]
    fn mix_is_linear_in_the_measure(
        s in prop::collection::vec(0.05f64..0.95, 1..5),
        w in prop::collection::vec(-2.0f64..2.0, 5),
    ) {
        let k = s.len();
        let mut atoms: Vec<(f64, f64)> = s.iter().zip(&w).map(|(&s, &c)| (s, c)).collect();
        let rest: f64 = atoms[..k - 1].iter().map(|a| a.1).sum();
        atoms[k - 1].1 = 1.0 - rest;
        let rho = AtomicMeasure::new(atoms.clone(), (0.0, 1.0), 4).unwrap();
        let spec = RieszSpec::lq(4.0, 3, 4, 0.5);
        let mixed = mix(&rho, &spec).unwrap();
        let mut want = TrigPoly::zero();
        for &(s, c) in &atoms {
            want = want.add(&build_riesz(&spec.with_s(s)).unwrap().scale_re(c));
        }
        prop_assert!(close(&mixed, &want, 1e-10));
    }
}

#[test]
fn lacunary_char_fn_matches_quadrature() {
    let spec = RieszSpec::lq(4.0, 3, 4, 0.7);
    let lambda = build_riesz(&spec).unwrap();
    let x = build_x(&spec);
    let g = 1 << 14;
    let (l, xs) = (lambda.sample(g).re(), x.sample(g).re());
    let model = LacunaryModel::from_spec(&spec, 1);
    for xi in [0.0, 0.3, -1.7, 4.0, 11.0] {
        let quad: C64 = l.iter().zip(&xs).map(|(&l, &x)| C64::from_polar(l, xi * x)).sum::<C64>() / g as f64;
        let got = model.char_fn(xi);
        assert!((got - quad).norm() < 1e-12, "xi {xi}: {got} vs {quad}");
    }
}

#[test]
fn kahane_rejects_unreachable_targets() {
    match build_moment_killer((0.8, 0.9), 0.05, 8, None) {
        Err(Error::Infeasible { best, target }) => assert!(best >= target),
        other => panic!("expected Infeasible, got {other:?}"),
    }
    let m = auto_moment_killer((0.8, 0.9), 0.05, 40).unwrap();
    assert!(m.max_moment() < 0.05 && m.atoms().len() > 8);
}

#[test]
fn near_inverse_reports_its_residual() {
    let g = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1).scale_re(0.6));
    let out = near_inverse(&g, Some(12), 1e-6, 1.5).unwrap();
    let r = inverse_residual(&g, &out.p_poly, 1.5);
    assert!((r - out.residual).abs() <= 1e-12 * (1.0 + r));
    // 1/g = sum (-0.6 cos)^k converges, so a degree-12 inverse is close
    assert!(r < 1e-2, "{r}");
    let coarse = near_inverse(&g, Some(2), 1e-6, 1.5).unwrap();
    assert!(coarse.residual >= out.residual);
}

#[test]
fn empty_set_is_flagged() {
    let k = GridMask::empty(64);
    let params = CertParams { nus: vec![3], eps: vec![0.5], p: 4.0 / 3.0, orlicz: vec![] };
    let cert = verify_certificate(CertKind::NomeasureLq, &k, &[TrigPoly::cosine(3)], &params).unwrap();
    assert!(cert.notes.iter().any(|n| n.contains("empty set")), "{:?}", cert.notes);
}
