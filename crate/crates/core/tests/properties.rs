use std::f64::consts::{PI, TAU};

use homog_core::kp_model::{substitution_roundtrip, transfer_matrix, WholeLineKP};
use homog_core::mmatrix::{im_part_min_eigenvalue, m1, m2};
use homog_core::resolvent::HomState;
use homog_core::spectra::{find_roots, DispersionRelation, RelationKind};
use homog_core::transforms::{gelfand, inverse_gelfand, phi_eps, psi_t, psi_t_adjoint, LineFunction};
use homog_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cell(eps: f64) -> CellParams {
    make_cell(1.0, 1.0, 0.25, 0.5, eps).unwrap()
}

/// Random smooth edge function: a few modes with given coefficients.
fn modes(coef: &[(f64, f64)], len: f64) -> impl Fn(f64) -> Complex64 + '_ {
    move |x: f64| {
        coef.iter()
            .enumerate()
            .map(|(j, &(a, b))| c64(a, b) * Complex64::new(0.0, (j as f64 + 0.5) * x / len).exp())
            .sum()
    }
}

fn coefs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..5)
}

fn state(lens: [f64; 3], n: usize, c: [&[(f64, f64)]; 3]) -> StateVector {
    let (f1, f2, f3) = (modes(c[0], lens[0]), modes(c[1], lens[1]), modes(c[2], lens[2]));
    StateVector::from_fns(lens, n, [&f1, &f2, &f3])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_is_upper_half_plane(re in -50.0..50.0f64, im in 0.0..50.0f64) {
        let sp = spectral_point(c64(re, im));
        let arg = sp.k.arg();
        prop_assert!((0.0..PI).contains(&arg) || sp.k.norm() == 0.0, "arg {arg}");
        prop_assert!(sp.k.im >= 0.0);
        prop_assert!(sp.k.re >= 0.0 || sp.k.im > 0.0);
        prop_assert!((sp.k * sp.k - sp.z).norm() <= 1e-12 * sp.z.norm().max(1e-300));
    }

    #[test]
    fn inner_is_conjugate_symmetric(a in coefs(), b in coefs(), c in coefs(), d in coefs(), eps in 0.01..1.0f64) {
        let lens = [0.25 * eps, 0.5, 0.25 * eps];
        let u = state(lens, 64, [&a, &b, &c]);
        let v = state(lens, 64, [&d, &a, &b]);
        let uv = inner(&u, &v).unwrap();
        let vu = inner(&v, &u).unwrap();
        prop_assert!((uv - vu.conj()).norm() <= 1e-13 * uv.norm().max(1e-300) + 1e-300);
        prop_assert!(inner(&u, &u).unwrap().re >= 0.0);
    }

    #[test]
    fn herglotz_m1_m2(re in -40.0..400.0f64, im in 0.05..40.0f64, tau in 0.0..TAU, p in 2..8i32) {
        let eps = 0.5f64.powi(p);
        let c = cell(eps);
        let q = Quasimomentum::from_tau(tau, eps);
        let sp = spectral_point(c64(re, im));
        if let Ok(m) = m1(&sp, &q, &c) {
            prop_assert!(im_part_min_eigenvalue(&m) >= -1e-9);
        }
        if let Ok(m) = m2(&sp, &q, &c) {
            prop_assert!(im_part_min_eigenvalue(&m) >= -1e-9);
        }
    }

    #[test]
    fn conjugation_symmetry(re in -40.0..400.0f64, im in 0.05..40.0f64, tau in 0.0..TAU, eps in 0.01..0.5f64) {
        let c = cell(eps);
        let q = Quasimomentum::from_tau(tau, eps);
        let sp = spectral_point(c64(re, im));
        let sq = spectral_point(c64(re, -im));
        for f in [m1, m2] {
            let (a, b) = (f(&sp, &q, &c).unwrap(), f(&sq, &q, &c).unwrap());
            prop_assert!((a.adjoint() - b).norm() <= 1e-11 * a.norm());
        }
    }

    #[test]
    fn m1_is_analytic(re in 1.0..100.0f64, im in 0.2..10.0f64, tau in 0.0..TAU) {
        let c = cell(0.1);
        let q = Quasimomentum::from_tau(tau, 0.1);
        let h = 1e-5;
        let at = |z: Complex64| m1(&spectral_point(z), &q, &c).unwrap();
        let z = c64(re, im);
        let dx = (at(z + h) - at(z - h)) / c64(2.0 * h, 0.0);
        let dy = (at(z + c64(0.0, h)) - at(z - c64(0.0, h))) / c64(0.0, 2.0 * h);
        prop_assert!((dx - dy).norm() <= 1e-6 * dx.norm().max(1.0), "{}", (dx - dy).norm());
    }

    #[test]
    fn roots_symmetric_in_tau(tau in 0.01..PI) {
        let c = cell(0.1);
        let w = (0.1, 20.0);
        let a = find_roots(&DispersionRelation::new(RelationKind::LimitCc, c, tau), w).unwrap();
        let b = find_roots(&DispersionRelation::new(RelationKind::LimitCc, c, TAU - tau), w).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_eps_preserves_inner_products(a in coefs(), b in coefs(), d in coefs(), eps in 0.01..1.0f64) {
        let c = cell(eps);
        let lens = [0.25 * eps, 0.5 * eps, 0.25 * eps];
        let u = state(lens, 64, [&a, &b, &d]);
        let v = state(lens, 64, [&d, &a, &b]);
        let (pu, pv) = (phi_eps(&u, &c).unwrap(), phi_eps(&v, &c).unwrap());
        let (x, y) = (inner(&pu, &pv).unwrap(), inner(&u, &v).unwrap());
        prop_assert!((x - y).norm() < 1e-11 * (1.0 + y.norm()));
    }

    #[test]
    fn psi_preserves_inner_products(b1 in (-2.0..2.0f64, -2.0..2.0f64), b2 in (-2.0..2.0f64, -2.0..2.0f64), a in coefs(), d in coefs(), tau in 0.0..TAU) {
        let c = cell(0.1);
        let q = Quasimomentum::from_tau(tau, 0.1);
        let h = HomState { u: EdgeFunction::from_fn(EdgeId::E2, 0.5, 64, modes(&a, 0.5)), beta: c64(b1.0, b1.1) };
        let g = HomState { u: EdgeFunction::from_fn(EdgeId::E2, 0.5, 64, modes(&d, 0.5)), beta: c64(b2.0, b2.1) };
        let (sh, sg) = (psi_t_adjoint(&h, &q, &c, 64).unwrap(), psi_t_adjoint(&g, &q, &c, 64).unwrap());
        let (x, y) = (inner(&sh, &sg).unwrap(), h.inner(&g).unwrap());
        prop_assert!((x - y).norm() < 1e-11 * (1.0 + y.norm()));
        let back = psi_t(&sh, &q, &c).unwrap();
        prop_assert!((back.beta - h.beta).norm() < 1e-11 * (1.0 + h.beta.norm()));
    }

    #[test]
    fn gelfand_roundtrip(vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 5 * 8), n_kappa in 5usize..16) {
        let u = LineFunction { eps: 1.0, n_per_cell: 8, first_cell: -2, values: vals.iter().map(|&(a, b)| c64(a, b)).collect() };
        let g = gelfand(&u, 2, n_kappa).unwrap();
        prop_assert!((g.norm() - u.norm()).abs() < 1e-12 * (1.0 + u.norm()));
        let back = inverse_gelfand(&g);
        for (x, y) in back.values.iter().zip(&u.values) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn kp_substitution_roundtrip(a in coefs(), tp in 0.0..TAU) {
        let c = cell(0.1);
        let u = EdgeFunction::from_fn(EdgeId::E2, 0.5, 128, modes(&a, 0.5));
        let r = substitution_roundtrip(&u, tp, &c).unwrap();
        let err = (0..=128).map(|i| (r.samples()[i] - u.samples()[i]).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn transfer_matrix_real_trace_unit_det(z in -50.0..400.0f64, l2 in 0.1..1.0f64, coupling in 0.0..2.0f64) {
        let kp = WholeLineKP::new(l2, coupling).unwrap();
        let t = transfer_matrix(z, &kp);
        prop_assert!(t.trace().is_finite());
        prop_assert!((t.determinant() - 1.0).abs() < 1e-12 * t.norm_squared().max(1.0));
    }
}
