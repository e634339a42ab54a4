use mkp_core::calculus::{dd_c, dd_s};
use mkp_core::exterior::scalar::{int, rat};
use mkp_core::exterior::{standard_structures, Blade, ComplexForm, ConstForm, Form, PolyForm, PolyScalar, Rational, DIM};
use mkp_core::mirror_potential::{
    classify_psh, classify_sl_psh, flat_dd_s_constant, global_mkp_deform, mkp_forms, proportionality, PshClass,
};
use mkp_core::stable_forms::ConeSampleConfig;
use proptest::prelude::*;

fn poly() -> impl Strategy<Value = PolyScalar> {
    prop::collection::vec((prop::array::uniform6(0u8..4), -5i64..=5, 1i64..=3), 1..5).prop_map(|terms| {
        let mut p = PolyScalar::zero();
        for (e, n, den) in terms {
            p.add_term(e, rat(n, den));
        }
        p
    })
}

fn affine() -> impl Strategy<Value = PolyScalar> {
    prop::collection::vec(-4i64..=4, DIM + 1).prop_map(|v| {
        let mut p = PolyScalar::constant(rat(v[DIM], 2));
        for (axis, c) in v[..DIM].iter().enumerate() {
            p = p + PolyScalar::var(axis).scale(&int(*c));
        }
        p
    })
}

fn add_wedge(out: &mut PolyForm, a: usize, b: usize, c: &PolyScalar) {
    if let Some((sign, blade)) = Blade::axis(a).wedge(Blade::axis(b)) {
        out.add_term(blade, c.scale(&int(sign as i64)));
    }
}

/// `i∂∂̄φ` assembled from `∂_j∂̄_k φ · dz_j ∧ dz̄_k` with `z_j = x_{2j-1} + i x_{2j}`.
/// Returns the real and imaginary parts.
fn i_ddbar(phi: &PolyScalar) -> (PolyForm, PolyForm) {
    let mut re = Form::zero(2);
    let mut im = Form::zero(2);
    let quarter = rat(1, 4);
    for j in 0..3 {
        for k in 0..3 {
            let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            let second = |p: usize, q: usize| phi.derivative(p).derivative(q);
            // ∂_j∂̄_k φ = a + ib
            let a = (second(xj, xk) + second(yj, yk)).scale(&quarter);
            let b = (second(xj, yk) - second(yj, xk)).scale(&quarter);
            // dz_j ∧ dz̄_k = P + iQ, i(a + ib)(P + iQ) = −(aQ + bP) + i(aP − bQ)
            let neg_a = -a.clone();
            let neg_b = -b.clone();
            add_wedge(&mut re, xj, xk, &neg_b);
            add_wedge(&mut re, yj, yk, &neg_b);
            add_wedge(&mut re, yj, xk, &neg_a);
            add_wedge(&mut re, xj, yk, &a);
            add_wedge(&mut im, xj, xk, &a);
            add_wedge(&mut im, yj, yk, &a);
            add_wedge(&mut im, yj, xk, &neg_b);
            add_wedge(&mut im, xj, yk, &b);
        }
    }
    (re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dd_c_is_i_ddbar(phi in poly()) {
        let (re, im) = i_ddbar(&phi);
        prop_assert!(im.is_zero());
        prop_assert_eq!(dd_c(&phi), re);
    }

    #[test]
    fn mkp_phrasings_agree(phi in poly()) {
        prop_assert!(mkp_forms(&phi).is_consistent());
    }

    #[test]
    fn mkp_forms_are_linear(a in poly(), b in poly(), n in -3i64..=3) {
        let c = rat(n, 2);
        let lhs = mkp_forms(&(a.scale(&c) + b.clone()));
        let (ma, mb) = (mkp_forms(&a), mkp_forms(&b));
        prop_assert_eq!(lhs.rho_out, ma.rho_out.scaled(&c).plus(&mb.rho_out));
        prop_assert_eq!(lhs.sigma_out, ma.sigma_out.scaled(&c).plus(&mb.sigma_out));
    }

    #[test]
    fn affine_terms_are_invisible(phi in poly(), l in affine()) {
        let a = mkp_forms(&phi);
        let b = mkp_forms(&(phi.clone() + l.clone()));
        prop_assert_eq!(&a.rho_out, &b.rho_out);
        prop_assert_eq!(&a.sigma_out, &b.sigma_out);
        prop_assert_eq!(dd_c(&(phi.clone() + l)), dd_c(&phi));
    }

    #[test]
    fn outputs_are_closed(phi in poly()) {
        let m = mkp_forms(&phi);
        prop_assert!(mkp_core::calculus::d(&m.rho_out).is_zero());
        prop_assert!(mkp_core::calculus::d(&m.sigma_out).is_zero());
        prop_assert!(dd_s(&m.rho_out).is_zero());
    }
}

#[test]
fn flat_deformation_scales_omega() {
    let s = standard_structures();
    let omega = ComplexForm::new(PolyForm::from_const(&s.rho0), PolyForm::from_const(&s.sigma0))
        .unwrap();
    let k = flat_dd_s_constant().unwrap();
    let phi = PolyScalar::sum_of_squares().scale(&(int(1) / &k));
    let out = global_mkp_deform(&phi, &omega).unwrap();
    assert_eq!(out, omega.scaled(&int(2)));
}

fn split_quadratic() -> PolyScalar {
    let mut h: [[Rational; DIM]; DIM] = std::array::from_fn(|_| std::array::from_fn(|_| int(0)));
    for (i, v) in [10, 10, 10, 10, -1, -1].into_iter().enumerate() {
        h[i][i] = int(v);
    }
    PolyScalar::quadratic(&h)
}

#[test]
fn sl_psh_does_not_force_psh() {
    let phi = split_quadratic();
    let s = standard_structures();
    let m = mkp_forms(&phi);
    assert_eq!(proportionality(&m.rho_out.convert(|p| p.constant_term()), &s.rho0), Some(int(19)));
    assert_eq!(proportionality(&m.sigma_out.convert(|p| p.constant_term()), &s.sigma0), Some(int(19)));

    let c = dd_c(&phi).convert(|p| p.constant_term());
    let expected = const_two_form(&[(&[1, 2], 10), (&[3, 4], 10), (&[5, 6], -1)]);
    assert_eq!(c, expected);

    let cfg = ConeSampleConfig::default();
    let sl = classify_sl_psh(&phi, &cfg, &[]).unwrap();
    let psh = classify_psh(&phi, &cfg, &[]).unwrap();
    assert_eq!(sl.classification, PshClass::StrictlySlPsh);
    assert_eq!(psh.classification, PshClass::NotPsh);
    assert!(psh.witness.value < 0.0);
}

fn const_two_form(terms: &[(&[usize], i64)]) -> ConstForm {
    let mut f = Form::zero(2);
    for (idx, c) in terms {
        f.add_term(Blade::from_indices(idx).unwrap(), int(*c));
    }
    f
}
