//! Transformation laws, Jacobi constraints and behavior checks on gauge and
//! extended configurations.

use extgeom::algebra::{preset, PresetKind, StructureConstants};
use extgeom::expr::{sample_points, Chart, Expr};
use extgeom::frames::{
    adjoint_corrected_exprs, adjoint_strict_exprs, central_extension_exprs, field_strength,
    jacobi_residual_exprs, transform_configuration, transformation_crosscheck,
    ExtensionCoefficients, Frame,
};
use extgeom::report::{IdentityTag, ResidualReport, RowKind};
use extgeom::samples::{adjoint_one_form, smooth_one_form};
use extgeom::tensor::arr2;

fn identity_report(name: &str, exprs: &[Expr], ch: &extgeom::ChartRef, tol: f64) -> ResidualReport {
    let pts = sample_points(ch, 64, 0);
    ResidualReport::from_exprs(
        name,
        IdentityTag::JacobiBaseBaseFiber,
        RowKind::Identity,
        exprs,
        &pts,
        tol,
    )
}

#[test]
fn hand_computed_abelian_field_strength() {
    // α^0_μ = (−x1, 0, 0, 0): the curl gives β^0_{01} = 1, β^0_{10} = −1,
    // everything else zero.
    let ch = Chart::standard(1);
    let f = StructureConstants::zeros(1);
    let x1 = Expr::coord(&ch, 1);
    let alpha = arr2(
        1,
        4,
        |_, mu| if mu == 0 { x1.neg() } else { Expr::zero(&ch) },
    );
    let beta = field_strength(&ch, &alpha, &f);
    let p = vec![0.3, -0.7, 0.2, 0.9, 0.1];
    for mu in 0..4 {
        for nu in 0..4 {
            let expect = match (mu, nu) {
                (0, 1) => 1.0,
                (1, 0) => -1.0,
                _ => 0.0,
            };
            assert_eq!(beta.get(&[0, mu, nu]).evaluate(&p).unwrap(), expect);
        }
    }
}

#[test]
fn pure_gauge_abelian_field_strength_vanishes() {
    // α^a_μ = ∂_μ φ^a has zero curl by symmetry of second derivatives.
    let ch = Chart::standard(1);
    let f = StructureConstants::zeros(1);
    let x0 = Expr::coord(&ch, 0);
    let x2 = Expr::coord(&ch, 2);
    let phi = x0.mul(&x2).sin().add(&x0.powi(3).scale(0.2));
    let alpha = arr2(1, 4, |_, mu| phi.differentiate(mu));
    let beta = field_strength(&ch, &alpha, &f);
    let rep = identity_report("pure gauge", beta.components(), &ch, 1e-12);
    assert!(rep.passed(), "max {}", rep.max_abs);
}

#[test]
fn gauge_configuration_with_random_one_form_passes_jacobi() {
    for kind in [PresetKind::Abelian4, PresetKind::Su2, PresetKind::Su2xU1] {
        let ch = Chart::standard(kind.dim());
        let group = preset(kind, &ch).unwrap();
        let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
        let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
        let alpha = smooth_one_form(&ch, kind.dim(), 5, true);
        let changed = transform_configuration(&frame, &trivial, &alpha);
        let [yyy, yyx, yxx] =
            jacobi_residual_exprs(&changed.frame.base, &changed.frame.fiber, &changed.coeffs);
        for (name, exprs) in [("yyy", yyy), ("yyx", yyx), ("yxx", yxx)] {
            let rep = identity_report(name, &exprs, &ch, 1e-8);
            assert!(rep.passed(), "{kind:?} {name}: max {}", rep.max_abs);
        }
    }
}

#[test]
fn adjoint_one_form_gives_direct_product_and_central_extension() {
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
    let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
    let alpha = adjoint_one_form(&ch, PresetKind::Su2xU1, 23);
    let changed = transform_configuration(&frame, &trivial, &alpha);

    // C′ = 0: the change preserves the direct product.
    let rep = identity_report(
        "transformed coefficients vanish",
        changed.coeffs.c.components(),
        &ch,
        1e-8,
    );
    assert!(rep.passed(), "max {}", rep.max_abs);

    // The non-linearity indicator equals the curl-plus-quadratic formula.
    let beta_ym = field_strength(&ch, &alpha, &group.constants);
    let diff: Vec<Expr> = changed
        .coeffs
        .beta
        .components()
        .iter()
        .zip(beta_ym.components())
        .map(|(a, b)| a.sub(b))
        .collect();
    let rep = identity_report("field strength matches", &diff, &ch, 1e-8);
    assert!(rep.passed(), "max {}", rep.max_abs);

    // β lies in the adjoint: the central-extension residual vanishes.
    let rep = identity_report(
        "central extension",
        &central_extension_exprs(&changed.coeffs.beta, &group.fiber_fields, &group.constants),
        &ch,
        1e-8,
    );
    assert!(rep.passed(), "max {}", rep.max_abs);
}

#[test]
fn base_only_field_on_abelian_fibers_is_strictly_adjoint() {
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Abelian4, &ch).unwrap();
    let field = smooth_one_form(&ch, 4, 3, false);
    let exprs = adjoint_strict_exprs(&field, &group.fiber_fields, &group.constants);
    let rep = identity_report("strict adjoint", &exprs, &ch, 1e-12);
    assert!(rep.passed());
}

#[test]
fn deformed_one_form_misbehaves_by_its_coefficients() {
    // A generic (non-adjoint) change: the strict residual is exactly the
    // transformed commutation coefficients, so the corrected residual is
    // zero.
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
    let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
    let sigma = smooth_one_form(&ch, 4, 31, true);
    let changed = transform_configuration(&frame, &trivial, &sigma);
    let corrected = adjoint_corrected_exprs(
        &sigma,
        &group.fiber_fields,
        &group.constants,
        &changed.coeffs.c,
    );
    let rep = identity_report("corrected behavior", &corrected, &ch, 1e-10);
    assert!(rep.passed(), "max {}", rep.max_abs);

    // And the strict residual is visibly nonzero for a fiber-dependent σ.
    let strict = adjoint_strict_exprs(&sigma, &group.fiber_fields, &group.constants);
    let rep = identity_report("strict behavior", &strict, &ch, 1e-8);
    assert!(!rep.passed());
}

#[test]
fn broken_beta_fails_jacobi_with_witness() {
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
    let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
    let alpha = smooth_one_form(&ch, 4, 9, true);
    let mut changed = transform_configuration(&frame, &trivial, &alpha);
    // Perturb β in one component without adjusting C.
    let bumped = changed
        .coeffs
        .beta
        .get(&[1, 0, 2])
        .add(&Expr::constant(&ch, 1e-2));
    changed.coeffs.beta.set(&[1, 0, 2], bumped);
    let [_, yyx, _] =
        jacobi_residual_exprs(&changed.frame.base, &changed.frame.fiber, &changed.coeffs);
    let rep = identity_report("broken", &yyx, &ch, 1e-8);
    assert!(!rep.passed());
    assert!(rep.witness.is_some());
}

#[test]
fn non_adjoint_beta_fails_central_extension() {
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let th0 = Expr::coord_name(&ch, "th0").unwrap();
    let mut beta = extgeom::tensor::arr3(4, 4, 4, |_, _, _| Expr::zero(&ch));
    beta.set(&[0, 0, 1], th0.sin());
    beta.set(&[0, 1, 0], th0.sin().neg());
    let exprs = central_extension_exprs(&beta, &group.fiber_fields, &group.constants);
    let rep = identity_report("non-adjoint beta", &exprs, &ch, 1e-8);
    assert!(!rep.passed());
    assert!(rep.witness.is_some());
}

#[test]
fn jacobi_preserved_under_second_random_change() {
    // A configuration passing the closure constraints still passes after a
    // further change of basis with the transformed coefficients.
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
    let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
    for seed in [1u64, 2, 3] {
        let alpha = smooth_one_form(&ch, 4, seed, true);
        let gamma = smooth_one_form(&ch, 4, seed + 100, true);
        let first = transform_configuration(&frame, &trivial, &alpha);
        let second = transform_configuration(&first.frame, &first.coeffs, &gamma);
        let [yyy, yyx, yxx] =
            jacobi_residual_exprs(&second.frame.base, &second.frame.fiber, &second.coeffs);
        for (name, exprs) in [("yyy", yyy), ("yyx", yyx), ("yxx", yxx)] {
            let rep = identity_report(name, &exprs, &ch, 1e-8);
            assert!(rep.passed(), "seed {seed} {name}: max {}", rep.max_abs);
        }
        // And the coefficients agree with the twice-changed frame.
        let pts = sample_points(&ch, 64, seed);
        let rows = transformation_crosscheck(&second, &pts, 1e-8);
        for r in rows {
            assert!(r.passed(), "seed {seed}: {} max {}", r.identity, r.max_abs);
        }
    }
}

#[test]
fn crosscheck_reports_inconclusive_on_evaluation_failure() {
    // A symbolic coefficient that errors at every point must surface as an
    // inconclusive verdict, never as a silent pass.
    let ch = Chart::standard(4);
    let group = preset(PresetKind::Su2xU1, &ch).unwrap();
    let frame = Frame::holonomic(&ch, group.fiber_fields.clone());
    let trivial = ExtensionCoefficients::trivial(&ch, group.constants.clone());
    let alpha = smooth_one_form(&ch, 4, 77, true);
    let mut changed = transform_configuration(&frame, &trivial, &alpha);
    let x0 = Expr::coord(&ch, 0);
    changed
        .coeffs
        .c
        .set(&[0, 0, 0], Expr::one(&ch).div(&x0.sub(&x0)));
    let pts = sample_points(&ch, 8, 0);
    let [c_row, _] = transformation_crosscheck(&changed, &pts, 1e-8);
    assert_eq!(c_row.verdict, extgeom::Verdict::Inconclusive);
    assert!(c_row.error.is_some());
}
