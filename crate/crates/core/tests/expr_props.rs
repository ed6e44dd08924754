//! Property tests for the expression substrate.

use std::sync::OnceLock;

use proptest::prelude::*;

use extgeom::expr::{is_zero, sample_points, Chart, ChartRef, Expr, ZeroCheck};
use extgeom::parse::parse;

/// All generated expressions share one chart instance.
fn chart() -> ChartRef {
    static CHART: OnceLock<ChartRef> = OnceLock::new();
    CHART.get_or_init(|| Chart::standard(4)).clone()
}

/// Random expression trees over two base and two fiber coordinates.
/// Division is kept nonsingular by construction, with denominators of the
/// form (2 + 0.1·u²).
fn arb_expr(depth: u32) -> BoxedStrategy<Expr> {
    let coords = [0usize, 1, 4, 5];
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(|v| Expr::constant(&chart(), v)),
        (0..coords.len()).prop_map(move |i| Expr::coord(&chart(), coords[i])),
    ]
    .boxed();
    if depth == 0 {
        return leaf;
    }
    let sub = arb_expr(depth - 1);
    let sub2 = arb_expr(depth - 1);
    prop_oneof![
        leaf,
        (sub.clone(), sub2.clone()).prop_map(|(a, b)| a.add(&b)),
        (sub.clone(), sub2.clone()).prop_map(|(a, b)| a.sub(&b)),
        (sub.clone(), sub2.clone()).prop_map(|(a, b)| a.mul(&b)),
        (sub.clone(), sub2).prop_map(|(a, b)| {
            let den = Expr::constant(&chart(), 2.0).add(&b.powi(2).scale(0.1));
            a.div(&den)
        }),
        sub.clone().prop_map(|a| a.sin()),
        sub.clone().prop_map(|a| a.cos()),
        sub.clone().prop_map(|a| a.scale(0.3).exp()),
        (sub.clone(), 0u32..4).prop_map(|(a, n)| a.powi(n)),
        sub.prop_map(|a| a.neg()),
    ]
    .boxed()
}

fn assert_zero(res: &Expr, tol: f64, seed: u64) -> Result<(), TestCaseError> {
    match is_zero(res, 64, tol, seed) {
        ZeroCheck::NonZero {
            value, threshold, ..
        } => Err(TestCaseError::fail(format!(
            "residual {value} over threshold {threshold}"
        ))),
        _ => Ok(()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn differentiation_is_linear(
        e1 in arb_expr(3),
        e2 in arb_expr(3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        for coord in [0usize, 4] {
            let combo = e1.scale(a).add(&e2.scale(b)).differentiate(coord);
            let parts = e1
                .differentiate(coord)
                .scale(a)
                .add(&e2.differentiate(coord).scale(b));
            assert_zero(&combo.sub(&parts), 1e-12, seed)?;
        }
    }

    #[test]
    fn mixed_partials_commute(e in arb_expr(3), seed in 0u64..1000) {
        let dxy = e.differentiate(0).differentiate(5);
        let dyx = e.differentiate(5).differentiate(0);
        assert_zero(&dxy.sub(&dyx), 1e-10, seed)?;
    }

    #[test]
    fn render_reparse_is_pointwise_equal(e in arb_expr(3), seed in 0u64..1000) {
        let text = e.to_string();
        let back = parse(&text, &chart()).expect("rendered text must parse");
        for p in sample_points(&chart(), 16, seed) {
            let (Ok(a), Ok(b)) = (e.evaluate(&p), back.evaluate(&p)) else { continue };
            prop_assert!(
                (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                "{text}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn zero_test_is_deterministic(e in arb_expr(2), seed in 0u64..1000) {
        let first = is_zero(&e, 32, 1e-9, seed);
        let second = is_zero(&e, 32, 1e-9, seed);
        prop_assert_eq!(first, second);
    }
}
