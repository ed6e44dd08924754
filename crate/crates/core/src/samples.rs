//! Deterministic generators for scenario ingredients: smooth one-forms,
//! connection-behaved one-forms, and tetrad tables whose induced metric is
//! gauge invariant. Everything is seeded; the acceptance and regression
//! suites lean on these.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::PresetKind;
use crate::expr::{ChartRef, Expr};
use crate::tensor::{arr1, arr2, sum_over, ExprArray};

/// A random smooth expression from a division-free family:
/// c0 + c1·u + c2·sin(v) + c3·u·cos(w) with small coefficients.
fn smooth_entry(chart: &ChartRef, rng: &mut ChaCha8Rng, coords: &[usize], amp: f64) -> Expr {
    let pick = |rng: &mut ChaCha8Rng| coords[rng.gen_range(0..coords.len())];
    let u = Expr::coord(chart, pick(rng));
    let v = Expr::coord(chart, pick(rng));
    let w = Expr::coord(chart, pick(rng));
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-amp..amp)).collect();
    Expr::constant(chart, c[0])
        .add(&u.scale(c[1]))
        .add(&v.sin().scale(c[2]))
        .add(&u.mul(&w.cos()).scale(c[3]))
}

/// Random smooth one-form table α^a_μ. With `fiber_dependent` the entries
/// may reference fiber coordinates too.
pub fn smooth_one_form(
    chart: &ChartRef,
    dim_g: usize,
    seed: u64,
    fiber_dependent: bool,
) -> ExprArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<usize> = if fiber_dependent {
        (0..chart.dim()).collect()
    } else {
        (0..4).collect()
    };
    arr2(dim_g, 4, |_, _| smooth_entry(chart, &mut rng, &coords, 0.4))
}

/// 3x3 rotation about internal axis k by an expression angle, in the basis
/// where the fiber commutators are the alternating symbol.
fn axis_rotation(chart: &ChartRef, k: usize, angle: &Expr) -> ExprArray {
    let p = (k + 1) % 3;
    let q = (k + 2) % 3;
    let (c, s) = (angle.cos(), angle.sin());
    arr2(3, 3, |i, j| {
        if i == k && j == k {
            Expr::one(chart)
        } else if i == p && j == p || i == q && j == q {
            c.clone()
        } else if i == q && j == p {
            s.clone()
        } else if i == p && j == q {
            s.neg()
        } else {
            Expr::zero(chart)
        }
    })
}

fn mat_mul3(chart: &ChartRef, a: &ExprArray, b: &ExprArray) -> ExprArray {
    arr2(3, 3, |i, j| {
        sum_over(chart, 3, |k| a.get(&[i, k]).mul(b.get(&[k, j])))
    })
}

/// The group action on functions, resolved along the su(2) coordinates:
/// rows transform in the adjoint, so contracting with base-dependent
/// coefficients yields a connection-behaved one-form.
fn su2_adjoint_inverse(chart: &ChartRef) -> ExprArray {
    let t = |i: usize| Expr::coord(chart, chart.fiber_index(i));
    let r0 = axis_rotation(chart, 0, &t(0).neg());
    let r1 = axis_rotation(chart, 1, &t(1).neg());
    let r2 = axis_rotation(chart, 2, &t(2).neg());
    mat_mul3(chart, &mat_mul3(chart, &r2, &r1), &r0)
}

/// A connection-behaved one-form for the preset: fiber derivatives act in
/// the adjoint representation, so the transformed commutation coefficients
/// vanish identically.
pub fn adjoint_one_form(chart: &ChartRef, kind: PresetKind, seed: u64) -> ExprArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim_g = kind.dim();
    let base: Vec<usize> = (0..4).collect();
    match kind {
        PresetKind::Abelian4 | PresetKind::U1 => {
            arr2(dim_g, 4, |_, _| smooth_entry(chart, &mut rng, &base, 0.4))
        }
        PresetKind::Su2 | PresetKind::Su2xU1 => {
            let w = arr2(dim_g, 4, |_, _| smooth_entry(chart, &mut rng, &base, 0.4));
            let ad = su2_adjoint_inverse(chart);
            arr2(dim_g, 4, |a, mu| {
                if a < 3 {
                    sum_over(chart, 3, |b| ad.get(&[a, b]).mul(w.get(&[b, mu])))
                } else {
                    w.get(&[a, mu]).clone()
                }
            })
        }
    }
}

/// A tetrad table H^a_μ = R(θ)^a_b W^b_μ(x): an internal rotation with
/// fiber-dependent angles times a diagonally dominant base-dependent part.
/// R is orthogonal, so the induced Euclidean metric g = WᵀW carries no
/// fiber dependence and stays gauge invariant, which the conservation law
/// requires; W keeps |det H| well away from zero on the sampling box.
pub fn rotation_tetrad(chart: &ChartRef, seed: u64) -> ExprArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<usize> = (0..4).collect();

    // W: identity plus small base-dependent diagonal terms and a few sparse
    // off-diagonal ones. Sparse keeps the symbolic inverse tame while still
    // exercising every index path.
    let mut w = arr2(4, 4, |a, mu| {
        Expr::constant(chart, if a == mu { 1.0 } else { 0.0 })
    });
    for a in 0..4 {
        let bump = smooth_entry(chart, &mut rng, &base, 0.2);
        w.set(&[a, a], w.get(&[a, a]).add(&bump));
    }
    for _ in 0..3 {
        let a = rng.gen_range(0..4);
        let mu = rng.gen_range(0..4);
        if a != mu {
            let u = Expr::coord(chart, base[rng.gen_range(0..base.len())]);
            let bump = u.sin().scale(rng.gen_range(-0.08..0.08));
            w.set(&[a, mu], w.get(&[a, mu]).add(&bump));
        }
    }

    // R: two su(2)-axis rotations with angles linear in fiber coordinates,
    // embedded in the 4x4 block with the central direction fixed.
    let t = |i: usize| Expr::coord(chart, chart.fiber_index(i));
    let ang0 = t(rng.gen_range(0..3)).scale(rng.gen_range(0.2..0.5));
    let ang1 = t(rng.gen_range(0..3)).scale(rng.gen_range(0.2..0.5));
    let r3 = mat_mul3(
        chart,
        &axis_rotation(chart, rng.gen_range(0..3), &ang0),
        &axis_rotation(chart, rng.gen_range(0..3), &ang1),
    );
    let rot = arr2(4, 4, |a, b| {
        if a < 3 && b < 3 {
            r3.get(&[a, b]).clone()
        } else {
            Expr::constant(chart, if a == b { 1.0 } else { 0.0 })
        }
    });

    arr2(4, 4, |a, mu| {
        sum_over(chart, 4, |b| rot.get(&[a, b]).mul(w.get(&[b, mu])))
    })
}

/// A generic fiber-dependent tetrad with no orthogonality structure; its
/// induced metric is not gauge invariant, which lets the suite demonstrate
/// when conservation genuinely needs that precondition.
pub fn skew_tetrad(chart: &ChartRef, seed: u64) -> ExprArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..chart.dim()).collect();
    arr2(4, 4, |a, mu| {
        let base = Expr::constant(chart, if a == mu { 1.0 } else { 0.0 });
        base.add(&smooth_entry(chart, &mut rng, &all, 0.12))
    })
}

/// Deterministic polynomial test object Z^c for the enlarged-derivative
/// checks.
pub fn test_internal_vector(chart: &ChartRef, dim_g: usize, seed: u64) -> ExprArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..chart.dim()).collect();
    arr1(dim_g, |_| smooth_entry(chart, &mut rng, &all, 0.5))
}

/// The abelian transverse plane wave: α^0_2 = cos(x0 − x1), a sourceless
/// solution of the flat-metric field equations in the Lorentzian signature.
pub fn plane_wave_one_form(chart: &ChartRef) -> ExprArray {
    let x0 = Expr::coord(chart, 0);
    let x1 = Expr::coord(chart, 1);
    arr2(1, 4, |_, mu| {
        if mu == 2 {
            x0.sub(&x1).cos()
        } else {
            Expr::zero(chart)
        }
    })
}
