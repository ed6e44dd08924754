//! Duality-prescription dynamics: the metric built from the tetrad, the
//! field-equation residuals, the extracted source current with its
//! conservation law, and the Hodge dual.

use thiserror::Error;

use crate::expr::{ChartRef, DiffCache, Expr};
use crate::frames::VectorField;
use crate::geometry::{Tetrad, TetradGeometry};
use crate::tensor::{arr2, arr3, sum_over, sum_over2, ExprArray};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("internal metric must be symmetric and nondegenerate")]
    DegenerateInternalMetric,
    #[error("metric table must be symmetric")]
    NotSymmetric,
    #[error("metric table must be 4x4, got {0:?}")]
    BadShape(Vec<usize>),
    #[error(
        "Hodge duality needs a square-root density; only tetrad or constant metrics carry one"
    )]
    NoDensity,
}

/// Spacetime metric with its inverse and the fiducial internal metric it
/// was built from. `sqrt_abs_det` is carried when the metric source admits
/// one in closed form (tetrad metrics: |det η|^(1/2)·|det H|; constant
/// metrics: a constant).
#[derive(Debug, Clone)]
pub struct Metric {
    pub g: ExprArray,
    pub ginv: ExprArray,
    pub internal: Vec<Vec<f64>>,
    pub sqrt_abs_det: Option<Expr>,
}

/// η itself as a 4x4 constant table: the flat metric of the gauge stage.
pub fn constant_metric(chart: &ChartRef, eta: &[Vec<f64>]) -> Result<Metric, DynamicsError> {
    if eta.len() != 4 || eta.iter().any(|r| r.len() != 4) {
        return Err(DynamicsError::BadShape(vec![eta.len()]));
    }
    for i in 0..4 {
        for j in 0..4 {
            if eta[i][j] != eta[j][i] {
                return Err(DynamicsError::NotSymmetric);
            }
        }
    }
    let m = nalgebra::DMatrix::from_fn(4, 4, |i, j| eta[i][j]);
    let det = m.determinant();
    if det.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateInternalMetric);
    }
    let minv = m
        .clone()
        .try_inverse()
        .ok_or(DynamicsError::DegenerateInternalMetric)?;
    Ok(Metric {
        g: arr2(4, 4, |i, j| Expr::constant(chart, m[(i, j)])),
        ginv: arr2(4, 4, |i, j| Expr::constant(chart, minv[(i, j)])),
        internal: eta.to_vec(),
        sqrt_abs_det: Some(Expr::constant(chart, det.abs().sqrt())),
    })
}

pub fn euclidean_eta() -> Vec<Vec<f64>> {
    (0..4)
        .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn minkowski_eta() -> Vec<Vec<f64>> {
    (0..4)
        .map(|i| {
            (0..4)
                .map(|j| {
                    if i != j {
                        0.0
                    } else if i == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// g_{μν} = η_{ab} H^a_μ H^b_ν with inverse H_a^μ η^{ab} H_b^ν.
pub fn metric_from_tetrad(
    chart: &ChartRef,
    tetrad: &Tetrad,
    eta: &[Vec<f64>],
) -> Result<Metric, DynamicsError> {
    if eta.len() != 4 || eta.iter().any(|r| r.len() != 4) {
        return Err(DynamicsError::BadShape(vec![eta.len()]));
    }
    let m = nalgebra::DMatrix::from_fn(4, 4, |i, j| eta[i][j]);
    if m != m.transpose() {
        return Err(DynamicsError::NotSymmetric);
    }
    let eta_det = m.determinant();
    if eta_det.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateInternalMetric);
    }
    let eta_inv = m
        .try_inverse()
        .ok_or(DynamicsError::DegenerateInternalMetric)?;
    let g = arr2(4, 4, |mu, nu| {
        sum_over2(chart, 4, 4, |a, b| {
            tetrad
                .h
                .get(&[a, mu])
                .mul(tetrad.h.get(&[b, nu]))
                .scale(eta[a][b])
        })
    });
    let ginv = arr2(4, 4, |mu, nu| {
        sum_over2(chart, 4, 4, |a, b| {
            tetrad
                .hinv
                .get(&[a, mu])
                .mul(tetrad.hinv.get(&[b, nu]))
                .scale(eta_inv[(a, b)])
        })
    });
    // |det g|^(1/2) = |det η|^(1/2) · |det H|. The determinant keeps a
    // fixed sign on a connected sampling box, so carry the signed product;
    // the runner orients it positive against a sample point.
    let sqrt_abs_det = Some(tetrad.det.scale(eta_det.abs().sqrt()));
    Ok(Metric {
        g,
        ginv,
        internal: eta.to_vec(),
        sqrt_abs_det,
    })
}

impl Metric {
    /// g_{μν} − g_{νμ} (identically zero by construction) and
    /// g·g⁻¹ − 1 pointwise.
    pub fn consistency_exprs(&self, chart: &ChartRef) -> Vec<Expr> {
        let mut out = Vec::new();
        for mu in 0..4 {
            for nu in 0..4 {
                out.push(self.g.get(&[mu, nu]).sub(self.g.get(&[nu, mu])));
                let prod = sum_over(chart, 4, |rho| {
                    self.g.get(&[mu, rho]).mul(self.ginv.get(&[rho, nu]))
                });
                let delta = Expr::constant(chart, if mu == nu { 1.0 } else { 0.0 });
                out.push(prod.sub(&delta));
            }
        }
        out
    }

    /// Raise both spacetime indices of a [a][μ][ν] two-form table.
    pub fn raise_two_form(&self, chart: &ChartRef, two_form: &ExprArray) -> ExprArray {
        let d = two_form.shape()[0];
        arr3(d, 4, 4, |a, mu, nu| {
            sum_over2(chart, 4, 4, |r, s| {
                self.ginv
                    .get(&[mu, r])
                    .mul(self.ginv.get(&[nu, s]))
                    .mul(two_form.get(&[a, r, s]))
            })
        })
    }
}

/// X_μ β^{aμν} = 0: the sourceless field equations of the direct-product
/// configuration (indices raised with the metric).
pub fn yang_mills_exprs(
    chart: &ChartRef,
    beta: &ExprArray,
    metric: &Metric,
    base_fields: &[VectorField],
) -> Vec<Expr> {
    let d = beta.shape()[0];
    let raised = metric.raise_two_form(chart, beta);
    let mut cache = DiffCache::new();
    let mut out = Vec::new();
    for a in 0..d {
        for nu in 0..4 {
            out.push(Expr::sum(
                chart,
                (0..4).map(|mu| base_fields[mu].apply_with(raised.get(&[a, mu, nu]), &mut cache)),
            ));
        }
    }
    out
}

/// X′_μ β′^{aμν} − C′^a_{dμ} β′^{dμν} − J^{aν}: the extended field
/// equations, the enlarged derivative recognized on the internal index.
pub fn extended_field_eq_exprs(
    chart: &ChartRef,
    beta_internal: &ExprArray,
    deviation: &ExprArray,
    metric: &Metric,
    base_fields: &[VectorField],
    source: Option<&ExprArray>,
) -> Vec<Expr> {
    let d = beta_internal.shape()[0];
    let raised = metric.raise_two_form(chart, beta_internal);
    let mut cache = DiffCache::new();
    let mut out = Vec::new();
    for a in 0..d {
        for nu in 0..4 {
            let div = Expr::sum(
                chart,
                (0..4).map(|mu| base_fields[mu].apply_with(raised.get(&[a, mu, nu]), &mut cache)),
            );
            // −C′^a_{dμ} β′^{dμν} = +C′^a_{μd} β′^{dμν}
            let corr = sum_over2(chart, 4, d, |mu, dd| {
                deviation.get(&[a, mu, dd]).mul(raised.get(&[dd, mu, nu]))
            });
            let mut r = div.add(&corr);
            if let Some(j) = source {
                r = r.sub(j.get(&[a, nu]));
            }
            out.push(r);
        }
    }
    out
}

/// J^{aν} = X′*_μ β′^{aμν}: the source current extracted from the field
/// equations.
pub fn source_current(geo: &TetradGeometry, metric: &Metric) -> ExprArray {
    let chart = &geo.chart;
    let raised = metric.raise_two_form(chart, &geo.beta_internal);
    let mut cache = DiffCache::new();
    arr2(4, 4, |a, nu| {
        let div = Expr::sum(
            chart,
            (0..4).map(|mu| geo.xp[mu].apply_with(raised.get(&[a, mu, nu]), &mut cache)),
        );
        let corr = sum_over2(chart, 4, 4, |mu, dd| {
            geo.deviation
                .get(&[a, mu, dd])
                .mul(raised.get(&[dd, mu, nu]))
        });
        div.add(&corr)
    })
}

/// X′*_ν J^{aν}: current conservation, the enlarged derivative acting on
/// the internal index. Exact whenever the metric is gauge invariant
/// (fiber-independent), which the tetrad construction must arrange.
pub fn conservation_exprs(geo: &TetradGeometry, current: &ExprArray) -> Vec<Expr> {
    let chart = &geo.chart;
    let mut cache = DiffCache::new();
    (0..4)
        .map(|a| {
            let div = Expr::sum(
                chart,
                (0..4).map(|nu| geo.xp[nu].apply_with(current.get(&[a, nu]), &mut cache)),
            );
            let corr = sum_over2(chart, 4, 4, |nu, dd| {
                geo.deviation.get(&[a, nu, dd]).mul(current.get(&[dd, nu]))
            });
            div.add(&corr)
        })
        .collect()
}

/// D_λ g_{μν} = X′_λ g_{μν} + Γ^ρ_{μλ} g_{ρν} + Γ^ρ_{νλ} g_{μρ}: the
/// metric-preservation diagnostic (reported, not enforced).
pub fn metric_compatibility_exprs(geo: &TetradGeometry, metric: &Metric) -> Vec<Expr> {
    let chart = &geo.chart;
    let gamma = |l: usize, n: usize, m: usize| geo.beta_spacetime.get(&[l, m, n]).clone();
    let mut cache = DiffCache::new();
    let mut out = Vec::new();
    for l in 0..4 {
        for mu in 0..4 {
            for nu in mu..4 {
                let deriv = geo.xp[l].apply_with(metric.g.get(&[mu, nu]), &mut cache);
                let corr = sum_over(chart, 4, |rho| {
                    gamma(rho, mu, l)
                        .mul(metric.g.get(&[rho, nu]))
                        .add(&gamma(rho, nu, l).mul(metric.g.get(&[mu, rho])))
                });
                out.push(deriv.add(&corr));
            }
        }
    }
    out
}

const EPS4: [(usize, usize, usize, usize, f64); 24] = [
    (0, 1, 2, 3, 1.0),
    (0, 1, 3, 2, -1.0),
    (0, 2, 1, 3, -1.0),
    (0, 2, 3, 1, 1.0),
    (0, 3, 1, 2, 1.0),
    (0, 3, 2, 1, -1.0),
    (1, 0, 2, 3, -1.0),
    (1, 0, 3, 2, 1.0),
    (1, 2, 0, 3, 1.0),
    (1, 2, 3, 0, -1.0),
    (1, 3, 0, 2, -1.0),
    (1, 3, 2, 0, 1.0),
    (2, 0, 1, 3, 1.0),
    (2, 0, 3, 1, -1.0),
    (2, 1, 0, 3, -1.0),
    (2, 1, 3, 0, 1.0),
    (2, 3, 0, 1, 1.0),
    (2, 3, 1, 0, -1.0),
    (3, 0, 1, 2, -1.0),
    (3, 0, 2, 1, 1.0),
    (3, 1, 0, 2, 1.0),
    (3, 1, 2, 0, -1.0),
    (3, 2, 0, 1, -1.0),
    (3, 2, 1, 0, 1.0),
];

/// Totally antisymmetric symbol with ε_{0123} = +1.
pub fn epsilon4(mu: usize, nu: usize, rho: usize, sigma: usize) -> f64 {
    for &(a, b, c, d, s) in &EPS4 {
        if (a, b, c, d) == (mu, nu, rho, sigma) {
            return s;
        }
    }
    0.0
}

/// (*β)^a_{μν} = ½ |det g|^(1/2) ε_{μνρσ} g^{ρκ} g^{σλ} β^a_{κλ}.
pub fn hodge_dual(
    chart: &ChartRef,
    two_form: &ExprArray,
    metric: &Metric,
) -> Result<ExprArray, DynamicsError> {
    let density = metric
        .sqrt_abs_det
        .clone()
        .ok_or(DynamicsError::NoDensity)?;
    let d = two_form.shape()[0];
    let raised = metric.raise_two_form(chart, two_form);
    Ok(arr3(d, 4, 4, |a, mu, nu| {
        let sum = Expr::sum(
            chart,
            EPS4.iter()
                .filter(|&&(m, n, _, _, _)| m == mu && n == nu)
                .map(|&(_, _, rho, sg, sign)| raised.get(&[a, rho, sg]).scale(sign)),
        );
        sum.mul(&density).scale(0.5)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StructureConstants;
    use crate::expr::{sample_points, Chart};
    use crate::frames::{field_strength, VectorField};
    use crate::tensor::arr2;

    #[test]
    fn identity_tetrad_gives_identity_metric() {
        let ch = Chart::standard(4);
        let h = arr2(4, 4, |a, mu| {
            Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 })
        });
        let tet = Tetrad::new(&ch, h).unwrap();
        let m = metric_from_tetrad(&ch, &tet, &euclidean_eta()).unwrap();
        let p = vec![0.1; 8];
        for mu in 0..4 {
            for nu in 0..4 {
                let expect = if mu == nu { 1.0 } else { 0.0 };
                assert_eq!(m.g.get(&[mu, nu]).evaluate(&p).unwrap(), expect);
                assert_eq!(m.ginv.get(&[mu, nu]).evaluate(&p).unwrap(), expect);
            }
        }
    }

    #[test]
    fn diagonal_tetrad_squares_entries_and_inverts() {
        let ch = Chart::standard(4);
        let x0 = Expr::coord(&ch, 0);
        let h = arr2(4, 4, |a, mu| {
            if a == mu {
                Expr::one(&ch).add(&x0.powi(2).scale(0.5 * (a as f64 + 1.0)))
            } else {
                Expr::zero(&ch)
            }
        });
        let tet = Tetrad::new(&ch, h.clone()).unwrap();
        let m = metric_from_tetrad(&ch, &tet, &euclidean_eta()).unwrap();
        let pts = sample_points(&ch, 16, 0);
        for p in &pts {
            for mu in 0..4 {
                let hv = h.get(&[mu, mu]).evaluate(p).unwrap();
                assert!((m.g.get(&[mu, mu]).evaluate(p).unwrap() - hv * hv).abs() < 1e-12);
            }
        }
        let res = m.consistency_exprs(&ch);
        for e in &res {
            for p in &pts {
                assert!(e.evaluate(p).unwrap().abs() < 1e-11);
            }
        }
    }

    #[test]
    fn random_tetrad_metric_inverse_holds_pointwise() {
        let ch = Chart::standard(4);
        let x1 = Expr::coord(&ch, 1);
        let h = arr2(4, 4, |a, mu| {
            let base = Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 });
            base.add(
                &x1.sin()
                    .scale(0.15 * (((a + mu * 3) % 5) as f64 - 2.0) / 2.0),
            )
        });
        let tet = Tetrad::new(&ch, h).unwrap();
        let m = metric_from_tetrad(&ch, &tet, &minkowski_eta()).unwrap();
        let pts = sample_points(&ch, 32, 1);
        for e in m.consistency_exprs(&ch) {
            for p in &pts {
                assert!(e.evaluate(p).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_internal_metric_rejected() {
        let ch = Chart::standard(4);
        let h = arr2(4, 4, |a, mu| {
            Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 })
        });
        let tet = Tetrad::new(&ch, h).unwrap();
        let mut eta = euclidean_eta();
        eta[2][2] = 0.0;
        assert!(matches!(
            metric_from_tetrad(&ch, &tet, &eta),
            Err(DynamicsError::DegenerateInternalMetric)
        ));
    }

    #[test]
    fn plane_wave_solves_yang_mills_in_minkowski() {
        // Abelian transverse wave α^0_2 = cos(x0 − x1).
        let ch = Chart::standard(1);
        let f = StructureConstants::zeros(1);
        let x0 = Expr::coord(&ch, 0);
        let x1 = Expr::coord(&ch, 1);
        let alpha = arr2(1, 4, |_, mu| {
            if mu == 2 {
                x0.sub(&x1).cos()
            } else {
                Expr::zero(&ch)
            }
        });
        let beta = field_strength(&ch, &alpha, &f);
        let metric = constant_metric(&ch, &minkowski_eta()).unwrap();
        let base: Vec<VectorField> = (0..4).map(|mu| VectorField::coordinate(&ch, mu)).collect();
        let exprs = yang_mills_exprs(&ch, &beta, &metric, &base);
        let pts = sample_points(&ch, 64, 0);
        for e in &exprs {
            for p in &pts {
                assert!(e.evaluate(p).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn longitudinal_wave_fails_yang_mills() {
        let ch = Chart::standard(1);
        let f = StructureConstants::zeros(1);
        let x0 = Expr::coord(&ch, 0);
        let x1 = Expr::coord(&ch, 1);
        let alpha = arr2(1, 4, |_, mu| {
            if mu == 1 {
                x0.sub(&x1).cos()
            } else {
                Expr::zero(&ch)
            }
        });
        let beta = field_strength(&ch, &alpha, &f);
        let metric = constant_metric(&ch, &minkowski_eta()).unwrap();
        let base: Vec<VectorField> = (0..4).map(|mu| VectorField::coordinate(&ch, mu)).collect();
        let exprs = yang_mills_exprs(&ch, &beta, &metric, &base);
        let p = vec![0.3, -0.2, 0.1, 0.0, 0.0];
        let worst = exprs
            .iter()
            .map(|e| e.evaluate(&p).unwrap().abs())
            .fold(0.0f64, f64::max);
        assert!(worst > 1e-2);
    }

    #[test]
    fn hodge_on_flat_euclidean_permutes_components() {
        let ch = Chart::standard(1);
        let metric = constant_metric(&ch, &euclidean_eta()).unwrap();
        // β^0_{01} = 1 → (*β)^0_{23} = 1.
        let beta = arr3(1, 4, 4, |_, mu, nu| {
            Expr::constant(
                &ch,
                if (mu, nu) == (0, 1) {
                    1.0
                } else if (mu, nu) == (1, 0) {
                    -1.0
                } else {
                    0.0
                },
            )
        });
        let dual = hodge_dual(&ch, &beta, &metric).unwrap();
        let p = vec![0.0; 5];
        assert_eq!(dual.get(&[0, 2, 3]).evaluate(&p).unwrap(), 1.0);
        assert_eq!(dual.get(&[0, 3, 2]).evaluate(&p).unwrap(), -1.0);
        assert_eq!(dual.get(&[0, 0, 1]).evaluate(&p).unwrap(), 0.0);
    }

    #[test]
    fn double_dual_is_identity_on_flat_euclidean() {
        // Sign oracle: brute force over index permutations says the double
        // dual of a 2-form in 4 Euclidean dimensions is +1.
        let mut sign_oracle = [[0.0f64; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                // (**β)_{μν} = ¼ ε_{μνρσ} ε_{ρσκλ} β_{κλ} summed; evaluate
                // the coefficient of β_{μν} itself.
                let mut coeff = 0.0;
                for rho in 0..4 {
                    for sg in 0..4 {
                        coeff += 0.25 * epsilon4(mu, nu, rho, sg) * epsilon4(rho, sg, mu, nu);
                    }
                }
                sign_oracle[mu][nu] = coeff * 2.0; // both β_{μν} and β ν μ contribute
            }
        }
        for mu in 0..4 {
            for nu in 0..4 {
                if mu != nu {
                    assert!((sign_oracle[mu][nu] - 1.0).abs() < 1e-14);
                }
            }
        }

        let ch = Chart::standard(1);
        let metric = constant_metric(&ch, &euclidean_eta()).unwrap();
        let x0 = Expr::coord(&ch, 0);
        let mut beta = ExprArray::zeros(&ch, &[1, 4, 4]);
        let entries = [
            (0, 1, 0.7),
            (0, 2, -0.3),
            (1, 2, 0.5),
            (0, 3, 0.2),
            (1, 3, -0.9),
            (2, 3, 0.4),
        ];
        for &(mu, nu, v) in &entries {
            let e = x0.sin().scale(v).add(&Expr::constant(&ch, v));
            beta.set(&[0, mu, nu], e.clone());
            beta.set(&[0, nu, mu], e.neg());
        }
        let dual = hodge_dual(&ch, &beta, &metric).unwrap();
        let ddual = hodge_dual(&ch, &dual, &metric).unwrap();
        let pts = sample_points(&ch, 32, 2);
        for mu in 0..4 {
            for nu in 0..4 {
                for p in &pts {
                    let a = ddual.get(&[0, mu, nu]).evaluate(p).unwrap();
                    let b = beta.get(&[0, mu, nu]).evaluate(p).unwrap();
                    assert!((a - b).abs() < 1e-12, "({mu},{nu}): {a} vs {b}");
                }
            }
        }
    }
}
