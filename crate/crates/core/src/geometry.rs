//! Tetrad-induced geometry: the frame transported into the fiber algebra,
//! the commutation coefficients measuring deviation from covariant behavior,
//! the enlarged derivative with index-signature dispatch, curvature and
//! generalized torsion, and both Bianchi identities.
//!
//! The canonical consistent input is the tetrad-generated scenario: choose an
//! invertible H^a_μ and a 4-dimensional group preset, transport the base
//! frame as X′_μ = H^a_μ X_a, and read every coefficient off the actual
//! commutators. All identities checked here then hold by construction, which
//! is what makes them falsifiable tests of the implementation.

use thiserror::Error;

use crate::algebra::GroupPreset;
use crate::dynamics::Metric;
use crate::expr::{ChartRef, DiffCache, Expr};
use crate::frames::VectorField;
use crate::tensor::{arr2, arr3, arr4, sum_over, sum_over2, ExprArray};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("tetrad must be a 4x4 expression table, got {0:?}")]
    BadTetradShape(Vec<usize>),
    #[error("tetrad determinant is identically zero")]
    SingularTetrad,
    #[error("the tetrad map requires a 4-dimensional gauge algebra, got {0}")]
    DimensionMismatch(usize),
    #[error("operand signature has {sig} entries for {axes} axes")]
    SignatureMismatch { sig: usize, axes: usize },
    #[error("spacetime index rules require anholonomy coefficients")]
    MissingAnholonomy,
}

/// Invertible map between spacetime tangent directions and the fiber
/// algebra, with its symbolic inverse (adjugate over determinant).
#[derive(Debug, Clone)]
pub struct Tetrad {
    /// H^a_μ, shape [4, 4]: internal index first.
    pub h: ExprArray,
    /// H_a^μ, shape [4, 4]: internal index first.
    pub hinv: ExprArray,
    pub det: Expr,
}

impl Tetrad {
    pub fn new(chart: &ChartRef, h: ExprArray) -> Result<Tetrad, GeometryError> {
        if h.shape() != [4, 4] {
            return Err(GeometryError::BadTetradShape(h.shape().to_vec()));
        }
        let det = det4(chart, &h);
        if det.is_const_zero() {
            return Err(GeometryError::SingularTetrad);
        }
        // adj(M)/det with M[a][mu] = H^a_mu; H_a^mu is the (mu, a) entry of
        // the matrix inverse.
        let hinv = arr2(4, 4, |a, mu| {
            let sign = if (a + mu) % 2 == 0 { 1.0 } else { -1.0 };
            minor3(&h, a, mu).scale(sign).div(&det)
        });
        Ok(Tetrad { h, hinv, det })
    }

    /// Pointwise residuals of H^a_μ H_b^μ − δ^a_b and H^a_μ H_a^ν − δ^ν_μ.
    pub fn inverse_residual_exprs(&self, chart: &ChartRef) -> Vec<Expr> {
        let mut out = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                let lhs = sum_over(chart, 4, |mu| {
                    self.h.get(&[a, mu]).mul(self.hinv.get(&[b, mu]))
                });
                let delta = Expr::constant(chart, if a == b { 1.0 } else { 0.0 });
                out.push(lhs.sub(&delta));
            }
        }
        for mu in 0..4 {
            for nu in 0..4 {
                let lhs = sum_over(chart, 4, |a| {
                    self.h.get(&[a, mu]).mul(self.hinv.get(&[a, nu]))
                });
                let delta = Expr::constant(chart, if mu == nu { 1.0 } else { 0.0 });
                out.push(lhs.sub(&delta));
            }
        }
        out
    }
}

fn minor3(m: &ExprArray, row: usize, col: usize) -> Expr {
    let rows: Vec<usize> = (0..4).filter(|&r| r != row).collect();
    let cols: Vec<usize> = (0..4).filter(|&c| c != col).collect();
    let e = |i: usize, j: usize| m.get(&[rows[i], cols[j]]).clone();
    let term = |a: Expr, b: Expr, c: Expr| a.mul(&b.mul(&c));
    let pos = term(e(0, 0), e(1, 1), e(2, 2))
        .add(&term(e(0, 1), e(1, 2), e(2, 0)))
        .add(&term(e(0, 2), e(1, 0), e(2, 1)));
    let neg = term(e(0, 2), e(1, 1), e(2, 0))
        .add(&term(e(0, 0), e(1, 2), e(2, 1)))
        .add(&term(e(0, 1), e(1, 0), e(2, 2)));
    pos.sub(&neg)
}

fn det4(chart: &ChartRef, m: &ExprArray) -> Expr {
    Expr::sum(
        chart,
        (0..4).map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            m.get(&[0, j]).scale(sign).mul(&minor3(m, 0, j))
        }),
    )
}

/// X′_μ = H^a_μ X_a: the base frame realized inside the fiber algebra.
pub fn frame_from_tetrad(h: &ExprArray, fiber: &[VectorField]) -> Vec<VectorField> {
    let chart = fiber[0].chart();
    (0..4)
        .map(|mu| {
            let coeffs: Vec<Expr> = (0..4).map(|a| h.get(&[a, mu]).clone()).collect();
            VectorField::combine(chart, &coeffs, fiber)
        })
        .collect()
}

/// C′^d_{μa} = f^d_{ca} H^c_μ − X_a(H^d_μ): the fiber part of [X′_μ, X_a].
pub fn deviation_from_tetrad(
    h: &ExprArray,
    fiber: &[VectorField],
    f: &crate::algebra::StructureConstants,
    cache: &mut DiffCache,
) -> ExprArray {
    let chart = fiber[0].chart();
    arr3(4, 4, 4, |d, mu, a| {
        let adj = sum_over(chart, 4, |c| h.get(&[c, mu]).scale(f.get(d, c, a)));
        adj.sub(&fiber[a].apply_with(h.get(&[d, mu]), cache))
    })
}

/// β′^a_{μν} from the transported frame:
/// [X′_μ, X′_ν] = −β′^a_{μν} X_a with
/// β′^a_{μν} = −(X′_μ H^a_ν − X′_ν H^a_μ + f^a_{bc} H^b_μ H^c_ν).
pub fn beta_from_tetrad(
    h: &ExprArray,
    xp: &[VectorField],
    f: &crate::algebra::StructureConstants,
    cache: &mut DiffCache,
) -> ExprArray {
    let chart = xp[0].chart();
    let mut out = ExprArray::zeros(chart, &[4, 4, 4]);
    for a in 0..4 {
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                let grad = xp[mu]
                    .apply_with(h.get(&[a, nu]), cache)
                    .sub(&xp[nu].apply_with(h.get(&[a, mu]), cache));
                let quad = sum_over2(chart, 4, 4, |b, c| {
                    h.get(&[b, mu]).mul(h.get(&[c, nu])).scale(f.get(a, b, c))
                });
                let val = grad.add(&quad).neg();
                out.set(&[a, mu, nu], val.clone());
                out.set(&[a, nu, mu], val.neg());
            }
        }
    }
    out
}

/// Index transmutation β′^ρ_{μν} = β′^a_{μν} H_a^ρ: the anholonomy
/// coefficient of the transported frame, [X′_μ, X′_ν] = −β′^ρ_{μν} X′_ρ.
pub fn anholonomy(beta_internal: &ExprArray, tetrad: &Tetrad) -> ExprArray {
    let chart = beta_internal.get(&[0, 0, 0]).chart().clone();
    arr3(4, 4, 4, |rho, mu, nu| {
        sum_over(&chart, 4, |a| {
            beta_internal
                .get(&[a, mu, nu])
                .mul(tetrad.hinv.get(&[a, rho]))
        })
    })
}

/// Generalized torsion
/// T^ρ_{μν} = H_a^ρ (X′_μ H^a_ν − X′_ν H^a_μ + f^a_{bc} H^b_μ H^c_ν);
/// equal to −β′^ρ_{μν} by construction, which the runner checks pointwise.
pub fn generalized_torsion(
    h: &ExprArray,
    tetrad: &Tetrad,
    xp: &[VectorField],
    f: &crate::algebra::StructureConstants,
    cache: &mut DiffCache,
) -> ExprArray {
    let chart = xp[0].chart();
    let mut out = ExprArray::zeros(chart, &[4, 4, 4]);
    for rho in 0..4 {
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                let val = Expr::sum(
                    chart,
                    (0..4).map(|a| {
                        let grad = xp[mu]
                            .apply_with(h.get(&[a, nu]), cache)
                            .sub(&xp[nu].apply_with(h.get(&[a, mu]), cache));
                        let quad = sum_over2(chart, 4, 4, |b, c| {
                            h.get(&[b, mu]).mul(h.get(&[c, nu])).scale(f.get(a, b, c))
                        });
                        tetrad.hinv.get(&[a, rho]).mul(&grad.add(&quad))
                    }),
                );
                out.set(&[rho, mu, nu], val.clone());
                out.set(&[rho, nu, mu], val.neg());
            }
        }
    }
    out
}

/// Index kinds for the enlarged derivative's dispatch. Signatures are
/// explicit metadata, never inferred from shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    InternalUp,
    InternalDown,
    SpacetimeUp,
    SpacetimeDown,
    /// Carried along untouched (the trailing two-form slot of the
    /// Bianchi-divergence derivative).
    Inert,
}

/// An expression array together with the declared signature of its axes.
#[derive(Debug, Clone)]
pub struct Indexed {
    pub data: ExprArray,
    pub sig: Vec<IndexKind>,
}

impl Indexed {
    pub fn new(data: ExprArray, sig: Vec<IndexKind>) -> Result<Indexed, GeometryError> {
        if data.shape().len() != sig.len() {
            return Err(GeometryError::SignatureMismatch {
                sig: sig.len(),
                axes: data.shape().len(),
            });
        }
        Ok(Indexed { data, sig })
    }

    pub fn scalar(e: Expr) -> Indexed {
        Indexed {
            data: ExprArray::from_fn(&[], |_| e.clone()),
            sig: vec![],
        }
    }
}

/// The enlarged derivative: the transported frame derivative X′_μ plus the
/// signature-appropriate corrections. Upper internal indices contract
/// −C′^c_{aμ}, lower internal ones +C′^e_{cμ}; transmuted spacetime indices
/// contract the anholonomy coefficients through the induced linear
/// connection Γ^λ_{νμ} = β′^λ_{μν}; scalars are untouched.
pub struct EnlargedDerivative<'a> {
    pub xp: &'a [VectorField],
    /// C′^c_{μa}, shape [4, 4, 4].
    pub deviation: &'a ExprArray,
    /// β′^ρ_{μν}; required only when the operand carries spacetime indices.
    pub beta_spacetime: Option<&'a ExprArray>,
}

impl<'a> EnlargedDerivative<'a> {
    pub fn apply(
        &self,
        mu: usize,
        z: &Indexed,
        cache: &mut DiffCache,
    ) -> Result<Indexed, GeometryError> {
        let chart = self.xp[0].chart().clone();
        if z.sig
            .iter()
            .any(|k| matches!(k, IndexKind::SpacetimeUp | IndexKind::SpacetimeDown))
            && self.beta_spacetime.is_none()
        {
            return Err(GeometryError::MissingAnholonomy);
        }
        let shape = z.data.shape().to_vec();
        let data = ExprArray::from_fn(&shape, |idx| {
            let mut term = self.xp[mu].apply_with(z.data.get(idx), cache);
            for (axis, kind) in z.sig.iter().enumerate() {
                let n = shape[axis];
                let mut swapped = idx.to_vec();
                let correction = match kind {
                    IndexKind::Inert => continue,
                    IndexKind::InternalUp => {
                        // −C′^c_{aμ} Z^a = +C′^c_{μa} Z^a
                        let c = idx[axis];
                        sum_over(&chart, n, |a| {
                            swapped[axis] = a;
                            self.deviation.get(&[c, mu, a]).mul(z.data.get(&swapped))
                        })
                    }
                    IndexKind::InternalDown => {
                        // +C′^e_{cμ} Z_e = −C′^e_{μc} Z_e
                        let c = idx[axis];
                        sum_over(&chart, n, |e| {
                            swapped[axis] = e;
                            self.deviation
                                .get(&[e, mu, c])
                                .mul(z.data.get(&swapped))
                                .neg()
                        })
                    }
                    IndexKind::SpacetimeUp => {
                        // −Γ^α_{ρμ} T^ρ = −β′^α_{μρ} T^ρ
                        let alpha = idx[axis];
                        let bs = self.beta_spacetime.unwrap();
                        sum_over(&chart, n, |rho| {
                            swapped[axis] = rho;
                            bs.get(&[alpha, mu, rho]).mul(z.data.get(&swapped)).neg()
                        })
                    }
                    IndexKind::SpacetimeDown => {
                        // +Γ^ρ_{σμ} T_ρ = +β′^ρ_{μσ} T_ρ
                        let sigma = idx[axis];
                        let bs = self.beta_spacetime.unwrap();
                        sum_over(&chart, n, |rho| {
                            swapped[axis] = rho;
                            bs.get(&[rho, mu, sigma]).mul(z.data.get(&swapped))
                        })
                    }
                };
                term = term.add(&correction);
            }
            term
        });
        Ok(Indexed {
            data,
            sig: z.sig.clone(),
        })
    }
}

/// Curvature pair: the internal form 𝓡^c_{aμν} and the all-spacetime form
/// 𝓡^ρ_{σμν}, both antisymmetric in the last index pair.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub internal: ExprArray,
    pub spacetime: ExprArray,
}

/// Generalized torsion with its defining identity T = −β′ against the
/// anholonomy output.
#[derive(Debug, Clone)]
pub struct TorsionField {
    pub t: ExprArray,
}

/// Everything the geometry stage derives from (preset, tetrad).
pub struct TetradGeometry {
    pub chart: ChartRef,
    pub group: GroupPreset,
    pub tetrad: Tetrad,
    /// X′_μ.
    pub xp: Vec<VectorField>,
    /// C′^c_{μa}.
    pub deviation: ExprArray,
    /// β′^a_{μν}.
    pub beta_internal: ExprArray,
    /// β′^ρ_{μν}.
    pub beta_spacetime: ExprArray,
    /// T^ρ_{μν} from the generalized-torsion formula.
    pub torsion: ExprArray,
    /// R′^c_{aμν}: curvature of C′ without the anholonomy completion.
    pub curvature_raw: ExprArray,
    /// 𝓡^c_{aμν} = R′ + β′^ρ_{μν} C′^c_{aρ}.
    pub curvature_internal: ExprArray,
    /// 𝓡^ρ_{σμν} from the all-spacetime formula with Γ^λ_{νμ} = β′^λ_{μν}.
    pub curvature_spacetime: ExprArray,
}

impl TetradGeometry {
    pub fn new(
        chart: &ChartRef,
        group: GroupPreset,
        h: ExprArray,
    ) -> Result<TetradGeometry, GeometryError> {
        if group.constants.dim() != 4 {
            return Err(GeometryError::DimensionMismatch(group.constants.dim()));
        }
        let mut cache = DiffCache::new();
        let tetrad = Tetrad::new(chart, h)?;
        let xp = frame_from_tetrad(&tetrad.h, &group.fiber_fields);
        let deviation =
            deviation_from_tetrad(&tetrad.h, &group.fiber_fields, &group.constants, &mut cache);
        let beta_internal = beta_from_tetrad(&tetrad.h, &xp, &group.constants, &mut cache);
        let beta_spacetime = anholonomy(&beta_internal, &tetrad);
        let torsion = generalized_torsion(&tetrad.h, &tetrad, &xp, &group.constants, &mut cache);

        // R′^c_{aμν} = X′_μ C′^c_{aν} − X′_ν C′^c_{aμ}
        //            − C′^c_{bμ} C′^b_{aν} + C′^c_{bν} C′^b_{aμ},
        // written with C′^c_{aμ} = −C′^c_{μa}.
        let dev_low = |c: usize, a: usize, m: usize| deviation.get(&[c, m, a]).neg();
        let mut curvature_raw = ExprArray::zeros(chart, &[4, 4, 4, 4]);
        for c in 0..4 {
            for a in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        let grad = xp[mu]
                            .apply_with(&dev_low(c, a, nu), &mut cache)
                            .sub(&xp[nu].apply_with(&dev_low(c, a, mu), &mut cache));
                        let quad = sum_over(chart, 4, |b| {
                            dev_low(c, b, nu)
                                .mul(&dev_low(b, a, mu))
                                .sub(&dev_low(c, b, mu).mul(&dev_low(b, a, nu)))
                        });
                        let val = grad.add(&quad);
                        curvature_raw.set(&[c, a, mu, nu], val.clone());
                        curvature_raw.set(&[c, a, nu, mu], val.neg());
                    }
                }
            }
        }

        let curvature_internal = arr4(4, 4, 4, 4, |c, a, mu, nu| {
            let completion = sum_over(chart, 4, |rho| {
                beta_spacetime.get(&[rho, mu, nu]).mul(&dev_low(c, a, rho))
            });
            curvature_raw.get(&[c, a, mu, nu]).add(&completion)
        });

        // 𝓡^ρ_{σμν} in the transported frame with Γ^λ_{νμ} = β′^λ_{μν}.
        let gamma = |l: usize, n: usize, m: usize| beta_spacetime.get(&[l, m, n]).clone();
        let mut curvature_spacetime = ExprArray::zeros(chart, &[4, 4, 4, 4]);
        for rho in 0..4 {
            for sg in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        let grad = xp[mu]
                            .apply_with(&gamma(rho, sg, nu), &mut cache)
                            .sub(&xp[nu].apply_with(&gamma(rho, sg, mu), &mut cache));
                        let quad = sum_over(chart, 4, |al| {
                            gamma(rho, al, nu)
                                .mul(&gamma(al, sg, mu))
                                .sub(&gamma(rho, al, mu).mul(&gamma(al, sg, nu)))
                        });
                        let completion = sum_over(chart, 4, |ga| {
                            beta_spacetime.get(&[ga, mu, nu]).mul(&gamma(rho, sg, ga))
                        });
                        let val = grad.add(&quad).add(&completion);
                        curvature_spacetime.set(&[rho, sg, mu, nu], val.clone());
                        curvature_spacetime.set(&[rho, sg, nu, mu], val.neg());
                    }
                }
            }
        }

        Ok(TetradGeometry {
            chart: chart.clone(),
            group,
            tetrad,
            xp,
            deviation,
            beta_internal,
            beta_spacetime,
            torsion,
            curvature_raw,
            curvature_internal,
            curvature_spacetime,
        })
    }

    pub fn curvature(&self) -> CurvatureField {
        CurvatureField {
            internal: self.curvature_internal.clone(),
            spacetime: self.curvature_spacetime.clone(),
        }
    }

    pub fn torsion_field(&self) -> TorsionField {
        TorsionField {
            t: self.torsion.clone(),
        }
    }

    fn dev_low(&self, c: usize, a: usize, m: usize) -> Expr {
        self.deviation.get(&[c, m, a]).neg()
    }

    fn gamma(&self, l: usize, n: usize, m: usize) -> Expr {
        self.beta_spacetime.get(&[l, m, n]).clone()
    }

    /// T^ρ_{μν} + β′^ρ_{μν}: the construction identity of the torsion.
    pub fn torsion_anholonomy_exprs(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        for rho in 0..4 {
            for mu in 0..4 {
                for nu in (mu + 1)..4 {
                    out.push(
                        self.torsion
                            .get(&[rho, mu, nu])
                            .add(self.beta_spacetime.get(&[rho, mu, nu])),
                    );
                }
            }
        }
        out
    }

    /// X_b(β′^a_{μν}) + f^a_{bc} β′^c_{μν} + R′^a_{bμν}: the fiber-behavior
    /// constraint tying the non-linearity indicator to the raw curvature.
    pub fn group_behavior_exprs(&self) -> Vec<Expr> {
        let f = &self.group.constants;
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        let deriv = self.group.fiber_fields[b]
                            .apply_with(self.beta_internal.get(&[a, mu, nu]), &mut cache);
                        let adj = sum_over(&self.chart, 4, |c| {
                            self.beta_internal.get(&[c, mu, nu]).scale(f.get(a, b, c))
                        });
                        out.push(deriv.add(&adj).add(self.curvature_raw.get(&[a, b, mu, nu])));
                    }
                }
            }
        }
        out
    }

    /// 𝓡^α_{σμν} + X′_σ(β′^α_{μν}): the curvature as the (enlarged)
    /// derivative of the torsion, in the all-spacetime form.
    pub fn torsion_derivative_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for al in 0..4 {
            for sg in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        let deriv = self.xp[sg]
                            .apply_with(self.beta_spacetime.get(&[al, mu, nu]), &mut cache);
                        out.push(self.curvature_spacetime.get(&[al, sg, mu, nu]).add(&deriv));
                    }
                }
            }
        }
        out
    }

    /// C′^b_{aμ} − H^b_λ Γ^λ_{νμ} H_a^ν − H_a^ν X′_μ(H^b_ν): C′ transforms
    /// under the tetrad exactly like a linear-group connection.
    pub fn linear_connection_transform_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for b in 0..4 {
            for a in 0..4 {
                for mu in 0..4 {
                    let pulled = sum_over2(&self.chart, 4, 4, |l, n| {
                        self.tetrad
                            .h
                            .get(&[b, l])
                            .mul(&self.gamma(l, n, mu))
                            .mul(self.tetrad.hinv.get(&[a, n]))
                    });
                    let grad = sum_over(&self.chart, 4, |n| {
                        self.tetrad
                            .hinv
                            .get(&[a, n])
                            .mul(&self.xp[mu].apply_with(self.tetrad.h.get(&[b, n]), &mut cache))
                    });
                    out.push(self.dev_low(b, a, mu).sub(&pulled).sub(&grad));
                }
            }
        }
        out
    }

    /// First Bianchi identity: cyclic sum of 𝓡^α over the lower triple
    /// minus the cyclic frame derivative of the anholonomy.
    pub fn bianchi_first_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for al in 0..4 {
            for l in 0..4 {
                for m in (l + 1)..4 {
                    for n in (m + 1)..4 {
                        let curv = self
                            .curvature_spacetime
                            .get(&[al, l, m, n])
                            .add(self.curvature_spacetime.get(&[al, n, l, m]))
                            .add(self.curvature_spacetime.get(&[al, m, n, l]));
                        let tors = self.xp[l]
                            .apply_with(self.beta_spacetime.get(&[al, n, m]), &mut cache)
                            .add(
                                &self.xp[m]
                                    .apply_with(self.beta_spacetime.get(&[al, l, n]), &mut cache),
                            )
                            .add(
                                &self.xp[n]
                                    .apply_with(self.beta_spacetime.get(&[al, m, l]), &mut cache),
                            );
                        out.push(curv.sub(&tors));
                    }
                }
            }
        }
        out
    }

    /// The quadratic form of the first identity: cyclic X′(β′) plus the
    /// cyclic β′β′ contraction vanishes.
    pub fn bianchi_first_quadratic_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let bs = &self.beta_spacetime;
        let mut out = Vec::new();
        for rho in 0..4 {
            for l in 0..4 {
                for m in (l + 1)..4 {
                    for n in (m + 1)..4 {
                        let deriv = self.xp[l]
                            .apply_with(bs.get(&[rho, n, m]), &mut cache)
                            .add(&self.xp[m].apply_with(bs.get(&[rho, l, n]), &mut cache))
                            .add(&self.xp[n].apply_with(bs.get(&[rho, m, l]), &mut cache));
                        let quad = sum_over(&self.chart, 4, |al| {
                            bs.get(&[al, m, n])
                                .mul(bs.get(&[rho, l, al]))
                                .add(&bs.get(&[al, l, m]).mul(bs.get(&[rho, n, al])))
                                .add(&bs.get(&[al, n, l]).mul(bs.get(&[rho, m, al])))
                        });
                        out.push(deriv.add(&quad));
                    }
                }
            }
        }
        out
    }

    /// One derivative block of the second identity:
    /// D_d 𝓡^α_{σpq} = X′_d 𝓡^α_{σpq} − Γ^α_{ρd} 𝓡^ρ_{σpq}
    ///               + Γ^ρ_{σd} 𝓡^α_{ρpq} + Γ^ρ_{pd} 𝓡^α_{σρq},
    /// the last index carried inert.
    fn bianchi_block(
        &self,
        al: usize,
        sg: usize,
        d: usize,
        p: usize,
        q: usize,
        cache: &mut DiffCache,
    ) -> Expr {
        let r = &self.curvature_spacetime;
        let deriv = self.xp[d].apply_with(r.get(&[al, sg, p, q]), cache);
        let up = sum_over(&self.chart, 4, |rho| {
            self.gamma(al, rho, d).mul(r.get(&[rho, sg, p, q]))
        });
        let down = sum_over(&self.chart, 4, |rho| {
            self.gamma(rho, sg, d).mul(r.get(&[al, rho, p, q]))
        });
        let pair = sum_over(&self.chart, 4, |rho| {
            self.gamma(rho, p, d).mul(r.get(&[al, sg, rho, q]))
        });
        deriv.sub(&up).add(&down).add(&pair)
    }

    /// Second Bianchi identity: D_ν 𝓡^α_{σλμ} + D_λ 𝓡^α_{σμν}
    /// + D_μ 𝓡^α_{σνλ} = 0.
    pub fn bianchi_second_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for al in 0..4 {
            for sg in 0..4 {
                for l in 0..4 {
                    for m in (l + 1)..4 {
                        for n in (m + 1)..4 {
                            let sum = self
                                .bianchi_block(al, sg, n, l, m, &mut cache)
                                .add(&self.bianchi_block(al, sg, l, m, n, &mut cache))
                                .add(&self.bianchi_block(al, sg, m, n, l, &mut cache));
                            out.push(sum);
                        }
                    }
                }
            }
        }
        out
    }

    /// Ricci tensor 𝓡_{σν} = 𝓡^α_{σαν}, the scalar, the Einstein-like
    /// tensor G^{ασ} = 𝓡^{ασ} − g^{ασ}𝓡 − g^{σν}𝓡^{αμ}_{μν}, and the
    /// contracted second identity g^{σμ}(D𝓡-cyclic)^α_{σαμν}.
    pub fn ricci_and_einstein(&self, metric: &Metric) -> RicciEinstein {
        let chart = &self.chart;
        let ric = arr2(4, 4, |sg, nu| {
            sum_over(chart, 4, |al| {
                self.curvature_spacetime.get(&[al, sg, al, nu]).clone()
            })
        });
        let scalar = sum_over2(chart, 4, 4, |sg, nu| {
            metric.ginv.get(&[sg, nu]).mul(ric.get(&[sg, nu]))
        });
        let ric_up = arr2(4, 4, |al, sg| {
            sum_over2(chart, 4, 4, |m, n| {
                metric
                    .ginv
                    .get(&[al, m])
                    .mul(metric.ginv.get(&[sg, n]))
                    .mul(ric.get(&[m, n]))
            })
        });
        let third = arr2(4, 4, |al, sg| {
            sum_over2(chart, 4, 4, |nu, mu| {
                metric.ginv.get(&[sg, nu]).mul(&sum_over(chart, 4, |be| {
                    metric
                        .ginv
                        .get(&[mu, be])
                        .mul(self.curvature_spacetime.get(&[al, be, mu, nu]))
                }))
            })
        });
        let einstein = arr2(4, 4, |al, sg| {
            ric_up
                .get(&[al, sg])
                .sub(&metric.ginv.get(&[al, sg]).mul(&scalar))
                .sub(third.get(&[al, sg]))
        });

        let mut cache = DiffCache::new();
        let contracted = (0..4)
            .map(|nu| {
                Expr::sum(
                    chart,
                    (0..4)
                        .flat_map(|sg| (0..4).map(move |mu| (sg, mu)))
                        .map(|(sg, mu)| {
                            metric.ginv.get(&[sg, mu]).mul(&Expr::sum(
                                chart,
                                (0..4).map(|al| {
                                    self.bianchi_block(al, sg, nu, al, mu, &mut cache)
                                        .add(&self.bianchi_block(al, sg, al, mu, nu, &mut cache))
                                        .add(&self.bianchi_block(al, sg, mu, nu, al, &mut cache))
                                }),
                            ))
                        }),
                )
            })
            .collect();

        // Antisymmetry defect of 𝓡^{αβ}_{λμ} in the first pair, reported
        // as a diagnostic with no pass/fail claim.
        let defect = arr4(4, 4, 4, 4, |al, be, l, m| {
            let raise = |a: usize, b: usize| {
                sum_over(chart, 4, |sg| {
                    metric
                        .ginv
                        .get(&[b, sg])
                        .mul(self.curvature_spacetime.get(&[a, sg, l, m]))
                })
            };
            raise(al, be).add(&raise(be, al))
        });

        // Ricci against the torsion trace: 𝓡_{σν} + X′_σ(β′^α_{αν}).
        let mut cache2 = DiffCache::new();
        let trace: Vec<Expr> = (0..4)
            .map(|nu| {
                Expr::sum(
                    chart,
                    (0..4).map(|al| self.beta_spacetime.get(&[al, al, nu]).clone()),
                )
            })
            .collect();
        let ricci_trace = arr2(4, 4, |sg, nu| {
            ric.get(&[sg, nu])
                .add(&self.xp[sg].apply_with(&trace[nu], &mut cache2))
        });

        RicciEinstein {
            ricci: ric,
            scalar,
            einstein,
            contracted_bianchi: contracted,
            antisymmetry_defect: defect,
            ricci_trace_residual: ricci_trace,
        }
    }

    /// Transmutation consistency 𝓡^ρ_{σμν} − H_c^ρ H^a_σ 𝓡^c_{aμν}.
    pub fn transmutation_exprs(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        for rho in 0..4 {
            for sg in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        let pulled = sum_over2(&self.chart, 4, 4, |c, a| {
                            self.tetrad
                                .hinv
                                .get(&[c, rho])
                                .mul(self.tetrad.h.get(&[a, sg]))
                                .mul(self.curvature_internal.get(&[c, a, mu, nu]))
                        });
                        out.push(
                            self.curvature_spacetime
                                .get(&[rho, sg, mu, nu])
                                .sub(&pulled),
                        );
                    }
                }
            }
        }
        out
    }

    /// The enlarged derivative of the transmuted anholonomy computed through
    /// the internal Leibniz route minus the plain frame derivative: the
    /// statement that X′* and X′ agree on all-spacetime operands.
    pub fn derivative_transmutation_torsion_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for rho in 0..4 {
            for l in 0..4 {
                for mu in 0..4 {
                    for nu in (mu + 1)..4 {
                        // [X′_λ β′^a − C′^a_{bλ} β′^b] H_a^ρ + β′^a H_a^δ Γ^ρ_{δλ}
                        let internal = sum_over(&self.chart, 4, |a| {
                            let deriv = self.xp[l]
                                .apply_with(self.beta_internal.get(&[a, mu, nu]), &mut cache);
                            let corr = sum_over(&self.chart, 4, |b| {
                                self.dev_low(a, b, l)
                                    .mul(self.beta_internal.get(&[b, mu, nu]))
                            });
                            deriv.sub(&corr).mul(self.tetrad.hinv.get(&[a, rho]))
                        });
                        let carried = sum_over2(&self.chart, 4, 4, |a, de| {
                            self.beta_internal
                                .get(&[a, mu, nu])
                                .mul(self.tetrad.hinv.get(&[a, de]))
                                .mul(&self.gamma(rho, de, l))
                        });
                        let plain = self.xp[l]
                            .apply_with(self.beta_spacetime.get(&[rho, mu, nu]), &mut cache);
                        out.push(internal.add(&carried).sub(&plain));
                    }
                }
            }
        }
        out
    }

    /// Same statement for the curvature, through the transmuted internal
    /// form: Γ-corrections plus the internally-corrected derivative minus
    /// the plain derivative of the transmuted tensor.
    pub fn derivative_transmutation_curvature_exprs(&self) -> Vec<Expr> {
        let chart = &self.chart;
        let mut cache = DiffCache::new();
        // Transmuted internal curvature (independent of the all-spacetime
        // formula on purpose).
        let transmuted = arr4(4, 4, 4, 4, |rho, sg, mu, nu| {
            sum_over2(chart, 4, 4, |c, a| {
                self.tetrad
                    .hinv
                    .get(&[c, rho])
                    .mul(self.tetrad.h.get(&[a, sg]))
                    .mul(self.curvature_internal.get(&[c, a, mu, nu]))
            })
        });
        let mut out = Vec::new();
        for rho in 0..4 {
            for sg in 0..4 {
                for l in 0..4 {
                    let mu = 0;
                    for nu in (mu + 1)..4 {
                        let gamma_up = sum_over(chart, 4, |de| {
                            self.gamma(rho, de, l)
                                .mul(transmuted.get(&[de, sg, mu, nu]))
                        });
                        let gamma_down = sum_over(chart, 4, |de| {
                            self.gamma(de, sg, l)
                                .mul(transmuted.get(&[rho, de, mu, nu]))
                        });
                        let internal = sum_over2(chart, 4, 4, |c, a| {
                            let deriv = self.xp[l].apply_with(
                                self.curvature_internal.get(&[c, a, mu, nu]),
                                &mut cache,
                            );
                            let corr_up = sum_over(chart, 4, |b| {
                                self.dev_low(c, b, l)
                                    .mul(self.curvature_internal.get(&[b, a, mu, nu]))
                            });
                            let corr_down = sum_over(chart, 4, |b| {
                                self.dev_low(b, a, l)
                                    .mul(self.curvature_internal.get(&[c, b, mu, nu]))
                            });
                            deriv
                                .sub(&corr_up)
                                .add(&corr_down)
                                .mul(self.tetrad.hinv.get(&[c, rho]))
                                .mul(self.tetrad.h.get(&[a, sg]))
                        });
                        let plain =
                            self.xp[l].apply_with(transmuted.get(&[rho, sg, mu, nu]), &mut cache);
                        out.push(gamma_up.sub(&gamma_down).add(&internal).sub(&plain));
                    }
                }
            }
        }
        out
    }

    /// X_a(Z^c) − H_a^μ (X′*_μ Z^c + C′^c_{bμ} Z^b) for a test object Z:
    /// recovering the fiber fields from the enlarged derivative.
    pub fn fiber_from_enlarged_exprs(&self, z: &ExprArray) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let enlarged = EnlargedDerivative {
            xp: &self.xp,
            deviation: &self.deviation,
            beta_spacetime: Some(&self.beta_spacetime),
        };
        let zi = Indexed::new(z.clone(), vec![IndexKind::InternalUp]).unwrap();
        let dz: Vec<Indexed> = (0..4)
            .map(|mu| enlarged.apply(mu, &zi, &mut cache).unwrap())
            .collect();
        let mut out = Vec::new();
        for a in 0..4 {
            for c in 0..4 {
                let lhs = self.group.fiber_fields[a].apply_with(z.get(&[c]), &mut cache);
                let rhs = Expr::sum(
                    &self.chart,
                    (0..4).map(|mu| {
                        let inner = dz[mu].data.get(&[c]).add(&sum_over(&self.chart, 4, |b| {
                            self.deviation.get(&[c, mu, b]).mul(z.get(&[b])).neg()
                        }));
                        self.tetrad.hinv.get(&[a, mu]).mul(&inner)
                    }),
                );
                out.push(lhs.sub(&rhs));
            }
        }
        out
    }

    /// [X′*_μ, X′*_ν](Z^c) + β′^a_{μν} X_a(Z^c) + R′^c_{aμν} Z^a for a test
    /// object Z: the commutator of enlarged derivatives reproduces the raw
    /// curvature.
    pub fn curvature_commutator_exprs(&self, z: &ExprArray) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let enlarged = EnlargedDerivative {
            xp: &self.xp,
            deviation: &self.deviation,
            beta_spacetime: Some(&self.beta_spacetime),
        };
        let zi = Indexed::new(z.clone(), vec![IndexKind::InternalUp]).unwrap();
        let first: Vec<Indexed> = (0..4)
            .map(|mu| enlarged.apply(mu, &zi, &mut cache).unwrap())
            .collect();
        let mut out = Vec::new();
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                let again_mu = enlarged.apply(mu, &first[nu], &mut cache).unwrap();
                let again_nu = enlarged.apply(nu, &first[mu], &mut cache).unwrap();
                for c in 0..4 {
                    let comm = again_mu.data.get(&[c]).sub(again_nu.data.get(&[c]));
                    let beta_term = sum_over(&self.chart, 4, |a| {
                        self.beta_internal
                            .get(&[a, mu, nu])
                            .mul(&self.group.fiber_fields[a].apply_with(z.get(&[c]), &mut cache))
                    });
                    let curv_term = sum_over(&self.chart, 4, |a| {
                        self.curvature_raw.get(&[c, a, mu, nu]).mul(z.get(&[a]))
                    });
                    out.push(comm.add(&beta_term).add(&curv_term));
                }
            }
        }
        out
    }

    /// X_a(C′^c_{dμ}): the direct-product-recovery diagnostic, reported but
    /// not enforced.
    pub fn coefficient_invariance_exprs(&self) -> Vec<Expr> {
        let mut cache = DiffCache::new();
        let mut out = Vec::new();
        for a in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    for mu in 0..4 {
                        out.push(
                            self.group.fiber_fields[a]
                                .apply_with(&self.dev_low(c, d, mu), &mut cache),
                        );
                    }
                }
            }
        }
        out
    }
}

/// Output bundle of [`TetradGeometry::ricci_and_einstein`].
pub struct RicciEinstein {
    pub ricci: ExprArray,
    pub scalar: Expr,
    pub einstein: ExprArray,
    /// Contraction residual of the second identity, one entry per free ν.
    pub contracted_bianchi: Vec<Expr>,
    /// 𝓡^{αβ}_{λμ} + 𝓡^{βα}_{λμ}: diagnostic only.
    pub antisymmetry_defect: ExprArray,
    /// 𝓡_{σν} + X′_σ(β′^α_{αν}).
    pub ricci_trace_residual: ExprArray,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{preset, PresetKind};
    use crate::expr::{sample_points, Chart};
    use crate::frames::decompose;
    use crate::report::{IdentityTag, ResidualReport, RowKind};
    use crate::tensor::arr1;

    fn identity_tetrad(chart: &ChartRef) -> ExprArray {
        arr2(4, 4, |a, mu| {
            Expr::constant(chart, if a == mu { 1.0 } else { 0.0 })
        })
    }

    #[test]
    fn identity_tetrad_with_abelian_fibers_gives_coordinate_frame() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Abelian4, &ch).unwrap();
        let xp = frame_from_tetrad(&identity_tetrad(&ch), &group.fiber_fields);
        let pts = sample_points(&ch, 4, 0);
        for (mu, f) in xp.iter().enumerate() {
            for p in &pts {
                let vals = f.evaluate(p).unwrap();
                for (i, v) in vals.iter().enumerate() {
                    let expect = if i == ch.fiber_index(mu) { 1.0 } else { 0.0 };
                    assert_eq!(*v, expect);
                }
            }
        }
    }

    #[test]
    fn diagonal_tetrad_scales_the_first_field() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Abelian4, &ch).unwrap();
        let x0 = Expr::coord(&ch, 0);
        let h = arr2(4, 4, |a, mu| {
            if a == mu {
                if a == 0 {
                    Expr::one(&ch).add(&x0.powi(2))
                } else {
                    Expr::one(&ch)
                }
            } else {
                Expr::zero(&ch)
            }
        });
        let xp = frame_from_tetrad(&h, &group.fiber_fields);
        let pts = sample_points(&ch, 8, 1);
        for p in &pts {
            let vals = xp[0].evaluate(p).unwrap();
            assert!((vals[ch.fiber_index(0)] - (1.0 + p[0] * p[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn tetrad_roundtrip_recovers_h() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Su2xU1, &ch).unwrap();
        let x0 = Expr::coord(&ch, 0);
        let h = arr2(4, 4, |a, mu| {
            let base = Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 });
            base.add(&x0.sin().scale(0.1 * ((a + 2 * mu) % 3) as f64))
        });
        let xp = frame_from_tetrad(&h, &group.fiber_fields);
        let pts = sample_points(&ch, 16, 3);
        let fibers: Vec<&VectorField> = group.fiber_fields.iter().collect();
        for (mu, f) in xp.iter().enumerate() {
            let dec = decompose(&fibers, f, &pts);
            for (pi, sol) in dec.per_point.iter().enumerate() {
                let sol = sol.as_ref().unwrap();
                for a in 0..4 {
                    let expect = h.get(&[a, mu]).evaluate(&pts[pi]).unwrap();
                    assert!((sol.coefficients[a] - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn deviation_vanishes_for_base_only_abelian_tetrad() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Abelian4, &ch).unwrap();
        let x1 = Expr::coord(&ch, 1);
        let h = arr2(4, 4, |a, mu| {
            let base = Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 });
            base.add(&x1.scale(0.2 * ((a * mu) % 2) as f64))
        });
        let mut cache = DiffCache::new();
        let dev = deviation_from_tetrad(&h, &group.fiber_fields, &group.constants, &mut cache);
        for e in dev.iter() {
            assert!(e.is_const_zero());
        }
    }

    #[test]
    fn identity_tetrad_su2xu1_gives_constant_deviation_and_torsion() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Su2xU1, &ch).unwrap();
        let geo = TetradGeometry::new(&ch, group, identity_tetrad(&ch)).unwrap();
        let pts = sample_points(&ch, 8, 5);
        let f = &geo.group.constants;
        for d in 0..4 {
            for mu in 0..4 {
                for a in 0..4 {
                    // C′^d_{μa} = f^d_{μa} for the identity tetrad
                    for p in &pts {
                        let v = geo.deviation.get(&[d, mu, a]).evaluate(p).unwrap();
                        assert!((v - f.get(d, mu, a)).abs() < 1e-12);
                    }
                }
            }
        }
        // T^ρ_{μν} = f^ρ_{μν} from the quadratic term alone.
        for rho in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    for p in &pts {
                        let v = geo.torsion.get(&[rho, mu, nu]).evaluate(p).unwrap();
                        assert!((v - f.get(rho, mu, nu)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn abelian_torsion_reduces_to_tetrad_curl() {
        // With commuting fiber fields the generalized torsion is the plain
        // tetrad torsion H_a^ρ (X′_μ H^a_ν − X′_ν H^a_μ).
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Abelian4, &ch).unwrap();
        let th0 = Expr::coord_name(&ch, "th0").unwrap();
        let h = arr2(4, 4, |a, mu| {
            let base = Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 });
            base.add(&th0.sin().scale(0.1 * ((a + mu) % 2) as f64))
        });
        let geo = TetradGeometry::new(&ch, group, h.clone()).unwrap();
        let mut cache = DiffCache::new();
        let pts = sample_points(&ch, 16, 6);
        for rho in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    let standard = Expr::sum(
                        &ch,
                        (0..4).map(|a| {
                            geo.tetrad.hinv.get(&[a, rho]).mul(
                                &geo.xp[mu]
                                    .apply_with(h.get(&[a, nu]), &mut cache)
                                    .sub(&geo.xp[nu].apply_with(h.get(&[a, mu]), &mut cache)),
                            )
                        }),
                    );
                    for p in &pts {
                        let a = geo.torsion.get(&[rho, mu, nu]).evaluate(p).unwrap();
                        let b = standard.evaluate(p).unwrap();
                        assert!((a - b).abs() < 1e-11, "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_deviation_means_zero_curvature() {
        let ch = Chart::standard(4);
        let group = preset(PresetKind::Abelian4, &ch).unwrap();
        let x0 = Expr::coord(&ch, 0);
        let h = arr2(4, 4, |a, mu| {
            let base = Expr::constant(&ch, if a == mu { 1.0 } else { 0.0 });
            base.add(&x0.scale(0.1 * ((a + mu) % 2) as f64))
        });
        let geo = TetradGeometry::new(&ch, group, h).unwrap();
        for e in geo.curvature_internal.iter() {
            assert!(e.is_const_zero());
        }
        for e in geo.curvature_spacetime.iter() {
            assert!(e.is_const_zero());
        }
    }

    fn small_su2xu1_geometry(ch: &ChartRef) -> TetradGeometry {
        let group = preset(PresetKind::Su2xU1, ch).unwrap();
        let th0 = Expr::coord_name(ch, "th0").unwrap();
        let th1 = Expr::coord_name(ch, "th1").unwrap();
        let x0 = Expr::coord(ch, 0);
        // Two internal plane rotations with fiber-dependent angles times a
        // base-dependent diagonal stretch: fiber-dependent, invertible, and
        // orthogonal in the internal (Euclidean) metric.
        let ang1 = th0.scale(0.4);
        let ang2 = th1.scale(0.3);
        let (c1, s1) = (ang1.cos(), ang1.sin());
        let (c2, s2) = (ang2.cos(), ang2.sin());
        let w = arr2(4, 4, |a, mu| {
            if a == mu {
                Expr::one(ch).add(&x0.sin().scale(0.1 * (mu as f64 + 1.0) / 4.0))
            } else {
                Expr::zero(ch)
            }
        });
        let rot_a = arr2(4, 4, |a, b| match (a, b) {
            (0, 0) | (1, 1) => c1.clone(),
            (0, 1) => s1.neg(),
            (1, 0) => s1.clone(),
            (2, 2) | (3, 3) => Expr::one(ch),
            _ => Expr::zero(ch),
        });
        let rot_b = arr2(4, 4, |a, b| match (a, b) {
            (1, 1) | (2, 2) => c2.clone(),
            (1, 2) => s2.neg(),
            (2, 1) => s2.clone(),
            (0, 0) | (3, 3) => Expr::one(ch),
            _ => Expr::zero(ch),
        });
        let rot = arr2(4, 4, |a, b| {
            sum_over(ch, 4, |k| rot_a.get(&[a, k]).mul(rot_b.get(&[k, b])))
        });
        let h = arr2(4, 4, |a, mu| {
            sum_over(ch, 4, |b| rot.get(&[a, b]).mul(w.get(&[b, mu])))
        });
        TetradGeometry::new(ch, group, h).unwrap()
    }

    fn assert_zero_family(name: &str, exprs: &[Expr], ch: &ChartRef, tol: f64) {
        let pts = sample_points(ch, 32, 11);
        let rep = ResidualReport::from_exprs(
            name,
            IdentityTag::BianchiSecond,
            RowKind::Identity,
            exprs,
            &pts,
            tol,
        );
        assert!(
            rep.passed(),
            "{name}: max residual {} (witness {:?})",
            rep.max_abs,
            rep.witness
        );
    }

    #[test]
    fn consistent_geometry_passes_all_identities() {
        let ch = Chart::standard(4);
        let geo = small_su2xu1_geometry(&ch);

        assert_zero_family(
            "tetrad inverse",
            &geo.tetrad.inverse_residual_exprs(&ch),
            &ch,
            1e-10,
        );
        assert_zero_family(
            "torsion vs anholonomy",
            &geo.torsion_anholonomy_exprs(),
            &ch,
            1e-12,
        );
        assert_zero_family("group behavior", &geo.group_behavior_exprs(), &ch, 1e-9);
        assert_zero_family(
            "torsion derivative",
            &geo.torsion_derivative_exprs(),
            &ch,
            1e-9,
        );
        assert_zero_family(
            "linear connection transform",
            &geo.linear_connection_transform_exprs(),
            &ch,
            1e-9,
        );
        assert_zero_family("transmutation", &geo.transmutation_exprs(), &ch, 1e-9);
        assert_zero_family("bianchi first", &geo.bianchi_first_exprs(), &ch, 1e-9);
        assert_zero_family(
            "bianchi first quadratic",
            &geo.bianchi_first_quadratic_exprs(),
            &ch,
            1e-9,
        );
        assert_zero_family("bianchi second", &geo.bianchi_second_exprs(), &ch, 1e-9);
        assert_zero_family(
            "derivative transmutation torsion",
            &geo.derivative_transmutation_torsion_exprs(),
            &ch,
            1e-9,
        );
        assert_zero_family(
            "derivative transmutation curvature",
            &geo.derivative_transmutation_curvature_exprs(),
            &ch,
            1e-9,
        );

        let z = arr1(4, |c| {
            let x1 = Expr::coord(&ch, 1);
            let th1 = Expr::coord_name(&ch, "th1").unwrap();
            x1.mul(&th1).scale(0.3 * (c as f64 + 1.0)).add(&th1.sin())
        });
        assert_zero_family(
            "fiber from enlarged",
            &geo.fiber_from_enlarged_exprs(&z),
            &ch,
            1e-9,
        );
        assert_zero_family(
            "curvature commutator",
            &geo.curvature_commutator_exprs(&z),
            &ch,
            1e-9,
        );
    }

    #[test]
    fn broken_deviation_fails_group_behavior() {
        let ch = Chart::standard(4);
        let mut geo = small_su2xu1_geometry(&ch);
        let perturbed = geo
            .curvature_raw
            .get(&[0, 1, 0, 1])
            .add(&Expr::constant(&ch, 1e-2));
        geo.curvature_raw.set(&[0, 1, 0, 1], perturbed);
        let pts = sample_points(&ch, 16, 2);
        let rep = ResidualReport::from_exprs(
            "broken",
            IdentityTag::CurvatureGroupBehavior,
            RowKind::Identity,
            &geo.group_behavior_exprs(),
            &pts,
            1e-9,
        );
        assert!(!rep.passed());
        assert!(rep.witness.is_some());
    }

    #[test]
    fn wrong_sign_derivative_breaks_bianchi_second() {
        // Flipping the frame-derivative sign in one cyclic block leaves
        // exactly −2·X′(𝓡) as the residual, witnessing the convention.
        let ch = Chart::standard(4);
        let geo = small_su2xu1_geometry(&ch);
        let mut cache = DiffCache::new();
        let mut bad = Vec::new();
        for al in 0..4 {
            for sg in 0..4 {
                for l in 0..4 {
                    for m in (l + 1)..4 {
                        for n in (m + 1)..4 {
                            let good = geo
                                .bianchi_block(al, sg, n, l, m, &mut cache)
                                .add(&geo.bianchi_block(al, sg, l, m, n, &mut cache));
                            let flipped_deriv = geo.xp[m]
                                .apply_with(
                                    geo.curvature_spacetime.get(&[al, sg, n, l]),
                                    &mut cache,
                                )
                                .scale(2.0);
                            let third = geo.bianchi_block(al, sg, m, n, l, &mut cache);
                            bad.push(good.add(&third).sub(&flipped_deriv));
                        }
                    }
                }
            }
        }
        let pts = sample_points(&ch, 16, 4);
        let rep = ResidualReport::from_exprs(
            "wrong sign",
            IdentityTag::BianchiSecond,
            RowKind::Identity,
            &bad,
            &pts,
            1e-9,
        );
        assert!(!rep.passed());
    }

    #[test]
    fn perturbed_curvature_breaks_bianchi_second() {
        let ch = Chart::standard(4);
        let mut geo = small_su2xu1_geometry(&ch);
        let bumped = geo
            .curvature_spacetime
            .get(&[0, 1, 0, 1])
            .add(&Expr::constant(&ch, 1e-2));
        geo.curvature_spacetime.set(&[0, 1, 0, 1], bumped);
        let pts = sample_points(&ch, 16, 8);
        let rep = ResidualReport::from_exprs(
            "perturbed",
            IdentityTag::BianchiSecond,
            RowKind::Identity,
            &geo.bianchi_second_exprs(),
            &pts,
            1e-9,
        );
        assert!(!rep.passed());
    }
}
