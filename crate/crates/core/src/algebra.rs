//! Lie-algebra structure constants, their consistency checks, and the named
//! group presets used to instantiate scenarios.

use thiserror::Error;

use crate::expr::{ChartRef, Expr, Point};
use crate::frames::{decompose, VectorField};
use crate::report::{IdentityTag, ResidualReport, RowKind};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("unknown group preset `{0}`")]
    UnknownPreset(String),
    #[error("chart has {chart} fiber coordinates but the algebra has dimension {dim}")]
    FiberMismatch { chart: usize, dim: usize },
    #[error("structure constants must be a dim^3 array, got lengths {0:?}")]
    BadShape(Vec<usize>),
}

/// Real structure constants f^c_{ab}, stored row-major as `[c][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    f: Vec<f64>,
}

impl StructureConstants {
    pub fn zeros(dim: usize) -> StructureConstants {
        StructureConstants {
            dim,
            f: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(
        dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> StructureConstants {
        let mut out = StructureConstants::zeros(dim);
        for c in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    out.set(c, a, b, f(c, a, b));
                }
            }
        }
        out
    }

    pub fn from_nested(f: &[Vec<Vec<f64>>]) -> Result<StructureConstants, AlgebraError> {
        let dim = f.len();
        for c in f {
            if c.len() != dim || c.iter().any(|row| row.len() != dim) {
                return Err(AlgebraError::BadShape(f.iter().map(|c| c.len()).collect()));
            }
        }
        Ok(StructureConstants::from_fn(dim, |c, a, b| f[c][a][b]))
    }

    /// f^c_{ab} = ε_{abc} on three generators.
    pub fn su2() -> StructureConstants {
        StructureConstants::from_fn(3, |c, a, b| epsilon3(a, b, c))
    }

    /// Block-diagonal: ε on the first three generators, the fourth central.
    pub fn su2xu1() -> StructureConstants {
        StructureConstants::from_fn(4, |c, a, b| {
            if a < 3 && b < 3 && c < 3 {
                epsilon3(a, b, c)
            } else {
                0.0
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.f[(c * self.dim + a) * self.dim + b]
    }

    pub fn set(&mut self, c: usize, a: usize, b: usize, v: f64) {
        self.f[(c * self.dim + a) * self.dim + b] = v;
    }

    /// max |f^c_{ab} + f^c_{ba}|.
    pub fn antisymmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.dim {
            for a in 0..self.dim {
                for b in 0..self.dim {
                    worst = worst.max((self.get(c, a, b) + self.get(c, b, a)).abs());
                }
            }
        }
        worst
    }

    /// max over all index tuples of the cyclic Jacobi sum
    /// f^e_{ab} f^d_{ec} + f^e_{bc} f^d_{ea} + f^e_{ca} f^d_{eb}.
    pub fn jacobi_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    for d in 0..self.dim {
                        let mut sum = 0.0;
                        for e in 0..self.dim {
                            sum += self.get(e, a, b) * self.get(d, e, c)
                                + self.get(e, b, c) * self.get(d, e, a)
                                + self.get(e, c, a) * self.get(d, e, b);
                        }
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
        worst
    }

    /// Magnitude scale of the constants, for the mixed tolerance rule.
    pub fn scale(&self) -> f64 {
        self.f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn epsilon3(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Antisymmetry and Jacobi reports for a set of structure constants.
pub fn check_structure_constants(f: &StructureConstants, tol: f64) -> [ResidualReport; 2] {
    let scale = f.scale();
    let mk = |name: &str, tag, r: f64| {
        let threshold = tol * (1.0 + scale * scale.max(1.0));
        ResidualReport {
            identity: name.to_string(),
            tag,
            kind: RowKind::Identity,
            max_abs: r,
            mean_abs: r,
            samples: 1,
            tolerance: tol,
            verdict: if r <= threshold {
                crate::report::Verdict::Pass
            } else {
                crate::report::Verdict::Fail
            },
            witness: None,
            error: None,
            note: None,
        }
    };
    [
        mk(
            "structure constants antisymmetric in the lower pair",
            IdentityTag::ConstantsAntisymmetry,
            f.antisymmetry_residual(),
        ),
        mk(
            "structure constants satisfy the Jacobi identity",
            IdentityTag::ConstantsJacobi,
            f.jacobi_residual(),
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Abelian4,
    U1,
    Su2,
    Su2xU1,
}

impl PresetKind {
    pub fn from_name(name: &str) -> Result<PresetKind, AlgebraError> {
        match name {
            "abelian4" => Ok(PresetKind::Abelian4),
            "u1" => Ok(PresetKind::U1),
            "su2" => Ok(PresetKind::Su2),
            "su2xu1" => Ok(PresetKind::Su2xU1),
            other => Err(AlgebraError::UnknownPreset(other.to_string())),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            PresetKind::Abelian4 => 4,
            PresetKind::U1 => 1,
            PresetKind::Su2 => 3,
            PresetKind::Su2xU1 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Abelian4 => "abelian4",
            PresetKind::U1 => "u1",
            PresetKind::Su2 => "su2",
            PresetKind::Su2xU1 => "su2xu1",
        }
    }
}

/// Structure constants together with a canonical realization of the algebra
/// by vector fields on the fiber coordinates of a chart.
#[derive(Debug, Clone)]
pub struct GroupPreset {
    pub name: String,
    pub constants: StructureConstants,
    pub fiber_fields: Vec<VectorField>,
}

/// Build a named preset on the fiber coordinates of `chart`.
///
/// The su(2) realization uses left-invariant fields in product-of-rotations
/// coordinates (t0, t1, t2):
///
/// ```text
/// X_0 = (cos t2 / cos t1) ∂0 + sin t2 ∂1 − (sin t1 cos t2 / cos t1) ∂2
/// X_1 = (−sin t2 / cos t1) ∂0 + cos t2 ∂1 + (sin t1 sin t2 / cos t1) ∂2
/// X_2 = ∂2
/// ```
///
/// valid wherever cos t1 ≠ 0 (the default domain [−1, 1] keeps it above
/// 0.54), with [X_a, X_b] = ε_{abc} X_c. su2xu1 appends the central ∂3.
pub fn preset(kind: PresetKind, chart: &ChartRef) -> Result<GroupPreset, AlgebraError> {
    let dim = kind.dim();
    if chart.fiber_count() != dim {
        return Err(AlgebraError::FiberMismatch {
            chart: chart.fiber_count(),
            dim,
        });
    }
    let (constants, fiber_fields) = match kind {
        PresetKind::Abelian4 | PresetKind::U1 => {
            let fields = (0..dim)
                .map(|a| VectorField::coordinate(chart, chart.fiber_index(a)))
                .collect();
            (StructureConstants::zeros(dim), fields)
        }
        PresetKind::Su2 => (StructureConstants::su2(), su2_fields(chart, 0)),
        PresetKind::Su2xU1 => {
            let mut fields = su2_fields(chart, 0);
            fields.push(VectorField::coordinate(chart, chart.fiber_index(3)));
            (StructureConstants::su2xu1(), fields)
        }
    };
    Ok(GroupPreset {
        name: kind.name().to_string(),
        constants,
        fiber_fields,
    })
}

fn su2_fields(chart: &ChartRef, first_fiber: usize) -> Vec<VectorField> {
    let i0 = chart.fiber_index(first_fiber);
    let t1 = Expr::coord(chart, i0 + 1);
    let t2 = Expr::coord(chart, i0 + 2);
    let (c1, s1) = (t1.cos(), t1.sin());
    let (c2, s2) = (t2.cos(), t2.sin());
    let zero = Expr::zero(chart);

    let mut comps0 = vec![zero.clone(); chart.dim()];
    comps0[i0] = c2.div(&c1);
    comps0[i0 + 1] = s2.clone();
    comps0[i0 + 2] = s1.mul(&c2).div(&c1).neg();

    let mut comps1 = vec![zero.clone(); chart.dim()];
    comps1[i0] = s2.div(&c1).neg();
    comps1[i0 + 1] = c2.clone();
    comps1[i0 + 2] = s1.mul(&s2).div(&c1);

    let mut comps2 = vec![zero; chart.dim()];
    comps2[i0 + 2] = Expr::one(chart);

    vec![
        VectorField::from_components(chart, comps0),
        VectorField::from_components(chart, comps1),
        VectorField::from_components(chart, comps2),
    ]
}

/// Numeric check that the preset's fields realize its constants: for every
/// pair (a, b), [X_a, X_b] decomposed in the fiber fields must reproduce
/// f^c_{ab} at every sample point.
pub fn representation_residual(preset: &GroupPreset, points: &[Point], tol: f64) -> ResidualReport {
    let dim = preset.constants.dim();
    let fields: Vec<&VectorField> = preset.fiber_fields.iter().collect();
    let mut per_point = vec![(0.0f64, preset.constants.scale()); points.len()];
    for a in 0..dim {
        for b in 0..dim {
            let comm = preset.fiber_fields[a].commutator(&preset.fiber_fields[b]);
            let dec = decompose(&fields, &comm, points);
            for (pi, sol) in dec.per_point.iter().enumerate() {
                match sol {
                    Ok(s) => {
                        for c in 0..dim {
                            let err = (s.coefficients[c] - preset.constants.get(c, a, b)).abs();
                            per_point[pi].0 = per_point[pi].0.max(err).max(s.residual);
                        }
                    }
                    Err(e) => {
                        return ResidualReport::from_values(
                            "fiber fields realize the structure constants",
                            IdentityTag::FiberRepresentation,
                            RowKind::Identity,
                            &[(f64::INFINITY, 0.0)],
                            &points[pi..=pi],
                            tol,
                        )
                        .with_note(format!("decomposition failed: {e}"));
                    }
                }
            }
        }
    }
    ResidualReport::from_values(
        "fiber fields realize the structure constants",
        IdentityTag::FiberRepresentation,
        RowKind::Identity,
        &per_point,
        points,
        tol,
    )
}
