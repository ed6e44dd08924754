//! Residual reports: the universal verification currency.
//!
//! Every identity check in the pipeline reduces to "this family of
//! expressions is numerically zero over a sample cloud" (or, for numeric
//! decompositions, "these sampled values are small"). A [`ResidualReport`]
//! records the maximum/mean absolute residual, the verdict against the mixed
//! relative/absolute tolerance rule, and a witness point on failure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::{EvalError, Expr, Point};

/// Sampling options shared by all checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampleOpts {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SampleOpts {
    fn default() -> Self {
        SampleOpts {
            samples: 64,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl SampleOpts {
    pub fn with_tol(self, tol: f64) -> Self {
        SampleOpts { tol, ..self }
    }
}

/// Stable machine tags for every identity the artifact checks. Reports never
/// emit an untagged row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityTag {
    ConstantsAntisymmetry,
    ConstantsJacobi,
    FiberRepresentation,
    FrameIndependence,
    JacobiBaseBaseBase,
    JacobiBaseBaseFiber,
    JacobiBaseFiberFiber,
    CentralExtension,
    ConnectionBehavior,
    DeformedBehavior,
    FieldStrengthCrossCheck,
    CoefficientTransformC,
    CoefficientTransformBeta,
    BasisChangeComposition,
    YangMills,
    ExtendedFieldEquation,
    SourceConservation,
    TetradInverse,
    TetradCommutation,
    FrameAnholonomy,
    TorsionAnholonomy,
    TorsionAbelianReduction,
    LinearConnectionTransform,
    CurvatureCommutator,
    CurvatureGroupBehavior,
    CurvatureFromTorsionDerivative,
    CurvatureTransmutation,
    CurvatureAntisymmetry,
    BianchiFirst,
    BianchiFirstQuadratic,
    BianchiSecond,
    BianchiContracted,
    RicciTorsionTrace,
    DerivativeLeibniz,
    DerivativeTransmutationTorsion,
    DerivativeTransmutationCurvature,
    FiberFromEnlarged,
    CoefficientInvariance,
    EinsteinAntisymmetryDefect,
    MetricSymmetry,
    MetricInverse,
    MetricCompatibility,
    AbelianDivergenceReduction,
    HodgeDoubleDual,
    DualityPrescription,
}

impl IdentityTag {
    pub fn as_str(self) -> &'static str {
        use IdentityTag::*;
        match self {
            ConstantsAntisymmetry => "constants-antisymmetry",
            ConstantsJacobi => "constants-jacobi",
            FiberRepresentation => "fiber-representation",
            FrameIndependence => "frame-independence",
            JacobiBaseBaseBase => "jacobi-base-base-base",
            JacobiBaseBaseFiber => "jacobi-base-base-fiber",
            JacobiBaseFiberFiber => "jacobi-base-fiber-fiber",
            CentralExtension => "central-extension",
            ConnectionBehavior => "connection-behavior",
            DeformedBehavior => "deformed-behavior",
            FieldStrengthCrossCheck => "field-strength-cross-check",
            CoefficientTransformC => "coefficient-transform-c",
            CoefficientTransformBeta => "coefficient-transform-beta",
            BasisChangeComposition => "basis-change-composition",
            YangMills => "yang-mills",
            ExtendedFieldEquation => "extended-field-equation",
            SourceConservation => "source-conservation",
            TetradInverse => "tetrad-inverse",
            TetradCommutation => "tetrad-commutation",
            FrameAnholonomy => "frame-anholonomy",
            TorsionAnholonomy => "torsion-anholonomy",
            TorsionAbelianReduction => "torsion-abelian-reduction",
            LinearConnectionTransform => "linear-connection-transform",
            CurvatureCommutator => "curvature-commutator",
            CurvatureGroupBehavior => "curvature-group-behavior",
            CurvatureFromTorsionDerivative => "curvature-from-torsion-derivative",
            CurvatureTransmutation => "curvature-transmutation",
            CurvatureAntisymmetry => "curvature-antisymmetry",
            BianchiFirst => "bianchi-first",
            BianchiFirstQuadratic => "bianchi-first-quadratic",
            BianchiSecond => "bianchi-second",
            BianchiContracted => "bianchi-contracted",
            RicciTorsionTrace => "ricci-torsion-trace",
            DerivativeLeibniz => "derivative-leibniz",
            DerivativeTransmutationTorsion => "derivative-transmutation-torsion",
            DerivativeTransmutationCurvature => "derivative-transmutation-curvature",
            FiberFromEnlarged => "fiber-from-enlarged",
            CoefficientInvariance => "coefficient-invariance",
            EinsteinAntisymmetryDefect => "einstein-antisymmetry-defect",
            MetricSymmetry => "metric-symmetry",
            MetricInverse => "metric-inverse",
            MetricCompatibility => "metric-compatibility",
            AbelianDivergenceReduction => "abelian-divergence-reduction",
            HodgeDoubleDual => "hodge-double-dual",
            DualityPrescription => "duality-prescription",
        }
    }
}

/// Rows are classified so exit codes only gate on identities: field
/// equations hold only for solution scenarios, diagnostics have no
/// pass/fail semantics at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Identity,
    FieldEquation,
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Reported,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Point,
    pub value: f64,
    pub threshold: f64,
    /// Flat component index within the checked family, for tensor residuals.
    pub component: usize,
}

/// Per-identity residual summary over a sample-point cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: String,
    pub tag: IdentityTag,
    pub kind: RowKind,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::Reported)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Evaluate a family of residual expressions over the sample cloud.
    /// Per point: residual = max over components of |value|, scale = max
    /// over components of the subterm scale; the point passes when
    /// `residual <= tol * (1 + scale)`.
    pub fn from_exprs(
        identity: &str,
        tag: IdentityTag,
        kind: RowKind,
        exprs: &[Expr],
        points: &[Point],
        tol: f64,
    ) -> ResidualReport {
        #[derive(Clone)]
        enum PointOutcome {
            Ok {
                residual: f64,
                threshold: f64,
                worst_component: usize,
            },
            Err(EvalError),
        }

        let per_point: Vec<PointOutcome> = points
            .par_iter()
            .map(|p| {
                let mut residual = 0.0f64;
                let mut scale = 0.0f64;
                let mut worst = 0usize;
                for (i, e) in exprs.iter().enumerate() {
                    match e.evaluate_scaled(p) {
                        Ok((v, s)) => {
                            if v.abs() > residual {
                                residual = v.abs();
                                worst = i;
                            }
                            scale = scale.max(s);
                        }
                        Err(err) => return PointOutcome::Err(err),
                    }
                }
                PointOutcome::Ok {
                    residual,
                    threshold: tol * (1.0 + scale),
                    worst_component: worst,
                }
            })
            .collect();

        let mut max_abs = 0.0f64;
        let mut sum = 0.0f64;
        let mut witness: Option<Witness> = None;
        let mut error: Option<(usize, EvalError)> = None;
        let mut n_ok = 0usize;
        for (pi, outcome) in per_point.iter().enumerate() {
            match outcome {
                PointOutcome::Ok {
                    residual,
                    threshold,
                    worst_component,
                } => {
                    n_ok += 1;
                    sum += residual;
                    if *residual > max_abs {
                        max_abs = *residual;
                    }
                    if kind != RowKind::Diagnostic && *residual > *threshold && witness.is_none() {
                        witness = Some(Witness {
                            point: points[pi].clone(),
                            value: *residual,
                            threshold: *threshold,
                            component: *worst_component,
                        });
                    }
                }
                PointOutcome::Err(e) => {
                    if error.is_none() {
                        error = Some((pi, e.clone()));
                    }
                }
            }
        }

        let verdict = if kind == RowKind::Diagnostic {
            Verdict::Reported
        } else if let Some((_, _)) = &error {
            Verdict::Inconclusive
        } else if witness.is_some() {
            Verdict::Fail
        } else {
            Verdict::Pass
        };

        ResidualReport {
            identity: identity.to_string(),
            tag,
            kind,
            max_abs,
            mean_abs: if n_ok > 0 {
                sum / n_ok as f64
            } else {
                f64::NAN
            },
            samples: points.len(),
            tolerance: tol,
            verdict,
            witness,
            error: error.map(|(pi, e)| format!("evaluation failed at sample {pi}: {e}")),
            note: None,
        }
    }

    /// Build a report from per-point numeric residual/scale pairs, for
    /// checks that run pointwise linear algebra instead of expressions.
    pub fn from_values(
        identity: &str,
        tag: IdentityTag,
        kind: RowKind,
        values: &[(f64, f64)],
        points: &[Point],
        tol: f64,
    ) -> ResidualReport {
        let mut max_abs = 0.0f64;
        let mut sum = 0.0;
        let mut witness = None;
        for (pi, &(r, scale)) in values.iter().enumerate() {
            sum += r;
            if r > max_abs {
                max_abs = r;
            }
            let threshold = tol * (1.0 + scale);
            if kind != RowKind::Diagnostic && r > threshold && witness.is_none() {
                witness = Some(Witness {
                    point: points[pi].clone(),
                    value: r,
                    threshold,
                    component: 0,
                });
            }
        }
        let verdict = if kind == RowKind::Diagnostic {
            Verdict::Reported
        } else if witness.is_some() {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        ResidualReport {
            identity: identity.to_string(),
            tag,
            kind,
            max_abs,
            mean_abs: if values.is_empty() {
                f64::NAN
            } else {
                sum / values.len() as f64
            },
            samples: values.len(),
            tolerance: tol,
            verdict,
            witness,
            error: None,
            note: None,
        }
    }
}
