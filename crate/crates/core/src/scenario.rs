//! Scenario files, validation, and the staged verification pipeline.
//!
//! A scenario is a JSON document naming a group (preset or inline structure
//! constants), optional coordinate domains, sampling options, and expression
//! tables for the one-forms α and γ, the tetrad H, and optional C, J and
//! metric choices. The runner executes the requested stages in order and
//! emits one [`ResidualReport`] row per identity; stages whose prerequisites
//! failed are skipped with an explanation, never silently.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    check_structure_constants, preset, representation_residual, GroupPreset, PresetKind,
    StructureConstants,
};
use crate::dynamics::{
    conservation_exprs, constant_metric, euclidean_eta, extended_field_eq_exprs, hodge_dual,
    metric_compatibility_exprs, metric_from_tetrad, minkowski_eta, source_current,
    yang_mills_exprs, Metric,
};
use crate::expr::{sample_points, Chart, ChartRef, Expr, Point};
use crate::frames::{
    adjoint_corrected_exprs, adjoint_strict_exprs, central_extension_exprs, decompose,
    field_strength, jacobi_residual_exprs, transform_configuration, transformation_crosscheck,
    ExtensionCoefficients, Frame, VectorField,
};
use crate::geometry::TetradGeometry;
use crate::parse::parse;
use crate::report::{IdentityTag, ResidualReport, RowKind, SampleOpts, Verdict};
use crate::samples::test_internal_vector;
use crate::tensor::{arr2, ExprArray};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown group preset `{0}`")]
    UnknownPreset(String),
    #[error("field `{field}` has shape {got:?}, expected {expected}")]
    Shape {
        field: String,
        got: Vec<usize>,
        expected: String,
    },
    #[error("in field `{field}` entry [{index}]: {source}")]
    Parse {
        field: String,
        index: String,
        source: crate::parse::ParseError,
    },
    #[error("chart error: {0}")]
    Chart(#[from] crate::expr::ChartError),
    #[error("algebra error: {0}")]
    Algebra(#[from] crate::algebra::AlgebraError),
    #[error("the tetrad stage requires a 4-dimensional algebra, this group has dimension {0}")]
    TetradDimension(usize),
    #[error("inline groups with non-zero constants must supply fiber_fields")]
    MissingFiberFields,
    #[error("metric error: {0}")]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error("unknown metric keyword `{0}` (use euclidean, minkowski or from-tetrad)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Algebra,
    Gauge,
    Extended,
    Geometry,
    Dynamics,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Algebra,
        Stage::Gauge,
        Stage::Extended,
        Stage::Geometry,
        Stage::Dynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Algebra => "algebra",
            Stage::Gauge => "gauge",
            Stage::Extended => "extended",
            Stage::Geometry => "geometry",
            Stage::Dynamics => "dynamics",
        }
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Preset(String),
    Inline {
        dim: usize,
        f: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        fiber_fields: Option<Vec<Vec<String>>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Keyword(String),
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub stages: Option<Vec<Stage>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSpec {
    pub alpha: Option<Vec<Vec<String>>>,
    pub gamma: Option<Vec<Vec<String>>>,
    #[serde(rename = "H")]
    pub h: Option<Vec<Vec<String>>>,
    #[serde(rename = "C")]
    pub c: Option<Vec<Vec<Vec<String>>>>,
    #[serde(rename = "J")]
    pub j: Option<Vec<Vec<String>>>,
    pub eta: Option<MetricSpec>,
    pub metric: Option<MetricSpec>,
}

/// The raw scenario document as read from disk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub group: GroupSpec,
    #[serde(default)]
    pub domains: BTreeMap<String, (f64, f64)>,
    #[serde(default)]
    pub options: OptionsSpec,
    #[serde(default)]
    pub fields: FieldsSpec,
}

// ---------------------------------------------------------------------------
// Validated scenario
// ---------------------------------------------------------------------------

/// A fully validated scenario: chart built, group realized, all expression
/// tables parsed and shape-checked.
pub struct Scenario {
    pub name: String,
    pub chart: ChartRef,
    pub group: GroupPreset,
    pub alpha: Option<ExprArray>,
    pub gamma: Option<ExprArray>,
    pub tetrad_table: Option<ExprArray>,
    pub c_table: Option<ExprArray>,
    pub source: Option<ExprArray>,
    pub eta: Vec<Vec<f64>>,
    pub metric_spec: Option<MetricSpec>,
    pub opts: SampleOpts,
    pub stages: Vec<Stage>,
}

fn parse_table(
    chart: &ChartRef,
    field: &str,
    rows: &[Vec<String>],
    dim_g: usize,
) -> Result<ExprArray, ScenarioError> {
    if rows.len() != dim_g || rows.iter().any(|r| r.len() != 4) {
        return Err(ScenarioError::Shape {
            field: field.to_string(),
            got: vec![rows.len(), rows.first().map_or(0, |r| r.len())],
            expected: format!("{dim_g} x 4"),
        });
    }
    let mut out = ExprArray::zeros(chart, &[dim_g, 4]);
    for (a, row) in rows.iter().enumerate() {
        for (mu, text) in row.iter().enumerate() {
            let e = parse(text, chart).map_err(|source| ScenarioError::Parse {
                field: field.to_string(),
                index: format!("{a}][{mu}"),
                source,
            })?;
            out.set(&[a, mu], e);
        }
    }
    Ok(out)
}

fn parse_square_table(
    chart: &ChartRef,
    field: &str,
    rows: &[Vec<String>],
) -> Result<ExprArray, ScenarioError> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(ScenarioError::Shape {
            field: field.to_string(),
            got: vec![rows.len(), rows.first().map_or(0, |r| r.len())],
            expected: "4 x 4".to_string(),
        });
    }
    let mut out = ExprArray::zeros(chart, &[4, 4]);
    for (a, row) in rows.iter().enumerate() {
        for (mu, text) in row.iter().enumerate() {
            let e = parse(text, chart).map_err(|source| ScenarioError::Parse {
                field: field.to_string(),
                index: format!("{a}][{mu}"),
                source,
            })?;
            out.set(&[a, mu], e);
        }
    }
    Ok(out)
}

fn eta_from_spec(spec: &MetricSpec) -> Result<Vec<Vec<f64>>, ScenarioError> {
    match spec {
        MetricSpec::Keyword(k) => match k.as_str() {
            "euclidean" => Ok(euclidean_eta()),
            "minkowski" => Ok(minkowski_eta()),
            other => Err(ScenarioError::UnknownMetric(other.to_string())),
        },
        MetricSpec::Table(t) => Ok(t.clone()),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Scenario::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        // Resolve the group dimension first so the chart can be built.
        let (dim_g, preset_kind, inline) = match &file.group {
            GroupSpec::Preset(name) => {
                let kind = PresetKind::from_name(name)
                    .map_err(|_| ScenarioError::UnknownPreset(name.clone()))?;
                (kind.dim(), Some(kind), None)
            }
            GroupSpec::Inline {
                dim,
                f,
                fiber_fields,
            } => (*dim, None, Some((f.clone(), fiber_fields.clone()))),
        };

        let mut chart = Chart::bundle(
            &["x0", "x1", "x2", "x3"],
            &(0..dim_g)
                .map(|i| format!("th{i}"))
                .collect::<Vec<_>>()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        )?;
        for (name, (lo, hi)) in &file.domains {
            chart.set_domain(name, *lo, *hi)?;
        }
        let chart = chart.into_ref();

        let group = match (preset_kind, inline) {
            (Some(kind), _) => preset(kind, &chart)?,
            (None, Some((f, fields))) => {
                let constants = StructureConstants::from_nested(&f)?;
                let fiber_fields = match fields {
                    Some(tables) => {
                        if tables.len() != dim_g || tables.iter().any(|t| t.len() != chart.dim()) {
                            return Err(ScenarioError::Shape {
                                field: "fiber_fields".into(),
                                got: vec![tables.len()],
                                expected: format!("{dim_g} fields x {} components", chart.dim()),
                            });
                        }
                        tables
                            .iter()
                            .enumerate()
                            .map(|(a, comps)| {
                                let parsed: Result<Vec<Expr>, ScenarioError> = comps
                                    .iter()
                                    .enumerate()
                                    .map(|(i, text)| {
                                        parse(text, &chart).map_err(|source| ScenarioError::Parse {
                                            field: "fiber_fields".into(),
                                            index: format!("{a}][{i}"),
                                            source,
                                        })
                                    })
                                    .collect();
                                Ok::<VectorField, ScenarioError>(VectorField::from_components(
                                    &chart, parsed?,
                                ))
                            })
                            .collect::<Result<Vec<_>, _>>()?
                    }
                    None => {
                        if constants.scale() > 0.0 {
                            return Err(ScenarioError::MissingFiberFields);
                        }
                        (0..dim_g)
                            .map(|a| VectorField::coordinate(&chart, chart.fiber_index(a)))
                            .collect()
                    }
                };
                GroupPreset {
                    name: "inline".to_string(),
                    constants,
                    fiber_fields,
                }
            }
            (None, None) => unreachable!(),
        };

        let alpha = file
            .fields
            .alpha
            .as_ref()
            .map(|t| parse_table(&chart, "alpha", t, dim_g))
            .transpose()?;
        let gamma = file
            .fields
            .gamma
            .as_ref()
            .map(|t| parse_table(&chart, "gamma", t, dim_g))
            .transpose()?;
        let tetrad_table = file
            .fields
            .h
            .as_ref()
            .map(|t| parse_square_table(&chart, "H", t))
            .transpose()?;
        if tetrad_table.is_some() && dim_g != 4 {
            return Err(ScenarioError::TetradDimension(dim_g));
        }
        let c_table = match file.fields.c.as_ref() {
            Some(t) => {
                if t.len() != dim_g
                    || t.iter()
                        .any(|m| m.len() != 4 || m.iter().any(|r| r.len() != dim_g))
                {
                    return Err(ScenarioError::Shape {
                        field: "C".into(),
                        got: vec![t.len()],
                        expected: format!("{dim_g} x 4 x {dim_g}"),
                    });
                }
                let mut out = ExprArray::zeros(&chart, &[dim_g, 4, dim_g]);
                for (b, plane) in t.iter().enumerate() {
                    for (mu, row) in plane.iter().enumerate() {
                        for (a, text) in row.iter().enumerate() {
                            let e = parse(text, &chart).map_err(|source| ScenarioError::Parse {
                                field: "C".into(),
                                index: format!("{b}][{mu}][{a}"),
                                source,
                            })?;
                            out.set(&[b, mu, a], e);
                        }
                    }
                }
                Some(out)
            }
            None => None,
        };
        let source = file
            .fields
            .j
            .as_ref()
            .map(|t| parse_table(&chart, "J", t, dim_g))
            .transpose()?;

        let eta = match file.fields.eta.as_ref() {
            Some(spec) => eta_from_spec(spec)?,
            None => euclidean_eta(),
        };

        let opts = SampleOpts {
            samples: file.options.samples.unwrap_or(64),
            tol: file.options.tol.unwrap_or(1e-8),
            seed: file.options.seed.unwrap_or(0),
        };

        let stages = match file.options.stages.clone() {
            Some(list) => list,
            None => {
                let mut v = vec![Stage::Algebra];
                if alpha.is_some() {
                    v.push(Stage::Gauge);
                }
                if gamma.is_some() {
                    v.push(Stage::Extended);
                }
                if tetrad_table.is_some() {
                    v.push(Stage::Geometry);
                    v.push(Stage::Dynamics);
                }
                v
            }
        };

        Ok(Scenario {
            name: file.name,
            chart,
            group,
            alpha,
            gamma,
            tetrad_table,
            c_table,
            source,
            eta,
            metric_spec: file.fields.metric.clone(),
            opts,
            stages,
        })
    }
}

// ---------------------------------------------------------------------------
// Report document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub diagnostics: usize,
    pub identities_failed: usize,
    pub field_equations_failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub scenario: String,
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub stages: Vec<StageStatus>,
    pub reports: Vec<ResidualReport>,
    pub summary: Summary,
}

impl ReportDocument {
    pub fn all_identities_pass(&self) -> bool {
        self.summary.identities_failed == 0
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario `{}`  (samples {}, tol {:.1e}, seed {})\n",
            self.scenario, self.samples, self.tolerance, self.seed
        ));
        for s in &self.stages {
            match &s.reason {
                Some(r) => out.push_str(&format!(
                    "stage {:10} {}  ({r})\n",
                    s.stage.name(),
                    s.status
                )),
                None => out.push_str(&format!("stage {:10} {}\n", s.stage.name(), s.status)),
            }
        }
        out.push_str(&format!(
            "{:<44} {:<34} {:>11} {:>11} {}\n",
            "identity", "tag", "max", "mean", "verdict"
        ));
        for r in &self.reports {
            let verdict = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Inconclusive => "inconclusive",
                Verdict::Reported => "reported",
            };
            out.push_str(&format!(
                "{:<44} {:<34} {:>11.3e} {:>11.3e} {}\n",
                truncate(&r.identity, 43),
                r.tag.as_str(),
                r.max_abs,
                r.mean_abs,
                verdict
            ));
            if let Some(w) = &r.witness {
                out.push_str(&format!(
                    "    witness value {:.3e} over threshold {:.3e} at point {:?}\n",
                    w.value, w.threshold, w.point
                ));
            }
        }
        out.push_str(&format!(
            "summary: {} rows, {} passed, {} failed ({} identities), {} inconclusive, {} diagnostics\n",
            self.summary.total,
            self.summary.passed,
            self.summary.failed,
            self.summary.identities_failed,
            self.summary.inconclusive,
            self.summary.diagnostics
        ));
        out
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let cut: String = s.chars().take(n.saturating_sub(1)).collect();
        format!("{cut}…")
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct StageOutput {
    /// Carried configuration for dependent stages.
    gauge: Option<crate::frames::ChangedConfiguration>,
    extended: Option<crate::frames::ChangedConfiguration>,
    geometry: Option<std::rc::Rc<TetradGeometry>>,
}

/// Execute the scenario's stages in order and assemble the report document.
pub fn run(sc: &Scenario) -> ReportDocument {
    let points = sample_points(&sc.chart, sc.opts.samples, sc.opts.seed);
    let mut stages = Vec::new();
    let mut reports: Vec<ResidualReport> = Vec::new();
    let mut stage_failed: BTreeMap<Stage, bool> = BTreeMap::new();
    let mut carried = StageOutput {
        gauge: None,
        extended: None,
        geometry: None,
    };

    for stage in Stage::ALL {
        if !sc.stages.contains(&stage) {
            stages.push(StageStatus {
                stage,
                status: "skipped".into(),
                reason: Some("not requested".into()),
            });
            continue;
        }
        // Stages run in declaration order; any identity failure upstream
        // makes later results meaningless, so they are skipped loudly.
        if let Some((dep, _)) = stage_failed.iter().find(|(_, failed)| **failed) {
            stages.push(StageStatus {
                stage,
                status: "skipped".into(),
                reason: Some(format!(
                    "earlier stage `{}` reported failing identities",
                    dep.name()
                )),
            });
            continue;
        }
        if let Some(reason) = stage_inputs_missing(sc, stage) {
            stages.push(StageStatus {
                stage,
                status: "skipped".into(),
                reason: Some(reason),
            });
            continue;
        }

        let rows = run_stage(sc, stage, &points, &mut carried);
        let failed = rows
            .iter()
            .any(|r| r.kind == RowKind::Identity && !r.passed());
        stage_failed.insert(stage, failed);
        stages.push(StageStatus {
            stage,
            status: "ran".into(),
            reason: None,
        });
        reports.extend(rows);
    }

    let mut summary = Summary {
        total: reports.len(),
        passed: 0,
        failed: 0,
        inconclusive: 0,
        diagnostics: 0,
        identities_failed: 0,
        field_equations_failed: 0,
    };
    for r in &reports {
        match r.verdict {
            Verdict::Pass => summary.passed += 1,
            Verdict::Fail => {
                summary.failed += 1;
                match r.kind {
                    RowKind::Identity => summary.identities_failed += 1,
                    RowKind::FieldEquation => summary.field_equations_failed += 1,
                    RowKind::Diagnostic => {}
                }
            }
            Verdict::Inconclusive => {
                summary.inconclusive += 1;
                if r.kind == RowKind::Identity {
                    summary.identities_failed += 1;
                }
            }
            Verdict::Reported => summary.diagnostics += 1,
        }
    }

    ReportDocument {
        scenario: sc.name.clone(),
        samples: sc.opts.samples,
        tolerance: sc.opts.tol,
        seed: sc.opts.seed,
        stages,
        reports,
        summary,
    }
}

fn stage_inputs_missing(sc: &Scenario, stage: Stage) -> Option<String> {
    match stage {
        Stage::Algebra => None,
        Stage::Gauge => sc
            .alpha
            .is_none()
            .then(|| "no `alpha` table in the scenario".to_string()),
        Stage::Extended => sc
            .gamma
            .is_none()
            .then(|| "no `gamma` table in the scenario".to_string()),
        Stage::Geometry | Stage::Dynamics => match (&sc.tetrad_table, sc.group.constants.dim()) {
            (None, _) => Some("no `H` table in the scenario".to_string()),
            (Some(_), 4) => None,
            (Some(_), d) => Some(format!(
                "tetrad stage needs algebra dimension 4, this group has {d}"
            )),
        },
    }
}

fn run_stage(
    sc: &Scenario,
    stage: Stage,
    points: &[Point],
    carried: &mut StageOutput,
) -> Vec<ResidualReport> {
    match stage {
        Stage::Algebra => algebra_stage(sc, points),
        Stage::Gauge => gauge_stage(sc, points, carried),
        Stage::Extended => extended_stage(sc, points, carried),
        Stage::Geometry => geometry_stage(sc, points, carried).unwrap_or_else(error_row),
        Stage::Dynamics => dynamics_stage(sc, points, carried).unwrap_or_else(error_row),
    }
}

fn error_row(err: ScenarioError) -> Vec<ResidualReport> {
    vec![ResidualReport {
        identity: "stage construction".into(),
        tag: IdentityTag::FrameIndependence,
        kind: RowKind::Identity,
        max_abs: f64::NAN,
        mean_abs: f64::NAN,
        samples: 0,
        tolerance: 0.0,
        verdict: Verdict::Inconclusive,
        witness: None,
        error: Some(err.to_string()),
        note: None,
    }]
}

fn algebra_stage(sc: &Scenario, points: &[Point]) -> Vec<ResidualReport> {
    let mut rows = Vec::new();
    rows.extend(check_structure_constants(&sc.group.constants, 1e-12));
    rows.push(representation_residual(&sc.group, points, sc.opts.tol));

    let frame = Frame::holonomic(&sc.chart, sc.group.fiber_fields.clone());
    let row = match frame.min_singular_values(points) {
        Ok(svs) => {
            // Residual = how far below the conditioning threshold the frame
            // drops; zero on healthy frames.
            let vals: Vec<(f64, f64)> = svs
                .iter()
                .map(|sv| ((crate::frames::INDEPENDENCE_THRESHOLD - sv).max(0.0), 0.0))
                .collect();
            let min_sv = svs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let mut r = ResidualReport::from_values(
                "frame fields are pointwise linearly independent",
                IdentityTag::FrameIndependence,
                RowKind::Identity,
                &vals,
                points,
                1e-12,
            );
            r.note = Some(format!("smallest singular value {min_sv:.3e}"));
            r
        }
        Err(e) => {
            let mut r = error_row(ScenarioError::Dynamics(
                crate::dynamics::DynamicsError::BadShape(vec![]),
            ))
            .pop()
            .unwrap();
            r.identity = "frame fields are pointwise linearly independent".into();
            r.error = Some(e.to_string());
            r
        }
    };
    rows.push(row);
    rows
}

fn gauge_stage(sc: &Scenario, points: &[Point], carried: &mut StageOutput) -> Vec<ResidualReport> {
    let alpha = sc.alpha.as_ref().unwrap();
    let dim_g = sc.group.constants.dim();
    let chart = &sc.chart;
    let tol = sc.opts.tol;
    let mut rows = Vec::new();

    let trivial_frame = Frame::holonomic(chart, sc.group.fiber_fields.clone());
    let mut trivial = ExtensionCoefficients::trivial(chart, sc.group.constants.clone());
    if let Some(c) = &sc.c_table {
        trivial.c = c.clone();
    }
    let changed = transform_configuration(&trivial_frame, &trivial, alpha);
    rows.extend(transformation_crosscheck(&changed, points, tol));

    // Direct-product character: the transformed commutation coefficients
    // vanish exactly when alpha is connection-behaved.
    rows.push(
        ResidualReport::from_exprs(
            "one-form is connection-behaved (fiber derivatives in the adjoint)",
            IdentityTag::ConnectionBehavior,
            RowKind::Identity,
            &adjoint_strict_exprs(alpha, &sc.group.fiber_fields, &sc.group.constants),
            points,
            tol,
        )
        .with_note("holds only for gauge configurations; use `gamma` for deformed one-forms"),
    );

    let beta_ym = field_strength(chart, alpha, &sc.group.constants);
    let ym_matches_transform: Vec<Expr> = (0..dim_g)
        .flat_map(|a| (0..4).flat_map(move |mu| (0..4).map(move |nu| (a, mu, nu))))
        .map(|(a, mu, nu)| {
            changed
                .coeffs
                .beta
                .get(&[a, mu, nu])
                .sub(beta_ym.get(&[a, mu, nu]))
        })
        .collect();
    rows.push(
        ResidualReport::from_exprs(
            "non-linearity indicator equals the curl-plus-quadratic field strength",
            IdentityTag::FieldStrengthCrossCheck,
            RowKind::Identity,
            &ym_matches_transform,
            points,
            tol,
        )
        .with_note("equivalent to the direct-product character of the change"),
    );

    let [yyy, yyx, yxx] =
        jacobi_residual_exprs(&changed.frame.base, &changed.frame.fiber, &changed.coeffs);
    rows.push(ResidualReport::from_exprs(
        "closure constraint on three base fields",
        IdentityTag::JacobiBaseBaseBase,
        RowKind::Identity,
        &yyy,
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "closure constraint on two base fields and one fiber field",
        IdentityTag::JacobiBaseBaseFiber,
        RowKind::Identity,
        &yyx,
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "closure constraint on one base field and two fiber fields",
        IdentityTag::JacobiBaseFiberFiber,
        RowKind::Identity,
        &yxx,
        points,
        tol,
    ));

    rows.push(ResidualReport::from_exprs(
        "field strength lies in a central extension",
        IdentityTag::CentralExtension,
        RowKind::Identity,
        &central_extension_exprs(
            &changed.coeffs.beta,
            &sc.group.fiber_fields,
            &sc.group.constants,
        ),
        points,
        tol,
    ));

    match gauge_metric(sc) {
        Ok(metric) => rows.push(
            ResidualReport::from_exprs(
                "sourceless field equations of the gauge configuration",
                IdentityTag::YangMills,
                RowKind::FieldEquation,
                &yang_mills_exprs(chart, &changed.coeffs.beta, &metric, &changed.frame.base),
                points,
                tol,
            )
            .with_note("holds only for solution one-forms"),
        ),
        Err(e) => rows.push(metric_unavailable_row(
            "sourceless field equations of the gauge configuration",
            IdentityTag::YangMills,
            e,
        )),
    }

    carried.gauge = Some(changed);
    rows
}

fn metric_unavailable_row(identity: &str, tag: IdentityTag, err: ScenarioError) -> ResidualReport {
    ResidualReport {
        identity: identity.to_string(),
        tag,
        kind: RowKind::FieldEquation,
        max_abs: f64::NAN,
        mean_abs: f64::NAN,
        samples: 0,
        tolerance: 0.0,
        verdict: Verdict::Inconclusive,
        witness: None,
        error: Some(err.to_string()),
        note: Some("requested metric is not available in this stage".into()),
    }
}

fn gauge_metric(sc: &Scenario) -> Result<Metric, ScenarioError> {
    match &sc.metric_spec {
        None => Ok(constant_metric(&sc.chart, &euclidean_eta())?),
        Some(MetricSpec::Keyword(k)) if k == "euclidean" => {
            Ok(constant_metric(&sc.chart, &euclidean_eta())?)
        }
        Some(MetricSpec::Keyword(k)) if k == "minkowski" => {
            Ok(constant_metric(&sc.chart, &minkowski_eta())?)
        }
        Some(MetricSpec::Keyword(k)) if k == "from-tetrad" => Err(ScenarioError::UnknownMetric(
            "from-tetrad is only available in the tetrad stages".into(),
        )),
        Some(MetricSpec::Keyword(k)) => Err(ScenarioError::UnknownMetric(k.clone())),
        Some(MetricSpec::Table(t)) => Ok(constant_metric(&sc.chart, t)?),
    }
}

fn extended_stage(
    sc: &Scenario,
    points: &[Point],
    carried: &mut StageOutput,
) -> Vec<ResidualReport> {
    let gamma = sc.gamma.as_ref().unwrap();
    let chart = &sc.chart;
    let tol = sc.opts.tol;
    let dim_g = sc.group.constants.dim();
    let mut rows = Vec::new();

    let gauge = match &carried.gauge {
        Some(g) => g.clone(),
        None => {
            // No gauge stage ran: start the extension from the trivial
            // configuration directly.
            let frame = Frame::holonomic(chart, sc.group.fiber_fields.clone());
            let trivial = ExtensionCoefficients::trivial(chart, sc.group.constants.clone());
            crate::frames::ChangedConfiguration {
                frame,
                coeffs: trivial,
            }
        }
    };

    let extended = transform_configuration(&gauge.frame, &gauge.coeffs, gamma);
    rows.extend(transformation_crosscheck(&extended, points, tol));

    // Deformed behavior of σ = α + γ measured by the transformed
    // coefficients.
    let sigma = arr2(dim_g, 4, |a, mu| {
        let g = gamma.get(&[a, mu]).clone();
        match &sc.alpha {
            Some(al) => al.get(&[a, mu]).add(&g),
            None => g,
        }
    });
    rows.push(ResidualReport::from_exprs(
        "deformed one-form misbehaves by exactly the commutation coefficients",
        IdentityTag::DeformedBehavior,
        RowKind::Identity,
        &adjoint_corrected_exprs(
            &sigma,
            &sc.group.fiber_fields,
            &sc.group.constants,
            &extended.coeffs.c,
        ),
        points,
        tol,
    ));

    // Deformed field strength from the generalized-derivative formula:
    // β′ = ∂σ − ∂σ + fσσ + C′σ − C′σ.
    let mut cache = crate::expr::DiffCache::new();
    let mut direct = ExprArray::zeros(chart, &[dim_g, 4, 4]);
    for a in 0..dim_g {
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                let curl = sigma
                    .get(&[a, nu])
                    .differentiate_with(mu, &mut cache)
                    .sub(&sigma.get(&[a, mu]).differentiate_with(nu, &mut cache));
                let quad = crate::tensor::sum_over2(chart, dim_g, dim_g, |b, c| {
                    sigma
                        .get(&[b, mu])
                        .mul(sigma.get(&[c, nu]))
                        .scale(sc.group.constants.get(a, b, c))
                });
                let cross = crate::tensor::sum_over(chart, dim_g, |c| {
                    extended
                        .coeffs
                        .c
                        .get(&[a, mu, c])
                        .mul(sigma.get(&[c, nu]))
                        .sub(&extended.coeffs.c.get(&[a, nu, c]).mul(sigma.get(&[c, mu])))
                });
                let val = curl.add(&quad).add(&cross);
                direct.set(&[a, mu, nu], val.clone());
                direct.set(&[a, nu, mu], val.neg());
            }
        }
    }
    let formula_match: Vec<Expr> = (0..dim_g)
        .flat_map(|a| (0..4).flat_map(move |mu| (0..4).map(move |nu| (a, mu, nu))))
        .map(|(a, mu, nu)| {
            extended
                .coeffs
                .beta
                .get(&[a, mu, nu])
                .sub(direct.get(&[a, mu, nu]))
        })
        .collect();
    rows.push(ResidualReport::from_exprs(
        "deformed field strength matches the one-step formula in σ",
        IdentityTag::FieldStrengthCrossCheck,
        RowKind::Identity,
        &formula_match,
        points,
        tol,
    ));

    let [yyy, yyx, yxx] = jacobi_residual_exprs(
        &extended.frame.base,
        &extended.frame.fiber,
        &extended.coeffs,
    );
    rows.push(ResidualReport::from_exprs(
        "closure constraint on three deformed base fields",
        IdentityTag::JacobiBaseBaseBase,
        RowKind::Identity,
        &yyy,
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "closure constraint on two deformed base fields and one fiber field",
        IdentityTag::JacobiBaseBaseFiber,
        RowKind::Identity,
        &yyx,
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "closure constraint on one deformed base field and two fiber fields",
        IdentityTag::JacobiBaseFiberFiber,
        RowKind::Identity,
        &yxx,
        points,
        tol,
    ));

    // Field equation of the extended configuration, against the provided
    // source (or sourceless).
    match gauge_metric(sc) {
        Ok(metric) => rows.push(
            ResidualReport::from_exprs(
                "field equations of the extended configuration",
                IdentityTag::ExtendedFieldEquation,
                RowKind::FieldEquation,
                &extended_field_eq_exprs(
                    chart,
                    &extended.coeffs.beta,
                    &extended.coeffs.c,
                    &metric,
                    &extended.frame.base,
                    sc.source.as_ref(),
                ),
                points,
                tol,
            )
            .with_note(if sc.source.is_some() {
                "against the scenario's source table"
            } else {
                "sourceless"
            }),
        ),
        Err(e) => rows.push(metric_unavailable_row(
            "field equations of the extended configuration",
            IdentityTag::ExtendedFieldEquation,
            e,
        )),
    }

    carried.extended = Some(extended);
    rows
}

fn tetrad_geometry(
    sc: &Scenario,
    carried: &mut StageOutput,
) -> Result<std::rc::Rc<TetradGeometry>, ScenarioError> {
    if let Some(geo) = &carried.geometry {
        return Ok(geo.clone());
    }
    let h = sc.tetrad_table.clone().unwrap();
    let geo =
        TetradGeometry::new(&sc.chart, sc.group.clone(), h).map_err(|e| ScenarioError::Shape {
            field: "H".into(),
            got: vec![],
            expected: e.to_string(),
        })?;
    let geo = std::rc::Rc::new(geo);
    carried.geometry = Some(geo.clone());
    Ok(geo)
}

fn geometry_stage(
    sc: &Scenario,
    points: &[Point],
    carried: &mut StageOutput,
) -> Result<Vec<ResidualReport>, ScenarioError> {
    let chart = &sc.chart;
    let tol = sc.opts.tol;
    let geo = tetrad_geometry(sc, carried)?;
    let mut rows = Vec::new();

    // Tetrad inverse + determinant floor.
    let mut inv_row = ResidualReport::from_exprs(
        "tetrad inverse identities",
        IdentityTag::TetradInverse,
        RowKind::Identity,
        &geo.tetrad.inverse_residual_exprs(chart),
        points,
        1e-9,
    );
    let mut min_det = f64::INFINITY;
    for p in points {
        if let Ok(v) = geo.tetrad.det.evaluate(p) {
            min_det = min_det.min(v.abs());
        }
    }
    inv_row.note = Some(format!("min |det H| over samples {min_det:.3e}"));
    if min_det < 1e-6 {
        inv_row.verdict = Verdict::Fail;
        inv_row.note = Some(format!(
            "tetrad nearly singular: min |det H| {min_det:.3e} below 1e-6"
        ));
    }
    rows.push(inv_row);

    // Numeric cross-checks of the construction: mixed commutators against
    // the symbolic coefficients, and the frame anholonomy.
    rows.push(tetrad_commutation_row(&geo, points, tol));
    rows.push(frame_anholonomy_row(&geo, points, tol));

    rows.push(ResidualReport::from_exprs(
        "generalized torsion equals minus the anholonomy",
        IdentityTag::TorsionAnholonomy,
        RowKind::Identity,
        &geo.torsion_anholonomy_exprs(),
        points,
        1e-12,
    ));
    rows.push(ResidualReport::from_exprs(
        "commutation coefficients transform like a linear-group connection",
        IdentityTag::LinearConnectionTransform,
        RowKind::Identity,
        &geo.linear_connection_transform_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "fiber behavior of the anholonomy reproduces the raw curvature",
        IdentityTag::CurvatureGroupBehavior,
        RowKind::Identity,
        &geo.group_behavior_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "curvature is the frame derivative of the torsion",
        IdentityTag::CurvatureFromTorsionDerivative,
        RowKind::Identity,
        &geo.torsion_derivative_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "curvature transmutes consistently between internal and spacetime form",
        IdentityTag::CurvatureTransmutation,
        RowKind::Identity,
        &geo.transmutation_exprs(),
        points,
        tol,
    ));

    let antisym: Vec<Expr> = (0..4)
        .flat_map(|r| {
            (0..4).flat_map(move |s| (0..4).flat_map(move |m| (0..4).map(move |n| (r, s, m, n))))
        })
        .map(|(r, s, m, n)| {
            geo.curvature_spacetime
                .get(&[r, s, m, n])
                .add(geo.curvature_spacetime.get(&[r, s, n, m]))
        })
        .collect();
    rows.push(ResidualReport::from_exprs(
        "curvature antisymmetry in the last index pair",
        IdentityTag::CurvatureAntisymmetry,
        RowKind::Identity,
        &antisym,
        points,
        1e-12,
    ));

    rows.push(ResidualReport::from_exprs(
        "first geometric identity (cyclic curvature vs torsion derivative)",
        IdentityTag::BianchiFirst,
        RowKind::Identity,
        &geo.bianchi_first_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "quadratic form of the first geometric identity",
        IdentityTag::BianchiFirstQuadratic,
        RowKind::Identity,
        &geo.bianchi_first_quadratic_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "second geometric identity (cyclic covariant curvature derivative)",
        IdentityTag::BianchiSecond,
        RowKind::Identity,
        &geo.bianchi_second_exprs(),
        points,
        tol,
    ));

    // Metric-dependent rows.
    let metric = tetrad_metric(sc, &geo, points)?;
    rows.push(ResidualReport::from_exprs(
        "metric symmetry and inverse",
        IdentityTag::MetricInverse,
        RowKind::Identity,
        &metric.consistency_exprs(chart),
        points,
        1e-9,
    ));
    let re = geo.ricci_and_einstein(&metric);
    rows.push(ResidualReport::from_exprs(
        "ricci tensor equals minus the frame derivative of the torsion trace",
        IdentityTag::RicciTorsionTrace,
        RowKind::Identity,
        re.ricci_trace_residual.components(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "contracted second identity (divergence of the Einstein-like tensor)",
        IdentityTag::BianchiContracted,
        RowKind::Identity,
        &re.contracted_bianchi,
        points,
        1e-7,
    ));
    rows.push(ResidualReport::from_exprs(
        "antisymmetry defect of the doubly-raised curvature",
        IdentityTag::EinsteinAntisymmetryDefect,
        RowKind::Diagnostic,
        re.antisymmetry_defect.components(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "metric preservation by the covariant derivative",
        IdentityTag::MetricCompatibility,
        RowKind::Diagnostic,
        &metric_compatibility_exprs(&geo, &metric),
        points,
        tol,
    ));

    // Enlarged-derivative properties with a deterministic test object.
    let z = test_internal_vector(chart, 4, sc.opts.seed.wrapping_add(101));
    rows.push(ResidualReport::from_exprs(
        "enlarged and plain derivatives agree on all-spacetime operands (torsion)",
        IdentityTag::DerivativeTransmutationTorsion,
        RowKind::Identity,
        &geo.derivative_transmutation_torsion_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "enlarged and plain derivatives agree on all-spacetime operands (curvature)",
        IdentityTag::DerivativeTransmutationCurvature,
        RowKind::Identity,
        &geo.derivative_transmutation_curvature_exprs(),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "fiber fields recovered from the enlarged derivative",
        IdentityTag::FiberFromEnlarged,
        RowKind::Identity,
        &geo.fiber_from_enlarged_exprs(&z),
        points,
        tol,
    ));
    rows.push(ResidualReport::from_exprs(
        "commutator of enlarged derivatives reproduces the raw curvature",
        IdentityTag::CurvatureCommutator,
        RowKind::Identity,
        &geo.curvature_commutator_exprs(&z),
        points,
        tol,
    ));
    rows.push(leibniz_row(sc, &geo, &z, points, tol));
    let mut invariance = ResidualReport::from_exprs(
        "invariance of the commutation coefficients under the group action",
        IdentityTag::CoefficientInvariance,
        RowKind::Diagnostic,
        &geo.coefficient_invariance_exprs(),
        points,
        tol,
    );
    invariance.note = Some(if invariance.max_abs > tol {
        "extended (non-direct-product) regime".into()
    } else {
        "direct-product regime recoverable".into()
    });
    rows.push(invariance);

    Ok(rows)
}

fn tetrad_metric(
    sc: &Scenario,
    geo: &TetradGeometry,
    points: &[Point],
) -> Result<Metric, ScenarioError> {
    let metric = match &sc.metric_spec {
        None => metric_from_tetrad(&sc.chart, &geo.tetrad, &sc.eta)?,
        Some(MetricSpec::Keyword(k)) if k == "from-tetrad" => {
            metric_from_tetrad(&sc.chart, &geo.tetrad, &sc.eta)?
        }
        Some(MetricSpec::Keyword(k)) if k == "euclidean" => {
            constant_metric(&sc.chart, &euclidean_eta())?
        }
        Some(MetricSpec::Keyword(k)) if k == "minkowski" => {
            constant_metric(&sc.chart, &minkowski_eta())?
        }
        Some(MetricSpec::Keyword(k)) => return Err(ScenarioError::UnknownMetric(k.clone())),
        Some(MetricSpec::Table(t)) => constant_metric(&sc.chart, t)?,
    };
    // Orient the carried density to be positive on the sampling box.
    let mut metric = metric;
    if let (Some(d), Some(p)) = (&metric.sqrt_abs_det, points.first()) {
        if let Ok(v) = d.evaluate(p) {
            if v < 0.0 {
                metric.sqrt_abs_det = Some(d.neg());
            }
        }
    }
    Ok(metric)
}

/// Numeric cross-check of the tetrad construction: the mixed commutators
/// [X′_μ, X_a] decomposed in the fiber fields must reproduce the symbolic
/// commutation coefficients at every sample point.
pub fn tetrad_commutation_row(geo: &TetradGeometry, points: &[Point], tol: f64) -> ResidualReport {
    let fibers: Vec<&VectorField> = geo.group.fiber_fields.iter().collect();
    let mut vals = vec![(0.0f64, 0.0f64); points.len()];
    let mut eval_error: Option<String> = None;
    let mut cache = crate::expr::DiffCache::new();
    for mu in 0..4 {
        for a in 0..4 {
            let comm = geo.xp[mu].commutator_with(&geo.group.fiber_fields[a], &mut cache);
            let dec = decompose(&fibers, &comm, points);
            for (pi, sol) in dec.per_point.iter().enumerate() {
                match sol {
                    Ok(s) => {
                        for c in 0..4 {
                            match geo.deviation.get(&[c, mu, a]).evaluate(&points[pi]) {
                                Ok(sym) => {
                                    vals[pi].0 = vals[pi].0.max((s.coefficients[c] - sym).abs());
                                    vals[pi].1 = vals[pi].1.max(sym.abs()).max(s.scale);
                                }
                                Err(e) => {
                                    vals[pi].0 = f64::INFINITY;
                                    eval_error.get_or_insert_with(|| e.to_string());
                                }
                            }
                        }
                    }
                    Err(e) => {
                        vals[pi].0 = f64::INFINITY;
                        eval_error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
        }
    }
    let mut row = ResidualReport::from_values(
        "mixed commutators decompose with the symbolic commutation coefficients",
        IdentityTag::TetradCommutation,
        RowKind::Identity,
        &vals,
        points,
        tol,
    )
    .with_note(format!("group `{}`", geo.group.name));
    if let Some(err) = eval_error {
        row.verdict = Verdict::Inconclusive;
        row.error = Some(err);
    }
    row
}

/// Numeric cross-check of the anholonomy: [X′_μ, X′_ν] decomposed in the
/// transported frame must give minus the transmuted non-linearity indicator.
pub fn frame_anholonomy_row(geo: &TetradGeometry, points: &[Point], tol: f64) -> ResidualReport {
    let frame: Vec<&VectorField> = geo.xp.iter().collect();
    let mut vals = vec![(0.0f64, 0.0f64); points.len()];
    let mut cache = crate::expr::DiffCache::new();
    for mu in 0..4 {
        for nu in (mu + 1)..4 {
            let comm = geo.xp[mu].commutator_with(&geo.xp[nu], &mut cache);
            let dec = decompose(&frame, &comm, points);
            for (pi, sol) in dec.per_point.iter().enumerate() {
                match sol {
                    Ok(s) => {
                        for rho in 0..4 {
                            let sym = geo
                                .beta_spacetime
                                .get(&[rho, mu, nu])
                                .evaluate(&points[pi])
                                .unwrap_or(f64::NAN);
                            vals[pi].0 = vals[pi]
                                .0
                                .max((s.coefficients[rho] + sym).abs())
                                .max(s.residual);
                            vals[pi].1 = vals[pi].1.max(sym.abs()).max(s.scale);
                        }
                    }
                    Err(_) => vals[pi].0 = f64::INFINITY,
                }
            }
        }
    }
    ResidualReport::from_values(
        "transported frame commutators decompose with minus the anholonomy",
        IdentityTag::FrameAnholonomy,
        RowKind::Identity,
        &vals,
        points,
        tol,
    )
}

fn leibniz_row(
    sc: &Scenario,
    geo: &TetradGeometry,
    z: &ExprArray,
    points: &[Point],
    tol: f64,
) -> ResidualReport {
    use crate::geometry::{EnlargedDerivative, IndexKind, Indexed};
    let chart = &sc.chart;
    let mut cache = crate::expr::DiffCache::new();
    let j = test_internal_vector(chart, 4, sc.opts.seed.wrapping_add(202));
    let derivative = EnlargedDerivative {
        xp: &geo.xp,
        deviation: &geo.deviation,
        beta_spacetime: Some(&geo.beta_spacetime),
    };
    let zi = Indexed::new(z.clone(), vec![IndexKind::InternalUp]).unwrap();
    let ji = Indexed::new(j.clone(), vec![IndexKind::InternalDown]).unwrap();
    let prod = Indexed::new(
        arr2(4, 4, |d, c| z.get(&[d]).mul(j.get(&[c]))),
        vec![IndexKind::InternalUp, IndexKind::InternalDown],
    )
    .unwrap();
    let scalar = crate::tensor::sum_over(chart, 4, |a| z.get(&[a]).mul(j.get(&[a])));

    let mut exprs = Vec::new();
    for mu in 0..4 {
        let dz = derivative.apply(mu, &zi, &mut cache).unwrap();
        let dj = derivative.apply(mu, &ji, &mut cache).unwrap();
        let dprod = derivative.apply(mu, &prod, &mut cache).unwrap();
        // Product rule on the mixed object.
        for d in 0..4 {
            for c in 0..4 {
                let leibniz = dz
                    .data
                    .get(&[d])
                    .mul(j.get(&[c]))
                    .add(&z.get(&[d]).mul(dj.data.get(&[c])));
                exprs.push(dprod.data.get(&[d, c]).sub(&leibniz));
            }
        }
        // Scalars are untouched.
        let dscalar = derivative
            .apply(mu, &Indexed::scalar(scalar.clone()), &mut cache)
            .unwrap();
        let plain = geo.xp[mu].apply_with(&scalar, &mut cache);
        exprs.push(dscalar.data.get(&[]).sub(&plain));
        // And the contraction of the corrected pair reduces to the plain
        // derivative.
        let contracted = crate::tensor::sum_over(chart, 4, |a| {
            dz.data
                .get(&[a])
                .mul(j.get(&[a]))
                .add(&z.get(&[a]).mul(dj.data.get(&[a])))
        });
        exprs.push(contracted.sub(&plain));
    }
    ResidualReport::from_exprs(
        "enlarged derivative obeys the Leibniz rule across index signatures",
        IdentityTag::DerivativeLeibniz,
        RowKind::Identity,
        &exprs,
        points,
        tol,
    )
}

fn dynamics_stage(
    sc: &Scenario,
    points: &[Point],
    carried: &mut StageOutput,
) -> Result<Vec<ResidualReport>, ScenarioError> {
    let chart = &sc.chart;
    let tol = sc.opts.tol;
    let geo = tetrad_geometry(sc, carried)?;
    let metric = tetrad_metric(sc, &geo, points)?;
    let mut rows = Vec::new();

    let extracted = source_current(&geo, &metric);
    let current = sc.source.clone().unwrap_or_else(|| extracted.clone());

    rows.push(
        ResidualReport::from_exprs(
            "field equations close on the extracted source",
            IdentityTag::ExtendedFieldEquation,
            RowKind::Identity,
            &extended_field_eq_exprs(
                chart,
                &geo.beta_internal,
                &geo.deviation,
                &metric,
                &geo.xp,
                Some(&current),
            ),
            points,
            tol,
        )
        .with_note(if sc.source.is_some() {
            "against the scenario's source table"
        } else {
            "source extracted from the field equations"
        }),
    );

    rows.push(
        ResidualReport::from_exprs(
            "extracted source current is conserved",
            IdentityTag::SourceConservation,
            RowKind::Identity,
            &conservation_exprs(&geo, &current),
            points,
            1e-7,
        )
        .with_note("requires a gauge-invariant metric (fiber-independent)"),
    );

    // Hodge checks run whenever the metric carries a density.
    if metric.sqrt_abs_det.is_some() {
        let dual = hodge_dual(chart, &geo.beta_internal, &metric)?;
        let ddual = hodge_dual(chart, &dual, &metric)?;
        // Double dual is ±identity depending on the metric signature.
        let det_sign = {
            let mut m = nalgebra::DMatrix::zeros(4, 4);
            if let Some(p) = points.first() {
                for i in 0..4 {
                    for j in 0..4 {
                        m[(i, j)] = metric.g.get(&[i, j]).evaluate(p).unwrap_or(f64::NAN);
                    }
                }
            }
            if m.determinant() < 0.0 {
                -1.0
            } else {
                1.0
            }
        };
        let exprs: Vec<Expr> = (0..4)
            .flat_map(|a| (0..4).flat_map(move |m| (0..4).map(move |n| (a, m, n))))
            .map(|(a, m, n)| {
                ddual
                    .get(&[a, m, n])
                    .sub(&geo.beta_internal.get(&[a, m, n]).scale(det_sign))
            })
            .collect();
        rows.push(
            ResidualReport::from_exprs(
                "double Hodge dual is the signature sign on two-forms",
                IdentityTag::HodgeDoubleDual,
                RowKind::Identity,
                &exprs,
                points,
                tol,
            )
            .with_note(format!("signature sign {det_sign}")),
        );
    }

    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal abelian",
        "group": "abelian4",
        "fields": {
            "alpha": [
                ["0", "x1", "0", "0"],
                ["0", "0", "0", "0"],
                ["0", "0", "0", "0"],
                ["0", "0", "0", "0"]
            ]
        }
    }"#;

    #[test]
    fn minimal_scenario_loads_with_zero_constants() {
        let sc = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(sc.group.constants.scale(), 0.0);
        assert_eq!(sc.opts.samples, 64);
        assert_eq!(sc.stages, vec![Stage::Algebra, Stage::Gauge]);
    }

    #[test]
    fn identity_tetrad_scenario_loads() {
        let text = r#"{
            "name": "identity tetrad",
            "group": "su2xu1",
            "fields": {
                "H": [
                    ["1", "0", "0", "0"],
                    ["0", "1", "0", "0"],
                    ["0", "0", "1", "0"],
                    ["0", "0", "0", "1"]
                ]
            }
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        assert!(sc.tetrad_table.is_some());
        assert!(sc.stages.contains(&Stage::Geometry));
    }

    #[test]
    fn wrong_alpha_shape_names_the_field() {
        let text = r#"{
            "name": "bad",
            "group": "su2xu1",
            "fields": {
                "alpha": [
                    ["0", "0", "0", "0"],
                    ["0", "0", "0", "0"],
                    ["0", "0", "0", "0"]
                ]
            }
        }"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Shape { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("expected shape error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn bad_expression_reports_position() {
        let text = r#"{
            "name": "bad expr",
            "group": "u1",
            "fields": { "alpha": [["x0 + ", "0", "0", "0"]] }
        }"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Parse { field, index, .. }) => {
                assert_eq!(field, "alpha");
                assert_eq!(index, "0][0");
            }
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn tetrad_with_wrong_dimension_rejected() {
        let text = r#"{
            "name": "bad dim",
            "group": "su2",
            "fields": {
                "H": [
                    ["1","0","0","0"],["0","1","0","0"],
                    ["0","0","1","0"],["0","0","0","1"]
                ]
            }
        }"#;
        assert!(matches!(
            Scenario::from_json(text),
            Err(ScenarioError::TetradDimension(3))
        ));
    }

    #[test]
    fn unknown_preset_rejected() {
        let text = r#"{ "name": "x", "group": "so8" }"#;
        assert!(matches!(
            Scenario::from_json(text),
            Err(ScenarioError::UnknownPreset(_))
        ));
    }

    #[test]
    fn trivial_scenario_passes_everything() {
        let sc = Scenario::from_json(
            r#"{ "name": "trivial", "group": "abelian4",
                 "fields": { "alpha": [["0","0","0","0"],["0","0","0","0"],["0","0","0","0"],["0","0","0","0"]] } }"#,
        )
        .unwrap();
        let doc = run(&sc);
        assert!(doc.all_identities_pass(), "{}", doc.render_text());
        for r in &doc.reports {
            if r.kind == RowKind::Identity {
                assert!(r.max_abs < 1e-10);
            }
        }
    }

    #[test]
    fn broken_inline_constants_fail_and_skip_dependents() {
        // Non-antisymmetric inline constants with coordinate fiber fields:
        // the algebra stage fails, so the gauge stage must be skipped.
        let text = r#"{
            "name": "broken",
            "group": { "dim": 2, "f": [[[0.0, 0.3],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]],
                       "fiber_fields": [["0","0","0","0","1","0"],["0","0","0","0","0","1"]] },
            "fields": { "alpha": [["x0","0","0","0"],["0","0","0","0"]] }
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        let doc = run(&sc);
        assert!(!doc.all_identities_pass());
        let gauge_status = doc.stages.iter().find(|s| s.stage == Stage::Gauge).unwrap();
        assert_eq!(gauge_status.status, "skipped");
        assert!(gauge_status.reason.as_ref().unwrap().contains("algebra"));
    }

    #[test]
    fn determinism_byte_identical_reports() {
        let text = r#"{
            "name": "det",
            "group": "su2xu1",
            "options": { "samples": 16, "seed": 7 },
            "fields": {
                "alpha": [["x0","0","0","0"],["0","x1","0","0"],["0","0","sin(x2)","0"],["0","0","0","0"]]
            }
        }"#;
        let sc1 = Scenario::from_json(text).unwrap();
        let sc2 = Scenario::from_json(text).unwrap();
        let a = serde_json::to_string(&run(&sc1)).unwrap();
        let b = serde_json::to_string(&run(&sc2)).unwrap();
        assert_eq!(a, b);
    }
}
