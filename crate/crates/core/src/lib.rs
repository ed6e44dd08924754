//! Symbolic/numeric verification engine for Lie-algebra extensions of
//! vector-field algebras on a bundle chart.
//!
//! The library builds actual vector fields over a coordinate chart, applies
//! basis changes to them, and verifies the resulting commutation tables,
//! Jacobi constraints, tetrad-induced curvature and generalized torsion,
//! both Bianchi identities and the duality-prescription field equations by
//! sampling exact symbolic residuals over seeded point clouds.
//!
//! Modules follow the pipeline:
//!
//! - [`expr`]: symbolic expressions, differentiation, evaluation, zero tests
//! - [`parse`]: the expression grammar used by scenario files
//! - [`algebra`]: structure constants and group presets
//! - [`frames`]: vector fields, frames, basis changes, Jacobi constraints
//! - [`geometry`]: tetrad map, enlarged derivative, curvature, torsion,
//!   Bianchi identities
//! - [`dynamics`]: metric, field equations, source current, Hodge dual
//! - [`scenario`]: JSON scenarios, the staged pipeline runner, reports

pub mod algebra;
pub mod dynamics;
pub mod expr;
pub mod frames;
pub mod geometry;
pub mod parse;
pub mod report;
pub mod samples;
pub mod scenario;
pub mod tensor;

pub use expr::{Chart, ChartRef, Expr, Point};
pub use report::{ResidualReport, SampleOpts, Verdict};
