//! Symbolic scalar expressions over a finite coordinate chart.
//!
//! An [`Expr`] is an immutable tree of arithmetic nodes over the coordinates
//! of a shared [`Chart`]. The module provides exact differentiation, IEEE
//! double evaluation with subterm-magnitude tracking, and probabilistic
//! zero-testing over seeded sample clouds. Everything downstream (frames,
//! curvature, field equations) is assembled from these trees.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Shared handle to a chart. Expressions on the same chart must share the
/// same instance; mixing instances is a programming error and panics.
pub type ChartRef = Arc<Chart>;

/// A point of the chart: one real per coordinate.
pub type Point = Vec<f64>;

/// Default sampling interval for every coordinate.
pub const DEFAULT_DOMAIN: (f64, f64) = (-1.0, 1.0);

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("duplicate coordinate name `{0}`")]
    DuplicateName(String),
    #[error("chart must have exactly 4 base coordinates, got {0}")]
    BaseCount(usize),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("domain for `{0}` must have positive length")]
    EmptyDomain(String),
}

/// An ordered coordinate chart split into base (spacetime) and fiber (group)
/// coordinates, with a per-coordinate sampling interval.
#[derive(Debug, Clone)]
pub struct Chart {
    names: Vec<String>,
    base_count: usize,
    domains: Vec<(f64, f64)>,
    index: HashMap<String, usize>,
}

impl Chart {
    /// Build a bundle chart from 4 base coordinate names and any number of
    /// fiber coordinate names. All domains start as [-1, 1].
    pub fn bundle(base: &[&str], fiber: &[&str]) -> Result<Chart, ChartError> {
        if base.len() != 4 {
            return Err(ChartError::BaseCount(base.len()));
        }
        let mut names = Vec::with_capacity(base.len() + fiber.len());
        let mut index = HashMap::new();
        for &n in base.iter().chain(fiber.iter()) {
            if index.insert(n.to_string(), names.len()).is_some() {
                return Err(ChartError::DuplicateName(n.to_string()));
            }
            names.push(n.to_string());
        }
        let dim = names.len();
        Ok(Chart {
            names,
            base_count: base.len(),
            domains: vec![DEFAULT_DOMAIN; dim],
            index,
        })
    }

    /// The standard scenario chart: base x0..x3 plus fiber th0..th{n-1}.
    pub fn standard(fiber_count: usize) -> ChartRef {
        let base = ["x0", "x1", "x2", "x3"];
        let fiber: Vec<String> = (0..fiber_count).map(|i| format!("th{i}")).collect();
        let fiber_refs: Vec<&str> = fiber.iter().map(|s| s.as_str()).collect();
        Arc::new(Chart::bundle(&base, &fiber_refs).expect("standard chart is valid"))
    }

    pub fn set_domain(&mut self, name: &str, lo: f64, hi: f64) -> Result<(), ChartError> {
        if hi <= lo {
            return Err(ChartError::EmptyDomain(name.to_string()));
        }
        let i = self
            .index
            .get(name)
            .copied()
            .ok_or_else(|| ChartError::UnknownCoordinate(name.to_string()))?;
        self.domains[i] = (lo, hi);
        Ok(())
    }

    pub fn into_ref(self) -> ChartRef {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn fiber_count(&self) -> usize {
        self.names.len() - self.base_count
    }

    /// Chart index of the i-th fiber coordinate.
    pub fn fiber_index(&self, i: usize) -> usize {
        self.base_count + i
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn domain(&self, i: usize) -> (f64, f64) {
        self.domains[i]
    }
}

/// Draw `samples` points uniformly from the chart's domain box, deterministic
/// in `seed`.
pub fn sample_points(chart: &Chart, samples: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Uniform<f64>> = (0..chart.dim())
        .map(|i| {
            let (lo, hi) = chart.domain(i);
            Uniform::new(lo, hi)
        })
        .collect();
    (0..samples)
        .map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Add(NodeRef, NodeRef),
    Sub(NodeRef, NodeRef),
    Mul(NodeRef, NodeRef),
    Div(NodeRef, NodeRef),
    Pow(NodeRef, u32),
    Neg(NodeRef),
    Sin(NodeRef),
    Cos(NodeRef),
    Exp(NodeRef),
}

type NodeRef = Arc<Node>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
    #[error("point has {got} coordinates, chart has {expected}")]
    PointDimension { expected: usize, got: usize },
}

/// Immutable symbolic expression tied to a chart. Cloning is cheap (shared
/// subtrees); all operations are pure.
#[derive(Clone)]
pub struct Expr {
    chart: ChartRef,
    node: NodeRef,
}

fn assert_same_chart(a: &Expr, b: &Expr) {
    assert!(
        Arc::ptr_eq(&a.chart, &b.chart),
        "expressions built on different chart instances"
    );
}

impl Expr {
    pub fn constant(chart: &ChartRef, v: f64) -> Expr {
        Expr {
            chart: chart.clone(),
            node: Arc::new(Node::Const(v)),
        }
    }

    pub fn zero(chart: &ChartRef) -> Expr {
        Expr::constant(chart, 0.0)
    }

    pub fn one(chart: &ChartRef) -> Expr {
        Expr::constant(chart, 1.0)
    }

    pub fn coord(chart: &ChartRef, index: usize) -> Expr {
        assert!(index < chart.dim(), "coordinate index out of range");
        Expr {
            chart: chart.clone(),
            node: Arc::new(Node::Coord(index)),
        }
    }

    pub fn coord_name(chart: &ChartRef, name: &str) -> Result<Expr, ChartError> {
        let i = chart
            .coord_index(name)
            .ok_or_else(|| ChartError::UnknownCoordinate(name.to_string()))?;
        Ok(Expr::coord(chart, i))
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    fn wrap(&self, node: Node) -> Expr {
        Expr {
            chart: self.chart.clone(),
            node: Arc::new(node),
        }
    }

    fn as_const(&self) -> Option<f64> {
        match *self.node {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn fold2(a: f64, b: f64, op: fn(f64, f64) -> f64) -> Option<f64> {
        let v = op(a, b);
        v.is_finite().then_some(v)
    }

    pub fn add(&self, rhs: &Expr) -> Expr {
        assert_same_chart(self, rhs);
        if self.is_const_zero() {
            return rhs.clone();
        }
        if rhs.is_const_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if let Some(v) = Self::fold2(a, b, |a, b| a + b) {
                return Expr::constant(&self.chart, v);
            }
        }
        self.wrap(Node::Add(self.node.clone(), rhs.node.clone()))
    }

    pub fn sub(&self, rhs: &Expr) -> Expr {
        assert_same_chart(self, rhs);
        if rhs.is_const_zero() {
            return self.clone();
        }
        if self.is_const_zero() {
            return rhs.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if let Some(v) = Self::fold2(a, b, |a, b| a - b) {
                return Expr::constant(&self.chart, v);
            }
        }
        self.wrap(Node::Sub(self.node.clone(), rhs.node.clone()))
    }

    pub fn mul(&self, rhs: &Expr) -> Expr {
        assert_same_chart(self, rhs);
        if self.is_const_zero() || rhs.is_const_zero() {
            return Expr::zero(&self.chart);
        }
        if self.as_const() == Some(1.0) {
            return rhs.clone();
        }
        if rhs.as_const() == Some(1.0) {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if let Some(v) = Self::fold2(a, b, |a, b| a * b) {
                return Expr::constant(&self.chart, v);
            }
        }
        self.wrap(Node::Mul(self.node.clone(), rhs.node.clone()))
    }

    pub fn div(&self, rhs: &Expr) -> Expr {
        assert_same_chart(self, rhs);
        if rhs.as_const() == Some(1.0) {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), rhs.as_const()) {
            if b != 0.0 {
                if let Some(v) = Self::fold2(a, b, |a, b| a / b) {
                    return Expr::constant(&self.chart, v);
                }
            }
        }
        self.wrap(Node::Div(self.node.clone(), rhs.node.clone()))
    }

    pub fn powi(&self, n: u32) -> Expr {
        match n {
            0 => Expr::one(&self.chart),
            1 => self.clone(),
            _ => {
                if let Some(a) = self.as_const() {
                    let v = a.powi(n as i32);
                    if v.is_finite() {
                        return Expr::constant(&self.chart, v);
                    }
                }
                self.wrap(Node::Pow(self.node.clone(), n))
            }
        }
    }

    pub fn neg(&self) -> Expr {
        match &*self.node {
            Node::Const(v) => Expr::constant(&self.chart, -v),
            Node::Neg(inner) => Expr {
                chart: self.chart.clone(),
                node: inner.clone(),
            },
            _ => self.wrap(Node::Neg(self.node.clone())),
        }
    }

    pub fn sin(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::constant(&self.chart, a.sin());
        }
        self.wrap(Node::Sin(self.node.clone()))
    }

    pub fn cos(&self) -> Expr {
        if let Some(a) = self.as_const() {
            return Expr::constant(&self.chart, a.cos());
        }
        self.wrap(Node::Cos(self.node.clone()))
    }

    pub fn exp(&self) -> Expr {
        if let Some(a) = self.as_const() {
            let v = a.exp();
            if v.is_finite() {
                return Expr::constant(&self.chart, v);
            }
        }
        self.wrap(Node::Exp(self.node.clone()))
    }

    pub fn scale(&self, c: f64) -> Expr {
        self.mul(&Expr::constant(&self.chart, c))
    }

    /// Balanced sum of an iterator of expressions (keeps tree depth at
    /// log(n) for the long contraction sums the tensor modules build).
    pub fn sum<I: IntoIterator<Item = Expr>>(chart: &ChartRef, terms: I) -> Expr {
        let mut items: Vec<Expr> = terms.into_iter().filter(|e| !e.is_const_zero()).collect();
        if items.is_empty() {
            return Expr::zero(chart);
        }
        while items.len() > 1 {
            let mut next = Vec::with_capacity(items.len().div_ceil(2));
            let mut it = items.chunks(2);
            for pair in &mut it {
                match pair {
                    [a, b] => next.push(a.add(b)),
                    [a] => next.push(a.clone()),
                    _ => unreachable!(),
                }
            }
            items = next;
        }
        items.pop().unwrap()
    }

    /// Exact partial derivative with respect to coordinate `coord`.
    pub fn differentiate(&self, coord: usize) -> Expr {
        let mut cache = DiffCache::new();
        self.differentiate_with(coord, &mut cache)
    }

    /// Exact partial derivative by coordinate name.
    pub fn differentiate_name(&self, name: &str) -> Result<Expr, ChartError> {
        let i = self
            .chart
            .coord_index(name)
            .ok_or_else(|| ChartError::UnknownCoordinate(name.to_string()))?;
        Ok(self.differentiate(i))
    }

    /// Derivative with a shared memo table; large tensor assemblies thread
    /// one cache through so common subtrees are differentiated once.
    pub fn differentiate_with(&self, coord: usize, cache: &mut DiffCache) -> Expr {
        assert!(coord < self.chart.dim(), "coordinate index out of range");
        diff_node(&self.chart, &self.node, coord, cache)
    }

    /// Evaluate at a point.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() != self.chart.dim() {
            return Err(EvalError::PointDimension {
                expected: self.chart.dim(),
                got: point.len(),
            });
        }
        let mut cache = EvalCache::default();
        eval_node(&self.node, point, &mut cache)
    }

    /// Evaluate returning `(value, scale)`, where `scale` is the largest
    /// magnitude attained by any subterm. The zero test compares residuals
    /// against `tol * (1 + scale)`.
    pub fn evaluate_scaled(&self, point: &[f64]) -> Result<(f64, f64), EvalError> {
        if point.len() != self.chart.dim() {
            return Err(EvalError::PointDimension {
                expected: self.chart.dim(),
                got: point.len(),
            });
        }
        let mut cache = EvalCache::default();
        let v = eval_node(&self.node, point, &mut cache)?;
        let mut scale = 0.0f64;
        for &x in cache.values.values() {
            scale = scale.max(x.abs());
        }
        Ok((v, scale))
    }

    /// Evaluate several expressions at one point with a shared subtree cache.
    pub fn evaluate_many(exprs: &[&Expr], point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut cache = EvalCache::default();
        exprs
            .iter()
            .map(|e| {
                if point.len() != e.chart.dim() {
                    return Err(EvalError::PointDimension {
                        expected: e.chart.dim(),
                        got: point.len(),
                    });
                }
                eval_node(&e.node, point, &mut cache)
            })
            .collect()
    }
}

/// Memo table for [`Expr::differentiate_with`]. Holds a clone of each source
/// subtree so pointer keys cannot be invalidated by address reuse.
#[derive(Default)]
pub struct DiffCache {
    map: HashMap<(usize, usize), (NodeRef, Expr)>,
}

impl DiffCache {
    pub fn new() -> Self {
        Self::default()
    }
}

fn diff_node(chart: &ChartRef, node: &NodeRef, coord: usize, cache: &mut DiffCache) -> Expr {
    let key = (Arc::as_ptr(node) as usize, coord);
    if let Some((src, d)) = cache.map.get(&key) {
        if Arc::ptr_eq(src, node) {
            return d.clone();
        }
    }
    let ex = |n: &NodeRef| Expr {
        chart: chart.clone(),
        node: n.clone(),
    };
    let result = match &**node {
        Node::Const(_) => Expr::zero(chart),
        Node::Coord(i) => {
            if *i == coord {
                Expr::one(chart)
            } else {
                Expr::zero(chart)
            }
        }
        Node::Add(a, b) => {
            diff_node(chart, a, coord, cache).add(&diff_node(chart, b, coord, cache))
        }
        Node::Sub(a, b) => {
            diff_node(chart, a, coord, cache).sub(&diff_node(chart, b, coord, cache))
        }
        Node::Mul(a, b) => {
            let da = diff_node(chart, a, coord, cache);
            let db = diff_node(chart, b, coord, cache);
            da.mul(&ex(b)).add(&ex(a).mul(&db))
        }
        Node::Div(a, b) => {
            // (a/b)' = (a'·b − a·b') / b²
            let da = diff_node(chart, a, coord, cache);
            let db = diff_node(chart, b, coord, cache);
            let num = da.mul(&ex(b)).sub(&ex(a).mul(&db));
            let den = ex(b).mul(&ex(b));
            num.div(&den)
        }
        Node::Pow(a, n) => {
            let da = diff_node(chart, a, coord, cache);
            let lower = ex(a).powi(n - 1);
            lower.scale(*n as f64).mul(&da)
        }
        Node::Neg(a) => diff_node(chart, a, coord, cache).neg(),
        Node::Sin(a) => ex(a).cos().mul(&diff_node(chart, a, coord, cache)),
        Node::Cos(a) => ex(a).sin().neg().mul(&diff_node(chart, a, coord, cache)),
        Node::Exp(a) => ex(a).exp().mul(&diff_node(chart, a, coord, cache)),
    };
    cache.map.insert(key, (node.clone(), result.clone()));
    result
}

#[derive(Default)]
struct EvalCache {
    values: HashMap<usize, f64>,
}

fn eval_node(node: &NodeRef, p: &[f64], cache: &mut EvalCache) -> Result<f64, EvalError> {
    let key = Arc::as_ptr(node) as usize;
    if let Some(&v) = cache.values.get(&key) {
        return Ok(v);
    }
    let v = match &**node {
        Node::Const(c) => *c,
        Node::Coord(i) => p[*i],
        Node::Add(a, b) => eval_node(a, p, cache)? + eval_node(b, p, cache)?,
        Node::Sub(a, b) => eval_node(a, p, cache)? - eval_node(b, p, cache)?,
        Node::Mul(a, b) => eval_node(a, p, cache)? * eval_node(b, p, cache)?,
        Node::Div(a, b) => {
            let num = eval_node(a, p, cache)?;
            let den = eval_node(b, p, cache)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            num / den
        }
        Node::Pow(a, n) => eval_node(a, p, cache)?.powi(*n as i32),
        Node::Neg(a) => -eval_node(a, p, cache)?,
        Node::Sin(a) => eval_node(a, p, cache)?.sin(),
        Node::Cos(a) => eval_node(a, p, cache)?.cos(),
        Node::Exp(a) => eval_node(a, p, cache)?.exp(),
    };
    if !v.is_finite() {
        return Err(EvalError::NonFinite(node_op_name(node)));
    }
    cache.values.insert(key, v);
    Ok(v)
}

fn node_op_name(node: &Node) -> &'static str {
    match node {
        Node::Const(_) => "const",
        Node::Coord(_) => "coord",
        Node::Add(..) => "add",
        Node::Sub(..) => "sub",
        Node::Mul(..) => "mul",
        Node::Div(..) => "div",
        Node::Pow(..) => "pow",
        Node::Neg(..) => "neg",
        Node::Sin(..) => "sin",
        Node::Cos(..) => "cos",
        Node::Exp(..) => "exp",
    }
}

/// Outcome of the probabilistic zero test.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroCheck {
    /// Every sampled residual passed `|v| <= tol * (1 + scale)`.
    Zero,
    /// A witness point where the expression is not negligibly small.
    NonZero {
        point: Point,
        value: f64,
        threshold: f64,
    },
    /// Evaluation failed at a sample point; no verdict.
    Inconclusive { point: Point, error: EvalError },
}

impl ZeroCheck {
    pub fn is_zero(&self) -> bool {
        matches!(self, ZeroCheck::Zero)
    }
}

/// Sample the expression at `samples` seeded points and test whether it is
/// numerically zero under the mixed relative/absolute tolerance rule.
pub fn is_zero(e: &Expr, samples: usize, tol: f64, seed: u64) -> ZeroCheck {
    assert!(samples >= 1, "samples must be >= 1");
    assert!(tol > 0.0, "tol must be positive");
    let pts = sample_points(e.chart(), samples, seed);
    for p in pts {
        match e.evaluate_scaled(&p) {
            Ok((v, scale)) => {
                let threshold = tol * (1.0 + scale);
                if v.abs() > threshold {
                    return ZeroCheck::NonZero {
                        point: p,
                        value: v,
                        threshold,
                    };
                }
            }
            Err(error) => return ZeroCheck::Inconclusive { point: p, error },
        }
    }
    ZeroCheck::Zero
}

// ---------------------------------------------------------------------------
// Rendering. `parse(render(e))` evaluates pointwise equal to `e`.
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(&self.chart, &self.node, 0, f)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Precedence levels: 0 sum, 1 product, 2 power operand, 3 atom.
fn node_prec(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 0,
        Node::Mul(..) | Node::Div(..) => 1,
        Node::Pow(..) => 2,
        Node::Neg(..) => 2,
        Node::Const(v) if *v < 0.0 => 2,
        _ => 3,
    }
}

fn render(chart: &ChartRef, n: &NodeRef, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = node_prec(n);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match &**n {
        Node::Const(v) => write!(f, "{v}")?,
        Node::Coord(i) => write!(f, "{}", chart.name(*i))?,
        Node::Add(a, b) => {
            render(chart, a, 0, f)?;
            write!(f, " + ")?;
            render(chart, b, 1, f)?;
        }
        Node::Sub(a, b) => {
            render(chart, a, 0, f)?;
            write!(f, " - ")?;
            render(chart, b, 1, f)?;
        }
        Node::Mul(a, b) => {
            render(chart, a, 1, f)?;
            write!(f, "*")?;
            render(chart, b, 2, f)?;
        }
        Node::Div(a, b) => {
            render(chart, a, 1, f)?;
            write!(f, "/")?;
            render(chart, b, 2, f)?;
        }
        Node::Pow(a, n) => {
            render(chart, a, 3, f)?;
            write!(f, "^{n}")?;
        }
        Node::Neg(a) => {
            write!(f, "-")?;
            render(chart, a, 3, f)?;
        }
        Node::Sin(a) => {
            write!(f, "sin(")?;
            render(chart, a, 0, f)?;
            write!(f, ")")?;
        }
        Node::Cos(a) => {
            write!(f, "cos(")?;
            render(chart, a, 0, f)?;
            write!(f, ")")?;
        }
        Node::Exp(a) => {
            write!(f, "exp(")?;
            render(chart, a, 0, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

// Operator sugar on references; each delegates to the checked constructors.
impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
