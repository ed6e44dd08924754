//! Small dense arrays of expressions, indexed the way the coefficient
//! fields are written: `a3.get([c, mu, a])` reads as the component with
//! upper index `c` and lower pair `mu a`.

use crate::expr::{ChartRef, Expr};

/// Dense row-major array of expressions with a runtime shape.
#[derive(Clone, Debug)]
pub struct ExprArray {
    shape: Vec<usize>,
    data: Vec<Expr>,
}

impl ExprArray {
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> Expr) -> ExprArray {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for axis in (0..shape.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        ExprArray {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn zeros(chart: &ChartRef, shape: &[usize]) -> ExprArray {
        ExprArray::from_fn(shape, |_| Expr::zero(chart))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (axis, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[axis], "index out of bounds");
            off = off * self.shape[axis] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], e: Expr) {
        let off = self.offset(idx);
        self.data[off] = e;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Expr> {
        self.data.iter()
    }

    pub fn components(&self) -> &[Expr] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> ExprArray {
        ExprArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Dense row-major array of sampled values, mirroring [`ExprArray`].
#[derive(Clone, Debug)]
pub struct NumArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl NumArray {
    pub fn zeros(shape: &[usize]) -> NumArray {
        NumArray {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (axis, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[axis], "index out of bounds");
            off = off * self.shape[axis] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Closure builders in the shape the formulas are written.
pub fn arr1(n0: usize, mut f: impl FnMut(usize) -> Expr) -> ExprArray {
    ExprArray::from_fn(&[n0], |i| f(i[0]))
}

pub fn arr2(n0: usize, n1: usize, mut f: impl FnMut(usize, usize) -> Expr) -> ExprArray {
    ExprArray::from_fn(&[n0, n1], |i| f(i[0], i[1]))
}

pub fn arr3(
    n0: usize,
    n1: usize,
    n2: usize,
    mut f: impl FnMut(usize, usize, usize) -> Expr,
) -> ExprArray {
    ExprArray::from_fn(&[n0, n1, n2], |i| f(i[0], i[1], i[2]))
}

pub fn arr4(
    n0: usize,
    n1: usize,
    n2: usize,
    n3: usize,
    mut f: impl FnMut(usize, usize, usize, usize) -> Expr,
) -> ExprArray {
    ExprArray::from_fn(&[n0, n1, n2, n3], |i| f(i[0], i[1], i[2], i[3]))
}

/// Balanced sum over one summation index.
pub fn sum_over(chart: &ChartRef, n: usize, f: impl FnMut(usize) -> Expr) -> Expr {
    Expr::sum(chart, (0..n).map(f))
}

/// Balanced sum over two summation indices.
pub fn sum_over2(
    chart: &ChartRef,
    n0: usize,
    n1: usize,
    mut f: impl FnMut(usize, usize) -> Expr,
) -> Expr {
    Expr::sum(
        chart,
        (0..n0)
            .flat_map(|i| (0..n1).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j)),
    )
}
