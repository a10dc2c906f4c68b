//! Index-level stamping of linear matrix maps `X -> ...` into a sparse
//! Jacobian over row-major `vec(X)`.
//!
//! Each helper adds the coefficients of one term; the term's value at `X`
//! equals `J vec(X)` for the stamped entries.

use faer::Mat;

use crate::model::Operator;
use crate::sparse::TripletBuffer;

pub(crate) struct Stamper<'a> {
    n: usize,
    buf: &'a mut TripletBuffer,
}

impl<'a> Stamper<'a> {
    pub fn new(n: usize, buf: &'a mut TripletBuffer) -> Self {
        debug_assert_eq!(buf.dim(), n * n);
        Self { n, buf }
    }

    #[inline]
    fn p(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// `alpha * A X B`
    pub fn sandwich(&mut self, alpha: f64, a: &Operator, b: &Operator) {
        for i in 0..self.n {
            for &(m, aim) in a.row(i) {
                for k in 0..self.n {
                    for &(j, bkj) in b.row(k) {
                        let (r, c) = (self.p(i, j), self.p(m, k));
                        self.buf.push(r, c, alpha * aim * bkj);
                    }
                }
            }
        }
    }

    /// `alpha * A (H o (X B))`
    pub fn hadamard_sandwich(&mut self, alpha: f64, a: &Operator, h: &Mat<f64>, b: &Operator) {
        for i in 0..self.n {
            for &(m, aim) in a.row(i) {
                for k in 0..self.n {
                    for &(j, bkj) in b.row(k) {
                        let (r, c) = (self.p(i, j), self.p(m, k));
                        self.buf.push(r, c, alpha * aim * h[(m, j)] * bkj);
                    }
                }
            }
        }
    }

    /// `alpha * (X B)^T C`
    pub fn transpose_sandwich(&mut self, alpha: f64, b: &Operator, c: &Operator) {
        for k in 0..self.n {
            for &(j, ckj) in c.row(k) {
                for m in 0..self.n {
                    for &(i, bmi) in b.row(m) {
                        let (r, col) = (self.p(i, j), self.p(k, m));
                        self.buf.push(r, col, alpha * bmi * ckj);
                    }
                }
            }
        }
    }
}

/// Dense evaluation of the same terms, for residuals.
pub(crate) fn eval_sandwich(alpha: f64, a: &Operator, x: &Mat<f64>, b: &Operator) -> Mat<f64> {
    scale(alpha, a.apply_left(&b.apply_right(x)))
}

pub(crate) fn eval_hadamard_sandwich(alpha: f64, a: &Operator, h: &Mat<f64>, x: &Mat<f64>, b: &Operator) -> Mat<f64> {
    let xb = b.apply_right(x);
    let inner = Mat::from_fn(x.nrows(), x.ncols(), |i, j| h[(i, j)] * xb[(i, j)]);
    scale(alpha, a.apply_left(&inner))
}

pub(crate) fn eval_transpose_sandwich(alpha: f64, x: &Mat<f64>, b: &Operator, c: &Operator) -> Mat<f64> {
    let xbt = b.apply_right(x).transpose().to_owned();
    scale(alpha, c.apply_right(&xbt))
}

pub(crate) fn scale(alpha: f64, mut m: Mat<f64>) -> Mat<f64> {
    if alpha != 1.0 {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                m[(i, j)] *= alpha;
            }
        }
    }
    m
}
