//! Crossbar description and the small structured operators the residual
//! equations are written in.
//!
//! Field matrices (node voltages) are `n x n` and are flattened row-major:
//! cell `(i, j)` maps to unknown `i * n + j`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// The three crossbar circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Inv,
    Egv,
    Mvm,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 3] = [CircuitKind::Inv, CircuitKind::Egv, CircuitKind::Mvm];

    pub fn label(self) -> &'static str {
        match self {
            Self::Inv => "inv",
            Self::Egv => "egv",
            Self::Mvm => "mvm",
        }
    }
}

impl std::fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for CircuitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inv" => Ok(Self::Inv),
            "egv" => Ok(Self::Egv),
            "mvm" => Ok(Self::Mvm),
            _ => Err(Error::Invalid(format!(
                "unknown circuit '{s}' (expected inv, egv or mvm)"
            ))),
        }
    }
}

/// An `n x n` memristor crossbar with uniform row (`g1`) and column (`g2`)
/// wire-segment conductances.
#[derive(Clone, Debug)]
pub struct CrossbarModel {
    g: Mat<f64>,
    g1: f64,
    g2: f64,
}

impl CrossbarModel {
    /// Builds a model from a conductance matrix (siemens) and the wire-segment
    /// conductances. Every cell must be strictly positive.
    pub fn new(g: Mat<f64>, g1: f64, g2: f64) -> Result<Self> {
        let n = g.nrows();
        check_dim("conductance matrix columns", n, g.ncols())?;
        if n < 2 {
            return Err(Error::Invalid(format!("crossbar size must be at least 2, got {n}")));
        }
        for (name, w) in [("g1", g1), ("g2", g2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive and finite, got {w}")));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = g[(i, j)];
                if v == 0.0 {
                    return Err(Error::ZeroConductance { row: i, col: j });
                }
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Invalid(format!("conductance at ({i}, {j}) is {v}")));
                }
            }
        }
        Ok(Self { g, g1, g2 })
    }

    /// Same wire resistance (ohms) on rows and columns.
    pub fn with_wire_resistance(g: Mat<f64>, r_ohm: f64) -> Result<Self> {
        Self::with_wire_resistances(g, r_ohm, r_ohm)
    }

    pub fn with_wire_resistances(g: Mat<f64>, r1_ohm: f64, r2_ohm: f64) -> Result<Self> {
        Self::new(g, 1.0 / r1_ohm, 1.0 / r2_ohm)
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &Mat<f64> {
        &self.g
    }

    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    /// Copy of the model with the conductance matrix transposed and the wire
    /// roles swapped.
    pub fn transposed(&self) -> Self {
        Self {
            g: self.g.transpose().to_owned(),
            g1: self.g2,
            g2: self.g1,
        }
    }
}

/// Row-major flattening between `n x n` fields and length-`n^2` vectors.
pub struct RowMajor;

impl RowMajor {
    #[inline]
    pub fn index(i: usize, j: usize, n: usize) -> usize {
        i * n + j
    }

    pub fn vec(x: &Mat<f64>) -> Vec<f64> {
        let (r, c) = (x.nrows(), x.ncols());
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(x[(i, j)]);
            }
        }
        out
    }

    pub fn reshape(v: &[f64], n: usize) -> Result<Mat<f64>> {
        check_dim("reshape length", n * n, v.len())?;
        Ok(Mat::from_fn(n, n, |i, j| v[i * n + j]))
    }
}

/// Square matrix with few entries per row, stored as sorted row lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Operator {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let entries = values.iter().enumerate().map(|(i, &v)| (i, i, v));
        Self::from_entries(values.len(), entries)
    }

    /// Duplicates are summed; zeros are dropped.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut op = Self::zeros(n);
        for (i, j, v) in entries {
            assert!(i < n && j < n, "operator entry ({i}, {j}) out of range for n = {n}");
            op.rows[i].push((j, v));
        }
        for row in &mut op.rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *row = merged;
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_entries(self.n, self.entries().map(|(i, j, v)| (j, i, v)))
    }

    /// `self * rhs`.
    pub fn compose(&self, rhs: &Operator) -> Self {
        assert_eq!(self.n, rhs.n, "operator dimensions differ");
        let mut entries = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &rhs.rows[k] {
                    entries.push((i, j, a * b));
                }
            }
        }
        Self::from_entries(self.n, entries)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_entries(self.n, self.entries().map(|(i, j, v)| (i, j, alpha * v)))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// `self * x`.
    pub fn apply_left(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = Mat::zeros(self.n, x.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for j in 0..x.ncols() {
                    out[(i, j)] += a * x[(k, j)];
                }
            }
        }
        out
    }

    /// `x * self`.
    pub fn apply_right(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.ncols(), self.n);
        let mut out = Mat::zeros(x.nrows(), self.n);
        for r in 0..x.nrows() {
            for (k, row) in self.rows.iter().enumerate() {
                let xk = x[(r, k)];
                if xk == 0.0 {
                    continue;
                }
                for &(j, b) in row {
                    out[(r, j)] += xk * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }
}

fn tridiagonal(n: usize, diag: impl Fn(usize) -> f64) -> Result<Operator> {
    if n < 1 {
        return Err(Error::Invalid("operator size must be at least 1".into()));
    }
    let mut entries = Vec::with_capacity(3 * n);
    for i in 0..n {
        entries.push((i, i, diag(i)));
        if i > 0 {
            entries.push((i, i - 1, -1.0));
        }
        if i + 1 < n {
            entries.push((i, i + 1, -1.0));
        }
    }
    Ok(Operator::from_entries(n, entries))
}

/// Tridiagonal difference operator with diagonal `(1, 2, ..., 2)`.
pub fn build_d(n: usize) -> Result<Operator> {
    tridiagonal(n, |i| if i == 0 { 1.0 } else { 2.0 })
}

/// Tridiagonal difference operator with diagonal `(2, ..., 2, 1)`.
pub fn build_d1(n: usize) -> Result<Operator> {
    tridiagonal(n, |i| if i + 1 == n { 1.0 } else { 2.0 })
}

/// Boundary selectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Selectors {
    /// `diag(1, ..., 1, 0)`
    pub m1: Operator,
    /// `diag(0, ..., 0, 1)`
    pub m2: Operator,
    /// single one at `(n-1, 0)`
    pub m3: Operator,
    /// `diag(0, 1, ..., 1)`
    pub m4: Operator,
    /// `diag(0, ..., 0, 1)`
    pub m5: Operator,
}

pub fn build_selectors(n: usize) -> Result<Selectors> {
    if n < 2 {
        return Err(Error::Invalid(format!("selectors need n >= 2, got {n}")));
    }
    let last = |v: f64| (0..n).map(move |i| if i + 1 == n { v } else { 1.0 - v });
    let m1 = Operator::diagonal(&last(0.0).collect::<Vec<_>>());
    let m2 = Operator::diagonal(&last(1.0).collect::<Vec<_>>());
    let m3 = Operator::from_entries(n, [(n - 1, 0, 1.0)]);
    let m4 = Operator::diagonal(&(0..n).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect::<Vec<_>>());
    let m5 = m2.clone();
    Ok(Selectors { m1, m2, m3, m4, m5 })
}

/// Every operator the three circuits use, for one size.
#[derive(Clone, Debug)]
pub struct StructuredOperators {
    pub n: usize,
    pub d: Operator,
    pub d1: Operator,
    pub sel: Selectors,
}

impl StructuredOperators {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            n,
            d: build_d(n)?,
            d1: build_d1(n)?,
            sel: build_selectors(n)?,
        })
    }
}
