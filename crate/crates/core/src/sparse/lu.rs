//! Multifrontal LU with threshold partial pivoting and delayed pivots.
//!
//! Fronts follow the assembly tree in postorder. Inside a front only fully
//! summed rows may be chosen as pivots; a column without an acceptable pivot
//! is passed to the parent together with the unused fully summed rows.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::solve_unit_lower_triangular_in_place;
use faer::{Accum, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use super::ordering::AssemblyTree;
use super::{norm_inf, Ordering, SparseMatrix};
use crate::error::{check_dim, Error, Result};

/// Relative pivot threshold.
const TAU: f64 = 0.01;
/// Panel width of the blocked front factorization.
const NB: usize = 48;
/// Pivots at or below this multiple of eps times the original column scale
/// count as zero.
const ZERO_PIVOT: f64 = 64.0 * f64::EPSILON;
const REFINE_STEPS: usize = 2;
/// Backward-error target of [`SparseLu::solve`].
pub const BACKWARD_ERROR_TOL: f64 = 1e-10;

/// Ordering and front structure for one sparsity pattern; reusable across
/// matrices with the same pattern.
#[derive(Clone, Debug)]
pub struct SymbolicLu {
    tree: AssemblyTree,
    parent: Vec<Option<usize>>,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl SymbolicLu {
    pub fn analyze(a: &SparseMatrix, ordering: &Ordering) -> Self {
        let tree = AssemblyTree::build(a, ordering);
        let mut parent = vec![None; tree.len()];
        for (t, kids) in tree.children.iter().enumerate() {
            for &c in kids {
                parent[c] = Some(t);
            }
        }
        let (rp, ci, _) = a.raw();
        Self {
            tree,
            parent,
            row_ptr: rp.to_vec(),
            col_idx: ci.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn fronts(&self) -> usize {
        self.tree.len()
    }

    /// True when `a` has exactly the analysed pattern.
    pub fn admits(&self, a: &SparseMatrix) -> bool {
        let (rp, ci, _) = a.raw();
        rp == self.row_ptr.as_slice() && ci == self.col_idx.as_slice()
    }
}

#[derive(Clone, Debug)]
struct FrontFactor {
    piv_rows: Vec<u32>,
    piv_cols: Vec<u32>,
    rest_rows: Vec<u32>,
    rest_cols: Vec<u32>,
    /// `nr x npiv`, column-major: unit-lower L11 over L21.
    l: Vec<f64>,
    /// `npiv x nc`, column-major: upper U11 beside U12.
    u: Vec<f64>,
}

impl FrontFactor {
    fn npiv(&self) -> usize {
        self.piv_rows.len()
    }
    fn nr(&self) -> usize {
        self.piv_rows.len() + self.rest_rows.len()
    }
}

struct ContributionBlock {
    rows: Vec<u32>,
    cols: Vec<u32>,
    data: Vec<f64>,
}

/// Factorization statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorStats {
    pub dim: usize,
    pub nnz_a: usize,
    /// Entries of L (strictly lower) plus U (upper, with diagonal).
    pub factor_entries: usize,
    /// `factor_entries - nnz_a`, floored at zero.
    pub fill_in: usize,
    pub fronts: usize,
    pub max_front_rows: usize,
    pub delayed_pivots: usize,
}

/// LU factors of a square sparse matrix. Immutable once built; safe to share
/// across threads.
#[derive(Clone, Debug)]
pub struct SparseLu {
    a: SparseMatrix,
    a_norm: f64,
    fronts: Vec<FrontFactor>,
    stats: FactorStats,
}

impl SparseLu {
    /// Analyses and factors `a` with the default graph ordering.
    pub fn factorize(a: &SparseMatrix) -> Result<Self> {
        Self::factorize_ordered(a, &Ordering::default())
    }

    pub fn factorize_ordered(a: &SparseMatrix, ordering: &Ordering) -> Result<Self> {
        let sym = SymbolicLu::analyze(a, ordering);
        Self::factorize_with(&sym, a)
    }

    /// Numeric factorization reusing an analysis; the pattern must match.
    pub fn factorize_with(sym: &SymbolicLu, a: &SparseMatrix) -> Result<Self> {
        if !sym.admits(a) {
            return Err(Error::Invalid("sparsity pattern differs from the analysed one".into()));
        }
        numeric(sym, a)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    /// Solves `A x = b`, refining iteratively until the backward error is
    /// below [`BACKWARD_ERROR_TOL`] (at most two refinement steps).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim("right-hand side", self.dim(), b.len())?;
        let mut x = self.solve_raw(b);
        for _ in 0..REFINE_STEPS {
            let ax = self.a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm_inf(&r) <= self.residual_bound(&x, b) {
                break;
            }
            let d = self.solve_raw(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite entries in the solution".into()));
        }
        Ok(x)
    }

    /// `||A x - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
    pub fn backward_error(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        let r = ax.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let den = self.a_norm * norm_inf(x) + norm_inf(b);
        if den == 0.0 {
            r
        } else {
            r / den
        }
    }

    fn residual_bound(&self, x: &[f64], b: &[f64]) -> f64 {
        BACKWARD_ERROR_TOL * (self.a_norm * norm_inf(x) + norm_inf(b))
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        let mut z = Vec::new();
        for f in &self.fronts {
            let (k, nr) = (f.npiv(), f.nr());
            if k == 0 {
                continue;
            }
            z.clear();
            z.extend(f.piv_rows.iter().map(|&r| y[r as usize]));
            for j in 0..k {
                let zj = z[j];
                if zj == 0.0 {
                    continue;
                }
                let col = &f.l[j * nr..(j + 1) * nr];
                for r in j + 1..k {
                    z[r] -= col[r] * zj;
                }
                for (r, &g) in f.rest_rows.iter().enumerate() {
                    y[g as usize] -= col[k + r] * zj;
                }
            }
            for (j, &r) in f.piv_rows.iter().enumerate() {
                y[r as usize] = z[j];
            }
        }
        let mut x = vec![0.0; n];
        for f in self.fronts.iter().rev() {
            let k = f.npiv();
            if k == 0 {
                continue;
            }
            z.clear();
            z.extend(f.piv_rows.iter().map(|&r| y[r as usize]));
            for (jj, &c) in f.rest_cols.iter().enumerate() {
                let xc = x[c as usize];
                if xc == 0.0 {
                    continue;
                }
                let col = &f.u[(k + jj) * k..(k + jj + 1) * k];
                for r in 0..k {
                    z[r] -= col[r] * xc;
                }
            }
            for j in (0..k).rev() {
                let col = &f.u[j * k..(j + 1) * k];
                z[j] /= col[j];
                let zj = z[j];
                for r in 0..j {
                    z[r] -= col[r] * zj;
                }
            }
            for (j, &c) in f.piv_cols.iter().enumerate() {
                x[c as usize] = z[j];
            }
        }
        x
    }
}

fn numeric(sym: &SymbolicLu, a: &SparseMatrix) -> Result<SparseLu> {
    let tree = &sym.tree;
    let n = a.dim();
    let at = a.transpose();
    let mut colmax = vec![0.0f64; n];
    for (c, cm) in colmax.iter_mut().enumerate() {
        *cm = at.row(c).fold(0.0, |m, (_, v)| m.max(v.abs()));
    }
    let mut row_pos = vec![usize::MAX; n];
    let mut col_pos = vec![usize::MAX; n];
    let mut stack: Vec<ContributionBlock> = Vec::new();
    let mut fronts = Vec::with_capacity(tree.len());
    let mut stats = FactorStats {
        dim: n,
        nnz_a: a.nnz(),
        fronts: tree.len(),
        ..Default::default()
    };
    let mut eliminated = 0usize;

    for t in 0..tree.len() {
        let kids = tree.children[t].len();
        let cbs = stack.split_off(stack.len() - kids);
        let in_subtree = |v: usize| {
            let o = tree.owner[v];
            o >= tree.first[t] && o <= t
        };
        let mut rows: Vec<usize> = tree.vars[t].clone();
        let mut cols: Vec<usize> = tree.vars[t].clone();
        for cb in &cbs {
            rows.extend(
                cb.rows
                    .iter()
                    .map(|&r| r as usize)
                    .filter(|&r| in_subtree(r) && tree.owner[r] != t),
            );
            cols.extend(
                cb.cols
                    .iter()
                    .map(|&c| c as usize)
                    .filter(|&c| in_subtree(c) && tree.owner[c] != t),
            );
        }
        let k = cols.len();
        debug_assert_eq!(rows.len(), k);
        rows.extend_from_slice(&tree.structure[t]);
        cols.extend_from_slice(&tree.structure[t]);
        let (nr, nc) = (rows.len(), cols.len());
        stats.max_front_rows = stats.max_front_rows.max(nr);
        for (i, &r) in rows.iter().enumerate() {
            row_pos[r] = i;
        }
        for (j, &c) in cols.iter().enumerate() {
            col_pos[c] = j;
        }

        let mut data = vec![0.0f64; nr * nc];
        for &v in &tree.vars[t] {
            let cv = col_pos[v] * nr;
            for (r, val) in at.row(v) {
                if tree.owner[r] >= t {
                    data[cv + row_pos[r]] += val;
                }
            }
            let rv = row_pos[v];
            for (c, val) in a.row(v) {
                if tree.owner[c] > t {
                    data[col_pos[c] * nr + rv] += val;
                }
            }
        }
        for cb in &cbs {
            let cr = cb.rows.len();
            let local: Vec<usize> = cb.rows.iter().map(|&r| row_pos[r as usize]).collect();
            for (jj, &c) in cb.cols.iter().enumerate() {
                let dst = col_pos[c as usize] * nr;
                let src = &cb.data[jj * cr..(jj + 1) * cr];
                for (ii, &lr) in local.iter().enumerate() {
                    data[dst + lr] += src[ii];
                }
            }
        }
        drop(cbs);
        for &r in &rows {
            row_pos[r] = usize::MAX;
        }
        for &c in &cols {
            col_pos[c] = usize::MAX;
        }

        let npiv = factor_front(&mut data, nr, nc, k, &mut rows, &mut cols, &colmax);
        if sym.parent[t].is_none() && npiv < k {
            return Err(Error::Singular {
                pivot: eliminated + npiv,
            });
        }
        eliminated += npiv;
        if sym.parent[t].is_some() {
            stats.delayed_pivots += k - npiv;
        }
        stats.factor_entries += npiv * (nr + nc - npiv);

        let l = data[..npiv * nr].to_vec();
        let mut u = vec![0.0; npiv * nc];
        for c in 0..nc {
            u[c * npiv..(c + 1) * npiv].copy_from_slice(&data[c * nr..c * nr + npiv]);
        }
        let (cr, cc) = (nr - npiv, nc - npiv);
        if sym.parent[t].is_some() {
            let mut cb = vec![0.0; cr * cc];
            for c in 0..cc {
                let src = (npiv + c) * nr + npiv;
                cb[c * cr..(c + 1) * cr].copy_from_slice(&data[src..src + cr]);
            }
            stack.push(ContributionBlock {
                rows: rows[npiv..].iter().map(|&r| r as u32).collect(),
                cols: cols[npiv..].iter().map(|&c| c as u32).collect(),
                data: cb,
            });
        }
        fronts.push(FrontFactor {
            piv_rows: rows[..npiv].iter().map(|&r| r as u32).collect(),
            piv_cols: cols[..npiv].iter().map(|&c| c as u32).collect(),
            rest_rows: rows[npiv..].iter().map(|&r| r as u32).collect(),
            rest_cols: cols[npiv..].iter().map(|&c| c as u32).collect(),
            l,
            u,
        });
    }
    if eliminated != n {
        return Err(Error::Singular { pivot: eliminated });
    }
    stats.fill_in = stats.factor_entries.saturating_sub(stats.nnz_a);
    Ok(SparseLu {
        a_norm: a.norm_inf(),
        a: a.clone(),
        fronts,
        stats,
    })
}

fn swap_rows(data: &mut [f64], nr: usize, nc: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    for c in 0..nc {
        data.swap(c * nr + a, c * nr + b);
    }
}

fn swap_cols(data: &mut [f64], nr: usize, a: usize, b: usize) {
    if a == b {
        return;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let (left, right) = data.split_at_mut(hi * nr);
    left[lo * nr..(lo + 1) * nr].swap_with_slice(&mut right[..nr]);
}

/// Partially factors a dense front whose first `k` rows and columns are fully
/// summed. Returns the number of pivots taken; they occupy the leading rows
/// and columns, and `rows`/`cols` are permuted alongside.
fn factor_front(
    data: &mut [f64],
    nr: usize,
    nc: usize,
    k: usize,
    rows: &mut [usize],
    cols: &mut [usize],
    colmax: &[f64],
) -> usize {
    let mut npiv = 0;
    let mut cand_end = k;
    loop {
        let sweep_start = npiv;
        while npiv < cand_end {
            let p0 = npiv;
            let pe = (p0 + NB).min(cand_end);
            let mut ce = pe;
            while npiv < ce {
                let j = npiv;
                let col = &data[j * nr..(j + 1) * nr];
                let (mut pr, mut fs_max) = (npiv, 0.0f64);
                for (r, v) in col.iter().enumerate().take(k).skip(npiv) {
                    if v.abs() > fs_max {
                        fs_max = v.abs();
                        pr = r;
                    }
                }
                let all_max = col[k..].iter().fold(fs_max, |m, v| m.max(v.abs()));
                let floor = ZERO_PIVOT * colmax[cols[j]];
                let ok = fs_max.is_finite() && all_max.is_finite() && fs_max > floor && fs_max >= TAU * all_max;
                if !ok {
                    ce -= 1;
                    swap_cols(data, nr, j, ce);
                    cols.swap(j, ce);
                    continue;
                }
                swap_rows(data, nr, nc, npiv, pr);
                rows.swap(npiv, pr);
                let (head, tail) = data.split_at_mut((j + 1) * nr);
                let lcol = &mut head[j * nr..];
                let inv = 1.0 / lcol[npiv];
                for v in &mut lcol[npiv + 1..] {
                    *v *= inv;
                }
                let lcol = &lcol[..];
                for c in j + 1..pe {
                    let off = (c - j - 1) * nr;
                    let ccol = &mut tail[off..off + nr];
                    let u = ccol[npiv];
                    if u != 0.0 {
                        for (x, l) in ccol[npiv + 1..].iter_mut().zip(&lcol[npiv + 1..]) {
                            *x -= l * u;
                        }
                    }
                }
                npiv += 1;
            }
            let w = npiv - p0;
            if w > 0 && pe < nc {
                let (left, right) = data.split_at_mut(pe * nr);
                let l11 = MatRef::from_column_major_slice_with_stride(&left[p0 * nr + p0..], w, w, nr);
                let l21 = MatRef::from_column_major_slice_with_stride(&left[p0 * nr + npiv..], nr - npiv, w, nr);
                let trailing = MatMut::from_column_major_slice_with_stride_mut(&mut right[p0..], nr - p0, nc - pe, nr);
                let (mut u12, a22) = trailing.split_at_row_mut(w);
                solve_unit_lower_triangular_in_place(l11, u12.as_mut(), Par::Seq);
                if nr > npiv {
                    matmul(a22, Accum::Add, l21, u12.as_ref(), -1.0, Par::Seq);
                }
            }
            let f = pe - npiv;
            if f > 0 {
                data[npiv * nr..cand_end * nr].rotate_left(f * nr);
                cols[npiv..cand_end].rotate_left(f);
                cand_end -= f;
            }
        }
        if npiv == sweep_start || cand_end == k {
            break;
        }
        cand_end = k;
    }
    npiv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::GridLayout;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_grid(h: usize, w: usize, seed: u64, diag: f64) -> SparseMatrix {
        let mut s = seed;
        let mut t = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                t.push((p, p, diag * lcg(&mut s)));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if (dr, dc) != (0, 0) && rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                            t.push((p, rr as usize * w + cc as usize, lcg(&mut s)));
                        }
                    }
                }
            }
        }
        SparseMatrix::from_triplets(h * w, &t).unwrap()
    }

    fn check_solve(a: &SparseMatrix, ordering: &Ordering) -> FactorStats {
        let lu = SparseLu::factorize_ordered(a, ordering).unwrap();
        let mut s = 99;
        let b: Vec<f64> = (0..a.dim()).map(|_| lcg(&mut s)).collect();
        let x = lu.solve(&b).unwrap();
        assert!(
            lu.backward_error(&x, &b) <= BACKWARD_ERROR_TOL,
            "{}",
            lu.backward_error(&x, &b)
        );
        lu.stats()
    }

    #[test]
    fn solves_unsymmetric_grid_systems() {
        for (seed, diag) in [(1, 10.0), (2, 1.0), (3, 0.1)] {
            let a = random_grid(23, 17, seed, diag);
            check_solve(&a, &Ordering::NestedDissection);
            check_solve(&a, &Ordering::Dense);
            check_solve(
                &a,
                &Ordering::Grid(GridLayout {
                    rows: 23,
                    cols: 17,
                    deferred: vec![],
                }),
            );
        }
    }

    #[test]
    fn zero_diagonal_needs_delayed_pivots() {
        // permuting rows of a well-posed system leaves structural zeros on
        // the diagonal that only pivoting across fronts can handle
        let base = random_grid(15, 15, 7, 10.0);
        let n = base.dim();
        let t: Vec<_> = base.triplets().map(|(r, c, v)| (n - 1 - r, c, v)).collect();
        let a = SparseMatrix::from_triplets(n, &t).unwrap();
        let stats = check_solve(&a, &Ordering::NestedDissection);
        assert!(stats.delayed_pivots > 0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t: Vec<_> = random_grid(10, 10, 4, 10.0).triplets().collect();
        t.retain(|&(r, _, _)| r != 37);
        let a = SparseMatrix::from_triplets(100, &t).unwrap();
        match SparseLu::factorize(&a) {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected singular error, got {other:?}"),
        }
        let z = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(SparseLu::factorize(&z), Err(Error::Singular { .. })));
    }

    #[test]
    fn stats_count_factor_entries() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]).unwrap();
        let lu = SparseLu::factorize(&a).unwrap();
        assert_eq!(lu.stats().factor_entries, 4);
        assert_eq!(lu.stats().fill_in, 0);
        let x = lu.solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn symbolic_reuse_and_pattern_check() {
        let a = random_grid(12, 12, 5, 10.0);
        let sym = SymbolicLu::analyze(&a, &Ordering::NestedDissection);
        let t: Vec<_> = a.triplets().map(|(r, c, v)| (r, c, v * 1.5)).collect();
        let b = SparseMatrix::from_triplets(144, &t).unwrap();
        assert!(SparseLu::factorize_with(&sym, &b).is_ok());
        let c = random_grid(12, 11, 5, 10.0);
        assert!(SparseLu::factorize_with(&sym, &c).is_err());
    }

    #[test]
    fn factors_are_shareable() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<SparseLu>();
    }
}
