//! Compressed sparse row matrices, triplet assembly and linear solvers.

use std::sync::Mutex;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{Error, Result};

mod frontal;

/// Square or rectangular CSR matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Unsorted `(row, col, value)` entries; duplicates are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self)
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from triplets, summing duplicates. Explicit zeros are
    /// kept so the sparsity pattern depends only on which entries were pushed.
    pub fn from_triplets(t: &Triplets) -> Self {
        let n = t.nrows;
        let mut counts = vec![0usize; n + 1];
        for &r in &t.rows {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; t.len()];
        let mut next = counts.clone();
        for (k, &r) in t.rows.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..n {
            scratch.clear();
            scratch.extend(order[counts[r]..counts[r + 1]].iter().map(|&k| (t.cols[k], t.vals[k])));
            // Stable sort keeps the summation order of duplicates deterministic.
            scratch.sort_by_key(|e| e.0);
            let mut iter = scratch.iter();
            if let Some(&(c0, v0)) = iter.next() {
                let (mut c, mut v) = (c0, v0);
                for &(ci, vi) in iter {
                    if ci == c {
                        v += vi;
                    } else {
                        col_idx.push(c);
                        values.push(v);
                        c = ci;
                        v = vi;
                    }
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: n,
            ncols: t.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push(c, i, v);
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Largest absolute entry of `A - A^T`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, c)).abs());
            }
            let (cols, vals) = t.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(i, c)).abs());
            }
        }
        worst
    }

    /// Adds `scale * other` entrywise into a triplet list with a row/column offset.
    pub fn push_scaled(&self, scale: f64, row_off: usize, col_off: usize, out: &mut Triplets) {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push(row_off + i, col_off + c, scale * v);
            }
        }
    }

    /// Replaces row `i` by the unit row `e_i` (the diagonal entry must be in the pattern).
    pub fn set_identity_row(&mut self, i: usize) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        let mut found = false;
        for k in range {
            if self.col_idx[k] == i {
                self.values[k] = 1.0;
                found = true;
            } else {
                self.values[k] = 0.0;
            }
        }
        assert!(found, "row {i} has no diagonal entry in its pattern");
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

/// Union of the sparsity patterns of equally sized matrices. Returns the
/// pattern (values zero) and, per input, the position of each of its entries
/// in the union.
pub fn union_pattern(mats: &[&CsrMatrix]) -> (CsrMatrix, Vec<Vec<usize>>) {
    let (nrows, ncols) = (mats[0].nrows, mats[0].ncols);
    assert!(mats.iter().all(|m| m.nrows == nrows && m.ncols == ncols));
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    let mut scratch: Vec<usize> = Vec::new();
    for i in 0..nrows {
        scratch.clear();
        for m in mats {
            scratch.extend_from_slice(m.row(i).0);
        }
        scratch.sort_unstable();
        scratch.dedup();
        col_idx.extend_from_slice(&scratch);
        row_ptr.push(col_idx.len());
    }
    let positions = mats
        .iter()
        .map(|m| {
            let mut pos = Vec::with_capacity(m.nnz());
            for i in 0..nrows {
                let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                for c in m.row(i).0 {
                    let k = row.binary_search(c).expect("column in union");
                    pos.push(row_ptr[i] + k);
                }
            }
            pos
        })
        .collect();
    let nnz = col_idx.len();
    (
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        },
        positions,
    )
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for square sparse `A`.
pub trait LinearSolver: Send {
    fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>>;
}

/// Dense partial-pivoting LU; intended for small systems and tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseLu;

impl LinearSolver for DenseLu {
    fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if a.nrows != a.ncols || b.len() != a.nrows {
            return Err(Error::LinearSolver(format!(
                "dimension mismatch: {}x{} matrix, rhs {}",
                a.nrows,
                a.ncols,
                b.len()
            )));
        }
        let lu = a.to_dense().lu();
        let rhs = nalgebra::DVector::from_column_slice(b);
        lu.solve(&rhs)
            .map(|x| x.as_slice().to_vec())
            .ok_or_else(|| Error::LinearSolver("matrix is singular".into()))
    }
}

/// Sparse direct LU (faer). The symbolic analysis is reused while the
/// sparsity pattern stays the same.
#[derive(Default)]
pub struct SparseLu {
    cache: Mutex<Option<SymbolicCache>>,
}

struct SymbolicCache {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl SparseLu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LinearSolver for SparseLu {
    fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.nrows;
        if a.ncols != n || b.len() != n {
            return Err(Error::LinearSolver(format!(
                "dimension mismatch: {}x{} matrix, rhs {}",
                a.nrows,
                a.ncols,
                b.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        // The CSR arrays of A are exactly the CSC arrays of A^T.
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let mut guard = self.cache.lock().expect("solver cache poisoned");
        let reuse = guard
            .as_ref()
            .is_some_and(|c| c.row_ptr == a.row_ptr && c.col_idx == a.col_idx);
        if !reuse {
            let symbolic = SymbolicLu::try_new(pattern)
                .map_err(|e| Error::LinearSolver(format!("symbolic analysis failed: {e:?}")))?;
            *guard = Some(SymbolicCache {
                row_ptr: a.row_ptr.clone(),
                col_idx: a.col_idx.clone(),
                symbolic,
            });
        }
        let symbolic = guard.as_ref().expect("cache just filled").symbolic.clone();
        drop(guard);

        let at = SparseColMatRef::new(pattern, &a.values);
        let lu = Lu::try_new_with_symbolic(symbolic, at)
            .map_err(|e| Error::LinearSolver(format!("numeric factorization failed: {e:?}")))?;
        let mut x = b.to_vec();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver(
                "factorization produced non-finite values (singular matrix?)".into(),
            ));
        }
        Ok(x)
    }
}

/// Multifrontal LU on a symmetric minimum degree ordering, with iterative
/// refinement. Much less fill than [`SparseLu`] on the saddle-point systems
/// produced here; falls back to [`SparseLu`] when a pivot block is singular
/// or the refined residual stays large.
#[derive(Default)]
pub struct MultifrontalLu {
    analysis: Option<frontal::Analysis>,
    fallback: SparseLu,
    fallbacks: usize,
}

impl MultifrontalLu {
    const REFINEMENT_STEPS: usize = 3;
    const RESIDUAL_TOL: f64 = 1e-10;

    pub fn new() -> Self {
        Self::default()
    }

    /// Number of solves handed to the fallback LU so far.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Entries stored in the current factors, zero before the first solve.
    pub fn factor_nnz(&self) -> usize {
        self.analysis.as_ref().map_or(0, |a| a.factor_nnz())
    }

    fn try_solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if !self.analysis.as_ref().is_some_and(|an| an.matches(a)) {
            self.analysis = None;
            self.analysis = Some(frontal::Analysis::new(a)?);
        }
        let an = self.analysis.as_ref().expect("analysis just built");
        let par = faer::get_global_parallelism();
        let factors = an.factor(a, par)?;
        let mut x = an.solve(&factors, b, par);
        let b_norm = norm2(b);
        let mut r = vec![0.0; b.len()];
        for step in 0..=Self::REFINEMENT_STEPS {
            a.matvec_into(&x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let r_norm = norm2(&r);
            if !r_norm.is_finite() {
                break;
            }
            if r_norm <= Self::RESIDUAL_TOL * b_norm || r_norm == 0.0 {
                return Ok(x);
            }
            if step < Self::REFINEMENT_STEPS {
                let dx = an.solve(&factors, &r, par);
                x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            }
        }
        Err(Error::LinearSolver(
            "multifrontal: residual did not converge".into(),
        ))
    }
}

impl LinearSolver for MultifrontalLu {
    fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.nrows;
        if a.ncols != n || b.len() != n {
            return Err(Error::LinearSolver(format!(
                "dimension mismatch: {}x{} matrix, rhs {}",
                a.nrows,
                a.ncols,
                b.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        match self.try_solve(a, b) {
            Ok(x) => Ok(x),
            Err(e) => {
                log::debug!("{e}; using the fallback LU");
                self.fallbacks += 1;
                self.fallback.solve(a, b)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 4.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 2.0);
        t.push(1, 1, 5.0);
        t.push(1, 2, 1.0);
        t.push(2, 2, 3.0);
        t.push(2, 0, -1.0);
        t.push(1, 1, 1.0);
        t.to_csr()
    }

    #[test]
    fn duplicates_summed_and_sorted() {
        let a = sample();
        assert_eq!(a.nnz(), 7);
        assert_eq!(a.get(1, 1), 6.0);
        assert_eq!(a.row(2).0, &[0, 2]);
    }

    #[test]
    fn transpose_matvec_matches_dense() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        let d = a.to_dense();
        let y = a.matvec_transpose(&x);
        let yd = d.transpose() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sparse_and_dense_lu_agree() {
        let a = sample();
        let b = [1.0, 2.0, 3.0];
        let mut sparse = SparseLu::new();
        let xs = sparse.solve(&a, &b).unwrap();
        let xd = DenseLu.solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((xs[i] - xd[i]).abs() < 1e-13);
        }
        let r = a.matvec(&xs);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        // Second solve reuses the symbolic factorization.
        let xs2 = sparse.solve(&a, &[0.0, 1.0, 0.0]).unwrap();
        let r = a.matvec(&xs2);
        assert!((r[1] - 1.0).abs() < 1e-12 && r[0].abs() < 1e-12);
    }

    #[test]
    fn multifrontal_agrees_with_sparse_lu() {
        let a = sample();
        let b = [1.0, 2.0, 3.0];
        let mut mf = MultifrontalLu::new();
        let x = mf.solve(&a, &b).unwrap();
        let xs = SparseLu::new().solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - xs[i]).abs() < 1e-13);
        }
        assert_eq!(mf.fallbacks(), 0);
        assert!(mf.factor_nnz() >= a.nnz());
    }

    #[test]
    fn multifrontal_falls_back_on_zero_pivot() {
        // Zero diagonal in a 2x2 block that a symmetric ordering keeps apart.
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let a = t.to_csr();
        let mut mf = MultifrontalLu::new();
        let x = mf.solve(&a, &[2.0, 3.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_row_replacement() {
        let mut a = sample();
        a.set_identity_row(1);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.get(1, 1), 1.0);
    }
}
