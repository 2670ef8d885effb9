//! Multifrontal LU with a symmetric fill-reducing ordering.
//!
//! The elimination structure is the supernodal Cholesky pattern of `A + A^T`
//! under an approximate minimum degree ordering. Each supernode is factored
//! densely with partial pivoting restricted to its fully summed rows, so the
//! sparsity structure never changes. Tiny pivots are rejected and reported as
//! errors; callers fall back to a general sparse LU.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::factor::{lu_in_place, lu_in_place_scratch};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_unit_lower_triangular_in_place,
    solve_upper_triangular_in_place,
};
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::SymbolicSparseColMatRef;
use faer::{Accum, Mat, Par, Side};

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Pattern-dependent part of the factorization.
pub(crate) struct Analysis {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    begin: Vec<usize>,
    end: Vec<usize>,
    /// Off-diagonal rows of each supernode, permuted numbering, ascending.
    rows: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Positions of a supernode's rows inside its parent's front.
    relmap: Vec<Vec<u32>>,
    /// Entries of `A` scattered into each front: `(value index, row, col)`.
    assembly: Vec<Vec<(u32, u32, u32)>>,
}

struct Supernode {
    /// Row permutation of the pivot block: local row `i` is input row `piv[i]`.
    piv: Vec<usize>,
    /// `[L11; L21]`, with unit diagonal implied, and `U11` in its upper part.
    l: Mat<f64>,
    u12: Mat<f64>,
}

pub(crate) struct Factors {
    nodes: Vec<Supernode>,
}

impl Analysis {
    pub(crate) fn matches(&self, a: &CsrMatrix) -> bool {
        self.row_ptr == a.row_ptr && self.col_idx == a.col_idx
    }

    pub(crate) fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows;
        let fail = |msg: String| Error::LinearSolver(format!("multifrontal analysis: {msg}"));

        // Upper triangle of the symmetrized pattern, column major.
        let mut upper: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                upper[hi].push(lo);
            }
            upper[i].push(i);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut upper {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        drop(upper);
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let symbolic =
            factorize_symbolic_cholesky(pattern, Side::Upper, SymmetricOrdering::Amd, params)
                .map_err(|e| fail(format!("{e:?}")))?;
        let perm = match symbolic.perm() {
            Some(p) => p.arrays().0.to_vec(),
            None => (0..n).collect(),
        };
        let SymbolicCholeskyRaw::Supernodal(sn) = symbolic.raw() else {
            return Err(fail("expected a supernodal structure".into()));
        };
        let ns = sn.n_supernodes();
        let begin = sn.supernode_begin().to_vec();
        let end = sn.supernode_end().to_vec();
        let ptr = sn.col_ptr_for_row_idx();
        let rows: Vec<Vec<usize>> =
            (0..ns).map(|s| sn.row_idx()[ptr[s]..ptr[s + 1]].to_vec()).collect();
        drop(row_idx);
        drop(col_ptr);

        let mut owner = vec![0usize; n];
        for s in 0..ns {
            owner[begin[s]..end[s]].fill(s);
        }
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let local = |s: usize, k: usize| -> Option<u32> {
            if (begin[s]..end[s]).contains(&k) {
                Some((k - begin[s]) as u32)
            } else {
                rows[s]
                    .binary_search(&k)
                    .ok()
                    .map(|p| (end[s] - begin[s] + p) as u32)
            }
        };

        let mut children = vec![Vec::new(); ns];
        let mut relmap = vec![Vec::new(); ns];
        for s in 0..ns {
            let Some(&first) = rows[s].first() else {
                continue;
            };
            let p = owner[first];
            children[p].push(s);
            relmap[s] = rows[s]
                .iter()
                .map(|&k| local(p, k).ok_or_else(|| fail("inconsistent elimination tree".into())))
                .collect::<Result<_>>()?;
        }

        let mut assembly = vec![Vec::new(); ns];
        for i_old in 0..n {
            for idx in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                let (i, j) = (iperm[i_old], iperm[a.col_idx[idx]]);
                let s = owner[i.min(j)];
                match (local(s, i), local(s, j)) {
                    (Some(r), Some(c)) => assembly[s].push((idx as u32, r, c)),
                    _ => return Err(fail("entry outside the symbolic pattern".into())),
                }
            }
        }
        if a.nnz() > u32::MAX as usize {
            return Err(fail("too many nonzeros".into()));
        }

        Ok(Self {
            n,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            perm,
            begin,
            end,
            rows,
            children,
            relmap,
            assembly,
        })
    }

    /// Stored entries of `L` and `U`, counting the pivot blocks once each.
    pub(crate) fn factor_nnz(&self) -> usize {
        (0..self.begin.len())
            .map(|s| {
                let nc = self.end[s] - self.begin[s];
                let nr = self.rows[s].len();
                nc * nc + 2 * nc * nr
            })
            .sum()
    }

    pub(crate) fn factor(&self, a: &CsrMatrix, par: Par) -> Result<Factors> {
        let ns = self.begin.len();
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut updates: Vec<Option<Mat<f64>>> = (0..ns).map(|_| None).collect();
        let mut nodes = Vec::with_capacity(ns);
        for s in 0..ns {
            let nc = self.end[s] - self.begin[s];
            let nr = self.rows[s].len();
            let m = nc + nr;
            let mut front = Mat::<f64>::zeros(m, m);
            for &(v, r, c) in &self.assembly[s] {
                front[(r as usize, c as usize)] += a.values[v as usize];
            }
            for &child in &self.children[s] {
                let upd = updates[child].take().expect("child factored first");
                let map = &self.relmap[child];
                for (jj, &cj) in map.iter().enumerate() {
                    let src = upd.col_as_slice(jj);
                    let dst = front.col_as_slice_mut(cj as usize);
                    for (ii, &ri) in map.iter().enumerate() {
                        dst[ri as usize] += src[ii];
                    }
                }
            }

            let mut perm = vec![0usize; nc];
            let mut perm_inv = vec![0usize; nc];
            {
                let (f11, mut f12, mut f21, mut f22) = front.as_mut().split_at_mut(nc, nc);
                let mut f11 = f11;
                let mut buf = MemBuffer::new(lu_in_place_scratch::<usize, f64>(
                    nc,
                    nc,
                    par,
                    Default::default(),
                ));
                lu_in_place(
                    f11.as_mut(),
                    &mut perm,
                    &mut perm_inv,
                    par,
                    MemStack::new(&mut buf),
                    Default::default(),
                );
                for k in 0..nc {
                    let d = f11[(k, k)];
                    if !(d.abs() > tiny) {
                        return Err(Error::LinearSolver(format!(
                            "multifrontal: pivot {d:e} below tolerance"
                        )));
                    }
                }
                if nr > 0 {
                    // Rows of F12 follow the pivot order of the diagonal block.
                    let orig = f12.to_owned();
                    for (i, &p) in perm.iter().enumerate() {
                        f12.as_mut().row_mut(i).copy_from(orig.row(p));
                    }
                    solve_unit_lower_triangular_in_place(f11.as_ref(), f12.as_mut(), par);
                    solve_lower_triangular_in_place(
                        f11.as_ref().transpose(),
                        f21.as_mut().transpose_mut(),
                        par,
                    );
                    matmul(f22.as_mut(), Accum::Add, f21.as_ref(), f12.as_ref(), -1.0, par);
                }
            }
            if nr > 0 {
                updates[s] = Some(front.submatrix(nc, nc, nr, nr).to_owned());
            }
            nodes.push(Supernode {
                piv: perm,
                l: front.submatrix(0, 0, m, nc).to_owned(),
                u12: front.submatrix(0, nc, nc, nr).to_owned(),
            });
        }
        Ok(Factors { nodes })
    }

    pub(crate) fn solve(&self, f: &Factors, b: &[f64], par: Par) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for (s, node) in f.nodes.iter().enumerate() {
            let (b0, e0) = (self.begin[s], self.end[s]);
            let nc = e0 - b0;
            let mut seg = Mat::from_fn(nc, 1, |i, _| y[b0 + node.piv[i]]);
            let l11 = node.l.submatrix(0, 0, nc, nc);
            solve_unit_lower_triangular_in_place(l11, seg.as_mut(), par);
            y[b0..e0].copy_from_slice(seg.col_as_slice(0));
            for j in 0..nc {
                let xj = seg[(j, 0)];
                if xj == 0.0 {
                    continue;
                }
                let col = &node.l.col_as_slice(j)[nc..];
                for (t, &r) in self.rows[s].iter().enumerate() {
                    y[r] -= col[t] * xj;
                }
            }
        }
        for (s, node) in f.nodes.iter().enumerate().rev() {
            let (b0, e0) = (self.begin[s], self.end[s]);
            let nc = e0 - b0;
            let mut seg = Mat::from_fn(nc, 1, |i, _| y[b0 + i]);
            for (t, &r) in self.rows[s].iter().enumerate() {
                let xr = y[r];
                if xr == 0.0 {
                    continue;
                }
                let col = node.u12.col_as_slice(t);
                for i in 0..nc {
                    seg[(i, 0)] -= col[i] * xr;
                }
            }
            let u11 = node.l.submatrix(0, 0, nc, nc);
            solve_upper_triangular_in_place(u11, seg.as_mut(), par);
            y[b0..e0].copy_from_slice(seg.col_as_slice(0));
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::super::{DenseLu, LinearSolver, Triplets};
    use super::*;

    fn random_sparse(n: usize, seed: u64, zero_diag: &[usize]) -> CsrMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            if !zero_diag.contains(&i) {
                t.push(i, i, 4.0 + next());
            }
            for _ in 0..3 {
                let j = (next() * n as f64) as usize % n;
                if j != i {
                    t.push(i, j, next() - 0.5);
                    // Saddle-like coupling for the rows without a diagonal.
                    if zero_diag.contains(&i) {
                        t.push(j, i, next() + 0.5);
                    }
                }
            }
        }
        t.to_csr()
    }

    #[test]
    fn matches_dense_solution() {
        let a = random_sparse(120, 7, &[]);
        let b: Vec<f64> = (0..120).map(|i| (i as f64).sin()).collect();
        let an = Analysis::new(&a).unwrap();
        let f = an.factor(&a, Par::Seq).unwrap();
        let x = an.solve(&f, &b, Par::Seq);
        let xd = DenseLu.solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn pivots_inside_supernodes() {
        // Zero diagonal entries require row exchanges in the pivot blocks.
        let zero: Vec<usize> = (0..60).step_by(5).collect();
        let a = random_sparse(60, 3, &zero);
        let b = vec![1.0; 60];
        let an = Analysis::new(&a).unwrap();
        match an.factor(&a, Par::Seq) {
            Ok(f) => {
                let x = an.solve(&f, &b, Par::Seq);
                let r = a.matvec(&x);
                for (ri, bi) in r.iter().zip(&b) {
                    assert!((ri - bi).abs() < 1e-9);
                }
            }
            Err(e) => assert!(e.to_string().contains("pivot")),
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut t = Triplets::new(3, 3);
        t.push(0, 0, 1.0);
        t.push(1, 1, 1.0);
        t.push(0, 1, 2.0);
        t.push(2, 1, 1.0);
        let a = t.to_csr();
        let an = Analysis::new(&a).unwrap();
        assert!(an.factor(&a, Par::Seq).is_err());
    }
}
