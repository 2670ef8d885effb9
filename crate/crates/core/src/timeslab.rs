//! Discontinuous Galerkin time stepping on Gauss–Radau nodes.
//!
//! On the slab `I_n = (t_{n−1}, t_n]` the solution is `u(t) = Σ_l χ_l(t̂) U_l`
//! with `t = t_{n−1} + τ t̂` and the nodal basis `χ_l(t̂_μ) = δ_lμ` on the right
//! Radau nodes. The slab residual for test index `j` is
//!
//! `Σ_μ w_μ χ_j(μ) [M_μ Σ_l χ'_l(μ) U_l + τ S_μ(u_μ)] + χ_j(0) M_0 (u(t_{n−1}^+) − U_prev)`
//!
//! where `μ` runs over temporal Gauss points, `M` is the velocity mass matrix
//! on the fluid domain at that time and `S` the spatial residual.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{union_pattern, CsrMatrix, LinearSolver};
use crate::quadrature::{gauss_1d, gauss_radau_right_1d, Rule1D};
use crate::solver::{newton_solve, NewtonConfig, NewtonReport, NonlinearSystem};

/// A spatially discretized problem evaluated at fixed times.
pub trait SpatialProblem: Sync {
    /// Time-dependent geometry and quadrature data.
    type Frame: Send + Sync;

    fn n_dofs(&self) -> usize;

    fn frame(&self, t: f64) -> Result<Self::Frame>;

    /// Mass matrix of the time-derivative term.
    fn mass(&self, frame: &Self::Frame) -> Result<CsrMatrix>;

    /// Spatial residual `S(u)` at the frame's time.
    fn residual(&self, frame: &Self::Frame, u: &[f64]) -> Result<Vec<f64>>;

    fn residual_and_jacobian(&self, frame: &Self::Frame, u: &[f64]) -> Result<(Vec<f64>, CsrMatrix)>;

    /// DoFs fixed to zero at every temporal node (gauge fixing).
    fn pinned_dofs(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Post-processing of a nodal state at time `t` after each slab solve.
    fn normalize(&self, _t: f64, _u: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Nodal Lagrange basis on the right Radau nodes of `[0, 1]`.
#[derive(Clone, Debug)]
pub struct TemporalBasis {
    pub k: usize,
    pub nodes: Vec<f64>,
    /// Monomial coefficients of `χ_l`: `coeffs[(i, l)]` multiplies `t^i`.
    coeffs: DMatrix<f64>,
    /// Spectral condition number of the Vandermonde matrix.
    pub condition_number: f64,
}

impl TemporalBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k > 10 {
            log::warn!("temporal degree {k} > 10: the Vandermonde system is badly conditioned");
        }
        let nodes = gauss_radau_right_1d(k + 1)?.points;
        let n = k + 1;
        let v = DMatrix::from_fn(n, n, |i, j| nodes[i].powi(j as i32));
        let sv = v.clone().singular_values();
        let condition_number = sv.max() / sv.min();
        let coeffs = v.lu().solve(&DMatrix::identity(n, n)).ok_or_else(|| {
            crate::error::Error::InvalidDiscretization("singular temporal Vandermonde matrix".into())
        })?;
        Ok(TemporalBasis {
            k,
            nodes,
            coeffs,
            condition_number,
        })
    }

    pub fn len(&self) -> usize {
        self.k + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, l: usize, t: f64) -> f64 {
        (0..=self.k).rev().fold(0.0, |acc, i| acc * t + self.coeffs[(i, l)])
    }

    pub fn derivative(&self, l: usize, t: f64) -> f64 {
        (1..=self.k)
            .rev()
            .fold(0.0, |acc, i| acc * t + i as f64 * self.coeffs[(i, l)])
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        (0..=self.k).map(|l| self.value(l, t)).collect()
    }

    pub fn derivatives(&self, t: f64) -> Vec<f64> {
        (0..=self.k).map(|l| self.derivative(l, t)).collect()
    }
}

pub fn build_temporal_basis(k: usize) -> Result<TemporalBasis> {
    TemporalBasis::new(k)
}

/// Number of temporal Gauss points, `⌈(3k + 1)/2⌉`.
pub fn temporal_gauss_points(k: usize) -> usize {
    (3 * k + 2) / 2
}

#[derive(Clone, Debug)]
pub struct TimeSlab {
    pub index: usize,
    pub t_start: f64,
    pub tau: f64,
    pub gauss: Rule1D,
}

impl TimeSlab {
    pub fn new(index: usize, t_start: f64, tau: f64, k: usize) -> Result<Self> {
        Ok(TimeSlab {
            index,
            t_start,
            tau,
            gauss: gauss_1d(temporal_gauss_points(k))?,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau
    }

    pub fn time(&self, t_hat: f64) -> f64 {
        self.t_start + self.tau * t_hat
    }
}

/// The nonlinear system of one slab over `(k+1) N` unknowns.
pub struct SlabSystem<'a, P: SpatialProblem> {
    problem: &'a P,
    basis: &'a TemporalBasis,
    slab: &'a TimeSlab,
    u_prev: &'a [f64],
    frames: Vec<P::Frame>,
    masses: Vec<CsrMatrix>,
    mass0: CsrMatrix,
    pinned: Vec<usize>,
    /// Basis values and derivatives at the Gauss points, and values at 0.
    chi: Vec<Vec<f64>>,
    dchi: Vec<Vec<f64>>,
    chi0: Vec<f64>,
}

impl<'a, P: SpatialProblem> SlabSystem<'a, P> {
    pub fn new(problem: &'a P, basis: &'a TemporalBasis, slab: &'a TimeSlab, u_prev: &'a [f64]) -> Result<Self> {
        let times: Vec<f64> = slab.gauss.points.iter().map(|&s| slab.time(s)).collect();
        let frames = times
            .par_iter()
            .map(|&t| problem.frame(t))
            .collect::<Result<Vec<_>>>()?;
        let masses = frames
            .par_iter()
            .map(|f| problem.mass(f))
            .collect::<Result<Vec<_>>>()?;
        let frame0 = problem.frame(slab.t_start)?;
        let mass0 = problem.mass(&frame0)?;
        let chi = slab.gauss.points.iter().map(|&s| basis.values(s)).collect();
        let dchi = slab.gauss.points.iter().map(|&s| basis.derivatives(s)).collect();
        Ok(SlabSystem {
            problem,
            basis,
            slab,
            u_prev,
            frames,
            masses,
            mass0,
            pinned: problem.pinned_dofs(),
            chi,
            dchi,
            chi0: basis.values(0.0),
        })
    }

    fn n(&self) -> usize {
        self.problem.n_dofs()
    }

    fn combine(&self, x: &[f64], coeffs: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for (l, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, v) in out.iter_mut().zip(&x[l * n..(l + 1) * n]) {
                    *o += c * v;
                }
            }
        }
        out
    }

    fn eval(&self, x: &[f64], with_jac: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        let n = self.n();
        let kp1 = self.basis.len();
        let tau = self.slab.tau;
        let w = &self.slab.gauss.weights;

        let per_point = (0..self.frames.len())
            .into_par_iter()
            .map(|mu| {
                let u = self.combine(x, &self.chi[mu]);
                let du = self.combine(x, &self.dchi[mu]);
                let mdu = self.masses[mu].matvec(&du);
                if with_jac {
                    let (s, j) = self.problem.residual_and_jacobian(&self.frames[mu], &u)?;
                    Ok((mdu, s, Some(j)))
                } else {
                    Ok((mdu, self.problem.residual(&self.frames[mu], &u)?, None))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let u0 = self.combine(x, &self.chi0);
        let jump: Vec<f64> = u0.iter().zip(self.u_prev).map(|(a, b)| a - b).collect();
        let mjump = self.mass0.matvec(&jump);

        let mut res = vec![0.0; kp1 * n];
        for j in 0..kp1 {
            let rj = &mut res[j * n..(j + 1) * n];
            for (mu, (mdu, s, _)) in per_point.iter().enumerate() {
                let cj = w[mu] * self.chi[mu][j];
                if cj != 0.0 {
                    for i in 0..n {
                        rj[i] += cj * (mdu[i] + tau * s[i]);
                    }
                }
            }
            let c0 = self.chi0[j];
            for i in 0..n {
                rj[i] += c0 * mjump[i];
            }
            for &d in &self.pinned {
                rj[d] = x[j * n + d];
            }
        }
        if !with_jac {
            return Ok((res, None));
        }

        let jacs: Vec<&CsrMatrix> = per_point.iter().map(|p| p.2.as_ref().expect("jacobian")).collect();
        let mut pin = crate::linalg::Triplets::new(n, n);
        for &d in &self.pinned {
            pin.push(d, d, 0.0);
        }
        let pin = pin.to_csr();
        let mut all: Vec<&CsrMatrix> = jacs.clone();
        all.extend(self.masses.iter());
        all.push(&self.mass0);
        all.push(&pin);
        let (pattern, positions) = union_pattern(&all);
        let m = self.frames.len();
        let nnz = pattern.nnz();

        // Block (j, l) values on the union pattern.
        let mut blocks = vec![vec![0.0; nnz]; kp1 * kp1];
        for j in 0..kp1 {
            for l in 0..kp1 {
                let b = &mut blocks[j * kp1 + l];
                for mu in 0..m {
                    let cm = w[mu] * self.chi[mu][j] * self.dchi[mu][l];
                    let cj = w[mu] * tau * self.chi[mu][j] * self.chi[mu][l];
                    if cm != 0.0 {
                        for (k, &p) in positions[m + mu].iter().enumerate() {
                            b[p] += cm * self.masses[mu].values[k];
                        }
                    }
                    if cj != 0.0 {
                        for (k, &p) in positions[mu].iter().enumerate() {
                            b[p] += cj * jacs[mu].values[k];
                        }
                    }
                }
                let c0 = self.chi0[j] * self.chi0[l];
                if c0 != 0.0 {
                    for (k, &p) in positions[2 * m].iter().enumerate() {
                        b[p] += c0 * self.mass0.values[k];
                    }
                }
            }
        }

        let mut is_pinned = vec![false; n];
        for &d in &self.pinned {
            is_pinned[d] = true;
        }
        let total = kp1 * n;
        let mut row_ptr = Vec::with_capacity(total + 1);
        let mut col_idx = Vec::with_capacity(kp1 * kp1 * nnz);
        let mut values = Vec::with_capacity(kp1 * kp1 * nnz);
        row_ptr.push(0);
        for j in 0..kp1 {
            for i in 0..n {
                let range = pattern.row_ptr[i]..pattern.row_ptr[i + 1];
                for l in 0..kp1 {
                    let b = &blocks[j * kp1 + l];
                    for k in range.clone() {
                        let c = pattern.col_idx[k];
                        col_idx.push(l * n + c);
                        values.push(if is_pinned[i] {
                            if l == j && c == i {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            b[k]
                        });
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok((
            res,
            Some(CsrMatrix {
                nrows: total,
                ncols: total,
                row_ptr,
                col_idx,
                values,
            }),
        ))
    }

    pub fn frames(&self) -> &[P::Frame] {
        &self.frames
    }
}

impl<P: SpatialProblem> NonlinearSystem for SlabSystem<'_, P> {
    fn dimension(&self) -> usize {
        self.basis.len() * self.n()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(x, false)?.0)
    }

    fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let (r, j) = self.eval(x, true)?;
        Ok((r, j.expect("jacobian requested")))
    }
}

/// Nodal states of one solved slab.
#[derive(Clone, Debug)]
pub struct SlabSolution {
    pub index: usize,
    pub t_start: f64,
    pub tau: f64,
    pub basis: Arc<TemporalBasis>,
    /// `nodal[l]` is the state at Radau node `l`.
    pub nodal: Vec<Vec<f64>>,
}

impl SlabSolution {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau
    }

    /// State at `t ∈ [t_{n−1}, t_n]` (the slab polynomial, also at the left end).
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t_start) / self.tau;
        let chi = self.basis.values(s);
        let n = self.nodal[0].len();
        let mut out = vec![0.0; n];
        for (c, u) in chi.iter().zip(&self.nodal) {
            for (o, v) in out.iter_mut().zip(u) {
                *o += c * v;
            }
        }
        out
    }

    /// State at the Radau node times.
    pub fn node_times(&self) -> Vec<f64> {
        self.basis.nodes.iter().map(|&s| self.t_start + self.tau * s).collect()
    }

    /// `u(t_n^−)`, the value handed to the next slab.
    pub fn trace(&self) -> &[f64] {
        self.nodal.last().expect("at least one node")
    }
}

/// Solves one slab starting from the trace `u_prev`.
pub fn solve_slab<P: SpatialProblem>(
    problem: &P,
    basis: &Arc<TemporalBasis>,
    slab: &TimeSlab,
    u_prev: &[f64],
    newton: &NewtonConfig,
    linsolve: &mut dyn LinearSolver,
) -> Result<(SlabSolution, NewtonReport)> {
    let n = problem.n_dofs();
    let kp1 = basis.len();
    let system = SlabSystem::new(problem, basis, slab, u_prev)?;
    let mut x0 = Vec::with_capacity(kp1 * n);
    for _ in 0..kp1 {
        x0.extend_from_slice(u_prev);
    }
    for j in 0..kp1 {
        for &d in &system.pinned {
            x0[j * n + d] = 0.0;
        }
    }
    let (x, report) = newton_solve(&system, &x0, newton, linsolve)?;
    let mut nodal: Vec<Vec<f64>> = x.chunks(n).map(|c| c.to_vec()).collect();
    for (l, u) in nodal.iter_mut().enumerate() {
        problem.normalize(slab.time(basis.nodes[l]), u)?;
    }
    Ok((
        SlabSolution {
            index: slab.index,
            t_start: slab.t_start,
            tau: slab.tau,
            basis: basis.clone(),
            nodal,
        },
        report,
    ))
}

/// Stationary system `S(u) = 0` at a fixed time, with the gauge DoFs pinned
/// as in the slab system.
pub struct SteadySystem<'a, P: SpatialProblem> {
    problem: &'a P,
    frame: P::Frame,
    pinned: Vec<usize>,
}

impl<'a, P: SpatialProblem> SteadySystem<'a, P> {
    pub fn new(problem: &'a P, t: f64) -> Result<Self> {
        Ok(SteadySystem {
            problem,
            frame: problem.frame(t)?,
            pinned: problem.pinned_dofs(),
        })
    }
}

impl<P: SpatialProblem> NonlinearSystem for SteadySystem<'_, P> {
    fn dimension(&self) -> usize {
        self.problem.n_dofs()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.problem.residual(&self.frame, x)?;
        for &d in &self.pinned {
            r[d] = x[d];
        }
        Ok(r)
    }

    fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let (mut r, mut j) = self.problem.residual_and_jacobian(&self.frame, x)?;
        for &d in &self.pinned {
            r[d] = x[d];
            j.set_identity_row(d);
        }
        Ok((r, j))
    }
}

/// Solves the stationary problem at time `t` starting from `x0`.
pub fn solve_steady<P: SpatialProblem>(
    problem: &P,
    t: f64,
    x0: &[f64],
    newton: &NewtonConfig,
    linsolve: &mut dyn LinearSolver,
) -> Result<(Vec<f64>, NewtonReport)> {
    let system = SteadySystem::new(problem, t)?;
    let mut x0 = x0.to_vec();
    for &d in &system.pinned {
        x0[d] = 0.0;
    }
    let (mut x, report) = newton_solve(&system, &x0, newton, linsolve)?;
    problem.normalize(t, &mut x)?;
    Ok((x, report))
}

/// Time-marching parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchConfig {
    pub k: usize,
    pub t0: f64,
    pub tau: f64,
    pub n_slabs: usize,
}

/// Marches `n_slabs` slabs from `u0`, handing each solved slab to `observer`.
/// Returns the final trace.
pub fn march<P, F>(
    problem: &P,
    cfg: &MarchConfig,
    u0: Vec<f64>,
    newton: &NewtonConfig,
    linsolve: &mut dyn LinearSolver,
    mut observer: F,
) -> Result<Vec<f64>>
where
    P: SpatialProblem,
    F: FnMut(&SlabSolution, &NewtonReport) -> Result<()>,
{
    let basis = Arc::new(TemporalBasis::new(cfg.k)?);
    let mut trace = u0;
    for n in 0..cfg.n_slabs {
        let slab = TimeSlab::new(n + 1, cfg.t0 + n as f64 * cfg.tau, cfg.tau, cfg.k)?;
        let (sol, report) =
            solve_slab(problem, &basis, &slab, &trace, newton, linsolve).map_err(|e| e.in_slab(n + 1))?;
        log::info!(
            "slab {} t = {:.6}: {} newton iterations, |R| = {:.3e}",
            n + 1,
            slab.t_end(),
            report.iterations,
            report.residuals.last().copied().unwrap_or(0.0)
        );
        observer(&sol, &report).map_err(|e| e.in_slab(n + 1))?;
        trace = sol.trace().to_vec();
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseLu, Triplets};

    /// Scalar ODE `u' = λu + f(t)` written as `M u' + S(u) = 0` with `S = −λu − f`.
    struct Ode<F: Fn(f64) -> f64 + Sync> {
        lambda: f64,
        f: F,
    }

    impl<F: Fn(f64) -> f64 + Sync> SpatialProblem for Ode<F> {
        type Frame = f64;
        fn n_dofs(&self) -> usize {
            1
        }
        fn frame(&self, t: f64) -> Result<f64> {
            Ok(t)
        }
        fn mass(&self, _: &f64) -> Result<CsrMatrix> {
            Ok(CsrMatrix::identity(1))
        }
        fn residual(&self, t: &f64, u: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![-self.lambda * u[0] - (self.f)(*t)])
        }
        fn residual_and_jacobian(&self, t: &f64, u: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
            let mut j = Triplets::new(1, 1);
            j.push(0, 0, -self.lambda);
            Ok((self.residual(t, u)?, j.to_csr()))
        }
    }

    fn run<F: Fn(f64) -> f64 + Sync>(ode: &Ode<F>, k: usize, tau: f64, slabs: usize, u0: f64) -> Vec<SlabSolution> {
        let mut out = Vec::new();
        let cfg = MarchConfig { k, t0: 0.0, tau, n_slabs: slabs };
        march(ode, &cfg, vec![u0], &NewtonConfig::default(), &mut DenseLu, |s, _| {
            out.push(s.clone());
            Ok(())
        })
        .unwrap();
        out
    }

    #[test]
    fn basis_examples() {
        let b = TemporalBasis::new(0).unwrap();
        assert_eq!(b.nodes, vec![1.0]);
        assert!((b.value(0, 0.3) - 1.0).abs() < 1e-15);
        let b = TemporalBasis::new(1).unwrap();
        for &t in &[0.0, 0.2, 1.0 / 3.0, 0.9, 1.0] {
            assert!((b.value(0, t) - 1.5 * (1.0 - t)).abs() < 1e-14);
            assert!((b.value(1, t) - (3.0 * t - 1.0) / 2.0).abs() < 1e-14);
        }
        for k in 0..=4 {
            let b = TemporalBasis::new(k).unwrap();
            assert!((b.values(0.77).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (mu, &t) in b.nodes.iter().enumerate() {
                for l in 0..=k {
                    let expect = if l == mu { 1.0 } else { 0.0 };
                    assert!((b.value(l, t) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gauss_point_counts() {
        assert_eq!(temporal_gauss_points(0), 1);
        assert_eq!(temporal_gauss_points(1), 2);
        assert_eq!(temporal_gauss_points(2), 4);
        assert_eq!(temporal_gauss_points(3), 5);
    }

    #[test]
    fn dg0_is_backward_euler() {
        let lambda = -3.0;
        let tau = 0.1;
        let sols = run(&Ode { lambda, f: |_| 0.0 }, 0, tau, 3, 1.0);
        let mut u = 1.0;
        for s in &sols {
            u /= 1.0 - tau * lambda;
            assert!((s.trace()[0] - u).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_derivative_keeps_constant() {
        for k in 0..=3 {
            let sols = run(&Ode { lambda: 0.0, f: |_| 0.0 }, k, 0.25, 2, 1.7);
            for s in &sols {
                for u in &s.nodal {
                    assert!((u[0] - 1.7).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn polynomial_solutions_reproduced() {
        // u' = f with f of degree k − 1 has a polynomial solution of degree k.
        for k in 0..=2 {
            let exact = move |t: f64| 1.0 + (0..=k).map(|i| (i as f64 + 1.0) * t.powi(i as i32)).sum::<f64>() - 1.0;
            let deriv = move |t: f64| (1..=k).map(|i| (i as f64 + 1.0) * i as f64 * t.powi(i as i32 - 1)).sum::<f64>();
            let sols = run(&Ode { lambda: 0.0, f: deriv }, k, 0.3, 3, exact(0.0));
            for s in &sols {
                for (u, t) in s.nodal.iter().zip(s.node_times()) {
                    assert!((u[0] - exact(t)).abs() < 1e-10, "k={k} t={t}");
                }
            }
        }
    }
}
