//! Damped Newton iteration with backtracking line search or a Powell dogleg
//! trust region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, CsrMatrix, LinearSolver};

/// A square nonlinear system `R(x) = 0` with a sparse Jacobian.
pub trait NonlinearSystem {
    fn dimension(&self) -> usize;

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    LineSearch,
    Dogleg,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub strategy: Strategy,
    pub backtrack_factor: f64,
    pub sufficient_decrease: f64,
    pub min_step: f64,
    /// Initial trust-region radius relative to `max(‖x0‖, 1)`.
    pub trust_radius: f64,
    /// A full step shorter than `step_tol · max(‖x‖, 1)` ends the iteration.
    pub step_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iters: 20,
            strategy: Strategy::LineSearch,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1.0 / 1024.0,
            trust_radius: 1.0,
            step_tol: 1e-12,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_iters >= 1
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.sufficient_decrease > 0.0
            && self.min_step > 0.0
            && self.trust_radius > 0.0
            && self.step_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Newton configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual norms, starting with the initial one.
    pub residuals: Vec<f64>,
    /// Damping factor (line search) or step-length ratio (dogleg) per accepted step.
    pub damping: Vec<f64>,
    pub converged: bool,
}

fn divergence(report: &NewtonReport, reason: impl Into<String>) -> Error {
    Error::NewtonDivergence {
        iterations: report.iterations,
        residual: report.residuals.last().copied().unwrap_or(f64::NAN),
        reason: reason.into(),
        history: report.residuals.clone(),
    }
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Solves `R(x) = 0` from `x0`. Converges when `‖R(x)‖ ≤ max(abs_tol, rel_tol ‖R(x0)‖)`
/// or when a full Newton step falls below the step tolerance.
pub fn newton_solve(
    system: &dyn NonlinearSystem,
    x0: &[f64],
    cfg: &NewtonConfig,
    linsolve: &mut dyn LinearSolver,
) -> Result<(Vec<f64>, NewtonReport)> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut report = NewtonReport::default();
    let (mut r, mut jac) = system.residual_and_jacobian(&x)?;
    let mut rnorm = norm2(&r);
    report.residuals.push(rnorm);
    let target = cfg.abs_tol.max(cfg.rel_tol * rnorm);
    let mut radius = cfg.trust_radius * norm2(&x).max(1.0);

    loop {
        if !rnorm.is_finite() {
            return Err(divergence(&report, "residual is not finite"));
        }
        if rnorm <= target {
            report.converged = true;
            return Ok((x, report));
        }
        if report.iterations >= cfg.max_iters {
            return Err(divergence(&report, "maximum number of iterations reached"));
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = linsolve.solve(&jac, &rhs)?;
        report.iterations += 1;
        let dnorm = norm2(&d);

        if dnorm <= cfg.step_tol * norm2(&x).max(1.0) {
            x = axpy(&x, 1.0, &d);
            r = system.residual(&x)?;
            rnorm = norm2(&r);
            report.residuals.push(rnorm);
            report.damping.push(1.0);
            log::debug!("newton {}: |R| = {:.3e} (step below tolerance)", report.iterations, rnorm);
            report.converged = true;
            return Ok((x, report));
        }

        let (x_new, r_new, factor) = match cfg.strategy {
            Strategy::LineSearch => {
                let mut alpha = 1.0;
                loop {
                    let trial = axpy(&x, alpha, &d);
                    let rt = system.residual(&trial)?;
                    let nt = norm2(&rt);
                    if nt.is_finite() && nt <= (1.0 - cfg.sufficient_decrease * alpha) * rnorm {
                        break (trial, rt, alpha);
                    }
                    alpha *= cfg.backtrack_factor;
                    if alpha < cfg.min_step {
                        return Err(divergence(&report, "line search stalled"));
                    }
                }
            }
            Strategy::Dogleg => {
                let g = jac.matvec_transpose(&r);
                let jg = jac.matvec(&g);
                let gnorm2 = dot(&g, &g);
                let cauchy_scale = if dot(&jg, &jg) > 0.0 { gnorm2 / dot(&jg, &jg) } else { 0.0 };
                let dc: Vec<f64> = g.iter().map(|v| -cauchy_scale * v).collect();
                loop {
                    let step = dogleg_step(&d, &dc, &g, radius);
                    let snorm = norm2(&step);
                    let trial = axpy(&x, 1.0, &step);
                    let rt = system.residual(&trial)?;
                    let nt = norm2(&rt);
                    let js = jac.matvec(&step);
                    let lin: Vec<f64> = r.iter().zip(&js).map(|(a, b)| a + b).collect();
                    let predicted = 0.5 * (rnorm * rnorm - dot(&lin, &lin));
                    let actual = 0.5 * (rnorm * rnorm - nt * nt);
                    let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
                    if rho < 0.25 {
                        radius = 0.25 * snorm;
                    } else if rho > 0.75 && snorm >= 0.99 * radius {
                        radius *= 2.0;
                    }
                    if nt.is_finite() && rho > cfg.sufficient_decrease && nt < rnorm {
                        break (trial, rt, snorm / dnorm);
                    }
                    if radius < cfg.min_step * cfg.step_tol.max(1e-14) * norm2(&x).max(1.0) || snorm < 1e-300 {
                        return Err(divergence(&report, "trust region collapsed"));
                    }
                }
            }
        };

        x = x_new;
        rnorm = norm2(&r_new);
        report.residuals.push(rnorm);
        report.damping.push(factor);
        log::debug!("newton {}: |R| = {:.3e}, damping {:.3}", report.iterations, rnorm, factor);
        if rnorm <= target {
            report.converged = true;
            return Ok((x, report));
        }
        let (rr, jj) = system.residual_and_jacobian(&x)?;
        r = rr;
        jac = jj;
    }
}

fn dogleg_step(newton: &[f64], cauchy: &[f64], grad: &[f64], radius: f64) -> Vec<f64> {
    let nn = norm2(newton);
    if nn <= radius {
        return newton.to_vec();
    }
    let nc = norm2(cauchy);
    if nc >= radius {
        let gn = norm2(grad);
        return grad.iter().map(|v| -radius * v / gn).collect();
    }
    // Solve |dc + s (dn − dc)| = radius for s in [0, 1].
    let diff: Vec<f64> = newton.iter().zip(cauchy).map(|(a, b)| a - b).collect();
    let a = dot(&diff, &diff);
    let b = 2.0 * dot(cauchy, &diff);
    let c = nc * nc - radius * radius;
    let s = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    cauchy.iter().zip(&diff).map(|(c, d)| c + s * d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseLu, SparseLu, Triplets};

    struct Linear {
        a: CsrMatrix,
        b: Vec<f64>,
    }

    impl NonlinearSystem for Linear {
        fn dimension(&self) -> usize {
            self.b.len()
        }
        fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(self.a.matvec(x).iter().zip(&self.b).map(|(a, b)| a - b).collect())
        }
        fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
            Ok((self.residual(x)?, self.a.clone()))
        }
    }

    /// Componentwise `x² − 4`.
    struct Square(usize);

    impl NonlinearSystem for Square {
        fn dimension(&self) -> usize {
            self.0
        }
        fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| v * v - 4.0).collect())
        }
        fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
            let mut t = Triplets::new(self.0, self.0);
            for (i, v) in x.iter().enumerate() {
                t.push(i, i, 2.0 * v);
            }
            Ok((self.residual(x)?, t.to_csr()))
        }
    }

    #[test]
    fn linear_problem_one_step() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 3.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 2.0);
        let sys = Linear {
            a: t.to_csr(),
            b: vec![1.0, -2.0],
        };
        let (x, rep) = newton_solve(&sys, &[10.0, 10.0], &NewtonConfig::default(), &mut SparseLu::new()).unwrap();
        assert_eq!(rep.iterations, 1);
        let r = sys.residual(&x).unwrap();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn square_root_iterates() {
        let sys = Square(1);
        let cfg = NewtonConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-16,
            ..Default::default()
        };
        let (x, rep) = newton_solve(&sys, &[3.0], &cfg, &mut DenseLu).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        // Residuals of the iterates 3, 13/6, 2.00641...
        assert!((rep.residuals[0] - 5.0).abs() < 1e-14);
        let x1 = 13.0 / 6.0;
        assert!((rep.residuals[1] - (x1 * x1 - 4.0)).abs() < 1e-14);
        let x2: f64 = 2.006_410_256_410_256;
        assert!((rep.residuals[2] - (x2 * x2 - 4.0)).abs() < 1e-12);
        assert!(rep.damping.iter().all(|&a| a == 1.0));
        // Quadratic tail.
        let n = rep.residuals.len();
        let (a, b, c) = (rep.residuals[n - 4], rep.residuals[n - 3], rep.residuals[n - 2]);
        let slope = (c.ln() - b.ln()) / (b.ln() - a.ln());
        assert!(slope >= 1.8, "slope {slope}");
    }

    #[test]
    fn dogleg_converges() {
        let sys = Square(3);
        let cfg = NewtonConfig {
            strategy: Strategy::Dogleg,
            trust_radius: 0.1,
            ..Default::default()
        };
        let (x, rep) = newton_solve(&sys, &[30.0, 0.5, 7.0], &cfg, &mut DenseLu).unwrap();
        assert!(x.iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!(rep.residuals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn iteration_limit_reports_history() {
        let sys = Square(1);
        let cfg = NewtonConfig {
            max_iters: 2,
            ..Default::default()
        };
        match newton_solve(&sys, &[300.0], &cfg, &mut DenseLu) {
            Err(Error::NewtonDivergence { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 3);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn line_search_never_increases_residual() {
        // x² − 4 from a point where the full step overshoots badly.
        let sys = Square(1);
        let (_, rep) = newton_solve(&sys, &[0.01], &NewtonConfig::default(), &mut DenseLu).unwrap();
        assert!(rep.residuals.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.damping.iter().any(|&a| a < 1.0));
    }
}
