//! Pointwise integrands of the spatial forms and their exact linearizations.
//!
//! Local vectors use the cell layout `[v_x (nv) | v_y (nv) | p (np)]`; local
//! Jacobians are dense row-major `L x L` with `L = 2 nv + np`.

use nalgebra::{Matrix2, Vector2};

use super::NitscheConfig;

/// Basis data at one quadrature point.
pub struct PointBasis<'a> {
    pub phi: &'a [f64],
    pub grad_phi: &'a [Vector2<f64>],
    pub zeta: &'a [f64],
}

/// Discrete velocity, velocity gradient (`grad[(c, d)] = ∂_d v_c`) and pressure.
#[derive(Clone, Copy, Debug)]
pub struct PointState {
    pub v: Vector2<f64>,
    pub grad: Matrix2<f64>,
    pub p: f64,
}

pub fn point_state(b: &PointBasis, coeffs: &[f64]) -> PointState {
    let nv = b.phi.len();
    let mut v = Vector2::zeros();
    let mut grad = Matrix2::zeros();
    for c in 0..2 {
        let cc = &coeffs[c * nv..(c + 1) * nv];
        let mut val = 0.0;
        let mut g = Vector2::zeros();
        for i in 0..nv {
            val += cc[i] * b.phi[i];
            g += cc[i] * b.grad_phi[i];
        }
        v[c] = val;
        grad[(c, 0)] = g.x;
        grad[(c, 1)] = g.y;
    }
    let p = b
        .zeta
        .iter()
        .zip(&coeffs[2 * nv..])
        .map(|(z, c)| z * c)
        .sum();
    PointState { v, grad, p }
}

/// Navier–Stokes volume integrand: `(v·∇)v·ψ + ν ∇v:∇ψ − p ∇·ψ − f·ψ + (∇·v) ξ`.
#[allow(clippy::too_many_arguments)]
pub fn volume_point(
    w: f64,
    b: &PointBasis,
    s: &PointState,
    f: &Vector2<f64>,
    nu: f64,
    res: &mut [f64],
    jac: Option<&mut [f64]>,
) {
    let nv = b.phi.len();
    let np = b.zeta.len();
    let l = 2 * nv + np;
    let div = s.grad[(0, 0)] + s.grad[(1, 1)];
    for c in 0..2 {
        let gc = Vector2::new(s.grad[(c, 0)], s.grad[(c, 1)]);
        let conv = s.v.dot(&gc);
        for i in 0..nv {
            res[c * nv + i] +=
                w * ((conv - f[c]) * b.phi[i] + nu * gc.dot(&b.grad_phi[i]) - s.p * b.grad_phi[i][c]);
        }
    }
    for i in 0..np {
        res[2 * nv + i] += w * div * b.zeta[i];
    }

    let Some(jac) = jac else { return };
    // a_j = v·∇φ_j
    let mut adv = [0.0; 64];
    for j in 0..nv {
        adv[j] = s.v.dot(&b.grad_phi[j]);
    }
    for c in 0..2 {
        for i in 0..nv {
            let row = (c * nv + i) * l;
            let phi_i = w * b.phi[i];
            let gi = b.grad_phi[i];
            for d in 0..2 {
                let gcd = s.grad[(c, d)];
                let col0 = row + d * nv;
                if c == d {
                    for j in 0..nv {
                        jac[col0 + j] += phi_i * (b.phi[j] * gcd + adv[j]) + w * nu * gi.dot(&b.grad_phi[j]);
                    }
                } else {
                    for j in 0..nv {
                        jac[col0 + j] += phi_i * b.phi[j] * gcd;
                    }
                }
            }
            let wg = w * gi[c];
            for j in 0..np {
                jac[row + 2 * nv + j] -= wg * b.zeta[j];
            }
        }
    }
    for i in 0..np {
        let row = (2 * nv + i) * l;
        let wz = w * b.zeta[i];
        for d in 0..2 {
            for j in 0..nv {
                jac[row + d * nv + j] += wz * b.grad_phi[j][d];
            }
        }
    }
}

/// Nitsche integrand on a Dirichlet boundary point with datum `g` and outward normal `n`:
/// consistency `−(ν∇v n − p n)·ψ`, symmetry `−e·(ν∇ψ n + ξ n)` and penalties
/// `γ1 ν/h e·ψ + γ2/h (e·n)(ψ·n)` with `e = v − g`.
#[allow(clippy::too_many_arguments)]
pub fn nitsche_point(
    w: f64,
    b: &PointBasis,
    s: &PointState,
    g: &Vector2<f64>,
    n: &Vector2<f64>,
    h: f64,
    nu: f64,
    cfg: &NitscheConfig,
    res: &mut [f64],
    jac: Option<&mut [f64]>,
) {
    let nv = b.phi.len();
    let np = b.zeta.len();
    let l = 2 * nv + np;
    let e = s.v - g;
    let en = e.dot(n);
    let pen1 = cfg.gamma1 * nu / h;
    let pen2 = cfg.gamma2 / h;
    for c in 0..2 {
        let gc = Vector2::new(s.grad[(c, 0)], s.grad[(c, 1)]);
        let flux = -nu * gc.dot(n) + s.p * n[c] + pen1 * e[c] + pen2 * en * n[c];
        for i in 0..nv {
            res[c * nv + i] += w * (flux * b.phi[i] - e[c] * nu * b.grad_phi[i].dot(n));
        }
    }
    for i in 0..np {
        res[2 * nv + i] -= w * en * b.zeta[i];
    }

    let Some(jac) = jac else { return };
    let mut dn = [0.0; 64];
    for j in 0..nv {
        dn[j] = b.grad_phi[j].dot(n);
    }
    for c in 0..2 {
        for i in 0..nv {
            let row = (c * nv + i) * l;
            let phi_i = b.phi[i];
            let dni = dn[i];
            for d in 0..2 {
                let col0 = row + d * nv;
                let ncd = pen2 * n[c] * n[d];
                for j in 0..nv {
                    let mut v = ncd * b.phi[j] * phi_i;
                    if c == d {
                        v += -nu * dn[j] * phi_i - nu * b.phi[j] * dni + pen1 * b.phi[j] * phi_i;
                    }
                    jac[col0 + j] += w * v;
                }
            }
            let wn = w * n[c] * phi_i;
            for j in 0..np {
                jac[row + 2 * nv + j] += wn * b.zeta[j];
            }
        }
    }
    for i in 0..np {
        let row = (2 * nv + i) * l;
        let wz = w * b.zeta[i];
        for d in 0..2 {
            for j in 0..nv {
                jac[row + d * nv + j] -= wz * b.phi[j] * n[d];
            }
        }
    }
}

/// The Nitsche bilinear form `B(w, (ψ, ξ))` at a single point, per unit length:
/// `−w·(ν ∇ψ n + ξ n) + γ1 ν/h w·ψ + γ2/h (w·n)(ψ·n)`.
pub fn nitsche_bilinear(
    w: &Vector2<f64>,
    psi: &Vector2<f64>,
    grad_psi: &Matrix2<f64>,
    xi: f64,
    n: &Vector2<f64>,
    h: f64,
    nu: f64,
    cfg: &NitscheConfig,
) -> f64 {
    -w.dot(&(nu * grad_psi * n + xi * n)) + cfg.gamma1 * nu / h * w.dot(psi) + cfg.gamma2 / h * w.dot(n) * psi.dot(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nitsche_penalty_example() {
        let cfg = NitscheConfig::default();
        let w = Vector2::new(1.0, 0.0);
        let n = Vector2::new(1.0, 0.0);
        let b = nitsche_bilinear(&w, &w, &Matrix2::zeros(), 0.0, &n, 0.5, 0.001, &cfg);
        assert!((b - 70.07).abs() < 1e-12);
    }

    #[test]
    fn nitsche_pressure_coupling_example() {
        let cfg = NitscheConfig::default();
        let w = Vector2::new(1.0, 0.0);
        let n = Vector2::new(1.0, 0.0);
        let b = nitsche_bilinear(&w, &Vector2::zeros(), &Matrix2::zeros(), 1.0, &n, 0.5, 0.001, &cfg);
        assert!((b + 1.0).abs() < 1e-15);
    }
}
