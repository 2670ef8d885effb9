//! Tensor-product Lagrange bases on the reference square, evaluation on cells,
//! and the canonical extension of cell polynomials across a face patch.

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{Axis, BackgroundMesh, Point};
use crate::quadrature::gauss_1d;

/// Equispaced 1D Lagrange basis of degree `r` on `[0, 1]`. Evaluation is valid
/// for any real argument (polynomial extrapolation).
#[derive(Clone, Debug)]
pub struct Lagrange1D {
    pub degree: usize,
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl Lagrange1D {
    pub fn new(degree: usize) -> Self {
        let nodes: Vec<f64> = if degree == 0 {
            vec![0.5]
        } else {
            (0..=degree).map(|i| i as f64 / degree as f64).collect()
        };
        let denominators = (0..nodes.len())
            .map(|i| {
                (0..nodes.len())
                    .filter(|&j| j != i)
                    .map(|j| nodes[i] - nodes[j])
                    .product()
            })
            .collect();
        Lagrange1D {
            degree,
            nodes,
            denominators,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and first derivatives of all basis functions at `x`.
    pub fn eval(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.nodes.len();
        for i in 0..n {
            let mut v = 1.0;
            let mut d = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let f = x - self.nodes[j];
                d = d * f + v;
                v *= f;
            }
            values[i] = v / self.denominators[i];
            derivs[i] = d / self.denominators[i];
        }
    }
}

/// Maximum supported polynomial degree; keeps evaluation on the stack.
pub const MAX_DEGREE: usize = 6;
const MAX_1D: usize = MAX_DEGREE + 1;

/// Tensor-product `Q_r` Lagrange basis on `[0, 1]²`; local index `a + (r+1) b`.
#[derive(Clone, Debug)]
pub struct QkBasis {
    pub degree: usize,
    line: Lagrange1D,
}

impl QkBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidDiscretization(format!(
                "polynomial degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        Ok(QkBasis {
            degree,
            line: Lagrange1D::new(degree),
        })
    }

    pub fn n_dofs(&self) -> usize {
        let n = self.line.len();
        n * n
    }

    pub fn node(&self, local: usize) -> Vector2<f64> {
        let n = self.line.len();
        Vector2::new(self.line.nodes()[local % n], self.line.nodes()[local / n])
    }

    /// Values and reference gradients at the reference point `xi`.
    pub fn eval(&self, xi: &Vector2<f64>, values: &mut [f64], grads: &mut [Vector2<f64>]) {
        let n = self.line.len();
        let (mut vx, mut dx, mut vy, mut dy) = ([0.0; MAX_1D], [0.0; MAX_1D], [0.0; MAX_1D], [0.0; MAX_1D]);
        self.line.eval(xi.x, &mut vx[..n], &mut dx[..n]);
        self.line.eval(xi.y, &mut vy[..n], &mut dy[..n]);
        for b in 0..n {
            for a in 0..n {
                let k = a + n * b;
                values[k] = vx[a] * vy[b];
                grads[k] = Vector2::new(dx[a] * vy[b], vx[a] * dy[b]);
            }
        }
    }

    pub fn values(&self, xi: &Vector2<f64>) -> Vec<f64> {
        let mut v = vec![0.0; self.n_dofs()];
        let mut g = vec![Vector2::zeros(); self.n_dofs()];
        self.eval(xi, &mut v, &mut g);
        v
    }

    /// Evaluates the polynomial with local coefficients `coeffs` at `xi`.
    pub fn evaluate(&self, coeffs: &[f64], xi: &Vector2<f64>) -> f64 {
        self.values(xi).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Basis values and physical gradients at a fixed set of points.
#[derive(Clone, Debug, Default)]
pub struct ShapeTable {
    pub n_points: usize,
    pub n_dofs: usize,
    pub values: Vec<f64>,
    pub grads: Vec<Vector2<f64>>,
}

impl ShapeTable {
    /// Tabulates `basis` at reference points, converting gradients with cell sizes `(hx, hy)`.
    pub fn new(basis: &QkBasis, ref_points: &[Vector2<f64>], hx: f64, hy: f64) -> Self {
        let nd = basis.n_dofs();
        let mut t = ShapeTable {
            n_points: ref_points.len(),
            n_dofs: nd,
            values: vec![0.0; nd * ref_points.len()],
            grads: vec![Vector2::zeros(); nd * ref_points.len()],
        };
        t.fill(basis, ref_points, hx, hy);
        t
    }

    /// Re-tabulates in place, reusing allocations.
    pub fn fill(&mut self, basis: &QkBasis, ref_points: &[Vector2<f64>], hx: f64, hy: f64) {
        let nd = basis.n_dofs();
        self.n_points = ref_points.len();
        self.n_dofs = nd;
        self.values.resize(nd * ref_points.len(), 0.0);
        self.grads.resize(nd * ref_points.len(), Vector2::zeros());
        for (q, xi) in ref_points.iter().enumerate() {
            let range = q * nd..(q + 1) * nd;
            basis.eval(xi, &mut self.values[range.clone()], &mut self.grads[range.clone()]);
            for g in &mut self.grads[range] {
                g.x /= hx;
                g.y /= hy;
            }
        }
    }

    #[inline]
    pub fn value(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_dofs..(q + 1) * self.n_dofs]
    }

    #[inline]
    pub fn grad(&self, q: usize) -> &[Vector2<f64>] {
        &self.grads[q * self.n_dofs..(q + 1) * self.n_dofs]
    }
}

/// Reference coordinates of a physical point relative to a cell.
pub fn to_reference(mesh: &BackgroundMesh, cell: usize, x: &Point) -> Vector2<f64> {
    let o = mesh.cell_origin(cell);
    Vector2::new((x.x - o.x) / mesh.hx, (x.y - o.y) / mesh.hy)
}

/// Two cells sharing an interior face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacePatch {
    pub face: usize,
    pub axis: Axis,
    /// Cell on the negative side of the face.
    pub k1: usize,
    /// Cell on the positive side of the face.
    pub k2: usize,
}

impl FacePatch {
    pub fn new(mesh: &BackgroundMesh, face: usize) -> Result<Self> {
        let f = mesh.face(face);
        match (f.lower, f.upper) {
            (Some(k1), Some(k2)) => Ok(FacePatch {
                face,
                axis: f.normal,
                k1,
                k2,
            }),
            _ => Err(Error::InvalidMesh(format!("face {face} is a boundary face"))),
        }
    }

    /// Offset of `K2`'s reference frame relative to `K1`'s.
    pub fn shift(&self) -> Vector2<f64> {
        match self.axis {
            Axis::X => Vector2::new(1.0, 0.0),
            Axis::Y => Vector2::new(0.0, 1.0),
        }
    }

    pub fn measure(&self, mesh: &BackgroundMesh) -> f64 {
        2.0 * mesh.hx * mesh.hy
    }
}

/// Evaluates the polynomial of `cell` (local coefficients `coeffs`) at any
/// physical point, extrapolating beyond the cell.
pub fn canonical_extension(
    basis: &QkBasis,
    mesh: &BackgroundMesh,
    cell: usize,
    coeffs: &[f64],
    x: &Point,
) -> f64 {
    basis.evaluate(coeffs, &to_reference(mesh, cell, x))
}

/// Reference mass matrix of the extension jump on a face patch:
/// `G = ∫_{[0,2]×[0,1]} d dᵀ` with `d = [φ(ξ); −φ(ξ − shift)]` in `K1`'s frame.
/// Multiply by the cell area to get the physical patch integral.
#[derive(Clone, Debug)]
pub struct PatchJumpMatrix {
    pub degree: usize,
    pub axis: Axis,
    pub matrix: DMatrix<f64>,
}

impl PatchJumpMatrix {
    pub fn new(basis: &QkBasis, axis: Axis) -> Result<Self> {
        let n = basis.n_dofs();
        let g = gauss_1d(basis.degree + 1)?;
        let shift = match axis {
            Axis::X => Vector2::new(1.0, 0.0),
            Axis::Y => Vector2::new(0.0, 1.0),
        };
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let mut v1 = vec![0.0; n];
        let mut v2 = vec![0.0; n];
        let mut gr = vec![Vector2::zeros(); n];
        let mut d = vec![0.0; 2 * n];
        for cell_offset in [Vector2::zeros(), shift] {
            for (&y, &wy) in g.points.iter().zip(&g.weights) {
                for (&x, &wx) in g.points.iter().zip(&g.weights) {
                    let xi = Vector2::new(x, y) + cell_offset;
                    basis.eval(&xi, &mut v1, &mut gr);
                    basis.eval(&(xi - shift), &mut v2, &mut gr);
                    d[..n].copy_from_slice(&v1);
                    for i in 0..n {
                        d[n + i] = -v2[i];
                    }
                    let w = wx * wy;
                    for i in 0..2 * n {
                        for j in 0..2 * n {
                            m[(i, j)] += w * d[i] * d[j];
                        }
                    }
                }
            }
        }
        Ok(PatchJumpMatrix {
            degree: basis.degree,
            axis,
            matrix: m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Rect};

    #[test]
    fn q1_kronecker_and_center() {
        let b = QkBasis::new(1).unwrap();
        for i in 0..4 {
            let v = b.values(&b.node(i));
            for (j, vj) in v.iter().enumerate() {
                assert_eq!(*vj, if i == j { 1.0 } else { 0.0 });
            }
        }
        let v = b.values(&Vector2::new(0.5, 0.5));
        assert!(v.iter().all(|&x| (x - 0.25).abs() < 1e-16));
    }

    #[test]
    fn partition_of_unity_gradients() {
        for r in 1..=4 {
            let b = QkBasis::new(r).unwrap();
            let n = b.n_dofs();
            let (mut v, mut g) = (vec![0.0; n], vec![Vector2::zeros(); n]);
            b.eval(&Vector2::new(0.37, 1.4), &mut v, &mut g);
            let s: f64 = v.iter().sum();
            let gs: Vector2<f64> = g.iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            assert!(gs.norm() < 1e-12);
        }
    }

    #[test]
    fn extension_examples() {
        let mesh = build_mesh(Rect::new(0.0, 2.0, 0.0, 1.0), 2, 1).unwrap();
        let q1 = QkBasis::new(1).unwrap();
        let ones = [1.0; 4];
        assert!((canonical_extension(&q1, &mesh, 0, &ones, &Point::new(1.7, 0.2)) - 1.0).abs() < 1e-15);
        let node10 = [0.0, 1.0, 0.0, 0.0];
        assert!((canonical_extension(&q1, &mesh, 0, &node10, &Point::new(2.0, 0.0)) - 2.0).abs() < 1e-15);

        let q2 = QkBasis::new(2).unwrap();
        let coeffs: Vec<f64> = (0..9).map(|i| q2.node(i).x.powi(2)).collect();
        assert!((canonical_extension(&q2, &mesh, 0, &coeffs, &Point::new(1.5, 0.3)) - 2.25).abs() < 1e-14);
    }

    #[test]
    fn patch_jump_example() {
        // v = 0 on K1, v = (x − 1) y on K2: patch integral 2/9.
        let b = QkBasis::new(1).unwrap();
        let g = PatchJumpMatrix::new(&b, Axis::X).unwrap();
        let mut c = vec![0.0; 8];
        for i in 0..4 {
            let node = b.node(i) + Vector2::new(1.0, 0.0);
            c[4 + i] = (node.x - 1.0) * node.y;
        }
        let cv = nalgebra::DVector::from_vec(c);
        let val = (cv.transpose() * &g.matrix * &cv)[(0, 0)];
        assert!((val - 2.0 / 9.0).abs() < 1e-14);
    }
}
