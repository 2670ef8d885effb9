//! Spatial forms of the stabilized Navier–Stokes problem at a fixed time:
//! bulk terms over the fluid domain, Nitsche terms on Dirichlet boundaries
//! (fitted walls and the embedded body boundary) and the ghost penalty on
//! face patches of the stabilization set.

pub mod kernels;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe_space::{to_reference, PatchJumpMatrix, QkBasis, ShapeTable};
use crate::geometry::{classify_cells, cut_pieces, CellClassification, CellKind, CutPiece, LevelSetGeometry};
use crate::linalg::{CsrMatrix, Triplets};
use crate::mesh::{Axis, BackgroundMesh, BoundaryKind, Point, Side, TaylorHoodSpace};
use crate::quadrature::{cut_cell_rules, gauss_1d, LineRule, QuadratureRule, Rule1D};
use crate::timeslab::SpatialProblem;

use kernels::{nitsche_point, point_state, volume_point, PointBasis, PointState};

pub type VectorField = Arc<dyn Fn(&Point, f64) -> Vector2<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

pub fn zero_field() -> VectorField {
    Arc::new(|_, _| Vector2::zeros())
}

#[derive(Clone)]
pub struct FluidParameters {
    pub nu: f64,
    pub body_force: VectorField,
}

impl fmt::Debug for FluidParameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluidParameters").field("nu", &self.nu).finish_non_exhaustive()
    }
}

impl FluidParameters {
    pub fn new(nu: f64) -> Self {
        FluidParameters {
            nu,
            body_force: zero_field(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NitscheConfig {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for NitscheConfig {
    fn default() -> Self {
        NitscheConfig {
            gamma1: 35.0,
            gamma2: 35.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhostPenaltyConfig {
    pub gamma_v: f64,
    pub gamma_p: f64,
    /// Power of `h` in the velocity penalty.
    pub velocity_exponent: f64,
    /// Power of `h` in the pressure penalty.
    pub pressure_exponent: f64,
}

impl Default for GhostPenaltyConfig {
    fn default() -> Self {
        GhostPenaltyConfig {
            gamma_v: 1e-2,
            gamma_p: 1e-2,
            velocity_exponent: -2.0,
            pressure_exponent: 0.0,
        }
    }
}

impl GhostPenaltyConfig {
    pub fn velocity_coefficient(&self, nu: f64, h: f64) -> f64 {
        self.gamma_v * (1.0 / nu + nu) * h.powf(self.velocity_exponent)
    }

    pub fn pressure_coefficient(&self, nu: f64, h: f64) -> f64 {
        self.gamma_p / nu * h.powf(self.pressure_exponent)
    }
}

/// Dirichlet data: inflow profile, wall datum (usually zero) and body datum.
#[derive(Clone)]
pub struct BoundaryData {
    pub inflow: VectorField,
    pub wall: VectorField,
    pub body: VectorField,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

impl BoundaryData {
    pub fn homogeneous() -> Self {
        BoundaryData {
            inflow: zero_field(),
            wall: zero_field(),
            body: zero_field(),
        }
    }

    /// The same field on every Dirichlet part.
    pub fn uniform(g: VectorField) -> Self {
        BoundaryData {
            inflow: g.clone(),
            wall: g.clone(),
            body: g,
        }
    }

    pub fn fitted(&self, kind: BoundaryKind, x: &Point, t: f64) -> Vector2<f64> {
        match kind {
            BoundaryKind::Inflow => (self.inflow)(x, t),
            BoundaryKind::Wall => (self.wall)(x, t),
            BoundaryKind::Outflow => Vector2::zeros(),
        }
    }
}

/// Quadrature orders (points per direction).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOrders {
    pub full: usize,
    pub cut_outer: usize,
    pub cut_inner: usize,
    pub line: usize,
}

impl QuadratureOrders {
    pub fn for_degree(r: usize) -> Self {
        QuadratureOrders {
            full: r + 1,
            cut_outer: r + 2,
            cut_inner: r + 2,
            line: r + 2,
        }
    }
}

/// Geometry and quadrature of one cut cell at one time.
#[derive(Clone, Debug)]
pub struct CutCellData {
    pub cell: usize,
    pub pieces: Vec<CutPiece>,
    pub volume: QuadratureRule,
    pub boundary: LineRule,
}

/// Classification and quadrature lookup tables at one time instant.
#[derive(Clone, Debug)]
pub struct Frame {
    pub t: f64,
    pub classification: CellClassification,
    cut_index: Vec<usize>,
    pub cut_cells: Vec<CutCellData>,
}

impl Frame {
    pub fn cut(&self, cell: usize) -> Option<&CutCellData> {
        self.cut_index
            .get(cell)
            .and_then(|&k| (k != usize::MAX).then(|| &self.cut_cells[k]))
    }

    pub fn kind(&self, cell: usize) -> CellKind {
        self.classification.kind(cell)
    }
}

/// Local contribution of a cell or patch.
struct Local {
    dofs: Vec<usize>,
    res: Vec<f64>,
    jac: Vec<f64>,
}

/// Pre-tabulated data on the reference cell.
#[derive(Clone, Debug)]
struct ReferenceTables {
    points: Vec<Vector2<f64>>,
    weights: Vec<f64>,
    v: ShapeTable,
    p: ShapeTable,
}

impl ReferenceTables {
    fn new(vb: &QkBasis, pb: &QkBasis, points: Vec<Vector2<f64>>, weights: Vec<f64>, hx: f64, hy: f64) -> Self {
        let v = ShapeTable::new(vb, &points, hx, hy);
        let p = ShapeTable::new(pb, &points, hx, hy);
        ReferenceTables { points, weights, v, p }
    }
}

/// The spatial problem: Taylor–Hood space on the background mesh plus all forms.
pub struct NavierStokesProblem {
    pub mesh: BackgroundMesh,
    pub space: TaylorHoodSpace,
    pub geometry: LevelSetGeometry,
    pub params: FluidParameters,
    pub nitsche: NitscheConfig,
    pub ghost_penalty: GhostPenaltyConfig,
    pub data: BoundaryData,
    pub orders: QuadratureOrders,
    vbasis: QkBasis,
    pbasis: QkBasis,
    full: ReferenceTables,
    /// Face tables for the sides left, right, bottom, top.
    sides: [ReferenceTables; 4],
    /// Ghost-penalty patch matrices (unscaled, reference frame) for x- and y-patches.
    patch_v: [DMatrix<f64>; 2],
    patch_p: [DMatrix<f64>; 2],
    pin_pressure: bool,
}

impl fmt::Debug for NavierStokesProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NavierStokesProblem")
            .field("nx", &self.mesh.nx)
            .field("ny", &self.mesh.ny)
            .field("r", &self.space.degree())
            .field("dofs", &self.space.total_dofs())
            .finish_non_exhaustive()
    }
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

fn side_reference_points(side: Side, rule: &Rule1D) -> Vec<Vector2<f64>> {
    rule.points
        .iter()
        .map(|&s| match side {
            Side::Left => Vector2::new(0.0, s),
            Side::Right => Vector2::new(1.0, s),
            Side::Bottom => Vector2::new(s, 0.0),
            Side::Top => Vector2::new(s, 1.0),
        })
        .collect()
}

impl NavierStokesProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: BackgroundMesh,
        r: usize,
        geometry: LevelSetGeometry,
        params: FluidParameters,
        nitsche: NitscheConfig,
        ghost_penalty: GhostPenaltyConfig,
        data: BoundaryData,
    ) -> Result<Self> {
        Self::with_orders(mesh, r, geometry, params, nitsche, ghost_penalty, data, QuadratureOrders::for_degree(r))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_orders(
        mesh: BackgroundMesh,
        r: usize,
        geometry: LevelSetGeometry,
        params: FluidParameters,
        nitsche: NitscheConfig,
        ghost_penalty: GhostPenaltyConfig,
        data: BoundaryData,
        orders: QuadratureOrders,
    ) -> Result<Self> {
        if !(params.nu > 0.0) {
            return Err(Error::InvalidDiscretization(format!("viscosity must be positive, got {}", params.nu)));
        }
        if !(nitsche.gamma1 > 0.0 && nitsche.gamma2 > 0.0) {
            return Err(Error::InvalidDiscretization("Nitsche parameters must be positive".into()));
        }
        if !(ghost_penalty.gamma_v > 0.0 && ghost_penalty.gamma_p > 0.0) {
            return Err(Error::InvalidDiscretization("ghost-penalty parameters must be positive".into()));
        }
        let space = TaylorHoodSpace::new(&mesh, r)?;
        let vbasis = QkBasis::new(r)?;
        let pbasis = QkBasis::new(r - 1)?;
        let (hx, hy) = (mesh.hx, mesh.hy);

        let g = gauss_1d(orders.full)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (&y, &wy) in g.points.iter().zip(&g.weights) {
            for (&x, &wx) in g.points.iter().zip(&g.weights) {
                points.push(Vector2::new(x, y));
                weights.push(wx * wy * hx * hy);
            }
        }
        let full = ReferenceTables::new(&vbasis, &pbasis, points, weights, hx, hy);

        let gl = gauss_1d(orders.line)?;
        let sides = Side::ALL.map(|side| {
            let len = match side {
                Side::Left | Side::Right => hy,
                Side::Bottom | Side::Top => hx,
            };
            let w = gl.weights.iter().map(|w| w * len).collect();
            ReferenceTables::new(&vbasis, &pbasis, side_reference_points(side, &gl), w, hx, hy)
        });

        let patch_v = [
            PatchJumpMatrix::new(&vbasis, Axis::X)?.matrix,
            PatchJumpMatrix::new(&vbasis, Axis::Y)?.matrix,
        ];
        let patch_p = [
            PatchJumpMatrix::new(&pbasis, Axis::X)?.matrix,
            PatchJumpMatrix::new(&pbasis, Axis::Y)?.matrix,
        ];
        let pin_pressure = !mesh.tags.has_outflow();

        Ok(NavierStokesProblem {
            mesh,
            space,
            geometry,
            params,
            nitsche,
            ghost_penalty,
            data,
            orders,
            vbasis,
            pbasis,
            full,
            sides,
            patch_v,
            patch_p,
            pin_pressure,
        })
    }

    pub fn velocity_basis(&self) -> &QkBasis {
        &self.vbasis
    }

    pub fn pressure_basis(&self) -> &QkBasis {
        &self.pbasis
    }

    /// Whether the pressure is only determined up to a constant (no outflow boundary).
    pub fn pressure_needs_gauge(&self) -> bool {
        self.pin_pressure
    }

    /// Classification and cut-cell quadrature at time `t`.
    pub fn build_frame(&self, t: f64) -> Result<Frame> {
        let classification = classify_cells(&self.mesh, &self.geometry, t)?;
        let cut_cells = classification
            .cut
            .par_iter()
            .map(|&cell| -> Result<CutCellData> {
                let pieces = cut_pieces(&self.mesh, cell, &self.geometry, t)?;
                let o = &self.orders;
                let (volume, boundary) = cut_cell_rules(&pieces, o.cut_outer, o.cut_inner, o.line)?;
                Ok(CutCellData { cell, pieces, volume, boundary })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cut_index = vec![usize::MAX; self.mesh.n_cells()];
        for (k, &c) in classification.cut.iter().enumerate() {
            cut_index[c] = k;
        }
        Ok(Frame {
            t,
            classification,
            cut_index,
            cut_cells,
        })
    }

    fn local_coefficients(&self, dofs: &[usize], u: &[f64]) -> Vec<f64> {
        dofs.iter().map(|&d| u[d]).collect()
    }

    /// Fluid volume rule of an active cell in reference coordinates with
    /// physical weights, together with its physical points.
    fn with_volume_tables<R>(
        &self,
        frame: &Frame,
        cell: usize,
        f: impl FnOnce(&[Vector2<f64>], &[f64], &ShapeTable, &ShapeTable) -> R,
    ) -> Result<R> {
        match frame.kind(cell) {
            CellKind::Fluid => Ok(f(&self.full.points, &self.full.weights, &self.full.v, &self.full.p)),
            CellKind::Cut => {
                let data = frame.cut(cell).ok_or(Error::MissingQuadrature(cell))?;
                let refs: Vec<Vector2<f64>> = data
                    .volume
                    .points
                    .iter()
                    .map(|x| to_reference(&self.mesh, cell, x))
                    .collect();
                let vt = ShapeTable::new(&self.vbasis, &refs, self.mesh.hx, self.mesh.hy);
                let pt = ShapeTable::new(&self.pbasis, &refs, self.mesh.hx, self.mesh.hy);
                Ok(f(&refs, &data.volume.weights, &vt, &pt))
            }
            CellKind::Rigid => Ok(f(&[], &[], &ShapeTable::default(), &ShapeTable::default())),
        }
    }

    fn physical(&self, cell: usize, xi: &Vector2<f64>) -> Point {
        let o = self.mesh.cell_origin(cell);
        Point::new(o.x + xi.x * self.mesh.hx, o.y + xi.y * self.mesh.hy)
    }

    /// Residual and (optionally) Jacobian of all cell-local terms of one cell.
    fn cell_local(&self, frame: &Frame, cell: usize, u: &[f64], with_jac: bool) -> Result<Local> {
        let mut dofs = Vec::with_capacity(self.space.local_size());
        self.space.cell_global_dofs(cell, &mut dofs);
        let l = dofs.len();
        let coeffs = self.local_coefficients(&dofs, u);
        let mut res = vec![0.0; l];
        let mut jac = if with_jac { vec![0.0; l * l] } else { Vec::new() };
        let t = frame.t;
        let nu = self.params.nu;

        self.with_volume_tables(frame, cell, |refs, weights, vt, pt| {
            for q in 0..refs.len() {
                let b = PointBasis {
                    phi: vt.value(q),
                    grad_phi: vt.grad(q),
                    zeta: pt.value(q),
                };
                let s = point_state(&b, &coeffs);
                let f = (self.params.body_force)(&self.physical(cell, &refs[q]), t);
                volume_point(weights[q], &b, &s, &f, nu, &mut res, with_jac.then_some(&mut jac[..]));
            }
        })?;

        let h = self.mesh.h();
        // Fitted Dirichlet boundary faces.
        for fidx in self.mesh.cell_faces(cell) {
            let face = self.mesh.face(fidx);
            let Some((side, kind)) = face.boundary else { continue };
            if !kind.is_dirichlet() || frame.kind(cell) == CellKind::Rigid {
                continue;
            }
            let tab = &self.sides[side_index(side)];
            let n = side.outward_normal();
            for q in 0..tab.points.len() {
                let b = PointBasis {
                    phi: tab.v.value(q),
                    grad_phi: tab.v.grad(q),
                    zeta: tab.p.value(q),
                };
                let s = point_state(&b, &coeffs);
                let g = self.data.fitted(kind, &self.physical(cell, &tab.points[q]), t);
                nitsche_point(tab.weights[q], &b, &s, &g, &n, h, nu, &self.nitsche, &mut res, with_jac.then_some(&mut jac[..]));
            }
        }

        // Embedded body boundary.
        if let Some(data) = frame.cut(cell) {
            let line = &data.boundary;
            let refs: Vec<Vector2<f64>> = line.points.iter().map(|x| to_reference(&self.mesh, cell, x)).collect();
            let vt = ShapeTable::new(&self.vbasis, &refs, self.mesh.hx, self.mesh.hy);
            let pt = ShapeTable::new(&self.pbasis, &refs, self.mesh.hx, self.mesh.hy);
            for q in 0..refs.len() {
                let b = PointBasis {
                    phi: vt.value(q),
                    grad_phi: vt.grad(q),
                    zeta: pt.value(q),
                };
                let s = point_state(&b, &coeffs);
                let g = (self.data.body)(&line.points[q], t);
                nitsche_point(line.weights[q], &b, &s, &g, &line.normals[q], h, nu, &self.nitsche, &mut res, with_jac.then_some(&mut jac[..]));
            }
        }
        Ok(Local { dofs, res, jac })
    }

    /// Ghost-penalty matrix of one face patch in the layout `[cell K1 | cell K2]`.
    pub fn patch_matrix(&self, axis: Axis) -> DMatrix<f64> {
        let nv = self.vbasis.n_dofs();
        let np = self.pbasis.n_dofs();
        let l = 2 * nv + np;
        let h = self.mesh.h();
        let area = self.mesh.hx * self.mesh.hy;
        let cv = self.ghost_penalty.velocity_coefficient(self.params.nu, h) * area;
        let cp = self.ghost_penalty.pressure_coefficient(self.params.nu, h) * area;
        let a = axis.index();
        let gv = &self.patch_v[a];
        let gp = &self.patch_p[a];
        let mut s = DMatrix::zeros(2 * l, 2 * l);
        // Patch index of scalar function `i` (cell K1 for i < n, else K2) in block `off`.
        let idx = |off: usize, n: usize, i: usize| -> usize {
            let (cell, local) = if i < n { (0, i) } else { (1, i - n) };
            cell * l + off + local
        };
        for comp in 0..2 {
            for i in 0..2 * nv {
                for j in 0..2 * nv {
                    s[(idx(comp * nv, nv, i), idx(comp * nv, nv, j))] += cv * gv[(i, j)];
                }
            }
        }
        for i in 0..2 * np {
            for j in 0..2 * np {
                s[(idx(2 * nv, np, i), idx(2 * nv, np, j))] += cp * gp[(i, j)];
            }
        }
        s
    }

    fn patch_locals(&self, frame: &Frame, u: &[f64], with_jac: bool) -> Vec<Local> {
        let mats = [self.patch_matrix(Axis::X), self.patch_matrix(Axis::Y)];
        frame
            .classification
            .stabilization_faces
            .par_iter()
            .map(|&f| {
                let face = self.mesh.face(f);
                let (k1, k2) = (face.lower.expect("interior"), face.upper.expect("interior"));
                let mut dofs = Vec::new();
                let mut d2 = Vec::new();
                self.space.cell_global_dofs(k1, &mut dofs);
                self.space.cell_global_dofs(k2, &mut d2);
                dofs.extend_from_slice(&d2);
                let s = &mats[face.normal.index()];
                let coeffs = self.local_coefficients(&dofs, u);
                let n = dofs.len();
                let mut res = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += s[(i, j)] * coeffs[j];
                    }
                    res[i] = acc;
                }
                let jac = if with_jac {
                    let mut j = vec![0.0; n * n];
                    for r in 0..n {
                        for c in 0..n {
                            j[r * n + c] = s[(r, c)];
                        }
                    }
                    j
                } else {
                    Vec::new()
                };
                Local { dofs, res, jac }
            })
            .collect()
    }

    fn assemble(&self, frame: &Frame, u: &[f64], with_jac: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        let n = self.space.total_dofs();
        assert_eq!(u.len(), n, "state length");
        let active: Vec<usize> = frame.classification.active_cells().collect();
        let cells = active
            .par_iter()
            .map(|&c| self.cell_local(frame, c, u, with_jac))
            .collect::<Result<Vec<_>>>()?;
        let patches = self.patch_locals(frame, u, with_jac);

        let mut res = vec![0.0; n];
        let cap: usize = if with_jac {
            cells.iter().chain(&patches).map(|l| l.jac.len()).sum()
        } else {
            0
        };
        let mut trip = Triplets::with_capacity(n, n, cap);
        // Sequential scatter keeps the summation order independent of the thread count.
        for local in cells.iter().chain(&patches) {
            let m = local.dofs.len();
            for (a, &ga) in local.dofs.iter().enumerate() {
                res[ga] += local.res[a];
                if with_jac {
                    for (b, &gb) in local.dofs.iter().enumerate() {
                        trip.push(ga, gb, local.jac[a * m + b]);
                    }
                }
            }
        }
        let jac = with_jac.then(|| {
            // Make sure every diagonal entry exists (rigid-only DoFs outside the stabilization set).
            for i in 0..n {
                trip.push(i, i, 0.0);
            }
            trip.to_csr()
        });
        Ok((res, jac))
    }

    /// Spatial residual `A_h^s(u)(·) − L_h(·)` at the frame's time.
    pub fn spatial_residual(&self, frame: &Frame, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(frame, u, false)?.0)
    }

    pub fn spatial_residual_and_jacobian(&self, frame: &Frame, u: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let (r, j) = self.assemble(frame, u, true)?;
        Ok((r, j.expect("jacobian requested")))
    }

    /// Ghost-penalty matrix alone.
    pub fn ghost_penalty_matrix(&self, frame: &Frame) -> CsrMatrix {
        let n = self.space.total_dofs();
        let zero = vec![0.0; n];
        let mut trip = Triplets::new(n, n);
        for local in self.patch_locals(frame, &zero, true) {
            let m = local.dofs.len();
            for (a, &ga) in local.dofs.iter().enumerate() {
                for (b, &gb) in local.dofs.iter().enumerate() {
                    trip.push(ga, gb, local.jac[a * m + b]);
                }
            }
        }
        trip.to_csr()
    }

    /// Velocity mass matrix over the fluid domain (pressure rows empty).
    pub fn mass_matrix(&self, frame: &Frame) -> Result<CsrMatrix> {
        let n = self.space.total_dofs();
        let nv = self.vbasis.n_dofs();
        let active: Vec<usize> = frame.classification.active_cells().collect();
        let locals = active
            .par_iter()
            .map(|&cell| {
                let mut dofs = Vec::new();
                self.space.cell_global_dofs(cell, &mut dofs);
                let m = self.with_volume_tables(frame, cell, |refs, weights, vt, _| {
                    let mut m = vec![0.0; nv * nv];
                    for q in 0..refs.len() {
                        let phi = vt.value(q);
                        for i in 0..nv {
                            let wi = weights[q] * phi[i];
                            for j in 0..nv {
                                m[i * nv + j] += wi * phi[j];
                            }
                        }
                    }
                    m
                })?;
                Ok((dofs, m))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut trip = Triplets::with_capacity(n, n, locals.len() * 2 * nv * nv);
        for (dofs, m) in &locals {
            for c in 0..2 {
                for i in 0..nv {
                    for j in 0..nv {
                        trip.push(dofs[c * nv + i], dofs[c * nv + j], m[i * nv + j]);
                    }
                }
            }
        }
        Ok(trip.to_csr())
    }

    /// Nodal interpolation of velocity and pressure fields.
    pub fn interpolate(&self, v: impl Fn(&Point) -> Vector2<f64>, p: impl Fn(&Point) -> f64) -> Vec<f64> {
        let nv = self.space.n_velocity();
        let mut u = vec![0.0; self.space.total_dofs()];
        for d in 0..nv {
            let x = self.space.velocity.node_coordinates(&self.mesh, d);
            let val = v(&x);
            u[d] = val.x;
            u[nv + d] = val.y;
        }
        let off = self.space.p_offset();
        for d in 0..self.space.n_pressure() {
            let x = self.space.pressure.node_coordinates(&self.mesh, d);
            u[off + d] = p(&x);
        }
        u
    }

    /// Evaluates velocity, velocity gradient and pressure of `u` at `x` using
    /// the polynomial of `cell` (which need not contain `x`).
    pub fn evaluate_in_cell(&self, u: &[f64], cell: usize, x: &Point) -> PointState {
        let xi = to_reference(&self.mesh, cell, x);
        let nv = self.vbasis.n_dofs();
        let np = self.pbasis.n_dofs();
        let mut phi = vec![0.0; nv];
        let mut grad = vec![Vector2::zeros(); nv];
        let mut zeta = vec![0.0; np];
        let mut pg = vec![Vector2::zeros(); np];
        self.vbasis.eval(&xi, &mut phi, &mut grad);
        for g in &mut grad {
            g.x /= self.mesh.hx;
            g.y /= self.mesh.hy;
        }
        self.pbasis.eval(&xi, &mut zeta, &mut pg);
        let mut dofs = Vec::new();
        self.space.cell_global_dofs(cell, &mut dofs);
        let coeffs = self.local_coefficients(&dofs, u);
        point_state(
            &PointBasis {
                phi: &phi,
                grad_phi: &grad,
                zeta: &zeta,
            },
            &coeffs,
        )
    }

    /// Evaluates `u` at `x` in the cell containing it.
    pub fn evaluate(&self, u: &[f64], x: &Point) -> PointState {
        self.evaluate_in_cell(u, self.mesh.locate(x), x)
    }

    /// Volume rule of the fluid part of an active cell in physical coordinates.
    pub fn fluid_rule(&self, frame: &Frame, cell: usize) -> Result<QuadratureRule> {
        self.with_volume_tables(frame, cell, |refs, weights, _, _| QuadratureRule {
            points: refs.iter().map(|xi| self.physical(cell, xi)).collect(),
            weights: weights.to_vec(),
        })
    }

    /// Area of the fluid domain and integral of the discrete pressure over it.
    pub fn pressure_integral(&self, frame: &Frame, u: &[f64]) -> Result<(f64, f64)> {
        let active: Vec<usize> = frame.classification.active_cells().collect();
        let mut area = 0.0;
        let mut integral = 0.0;
        for cell in active {
            let mut dofs = Vec::new();
            self.space.cell_global_dofs(cell, &mut dofs);
            let coeffs = self.local_coefficients(&dofs, u);
            let nv2 = 2 * self.vbasis.n_dofs();
            let (a, i) = self.with_volume_tables(frame, cell, |refs, weights, _, pt| {
                let (mut a, mut s) = (0.0, 0.0);
                for q in 0..refs.len() {
                    let p: f64 = pt.value(q).iter().zip(&coeffs[nv2..]).map(|(z, c)| z * c).sum();
                    a += weights[q];
                    s += weights[q] * p;
                }
                (a, s)
            })?;
            area += a;
            integral += i;
        }
        Ok((area, integral))
    }

    /// Subtracts the fluid-domain mean from the pressure.
    pub fn remove_pressure_mean(&self, frame: &Frame, u: &mut [f64]) -> Result<()> {
        let (area, integral) = self.pressure_integral(frame, u)?;
        let mean = integral / area;
        let off = self.space.p_offset();
        for p in &mut u[off..] {
            *p -= mean;
        }
        Ok(())
    }

}

impl SpatialProblem for NavierStokesProblem {
    type Frame = Frame;

    fn n_dofs(&self) -> usize {
        self.space.total_dofs()
    }

    fn frame(&self, t: f64) -> Result<Frame> {
        self.build_frame(t)
    }

    fn mass(&self, frame: &Frame) -> Result<CsrMatrix> {
        self.mass_matrix(frame)
    }

    fn residual(&self, frame: &Frame, u: &[f64]) -> Result<Vec<f64>> {
        self.spatial_residual(frame, u)
    }

    fn residual_and_jacobian(&self, frame: &Frame, u: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        self.spatial_residual_and_jacobian(frame, u)
    }

    fn pinned_dofs(&self) -> Vec<usize> {
        if self.pin_pressure {
            vec![self.space.p_offset() + self.space.pressure.lattice_dof(0, 0)]
        } else {
            Vec::new()
        }
    }

    fn normalize(&self, t: f64, u: &mut [f64]) -> Result<()> {
        if self.pin_pressure {
            let frame = self.build_frame(t)?;
            self.remove_pressure_mean(&frame, u)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
