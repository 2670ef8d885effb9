//! Level-set description of the rigid body, cell classification and cut topology.
//!
//! The level set is positive in the fluid, negative inside the body and zero
//! on its boundary.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BackgroundMesh, Point, Rect};

/// Relative tolerance of the sign tests, multiplied by the mesh size.
pub const CLASSIFICATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

/// Prescribed motion of the body centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RigidMotion {
    Fixed {
        center: [f64; 2],
    },
    /// `x_r(t) = x_r(0) + (A sin(ωt), 0)`.
    HarmonicX {
        center0: [f64; 2],
        amplitude: f64,
        omega: f64,
    },
}

impl RigidMotion {
    pub fn center_at(&self, t: f64) -> Point {
        match *self {
            RigidMotion::Fixed { center } => Point::new(center[0], center[1]),
            RigidMotion::HarmonicX {
                center0,
                amplitude,
                omega,
            } => Point::new(center0[0] + amplitude * (omega * t).sin(), center0[1]),
        }
    }

    /// Exact time derivative of [`RigidMotion::center_at`].
    pub fn velocity_at(&self, t: f64) -> Vector2<f64> {
        match *self {
            RigidMotion::Fixed { .. } => Vector2::zeros(),
            RigidMotion::HarmonicX {
                amplitude, omega, ..
            } => Vector2::new(amplitude * omega * (omega * t).cos(), 0.0),
        }
    }

    /// Bounding box of all centre positions over time.
    pub fn center_range(&self) -> Rect {
        match *self {
            RigidMotion::Fixed { center } => Rect::new(center[0], center[0], center[1], center[1]),
            RigidMotion::HarmonicX {
                center0, amplitude, ..
            } => Rect::new(
                center0[0] - amplitude.abs(),
                center0[0] + amplitude.abs(),
                center0[1],
                center0[1],
            ),
        }
    }
}

pub trait LevelSet: Send + Sync {
    fn value(&self, x: &Point, t: f64) -> f64;

    fn gradient(&self, x: &Point, t: f64) -> Vector2<f64>;

    /// Velocity of the body material at `x` (zero for static geometry).
    fn body_velocity(&self, _x: &Point, _t: f64) -> Vector2<f64> {
        Vector2::zeros()
    }

    /// The zero level set as an exact circle, when it is one. Enables the
    /// analytic quadrature paths.
    fn as_circle(&self, _t: f64) -> Option<Circle> {
        None
    }

    /// Whether a body is present at all.
    fn has_body(&self) -> bool {
        true
    }
}

/// `θ(x, t) = |x − x_r(t)| − ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MovingCircle {
    pub motion: RigidMotion,
    pub radius: f64,
}

impl LevelSet for MovingCircle {
    fn value(&self, x: &Point, t: f64) -> f64 {
        (x - self.motion.center_at(t)).norm() - self.radius
    }

    fn gradient(&self, x: &Point, t: f64) -> Vector2<f64> {
        let d = x - self.motion.center_at(t);
        let n = d.norm();
        if n == 0.0 {
            Vector2::zeros()
        } else {
            d / n
        }
    }

    fn body_velocity(&self, _x: &Point, t: f64) -> Vector2<f64> {
        self.motion.velocity_at(t)
    }

    fn as_circle(&self, t: f64) -> Option<Circle> {
        Some(Circle {
            center: self.motion.center_at(t),
            radius: self.radius,
        })
    }
}

/// `θ(x) = a·x + b·y + c`, fixed in time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearLevelSet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LevelSet for LinearLevelSet {
    fn value(&self, x: &Point, _t: f64) -> f64 {
        self.a * x.x + self.b * x.y + self.c
    }

    fn gradient(&self, _x: &Point, _t: f64) -> Vector2<f64> {
        Vector2::new(self.a, self.b)
    }
}

/// `θ ≡ 1`: the whole mesh is fluid.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoBody;

impl LevelSet for NoBody {
    fn value(&self, _x: &Point, _t: f64) -> f64 {
        1.0
    }

    fn gradient(&self, _x: &Point, _t: f64) -> Vector2<f64> {
        Vector2::zeros()
    }

    fn has_body(&self) -> bool {
        false
    }
}

/// Shared handle to a level set.
#[derive(Clone)]
pub struct LevelSetGeometry {
    inner: Arc<dyn LevelSet>,
}

impl fmt::Debug for LevelSetGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetGeometry")
            .field("has_body", &self.inner.has_body())
            .finish()
    }
}

impl LevelSetGeometry {
    pub fn new(level_set: impl LevelSet + 'static) -> Self {
        LevelSetGeometry {
            inner: Arc::new(level_set),
        }
    }

    pub fn circle(motion: RigidMotion, radius: f64) -> Self {
        Self::new(MovingCircle { motion, radius })
    }

    pub fn none() -> Self {
        Self::new(NoBody)
    }

    pub fn value(&self, x: &Point, t: f64) -> f64 {
        self.inner.value(x, t)
    }

    pub fn gradient(&self, x: &Point, t: f64) -> Vector2<f64> {
        self.inner.gradient(x, t)
    }

    pub fn body_velocity(&self, x: &Point, t: f64) -> Vector2<f64> {
        self.inner.body_velocity(x, t)
    }

    pub fn as_circle(&self, t: f64) -> Option<Circle> {
        self.inner.as_circle(t)
    }

    pub fn has_body(&self) -> bool {
        self.inner.has_body()
    }
}

/// Outward unit normal of the fluid domain on the body boundary, pointing into the body.
pub fn fluid_normal(geom: &LevelSetGeometry, x: &Point, t: f64) -> Result<Vector2<f64>> {
    let g = geom.gradient(x, t);
    let n = g.norm();
    if n < 1e-12 {
        return Err(Error::DegenerateLevelSet { x: x.x, y: x.y });
    }
    Ok(-g / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Fluid,
    Rigid,
    Cut,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Fluid => "fluid",
            CellKind::Rigid => "rigid",
            CellKind::Cut => "cut",
        }
    }

    pub fn in_stabilization_set(self) -> bool {
        !matches!(self, CellKind::Fluid)
    }
}

#[derive(Clone, Debug)]
pub struct CellClassification {
    pub t: f64,
    pub kinds: Vec<CellKind>,
    pub fluid: Vec<usize>,
    pub rigid: Vec<usize>,
    pub cut: Vec<usize>,
    /// Interior faces whose two neighbours are both rigid or cut.
    pub stabilization_faces: Vec<usize>,
}

impl CellClassification {
    pub fn kind(&self, cell: usize) -> CellKind {
        self.kinds[cell]
    }

    /// Cells carrying fluid volume integrals (fluid and cut cells).
    pub fn active_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| !matches!(k, CellKind::Rigid))
            .map(|(c, _)| c)
    }

    pub fn stabilization_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| k.in_stabilization_set())
            .map(|(c, _)| c)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.fluid.len(), self.rigid.len(), self.cut.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SignState {
    In,
    On,
    Out,
}

fn state(theta: f64, eps: f64) -> SignState {
    if theta < -eps {
        SignState::In
    } else if theta > eps {
        SignState::Out
    } else {
        SignState::On
    }
}

/// Number of interior sample points per edge used for hidden-crossing checks
/// when no analytic shape is available.
const EDGE_SAMPLES: usize = 7;

fn under_resolved(t: f64, cell: usize, reason: impl Into<String>) -> Error {
    Error::GeometryUnderResolved {
        t,
        cell,
        reason: reason.into(),
    }
}

/// Distance from `p` to the segment `[a, b]`.
fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let d = b - a;
    let s = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (p - (a + s * d)).norm()
}

/// Whether the body boundary crosses the segment `[a, b]` twice although both
/// endpoints carry the same sign.
fn hidden_crossing(geom: &LevelSetGeometry, a: &Point, b: &Point, t: f64, eps: f64) -> bool {
    let sa = geom.value(a, t);
    if let Some(c) = geom.as_circle(t) {
        return sa > 0.0 && segment_distance(&c.center, a, b) < c.radius - eps;
    }
    let fluid_side = sa >= -eps;
    (1..=EDGE_SAMPLES).any(|k| {
        let s = k as f64 / (EDGE_SAMPLES + 1) as f64;
        let v = geom.value(&(a + s * (b - a)), t);
        if fluid_side {
            v < -eps
        } else {
            v > eps
        }
    })
}

/// Classifies every mesh cell as fluid, rigid or cut at time `t`.
///
/// Samples at the four corners and the centre with tolerance `ε = 1e-10 h`.
/// Samples within `ε` of zero are neutral: a cell without rigid samples is
/// fluid, a cell without fluid samples is rigid.
pub fn classify_cells(
    mesh: &BackgroundMesh,
    geom: &LevelSetGeometry,
    t: f64,
) -> Result<CellClassification> {
    let eps = CLASSIFICATION_TOL * mesh.h();
    let n = mesh.n_cells();
    let mut kinds = Vec::with_capacity(n);
    let circle = geom.as_circle(t);

    for cell in 0..n {
        if !geom.has_body() {
            kinds.push(CellKind::Fluid);
            continue;
        }
        let corners = mesh.cell_corners(cell);
        let center = mesh.cell_center(cell);
        let states: Vec<SignState> = corners
            .iter()
            .chain(std::iter::once(&center))
            .map(|p| state(geom.value(p, t), eps))
            .collect();
        let any_in = states.contains(&SignState::In);
        let any_out = states.contains(&SignState::Out);
        let kind = match (any_in, any_out) {
            (false, _) => CellKind::Fluid,
            (true, false) => CellKind::Rigid,
            (true, true) => CellKind::Cut,
        };

        let kind = match (kind, circle) {
            // A cap of the circle entering through one edge.
            (CellKind::Fluid, Some(c)) if mesh.cell_rect(cell).distance_to(&c.center) < c.radius - eps => CellKind::Cut,
            _ => kind,
        };
        match kind {
            CellKind::Fluid if circle.is_none() => {
                if (0..4).any(|e| hidden_crossing(geom, &corners[e], &corners[(e + 1) % 4], t, eps)) {
                    return Err(under_resolved(
                        t,
                        cell,
                        "body intersects the cell without covering a corner or its centre",
                    ));
                }
            }
            CellKind::Rigid if circle.is_none() => {
                if (0..4).any(|e| hidden_crossing(geom, &corners[e], &corners[(e + 1) % 4], t, eps)) {
                    return Err(under_resolved(t, cell, "fluid enters a rigid cell through an edge"));
                }
            }
            _ => {}
        }
        kinds.push(kind);
    }

    let mut fluid = Vec::new();
    let mut rigid = Vec::new();
    let mut cut = Vec::new();
    for (c, k) in kinds.iter().enumerate() {
        match k {
            CellKind::Fluid => fluid.push(c),
            CellKind::Rigid => rigid.push(c),
            CellKind::Cut => cut.push(c),
        }
    }

    let stabilization_faces = mesh
        .faces()
        .iter()
        .enumerate()
        .filter_map(|(f, face)| match (face.lower, face.upper) {
            (Some(a), Some(b))
                if kinds[a].in_stabilization_set() && kinds[b].in_stabilization_set() =>
            {
                Some(f)
            }
            _ => None,
        })
        .collect();

    let classification = CellClassification {
        t,
        kinds,
        fluid,
        rigid,
        cut,
        stabilization_faces,
    };
    // Validate the cut topology eagerly so the under-resolution error surfaces here.
    for &c in &classification.cut {
        cut_pieces(mesh, c, geom, t)?;
    }
    Ok(classification)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutArchetype {
    Triangle,
    Quadrilateral,
    Pentagon,
}

/// Intersection of the zero level set with one cell edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeIntersection {
    /// Edge index: 0 bottom, 1 right, 2 top, 3 left.
    pub edge: usize,
    pub point: Point,
}

#[derive(Clone, Debug)]
pub struct CutCellGeometry {
    pub cell: usize,
    pub t: f64,
    pub rect: Rect,
    /// Corners in the order `(x0,y0), (x1,y0), (x1,y1), (x0,y1)`.
    pub corners: [Point; 4],
    pub fluid_corners: [bool; 4],
    pub intersections: [EdgeIntersection; 2],
    pub archetype: CutArchetype,
    pub circle: Option<Circle>,
    pub geometry: LevelSetGeometry,
    /// Mesh size of the owning mesh.
    pub h: f64,
}

impl CutCellGeometry {
    pub fn value(&self, x: &Point) -> f64 {
        self.geometry.value(x, self.t)
    }

    pub fn n_fluid_corners(&self) -> usize {
        self.fluid_corners.iter().filter(|&&f| f).count()
    }

    /// Length of the fluid part of each edge (bottom, right, top, left).
    pub fn fluid_edge_lengths(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (e, len) in out.iter_mut().enumerate() {
            let a = self.corners[e];
            let b = self.corners[(e + 1) % 4];
            let (fa, fb) = (self.fluid_corners[e], self.fluid_corners[(e + 1) % 4]);
            *len = match (fa, fb) {
                (true, true) => (b - a).norm(),
                (false, false) => 0.0,
                _ => {
                    let p = self
                        .intersections
                        .iter()
                        .find(|i| i.edge == e)
                        .map(|i| i.point)
                        .unwrap_or(if fa { b } else { a });
                    if fa {
                        (p - a).norm()
                    } else {
                        (b - p).norm()
                    }
                }
            };
        }
        out
    }
}

/// Root of `θ` on the edge from `a` (fluid side) to `b` (rigid side).
fn edge_root(geom: &LevelSetGeometry, a: &Point, b: &Point, t: f64, h: f64, eps: f64) -> Result<Point> {
    let fa = geom.value(a, t);
    let fb = geom.value(b, t);
    if fa <= 0.0 && fa >= -eps {
        return Ok(*a);
    }
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::GeometryInconsistent {
            cell: usize::MAX,
            reason: format!("edge endpoints do not bracket a root ({fa:e}, {fb:e})"),
        });
    }
    let d = b - a;
    let len = d.norm();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let tol = 1e-12 * h / len;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if geom.value(&(a + mid * d), t) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    let p = a + s * d;
    let slope = geom.gradient(&p, t).dot(&d);
    if slope.abs() > 0.0 {
        let candidate = s - geom.value(&p, t) / slope;
        if candidate >= lo - tol && candidate <= hi + tol {
            s = candidate.clamp(0.0, 1.0);
        }
    }
    Ok(a + s * d)
}

/// Edge intersections and archetype of a cut cell.
pub fn cut_topology(
    mesh: &BackgroundMesh,
    cell: usize,
    geom: &LevelSetGeometry,
    t: f64,
) -> Result<CutCellGeometry> {
    let h = mesh.h();
    let rect = mesh.cell_rect(cell);
    cut_topology_rect(rect, h, cell, geom, t)
}

/// As [`cut_topology`] for an explicit cell rectangle.
pub fn cut_topology_rect(
    rect: Rect,
    h: f64,
    cell: usize,
    geom: &LevelSetGeometry,
    t: f64,
) -> Result<CutCellGeometry> {
    let eps = CLASSIFICATION_TOL * h;
    let corners = [
        Point::new(rect.x_min, rect.y_min),
        Point::new(rect.x_max, rect.y_min),
        Point::new(rect.x_max, rect.y_max),
        Point::new(rect.x_min, rect.y_max),
    ];
    let fluid_corners = corners.map(|p| geom.value(&p, t) >= -eps);
    let n_fluid = fluid_corners.iter().filter(|&&f| f).count();
    if n_fluid == 0 || n_fluid == 4 {
        return Err(under_resolved(
            t,
            cell,
            "all corners on one side but the cell is cut (body smaller than a cell?)",
        ));
    }

    let mut found = Vec::with_capacity(2);
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let (fa, fb) = (fluid_corners[e], fluid_corners[(e + 1) % 4]);
        if fa != fb {
            let (fluid_end, rigid_end) = if fa { (a, b) } else { (b, a) };
            let p = edge_root(geom, &fluid_end, &rigid_end, t, h, eps).map_err(|e| match e {
                Error::GeometryInconsistent { reason, .. } => Error::GeometryInconsistent { cell, reason },
                other => other,
            })?;
            found.push(EdgeIntersection { edge: e, point: p });
        } else if hidden_crossing(geom, &a, &b, t, eps) {
            return Err(under_resolved(t, cell, format!("edge {e} is crossed twice")));
        }
    }
    if found.len() != 2 {
        return Err(under_resolved(
            t,
            cell,
            format!("{} edges are crossed, expected exactly 2", found.len()),
        ));
    }
    let archetype = match n_fluid {
        1 => CutArchetype::Triangle,
        2 => CutArchetype::Quadrilateral,
        _ => CutArchetype::Pentagon,
    };
    Ok(CutCellGeometry {
        cell,
        t,
        rect,
        corners,
        fluid_corners,
        intersections: [found[0], found[1]],
        archetype,
        circle: geom.as_circle(t),
        geometry: geom.clone(),
        h,
    })
}

/// Part of a cut cell: either entirely fluid or crossed by the boundary once.
#[derive(Clone, Debug)]
pub enum CutPiece {
    Fluid(Rect),
    Cut(CutCellGeometry),
}

/// Fluid pieces of a cut cell.
pub fn cut_pieces(mesh: &BackgroundMesh, cell: usize, geom: &LevelSetGeometry, t: f64) -> Result<Vec<CutPiece>> {
    cut_pieces_rect(mesh.cell_rect(cell), mesh.h(), cell, geom, t)
}

/// As [`cut_pieces`] for an explicit cell rectangle.
///
/// A circle can meet a cell in ways a single pair of edge crossings does not
/// describe: a cap entering through one edge, or a body smaller than the cell.
/// Such cells are split along the lines through the centre. Within one
/// quadrant the boundary is monotone in both coordinates, so every piece is
/// fluid, rigid, or crossed once.
pub fn cut_pieces_rect(rect: Rect, h: f64, cell: usize, geom: &LevelSetGeometry, t: f64) -> Result<Vec<CutPiece>> {
    let single = cut_topology_rect(rect, h, cell, geom, t);
    let circle = match (single, geom.as_circle(t)) {
        (Ok(g), _) => return Ok(vec![CutPiece::Cut(g)]),
        (Err(e), None) => return Err(e),
        (Err(e), Some(c)) => (e, c),
    };
    let (err, c) = circle;
    let eps = CLASSIFICATION_TOL * h;
    let splits = |lo: f64, hi: f64, mid: f64| {
        if mid > lo + eps && mid < hi - eps {
            vec![lo, mid, hi]
        } else {
            vec![lo, hi]
        }
    };
    let xs = splits(rect.x_min, rect.x_max, c.center.x);
    let ys = splits(rect.y_min, rect.y_max, c.center.y);
    if xs.len() == 2 && ys.len() == 2 {
        return Err(err);
    }
    let mut pieces = Vec::new();
    for wy in ys.windows(2) {
        for wx in xs.windows(2) {
            let sub = Rect::new(wx[0], wx[1], wy[0], wy[1]);
            if sub.distance_to(&c.center) >= c.radius - eps {
                pieces.push(CutPiece::Fluid(sub));
                continue;
            }
            let corners = [
                Point::new(sub.x_min, sub.y_min),
                Point::new(sub.x_max, sub.y_min),
                Point::new(sub.x_max, sub.y_max),
                Point::new(sub.x_min, sub.y_max),
            ];
            if corners.iter().all(|p| geom.value(p, t) <= eps) {
                continue;
            }
            pieces.push(CutPiece::Cut(cut_topology_rect(sub, h, cell, geom, t)?));
        }
    }
    Ok(pieces)
}
