//! Structured quadrilateral background mesh and continuous `Q_r` degree-of-freedom maps.
//!
//! Cells are numbered `i + nx * j` for the cell in column `i` and row `j`.
//! Scalar nodes of a degree-`r` space live on the `(r*nx + 1) x (r*ny + 1)`
//! lattice and are numbered x-major: `ix * (r*ny + 1) + iy`. Inside a cell the
//! local node `(a, b)` has local index `a + (r + 1) * b`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }

    /// Euclidean distance from `p` to the closed rectangle (zero inside).
    pub fn distance_to(&self, p: &Point) -> f64 {
        let dx = (self.x_min - p.x).max(0.0).max(p.x - self.x_max);
        let dy = (self.y_min - p.y).max(0.0).max(p.y - self.y_max);
        dx.hypot(dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Inflow,
    Wall,
    Outflow,
}

impl BoundaryKind {
    /// Dirichlet parts carry Nitsche terms; the outflow is do-nothing.
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryKind::Outflow)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn outward_normal(self) -> Point {
        match self {
            Side::Left => Point::new(-1.0, 0.0),
            Side::Right => Point::new(1.0, 0.0),
            Side::Bottom => Point::new(0.0, -1.0),
            Side::Top => Point::new(0.0, 1.0),
        }
    }
}

/// Boundary condition type per side of the pipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTags {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
    pub bottom: BoundaryKind,
    pub top: BoundaryKind,
}

impl Default for BoundaryTags {
    fn default() -> Self {
        BoundaryTags {
            left: BoundaryKind::Inflow,
            right: BoundaryKind::Outflow,
            bottom: BoundaryKind::Wall,
            top: BoundaryKind::Wall,
        }
    }
}

impl BoundaryTags {
    pub fn all(kind: BoundaryKind) -> Self {
        BoundaryTags {
            left: kind,
            right: kind,
            bottom: kind,
            top: kind,
        }
    }

    pub fn get(&self, side: Side) -> BoundaryKind {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn has_outflow(&self) -> bool {
        Side::ALL
            .iter()
            .any(|&s| self.get(s) == BoundaryKind::Outflow)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

/// A mesh face. `normal` is the axis the face is perpendicular to; `lower`
/// is the cell on the negative side, `upper` the one on the positive side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub normal: Axis,
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    pub boundary: Option<(Side, BoundaryKind)>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.lower.is_some() && self.upper.is_some()
    }

    pub fn neighbor_of(&self, cell: usize) -> Option<usize> {
        match (self.lower, self.upper) {
            (Some(a), Some(b)) if a == cell => Some(b),
            (Some(a), Some(b)) if b == cell => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub extent: Rect,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub tags: BoundaryTags,
    faces: Vec<Face>,
}

impl BackgroundMesh {
    pub fn new(extent: Rect, nx: usize, ny: usize) -> Result<Self> {
        Self::with_tags(extent, nx, ny, BoundaryTags::default())
    }

    pub fn with_tags(extent: Rect, nx: usize, ny: usize, tags: BoundaryTags) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!(
                "cell counts must be positive, got {nx} x {ny}"
            )));
        }
        if !(extent.width() > 0.0 && extent.height() > 0.0)
            || !extent.width().is_finite()
            || !extent.height().is_finite()
        {
            return Err(Error::InvalidMesh(format!("degenerate extent {extent:?}")));
        }
        let hx = extent.width() / nx as f64;
        let hy = extent.height() / ny as f64;

        let mut faces = Vec::with_capacity((nx + 1) * ny + nx * (ny + 1));
        for j in 0..ny {
            for i in 0..=nx {
                let lower = (i > 0).then(|| i - 1 + nx * j);
                let upper = (i < nx).then(|| i + nx * j);
                let boundary = if i == 0 {
                    Some((Side::Left, tags.left))
                } else if i == nx {
                    Some((Side::Right, tags.right))
                } else {
                    None
                };
                faces.push(Face {
                    normal: Axis::X,
                    lower,
                    upper,
                    boundary,
                });
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let lower = (j > 0).then(|| i + nx * (j - 1));
                let upper = (j < ny).then(|| i + nx * j);
                let boundary = if j == 0 {
                    Some((Side::Bottom, tags.bottom))
                } else if j == ny {
                    Some((Side::Top, tags.top))
                } else {
                    None
                };
                faces.push(Face {
                    normal: Axis::Y,
                    lower,
                    upper,
                    boundary,
                });
            }
        }

        Ok(BackgroundMesh {
            extent,
            nx,
            ny,
            hx,
            hy,
            tags,
            faces,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Mesh size used in penalty scalings.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn cell_origin(&self, cell: usize) -> Point {
        let (i, j) = self.cell_ij(cell);
        Point::new(
            self.extent.x_min + i as f64 * self.hx,
            self.extent.y_min + j as f64 * self.hy,
        )
    }

    pub fn cell_rect(&self, cell: usize) -> Rect {
        let o = self.cell_origin(cell);
        Rect::new(o.x, o.x + self.hx, o.y, o.y + self.hy)
    }

    /// Counter-clockwise corners starting at the lower-left one.
    pub fn cell_corners(&self, cell: usize) -> [Point; 4] {
        let o = self.cell_origin(cell);
        [
            o,
            Point::new(o.x + self.hx, o.y),
            Point::new(o.x + self.hx, o.y + self.hy),
            Point::new(o.x, o.y + self.hy),
        ]
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        self.cell_origin(cell) + Point::new(0.5 * self.hx, 0.5 * self.hy)
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, index: usize) -> &Face {
        &self.faces[index]
    }

    /// Faces of a cell in the order left, right, bottom, top.
    pub fn cell_faces(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        let vertical = |i: usize| i + (self.nx + 1) * j;
        let offset = (self.nx + 1) * self.ny;
        let horizontal = |j: usize| offset + i + self.nx * j;
        [vertical(i), vertical(i + 1), horizontal(j), horizontal(j + 1)]
    }

    /// The cell containing `p`; points on shared edges go to the upper/right cell,
    /// points outside are clamped to the nearest cell.
    pub fn locate(&self, p: &Point) -> usize {
        let fi = ((p.x - self.extent.x_min) / self.hx).floor();
        let fj = ((p.y - self.extent.y_min) / self.hy).floor();
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        self.cell_index(i, j)
    }

    /// Boundary faces with their side and tag.
    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.boundary.is_some())
    }
}

/// Global numbering of a scalar continuous `Q_r` space.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub degree: usize,
    pub nodes_x: usize,
    pub nodes_y: usize,
    cell_dofs: Vec<usize>,
    per_cell: usize,
}

impl DofMap {
    pub fn new(mesh: &BackgroundMesh, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidDiscretization(
                "continuous Lagrange spaces need degree >= 1".into(),
            ));
        }
        let r = degree;
        let nodes_x = r * mesh.nx + 1;
        let nodes_y = r * mesh.ny + 1;
        let per_cell = (r + 1) * (r + 1);
        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * per_cell);
        for cell in 0..mesh.n_cells() {
            let (i, j) = mesh.cell_ij(cell);
            for b in 0..=r {
                for a in 0..=r {
                    let gx = r * i + a;
                    let gy = r * j + b;
                    cell_dofs.push(gx * nodes_y + gy);
                }
            }
        }
        Ok(DofMap {
            degree,
            nodes_x,
            nodes_y,
            cell_dofs,
            per_cell,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes_x * self.nodes_y
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.per_cell..(cell + 1) * self.per_cell]
    }

    /// Lattice indices `(ix, iy)` of a global node.
    pub fn node_lattice(&self, dof: usize) -> (usize, usize) {
        (dof / self.nodes_y, dof % self.nodes_y)
    }

    pub fn node_coordinates(&self, mesh: &BackgroundMesh, dof: usize) -> Point {
        let (ix, iy) = self.node_lattice(dof);
        let r = self.degree as f64;
        Point::new(
            mesh.extent.x_min + ix as f64 * mesh.hx / r,
            mesh.extent.y_min + iy as f64 * mesh.hy / r,
        )
    }

    /// Global index of the node at lattice position `(ix, iy)`.
    pub fn lattice_dof(&self, ix: usize, iy: usize) -> usize {
        ix * self.nodes_y + iy
    }
}

/// Inf-sup stable `Q_r / Q_{r-1}` pair. Global vector layout:
/// `[v_x (n_v) | v_y (n_v) | p (n_p)]`.
#[derive(Clone, Debug)]
pub struct TaylorHoodSpace {
    pub velocity: DofMap,
    pub pressure: DofMap,
}

impl TaylorHoodSpace {
    pub fn new(mesh: &BackgroundMesh, r: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidDiscretization(format!(
                "Taylor-Hood pairs need velocity degree r >= 2, got {r}"
            )));
        }
        Ok(TaylorHoodSpace {
            velocity: DofMap::new(mesh, r)?,
            pressure: DofMap::new(mesh, r - 1)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.velocity.degree
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    pub fn total_dofs(&self) -> usize {
        2 * self.n_velocity() + self.n_pressure()
    }

    pub fn vx_offset(&self) -> usize {
        0
    }

    pub fn vy_offset(&self) -> usize {
        self.n_velocity()
    }

    pub fn p_offset(&self) -> usize {
        2 * self.n_velocity()
    }

    /// Number of local unknowns on one cell.
    pub fn local_size(&self) -> usize {
        2 * self.velocity.dofs_per_cell() + self.pressure.dofs_per_cell()
    }

    /// Global indices of the local unknowns of `cell` in the layout
    /// `[v_x | v_y | p]`.
    pub fn cell_global_dofs(&self, cell: usize, out: &mut Vec<usize>) {
        out.clear();
        let nv = self.n_velocity();
        let vd = self.velocity.cell_dofs(cell);
        out.extend_from_slice(vd);
        out.extend(vd.iter().map(|d| d + nv));
        out.extend(self.pressure.cell_dofs(cell).iter().map(|d| d + 2 * nv));
    }
}

pub fn build_mesh(extent: Rect, n_cells_x: usize, n_cells_y: usize) -> Result<BackgroundMesh> {
    BackgroundMesh::new(extent, n_cells_x, n_cells_y)
}

pub fn build_taylor_hood(mesh: &BackgroundMesh, r: usize) -> Result<TaylorHoodSpace> {
    TaylorHoodSpace::new(mesh, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_two_by_two() {
        let mesh = build_mesh(Rect::unit(), 2, 2).unwrap();
        assert_eq!(mesh.n_cells(), 4);
        assert_eq!(mesh.faces().len(), 12);
        let interior = mesh.faces().iter().filter(|f| f.is_interior()).count();
        assert_eq!(interior, 4);
        assert_eq!(mesh.faces().len() - interior, 8);
        assert_eq!(mesh.h(), 0.5);
    }

    #[test]
    fn pipe_three_by_one() {
        let mesh = build_mesh(Rect::new(0.0, 3.0, 0.0, 1.0), 3, 1).unwrap();
        assert_eq!(mesh.n_cells(), 3);
        assert_eq!(mesh.hx, 1.0);
        assert_eq!(mesh.hy, 1.0);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            build_mesh(Rect::unit(), 0, 2),
            Err(Error::InvalidMesh(_))
        ));
        assert!(build_mesh(Rect::new(0.0, 0.0, 0.0, 1.0), 2, 2).is_err());
    }

    #[test]
    fn boundary_tags_are_positional() {
        let mesh = build_mesh(Rect::unit(), 3, 2).unwrap();
        for (_, face) in mesh.boundary_faces() {
            let (side, kind) = face.boundary.unwrap();
            let expected = match side {
                Side::Left => BoundaryKind::Inflow,
                Side::Right => BoundaryKind::Outflow,
                Side::Bottom | Side::Top => BoundaryKind::Wall,
            };
            assert_eq!(kind, expected);
            assert!(!face.is_interior());
        }
        let tagged = BackgroundMesh::with_tags(Rect::unit(), 2, 2, BoundaryTags::all(BoundaryKind::Wall)).unwrap();
        assert!(tagged
            .boundary_faces()
            .all(|(_, f)| f.boundary.unwrap().1 == BoundaryKind::Wall));
    }

    #[test]
    fn face_adjacency_is_symmetric() {
        let mesh = build_mesh(Rect::new(-1.0, 2.0, 0.0, 1.0), 5, 3).unwrap();
        for cell in 0..mesh.n_cells() {
            for f in mesh.cell_faces(cell) {
                let face = mesh.face(f);
                assert!(face.lower == Some(cell) || face.upper == Some(cell));
                if let Some(nb) = face.neighbor_of(cell) {
                    assert!(mesh.cell_faces(nb).contains(&f));
                    assert_eq!(face.neighbor_of(nb), Some(cell));
                }
            }
        }
    }

    #[test]
    fn taylor_hood_counts() {
        let mesh = build_mesh(Rect::unit(), 2, 2).unwrap();
        let th = build_taylor_hood(&mesh, 2).unwrap();
        assert_eq!(th.n_velocity(), 25);
        assert_eq!(th.n_pressure(), 9);
        assert_eq!(th.total_dofs(), 59);

        let mesh = build_mesh(Rect::unit(), 1, 1).unwrap();
        assert_eq!(build_taylor_hood(&mesh, 2).unwrap().total_dofs(), 22);
        assert!(build_taylor_hood(&mesh, 1).is_err());
    }

    #[test]
    fn shared_face_dofs_coincide() {
        let mesh = build_mesh(Rect::unit(), 3, 2).unwrap();
        let map = DofMap::new(&mesh, 3).unwrap();
        let r = 3;
        for j in 0..mesh.ny {
            for i in 0..mesh.nx - 1 {
                let left = map.cell_dofs(mesh.cell_index(i, j));
                let right = map.cell_dofs(mesh.cell_index(i + 1, j));
                for b in 0..=r {
                    assert_eq!(left[r + (r + 1) * b], right[(r + 1) * b]);
                }
            }
        }
        for cell in 0..mesh.n_cells() {
            let corners = mesh.cell_corners(cell);
            let dofs = map.cell_dofs(cell);
            assert!((map.node_coordinates(&mesh, dofs[0]) - corners[0]).norm() < 1e-14);
            assert!((map.node_coordinates(&mesh, dofs[dofs.len() - 1]) - corners[2]).norm() < 1e-14);
        }
    }

    #[test]
    fn locate_points() {
        let mesh = build_mesh(Rect::new(0.0, 3.0, -0.5, 0.5), 6, 2).unwrap();
        assert_eq!(mesh.locate(&Point::new(0.1, -0.4)), 0);
        assert_eq!(mesh.locate(&Point::new(2.99, 0.49)), mesh.n_cells() - 1);
        assert_eq!(mesh.locate(&Point::new(3.0, 0.5)), mesh.n_cells() - 1);
        let c = mesh.locate(&Point::new(1.25, 0.2));
        assert!(mesh.cell_rect(c).contains(&Point::new(1.25, 0.2), 0.0));
    }
}
