use std::f64::consts::PI;

use super::*;
use crate::geometry::{LinearLevelSet, RigidMotion};
use crate::linalg::{dot, norm2};
use crate::mesh::{BoundaryTags, Rect};

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
}

fn problem(
    extent: Rect,
    nx: usize,
    ny: usize,
    tags: BoundaryTags,
    geometry: LevelSetGeometry,
    nu: f64,
    data: BoundaryData,
) -> NavierStokesProblem {
    let mesh = BackgroundMesh::with_tags(extent, nx, ny, tags).unwrap();
    NavierStokesProblem::new(
        mesh,
        2,
        geometry,
        FluidParameters::new(nu),
        NitscheConfig::default(),
        GhostPenaltyConfig::default(),
        data,
    )
    .unwrap()
}

fn open_tags() -> BoundaryTags {
    BoundaryTags::all(BoundaryKind::Outflow)
}

#[test]
fn zero_state_zero_residual() {
    let p = problem(Rect::unit(), 3, 3, BoundaryTags::default(), LevelSetGeometry::none(), 0.1, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let r = p.spatial_residual(&f, &vec![0.0; p.space.total_dofs()]).unwrap();
    assert!(r.iter().all(|&v| v == 0.0));
}

#[test]
fn constant_flow_with_matching_data_has_zero_residual() {
    let g: VectorField = Arc::new(|_, _| Vector2::new(1.0, 0.0));
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.51, 0.47] }, 0.2);
    let p = problem(Rect::unit(), 6, 6, BoundaryTags::default(), circle, 0.01, BoundaryData::uniform(g));
    let f = p.build_frame(0.0).unwrap();
    let u = p.interpolate(|_| Vector2::new(1.0, 0.0), |_| 0.0);
    let r = p.spatial_residual(&f, &u).unwrap();
    assert!(norm2(&r) < 1e-12, "{}", norm2(&r));
}

#[test]
fn viscous_energy_of_shear_flow() {
    let nu = 0.37;
    let p = problem(Rect::unit(), 4, 4, open_tags(), LevelSetGeometry::none(), nu, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let n = p.space.total_dofs();
    let (_, j) = p.spatial_residual_and_jacobian(&f, &vec![0.0; n]).unwrap();
    let u = p.interpolate(|x| Vector2::new(x.y, 0.0), |_| 0.0);
    let e = dot(&u, &j.matvec(&u));
    assert!((e - nu).abs() < 1e-13, "{e}");
}

#[test]
fn jacobian_matches_central_differences() {
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.52, 0.49] }, 0.23);
    let inflow: VectorField = Arc::new(|x, _| Vector2::new(4.0 * x.y * (1.0 - x.y), 0.0));
    let body: VectorField = Arc::new(|_, _| Vector2::new(0.3, -0.1));
    let data = BoundaryData {
        inflow,
        wall: zero_field(),
        body,
    };
    let mut p = problem(Rect::unit(), 7, 6, BoundaryTags::default(), circle, 0.05, data);
    p.params.body_force = Arc::new(|x, _| Vector2::new(x.y.sin(), x.x));
    let f = p.build_frame(0.0).unwrap();
    assert!(!f.classification.cut.is_empty());
    let n = p.space.total_dofs();
    let mut seed = 7;
    let u: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
    let (_, j) = p.spatial_residual_and_jacobian(&f, &u).unwrap();
    for _ in 0..3 {
        let e: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
        let eps = 1e-6;
        let up: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a + eps * b).collect();
        let um: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - eps * b).collect();
        let rp = p.spatial_residual(&f, &up).unwrap();
        let rm = p.spatial_residual(&f, &um).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let je = j.matvec(&e);
        let diff: Vec<f64> = fd.iter().zip(&je).map(|(a, b)| a - b).collect();
        let rel = norm2(&diff) / norm2(&je);
        assert!(rel < 1e-6, "relative error {rel}");
    }
}

#[test]
fn ghost_penalty_patch_example() {
    // Both cells of a 2x1 mesh are cut, so their shared face is stabilized.
    let geom = LevelSetGeometry::new(LinearLevelSet { a: 0.0, b: 1.0, c: -0.5 });
    let nu = 0.01;
    let p = problem(Rect::new(0.0, 2.0, 0.0, 1.0), 2, 1, open_tags(), geom, nu, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    assert_eq!(f.classification.stabilization_faces.len(), 1);
    let s = p.ghost_penalty_matrix(&f);
    assert!(s.asymmetry() < 1e-12);
    let u = p.interpolate(|x| Vector2::new(if x.x > 1.0 { (x.x - 1.0) * x.y } else { 0.0 }, 0.0), |_| 0.0);
    let val = dot(&u, &s.matvec(&u));
    let expect = p.ghost_penalty.gamma_v * (1.0 / nu + nu) * (2.0 / 9.0);
    assert!((val - expect).abs() < 1e-12 * expect, "{val} vs {expect}");
}

#[test]
fn ghost_penalty_kernel_is_patch_polynomials() {
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.5, 0.5] }, 0.3);
    let p = problem(Rect::unit(), 8, 8, open_tags(), circle, 0.1, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    assert!(!f.classification.stabilization_faces.is_empty());
    let s = p.ghost_penalty_matrix(&f);
    // A global Q2 x Q1 polynomial is a single polynomial on every patch.
    let u = p.interpolate(
        |x| Vector2::new(x.x * x.x * x.y - 3.0 * x.y * x.y, 1.0 + x.x * x.y * x.y),
        |x| 2.0 - x.x + 0.5 * x.x * x.y,
    );
    let su = s.matvec(&u);
    assert!(norm2(&su) < 1e-9 * norm2(&u), "{}", norm2(&su));
    // A field with a kink across the stabilized faces is penalized.
    let kink = p.interpolate(|x| Vector2::new((x.x - 0.5).abs(), 0.0), |x| (x.y - 0.5).abs());
    assert!(dot(&kink, &s.matvec(&kink)) > 1e-6);
}

#[test]
fn convection_is_skew_for_solenoidal_fields() {
    // v = curl(x(1−x)y(1−y)) lies in Q2, is divergence free and tangential on the boundary.
    let p = problem(Rect::unit(), 5, 5, open_tags(), LevelSetGeometry::none(), 1.0, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let n = p.space.total_dofs();
    let u = p.interpolate(
        |x| Vector2::new(x.x * (1.0 - x.x) * (1.0 - 2.0 * x.y), -(1.0 - 2.0 * x.x) * x.y * (1.0 - x.y)),
        |_| 0.0,
    );
    let r = p.spatial_residual(&f, &u).unwrap();
    let (_, j0) = p.spatial_residual_and_jacobian(&f, &vec![0.0; n]).unwrap();
    let lin = j0.matvec(&u);
    let conv: f64 = u.iter().zip(r.iter().zip(&lin)).map(|(a, (b, c))| a * (b - c)).sum();
    assert!(conv.abs() < 1e-12, "{conv}");
}

#[test]
fn viscous_and_penalty_parts_are_symmetric() {
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.5, 0.5] }, 0.27);
    let p = problem(Rect::unit(), 6, 6, open_tags(), circle, 0.3, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let n = p.space.total_dofs();
    let (_, j) = p.spatial_residual_and_jacobian(&f, &vec![0.0; n]).unwrap();
    let nv2 = 2 * p.space.n_velocity();
    // Velocity-velocity block without Nitsche terms on the open (do-nothing) box,
    // but including the embedded-boundary Nitsche terms, which are symmetric in
    // the velocity block as well.
    let mut worst: f64 = 0.0;
    for i in 0..nv2 {
        let (cols, vals) = j.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if c < nv2 {
                worst = worst.max((v - j.get(c, i)).abs());
            }
        }
    }
    assert!(worst < 1e-12, "{worst}");
    // Pressure coupling is antisymmetric: B and −Bᵀ.
    for i in 0..nv2 {
        let (cols, vals) = j.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= nv2 {
                assert!((v + j.get(c, i)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fluid_area_is_conserved() {
    let rho = 0.05;
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.2, 0.2] }, rho);
    let extent = Rect::new(0.0, 2.2, 0.0, 0.41);
    let p = problem(extent, 88, 16, BoundaryTags::default(), circle, 1e-3, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let area: f64 = f
        .classification
        .active_cells()
        .map(|c| p.fluid_rule(&f, c).unwrap().total_weight())
        .sum();
    let exact = extent.area() - PI * rho * rho;
    assert!((area - exact).abs() < 1e-8, "{}", area - exact);
    let arc: f64 = f.cut_cells.iter().map(|c| c.boundary.total_weight()).sum();
    assert!((arc - 2.0 * PI * rho).abs() < 1e-8, "{}", arc - 2.0 * PI * rho);
}

#[test]
fn mass_matrix_integrates_fluid_area() {
    let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.5, 0.5] }, 0.25);
    let p = problem(Rect::unit(), 8, 8, BoundaryTags::default(), circle, 1.0, BoundaryData::homogeneous());
    let f = p.build_frame(0.0).unwrap();
    let m = p.mass_matrix(&f).unwrap();
    let ones = p.interpolate(|_| Vector2::new(1.0, 0.0), |_| 0.0);
    let area = dot(&ones, &m.matvec(&ones));
    assert!((area - (1.0 - PI * 0.0625)).abs() < 1e-8);
}
