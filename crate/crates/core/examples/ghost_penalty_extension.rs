//! Patch-jump ghost penalty: the kernel of the patch matrix is exactly the
//! set of single polynomials on the two-cell patch, and the assembled
//! penalty on a cut mesh vanishes for global polynomials.
//!
//! `cargo run --release --example ghost_penalty_extension`

use cutfem::fe_space::{PatchJumpMatrix, QkBasis};
use cutfem::forms::{BoundaryData, FluidParameters, GhostPenaltyConfig, NavierStokesProblem, NitscheConfig};
use cutfem::geometry::{LevelSetGeometry, RigidMotion};
use cutfem::linalg::dot;
use cutfem::mesh::{Axis, BackgroundMesh, BoundaryKind, BoundaryTags, Rect};
use nalgebra::{SymmetricEigen, Vector2};

fn main() -> cutfem::Result<()> {
    for r in 1..=3 {
        let basis = QkBasis::new(r)?;
        for axis in [Axis::X, Axis::Y] {
            let g = PatchJumpMatrix::new(&basis, axis)?.matrix;
            let eig = SymmetricEigen::new(g);
            let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            values.sort_by(f64::total_cmp);
            let top = *values.last().unwrap();
            let kernel = values.iter().filter(|&&v| v < 1e-12 * top).count();
            let gap = values[kernel] / top;
            println!("Q{r} {axis:?} patch: {} unknowns, kernel {kernel} (= (r+1)^2 = {}), smallest nonzero/largest {gap:.2e}", values.len(), (r + 1) * (r + 1));
        }
    }

    let mesh = BackgroundMesh::with_tags(Rect::unit(), 16, 16, BoundaryTags::all(BoundaryKind::Wall))?;
    let geom = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.53, 0.47] }, 0.27);
    let problem = NavierStokesProblem::new(
        mesh,
        2,
        geom,
        FluidParameters::new(0.01),
        NitscheConfig::default(),
        GhostPenaltyConfig::default(),
        BoundaryData::homogeneous(),
    )?;
    let frame = problem.build_frame(0.0)?;
    let (fluid, rigid, cut) = frame.classification.counts();
    println!("\n16x16 mesh around a circle: {fluid} fluid, {rigid} rigid, {cut} cut cells");
    let s = problem.ghost_penalty_matrix(&frame);
    let smooth = problem.interpolate(|x| Vector2::new(x.x * x.y * x.y, 1.0 - x.x * x.x), |x| x.x * x.y);
    let kinked = problem.interpolate(|x| Vector2::new((x.x - 0.5).abs(), 0.0), |_| 0.0);
    println!("S(u, u) for a global Q2/Q1 polynomial: {:.2e}", dot(&smooth, &s.matvec(&smooth)));
    println!("S(u, u) for a field with a kink:       {:.2e}", dot(&kinked, &s.matvec(&kinked)));
    Ok(())
}
