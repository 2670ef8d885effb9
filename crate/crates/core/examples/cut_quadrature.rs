//! Quadrature on a cell cut by a circle: compares the fluid area and the
//! embedded arc length against the exact values.
//!
//! `cargo run --release --example cut_quadrature [order]`

use std::f64::consts::PI;

use cutfem::geometry::{cut_topology_rect, LevelSetGeometry, RigidMotion};
use cutfem::mesh::Rect;
use cutfem::quadrature::{cut_cell_quadrature, embedded_boundary_quadrature};

fn main() -> cutfem::Result<()> {
    let order: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).expect("order must be an integer");
    // A quarter of the circle lies inside the cell.
    let (cx, cy, rho) = (0.5, 0.5, 0.3);
    let cell = Rect::new(0.0, 0.5, 0.0, 0.5);
    let geom = LevelSetGeometry::circle(RigidMotion::Fixed { center: [cx, cy] }, rho);
    let cut = cut_topology_rect(cell, cell.width(), 0, &geom, 0.0)?;

    let rule = cut_cell_quadrature(&cut, order, order)?;
    let arc = embedded_boundary_quadrature(&cut, order)?;
    let area = cell.area() - PI * rho * rho / 4.0;
    println!("archetype {:?}, {} volume points, {} arc points", cut.archetype, rule.len(), arc.len());
    println!("area   {:.15}  exact {:.15}  error {:.2e}", rule.total_weight(), area, (rule.total_weight() - area).abs());
    println!(
        "arc    {:.15}  exact {:.15}  error {:.2e}",
        arc.total_weight(),
        PI * rho / 2.0,
        (arc.total_weight() - PI * rho / 2.0).abs()
    );

    // Polar integration of x over the quarter disc gives the first moment of the fluid part.
    let disc_x = cx * PI * rho * rho / 4.0 - rho.powi(3) / 3.0;
    let fluid_x = 0.5 * 0.5 * 0.25 - disc_x;
    let q = rule.integrate(|p| p.x);
    println!("∫x     {q:.15}  exact {fluid_x:.15}  error {:.2e}", (q - fluid_x).abs());
    Ok(())
}
