//! Steady Stokes-like flow with Nitsche boundary conditions on a fitted square.
//! The exact solution `v = (eˣ cos y, −eˣ sin y)` is harmonic and divergence
//! free; the boundary-trace and interior velocity errors converge at `h³`.
//!
//! `cargo run --release --example steady_nitsche [levels]`

use std::sync::Arc;

use cutfem::forms::{BoundaryData, FluidParameters, GhostPenaltyConfig, NavierStokesProblem, NitscheConfig, VectorField};
use cutfem::geometry::LevelSetGeometry;
use cutfem::linalg::MultifrontalLu;
use cutfem::mesh::{BackgroundMesh, BoundaryKind, BoundaryTags, Rect};
use cutfem::solver::NewtonConfig;
use cutfem::timeslab::solve_steady;
use cutfem::Point;
use nalgebra::Vector2;

fn exact(x: &Point) -> Vector2<f64> {
    Vector2::new(x.x.exp() * x.y.cos(), -x.x.exp() * x.y.sin())
}

fn main() -> cutfem::Result<()> {
    let levels: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).expect("levels must be an integer");
    let mut previous: Option<f64> = None;
    println!("{:>6} {:>8} {:>12} {:>6} {:>7}", "cells", "dofs", "max error", "EOC", "newton");
    for level in 0..levels {
        let n = 4 << level;
        let mesh = BackgroundMesh::with_tags(Rect::unit(), n, n, BoundaryTags::all(BoundaryKind::Wall))?;
        let g: VectorField = Arc::new(|x: &Point, _| exact(x));
        let problem = NavierStokesProblem::new(
            mesh,
            2,
            LevelSetGeometry::none(),
            FluidParameters::new(1.0),
            NitscheConfig::default(),
            GhostPenaltyConfig::default(),
            BoundaryData::uniform(g),
        )?;
        let x0 = vec![0.0; problem.space.total_dofs()];
        let (u, report) = solve_steady(&problem, 0.0, &x0, &NewtonConfig::default(), &mut MultifrontalLu::new())?;
        let samples = 41;
        let mut err: f64 = 0.0;
        for i in 0..samples {
            for j in 0..samples {
                let x = Point::new(i as f64 / (samples - 1) as f64, j as f64 / (samples - 1) as f64);
                err = err.max((problem.evaluate(&u, &x).v - exact(&x)).norm());
            }
        }
        let eoc = previous.map_or(String::from("-"), |e| format!("{:.2}", (e / err).log2()));
        println!("{:>6} {:>8} {:>12.4e} {:>6} {:>7}", format!("{n}x{n}"), u.len(), err, eoc, report.iterations);
        previous = Some(err);
    }
    Ok(())
}
