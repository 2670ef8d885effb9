//! A cylinder oscillating in a Poiseuille pipe and moving with the flow
//! profile as its boundary datum, so the exact solution is Poiseuille flow
//! everywhere. Prints the deviation along a vertical section at the end.
//!
//! `cargo run --release --example dynamic_poiseuille [t_end]`

use cutfem::app::{self, Scenario};
use cutfem::mesh::Axis;
use nalgebra::Vector2;

fn main() -> cutfem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut s = Scenario::builtin("dynamic_poiseuille")?;
    s.time.t_end = std::env::args().nth(1).map_or(Ok(1.0), |a| a.parse()).expect("t_end must be a number");
    s.domain.cells = [48, 16];
    s.validate()?;
    let summary = app::run(&s, None)?;
    let level = &summary.levels[0];
    let section = s.output.sections.iter().position(|sec| sec.along == Axis::Y).expect("vertical section");
    let (_, t, samples) = level.sections.iter().rev().find(|(i, _, _)| *i == section).expect("section sampled");
    let fluid: Vec<_> = samples.iter().filter(|p| !p.rigid).collect();
    let dev = fluid
        .iter()
        .map(|p| (p.v - Vector2::new(0.25 - p.x.y * p.x.y, 0.0)).norm())
        .fold(0.0, f64::max);
    println!("t = {t}: {} fluid samples, max |v - v_poiseuille| = {dev:.3e}", fluid.len());
    println!("largest nodal speed: rigid {:.3e}, fluid {:.3e}", level.max_rigid_speed, level.max_fluid_speed);
    Ok(())
}
