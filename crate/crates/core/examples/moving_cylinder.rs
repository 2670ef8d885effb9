//! A cylinder oscillating horizontally across a channel flow. Reports how the
//! extension values in rigid cells compare with the fluid velocities.
//!
//! `cargo run --release --example moving_cylinder [t_end]`

use cutfem::app::{self, Scenario};

fn main() -> cutfem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut s = Scenario::builtin("moving_cylinder")?;
    s.time.t_end = std::env::args().nth(1).map_or(Ok(0.2), |a| a.parse()).expect("t_end must be a number");
    s.domain.cells = [48, 16];
    s.output.snapshots.clear();
    s.validate()?;
    let summary = app::run(&s, None)?;
    let level = &summary.levels[0];
    println!(
        "{} slabs, {} Newton iterations; largest speed: rigid cells {:.3e}, fluid cells {:.3e}",
        level.slabs, level.newton_iterations, level.max_rigid_speed, level.max_fluid_speed
    );
    Ok(())
}
