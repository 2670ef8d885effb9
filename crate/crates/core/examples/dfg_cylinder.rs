//! Flow past a fixed cylinder in a channel with drag and lift coefficients.
//! The default end time only covers the start-up; pass a larger one (and
//! expect long run times) to reach periodic vortex shedding.
//!
//! `cargo run --release --example dfg_cylinder [t_end]`

use cutfem::app::{self, Scenario};

fn main() -> cutfem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut s = Scenario::builtin("dfg_cylinder")?;
    s.time.t_end = std::env::args().nth(1).map_or(Ok(0.5), |a| a.parse()).expect("t_end must be a number");
    if let Some(f) = s.output.forces.as_mut() {
        f.statistics_from = f.statistics_from.min(0.0);
    }
    s.validate()?;
    let summary = app::run(&s, None)?;
    let forces = summary.levels[0].forces.as_ref().expect("forces recorded");
    println!("{:>8} {:>12} {:>12}", "t", "c_D", "c_L");
    let stride = (forces.times.len() / 10).max(1);
    for i in (0..forces.times.len()).step_by(stride) {
        println!("{:>8.3} {:>12.5} {:>12.5}", forces.times[i], forces.drag[i], forces.lift[i]);
    }
    if let Some(f) = summary.lift_frequency {
        println!("lift frequency {f:.4}");
    }
    Ok(())
}
