//! Manufactured-solution convergence study on the unit square, halving `τ`
//! and `h` together and printing the L²(L²) errors with observed orders.
//!
//! `cargo run --release --example convergence [refinements]`

use cutfem::app::{self, Scenario};

fn main() -> cutfem::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut s = Scenario::builtin("convergence")?;
    s.refine = std::env::args().nth(1).map_or(Ok(2), |a| a.parse()).expect("refinements must be an integer");
    let summary = app::run(&s, None)?;
    print!("{}", summary.errors.expect("exact solution is known").table());
    Ok(())
}
