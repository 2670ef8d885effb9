//! Discontinuous Galerkin in time on Radau nodes for the scalar decay
//! problem `u' = −λu`: nodal errors at the final time and the superconvergent
//! order `2k + 1` at slab ends.
//!
//! `cargo run --release --example dg_time_stepping`

use cutfem::linalg::{CsrMatrix, DenseLu, Triplets};
use cutfem::solver::NewtonConfig;
use cutfem::timeslab::{march, MarchConfig, SpatialProblem};

struct Decay(f64);

impl SpatialProblem for Decay {
    type Frame = ();
    fn n_dofs(&self) -> usize {
        1
    }
    fn frame(&self, _: f64) -> cutfem::Result<()> {
        Ok(())
    }
    fn mass(&self, _: &()) -> cutfem::Result<CsrMatrix> {
        Ok(CsrMatrix::identity(1))
    }
    fn residual(&self, _: &(), u: &[f64]) -> cutfem::Result<Vec<f64>> {
        Ok(vec![self.0 * u[0]])
    }
    fn residual_and_jacobian(&self, f: &(), u: &[f64]) -> cutfem::Result<(Vec<f64>, CsrMatrix)> {
        let mut j = Triplets::new(1, 1);
        j.push(0, 0, self.0);
        Ok((self.residual(f, u)?, j.to_csr()))
    }
}

fn main() -> cutfem::Result<()> {
    let lambda = 2.0;
    let t_end = 1.0;
    for k in 0..=2 {
        let mut previous: Option<f64> = None;
        print!("dG({k}):");
        for n in [4, 8, 16, 32] {
            let cfg = MarchConfig {
                k,
                t0: 0.0,
                tau: t_end / n as f64,
                n_slabs: n,
            };
            let u = march(&Decay(lambda), &cfg, vec![1.0], &NewtonConfig::default(), &mut DenseLu, |_, _| Ok(()))?;
            let err = (u[0] - (-lambda * t_end).exp()).abs();
            match previous {
                Some(e) => print!("  {err:.2e} ({:.2})", (e / err).log2()),
                None => print!("  {err:.2e}"),
            }
            previous = Some(err);
        }
        println!("   expected order {}", 2 * k + 1);
    }
    Ok(())
}
