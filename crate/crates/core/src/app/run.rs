//! Execution of a scenario: time marching plus the requested outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::forms::{Frame, NavierStokesProblem};
use crate::geometry::CellKind;
use crate::linalg::MultifrontalLu;
use crate::postprocess::{
    drag_lift, export_fields, fmt_f64, sample_cross_section, section_csv, write_text, ErrorAccumulator, ErrorReport,
    ErrorRow, ForceSeries, ForceStatistics, SectionSample,
};
use crate::timeslab::{march, MarchConfig};

use super::scenario::Scenario;

/// Command-line overrides of scenario values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub refine: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        if let Some(v) = self.refine {
            s.refine = v;
        }
        if let Some(v) = self.k {
            s.discretization.k = v;
        }
        if let Some(v) = self.r {
            s.discretization.r = v;
        }
        if let Some(v) = self.tau {
            s.time.tau = v;
        }
        if let Some(v) = self.t_end {
            s.time.t_end = v;
        }
        s.validate()
    }
}

/// Results of one refinement level.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub cells: [usize; 2],
    pub tau: f64,
    /// Spatial unknowns per temporal node.
    pub dofs: usize,
    pub slabs: usize,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    /// `(‖e_v‖, ‖e_p‖)` in L²(L²) when an exact solution is known.
    pub errors: Option<(f64, f64)>,
    pub forces: Option<ForceSeries>,
    /// `(section index, time, samples)`.
    pub sections: Vec<(usize, f64, Vec<SectionSample>)>,
    /// Largest nodal speed over time in rigid and in fluid or cut cells.
    pub max_rigid_speed: f64,
    pub max_fluid_speed: f64,
    pub newton_iterations: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub levels: Vec<LevelResult>,
    pub errors: Option<ErrorReport>,
    pub force_statistics: Option<ForceStatistics>,
    pub lift_frequency: Option<f64>,
    pub text: String,
}

/// Sets the worker count of the assembly pool and the sparse factorization.
pub fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("thread count must be positive".into()));
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("thread pool already initialized: {e}");
    }
    faer::set_global_parallelism(if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    });
    Ok(())
}

/// Largest nodal speed in rigid cells and in active cells.
pub fn cell_speeds(problem: &NavierStokesProblem, frame: &Frame, u: &[f64]) -> (f64, f64) {
    let nv = problem.space.n_velocity();
    let mut rigid: f64 = 0.0;
    let mut fluid: f64 = 0.0;
    for cell in 0..problem.mesh.n_cells() {
        let m = problem
            .space
            .velocity
            .cell_dofs(cell)
            .iter()
            .map(|&d| u[d].hypot(u[nv + d]))
            .fold(0.0, f64::max);
        match frame.kind(cell) {
            CellKind::Rigid => rigid = rigid.max(m),
            _ => fluid = fluid.max(m),
        }
    }
    (rigid, fluid)
}

fn time_tag(t: f64) -> String {
    format!("{t:.4}")
}

/// Runs one level of a scenario. Files go to `out` when given.
pub fn run_level(
    s: &Scenario,
    level: usize,
    cells: [usize; 2],
    tau: f64,
    out: Option<&Path>,
) -> Result<(NavierStokesProblem, LevelResult)> {
    let started = Instant::now();
    let problem = s.problem(cells)?;
    let n_slabs = s.n_slabs(tau);
    let t0 = s.time.t_start;
    log::info!(
        "level {level}: {}x{} cells, {} unknowns per time node, {n_slabs} slabs of {tau}",
        cells[0],
        cells[1],
        problem.space.total_dofs()
    );

    let u0 = match s.exact {
        Some(_) => problem.interpolate(
            |x| s.exact_velocity(x, t0).expect("exact"),
            |x| s.exact_pressure(x, t0).expect("exact"),
        ),
        None => vec![0.0; problem.space.total_dofs()],
    };

    let mut errors = s.exact.map(|_| {
        ErrorAccumulator::new(
            &problem,
            |x, t| s.exact_velocity(x, t).expect("exact"),
            |x, t| s.exact_pressure(x, t).expect("exact"),
        )
    });
    let mut forces = s.output.forces.as_ref().map(|f| ForceSeries::new(f.l_ref, f.u_bar));
    let mut snapshots: Vec<f64> = s.output.snapshots.clone();
    snapshots.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;
    let mut sections = Vec::new();
    let mut newton_log = String::from("slab,t,iterations,residual\n");
    let mut newton_iterations = 0;
    let (mut max_rigid, mut max_fluid) = (0.0f64, 0.0f64);
    let needs_frame = forces.is_some() || s.body.is_some();

    let export = |frame: &Frame, u: &[f64], t: f64, sections: &mut Vec<(usize, f64, Vec<SectionSample>)>| -> Result<()> {
        for (i, sec) in s.output.sections.iter().enumerate() {
            let samples = sample_cross_section(&problem, u, t, sec.along, sec.at, sec.samples)?;
            if let Some(dir) = out {
                let name = format!("section{i}_t{}.csv", time_tag(t));
                write_text(&dir.join(name), &section_csv(&samples))?;
            }
            sections.push((i, t, samples));
        }
        if let Some(dir) = out {
            if s.output.fields {
                export_fields(&problem, frame, u, &dir.join(format!("fields_t{}.txt", time_tag(t))))?;
            }
        }
        Ok(())
    };

    let cfg = MarchConfig {
        k: s.discretization.k,
        t0,
        tau,
        n_slabs,
    };
    let mut linsolve = MultifrontalLu::new();
    let final_state = march(&problem, &cfg, u0, &s.newton, &mut linsolve, |slab, report| {
        newton_iterations += report.iterations;
        let t = slab.t_end();
        let _ = writeln!(
            newton_log,
            "{},{},{},{}",
            slab.index,
            fmt_f64(t),
            report.iterations,
            fmt_f64(report.residuals.last().copied().unwrap_or(0.0))
        );
        if let Some(acc) = errors.as_mut() {
            acc.add_slab(slab)?;
        }
        let want_snapshot = next_snapshot < snapshots.len() && t >= snapshots[next_snapshot] - 1e-9 * tau;
        if needs_frame || want_snapshot {
            let frame = problem.build_frame(t)?;
            let u = slab.trace();
            if let (Some(series), Some(cfg)) = (forces.as_mut(), s.output.forces.as_ref()) {
                let (cd, cl) = drag_lift(&problem, &frame, u, cfg.l_ref, cfg.u_bar)?;
                series.push(t, cd, cl);
            }
            if s.body.is_some() {
                let (r, f) = cell_speeds(&problem, &frame, u);
                max_rigid = max_rigid.max(r);
                max_fluid = max_fluid.max(f);
            }
            if want_snapshot {
                while next_snapshot < snapshots.len() && t >= snapshots[next_snapshot] - 1e-9 * tau {
                    next_snapshot += 1;
                }
                export(&frame, u, t, &mut sections)?;
            }
        }
        Ok(())
    })?;
    if linsolve.fallbacks() > 0 {
        log::warn!("{} linear solves needed the fallback LU", linsolve.fallbacks());
    }
    let final_time = t0 + n_slabs as f64 * tau;
    let final_frame = problem.build_frame(final_time)?;
    export(&final_frame, &final_state, final_time, &mut sections)?;

    if let Some(dir) = out {
        write_text(&dir.join("newton.csv"), &newton_log)?;
        if let Some(series) = &forces {
            write_text(&dir.join("forces.csv"), &series.to_csv())?;
        }
    }

    let result = LevelResult {
        level,
        cells,
        tau,
        dofs: problem.space.total_dofs(),
        slabs: n_slabs,
        final_time,
        final_state,
        errors: errors.map(|a| a.finish()),
        forces,
        sections,
        max_rigid_speed: max_rigid,
        max_fluid_speed: max_fluid,
        newton_iterations,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok((problem, result))
}

/// Runs all levels of a scenario and writes the summary.
pub fn run(s: &Scenario, out: Option<&Path>) -> Result<RunSummary> {
    s.validate()?;
    let levels = s.levels();
    let multi = levels.len() > 1;
    let mut results = Vec::new();
    for &(level, cells, tau) in &levels {
        let dir: Option<PathBuf> = out.map(|o| if multi { o.join(format!("level{level}")) } else { o.to_path_buf() });
        let (_, r) = run_level(s, level, cells, tau, dir.as_deref())?;
        results.push(r);
    }

    let mut text = String::new();
    let _ = writeln!(text, "{s}");
    for r in &results {
        let _ = writeln!(
            text,
            "level {}: {}x{} cells, tau = {}, {} unknowns per time node, {} slabs, {} newton iterations, {:.1} s",
            r.level, r.cells[0], r.cells[1], r.tau, r.dofs, r.slabs, r.newton_iterations, r.wall_time
        );
    }

    let errors = if s.exact.is_some() {
        let mut rep = ErrorReport::default();
        for r in &results {
            let (ev, ep) = r.errors.expect("errors are accumulated with an exact solution");
            rep.push(ErrorRow {
                tau: r.tau,
                h: 1.0 / r.cells[0] as f64 * s.domain.extent.width(),
                dofs: r.dofs,
                velocity: ev,
                pressure: ep,
            });
        }
        text.push_str("\nL2(L2) errors\n");
        text.push_str(&rep.table());
        if let Some(dir) = out {
            write_text(&dir.join("errors.csv"), &rep.to_csv())?;
        }
        Some(rep)
    } else {
        None
    };

    let last = results.last().expect("at least one level");
    let mut force_statistics = None;
    let mut lift_frequency = None;
    if let (Some(series), Some(cfg)) = (&last.forces, &s.output.forces) {
        let tail = series.after(cfg.statistics_from);
        force_statistics = tail.statistics();
        lift_frequency = tail.lift_frequency().ok();
        let _ = writeln!(text, "\nforce coefficients for t >= {}", cfg.statistics_from);
        let _ = writeln!(text, "  min c_D     max c_D     min c_L     max c_L     f_L");
        match force_statistics {
            Some(st) => {
                let f = lift_frequency.map_or("-".to_string(), |f| format!("{f:.5}"));
                let _ = writeln!(
                    text,
                    "  {:<11.5} {:<11.5} {:<11.5} {:<11.5} {f}",
                    st.drag_min, st.drag_max, st.lift_min, st.lift_max
                );
            }
            None => {
                let _ = writeln!(text, "  no samples in the statistics window");
            }
        }
    }
    if s.body.is_some() {
        let _ = writeln!(
            text,
            "\nmax speed over time: rigid cells {:.6e}, fluid cells {:.6e}",
            last.max_rigid_speed, last.max_fluid_speed
        );
    }
    if !last.sections.is_empty() {
        let _ = writeln!(text, "\n{} cross sections written", last.sections.len());
    }
    if let Some(dir) = out {
        write_text(&dir.join("summary.txt"), &text)?;
    }
    Ok(RunSummary {
        levels: results,
        errors,
        force_statistics,
        lift_frequency,
        text,
    })
}

/// Validates the scenario and the geometry at the initial time and reports
/// the classification counts of every level.
pub fn dry_run(s: &Scenario) -> Result<String> {
    s.validate()?;
    let mut text = String::new();
    let _ = writeln!(text, "{s}");
    for (level, cells, tau) in s.levels() {
        let problem = s.problem(cells)?;
        let frame = problem.build_frame(s.time.t_start)?;
        let (fluid, rigid, cut) = frame.classification.counts();
        let _ = writeln!(
            text,
            "level {level}: {}x{} cells (fluid {fluid}, rigid {rigid}, cut {cut}), {} stabilized faces, {} unknowns per time node, {} slabs of {tau}",
            cells[0],
            cells[1],
            frame.classification.stabilization_faces.len(),
            problem.space.total_dofs(),
            s.n_slabs(tau)
        );
    }
    Ok(text)
}
