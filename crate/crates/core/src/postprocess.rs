//! Error norms, force coefficients, lift frequency, cross sections and field export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{Frame, NavierStokesProblem};
use crate::geometry::CellKind;
use crate::mesh::{Axis, Point, Rect};
use crate::quadrature::gauss_1d;
use crate::timeslab::{temporal_gauss_points, SlabSolution};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Squared L² errors of velocity and pressure over the fluid domain of `frame`.
pub fn l2_error_squared(
    problem: &NavierStokesProblem,
    frame: &Frame,
    u: &[f64],
    v_exact: &(dyn Fn(&Point, f64) -> Vector2<f64> + Sync),
    p_exact: &(dyn Fn(&Point, f64) -> f64 + Sync),
) -> Result<(f64, f64)> {
    let t = frame.t;
    let cells: Vec<usize> = frame.classification.active_cells().collect();
    let parts = cells
        .par_iter()
        .map(|&cell| {
            let rule = problem.fluid_rule(frame, cell)?;
            let mut ev = 0.0;
            let mut ep = 0.0;
            for (x, &w) in rule.points.iter().zip(&rule.weights) {
                let s = problem.evaluate_in_cell(u, cell, x);
                ev += w * (s.v - v_exact(x, t)).norm_squared();
                ep += w * (s.p - p_exact(x, t)).powi(2);
            }
            Ok((ev, ep))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

/// Accumulates space-time L²(L²) errors slab by slab using temporal Gauss
/// quadrature with the same number of points as the slab system.
pub struct ErrorAccumulator<'a> {
    problem: &'a NavierStokesProblem,
    v_exact: Box<dyn Fn(&Point, f64) -> Vector2<f64> + Sync + 'a>,
    p_exact: Box<dyn Fn(&Point, f64) -> f64 + Sync + 'a>,
    sum_v: f64,
    sum_p: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(
        problem: &'a NavierStokesProblem,
        v_exact: impl Fn(&Point, f64) -> Vector2<f64> + Sync + 'a,
        p_exact: impl Fn(&Point, f64) -> f64 + Sync + 'a,
    ) -> Self {
        ErrorAccumulator {
            problem,
            v_exact: Box::new(v_exact),
            p_exact: Box::new(p_exact),
            sum_v: 0.0,
            sum_p: 0.0,
        }
    }

    pub fn add_slab(&mut self, slab: &SlabSolution) -> Result<()> {
        let k = slab.basis.len() - 1;
        let rule = gauss_1d(temporal_gauss_points(k))?;
        for (s, w) in rule.mapped(0.0, 1.0) {
            let t = slab.t_start + s * slab.tau;
            let frame = self.problem.build_frame(t)?;
            let u = slab.evaluate(t);
            let (ev, ep) = l2_error_squared(self.problem, &frame, &u, &*self.v_exact, &*self.p_exact)?;
            self.sum_v += w * slab.tau * ev;
            self.sum_p += w * slab.tau * ep;
        }
        Ok(())
    }

    /// `(‖e_v‖, ‖e_p‖)` in L²(L²) over the slabs added so far.
    pub fn finish(&self) -> (f64, f64) {
        (self.sum_v.sqrt(), self.sum_p.sqrt())
    }
}

/// L²(L²) errors of a sequence of solved slabs.
pub fn l2l2_error(
    problem: &NavierStokesProblem,
    slabs: &[SlabSolution],
    v_exact: impl Fn(&Point, f64) -> Vector2<f64> + Sync,
    p_exact: impl Fn(&Point, f64) -> f64 + Sync,
) -> Result<(f64, f64)> {
    let mut acc = ErrorAccumulator::new(problem, v_exact, p_exact);
    for s in slabs {
        acc.add_slab(s)?;
    }
    Ok(acc.finish())
}

/// Experimental order of convergence for a halving of the mesh parameters.
pub fn eoc(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub tau: f64,
    pub h: f64,
    pub dofs: usize,
    pub velocity: f64,
    pub pressure: f64,
}

/// Errors per refinement level with the observed orders.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn push(&mut self, row: ErrorRow) {
        self.rows.push(row);
    }

    /// Velocity and pressure EOC of row `i ≥ 1` with respect to row `i − 1`.
    pub fn eoc(&self, i: usize) -> Option<(f64, f64)> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (a, b) = (&self.rows[i - 1], &self.rows[i]);
        Some((eoc(a.velocity, b.velocity), eoc(a.pressure, b.pressure)))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,tau,h,dofs,error_v,eoc_v,error_p,eoc_p\n");
        for (i, r) in self.rows.iter().enumerate() {
            let (ev, ep) = match self.eoc(i) {
                Some((a, b)) => (fmt_f64(a), fmt_f64(b)),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                s,
                "{i},{},{},{},{},{ev},{},{ep}",
                fmt_f64(r.tau),
                fmt_f64(r.h),
                r.dofs,
                fmt_f64(r.velocity),
                fmt_f64(r.pressure)
            );
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::from("  tau        h          |e_v|       EOC    |e_p|       EOC\n");
        for (i, r) in self.rows.iter().enumerate() {
            let (ev, ep) = match self.eoc(i) {
                Some((a, b)) => (format!("{a:6.2}"), format!("{b:6.2}")),
                None => ("     -".into(), "     -".into()),
            };
            let _ = writeln!(
                s,
                "  {:<10.4e} {:<10.4e} {:<11.4e} {ev} {:<11.4e} {ep}",
                r.tau, r.h, r.velocity, r.pressure
            );
        }
        s
    }
}

/// Drag and lift coefficients `(c_D, c_L)` of the body at the time of `frame`.
///
/// The traction uses the fluid-side polynomial of each cut cell and the
/// normal pointing from the body into the fluid.
pub fn drag_lift(problem: &NavierStokesProblem, frame: &Frame, u: &[f64], l_ref: f64, u_bar: f64) -> Result<(f64, f64)> {
    if !problem.geometry.has_body() {
        return Err(Error::Postprocess("drag and lift need a rigid body".into()));
    }
    let (fd, fl) = body_forces(problem, frame, u);
    let scale = 2.0 / (u_bar * u_bar * l_ref);
    Ok((scale * fd, scale * fl))
}

/// Raw forces `(F_D, F_L)` on the body.
pub fn body_forces(problem: &NavierStokesProblem, frame: &Frame, u: &[f64]) -> (f64, f64) {
    let nu = problem.params.nu;
    let mut fd = 0.0;
    let mut fl = 0.0;
    for cut in &frame.cut_cells {
        let b = &cut.boundary;
        for q in 0..b.len() {
            let x = &b.points[q];
            let n = -b.normals[q];
            let tang = Vector2::new(n.y, -n.x);
            let s = problem.evaluate_in_cell(u, cut.cell, x);
            let dvt_dn = tang.dot(&(s.grad * n));
            fd += b.weights[q] * (nu * dvt_dn * n.y - s.p * n.x);
            fl -= b.weights[q] * (nu * dvt_dn * n.x - s.p * n.y);
        }
    }
    (fd, fl)
}

/// Time series of drag and lift coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForceSeries {
    pub l_ref: f64,
    pub u_bar: f64,
    pub times: Vec<f64>,
    pub drag: Vec<f64>,
    pub lift: Vec<f64>,
}

/// Extremes of a force series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceStatistics {
    pub drag_min: f64,
    pub drag_max: f64,
    pub lift_min: f64,
    pub lift_max: f64,
}

impl ForceSeries {
    pub fn new(l_ref: f64, u_bar: f64) -> Self {
        ForceSeries {
            l_ref,
            u_bar,
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, drag: f64, lift: f64) {
        self.times.push(t);
        self.drag.push(drag);
        self.lift.push(lift);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The samples with `t ≥ t_from`.
    pub fn after(&self, t_from: f64) -> ForceSeries {
        let mut out = ForceSeries::new(self.l_ref, self.u_bar);
        for i in 0..self.len() {
            if self.times[i] >= t_from {
                out.push(self.times[i], self.drag[i], self.lift[i]);
            }
        }
        out
    }

    pub fn statistics(&self) -> Option<ForceStatistics> {
        if self.is_empty() {
            return None;
        }
        let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (drag_min, drag_max) = fold(&self.drag);
        let (lift_min, lift_max) = fold(&self.lift);
        Some(ForceStatistics {
            drag_min,
            drag_max,
            lift_min,
            lift_max,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,c_d,c_l\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{}", fmt_f64(self.times[i]), fmt_f64(self.drag[i]), fmt_f64(self.lift[i]));
        }
        s
    }

    pub fn lift_frequency(&self) -> Result<f64> {
        lift_frequency(&self.times, &self.lift)
    }
}

/// Times of the local minima of a sampled signal, each refined by a parabola
/// through the bracketing samples.
pub fn local_minima(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b < a && b <= c {
            let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
            // Vertex of the interpolating parabola.
            let d1 = (b - a) / (t1 - t0);
            let d2 = (c - b) / (t2 - t1);
            let curv = (d2 - d1) / (t2 - t0);
            let t = if curv > 0.0 {
                0.5 * (t0 + t1) - d1 / (2.0 * curv)
            } else {
                t1
            };
            out.push(t.clamp(t0, t2));
        }
    }
    out
}

/// Oscillation frequency from the last two minima of the signal.
pub fn lift_frequency(times: &[f64], lift: &[f64]) -> Result<f64> {
    if times.len() != lift.len() {
        return Err(Error::Postprocess("time and lift series differ in length".into()));
    }
    let minima = local_minima(times, lift);
    if minima.len() < 2 {
        return Err(Error::Postprocess(format!(
            "lift frequency needs two minima, found {}",
            minima.len()
        )));
    }
    let n = minima.len();
    Ok(1.0 / (minima[n - 1] - minima[n - 2]))
}

/// One sample of a cross section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionSample {
    pub x: Point,
    pub v: Vector2<f64>,
    pub p: f64,
    pub rigid: bool,
}

/// Samples `n` equally spaced points (endpoints included) along the line
/// `axis-coordinate = coordinate` across the whole domain. Points inside the
/// body carry extension values and are flagged as rigid.
pub fn sample_cross_section(
    problem: &NavierStokesProblem,
    u: &[f64],
    t: f64,
    along: Axis,
    coordinate: f64,
    n: usize,
) -> Result<Vec<SectionSample>> {
    if n < 2 {
        return Err(Error::Postprocess("a cross section needs at least two samples".into()));
    }
    let e = problem.mesh.extent;
    let (lo, hi) = match along {
        Axis::X => (e.x_min, e.x_max),
        Axis::Y => (e.y_min, e.y_max),
    };
    Ok((0..n)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let x = match along {
                Axis::X => Point::new(s, coordinate),
                Axis::Y => Point::new(coordinate, s),
            };
            let st = problem.evaluate(u, &x);
            SectionSample {
                x,
                v: st.v,
                p: st.p,
                rigid: problem.geometry.has_body() && problem.geometry.value(&x, t) < 0.0,
            }
        })
        .collect())
}

pub fn section_csv(samples: &[SectionSample]) -> String {
    let mut s = String::from("x,y,vx,vy,p,region\n");
    for r in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(r.x.x),
            fmt_f64(r.x.y),
            fmt_f64(r.v.x),
            fmt_f64(r.v.y),
            fmt_f64(r.p),
            if r.rigid { "rigid" } else { "fluid" }
        );
    }
    s
}

/// Field values at the mesh vertices and the cell classification.
///
/// File layout (plain text):
///
/// ```text
/// # cutfem rectilinear grid
/// time <t>
/// extent <x_min> <x_max> <y_min> <y_max>
/// cells <nx> <ny>
/// [nodes]
/// x,y,vx,vy,p          ((nx+1)(ny+1) rows, x-major: node (i, j) is row i (ny+1) + j)
/// [cells]
/// i,j,kind             (nx ny rows, kind ∈ fluid|rigid|cut)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct FieldExport {
    pub t: f64,
    pub extent: Rect,
    pub nx: usize,
    pub ny: usize,
    /// `[x, y, vx, vy, p]` per vertex.
    pub nodes: Vec<[f64; 5]>,
    pub cells: Vec<(usize, usize, CellKind)>,
}

impl FieldExport {
    pub fn from_solution(problem: &NavierStokesProblem, frame: &Frame, u: &[f64]) -> Self {
        let mesh = &problem.mesh;
        let r = problem.space.degree();
        let nv = problem.space.n_velocity();
        let poff = problem.space.p_offset();
        let mut nodes = Vec::with_capacity((mesh.nx + 1) * (mesh.ny + 1));
        for i in 0..=mesh.nx {
            for j in 0..=mesh.ny {
                let dv = problem.space.velocity.lattice_dof(i * r, j * r);
                let dp = problem.space.pressure.lattice_dof(i * (r - 1), j * (r - 1));
                let x = problem.space.velocity.node_coordinates(mesh, dv);
                nodes.push([x.x, x.y, u[dv], u[nv + dv], u[poff + dp]]);
            }
        }
        let mut cells = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let (i, j) = mesh.cell_ij(c);
            cells.push((i, j, frame.kind(c)));
        }
        FieldExport {
            t: frame.t,
            extent: mesh.extent,
            nx: mesh.nx,
            ny: mesh.ny,
            nodes,
            cells,
        }
    }

    pub fn to_text(&self) -> String {
        let e = &self.extent;
        let mut s = String::from("# cutfem rectilinear grid\n");
        let _ = writeln!(s, "time {}", fmt_f64(self.t));
        let _ = writeln!(
            s,
            "extent {} {} {} {}",
            fmt_f64(e.x_min),
            fmt_f64(e.x_max),
            fmt_f64(e.y_min),
            fmt_f64(e.y_max)
        );
        let _ = writeln!(s, "cells {} {}", self.nx, self.ny);
        s.push_str("[nodes]\nx,y,vx,vy,p\n");
        for n in &self.nodes {
            let row: Vec<String> = n.iter().map(|&v| fmt_f64(v)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s.push_str("[cells]\ni,j,kind\n");
        for (i, j, k) in &self.cells {
            let _ = writeln!(s, "{i},{j},{}", k.as_str());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Postprocess(format!("field file line {}: {msg}", line + 1));
        let mut t = None;
        let mut extent = None;
        let mut dims = None;
        let mut nodes = Vec::new();
        let mut cells = Vec::new();
        let mut section = "";
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "[nodes]" || line == "[cells]" {
                section = if line == "[nodes]" { "nodes" } else { "cells" };
                continue;
            }
            if line.starts_with("x,") || line.starts_with("i,") {
                continue;
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(ln, "invalid number"));
            match section {
                "" => {
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    match parts.as_slice() {
                        ["time", v] => t = Some(num(v)?),
                        ["extent", a, b, c, d] => extent = Some(Rect::new(num(a)?, num(b)?, num(c)?, num(d)?)),
                        ["cells", a, b] => {
                            let p = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "invalid cell count"));
                            dims = Some((p(a)?, p(b)?));
                        }
                        _ => return Err(bad(ln, "unknown header entry")),
                    }
                }
                "nodes" => {
                    let vals: Vec<f64> = line.split(',').map(num).collect::<Result<_>>()?;
                    let row: [f64; 5] = vals.try_into().map_err(|_| bad(ln, "expected 5 columns"))?;
                    nodes.push(row);
                }
                _ => {
                    let parts: Vec<&str> = line.split(',').collect();
                    if parts.len() != 3 {
                        return Err(bad(ln, "expected 3 columns"));
                    }
                    let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "invalid index"));
                    let kind = match parts[2] {
                        "fluid" => CellKind::Fluid,
                        "rigid" => CellKind::Rigid,
                        "cut" => CellKind::Cut,
                        _ => return Err(bad(ln, "unknown cell kind")),
                    };
                    cells.push((idx(parts[0])?, idx(parts[1])?, kind));
                }
            }
        }
        let missing = |what: &str| Error::Postprocess(format!("field file lacks {what}"));
        let (nx, ny) = dims.ok_or_else(|| missing("cell counts"))?;
        let out = FieldExport {
            t: t.ok_or_else(|| missing("time"))?,
            extent: extent.ok_or_else(|| missing("extent"))?,
            nx,
            ny,
            nodes,
            cells,
        };
        if out.nodes.len() != (nx + 1) * (ny + 1) || out.cells.len() != nx * ny {
            return Err(Error::Postprocess("field file row counts do not match the grid".into()));
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }
}

/// Writes the vertex fields and cell classification of `u` to `path`.
pub fn export_fields(problem: &NavierStokesProblem, frame: &Frame, u: &[f64], path: &Path) -> Result<()> {
    FieldExport::from_solution(problem, frame, u).write(path)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_file(path, contents)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::forms::{BoundaryData, FluidParameters, GhostPenaltyConfig, NitscheConfig};
    use crate::geometry::{LevelSetGeometry, RigidMotion};
    use crate::mesh::{BackgroundMesh, BoundaryTags};

    fn problem(extent: Rect, nx: usize, ny: usize, geom: LevelSetGeometry, nu: f64) -> NavierStokesProblem {
        let mesh = BackgroundMesh::with_tags(extent, nx, ny, BoundaryTags::default()).unwrap();
        NavierStokesProblem::new(
            mesh,
            2,
            geom,
            FluidParameters::new(nu),
            NitscheConfig::default(),
            GhostPenaltyConfig::default(),
            BoundaryData::homogeneous(),
        )
        .unwrap()
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(4e-4, 1e-4) - 2.0).abs() < 1e-15);
        assert!((eoc(2.7893186804e-05, 8.8016369990e-07) - 4.99).abs() < 5e-3);
    }

    #[test]
    fn error_report_has_one_eoc_per_refinement() {
        let mut rep = ErrorReport::default();
        for (i, e) in [1e-2, 2.5e-3, 6.25e-4].iter().enumerate() {
            let f = 0.5f64.powi(i as i32);
            rep.push(ErrorRow {
                tau: 0.1 * f,
                h: 0.125 * f,
                dofs: 10,
                velocity: *e,
                pressure: 2.0 * e,
            });
        }
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(rep.eoc(0).is_none());
        let (a, b) = rep.eoc(2).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_lift_frequency() {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
        let lift: Vec<f64> = times.iter().map(|t| (2.0 * PI * 3.0 * t).sin()).collect();
        let f = lift_frequency(&times, &lift).unwrap();
        assert!((f - 3.0).abs() < 0.01, "{f}");
    }

    #[test]
    fn constant_lift_has_no_frequency() {
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(lift_frequency(&times, &vec![1.0; 50]).is_err());
    }

    #[test]
    fn parabolic_refinement_finds_exact_vertex() {
        let times = [0.0, 0.1, 0.2, 0.3, 0.4];
        let vals: Vec<f64> = times.iter().map(|t| (t - 0.17) * (t - 0.17)).collect();
        let m = local_minima(&times, &vals);
        assert_eq!(m.len(), 1);
        assert!((m[0] - 0.17).abs() < 1e-14);
    }

    #[test]
    fn forces_vanish_for_rest_and_constant_pressure() {
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.2, 0.2] }, 0.05);
        let p = problem(Rect::new(0.0, 2.2, 0.0, 0.41), 44, 8, circle, 1e-3);
        let f = p.build_frame(0.0).unwrap();
        let zero = vec![0.0; p.space.total_dofs()];
        assert_eq!(drag_lift(&p, &f, &zero, 0.1, 1.0).unwrap(), (0.0, 0.0));
        let one = p.interpolate(|_| Vector2::zeros(), |_| 1.0);
        // Closed-curve normal integrals vanish up to the angular quadrature error.
        let (cd, cl) = drag_lift(&p, &f, &one, 0.1, 1.0).unwrap();
        assert!(cd.abs() < 1e-6 && cl.abs() < 1e-6, "{cd} {cl}");
    }

    #[test]
    fn forces_require_a_body() {
        let p = problem(Rect::unit(), 2, 2, LevelSetGeometry::none(), 1.0);
        let f = p.build_frame(0.0).unwrap();
        assert!(drag_lift(&p, &f, &vec![0.0; p.space.total_dofs()], 1.0, 1.0).is_err());
    }

    #[test]
    fn poiseuille_traction_matches_trapezoid_oracle() {
        let nu = 1e-3;
        let (c, rho) = (Point::new(1.545, 0.05), 0.2);
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [c.x, c.y] }, rho);
        let p = problem(Rect::new(0.0, 3.0, -0.5, 0.5), 48, 16, circle, nu);
        let f = p.build_frame(0.0).unwrap();
        let u = p.interpolate(|x| Vector2::new(0.25 - x.y * x.y, 0.0), |x| -2.0 * nu * (x.x - 3.0));
        let (fd, fl) = body_forces(&p, &f, &u);
        // Oracle: traction of the analytic field with a dense trapezoid rule.
        let n_pts = 10_000;
        let (mut od, mut ol) = (0.0, 0.0);
        for i in 0..n_pts {
            let a = 2.0 * PI * i as f64 / n_pts as f64;
            let n = Vector2::new(a.cos(), a.sin());
            let x = c + rho * n;
            let grad = nalgebra::Matrix2::new(0.0, -2.0 * x.y, 0.0, 0.0);
            let pr = -2.0 * nu * (x.x - 3.0);
            let tang = Vector2::new(n.y, -n.x);
            let dv = tang.dot(&(grad * n));
            let w = 2.0 * PI * rho / n_pts as f64;
            od += w * (nu * dv * n.y - pr * n.x);
            ol -= w * (nu * dv * n.x - pr * n.y);
        }
        assert!((fd - od).abs() < 1e-6 && (fl - ol).abs() < 1e-6, "{fd} {od} {fl} {ol}");
        assert!(od.abs() > 1e-5);
    }

    #[test]
    fn injected_discrete_field_has_zero_error() {
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.5, 0.5] }, 0.2);
        let p = problem(Rect::unit(), 6, 6, circle, 1.0);
        let f = p.build_frame(0.0).unwrap();
        let u = p.interpolate(|x| Vector2::new(x.x * x.y, x.y * x.y), |x| x.x - x.y);
        let (ev, ep) = l2_error_squared(&p, &f, &u, &|x, _| Vector2::new(x.x * x.y, x.y * x.y), &|x, _| x.x - x.y).unwrap();
        assert!(ev.sqrt() < 1e-13 && ep.sqrt() < 1e-13);
    }

    #[test]
    fn poiseuille_cross_section() {
        let nu = 1e-3;
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [1.545, 0.0] }, 0.2);
        let p = problem(Rect::new(0.0, 3.0, -0.5, 0.5), 24, 8, circle, nu);
        let u = p.interpolate(|x| Vector2::new(0.25 - x.y * x.y, 0.0), |x| -2.0 * nu * (x.x - 3.0));
        let s = sample_cross_section(&p, &u, 0.0, Axis::Y, 2.34, 11).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s[0].x.y, -0.5);
        assert_eq!(s[10].x.y, 0.5);
        for r in &s {
            assert!((r.v.x - (0.25 - r.x.y * r.x.y)).abs() < 1e-13);
        }
        let row = sample_cross_section(&p, &u, 0.0, Axis::X, 0.0, 31).unwrap();
        assert!(row.iter().any(|r| r.rigid));
        for r in &row {
            assert!((r.p - (-2.0 * nu * (r.x.x - 3.0))).abs() < 1e-13);
        }
        assert_eq!(section_csv(&s).lines().count(), 12);
    }

    #[test]
    fn export_single_cell_zero_field() {
        let p = problem(Rect::unit(), 1, 1, LevelSetGeometry::none(), 1.0);
        let f = p.build_frame(0.0).unwrap();
        let ex = FieldExport::from_solution(&p, &f, &vec![0.0; p.space.total_dofs()]);
        assert_eq!(ex.nodes.len(), 4);
        assert!(ex.nodes.iter().all(|n| n[2] == 0.0 && n[3] == 0.0 && n[4] == 0.0));
        assert_eq!(ex.cells, vec![(0, 0, CellKind::Fluid)]);
    }

    #[test]
    fn export_round_trip() {
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.48, 0.52] }, 0.23);
        let p = problem(Rect::unit(), 7, 5, circle, 1.0);
        let f = p.build_frame(0.0).unwrap();
        let u = p.interpolate(|x| Vector2::new((3.0 * x.x).sin(), x.y.exp()), |x| x.x * x.y / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("fields.txt");
        export_fields(&p, &f, &u, &path).unwrap();
        let back = FieldExport::read(&path).unwrap();
        assert_eq!(back, FieldExport::from_solution(&p, &f, &u));
        for n in &back.nodes {
            let s = p.evaluate(&u, &Point::new(n[0], n[1]));
            assert!((s.v.x - n[2]).abs() < 1e-15 && (s.v.y - n[3]).abs() < 1e-15 && (s.p - n[4]).abs() < 1e-15);
        }
        for (i, j, k) in &back.cells {
            assert_eq!(*k, f.kind(p.mesh.cell_index(*i, *j)));
        }
        assert!(FieldExport::read(&dir.path().join("missing")).is_err());
    }
}
