//! Gauss and Gauss–Radau rules, tensor rules on full cells, iterated rules on
//! cut cells and line rules on the embedded boundary.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{fluid_normal, CutCellGeometry, CutPiece};
use crate::mesh::{Axis, Point, Rect};

/// One-dimensional rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Points and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + len * x, w * len))
    }
}

/// Two-dimensional rule with physical points and weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, &w)| w * f(p)).sum()
    }

    pub fn append(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }

    /// CSV dump with header `x,y,w`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,w\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p.x, p.y, w);
        }
        s
    }
}

/// Line rule on a curve with unit normals (pointing out of the fluid).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vector2<f64>>,
}

impl LineRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, &w)| w * f(p)).sum()
    }

    pub fn append(&mut self, other: LineRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.normals.extend(other.normals);
    }

    pub fn to_quadrature_rule(&self) -> QuadratureRule {
        QuadratureRule {
            points: self.points.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n' from the standard identity; valid away from x = ±1.
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    } else {
        let nf = n as f64;
        x.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0
    };
    (p1, dp)
}

/// Eigenvalues of a symmetric tridiagonal matrix.
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

/// `M`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2M − 1`.
pub fn gauss_1d(m: usize) -> Result<Rule1D> {
    if m == 0 {
        return Err(Error::InvalidQuadrature("Gauss rule needs at least one point".into()));
    }
    let diag = vec![0.0; m];
    let off: Vec<f64> = (1..m)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut nodes = tridiagonal_eigenvalues(&diag, &off);
    let mut points = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = legendre(m, *x);
            *x -= p / dp;
        }
        let (_, dp) = legendre(m, *x);
        let w = 2.0 / ((1.0 - *x * *x) * dp * dp);
        points.push(0.5 * (*x + 1.0));
        weights.push(0.5 * w);
    }
    Ok(Rule1D { points, weights })
}

/// Right Gauss–Radau rule on `[0, 1]` with last node exactly `1`, exact for degree `2s − 2`.
pub fn gauss_radau_right_1d(s: usize) -> Result<Rule1D> {
    if s == 0 {
        return Err(Error::InvalidQuadrature("Radau rule needs at least one point".into()));
    }
    let sf = s as f64;
    let mut points = Vec::with_capacity(s);
    let mut weights = Vec::with_capacity(s);
    if s > 1 {
        // Interior nodes: Gauss–Jacobi nodes for the weight (1 − x) on [−1, 1].
        let (alpha, beta) = (1.0_f64, 0.0_f64);
        let n = s - 1;
        let ab = alpha + beta;
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let k2 = 2.0 * k as f64 + ab;
                (beta * beta - alpha * alpha) / (k2 * (k2 + 2.0))
            })
            .collect();
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let kf = k as f64;
                let k2 = 2.0 * kf + ab;
                (4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                    / (k2 * k2 * (k2 + 1.0) * (k2 - 1.0)))
                    .sqrt()
            })
            .collect();
        for mut x in tridiagonal_eigenvalues(&diag, &off) {
            // Polish on q(x) = P_s(x) − P_{s−1}(x).
            for _ in 0..3 {
                let (ps, dps) = legendre(s, x);
                let (pm, dpm) = legendre(s - 1, x);
                x -= (ps - pm) / (dps - dpm);
            }
            let (pm, _) = legendre(s - 1, x);
            let w = (1.0 + x) / (sf * sf * pm * pm);
            points.push(0.5 * (x + 1.0));
            weights.push(0.5 * w);
        }
    }
    points.push(1.0);
    weights.push(1.0 / (sf * sf));
    Ok(Rule1D { points, weights })
}

/// Tensor Gauss rule on the reference square `[0, 1]²`.
pub fn tensor_gauss_reference(m: usize) -> Result<QuadratureRule> {
    full_cell_quadrature(&Rect::unit(), m)
}

/// Tensor Gauss rule on an uncut cell, exact for `Q_{2M−1}`.
pub fn full_cell_quadrature(rect: &Rect, m: usize) -> Result<QuadratureRule> {
    let g = gauss_1d(m)?;
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for (y, wy) in g.mapped(rect.y_min, rect.y_max) {
        for (x, wx) in g.mapped(rect.x_min, rect.x_max) {
            points.push(Point::new(x, y));
            weights.push(wx * wy);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Outer integration axis: the direction of the cell side with the longest
/// fluid part; ties go to `x`.
pub fn outer_axis(geom: &CutCellGeometry) -> Axis {
    let l = geom.fluid_edge_lengths();
    let along_x = l[0].max(l[2]);
    let along_y = l[1].max(l[3]);
    if along_y > along_x * (1.0 + 1e-12) {
        Axis::Y
    } else {
        Axis::X
    }
}

fn coord(p: &Point, axis: Axis) -> f64 {
    p[axis.index()]
}

fn make_point(axis: Axis, outer: f64, inner: f64) -> Point {
    match axis {
        Axis::X => Point::new(outer, inner),
        Axis::Y => Point::new(inner, outer),
    }
}

fn axis_range(rect: &Rect, axis: Axis) -> (f64, f64) {
    match axis {
        Axis::X => (rect.x_min, rect.x_max),
        Axis::Y => (rect.y_min, rect.y_max),
    }
}

fn sorted_breakpoints(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>, tol: f64) -> Vec<f64> {
    let mut v = vec![lo, hi];
    v.extend(extra.into_iter().filter(|&x| x > lo + tol && x < hi - tol));
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
    v
}

/// Iterated Gauss rule over the fluid part of a cut cell.
///
/// The outer interval is split at every coordinate where the inner limits can
/// have a kink (edge intersections, and the extreme points `c ± ρ` of a circle).
/// On circle strips the substitution `o = c + ρ sin φ` removes the square-root
/// behaviour of the inner limits near the extreme points.
pub fn cut_cell_quadrature(geom: &CutCellGeometry, m1: usize, m2: usize) -> Result<QuadratureRule> {
    let g_outer = gauss_1d(m1)?;
    let g_inner = gauss_1d(m2)?;
    let axis = outer_axis(geom);
    let inner_axis = axis.other();
    let (o0, o1) = axis_range(&geom.rect, axis);
    let (i0, i1) = axis_range(&geom.rect, inner_axis);
    let tol = 1e-13 * geom.h;

    let mut rule = QuadratureRule::default();
    let push_line = |rule: &mut QuadratureRule, o: f64, w_outer: f64, intervals: &[(f64, f64)]| {
        for &(a, b) in intervals {
            if b - a <= tol {
                continue;
            }
            for (i, wi) in g_inner.mapped(a, b) {
                rule.points.push(make_point(axis, o, i));
                rule.weights.push(w_outer * wi);
            }
        }
    };

    let cuts = geom.intersections.iter().map(|p| coord(&p.point, axis));
    match geom.circle {
        Some(c) => {
            let (ca, cb, rho) = (coord(&c.center, axis), coord(&c.center, inner_axis), c.radius);
            let bps = sorted_breakpoints(o0, o1, cuts.chain([ca - rho, ca + rho]), tol);
            for s in bps.windows(2) {
                let (oa, ob) = (s[0], s[1]);
                let mid = 0.5 * (oa + ob);
                if (mid - ca).abs() < rho {
                    let pa = ((oa - ca) / rho).clamp(-1.0, 1.0).asin();
                    let pb = ((ob - ca) / rho).clamp(-1.0, 1.0).asin();
                    for (phi, wphi) in g_outer.mapped(pa, pb) {
                        let o = ca + rho * phi.sin();
                        let half = rho * phi.cos();
                        let w = wphi * half;
                        let intervals = [(i0, i1.min(cb - half)), (i0.max(cb + half), i1)];
                        push_line(&mut rule, o, w, &intervals);
                    }
                } else {
                    for (o, w) in g_outer.mapped(oa, ob) {
                        push_line(&mut rule, o, w, &[(i0, i1)]);
                    }
                }
            }
        }
        None => {
            let bps = sorted_breakpoints(o0, o1, cuts, tol);
            for s in bps.windows(2) {
                for (o, w) in g_outer.mapped(s[0], s[1]) {
                    let interval = inner_fluid_interval(geom, axis, o, i0, i1);
                    if let Some(iv) = interval {
                        push_line(&mut rule, o, w, &[iv]);
                    }
                }
            }
        }
    }

    if rule.is_empty() || rule.total_weight() <= 0.0 {
        return Err(Error::EmptyFluidPortion(geom.cell));
    }
    Ok(rule)
}

/// Fluid part of the inner line at outer coordinate `o`, assuming at most one crossing.
fn inner_fluid_interval(geom: &CutCellGeometry, axis: Axis, o: f64, i0: f64, i1: f64) -> Option<(f64, f64)> {
    let f = |i: f64| geom.value(&make_point(axis, o, i));
    let (f0, f1) = (f(i0), f(i1));
    match (f0 > 0.0, f1 > 0.0) {
        (true, true) => Some((i0, i1)),
        (false, false) => None,
        (a_fluid, _) => {
            let (mut lo, mut hi) = (i0, i1);
            let tol = 1e-15 * geom.h.max(1.0);
            for _ in 0..200 {
                if hi - lo <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == a_fluid {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            Some(if a_fluid { (i0, r) } else { (r, i1) })
        }
    }
}

/// Line rule on the part of the body boundary inside a cut cell.
pub fn embedded_boundary_quadrature(geom: &CutCellGeometry, m: usize) -> Result<LineRule> {
    let g = gauss_1d(m)?;
    let [p1, p2] = [geom.intersections[0].point, geom.intersections[1].point];
    let mut rule = LineRule::default();
    match geom.circle {
        Some(c) => {
            let a1 = (p1.y - c.center.y).atan2(p1.x - c.center.x);
            let a2 = (p2.y - c.center.y).atan2(p2.x - c.center.x);
            let ccw = (a2 - a1).rem_euclid(2.0 * PI);
            let mid_ccw = a1 + 0.5 * ccw;
            let probe = c.center + c.radius * Vector2::new(mid_ccw.cos(), mid_ccw.sin());
            let inside = |p: &Point| geom.rect.distance_to(p);
            let cw_mid = mid_ccw + PI;
            let probe_cw = c.center + c.radius * Vector2::new(cw_mid.cos(), cw_mid.sin());
            let (start, span) = if inside(&probe) <= inside(&probe_cw) {
                (a1, ccw)
            } else {
                (a2, 2.0 * PI - ccw)
            };
            for (alpha, w) in g.mapped(start, start + span) {
                let dir = Vector2::new(alpha.cos(), alpha.sin());
                rule.points.push(c.center + c.radius * dir);
                rule.weights.push(w * c.radius);
                rule.normals.push(-dir);
            }
        }
        None => {
            let chord = p2 - p1;
            let len = chord.norm();
            if len == 0.0 {
                return Ok(rule);
            }
            let perp = Vector2::new(-chord.y, chord.x) / len;
            for (s, w) in g.mapped(0.0, 1.0) {
                let q = p1 + s * chord;
                let mut d = 0.0;
                for _ in 0..50 {
                    let x = q + d * perp;
                    let v = geom.value(&x);
                    let slope = geom.geometry.gradient(&x, geom.t).dot(&perp);
                    if slope.abs() < 1e-14 {
                        break;
                    }
                    let step = v / slope;
                    d -= step;
                    if step.abs() < 1e-15 * geom.h {
                        break;
                    }
                }
                let x = q + d * perp;
                let grad = geom.geometry.gradient(&x, geom.t);
                let dd = -grad.dot(&chord) / grad.dot(&perp);
                let speed = (chord + dd * perp).norm();
                rule.points.push(x);
                rule.weights.push(w * speed);
                rule.normals.push(fluid_normal(&geom.geometry, &x, geom.t)?);
            }
        }
    }
    Ok(rule)
}

/// Volume and boundary rules of a cut cell made of several pieces. Wholly
/// fluid pieces get a tensor Gauss rule with `m_outer` points per direction.
pub fn cut_cell_rules(pieces: &[CutPiece], m_outer: usize, m_inner: usize, m_line: usize) -> Result<(QuadratureRule, LineRule)> {
    let mut volume = QuadratureRule::default();
    let mut boundary = LineRule::default();
    for piece in pieces {
        match piece {
            CutPiece::Fluid(rect) => volume.append(full_cell_quadrature(rect, m_outer)?),
            CutPiece::Cut(g) => {
                volume.append(cut_cell_quadrature(g, m_outer, m_inner)?);
                boundary.append(embedded_boundary_quadrature(g, m_line)?);
            }
        }
    }
    Ok((volume, boundary))
}

/// Gauss rule on a straight segment.
pub fn segment_quadrature(a: &Point, b: &Point, normal: Vector2<f64>, m: usize) -> Result<LineRule> {
    let g = gauss_1d(m)?;
    let len = (b - a).norm();
    let mut rule = LineRule::default();
    for (&s, &w) in g.points.iter().zip(&g.weights) {
        rule.points.push(a + s * (b - a));
        rule.weights.push(w * len);
        rule.normals.push(normal);
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cut_pieces_rect, cut_topology_rect, LevelSetGeometry, LinearLevelSet, RigidMotion};

    fn lin(a: f64, b: f64, c: f64) -> LevelSetGeometry {
        LevelSetGeometry::new(LinearLevelSet { a, b, c })
    }

    #[test]
    fn gauss_examples() {
        let g = gauss_1d(1).unwrap();
        assert_eq!(g.points.len(), 1);
        assert!((g.points[0] - 0.5).abs() < 1e-15 && (g.weights[0] - 1.0).abs() < 1e-15);
        let g = gauss_1d(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((g.points[0] - (0.5 - d)).abs() < 1e-15);
        assert!((g.points[1] - (0.5 + d)).abs() < 1e-15);
        assert!((g.weights[0] - 0.5).abs() < 1e-15 && (g.weights[1] - 0.5).abs() < 1e-15);
        assert!((g.integrate(|x| x.powi(3)) - 0.25).abs() < 1e-15);
        assert!(gauss_1d(0).is_err());
    }

    #[test]
    fn gauss_moments() {
        for m in 1..=20 {
            let g = gauss_1d(m).unwrap();
            for j in 0..2 * m {
                let exact = 1.0 / (j as f64 + 1.0);
                assert!((g.integrate(|x| x.powi(j as i32)) - exact).abs() < 1e-13, "m={m} j={j}");
            }
            assert!(g.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn radau_examples() {
        let r = gauss_radau_right_1d(1).unwrap();
        assert_eq!(r.points, vec![1.0]);
        assert_eq!(r.weights, vec![1.0]);
        let r = gauss_radau_right_1d(2).unwrap();
        assert!((r.points[0] - 1.0 / 3.0).abs() < 1e-15 && r.points[1] == 1.0);
        assert!((r.weights[0] - 0.75).abs() < 1e-15 && (r.weights[1] - 0.25).abs() < 1e-15);
        let r = gauss_radau_right_1d(3).unwrap();
        let s6 = 6f64.sqrt();
        assert!((r.points[0] - (4.0 - s6) / 10.0).abs() < 1e-15);
        assert!((r.points[1] - (4.0 + s6) / 10.0).abs() < 1e-15);
        assert_eq!(r.points[2], 1.0);
        assert!(gauss_radau_right_1d(0).is_err());
    }

    #[test]
    fn radau_moments() {
        for s in 1..=12 {
            let r = gauss_radau_right_1d(s).unwrap();
            for j in 0..=(2 * s - 2) {
                let exact = 1.0 / (j as f64 + 1.0);
                assert!((r.integrate(|x| x.powi(j as i32)) - exact).abs() < 1e-13, "s={s} j={j}");
            }
        }
    }

    #[test]
    fn full_cell_examples() {
        let q = full_cell_quadrature(&Rect::unit(), 2).unwrap();
        assert!((q.total_weight() - 1.0).abs() < 1e-15);
        assert!((q.integrate(|p| p.x * p.y) - 0.25).abs() < 1e-15);
        assert!((q.integrate(|p| p.x.powi(4)) - 0.2).abs() > 1e-4);
        let q = full_cell_quadrature(&Rect::unit(), 3).unwrap();
        assert!((q.integrate(|p| p.x.powi(4)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cut_cell_examples() {
        let unit = Rect::unit();
        let g = cut_topology_rect(unit, 1.0, 0, &lin(1.0, 0.0, -0.5), 0.0).unwrap();
        let q = cut_cell_quadrature(&g, 2, 2).unwrap();
        assert!((q.total_weight() - 0.5).abs() < 1e-15);
        assert!((q.integrate(|p| p.x) - 0.375).abs() < 1e-15);

        let g = cut_topology_rect(unit, 1.0, 0, &lin(1.0, 1.0, -0.5), 0.0).unwrap();
        let q = cut_cell_quadrature(&g, 3, 3).unwrap();
        assert!((q.total_weight() - 0.875).abs() < 1e-14);
        for p in &q.points {
            assert!(p.x + p.y > 0.5 && unit.contains(p, 0.0));
        }
    }

    #[test]
    fn quarter_circle_area_and_arc() {
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [0.0, 0.0] }, 0.3);
        let g = cut_topology_rect(Rect::unit(), 1.0, 0, &circle, 0.0).unwrap();
        let q = cut_cell_quadrature(&g, 8, 8).unwrap();
        assert!((q.total_weight() - (1.0 - PI * 0.09 / 4.0)).abs() < 1e-12);
        let l = embedded_boundary_quadrature(&g, 20).unwrap();
        assert!((l.total_weight() - PI * 0.3 / 2.0).abs() < 1e-12);
        for (p, n) in l.points.iter().zip(&l.normals) {
            assert!((p.norm() - 0.3).abs() < 1e-14);
            assert!((n + p / p.norm()).norm() < 1e-14);
        }
    }

    #[test]
    fn quarter_arc_radius_point_two() {
        let circle = LevelSetGeometry::circle(RigidMotion::Fixed { center: [1.0, 1.0] }, 0.2);
        let g = cut_topology_rect(Rect::unit(), 1.0, 0, &circle, 0.0).unwrap();
        let l = embedded_boundary_quadrature(&g, 20).unwrap();
        assert!((l.total_weight() - 0.314_159_27).abs() < 1e-8);
    }

    #[test]
    fn straight_embedded_segment() {
        let g = cut_topology_rect(Rect::unit(), 1.0, 0, &lin(1.0, 0.0, -0.5), 0.0).unwrap();
        let l = embedded_boundary_quadrature(&g, 2).unwrap();
        assert!((l.total_weight() - 1.0).abs() < 1e-14);
        // s ↦ y along the segment: midpoint value 0.5 times length 1.
        assert!((l.integrate(|p| p.y) - 0.5).abs() < 1e-14);
        for n in &l.normals {
            assert!((n - Vector2::new(-1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_dump_has_header() {
        let q = full_cell_quadrature(&Rect::unit(), 1).unwrap();
        let csv = q.to_csv();
        assert!(csv.starts_with("x,y,w\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    fn pieces_rules(cx: f64, cy: f64, r: f64) -> (usize, QuadratureRule, LineRule) {
        let geom = LevelSetGeometry::circle(RigidMotion::Fixed { center: [cx, cy] }, r);
        let pieces = cut_pieces_rect(Rect::unit(), 1.0, 0, &geom, 0.0).unwrap();
        let (v, b) = cut_cell_rules(&pieces, 4, 4, 8).unwrap();
        (pieces.len(), v, b)
    }

    #[test]
    fn cap_through_one_edge() {
        let (r, d) = (0.4_f64, 0.3_f64);
        let (n, v, b) = pieces_rules(0.5, -d, r);
        assert_eq!(n, 2);
        let cap = r * r * (d / r).acos() - d * (r * r - d * d).sqrt();
        assert!((v.total_weight() - (1.0 - cap)).abs() < 1e-9);
        assert!((b.total_weight() - 2.0 * r * (d / r).acos()).abs() < 1e-12);
    }

    #[test]
    fn circle_inside_one_cell() {
        let r = 0.2;
        let (n, v, b) = pieces_rules(0.4, 0.55, r);
        assert_eq!(n, 4);
        assert!((v.total_weight() - (1.0 - PI * r * r)).abs() < 1e-7);
        assert!((b.total_weight() - 2.0 * PI * r).abs() < 1e-12);
        let centroid = b.integrate(|p| p.x) / b.total_weight();
        assert!((centroid - 0.4).abs() < 1e-12);
    }
}
