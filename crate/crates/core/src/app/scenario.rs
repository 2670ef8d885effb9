//! Scenario description: a TOML file fully determines a run.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector2;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::forms::{
    zero_field, BoundaryData, FluidParameters, GhostPenaltyConfig, NavierStokesProblem, NitscheConfig, VectorField,
};
use crate::geometry::{LevelSetGeometry, RigidMotion};
use crate::mesh::{Axis, BackgroundMesh, BoundaryTags, Point, Rect};
use crate::solver::NewtonConfig;

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("must be positive, got {v}")))
    }
}

fn positive_count<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[usize; 2], D::Error> {
    let v = <[usize; 2]>::deserialize(d)?;
    if v[0] > 0 && v[1] > 0 {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("cell counts must be positive, got {v:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub extent: Rect,
    /// Background cells `[nx, ny]` on refinement level 0.
    #[serde(deserialize_with = "positive_count")]
    pub cells: [usize; 2],
    #[serde(default)]
    pub boundary: BoundaryTags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t_start: f64,
    #[serde(deserialize_with = "positive")]
    pub t_end: f64,
    #[serde(deserialize_with = "positive")]
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Polynomial degree in time.
    pub k: usize,
    /// Velocity degree in space; the pressure uses `r − 1`.
    pub r: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    #[serde(deserialize_with = "positive")]
    pub nu: f64,
}

/// Parabolic profile across the left side, optionally ramped up linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflowConfig {
    #[serde(deserialize_with = "positive")]
    pub peak: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_time: Option<f64>,
}

impl InflowConfig {
    pub fn velocity(&self, extent: &Rect, x: &Point, t: f64) -> Vector2<f64> {
        let (y0, y1) = (extent.y_min, extent.y_max);
        let h = y1 - y0;
        let ramp = match self.ramp_time {
            Some(tr) => (t / tr).clamp(0.0, 1.0),
            None => 1.0,
        };
        Vector2::new(4.0 * self.peak * (x.y - y0) * (y1 - x.y) / (h * h) * ramp, 0.0)
    }
}

/// Dirichlet datum on the body boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyVelocity {
    /// Velocity of the rigid motion.
    Rigid,
    /// The inflow profile continued through the channel.
    InflowProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    #[serde(deserialize_with = "positive")]
    pub radius: f64,
    pub motion: RigidMotion,
    pub velocity: BodyVelocity,
}

/// Closed-form solutions used for error measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    /// Divergence-free trigonometric field on the unit square, vanishing on
    /// its boundary, with matching body force.
    Trigonometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceOutput {
    #[serde(deserialize_with = "positive")]
    pub l_ref: f64,
    #[serde(deserialize_with = "positive")]
    pub u_bar: f64,
    /// Statistics and frequency use samples from this time on.
    #[serde(default)]
    pub statistics_from: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionOutput {
    /// Direction of the sampling line.
    pub along: Axis,
    /// Coordinate of the line in the other direction.
    pub at: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<ForceOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<SectionOutput>,
    /// Times (rounded up to slab ends) at which fields and sections are written.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    /// Write the field file at the final time.
    #[serde(default)]
    pub fields: bool,
}

/// A fully resolved run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// With an exact solution: number of simultaneous (τ, h) halvings of a
    /// convergence study. Otherwise: number of mesh halvings of a single run.
    #[serde(default)]
    pub refine: usize,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    pub discretization: DiscretizationConfig,
    pub fluid: FluidConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<InflowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<BodyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSolution>,
    #[serde(default)]
    pub nitsche: NitscheConfig,
    #[serde(default)]
    pub ghost_penalty: GhostPenaltyConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

pub const BUILTIN_NAMES: [&str; 4] = ["convergence", "dfg_cylinder", "dynamic_poiseuille", "moving_cylinder"];

impl Scenario {
    pub fn builtin(name: &str) -> Result<Scenario> {
        let s = match name {
            "convergence" => convergence(),
            "dfg_cylinder" => dfg_cylinder(),
            "dynamic_poiseuille" => dynamic_poiseuille(),
            "moving_cylinder" => moving_cylinder(),
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}' (available: {})",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks parameter ranges, the discretization and the wall clearance of the body.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let e = &self.domain.extent;
        if !(e.x_max > e.x_min && e.y_max > e.y_min) {
            return bad(format!("domain extent {e:?} is empty"));
        }
        if self.domain.cells[0] == 0 || self.domain.cells[1] == 0 {
            return bad("cell counts must be positive".into());
        }
        let t = &self.time;
        if !(t.tau > 0.0 && t.tau.is_finite()) {
            return bad(format!("time step tau must be positive, got {}", t.tau));
        }
        if !(t.t_end > t.t_start) {
            return bad(format!("t_end {} must exceed t_start {}", t.t_end, t.t_start));
        }
        if !(self.fluid.nu > 0.0 && self.fluid.nu.is_finite()) {
            return bad(format!("viscosity must be positive, got {}", self.fluid.nu));
        }
        if self.discretization.r < 2 {
            return bad(format!("velocity degree r = {} must be at least 2", self.discretization.r));
        }
        if self.discretization.r > crate::fe_space::MAX_DEGREE {
            return bad(format!("velocity degree r = {} is not supported", self.discretization.r));
        }
        if let Some(inflow) = &self.inflow {
            if inflow.ramp_time.is_some_and(|r| r <= 0.0) {
                return bad("inflow ramp_time must be positive".into());
            }
        }
        if self.exact.is_some() && self.body.is_some() {
            return bad("an exact solution is only available without a body".into());
        }
        if let Some(body) = &self.body {
            let range = body.motion.center_range();
            let clearance = [
                range.x_min - body.radius - e.x_min,
                e.x_max - (range.x_max + body.radius),
                range.y_min - body.radius - e.y_min,
                e.y_max - (range.y_max + body.radius),
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            if clearance <= 0.0 {
                return bad(format!(
                    "body of radius {} touches the domain boundary along its path (clearance {clearance:.3e})",
                    body.radius
                ));
            }
            if let RigidMotion::HarmonicX { omega, .. } = body.motion {
                if !omega.is_finite() {
                    return bad("body angular frequency must be finite".into());
                }
            }
        }
        for s in &self.output.sections {
            if s.samples < 2 {
                return bad("a cross section needs at least two samples".into());
            }
        }
        if let Some(f) = &self.output.forces {
            if self.body.is_none() {
                return bad("force output requires a body".into());
            }
            if !(f.l_ref > 0.0 && f.u_bar > 0.0) {
                return bad("force normalization must be positive".into());
            }
        }
        self.newton.validate()
    }

    /// Number of slabs covering `[t_start, t_end]` with step `tau`.
    pub fn n_slabs(&self, tau: f64) -> usize {
        let n = (self.time.t_end - self.time.t_start) / tau;
        ((n - 1e-9).ceil() as usize).max(1)
    }

    pub fn cells_at(&self, level: usize) -> [usize; 2] {
        let f = 1usize << level;
        [self.domain.cells[0] * f, self.domain.cells[1] * f]
    }

    /// Levels run by this scenario and their `(cells, tau)`.
    pub fn levels(&self) -> Vec<(usize, [usize; 2], f64)> {
        if self.exact.is_some() {
            (0..=self.refine)
                .map(|l| (l, self.cells_at(l), self.time.tau / (1u64 << l) as f64))
                .collect()
        } else {
            vec![(self.refine, self.cells_at(self.refine), self.time.tau)]
        }
    }

    pub fn geometry(&self) -> LevelSetGeometry {
        match &self.body {
            Some(b) => LevelSetGeometry::circle(b.motion, b.radius),
            None => LevelSetGeometry::none(),
        }
    }

    fn inflow_field(&self) -> VectorField {
        match &self.inflow {
            Some(cfg) => {
                let cfg = cfg.clone();
                let extent = self.domain.extent;
                Arc::new(move |x, t| cfg.velocity(&extent, x, t))
            }
            None => zero_field(),
        }
    }

    pub fn boundary_data(&self) -> BoundaryData {
        let inflow = self.inflow_field();
        let body = match &self.body {
            Some(b) => match b.velocity {
                BodyVelocity::Rigid => {
                    let m = b.motion;
                    Arc::new(move |_: &Point, t: f64| m.velocity_at(t)) as VectorField
                }
                BodyVelocity::InflowProfile => inflow.clone(),
            },
            None => zero_field(),
        };
        BoundaryData {
            inflow,
            wall: zero_field(),
            body,
        }
    }

    pub fn fluid_parameters(&self) -> FluidParameters {
        let nu = self.fluid.nu;
        let mut p = FluidParameters::new(nu);
        if let Some(ExactSolution::Trigonometric) = self.exact {
            p.body_force = Arc::new(move |x, t| trigonometric::force(x, t, nu));
        }
        p
    }

    /// The spatial problem on `cells` background cells.
    pub fn problem(&self, cells: [usize; 2]) -> Result<NavierStokesProblem> {
        let mesh = BackgroundMesh::with_tags(self.domain.extent, cells[0], cells[1], self.domain.boundary)?;
        NavierStokesProblem::new(
            mesh,
            self.discretization.r,
            self.geometry(),
            self.fluid_parameters(),
            self.nitsche,
            self.ghost_penalty,
            self.boundary_data(),
        )
    }

    pub fn exact_velocity(&self, x: &Point, t: f64) -> Option<Vector2<f64>> {
        self.exact.map(|e| match e {
            ExactSolution::Trigonometric => trigonometric::velocity(x, t),
        })
    }

    pub fn exact_pressure(&self, x: &Point, t: f64) -> Option<f64> {
        self.exact.map(|e| match e {
            ExactSolution::Trigonometric => trigonometric::pressure(x, t),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.domain.extent;
        write!(
            f,
            "{}: ({}, {}) x ({}, {}), {}x{} cells, T = {}, tau = {}, k = {}, r = {}, nu = {}",
            self.name,
            e.x_min,
            e.x_max,
            e.y_min,
            e.y_max,
            self.domain.cells[0],
            self.domain.cells[1],
            self.time.t_end,
            self.time.tau,
            self.discretization.k,
            self.discretization.r,
            self.fluid.nu
        )
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn convergence() -> Scenario {
    Scenario {
        name: "convergence".into(),
        refine: 3,
        domain: DomainConfig {
            extent: Rect::unit(),
            cells: [8, 8],
            boundary: BoundaryTags::all(crate::mesh::BoundaryKind::Wall),
        },
        time: TimeConfig {
            t_start: 0.0,
            t_end: 1.0,
            tau: 0.1,
        },
        discretization: DiscretizationConfig { k: 1, r: 2 },
        fluid: FluidConfig { nu: 1.0 },
        inflow: None,
        body: None,
        exact: Some(ExactSolution::Trigonometric),
        nitsche: NitscheConfig::default(),
        ghost_penalty: GhostPenaltyConfig::default(),
        newton: NewtonConfig::default(),
        output: OutputConfig::default(),
    }
}

fn dfg_cylinder() -> Scenario {
    Scenario {
        name: "dfg_cylinder".into(),
        refine: 0,
        domain: DomainConfig {
            extent: Rect::new(0.0, 2.2, 0.0, 0.41),
            cells: [80, 16],
            boundary: BoundaryTags::default(),
        },
        time: TimeConfig {
            t_start: 0.0,
            t_end: 10.0,
            tau: 0.005,
        },
        discretization: DiscretizationConfig { k: 1, r: 2 },
        fluid: FluidConfig { nu: 1e-3 },
        inflow: Some(InflowConfig {
            peak: 1.5,
            ramp_time: None,
        }),
        body: Some(BodyConfig {
            radius: 0.05,
            motion: RigidMotion::Fixed { center: [0.2, 0.2] },
            velocity: BodyVelocity::Rigid,
        }),
        exact: None,
        nitsche: NitscheConfig::default(),
        ghost_penalty: GhostPenaltyConfig::default(),
        newton: NewtonConfig::default(),
        output: OutputConfig {
            forces: Some(ForceOutput {
                l_ref: 0.1,
                u_bar: 1.0,
                statistics_from: 7.0,
            }),
            sections: Vec::new(),
            snapshots: Vec::new(),
            fields: true,
        },
    }
}

fn dynamic_poiseuille() -> Scenario {
    Scenario {
        name: "dynamic_poiseuille".into(),
        refine: 0,
        domain: DomainConfig {
            extent: Rect::new(0.0, 3.0, -0.5, 0.5),
            cells: [96, 32],
            boundary: BoundaryTags::default(),
        },
        time: TimeConfig {
            t_start: 0.0,
            t_end: 40.0,
            tau: 0.1,
        },
        discretization: DiscretizationConfig { k: 1, r: 2 },
        fluid: FluidConfig { nu: 1e-3 },
        // U_in (l_y² − y²) with U_in = 1, l_y = 0.5.
        inflow: Some(InflowConfig {
            peak: 0.25,
            ramp_time: None,
        }),
        body: Some(BodyConfig {
            radius: 0.2,
            motion: RigidMotion::HarmonicX {
                center0: [1.545, 0.0],
                amplitude: 0.8,
                omega: 0.2,
            },
            velocity: BodyVelocity::InflowProfile,
        }),
        exact: None,
        nitsche: NitscheConfig::default(),
        ghost_penalty: GhostPenaltyConfig::default(),
        newton: NewtonConfig::default(),
        output: OutputConfig {
            forces: None,
            sections: vec![
                SectionOutput {
                    along: Axis::Y,
                    at: 2.34,
                    samples: 101,
                },
                SectionOutput {
                    along: Axis::X,
                    at: 0.0,
                    samples: 301,
                },
            ],
            snapshots: Vec::new(),
            fields: true,
        },
    }
}

fn moving_cylinder() -> Scenario {
    Scenario {
        name: "moving_cylinder".into(),
        refine: 0,
        domain: DomainConfig {
            extent: Rect::new(0.0, 3.0, 0.0, 1.0),
            cells: [96, 32],
            boundary: BoundaryTags::default(),
        },
        time: TimeConfig {
            t_start: 0.0,
            t_end: 29.0,
            tau: 0.01,
        },
        discretization: DiscretizationConfig { k: 1, r: 2 },
        fluid: FluidConfig { nu: 1e-3 },
        inflow: Some(InflowConfig {
            peak: 1.5,
            ramp_time: Some(1.0),
        }),
        body: Some(BodyConfig {
            radius: 0.2,
            motion: RigidMotion::HarmonicX {
                center0: [1.545, 0.6],
                amplitude: 0.8,
                omega: 0.5,
            },
            velocity: BodyVelocity::Rigid,
        }),
        exact: None,
        nitsche: NitscheConfig::default(),
        ghost_penalty: GhostPenaltyConfig::default(),
        newton: NewtonConfig::default(),
        output: OutputConfig {
            forces: None,
            sections: Vec::new(),
            snapshots: vec![10.12],
            fields: true,
        },
    }
}

/// The trigonometric manufactured solution on the unit square.
pub mod trigonometric {
    use super::*;

    pub fn velocity(x: &Point, t: f64) -> Vector2<f64> {
        let (sx, cx) = (PI * x.x).sin_cos();
        let (sy, cy) = (PI * x.y).sin_cos();
        let st = t.sin();
        Vector2::new(st * sx * sx * sy * cy, -st * sy * sy * sx * cx)
    }

    pub fn pressure(x: &Point, t: f64) -> f64 {
        let (sx, cx) = (PI * x.x).sin_cos();
        let (sy, cy) = (PI * x.y).sin_cos();
        t.sin() * sx * cx * sy * cy
    }

    /// `∂_t v − ν Δv + (v·∇)v + ∇p`.
    pub fn force(x: &Point, t: f64, nu: f64) -> Vector2<f64> {
        let (sx, cx) = (PI * x.x).sin_cos();
        let (sy, cy) = (PI * x.y).sin_cos();
        let (st, ct) = t.sin_cos();
        let pi2 = PI * PI;

        let v1 = st * sx * sx * sy * cy;
        let v2 = -st * sy * sy * sx * cx;
        let v1_x = st * 2.0 * PI * sx * cx * sy * cy;
        let v1_y = st * sx * sx * PI * (cy * cy - sy * sy);
        let v2_x = -st * sy * sy * PI * (cx * cx - sx * sx);
        let v2_y = -st * 2.0 * PI * sy * cy * sx * cx;
        let lap1 = st * (2.0 * pi2 * (cx * cx - sx * sx) * sy * cy - 4.0 * pi2 * sx * sx * sy * cy);
        let lap2 = -st * (-4.0 * pi2 * sy * sy * sx * cx + 2.0 * pi2 * (cy * cy - sy * sy) * sx * cx);
        let p_x = st * PI * (cx * cx - sx * sx) * sy * cy;
        let p_y = st * sx * cx * PI * (cy * cy - sy * sy);

        Vector2::new(
            ct * sx * sx * sy * cy - nu * lap1 + v1 * v1_x + v2 * v1_y + p_x,
            -ct * sy * sy * sx * cx - nu * lap2 + v1 * v2_x + v2 * v2_y + p_y,
        )
    }
}
