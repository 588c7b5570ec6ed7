//! Complete experiment description and its invariants.

use nalgebra::{DMatrix, DVector};

use crate::controller::ControlGains;
use crate::elevation::{
    elevation_function, is_infinitesimally_rigid, rigidity_matrix, ElevationParams,
    ElevationVector, Mode, RankReport,
};
use crate::error::EdgeFault;
use crate::geometry::{axis_angle, AgentFrame, Vec3};
use crate::graph::FormationGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub sample_stride: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 30.0,
            integrator: Integrator::Rk4,
            sample_stride: 10,
        }
    }
}

impl SimSettings {
    /// Number of integration steps covering `[0, t_end]`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    /// Number of logged samples, including `t = 0`.
    pub fn sample_count(&self) -> usize {
        self.steps() / self.sample_stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceFrame {
    Global,
    Local,
}

/// Per-follower constant disturbance, as written in the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub frame: DisturbanceFrame,
    /// One vector per follower, in follower order.
    pub values: Vec<Vec3>,
}

/// Frame given as a rotation about an axis plus a translation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrameSpec {
    pub angle: f64,
    pub axis: [f64; 3],
    pub translation: [f64; 3],
}

impl FrameSpec {
    pub fn to_frame(&self) -> Result<AgentFrame, crate::error::GeometryError> {
        let q = axis_angle(&Vec3::from(self.axis), self.angle)?;
        AgentFrame::new(q, Vec3::from(self.translation))
    }
}

/// Where the desired configuration used for the rigidity check came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeSource {
    Given,
    /// Solved from the desired distances starting at the initial positions.
    Realized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub graph: FormationGraph,
    pub params: ElevationParams,
    pub gains: ControlGains,
    pub frames: Vec<AgentFrame>,
    /// The frames as written in the file, when any were.
    pub frame_specs: Option<Vec<FrameSpec>>,
    pub initial: Vec<Vec3>,
    pub disturbance: Disturbance,
    pub v_star: Vec3,
    pub desired_distances: Vec<f64>,
    pub f_star: ElevationVector,
    pub desired_shape: Vec<Vec3>,
    pub shape_source: ShapeSource,
    pub sim: SimSettings,
}

impl Scenario {
    pub fn dimension(&self) -> usize {
        self.params.dimension()
    }

    /// Position of follower `i` in the follower list.
    fn follower_slot(&self, i: usize) -> usize {
        i - self.graph.n_leaders()
    }

    /// Disturbance acting on follower `i`, global frame.
    pub fn disturbance_global(&self, i: usize) -> Vec3 {
        let w = self.disturbance.values[self.follower_slot(i)];
        match self.disturbance.frame {
            DisturbanceFrame::Global => w,
            DisturbanceFrame::Local => self.frames[i].vector_from_local(&w),
        }
    }

    /// Disturbance acting on follower `i`, in its own frame.
    pub fn disturbance_local(&self, i: usize) -> Vec3 {
        let w = self.disturbance.values[self.follower_slot(i)];
        match self.disturbance.frame {
            DisturbanceFrame::Global => self.frames[i].vector_to_local(&w),
            DisturbanceFrame::Local => w,
        }
    }

    /// Leader position at time `t`.
    pub fn leader_position(&self, i: usize, t: f64) -> Vec3 {
        self.initial[i] + self.v_star * t
    }

    /// Rank test of the desired configuration.
    pub fn desired_rigidity(&self) -> Result<RankReport, EdgeFault> {
        let r = rigidity_matrix(&self.desired_shape, &self.graph, &self.params)?;
        Ok(is_infinitesimally_rigid(
            &r,
            self.dimension(),
            self.graph.n(),
        ))
    }

    /// Every violated invariant, as readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.graph.n();
        let m = self.graph.m();
        let planar = self.params.mode() == Mode::Planar;

        out.extend(self.gains.violations());
        if !(self.sim.dt > 0.0) || !self.sim.dt.is_finite() {
            out.push(format!("dt must be positive, got {}", self.sim.dt));
        }
        if !(self.sim.t_end > 0.0) || !self.sim.t_end.is_finite() {
            out.push(format!("t_end must be positive, got {}", self.sim.t_end));
        }
        if self.sim.sample_stride == 0 {
            out.push("sample_stride must be at least 1".into());
        }
        if self.desired_distances.len() != m || self.f_star.len() != m {
            out.push(format!(
                "expected {m} desired distances (one per edge), got {}",
                self.desired_distances.len()
            ));
        }
        for (k, &l) in self.desired_distances.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                out.push(format!(
                    "desired distance of edge {} must be positive",
                    k + 1
                ));
            } else if !planar && !(l > 2.0 * self.params.rho()) {
                out.push(format!(
                    "desired distance of edge {} must exceed twice the ball radius",
                    k + 1
                ));
            }
        }
        if self.initial.len() != n {
            out.push(format!(
                "expected {n} initial positions, got {}",
                self.initial.len()
            ));
        }
        if self.frames.len() != n {
            out.push(format!("expected {n} frames, got {}", self.frames.len()));
        }
        if self.disturbance.values.len() != self.graph.n_followers() {
            out.push(format!(
                "expected {} disturbance vectors (one per follower), got {}",
                self.graph.n_followers(),
                self.disturbance.values.len()
            ));
        }
        if planar {
            for (i, p) in self.initial.iter().enumerate() {
                if p.z != 0.0 {
                    out.push(format!("planar scenario: agent {} has nonzero z", i + 1));
                }
            }
            for (i, f) in self.frames.iter().enumerate() {
                if !f.is_planar() {
                    out.push(format!(
                        "planar scenario: frame of agent {} must rotate about z with zero z-translation",
                        i + 1
                    ));
                }
            }
            for (k, w) in self.disturbance.values.iter().enumerate() {
                if w.z != 0.0 {
                    out.push(format!(
                        "planar scenario: disturbance of follower {} has nonzero z",
                        k + 1
                    ));
                }
            }
            if self.v_star.z != 0.0 {
                out.push("planar scenario: v_star has nonzero z".into());
            }
        }
        if !out.is_empty() {
            // Geometry checks below assume consistent sizes.
            return out;
        }

        if let Err(fault) = elevation_function(&self.initial, &self.graph, &self.params) {
            out.push(format!("initial configuration: {fault}"));
        }
        for k in 0..m {
            if self.graph.is_leader_edge(k) {
                let (a, b) = self.graph.edges()[k];
                let l = (self.initial[a] - self.initial[b]).norm();
                if (l - self.desired_distances[k]).abs() > 1e-6 {
                    out.push(format!(
                        "leaders {} and {} are {l} m apart but edge {} asks for {}",
                        a + 1,
                        b + 1,
                        k + 1,
                        self.desired_distances[k]
                    ));
                }
            }
        }
        if self.desired_shape.len() != n {
            out.push("desired shape has the wrong number of agents".into());
            return out;
        }
        let residual = distance_residual(&self.desired_shape, &self.graph, &self.desired_distances);
        if residual > 1e-6 {
            out.push(format!(
                "desired distances are not realized by the desired shape (max error {residual:e} m)"
            ));
        }
        match self.desired_rigidity() {
            Ok(report) if !report.rigid => out.push(format!(
                "desired formation is not infinitesimally elevation rigid (rank {} of {})",
                report.rank, report.required
            )),
            Ok(_) => {}
            Err(fault) => out.push(format!("desired shape: {fault}")),
        }
        out
    }
}

/// Largest `| ‖p_head - p_tail‖ - l* |` over the edges.
pub fn distance_residual(p: &[Vec3], graph: &FormationGraph, distances: &[f64]) -> f64 {
    graph
        .edges()
        .iter()
        .zip(distances)
        .map(|(&(h, t), l)| ((p[h] - p[t]).norm() - l).abs())
        .fold(0.0, f64::max)
}

/// Finds follower positions matching the desired distances with leaders
/// held at `start`, by damped Gauss-Newton from `start`. Planar scenarios
/// stay in the `z = 0` plane.
pub fn realize_shape(
    start: &[Vec3],
    graph: &FormationGraph,
    distances: &[f64],
    mode: Mode,
) -> Option<Vec<Vec3>> {
    let axes = mode.dimension();
    let followers: Vec<usize> = graph.followers().collect();
    let unknowns = followers.len() * axes;
    let mut p = start.to_vec();
    if unknowns == 0 {
        return (distance_residual(&p, graph, distances) < 1e-9).then_some(p);
    }
    let scale = distances.iter().copied().fold(1.0, f64::max);

    let residuals = |p: &[Vec3]| -> DVector<f64> {
        DVector::from_iterator(
            graph.m(),
            graph
                .edges()
                .iter()
                .zip(distances)
                .map(|(&(h, t), l)| (p[h] - p[t]).norm() - l),
        )
    };
    let mut r = residuals(&p);
    let mut cost = r.norm_squared();
    let mut damping = 1e-3;

    for _ in 0..500 {
        if r.amax() < 1e-13 * scale {
            break;
        }
        let mut jac = DMatrix::zeros(graph.m(), unknowns);
        for (k, &(h, t)) in graph.edges().iter().enumerate() {
            let e = p[h] - p[t];
            let len = e.norm();
            if len < 1e-12 {
                continue;
            }
            let g = e / len;
            for (slot, &v) in followers.iter().enumerate() {
                let sign = if v == h {
                    1.0
                } else if v == t {
                    -1.0
                } else {
                    continue;
                };
                for c in 0..axes {
                    jac[(k, slot * axes + c)] = sign * g[c];
                }
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..unknowns {
                a[(d, d)] += damping * (1.0 + jtj[(d, d)]);
            }
            let Some(delta) = a.lu().solve(&(-&grad)) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for (slot, &v) in followers.iter().enumerate() {
                for c in 0..axes {
                    trial[v][c] += delta[slot * axes + c];
                }
            }
            let r_trial = residuals(&trial);
            let c_trial = r_trial.norm_squared();
            if c_trial < cost {
                p = trial;
                r = r_trial;
                cost = c_trial;
                damping = (damping / 3.0).max(1e-12);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (distance_residual(&p, graph, distances) < 1e-9 * scale).then_some(p)
}

/// Convenience for building scenarios in code; the desired shape is
/// realized from `initial` unless given.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    pub name: String,
    pub graph: FormationGraph,
    pub params: ElevationParams,
    pub gains: ControlGains,
    pub initial: Vec<Vec3>,
    pub frame_specs: Option<Vec<FrameSpec>>,
    pub disturbance: Disturbance,
    pub v_star: Vec3,
    pub desired_distances: Vec<f64>,
    pub desired_shape: Option<Vec<Vec3>>,
    pub sim: SimSettings,
}

impl ScenarioBuilder {
    /// Assembles the scenario, reporting every violated invariant.
    pub fn build(self) -> Result<Scenario, Vec<String>> {
        let n = self.graph.n();
        let mut problems = Vec::new();
        let frames = match &self.frame_specs {
            None => vec![AgentFrame::identity(); n],
            Some(specs) => specs
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    s.to_frame().unwrap_or_else(|e| {
                        problems.push(format!("frame of agent {}: {e}", i + 1));
                        AgentFrame::identity()
                    })
                })
                .collect(),
        };
        let f_star = ElevationVector::from_distances(&self.desired_distances, &self.params);
        let (desired_shape, shape_source) = match self.desired_shape {
            Some(shape) => (shape, ShapeSource::Given),
            None => {
                let sizes_ok =
                    self.initial.len() == n && self.desired_distances.len() == self.graph.m();
                let realized = sizes_ok
                    .then(|| {
                        realize_shape(
                            &self.initial,
                            &self.graph,
                            &self.desired_distances,
                            self.params.mode(),
                        )
                    })
                    .flatten();
                match realized {
                    Some(shape) => (shape, ShapeSource::Realized),
                    None => {
                        if sizes_ok {
                            problems.push(
                                "could not realize the desired distances from the initial positions; give [formation].shape explicitly"
                                    .into(),
                            );
                        }
                        (Vec::new(), ShapeSource::Realized)
                    }
                }
            }
        };
        let scenario = Scenario {
            name: self.name,
            graph: self.graph,
            params: self.params,
            gains: self.gains,
            frames,
            frame_specs: self.frame_specs,
            initial: self.initial,
            disturbance: self.disturbance,
            v_star: self.v_star,
            desired_distances: self.desired_distances,
            f_star,
            desired_shape,
            shape_source,
            sim: self.sim,
        };
        let shape_missing = scenario.desired_shape.is_empty();
        problems.extend(
            scenario
                .violations()
                .into_iter()
                .filter(|v| !(shape_missing && v.starts_with("desired shape has"))),
        );
        if problems.is_empty() {
            Ok(scenario)
        } else {
            Err(problems)
        }
    }
}
