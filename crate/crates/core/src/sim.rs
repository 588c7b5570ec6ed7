//! Closed-loop integration of the leader-follower system.
//!
//! Leaders move analytically (`p₀ + t v*`). Followers are integrated with a
//! fixed-step scheme over their global positions and their local-frame
//! disturbance estimates. All sensing goes through each follower's private
//! frame.

use crate::analysis::{self, SampleMetrics};
use crate::controller::{
    control_input, estimator_derivative, DisturbanceEstimate, LocalMeasurement, NeighborReading,
};
use crate::elevation::sense_local;
use crate::error::{EdgeFault, SimError};
use crate::geometry::Vec3;
use crate::par::{self, Execution};
use crate::scenario::{Integrator, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Global positions of all agents.
    pub p: Vec<Vec3>,
    /// Local-frame disturbance estimates, one per follower.
    pub est: Vec<Vec3>,
}

impl SimState {
    pub fn initial(scenario: &Scenario) -> Self {
        Self {
            t: 0.0,
            p: scenario.initial.clone(),
            est: vec![Vec3::zeros(); scenario.graph.n_followers()],
        }
    }

    /// Estimate of follower `i` rotated into the global frame.
    pub fn estimate_global(&self, scenario: &Scenario, i: usize) -> Vec3 {
        let slot = i - scenario.graph.n_leaders();
        scenario.frames[i].vector_from_local(&self.est[slot])
    }
}

fn fault(t: f64, f: EdgeFault) -> SimError {
    SimError::GeometryFault { t, fault: f }
}

/// What follower `i` measures, in its own frame.
pub fn local_measurement(
    p: &[Vec3],
    i: usize,
    scenario: &Scenario,
) -> Result<LocalMeasurement, EdgeFault> {
    let graph = &scenario.graph;
    let frame = &scenario.frames[i];
    let adjacent = graph.adjacent(i).expect("follower index in range");
    let neighbors = adjacent
        .iter()
        .map(|a| {
            let reading =
                sense_local(&scenario.params, i, frame, &p[i], &p[a.vertex]).map_err(|source| {
                    let (head, tail) = graph.edges()[a.edge];
                    EdgeFault {
                        edge: a.edge,
                        head,
                        tail,
                        source,
                    }
                })?;
            Ok(NeighborReading {
                bearing: *reading.bearing.vector(),
                f: reading.f,
                f_star: scenario.f_star.0[a.edge],
            })
        })
        .collect::<Result<Vec<_>, EdgeFault>>()?;
    Ok(LocalMeasurement { neighbors })
}

/// Local-frame velocity and estimate rate of follower `i`.
pub fn follower_derivative(
    state: &SimState,
    i: usize,
    scenario: &Scenario,
) -> Result<(Vec3, Vec3), SimError> {
    if i >= scenario.graph.n() || scenario.graph.is_leader(i) {
        return Err(SimError::NotAFollower(i));
    }
    follower_rates(&state.p, &state.est, state.t, i, scenario)
}

fn follower_rates(
    p: &[Vec3],
    est: &[Vec3],
    t: f64,
    i: usize,
    scenario: &Scenario,
) -> Result<(Vec3, Vec3), SimError> {
    let meas = local_measurement(p, i, scenario).map_err(|f| fault(t, f))?;
    let slot = i - scenario.graph.n_leaders();
    let u = control_input(&meas, &DisturbanceEstimate(est[slot]), &scenario.gains)?;
    let w_dot = estimator_derivative(&meas, &scenario.gains)?;
    Ok((u + scenario.disturbance_local(i), w_dot))
}

/// Local-frame velocity of leader `i`.
pub fn leader_derivative(i: usize, scenario: &Scenario) -> Result<Vec3, SimError> {
    if !scenario.graph.is_leader(i) {
        return Err(SimError::NotALeader(i));
    }
    Ok(scenario.frames[i].vector_to_local(&scenario.v_star))
}

/// Global velocities of every agent at `state`.
pub fn global_velocities(state: &SimState, scenario: &Scenario) -> Result<Vec<Vec3>, SimError> {
    (0..scenario.graph.n())
        .map(|i| {
            if scenario.graph.is_leader(i) {
                Ok(scenario.v_star)
            } else {
                let (v, _) = follower_derivative(state, i, scenario)?;
                Ok(scenario.frames[i].vector_from_local(&v))
            }
        })
        .collect()
}

/// Value the global estimate of follower `i` settles at: `ω_i - v*`.
pub fn total_disturbance_target(scenario: &Scenario, i: usize) -> Vec3 {
    scenario.disturbance_global(i) - scenario.v_star
}

/// Integrator state: follower positions (global) then estimates (local).
type Flat = Vec<Vec3>;

fn rates(t: f64, y: &Flat, scenario: &Scenario) -> Result<Flat, SimError> {
    let graph = &scenario.graph;
    let nl = graph.n_leaders();
    let nf = graph.n_followers();
    let mut p: Vec<Vec3> = (0..nl).map(|i| scenario.leader_position(i, t)).collect();
    p.extend_from_slice(&y[..nf]);
    let est = &y[nf..];
    let mut out = vec![Vec3::zeros(); 2 * nf];
    for (slot, i) in graph.followers().enumerate() {
        let (v_local, w_dot) = follower_rates(&p, est, t, i, scenario)?;
        out[slot] = scenario.frames[i].vector_from_local(&v_local);
        out[nf + slot] = w_dot;
    }
    Ok(out)
}

fn axpy(y: &Flat, h: f64, k: &Flat) -> Flat {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// Advances `state` by one step of the configured integrator.
pub fn step(state: &SimState, scenario: &Scenario) -> Result<SimState, SimError> {
    let nl = scenario.graph.n_leaders();
    let dt = scenario.sim.dt;
    let t = state.t;
    let mut y: Flat = state.p[nl..].to_vec();
    y.extend_from_slice(&state.est);

    let next = match scenario.sim.integrator {
        Integrator::Euler => axpy(&y, dt, &rates(t, &y, scenario)?),
        Integrator::Rk4 => {
            let k1 = rates(t, &y, scenario)?;
            let k2 = rates(t + dt / 2.0, &axpy(&y, dt / 2.0, &k1), scenario)?;
            let k3 = rates(t + dt / 2.0, &axpy(&y, dt / 2.0, &k2), scenario)?;
            let k4 = rates(t + dt, &axpy(&y, dt, &k3), scenario)?;
            y.iter()
                .enumerate()
                .map(|(j, v)| v + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (dt / 6.0))
                .collect()
        }
    };
    Ok(assemble(state.t + dt, next, scenario))
}

fn assemble(t: f64, y: Flat, scenario: &Scenario) -> SimState {
    let nl = scenario.graph.n_leaders();
    let nf = scenario.graph.n_followers();
    let mut p: Vec<Vec3> = (0..nl).map(|i| scenario.leader_position(i, t)).collect();
    p.extend_from_slice(&y[..nf]);
    SimState {
        t,
        p,
        est: y[nf..].to_vec(),
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub p: Vec<Vec3>,
    /// Local-frame estimates, one per follower.
    pub est: Vec<Vec3>,
    pub metrics: SampleMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub n: usize,
    pub m: usize,
    pub samples: Vec<Sample>,
}

impl TrajectoryLog {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("log has at least the initial sample")
    }
}

/// Integrates `scenario` to `t_end` and returns the raw states at every
/// sampled step, plus the final state.
pub fn integrate(scenario: &Scenario) -> Result<(Vec<SimState>, SimState), SimError> {
    let settings = scenario.sim;
    let steps = settings.steps();
    let mut state = SimState::initial(scenario);
    let mut kept = Vec::with_capacity(settings.sample_count());
    kept.push(state.clone());
    for k in 1..=steps {
        let mut next = step(&state, scenario)?;
        // Keep time on the grid instead of accumulating rounding.
        next.t = k as f64 * settings.dt;
        for i in scenario.graph.leaders() {
            next.p[i] = scenario.leader_position(i, next.t);
        }
        state = next;
        if k % settings.sample_stride == 0 {
            kept.push(state.clone());
        }
    }
    Ok((kept, state))
}

/// Runs the scenario and evaluates the Lyapunov/FTISS diagnostics at every
/// sample.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog, SimError> {
    run_with(scenario, Execution::default())
}

pub fn run_with(scenario: &Scenario, exec: Execution) -> Result<TrajectoryLog, SimError> {
    check_rigidity(scenario)?;
    let (states, _) = integrate(scenario)?;
    log_from_states(scenario, states, exec)
}

/// Turns raw sampled states into a log, evaluating metrics per sample.
pub fn log_from_states(
    scenario: &Scenario,
    states: Vec<SimState>,
    exec: Execution,
) -> Result<TrajectoryLog, SimError> {
    let metrics = par::map(exec, &states, |s| analysis::sample_metrics(scenario, s));
    let samples = states
        .into_iter()
        .zip(metrics)
        .map(|(s, m)| {
            Ok(Sample {
                t: s.t,
                metrics: m.map_err(|f| fault(s.t, f))?,
                p: s.p,
                est: s.est,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(TrajectoryLog {
        n: scenario.graph.n(),
        m: scenario.graph.m(),
        samples,
    })
}

pub fn check_rigidity(scenario: &Scenario) -> Result<(), SimError> {
    let report = scenario.desired_rigidity().map_err(|f| fault(0.0, f))?;
    if report.rigid {
        Ok(())
    } else {
        Err(SimError::RigidityCheckFailed {
            rank: report.rank,
            required: report.required,
        })
    }
}

/// Runs independent scenarios, concurrently when `exec` allows.
pub fn run_many(scenarios: &[Scenario], exec: Execution) -> Vec<Result<TrajectoryLog, SimError>> {
    // Each run already parallelizes its sample analysis; keep that inner
    // loop sequential when runs are spread across threads.
    par::map(exec, scenarios, |s| run_with(s, Execution::Sequential))
}
