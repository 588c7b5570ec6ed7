//! Lyapunov and finite-time ISS diagnostics along a trajectory.
//!
//! With `z_e = f_E - f*` and `ω̃` the stacked error of the global-frame
//! disturbance estimates (zero on leaders),
//!
//! ```text
//! V1 = ρ/2 ‖z_e‖²          V = V1 + ‖ω̃‖² / (2 k_e)
//! ```
//!
//! `V` never increases along exact solutions. Whenever
//! `‖ω̃‖ ≤ gate_coeff ‖z_e‖^α` the bound `dV1/dt ≤ -decay_coeff V1^((1+α)/2)`
//! holds, where both coefficients depend on the smallest positive eigenvalue
//! `λ⁺` of `R_E M̄ R_Eᵀ` and on `‖H̄ M̄‖`.

use nalgebra::{DMatrix, DVector};

use crate::controller::ControlGains;
use crate::elevation::{
    elevation_function, rigidity_matrix, ElevationVector, RankReport, RigidityMatrix,
};
use crate::error::{AnalysisError, EdgeFault};
use crate::graph::FormationGraph;
use crate::scenario::{Scenario, ShapeSource};
use crate::sim::{SimState, TrajectoryLog};

/// Eigenvalues below this fraction of the largest one count as zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

pub fn formation_error(
    f: &ElevationVector,
    f_star: &ElevationVector,
) -> Result<DVector<f64>, AnalysisError> {
    if f.len() != f_star.len() {
        return Err(AnalysisError::DimensionMismatch {
            left: f.len(),
            right: f_star.len(),
        });
    }
    Ok(&f.0 - &f_star.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValues {
    pub v1: f64,
    pub v: f64,
}

pub fn lyapunov(
    z_e: &DVector<f64>,
    omega_tilde: &DVector<f64>,
    rho: f64,
    ke: f64,
) -> LyapunovValues {
    let v1 = 0.5 * rho * z_e.norm_squared();
    LyapunovValues {
        v1,
        v: v1 + omega_tilde.norm_squared() / (2.0 * ke),
    }
}

/// Stacked `ŵ - ω + v*` over followers (global frame), zero on leaders.
pub fn omega_tilde(scenario: &Scenario, state: &SimState) -> DVector<f64> {
    let mut out = DVector::zeros(3 * scenario.graph.n());
    for i in scenario.graph.followers() {
        let e =
            state.estimate_global(scenario, i) - scenario.disturbance_global(i) + scenario.v_star;
        out.fixed_rows_mut::<3>(3 * i).copy_from(&e);
    }
    out
}

/// Smallest eigenvalue above `EIGEN_TOLERANCE · λ_max` of a symmetric
/// positive-semidefinite matrix.
pub fn smallest_positive_eigenvalue(sym: &DMatrix<f64>) -> Option<f64> {
    if sym.is_empty() {
        return None;
    }
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return None;
    }
    eig.eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > EIGEN_TOLERANCE * max)
        .min_by(f64::total_cmp)
}

/// `R_E M̄ R_Eᵀ`: only follower columns of `R_E` contribute.
pub fn follower_gram(r: &RigidityMatrix, graph: &FormationGraph) -> DMatrix<f64> {
    let start = 3 * graph.n_leaders();
    let rf = r.0.columns(start, r.0.ncols() - start);
    rf * rf.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtissConstants {
    pub lambda_plus: f64,
    pub hm_norm: f64,
    pub gate_coeff: f64,
    pub decay_coeff: f64,
    pub rho: f64,
}

pub fn ftiss_constants(
    r: &RigidityMatrix,
    graph: &FormationGraph,
    gains: &ControlGains,
    rho: f64,
) -> Result<FtissConstants, AnalysisError> {
    let lambda_plus = smallest_positive_eigenvalue(&follower_gram(r, graph))
        .ok_or(AnalysisError::NoPositiveEigenvalue)?;
    let hm_norm = incidence_follower_norm(graph);
    let a = gains.alpha;
    let lam = lambda_plus.powf((1.0 + a) / 2.0);
    Ok(FtissConstants {
        lambda_plus,
        hm_norm,
        gate_coeff: gains.kp * rho.powf(1.0 + a) * lam / (2.0 * hm_norm),
        decay_coeff: 2f64.powf((a - 1.0) / 2.0) * gains.kp * rho.powf((1.0 + a) / 2.0) * lam,
        rho,
    })
}

/// Spectral norm of `H̄ M̄`. Kronecker products with the identity keep the
/// singular values, so the `m × n` product `H M` is enough.
pub fn incidence_follower_norm(graph: &FormationGraph) -> f64 {
    let mut hm = graph.incidence().map(f64::from);
    for i in graph.leaders() {
        hm.column_mut(i).fill(0.0);
    }
    if hm.is_empty() {
        return 0.0;
    }
    hm.svd(false, false).singular_values.max()
}

/// Whether the estimate error is small enough for the finite-time decay
/// bound, and the bound itself (`-decay_coeff · V1^((1+α)/2)`).
pub fn ftiss_gate_and_bound(
    z_e: &DVector<f64>,
    omega_tilde: &DVector<f64>,
    consts: &FtissConstants,
    alpha: f64,
) -> (bool, f64) {
    let z = z_e.norm();
    let gate = omega_tilde.norm() <= consts.gate_coeff * z.powf(alpha);
    let v1 = 0.5 * consts.rho * z * z;
    (gate, -consts.decay_coeff * v1.powf((1.0 + alpha) / 2.0))
}

/// Diagnostics evaluated at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub z_e: DVector<f64>,
    pub v1: f64,
    pub v: f64,
    pub gate: bool,
    /// NaN when `R_E M̄ R_Eᵀ` has no positive eigenvalue at this sample.
    pub bound: f64,
}

pub fn sample_metrics(scenario: &Scenario, state: &SimState) -> Result<SampleMetrics, EdgeFault> {
    let f = elevation_function(&state.p, &scenario.graph, &scenario.params)?;
    let z_e = &f.0 - &scenario.f_star.0;
    let w = omega_tilde(scenario, state);
    let rho = scenario.params.rho();
    let LyapunovValues { v1, v } = lyapunov(&z_e, &w, rho, scenario.gains.ke);
    let r = rigidity_matrix(&state.p, &scenario.graph, &scenario.params)?;
    let (gate, bound) = match ftiss_constants(&r, &scenario.graph, &scenario.gains, rho) {
        Ok(c) => ftiss_gate_and_bound(&z_e, &w, &c, scenario.gains.alpha),
        Err(_) => (false, f64::NAN),
    };
    Ok(SampleMetrics {
        z_e,
        v1,
        v,
        gate,
        bound,
    })
}

/// First sample time after which `‖z_e‖ < eps` for the rest of the log.
pub fn convergence_time(log: &TrajectoryLog, eps: f64) -> Option<f64> {
    let mut first = None;
    for s in log.samples.iter().rev() {
        if s.metrics.z_e.norm() < eps {
            first = Some(s.t);
        } else {
            break;
        }
    }
    first
}

/// `dV1/dt` at every sample: centered differences inside, one-sided at the
/// ends.
pub fn v1_rate(log: &TrajectoryLog) -> Vec<f64> {
    let s = &log.samples;
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            (s[b].metrics.v1 - s[a].metrics.v1) / (s[b].t - s[a].t)
        })
        .collect()
}

/// Rigidity diagnostics at the desired configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityDiagnostics {
    pub rank: RankReport,
    pub shape_source: ShapeSource,
    /// `None` when `R_E M̄ R_Eᵀ` has no positive eigenvalue.
    pub constants: Option<FtissConstants>,
}

pub fn rigidity_report(scenario: &Scenario) -> Result<RigidityDiagnostics, EdgeFault> {
    let r = rigidity_matrix(&scenario.desired_shape, &scenario.graph, &scenario.params)?;
    let rank =
        crate::elevation::is_infinitesimally_rigid(&r, scenario.dimension(), scenario.graph.n());
    Ok(RigidityDiagnostics {
        rank,
        shape_source: scenario.shape_source,
        constants: ftiss_constants(&r, &scenario.graph, &scenario.gains, scenario.params.rho())
            .ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elevation::ElevationParams;
    use crate::geometry::Vec3;
    use approx::assert_abs_diff_eq;

    #[test]
    fn formation_error_examples() {
        let f = ElevationVector(DVector::from_vec(vec![2.0, 3.0]));
        let s = ElevationVector(DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(
            formation_error(&f, &s).unwrap(),
            DVector::from_vec(vec![1.0, 2.0])
        );
        assert_eq!(formation_error(&f, &f).unwrap(), DVector::zeros(2));
        let short = ElevationVector(DVector::from_vec(vec![1.0]));
        assert_eq!(
            formation_error(&f, &short),
            Err(AnalysisError::DimensionMismatch { left: 2, right: 1 })
        );
    }

    #[test]
    fn lyapunov_examples() {
        let zero = lyapunov(&DVector::zeros(3), &DVector::zeros(6), 0.15, 0.1);
        assert_eq!((zero.v1, zero.v), (0.0, 0.0));
        let z = DVector::from_vec(vec![0.0, 2.0]);
        let w = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let l = lyapunov(&z, &w, 0.15, 0.1);
        assert_abs_diff_eq!(l.v1, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(l.v, 0.3 + 5.0, epsilon = 1e-15);
    }

    #[test]
    fn all_leader_graph_has_no_positive_eigenvalue() {
        let graph = FormationGraph::new(2, 2, vec![(0, 1)]).unwrap();
        let p = [Vec3::zeros(), Vec3::x()];
        let r = rigidity_matrix(&p, &graph, &ElevationParams::planar(1.0).unwrap()).unwrap();
        let gains = ControlGains::new(0.5, 0.1, 0.5).unwrap();
        assert_eq!(
            ftiss_constants(&r, &graph, &gains, 1.0),
            Err(AnalysisError::NoPositiveEigenvalue)
        );
    }

    #[test]
    fn single_follower_edge_has_unit_eigenvalue() {
        // 3 vertices so two are leaders; the follower hangs off leader 2 only
        // through one edge, and the leader pair edge has no follower column.
        let graph = FormationGraph::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        let p = [Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 2.0, 0.0)];
        let r = rigidity_matrix(&p, &graph, &ElevationParams::planar(1.0).unwrap()).unwrap();
        let gram = follower_gram(&r, &graph);
        assert_abs_diff_eq!(gram[(1, 1)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            smallest_positive_eigenvalue(&gram).unwrap(),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gate_examples() {
        let consts = FtissConstants {
            lambda_plus: 1.0,
            hm_norm: 1.0,
            gate_coeff: 0.3,
            decay_coeff: 0.7,
            rho: 0.5,
        };
        let z = DVector::from_vec(vec![0.4, 0.3]);
        let (gate, bound) = ftiss_gate_and_bound(&z, &DVector::zeros(6), &consts, 0.5);
        assert!(gate);
        let v1: f64 = 0.5 * 0.5 * 0.25;
        assert_abs_diff_eq!(bound, -0.7 * v1.powf(0.75), epsilon = 1e-15);

        let w = DVector::from_element(6, 0.1);
        let (gate, bound) = ftiss_gate_and_bound(&DVector::zeros(2), &w, &consts, 0.5);
        assert!(!gate);
        assert_eq!(bound, 0.0);
    }

    #[test]
    fn smallest_positive_eigenvalue_ignores_null_space() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 3.0, 1e-14, 0.5]));
        assert_eq!(smallest_positive_eigenvalue(&a), Some(0.5));
        assert_eq!(smallest_positive_eigenvalue(&DMatrix::zeros(3, 3)), None);
    }
}
