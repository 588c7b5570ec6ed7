//! Per-follower control law with adaptive rejection of a constant
//! disturbance. Everything here is expressed in the follower's own frame;
//! nothing global is visible to these functions.

use nalgebra::{allocator::Allocator, DefaultAllocator, Dim, Matrix, OMatrix, Storage};

use crate::error::ControlError;
use crate::geometry::Vec3;

/// Componentwise signed power `sign(x_k) |x_k|^β`.
pub fn sig<R, C, S>(x: &Matrix<f64, R, C, S>, beta: f64) -> OMatrix<f64, R, C>
where
    R: Dim,
    C: Dim,
    S: Storage<f64, R, C>,
    DefaultAllocator: Allocator<R, C>,
{
    x.map(|v| {
        if v == 0.0 {
            0.0
        } else {
            v.signum() * v.abs().powf(beta)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ControlGains {
    pub kp: f64,
    pub ke: f64,
    pub alpha: f64,
}

impl ControlGains {
    pub fn new(kp: f64, ke: f64, alpha: f64) -> Result<Self, ControlError> {
        let gains = Self { kp, ke, alpha };
        let problems = gains.violations();
        if problems.is_empty() {
            Ok(gains)
        } else {
            Err(ControlError::InvalidGains(problems.join("; ")))
        }
    }

    /// Human-readable list of violated gain constraints.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.kp > 0.0) || !self.kp.is_finite() {
            out.push(format!("kp must be positive, got {}", self.kp));
        }
        if !(self.ke > 0.0) || !self.ke.is_finite() {
            out.push(format!("ke must be positive, got {}", self.ke));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        out
    }
}

/// One neighbor as seen by a follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborReading {
    /// Local-frame unit bearing toward the neighbor.
    pub bearing: Vec3,
    pub f: f64,
    pub f_star: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalMeasurement {
    pub neighbors: Vec<NeighborReading>,
}

impl LocalMeasurement {
    /// `Σ_j g_ij (f_ij - f*_ij)`.
    pub fn weighted_error(&self) -> Result<Vec3, ControlError> {
        if self.neighbors.is_empty() {
            return Err(ControlError::EmptyNeighborhood);
        }
        Ok(self
            .neighbors
            .iter()
            .fold(Vec3::zeros(), |acc, r| acc + r.bearing * (r.f - r.f_star)))
    }
}

/// Local-frame estimate of the constant disturbance. Starts at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DisturbanceEstimate(pub Vec3);

/// `u = k_p sig(Σ g (f - f*))^α - ŵ`.
pub fn control_input(
    meas: &LocalMeasurement,
    est: &DisturbanceEstimate,
    gains: &ControlGains,
) -> Result<Vec3, ControlError> {
    let s = meas.weighted_error()?;
    Ok(sig(&s, gains.alpha) * gains.kp - est.0)
}

/// `dŵ/dt = -k_e Σ g (f - f*)`.
pub fn estimator_derivative(
    meas: &LocalMeasurement,
    gains: &ControlGains,
) -> Result<Vec3, ControlError> {
    Ok(meas.weighted_error()? * -gains.ke)
}
