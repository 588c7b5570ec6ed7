//! Elevation-angle sensing and elevation rigidity.
//!
//! In the planar mode every agent carries a vertical rod of height `ρ`; an
//! observer measures the angle between the bearing to a neighbor and the
//! bearing to the top of that neighbor's rod, and `cot θ = l / ρ`. In the
//! spatial mode every agent carries a ball of radius `ρ`; the observer
//! measures the angle between bearings to two antipodal tangent points of
//! the neighbor's ball, and `cosec(θ / 2) = l / ρ`. Either way the per-edge
//! quantity `f = l / ρ` is recovered from bearings alone.

use nalgebra::{DMatrix, DVector};

use crate::error::{EdgeFault, GeometryError};
use crate::geometry::{AgentFrame, BearingVector, FrameTag, Vec3, COINCIDENCE_THRESHOLD};
use crate::graph::FormationGraph;

/// Bearing cosines this close to ±1 no longer resolve an angle.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Singular values below `RANK_TOLERANCE * σ_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Agents in the `z = 0` plane with vertical rods.
    Planar,
    /// Agents in space with spherical shells.
    Spatial,
}

impl Mode {
    pub fn dimension(self) -> usize {
        match self {
            Mode::Planar => 2,
            Mode::Spatial => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationParams {
    mode: Mode,
    rho: f64,
}

impl ElevationParams {
    pub fn new(mode: Mode, rho: f64) -> Result<Self, GeometryError> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(GeometryError::NonPositiveRho { rho });
        }
        Ok(Self { mode, rho })
    }

    pub fn planar(h_c: f64) -> Result<Self, GeometryError> {
        Self::new(Mode::Planar, h_c)
    }

    pub fn spatial(r_c: f64) -> Result<Self, GeometryError> {
        Self::new(Mode::Spatial, r_c)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Rod height (planar) or ball radius (spatial), in meters.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dimension(&self) -> usize {
        self.mode.dimension()
    }
}

/// Per-edge `f_k = l_k / ρ`, in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationVector(pub DVector<f64>);

impl ElevationVector {
    /// Desired values from desired edge lengths.
    pub fn from_distances(distances: &[f64], params: &ElevationParams) -> Self {
        Self(DVector::from_iterator(
            distances.len(),
            distances.iter().map(|l| l / params.rho()),
        ))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `cot θ = l / h_c` for a rod of height `h_c` at distance `l`.
pub fn elevation_f_2d_from_distance(l: f64, h_c: f64) -> Result<f64, GeometryError> {
    if !(l > 0.0) {
        return Err(GeometryError::NonPositiveDistance { distance: l });
    }
    if !(h_c > 0.0) {
        return Err(GeometryError::NonPositiveRho { rho: h_c });
    }
    Ok(l / h_c)
}

/// `cot θ` from the bearing to a neighbor and to the top of its rod.
pub fn elevation_f_2d_from_bearings(
    g_ij: &BearingVector,
    g_ij_top: &BearingVector,
) -> Result<f64, GeometryError> {
    let c = g_ij.dot(g_ij_top);
    if !(c.abs() < 1.0 - ANGLE_TOLERANCE) {
        return Err(GeometryError::DegenerateAngle { cosine: c });
    }
    // The cross product keeps sin θ accurate for the small angles of far
    // neighbors, where 1 - c² would cancel.
    Ok(c / g_ij.vector().cross(g_ij_top.vector()).norm())
}

/// Bearings from `p_i` to the two tangent points of the ball of radius
/// `r_c` around `p_j`, lying in the plane through `p_i`, `p_j` and the z-axis
/// direction (x-axis when the edge is vertical).
pub fn tangent_bearings_3d(
    p_i: &Vec3,
    p_j: &Vec3,
    r_c: f64,
) -> Result<(BearingVector, BearingVector), GeometryError> {
    tangent_bearings_in(FrameTag::Global, p_i, p_j, r_c)
}

pub(crate) fn tangent_bearings_in(
    frame: FrameTag,
    p_i: &Vec3,
    p_j: &Vec3,
    r_c: f64,
) -> Result<(BearingVector, BearingVector), GeometryError> {
    let e = p_j - p_i;
    let l = e.norm();
    if !(l > COINCIDENCE_THRESHOLD) {
        return Err(GeometryError::CoincidentAgents { distance: l });
    }
    if !(l > 2.0 * r_c) {
        return Err(GeometryError::BallsOverlap {
            distance: l,
            radius: r_c,
        });
    }
    let dir = e / l;
    let mut normal = Vec3::z() - dir * dir.z;
    if normal.norm() < 1e-8 {
        normal = Vec3::x() - dir * dir.x;
    }
    let normal = normal.normalize();

    // Tangent lines from p_i touch the sphere at half-angle asin(r/l).
    let sin_b = r_c / l;
    let cos_b = (1.0 - sin_b * sin_b).sqrt();
    let reach = l * cos_b;
    let upper = p_i + (dir * cos_b + normal * sin_b) * reach;
    let lower = p_i + (dir * cos_b - normal * sin_b) * reach;
    Ok((
        BearingVector::from_vector(&(upper - p_i), frame)?,
        BearingVector::from_vector(&(lower - p_i), frame)?,
    ))
}

/// `cosec(θ / 2)` from the bearings to two opposite tangent points.
pub fn elevation_f_3d_from_bearings(
    g1: &BearingVector,
    g2: &BearingVector,
) -> Result<f64, GeometryError> {
    let c = g1.dot(g2);
    if !(c < 1.0 - ANGLE_TOLERANCE) {
        return Err(GeometryError::DegenerateAngle { cosine: c });
    }
    // |g1 - g2| = 2 sin(θ/2), without the cancellation in 1 - c.
    Ok(2.0 / (g1.vector() - g2.vector()).norm())
}

/// What one agent senses about one neighbor, all in a common frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeReading {
    pub bearing: BearingVector,
    pub f: f64,
}

/// Simulated sensor: bearing and elevation value of `p_j` seen from `p_i`,
/// where both points are already expressed in `frame`.
///
/// `up` is the rod direction in that frame (planar mode only).
pub fn sense(
    params: &ElevationParams,
    frame: FrameTag,
    p_i: &Vec3,
    p_j: &Vec3,
    up: &Vec3,
) -> Result<EdgeReading, GeometryError> {
    let bearing = BearingVector::from_vector(&(p_j - p_i), frame)?;
    let f = match params.mode() {
        Mode::Planar => {
            let top = p_j + up * params.rho();
            let to_top = BearingVector::from_vector(&(top - p_i), frame)?;
            elevation_f_2d_from_bearings(&bearing, &to_top)?
        }
        Mode::Spatial => {
            let (g1, g2) = tangent_bearings_in(frame, p_i, p_j, params.rho())?;
            elevation_f_3d_from_bearings(&g1, &g2)?
        }
    };
    Ok(EdgeReading { bearing, f })
}

/// Same as [`sense`] but with both positions given globally and the
/// measurement taken in the observer's private frame.
pub fn sense_local(
    params: &ElevationParams,
    observer: usize,
    frame: &AgentFrame,
    p_i: &Vec3,
    p_j: &Vec3,
) -> Result<EdgeReading, GeometryError> {
    let li = frame.to_local(p_i);
    let lj = frame.to_local(p_j);
    let up = frame.vector_to_local(&Vec3::z());
    sense(params, FrameTag::Local(observer), &li, &lj, &up)
}

fn edge_fault(graph: &FormationGraph, k: usize, source: GeometryError) -> EdgeFault {
    let (head, tail) = graph.edges()[k];
    EdgeFault {
        edge: k,
        head,
        tail,
        source,
    }
}

/// The elevation function `f_E(p)`, measured along each edge from its tail
/// toward its head through the bearing-based sensor model.
pub fn elevation_function(
    p: &[Vec3],
    graph: &FormationGraph,
    params: &ElevationParams,
) -> Result<ElevationVector, EdgeFault> {
    let mut f = DVector::zeros(graph.m());
    for (k, &(head, tail)) in graph.edges().iter().enumerate() {
        let reading = sense(params, FrameTag::Global, &p[tail], &p[head], &Vec3::z())
            .map_err(|e| edge_fault(graph, k, e))?;
        f[k] = reading.f;
    }
    Ok(ElevationVector(f))
}

/// Global unit vectors `g_k = (p_head - p_tail) / l_k`, one per edge.
pub fn edge_bearings(p: &[Vec3], graph: &FormationGraph) -> Result<Vec<Vec3>, EdgeFault> {
    graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(head, tail))| {
            BearingVector::from_vector(&(p[head] - p[tail]), FrameTag::Global)
                .map(|b| *b.vector())
                .map_err(|e| edge_fault(graph, k, e))
        })
        .collect()
}

/// `R_E = ∂f_E / ∂p`, an `m × 3n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityMatrix(pub DMatrix<f64>);

impl RigidityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn rigidity_matrix(
    p: &[Vec3],
    graph: &FormationGraph,
    params: &ElevationParams,
) -> Result<RigidityMatrix, EdgeFault> {
    let bearings = edge_bearings(p, graph)?;
    if params.mode() == Mode::Spatial {
        // Same validity domain as the sensor.
        elevation_function(p, graph, params)?;
    }
    let inv_rho = 1.0 / params.rho();
    let mut r = DMatrix::zeros(graph.m(), 3 * graph.n());
    for (k, (&(head, tail), g)) in graph.edges().iter().zip(&bearings).enumerate() {
        for c in 0..3 {
            r[(k, 3 * head + c)] = g[c] * inv_rho;
            r[(k, 3 * tail + c)] = -g[c] * inv_rho;
        }
    }
    Ok(RigidityMatrix(r))
}

/// Outcome of the rank test on a rigidity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub required: usize,
    pub rigid: bool,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    /// Smallest singular value counted toward the rank.
    pub smallest_kept: f64,
    /// Largest singular value treated as zero (0 when none).
    pub largest_dropped: f64,
}

/// Rank test: rigid iff `rank R = d n - d (d + 1) / 2`.
pub fn is_infinitesimally_rigid(r: &RigidityMatrix, d: usize, n: usize) -> RankReport {
    let required = (d * n).saturating_sub(d * (d + 1) / 2);
    let mut singular_values: Vec<f64> = if r.0.nrows() == 0 || r.0.ncols() == 0 {
        Vec::new()
    } else {
        r.0.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    };
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cutoff = RANK_TOLERANCE * sigma_max;
    let rank = singular_values
        .iter()
        .filter(|&&s| sigma_max > 0.0 && s > cutoff)
        .count();
    let smallest_kept = if rank > 0 {
        singular_values[rank - 1]
    } else {
        0.0
    };
    let largest_dropped = singular_values.get(rank).copied().unwrap_or(0.0);
    RankReport {
        rank,
        required,
        rigid: rank == required,
        singular_values,
        smallest_kept,
        largest_dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn g(v: [f64; 3]) -> BearingVector {
        BearingVector::from_vector(&Vec3::from(v), FrameTag::Global).unwrap()
    }

    #[test]
    fn planar_distance_formula() {
        assert_abs_diff_eq!(elevation_f_2d_from_distance(0.15, 0.15).unwrap(), 1.0);
        assert_abs_diff_eq!(elevation_f_2d_from_distance(0.3, 0.15).unwrap(), 2.0);
        assert!(matches!(
            elevation_f_2d_from_distance(0.0, 0.15),
            Err(GeometryError::NonPositiveDistance { .. })
        ));
    }

    #[test]
    fn planar_bearing_formula() {
        let a = g([1.0, 0.0, 0.0]);
        let b = g([FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]);
        assert_abs_diff_eq!(
            elevation_f_2d_from_bearings(&a, &b).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            elevation_f_2d_from_bearings(&a, &a),
            Err(GeometryError::DegenerateAngle { .. })
        ));
    }

    #[test]
    fn planar_rod_geometry_matches_distance() {
        // Build the rod explicitly and compare both routes.
        let h_c = 0.15;
        let p_i = Vec3::new(0.3, -0.2, 0.0);
        let p_j = Vec3::new(-0.9, 0.45, 0.0);
        let top = p_j + Vec3::new(0.0, 0.0, h_c);
        let f_bearing = elevation_f_2d_from_bearings(
            &BearingVector::from_vector(&(p_j - p_i), FrameTag::Global).unwrap(),
            &BearingVector::from_vector(&(top - p_i), FrameTag::Global).unwrap(),
        )
        .unwrap();
        let f_dist = elevation_f_2d_from_distance((p_j - p_i).norm(), h_c).unwrap();
        assert_abs_diff_eq!(f_bearing, f_dist, epsilon = 1e-10);
    }

    fn angle(a: &BearingVector, b: &BearingVector) -> f64 {
        a.dot(b).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn tangent_bearings_near_contact() {
        let (a, b) =
            tangent_bearings_3d(&Vec3::zeros(), &Vec3::new(2.0 + 1e-9, 0.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(angle(&a, &b), PI / 3.0, epsilon = 1e-4);
        assert!(matches!(
            tangent_bearings_3d(&Vec3::zeros(), &Vec3::new(2.0, 0.0, 0.0), 1.0),
            Err(GeometryError::BallsOverlap { .. })
        ));
    }

    #[test]
    fn tangent_bearings_far() {
        let p_j = Vec3::new(4.0, 0.0, 0.0);
        let (a, b) = tangent_bearings_3d(&Vec3::zeros(), &p_j, 1.0).unwrap();
        assert_abs_diff_eq!(angle(&a, &b), 2.0 * (0.25f64).asin(), epsilon = 1e-12);
        // Tangency: the radius to each touch point is perpendicular to the sight line.
        for t in [a, b] {
            let touch = t.vector() * (16.0f64 - 1.0).sqrt();
            let radial = (touch - p_j).normalize();
            assert_abs_diff_eq!(t.vector().dot(&radial), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((touch - p_j).norm(), 1.0, epsilon = 1e-12);
        }
        assert!(matches!(
            tangent_bearings_3d(&Vec3::zeros(), &Vec3::new(1.5, 0.0, 0.0), 1.0),
            Err(GeometryError::BallsOverlap { .. })
        ));
    }

    #[test]
    fn tangent_bearings_vertical_edge_uses_fallback_plane() {
        let (a, b) = tangent_bearings_3d(&Vec3::zeros(), &Vec3::new(0.0, 0.0, 3.0), 1.0).unwrap();
        assert_abs_diff_eq!(a.vector().y, 0.0);
        assert_abs_diff_eq!(b.vector().y, 0.0);
        assert_abs_diff_eq!(angle(&a, &b), 2.0 * (1.0f64 / 3.0).asin(), epsilon = 1e-12);
    }

    #[test]
    fn spatial_bearing_formula() {
        let a = g([1.0, 0.0, 0.0]);
        let b = g([0.5, (3.0f64).sqrt() / 2.0, 0.0]);
        assert_abs_diff_eq!(
            elevation_f_3d_from_bearings(&a, &b).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            elevation_f_3d_from_bearings(&a, &a),
            Err(GeometryError::DegenerateAngle { .. })
        ));

        let p_i = Vec3::new(0.1, 0.7, -0.3);
        let p_j = Vec3::new(-1.2, 0.2, 0.9);
        let (a, b) = tangent_bearings_3d(&p_i, &p_j, 0.3).unwrap();
        assert_abs_diff_eq!(
            elevation_f_3d_from_bearings(&a, &b).unwrap(),
            (p_j - p_i).norm() / 0.3,
            epsilon = 1e-10
        );
    }

    #[test]
    fn unit_square_and_tetrahedron() {
        let square = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let graph = FormationGraph::new(4, 2, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let f =
            elevation_function(&square, &graph, &ElevationParams::planar(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(f.0, DVector::from_element(4, 1.0), epsilon = 1e-12);

        let tet = crate::shapes::regular_tetrahedron(1.0);
        let graph = crate::shapes::complete_graph(4, 2);
        let f = elevation_function(&tet, &graph, &ElevationParams::spatial(0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(f.0, DVector::from_element(6, 4.0), epsilon = 1e-10);
    }

    #[test]
    fn two_agent_rigidity_row() {
        let p = [Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0)];
        let graph = FormationGraph::new(2, 2, vec![(0, 1)]).unwrap();
        let r = rigidity_matrix(&p, &graph, &ElevationParams::planar(1.0).unwrap()).unwrap();
        assert_eq!(
            r.0,
            DMatrix::from_row_slice(1, 6, &[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn tetrahedron_is_rigid() {
        let tet = crate::shapes::regular_tetrahedron(1.0);
        let graph = crate::shapes::complete_graph(4, 2);
        let r = rigidity_matrix(&tet, &graph, &ElevationParams::spatial(0.25).unwrap()).unwrap();
        let report = is_infinitesimally_rigid(&r, 3, 4);
        assert_eq!(report.rank, 6);
        assert!(report.rigid);
        assert_eq!(report.largest_dropped, 0.0);
    }

    #[test]
    fn collinear_path_is_flexible() {
        let p: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let graph = FormationGraph::new(4, 2, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let r = rigidity_matrix(&p, &graph, &ElevationParams::planar(0.2).unwrap()).unwrap();
        let report = is_infinitesimally_rigid(&r, 2, 4);
        assert_eq!(report.required, 5);
        assert!(!report.rigid);
    }

    #[test]
    fn errors_carry_edge_index() {
        let p = [
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.1, 0.0, 0.0),
        ];
        let graph = FormationGraph::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        let err =
            elevation_function(&p, &graph, &ElevationParams::spatial(0.1).unwrap()).unwrap_err();
        assert_eq!(err.edge, 1);
        assert!(matches!(err.source, GeometryError::BallsOverlap { .. }));
    }

    #[test]
    fn rejects_non_positive_rho() {
        assert!(ElevationParams::planar(0.0).is_err());
        assert!(ElevationParams::spatial(-1.0).is_err());
        assert!(ElevationParams::spatial(f64::NAN).is_err());
    }
}
