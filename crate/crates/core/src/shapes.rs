//! Reference shapes and graphs used by the bundled scenarios and tests.

use crate::geometry::Vec3;
use crate::graph::FormationGraph;

/// Regular tetrahedron with the first edge on the x-axis, centered at the
/// origin along x, and the last vertex above the `z = 0` plane.
pub fn regular_tetrahedron(side: f64) -> Vec<Vec3> {
    let s3 = 3f64.sqrt();
    vec![
        Vec3::new(-0.5, 0.0, 0.0) * side,
        Vec3::new(0.5, 0.0, 0.0) * side,
        Vec3::new(0.0, s3 / 2.0, 0.0) * side,
        Vec3::new(0.0, s3 / 6.0, (2.0f64 / 3.0).sqrt()) * side,
    ]
}

/// Regular hexagon in the `z = 0` plane whose first two vertices are
/// `a` and `b`; the boundary turns left by 60 degrees at every vertex.
pub fn regular_hexagon(a: Vec3, b: Vec3) -> Vec<Vec3> {
    let mut pts = vec![a, b];
    let mut step = b - a;
    let (s, c) = (std::f64::consts::FRAC_PI_3).sin_cos();
    for _ in 0..4 {
        step = Vec3::new(c * step.x - s * step.y, s * step.x + c * step.y, 0.0);
        let next = pts[pts.len() - 1] + step;
        pts.push(next);
    }
    pts
}

/// Complete graph on `n` vertices with edges `(i, j)`, `i < j`, in
/// lexicographic order.
pub fn complete_graph(n: usize, n_leaders: usize) -> FormationGraph {
    let edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    FormationGraph::new(n, n_leaders, edges).expect("complete graph is valid")
}
