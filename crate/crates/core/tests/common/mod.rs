#![allow(dead_code)]

use elevform_core::geometry::{axis_angle, AgentFrame};
use elevform_core::{Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation (random axis, angle with the Haar density).
pub fn rotation(rng: &mut impl Rng) -> Mat3 {
    // Haar measure on SO(3): angle density (1 - cos θ) / π on [0, π].
    let angle = loop {
        let a = rng.random_range(0.0..std::f64::consts::PI);
        if rng.random_range(0.0..2.0) <= 1.0 - a.cos() {
            break a;
        }
    };
    axis_angle(&unit_vector(rng), angle).unwrap()
}

/// Random rotation and a translation with entries in `[-reach, reach)`.
pub fn frame(rng: &mut impl Rng, reach: f64) -> AgentFrame {
    let t = Vec3::new(
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    );
    AgentFrame::new(rotation(rng), t).unwrap()
}

/// `n` points in a cube of half-width `half`, pairwise at least `min_gap` apart.
pub fn spread_points(
    rng: &mut impl Rng,
    n: usize,
    half: f64,
    min_gap: f64,
    planar: bool,
) -> Vec<Vec3> {
    loop {
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    if planar {
                        0.0
                    } else {
                        rng.random_range(-half..half)
                    },
                )
            })
            .collect();
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (pts[i] - pts[j]).norm() >= min_gap));
        if ok {
            return pts;
        }
    }
}

/// Rank by Gaussian elimination with partial pivoting, relative tolerance.
pub fn gaussian_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let ncols = a.first().map_or(0, Vec::len);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    for col in 0..ncols {
        let pivot = (rank..a.len()).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()));
        let Some(p) = pivot else { break };
        if a[p][col].abs() <= tol * scale {
            continue;
        }
        a.swap(rank, p);
        let (top, rest) = a.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in rest {
            let factor = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
        }
        rank += 1;
    }
    rank
}
