//! Undirected sensing graph with a fixed edge orientation and a
//! leader/follower split. Vertices are 0-based; the first `n_leaders`
//! vertices are leaders.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::GraphError;

/// One neighbor seen from a vertex, with the edge that links them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacent {
    pub vertex: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormationGraph {
    n: usize,
    n_leaders: usize,
    /// `(head, tail)` per edge; the stored order fixes the orientation.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Adjacent>>,
}

impl FormationGraph {
    pub fn new(n: usize, n_leaders: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewVertices);
        }
        if n_leaders < 2 {
            return Err(GraphError::TooFewLeaders(n_leaders));
        }
        if n_leaders > n {
            return Err(GraphError::TooManyLeaders {
                leaders: n_leaders,
                n,
            });
        }
        let mut seen = HashSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(i, j)) in edges.iter().enumerate() {
            for v in [i, j] {
                if v >= n {
                    return Err(GraphError::UnknownVertex(v));
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(k));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(GraphError::DuplicateEdge(k));
            }
            adjacency[i].push(Adjacent { vertex: j, edge: k });
            adjacency[j].push(Adjacent { vertex: i, edge: k });
        }
        let graph = Self {
            n,
            n_leaders,
            edges,
            adjacency,
        };
        if !graph.is_connected() {
            return Err(GraphError::DisconnectedGraph);
        }
        Ok(graph)
    }

    fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n];
        let mut stack = vec![0];
        visited[0] = true;
        while let Some(v) = stack.pop() {
            for a in &self.adjacency[v] {
                if !visited[a.vertex] {
                    visited[a.vertex] = true;
                    stack.push(a.vertex);
                }
            }
        }
        visited.into_iter().all(|v| v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn n_leaders(&self) -> usize {
        self.n_leaders
    }

    pub fn n_followers(&self) -> usize {
        self.n - self.n_leaders
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_leader(&self, i: usize) -> bool {
        i < self.n_leaders
    }

    pub fn leaders(&self) -> std::ops::Range<usize> {
        0..self.n_leaders
    }

    pub fn followers(&self) -> std::ops::Range<usize> {
        self.n_leaders..self.n
    }

    /// Whether both endpoints of edge `k` are leaders.
    pub fn is_leader_edge(&self, k: usize) -> bool {
        let (i, j) = self.edges[k];
        self.is_leader(i) && self.is_leader(j)
    }

    /// Neighbors of `i` with their edge indices, in edge order.
    pub fn adjacent(&self, i: usize) -> Result<&[Adjacent], GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownVertex(i))
    }

    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>, GraphError> {
        Ok(self.adjacent(i)?.iter().map(|a| a.vertex).collect())
    }

    /// Oriented incidence matrix: `+1` at the head, `-1` at the tail.
    pub fn incidence(&self) -> DMatrix<i32> {
        let mut h = DMatrix::zeros(self.m(), self.n);
        for (k, &(head, tail)) in self.edges.iter().enumerate() {
            h[(k, head)] = 1;
            h[(k, tail)] = -1;
        }
        h
    }

    /// `H ⊗ I₃`, the incidence matrix acting on stacked 3-vectors.
    pub fn incidence_bar(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(3 * self.m(), 3 * self.n);
        for (k, &(head, tail)) in self.edges.iter().enumerate() {
            for c in 0..3 {
                h[(k * 3 + c, head * 3 + c)] = 1.0;
                h[(k * 3 + c, tail * 3 + c)] = -1.0;
            }
        }
        h
    }

    /// `M ⊗ I₃`: the diagonal selector of follower coordinates.
    pub fn follower_selector(&self) -> DMatrix<f64> {
        let mut d = vec![0.0; 3 * self.n];
        for v in d.iter_mut().skip(3 * self.n_leaders) {
            *v = 1.0;
        }
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    }
}

/// Free-function form of [`FormationGraph::incidence`].
pub fn incidence_matrix(graph: &FormationGraph) -> DMatrix<i32> {
    graph.incidence()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> FormationGraph {
        FormationGraph::new(3, 2, vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn single_edge_incidence() {
        let g = FormationGraph::new(2, 2, vec![(0, 1)]).unwrap();
        assert_eq!(g.incidence(), DMatrix::from_row_slice(1, 2, &[1, -1]));
    }

    #[test]
    fn path_incidence_has_rank_n_minus_one() {
        let g = FormationGraph::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        let h = g.incidence().map(f64::from);
        assert_eq!(h.rank(1e-9), 2);
    }

    #[test]
    fn rows_sum_to_zero() {
        let h = triangle().incidence();
        for row in h.row_iter() {
            assert_eq!(row.iter().sum::<i32>(), 0);
            assert_eq!(row.iter().filter(|&&v| v == 1).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == -1).count(), 1);
        }
    }

    #[test]
    fn neighbors_examples() {
        assert_eq!(triangle().neighbors(0).unwrap(), vec![1, 2]);
        let g = FormationGraph::new(2, 2, vec![(0, 1)]).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), vec![0]);
        let g = FormationGraph::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), vec![0, 2]);
        assert_eq!(g.neighbors(3), Err(GraphError::UnknownVertex(3)));
    }

    #[test]
    fn rejects_bad_graphs() {
        assert_eq!(
            FormationGraph::new(3, 2, vec![(0, 1)]),
            Err(GraphError::DisconnectedGraph)
        );
        assert_eq!(
            FormationGraph::new(3, 2, vec![(0, 1), (1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            FormationGraph::new(3, 2, vec![(0, 1), (1, 2), (2, 1)]),
            Err(GraphError::DuplicateEdge(2))
        );
        assert_eq!(
            FormationGraph::new(3, 1, vec![(0, 1), (1, 2)]),
            Err(GraphError::TooFewLeaders(1))
        );
        assert_eq!(
            FormationGraph::new(3, 2, vec![(0, 5)]),
            Err(GraphError::UnknownVertex(5))
        );
    }

    #[test]
    fn kronecker_forms() {
        let g = triangle();
        let hb = g.incidence_bar();
        assert_eq!(hb.shape(), (9, 9));
        assert_eq!(hb[(3, 3)], 1.0);
        assert_eq!(hb[(5, 8)], -1.0);
        let m = g.follower_selector();
        assert_eq!(m.trace(), 3.0);
        assert_eq!(m[(6, 6)], 1.0);
    }
}
