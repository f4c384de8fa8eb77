//! Weighted undirected communication graphs.
//!
//! Besides the usual Laplacian spectrum this module carries the two
//! combinatorial resilience predicates used to size the attack budget:
//! robustness-style `(r, s)`-connectivity and `r`-isolatability. Both are
//! decided by exhaustive enumeration over node subsets, so they are only
//! meant for small graphs (a dozen nodes or so).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count accepted by the enumeration-based predicates.
pub const MAX_ENUM_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: DMatrix<f64>,
}

/// One undirected edge `(i, j, weight)` with 1-based node labels, the form
/// used in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec(pub usize, pub usize, #[serde(default = "unit")] pub f64);

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub laplacian: DMatrix<f64>,
    pub lambda2: f64,
    pub is_connected: bool,
    pub max_degree: f64,
}

impl Graph {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        Ok(Graph {
            weights: DMatrix::zeros(n, n),
        })
    }

    /// Builds a graph from 0-based `(i, j, weight)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Graph::empty(n)?;
        for &(i, j, w) in edges {
            g.set_weight(i, j, w)?;
        }
        Ok(g)
    }

    /// Builds a graph from 1-based edge specs.
    pub fn from_specs(n: usize, edges: &[EdgeSpec]) -> Result<Self> {
        let mut g = Graph::empty(n)?;
        for e in edges {
            if e.0 == 0 || e.1 == 0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) uses 0; labels are 1-based",
                    e.0, e.1
                )));
            }
            g.set_weight(e.0 - 1, e.1 - 1, e.2)?;
        }
        Ok(g)
    }

    /// Validates a raw adjacency matrix.
    pub fn from_matrix(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::InvalidGraph("adjacency must be square and nonempty".into()));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!("bad weight {w} at ({i}, {j})")));
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidGraph(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Graph { weights })
    }

    pub fn complete(n: usize) -> Self {
        let mut w = DMatrix::from_element(n, n, 1.0);
        w.fill_diagonal(0.0);
        Graph { weights: w }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        if n > 2 {
            edges.push((n - 1, 0, 1.0));
        }
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    /// Star with center 0 and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i, 1.0)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star edges are valid")
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        let n = self.node_count();
        if i >= n || j >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) references a node outside 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidGraph(format!("edge weight {w} must be finite and >= 0")));
        }
        self.weights[(i, j)] = w;
        self.weights[(j, i)] = w;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&j| self.weights[(i, j)] > 0.0)
            .collect()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).sum()
    }

    /// Undirected edges as 0-based `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    fn neighbor_masks(&self) -> Vec<u32> {
        let n = self.node_count();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| self.weights[(i, j)] > 0.0)
                    .fold(0u32, |m, j| m | (1 << j))
            })
            .collect()
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.node_count() > MAX_ENUM_NODES {
            return Err(Error::InvalidGraph(format!(
                "exhaustive predicates support at most {MAX_ENUM_NODES} nodes, got {}",
                self.node_count()
            )));
        }
        Ok(())
    }
}

/// Laplacian `L = D - A`, its algebraic connectivity and the max degree.
///
/// A single-node graph reports `lambda2 = 0` and counts as connected. For a
/// disconnected graph `lambda2` is reported as exactly zero.
pub fn laplacian(g: &Graph) -> SpectralSummary {
    let n = g.node_count();
    let mut lap = -g.weights.clone();
    let mut max_degree: f64 = 0.0;
    for i in 0..n {
        let d = g.degree(i);
        lap[(i, i)] = d;
        max_degree = max_degree.max(d);
    }
    if n == 1 {
        return SpectralSummary {
            laplacian: lap,
            lambda2: 0.0,
            is_connected: true,
            max_degree,
        };
    }
    let is_connected = connected_within(&g.neighbor_masks(), full_mask(n));
    let lambda2 = if is_connected {
        let mut ev: Vec<f64> = SymmetricEigen::new(lap.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    } else {
        0.0
    };
    SpectralSummary {
        laplacian: lap,
        lambda2,
        is_connected,
        max_degree,
    }
}

/// Whether some node of `subset` has at least `r` neighbors outside it.
pub fn r_reachable(g: &Graph, subset: &[usize], r: usize) -> Result<bool> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = g.node_count();
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidGraph(format!("node {bad} is not in the graph")));
    }
    let inside = |j: usize| subset.contains(&j);
    Ok(subset.iter().any(|&i| {
        (0..n)
            .filter(|&j| g.weights[(i, j)] > 0.0 && !inside(j))
            .count()
            >= r
    }))
}

/// Robustness-style `(r, s)`-connectivity by exhaustive enumeration.
///
/// For every pair of disjoint nonempty node sets `X1`, `X2`, let `D(X)` be
/// the number of nodes in `X` with at least `r` neighbors outside `X`. The
/// graph qualifies when each pair has `D(X1) = |X1|`, `D(X2) = |X2|` or
/// `D(X1) + D(X2) >= s`. With `s = 1` this is the usual `r`-robustness.
///
/// Cost is `O(3^N N)`.
pub fn rs_connected(g: &Graph, r: usize, s: usize) -> Result<bool> {
    g.check_enumerable()?;
    let n = g.node_count();
    if n < 2 {
        return Err(Error::InvalidGraph("(r, s)-connectivity needs at least two nodes".into()));
    }
    let nbr = g.neighbor_masks();
    let full = full_mask(n);
    let reach = |x: u32| -> u32 {
        let mut count = 0;
        let mut rest = x;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if (nbr[i] & !x).count_ones() as usize >= r {
                count += 1;
            }
        }
        count
    };
    let reach_all: Vec<u32> = (0..=full).map(reach).collect();
    for x1 in 1..=full {
        let d1 = reach_all[x1 as usize];
        if d1 == x1.count_ones() {
            continue;
        }
        let rest = full & !x1;
        // Walk the nonempty submasks of the complement.
        let mut x2 = rest;
        while x2 != 0 {
            let d2 = reach_all[x2 as usize];
            if d2 != x2.count_ones() && ((d1 + d2) as usize) < s {
                return Ok(false);
            }
            x2 = (x2 - 1) & rest;
        }
    }
    Ok(true)
}

/// `r`-connectivity in the robustness sense; shorthand for `(r, 1)`.
pub fn r_connected(g: &Graph, r: usize) -> Result<bool> {
    rs_connected(g, r, 1)
}

/// Whether the graph stays connected after removing any `1..=r` nodes.
pub fn r_isolatable(g: &Graph, r: usize) -> Result<bool> {
    g.check_enumerable()?;
    let n = g.node_count();
    if r >= n {
        return Err(Error::IsolationBudget { r, n });
    }
    let nbr = g.neighbor_masks();
    let full = full_mask(n);
    if !connected_within(&nbr, full) {
        return Ok(false);
    }
    for removed in 1..=full {
        let k = removed.count_ones() as usize;
        if k == 0 || k > r {
            continue;
        }
        if !connected_within(&nbr, full & !removed) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Connectivity of the subgraph induced by `alive`.
fn connected_within(nbr: &[u32], alive: u32) -> bool {
    if alive == 0 {
        return true;
    }
    let start = alive & alive.wrapping_neg();
    let mut seen = start;
    let mut frontier = start;
    while frontier != 0 {
        let i = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let fresh = nbr[i] & alive & !seen;
        seen |= fresh;
        frontier |= fresh;
    }
    seen == alive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_components() -> Graph {
        Graph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let s = laplacian(&g);
        assert_eq!(s.laplacian, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert!((s.lambda2 - 2.0).abs() < 1e-12);

        let k4 = laplacian(&Graph::complete(4));
        assert!((k4.lambda2 - 4.0).abs() < 1e-12);
        assert!(k4.is_connected);
        assert_eq!(k4.max_degree, 3.0);

        let split = laplacian(&two_components());
        assert_eq!(split.lambda2, 0.0);
        assert!(!split.is_connected);
    }

    #[test]
    fn single_node_is_connected() {
        let s = laplacian(&Graph::empty(1).unwrap());
        assert!(s.is_connected);
        assert_eq!(s.lambda2, 0.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edges(3, &[(0, 3, 1.0)]).is_err());
        assert!(Graph::from_edges(3, &[(1, 1, 1.0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1, -1.0)]).is_err());
        assert!(Graph::from_specs(3, &[EdgeSpec(0, 1, 1.0)]).is_err());
        assert!(Graph::empty(0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(Graph::from_matrix(asym).is_err());
    }

    #[test]
    fn reachability_examples() {
        let k4 = Graph::complete(4);
        assert!(r_reachable(&k4, &[0], 3).unwrap());
        assert!(!r_reachable(&Graph::path(3), &[0, 1], 2).unwrap());
        assert!(r_reachable(&Graph::star(3), &[1, 2, 3], 1).unwrap());
        assert!(matches!(r_reachable(&k4, &[], 1), Err(Error::EmptySubset)));
    }

    /// Literal transcription of the definition over explicit vectors, used
    /// as the reference for the bitmask implementation.
    fn rs_connected_oracle(g: &Graph, r: usize, s: usize) -> bool {
        let n = g.node_count();
        let count_reach = |x: &[usize]| {
            x.iter()
                .filter(|&&i| {
                    g.neighbors(i).iter().filter(|j| !x.contains(j)).count() >= r
                })
                .count()
        };
        // Label each node 0 (unused), 1 (X1) or 2 (X2).
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let (mut x1, mut x2) = (Vec::new(), Vec::new());
            for i in 0..n {
                match c % 3 {
                    1 => x1.push(i),
                    2 => x2.push(i),
                    _ => {}
                }
                c /= 3;
            }
            if x1.is_empty() || x2.is_empty() {
                continue;
            }
            let (d1, d2) = (count_reach(&x1), count_reach(&x2));
            if d1 != x1.len() && d2 != x2.len() && d1 + d2 < s {
                return false;
            }
        }
        true
    }

    #[test]
    fn rs_connected_examples() {
        let k4 = Graph::complete(4);
        // X1 = {0,1}, X2 = {2,3}: every node sees only two outsiders, so
        // the three-robustness clause fails for K4.
        assert!(!rs_connected(&k4, 3, 1).unwrap());
        assert!(!rs_connected_oracle(&k4, 3, 1));
        assert!(rs_connected(&k4, 2, 1).unwrap());
        assert!(!rs_connected(&Graph::path(3), 2, 1).unwrap());
        assert!(!rs_connected(&k4, 4, 1).unwrap());
        assert!(!rs_connected(&Graph::star(3), 2, 1).unwrap());
        assert!(rs_connected(&Graph::path(2), 1, 1).unwrap());
    }

    #[test]
    fn rs_connected_matches_oracle_on_small_graphs() {
        let graphs = [
            Graph::complete(5),
            Graph::cycle(5),
            Graph::star(4),
            Graph::path(4),
            Graph::from_edges(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 2, 1.0)])
                .unwrap(),
        ];
        for g in &graphs {
            for r in 1..=3 {
                for s in 1..=3 {
                    assert_eq!(rs_connected(g, r, s).unwrap(), rs_connected_oracle(g, r, s));
                }
            }
        }
    }

    #[test]
    fn isolatable_examples() {
        assert!(r_isolatable(&Graph::complete(4), 2).unwrap());
        assert!(!r_isolatable(&Graph::star(3), 1).unwrap());
        assert!(r_isolatable(&Graph::cycle(5), 1).unwrap());
        assert!(!r_isolatable(&Graph::cycle(5), 2).unwrap());
        assert!(r_isolatable(&Graph::path(2), 0).unwrap());
        assert!(!r_isolatable(&two_components(), 0).unwrap());
        assert!(matches!(
            r_isolatable(&Graph::complete(3), 3),
            Err(Error::IsolationBudget { r: 3, n: 3 })
        ));
    }

    #[test]
    fn refuses_large_enumeration() {
        let g = Graph::complete(MAX_ENUM_NODES + 1);
        assert!(rs_connected(&g, 1, 1).is_err());
        assert!(r_isolatable(&g, 1).is_err());
    }
}
