//! Undirected simple graphs for the rewiring variant.
//!
//! The graph keeps its edge list in insertion order so uniform edge
//! sampling is a single index draw, plus adjacency lists for connectivity
//! checks. Rewiring swaps two edges while preserving every node degree,
//! the edge count, and connectedness.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::CoreError;
use crate::Result;

/// Bounded number of candidate `(w, z)` draws per rewire before giving up.
pub const REWIRE_MAX_CANDIDATES: usize = 100;

/// Bounded number of Erdős–Rényi draws before giving up on connectivity.
const GRAPH_MAX_ATTEMPTS: usize = 10_000;

fn norm(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    n: u32,
    edges: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), usize>,
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            edges: Vec::new(),
            index: HashMap::new(),
            adjacency: vec![Vec::new(); n as usize],
        }
    }

    pub fn from_edges(n: u32, edges: &[(u32, u32)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(CoreError::Config(format!("invalid edge ({a}, {b})")));
            }
            if !g.add_edge(a, b) {
                return Err(CoreError::Config(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> u32 {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge list in insertion order (normalized endpoints).
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn contains_edge(&self, a: u32, b: u32) -> bool {
        self.index.contains_key(&norm(a, b))
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    /// Add an edge; returns false if it was already present.
    fn add_edge(&mut self, a: u32, b: u32) -> bool {
        let e = norm(a, b);
        if self.index.contains_key(&e) {
            return false;
        }
        self.index.insert(e, self.edges.len());
        self.edges.push(e);
        self.adjacency[e.0 as usize].push(e.1);
        self.adjacency[e.1 as usize].push(e.0);
        true
    }

    /// Remove an edge; returns false if absent.
    fn remove_edge(&mut self, a: u32, b: u32) -> bool {
        let e = norm(a, b);
        let Some(pos) = self.index.remove(&e) else {
            return false;
        };
        self.edges.swap_remove(pos);
        if pos < self.edges.len() {
            self.index.insert(self.edges[pos], pos);
        }
        for (x, y) in [(e.0, e.1), (e.1, e.0)] {
            let adj = &mut self.adjacency[x as usize];
            let i = adj.iter().position(|&w| w == y).expect("adjacency out of sync");
            adj.swap_remove(i);
        }
        true
    }

    /// Uniformly random edge with uniformly random orientation.
    pub fn sample_oriented_edge(&self, rng: &mut ChaCha20Rng) -> (u32, u32) {
        let (a, b) = self.edges[rng.random_range(0..self.edges.len())];
        if rng.random::<bool>() {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let n = self.n as usize;
        let mut seen = vec![false; n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v as usize] {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }
}

/// Erdős–Rényi graph: every unordered pair is an edge independently with
/// probability `density`, re-sampled until connected so that rewiring is
/// well-defined from the first step.
pub fn init_graph(n_agents: u32, density: f64, rng: &mut ChaCha20Rng) -> Result<Graph> {
    if n_agents < 2 {
        return Err(CoreError::Config(format!(
            "graph needs at least 2 agents, got {n_agents}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(CoreError::Config(format!(
            "graph density must be in (0, 1], got {density}"
        )));
    }
    for _ in 0..GRAPH_MAX_ATTEMPTS {
        let mut g = Graph::new(n_agents);
        for a in 0..n_agents {
            for b in (a + 1)..n_agents {
                if rng.random::<f64>() < density {
                    g.add_edge(a, b);
                }
            }
        }
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(CoreError::GraphSampling {
        attempts: GRAPH_MAX_ATTEMPTS,
    })
}

/// Swap edges `(u,v)` and `(w,z)` for `(u,z)` and `(w,v)`.
///
/// Preconditions (checked): both edges present, the four agents distinct,
/// and neither replacement edge present. Degrees and edge count are
/// preserved by construction. Connectivity is the caller's concern: the
/// simulator re-samples candidates until the swap keeps the graph
/// connected (see [`sample_rewire`]).
pub fn rewire(graph: &mut Graph, uv: (u32, u32), wz: (u32, u32)) -> Result<()> {
    let (u, v) = uv;
    let (w, z) = wz;
    if !graph.contains_edge(u, v) || !graph.contains_edge(w, z) {
        return Err(CoreError::RewireInvalid(format!(
            "({u},{v}) and ({w},{z}) must both be existing edges"
        )));
    }
    let mut ids = [u, v, w, z];
    ids.sort_unstable();
    if ids.windows(2).any(|p| p[0] == p[1]) {
        return Err(CoreError::RewireInvalid(format!(
            "agents ({u},{v},{w},{z}) must be distinct"
        )));
    }
    if graph.contains_edge(u, z) || graph.contains_edge(w, v) {
        return Err(CoreError::RewireInvalid(format!(
            "replacement edges ({u},{z}) or ({w},{v}) already present"
        )));
    }
    graph.remove_edge(u, v);
    graph.remove_edge(w, z);
    graph.add_edge(u, z);
    graph.add_edge(w, v);
    Ok(())
}

fn undo_rewire(graph: &mut Graph, uv: (u32, u32), wz: (u32, u32)) {
    let (u, v) = uv;
    let (w, z) = wz;
    graph.remove_edge(u, z);
    graph.remove_edge(w, v);
    graph.add_edge(u, v);
    graph.add_edge(w, z);
}

/// Draw rewiring partners for the broken edge `(u,v)` and apply the swap.
///
/// Candidates `(w,z)` are uniform oriented edges; a candidate is valid when
/// all four agents are distinct, neither replacement edge exists, and the
/// swapped graph stays connected. Returns the partner pair on success, or
/// `None` after [`REWIRE_MAX_CANDIDATES`] draws, leaving the graph
/// unchanged (the event is still recorded as a rewire outcome).
pub fn sample_rewire(
    graph: &mut Graph,
    uv: (u32, u32),
    rng: &mut ChaCha20Rng,
) -> Option<(u32, u32)> {
    for _ in 0..REWIRE_MAX_CANDIDATES {
        let wz = graph.sample_oriented_edge(rng);
        if rewire(graph, uv, wz).is_err() {
            continue;
        }
        if graph.is_connected() {
            return Some(wz);
        }
        undo_rewire(graph, uv, wz);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn density_one_gives_complete_graph() {
        let mut rng = stream_rng(1, 0);
        let g = init_graph(4, 1.0, &mut rng).unwrap();
        assert_eq!(g.n_edges(), 6);
        assert!(g.is_connected());
    }

    #[test]
    fn same_seed_same_edges() {
        let g1 = init_graph(30, 0.2, &mut stream_rng(9, 1)).unwrap();
        let g2 = init_graph(30, 0.2, &mut stream_rng(9, 1)).unwrap();
        assert_eq!(g1.edges(), g2.edges());
    }

    #[test]
    fn er_expected_edge_count() {
        // E[edges] = density * N(N-1)/2 = 495 for N = 100, density 0.1.
        // Binomial sd = sqrt(4950 * 0.1 * 0.9) ≈ 21.1; over 200 seeds the
        // standard error of the mean is ≈ 1.49, so 3 SE ≈ 4.5.
        let n_seeds = 200;
        let total: usize = (0..n_seeds)
            .map(|s| init_graph(100, 0.1, &mut stream_rng(s, 1)).unwrap().n_edges())
            .sum();
        let mean = total as f64 / n_seeds as f64;
        assert!((mean - 495.0).abs() < 4.5, "mean edge count {mean}");
    }

    #[test]
    fn rewire_swaps_and_preserves_degrees() {
        // Cycle 0-1-2-3-0; rewire (0,1) with (3,2): -> (0,2), (3,1).
        let mut g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let before = g.degrees();
        rewire(&mut g, (0, 1), (3, 2)).unwrap();
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.degrees(), before);
        assert!(g.contains_edge(0, 2) && g.contains_edge(3, 1));
        assert!(!g.contains_edge(0, 1) && !g.contains_edge(2, 3));
        assert!(g.is_connected());
    }

    #[test]
    fn rewire_rejects_invalid_candidates() {
        let mut g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        // Overlapping agents.
        assert!(rewire(&mut g, (0, 1), (1, 2)).is_err());
        // Replacement edge (w,v) = (2,1) already exists.
        assert!(rewire(&mut g, (0, 1), (2, 3)).is_err());
        // Nonexistent edge.
        assert!(rewire(&mut g, (0, 2), (2, 3)).is_err());
        // Graph unchanged by the failed attempts.
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn sample_rewire_returns_none_on_path_graph() {
        // On a path every candidate either shares an agent or would
        // disconnect the graph, so the rewire must be skipped.
        let mut g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let before = g.edges().to_vec();
        let got = sample_rewire(&mut g, (1, 2), &mut stream_rng(3, 0));
        assert_eq!(got, None);
        assert_eq!(g.edges(), &before[..]);
    }
}
