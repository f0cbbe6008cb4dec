//! Undirected network topologies.
//!
//! A [`Graph`] is a simple undirected graph on dense vertex ids `0..n`. All
//! downstream math (transition matrices, the occupancy solve, the packet
//! simulator) assumes a connected graph, so the checked constructors refuse
//! anything else.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a connected graph on `n` vertices. Duplicate edges (in either
    /// orientation) are collapsed.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let g = Self::from_edges_allow_disconnected(n, edges)?;
        g.ensure_connected()?;
        Ok(g)
    }

    /// Same as [`Graph::from_edges`] without the connectivity check. Only
    /// [`Graph::is_connected`] and the distance routines are meaningful on the
    /// result if it is disconnected.
    pub fn from_edges_allow_disconnected<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut sets = vec![BTreeSet::new(); n];
        for (i, j) in edges {
            if i == j {
                return Err(Error::SelfLoop { line: 0, vertex: i });
            }
            if i >= n || j >= n {
                return Err(Error::InvalidParams(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        let neighbors: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let edge_count = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Self { neighbors, edge_count })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::from_edges(n, edges).expect("complete graph is connected")
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path graph is connected")
    }

    /// Star with hub 0 and `n - 1` leaves.
    pub fn star(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (0, i))).expect("star graph is connected")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle is connected")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list of `v`.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n();
        let mut a = vec![vec![0u8; n]; n];
        for (i, j) in self.edges() {
            a[i][j] = 1;
            a[j][i] = 1;
        }
        a
    }

    /// Hop distances from `source`; `None` marks unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap() + 1;
            for &w in &self.neighbors[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// True iff a breadth-first traversal from vertex 0 reaches every vertex.
    pub fn is_connected(&self) -> bool {
        self.reached_from_zero() == self.n()
    }

    fn reached_from_zero(&self) -> usize {
        self.bfs_distances(0).iter().filter(|d| d.is_some()).count()
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let reached = self.reached_from_zero();
        if reached == self.n() {
            Ok(())
        } else {
            Err(Error::Disconnected { reached, n: self.n() })
        }
    }

    /// All-pairs hop distances (one BFS per vertex).
    pub fn distance_matrix(&self) -> Result<Vec<Vec<usize>>> {
        self.ensure_connected()?;
        Ok((0..self.n())
            .map(|s| self.bfs_distances(s).into_iter().map(|d| d.unwrap()).collect())
            .collect())
    }

    /// Mean hop distance over ordered pairs `u != v`.
    pub fn average_shortest_path_length(&self) -> Result<f64> {
        self.ensure_connected()?;
        let n = self.n();
        if n < 2 {
            return Ok(0.0);
        }
        let total: usize = (0..n)
            .map(|s| self.bfs_distances(s).into_iter().map(|d| d.unwrap()).sum::<usize>())
            .sum();
        Ok(total as f64 / (n * (n - 1)) as f64)
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = self.degrees();
        let n = degrees.len() as f64;
        let mean_degree = degrees.iter().sum::<usize>() as f64 / n;
        let mean_inverse_degree = degrees.iter().map(|&k| 1.0 / k as f64).sum::<f64>() / n;
        DegreeStats {
            mean_degree,
            mean_inverse_degree,
            harmonic_bound: 1.0 / mean_inverse_degree,
            min_degree: degrees.iter().copied().min().unwrap_or(0),
            max_degree: degrees.iter().copied().max().unwrap_or(0),
        }
    }

    /// Edge-list text: one `i j` line per edge, sorted lexicographically.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edge_count * 8);
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub mean_degree: f64,
    pub mean_inverse_degree: f64,
    /// `1 / <1/k>`, the harmonic mean degree.
    pub harmonic_bound: f64,
    pub min_degree: usize,
    pub max_degree: usize,
}

fn parse_edge_lines(text: &str) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next_id = || -> Result<u64> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected two vertex ids".into(),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{tok}` is not a nonnegative integer"),
            })
        };
        let i = next_id()?;
        let j = next_id()?;
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "expected exactly two vertex ids".into(),
            });
        }
        if i == j {
            return Err(Error::SelfLoop { line: line_no, vertex: i as usize });
        }
        edges.push((i, j));
    }
    if edges.is_empty() {
        return Err(Error::Empty);
    }
    Ok(edges)
}

/// Parses whitespace-separated edge-list text. Vertex ids are taken as dense
/// indices: the graph has `1 + max id` vertices and must be connected.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let edges = parse_edge_lines(text)?;
    let max_id = edges.iter().map(|&(i, j)| i.max(j)).max().unwrap();
    let n = usize::try_from(max_id)
        .ok()
        .and_then(|m| m.checked_add(1))
        .ok_or_else(|| Error::InvalidParams(format!("vertex id {max_id} too large")))?;
    Graph::from_edges(n, edges.into_iter().map(|(i, j)| (i as usize, j as usize)))
}

/// Like [`load_edge_list`] but compacts arbitrary (sparse) ids to `0..n` in
/// ascending order. Returns the graph and `labels[v]`, the external id of `v`.
pub fn load_edge_list_relabeled(text: &str) -> Result<(Graph, Vec<u64>)> {
    let edges = parse_edge_lines(text)?;
    let labels: Vec<u64> = edges
        .iter()
        .flat_map(|&(i, j)| [i, j])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<u64, usize> = labels.iter().enumerate().map(|(v, &l)| (l, v)).collect();
    let g = Graph::from_edges(labels.len(), edges.iter().map(|(i, j)| (index[i], index[j])))?;
    Ok((g, labels))
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on `m + 1` vertices; every later vertex attaches to
/// `m` distinct existing vertices drawn with probability proportional to
/// their current degree (duplicate draws are rejected and redrawn).
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || n <= m {
        return Err(Error::InvalidParams(format!(
            "preferential attachment needs n > m >= 1 (got n = {n}, m = {m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m * (m + 1) / 2 + m * (n - m - 1));
    // Each vertex appears once per incident edge endpoint.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for i in 0..=m {
        for j in i + 1..=m {
            edges.push((i, j));
            endpoints.extend([i, j]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    Graph::from_edges(n, edges)
}
