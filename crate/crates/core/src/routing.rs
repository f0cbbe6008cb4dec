//! Static routing strategies expressed as transition matrices.
//!
//! A local static routing is one row-stochastic matrix `P` shared by every
//! packet; a global static routing holds one matrix per destination. Packets
//! at a neighbor of their destination never consult the matrix (they are
//! delivered), which is why the destination's own row in a per-destination
//! matrix is irrelevant and simply filled with the random-walk row.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;

/// Sparse row-major transition matrix. Each row lists its nonzero entries
/// sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds a matrix from sparse rows. Entries are sorted and explicit
    /// zeros dropped; no stochasticity check is made (see
    /// [`validate_consistency`]).
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for row in &mut rows {
            row.retain(|&(_, p)| p != 0.0);
            row.sort_by_key(|&(j, _)| j);
            if let Some(&(j, _)) = row.iter().find(|&&(j, _)| j >= n) {
                return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
            }
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidParams("duplicate column in matrix row".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let n = dense.len();
        let rows = dense
            .iter()
            .map(|r| {
                if r.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: r.len() });
                }
                Ok(r.iter().copied().enumerate().filter(|&(_, p)| p != 0.0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(c, _)| c).map_or(0.0, |k| row[k].1)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &(j, p) in row {
                    d[j] = p;
                }
                d
            })
            .collect()
    }

    /// `P^T x`.
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                y[j] += p * xi;
            }
        }
        y
    }

    /// Dense CSV, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.to_dense() {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Sparse `i j p` lines for every nonzero entry.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                writeln!(out, "{i} {j} {p}").unwrap();
            }
        }
        out
    }

    /// Parses either dense CSV or `i j p` triplets (detected from the first
    /// data line). `#` comment lines and blank lines are skipped.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let data: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let Some(&(_, first)) = data.first() else {
            return Err(Error::Empty);
        };
        let parse_f64 = |line: usize, tok: &str| {
            tok.trim().parse::<f64>().ok().filter(|p| p.is_finite()).ok_or_else(|| Error::Parse {
                line,
                message: format!("`{tok}` is not a finite number"),
            })
        };
        if first.contains(',') {
            if data.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: data.len() });
            }
            let dense = data
                .iter()
                .map(|&(line, l)| l.split(',').map(|t| parse_f64(line, t)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Self::from_dense(&dense)
        } else {
            let mut entries = BTreeMap::new();
            for &(line, l) in &data {
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(Error::Parse { line, message: "expected `i j p`".into() });
                }
                let idx = |t: &str| {
                    t.parse::<usize>().ok().filter(|&v| v < n).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("`{t}` is not a vertex id below {n}"),
                    })
                };
                let (i, j, p) = (idx(toks[0])?, idx(toks[1])?, parse_f64(line, toks[2])?);
                if entries.insert((i, j), p).is_some() {
                    return Err(Error::Parse { line, message: format!("duplicate entry ({i}, {j})") });
                }
            }
            let mut rows = vec![Vec::new(); n];
            for ((i, j), p) in entries {
                rows[i].push((j, p));
            }
            Self::from_rows(rows)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingKind {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoutingSpec {
    /// One matrix for every packet.
    Local(TransitionMatrix),
    /// `per_destination[x]` routes packets destined to `x`.
    Global(Vec<TransitionMatrix>),
}

impl RoutingSpec {
    pub fn kind(&self) -> RoutingKind {
        match self {
            Self::Local(_) => RoutingKind::Local,
            Self::Global(_) => RoutingKind::Global,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Local(p) => p.n(),
            Self::Global(ps) => ps.len(),
        }
    }

    #[inline]
    pub fn matrix_for(&self, dest: usize) -> &TransitionMatrix {
        match self {
            Self::Local(p) => p,
            Self::Global(ps) => &ps[dest],
        }
    }

    /// Checks every matrix for consistency with `g` and that each destination
    /// is reachable from every vertex under its matrix.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.n() != g.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: self.n() });
        }
        let mut issues = Vec::new();
        match self {
            Self::Local(p) => issues.extend(validate_consistency(p, g).issues),
            Self::Global(ps) => {
                for (x, p) in ps.iter().enumerate() {
                    if p.n() != g.n() {
                        return Err(Error::DimensionMismatch { expected: g.n(), found: p.n() });
                    }
                    issues.extend(
                        validate_consistency(p, g).issues.into_iter().map(|s| format!("P_{x}: {s}")),
                    );
                }
            }
        }
        if !issues.is_empty() {
            return Err(Error::Inconsistent(issues));
        }
        for dest in 0..g.n() {
            if let Some(v) = unreachable_vertex(self.matrix_for(dest), g, dest) {
                return Err(Error::Inconsistent(vec![format!(
                    "vertex {v} cannot reach destination {dest} under the routing support"
                )]));
            }
        }
        Ok(())
    }
}

/// First vertex (other than `dest`) from which no path in the support of
/// `p` leads to a neighbor of `dest`, if any.
pub(crate) fn unreachable_vertex(p: &TransitionMatrix, g: &Graph, dest: usize) -> Option<usize> {
    let n = g.n();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        if i == dest || g.is_adjacent(i, dest) {
            continue;
        }
        for &(j, _) in p.row(i) {
            reverse[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = g.neighbors(dest).iter().copied().collect();
    for &v in &queue {
        seen[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &u in &reverse[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    (0..n).find(|&v| v != dest && !seen[v])
}

/// `p[i][j] = A[i][j] / k_i`.
pub fn uniform_random_walk(g: &Graph) -> TransitionMatrix {
    degree_biased(g, 0.0)
}

/// `p[i][j] ∝ A[i][j] k_j^beta`.
pub fn degree_biased(g: &Graph, beta: f64) -> TransitionMatrix {
    let rows = (0..g.n())
        .map(|i| {
            let weights: Vec<f64> = g.neighbors(i).iter().map(|&j| (g.degree(j) as f64).powf(beta)).collect();
            normalized_row(g.neighbors(i), &weights)
        })
        .collect();
    TransitionMatrix { rows }
}

/// Random consistent routing: i.i.d. uniform `(0, 1]` edge weights,
/// normalized per row.
pub fn random_consistent(g: &Graph, seed: u64) -> TransitionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..g.n())
        .map(|i| {
            let weights: Vec<f64> = g.neighbors(i).iter().map(|_| 1.0 - rng.random::<f64>()).collect();
            normalized_row(g.neighbors(i), &weights)
        })
        .collect();
    TransitionMatrix { rows }
}

fn normalized_row(neighbors: &[usize], weights: &[f64]) -> Vec<(usize, f64)> {
    let total: f64 = weights.iter().sum();
    neighbors.iter().zip(weights).map(|(&j, &w)| (j, w / total)).collect()
}

/// Uniform choice among all hop-count shortest paths to each destination:
/// `P_x[i][j] = sigma(j, x) / sigma(i, x)` for next hops `j` one step closer
/// to `x`, where `sigma` counts shortest paths.
pub fn shortest_path_routing(g: &Graph) -> Result<RoutingSpec> {
    g.ensure_connected()?;
    let walk = uniform_random_walk(g);
    let per_destination = (0..g.n())
        .into_par_iter()
        .map(|x| {
            let dist: Vec<usize> = g.bfs_distances(x).into_iter().map(Option::unwrap).collect();
            let sigma = shortest_path_counts(g, &dist);
            let rows = (0..g.n())
                .map(|i| {
                    if i == x {
                        return walk.row(i).to_vec();
                    }
                    g.neighbors(i)
                        .iter()
                        .filter(|&&j| dist[j] + 1 == dist[i])
                        .map(|&j| (j, sigma[j] / sigma[i]))
                        .collect()
                })
                .collect();
            TransitionMatrix { rows }
        })
        .collect();
    Ok(RoutingSpec::Global(per_destination))
}

/// Number of shortest paths from each vertex to the BFS root of `dist`.
fn shortest_path_counts(g: &Graph, dist: &[usize]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| dist[v]);
    let mut sigma = vec![0.0; g.n()];
    sigma[order[0]] = 1.0;
    for &v in &order[1..] {
        sigma[v] = g.neighbors(v).iter().filter(|&&w| dist[w] + 1 == dist[v]).map(|&w| sigma[w]).sum();
    }
    sigma
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsistencyReport {
    pub issues: Vec<String>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Support within the adjacency, entries in `[0, 1]`, zero diagonal, rows
/// summing to one within [`ROW_SUM_TOLERANCE`].
pub fn validate_consistency(p: &TransitionMatrix, g: &Graph) -> ConsistencyReport {
    let mut issues = Vec::new();
    if p.n() != g.n() {
        issues.push(format!("matrix has {} rows, graph has {} vertices", p.n(), g.n()));
        return ConsistencyReport { issues };
    }
    for i in 0..p.n() {
        let mut sum = 0.0;
        for &(j, v) in p.row(i) {
            sum += v;
            if i == j {
                issues.push(format!("p[{i}][{i}] = {v} on the diagonal"));
            } else if !g.is_adjacent(i, j) {
                issues.push(format!("p[{i}][{j}] = {v} but ({i}, {j}) is not an edge"));
            }
            if !(0.0..=1.0).contains(&v) {
                issues.push(format!("p[{i}][{j}] = {v} outside [0, 1]"));
            }
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            issues.push(format!("row {i} sums to {sum}"));
        }
    }
    ConsistencyReport { issues }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub pi_max: f64,
    /// `||P^T pi - pi||_1` at exit.
    pub residual: f64,
    pub iterations: usize,
}

impl StationaryDistribution {
    pub fn new(pi: Vec<f64>, residual: f64, iterations: usize) -> Self {
        let pi_max = pi.iter().copied().fold(0.0, f64::max);
        Self { pi, pi_max, residual, iterations }
    }
}

/// Power iteration on the lazy chain `(I + P) / 2`, which shares its
/// stationary vector with `P` but is aperiodic, so bipartite graphs converge.
pub fn stationary_distribution(p: &TransitionMatrix, tol: f64) -> Result<StationaryDistribution> {
    let n = p.n();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for iteration in 0..STATIONARY_MAX_ITER {
        let next = p.transpose_mul(&pi);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return Ok(StationaryDistribution::new(pi, residual, iteration));
        }
        for (x, y) in pi.iter_mut().zip(&next) {
            *x = 0.5 * (*x + y);
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= total);
    }
    Err(Error::NonConvergence { iterations: STATIONARY_MAX_ITER, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_row(p: &TransitionMatrix, i: usize, expected: &[f64]) {
        for (j, &e) in expected.iter().enumerate() {
            assert!((p.get(i, j) - e).abs() < 1e-15, "p[{i}][{j}] = {} != {e}", p.get(i, j));
        }
    }

    #[test]
    fn random_walk_rows() {
        let p = uniform_random_walk(&Graph::path(3));
        assert_row(&p, 0, &[0.0, 1.0, 0.0]);
        assert_row(&p, 1, &[0.5, 0.0, 0.5]);
        assert_row(&p, 2, &[0.0, 1.0, 0.0]);

        let k4 = uniform_random_walk(&Graph::complete(4));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k4.get(i, j), if i == j { 0.0 } else { 1.0 / 3.0 });
            }
        }

        let star = uniform_random_walk(&Graph::star(5));
        assert_row(&star, 0, &[0.0, 0.25, 0.25, 0.25, 0.25]);
        for leaf in 1..5 {
            assert_row(&star, leaf, &[1.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn degree_bias_examples() {
        let path = Graph::path(3);
        assert_row(&degree_biased(&path, 1.0), 0, &[0.0, 1.0, 0.0]);
        let star = Graph::star(5);
        assert_row(&degree_biased(&star, -1.0), 0, &[0.0, 0.25, 0.25, 0.25, 0.25]);
        // Degree-1 neighbor vs degree-2 neighbor.
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (2, 3)]).unwrap();
        let p = degree_biased(&g, 1.0);
        assert_row(&p, 0, &[0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0]);
    }

    #[test]
    fn shortest_path_examples() {
        let RoutingSpec::Global(ps) = shortest_path_routing(&Graph::path(3)).unwrap() else {
            panic!("expected global routing")
        };
        assert_row(&ps[2], 0, &[0.0, 1.0, 0.0]);
        assert_row(&ps[2], 1, &[0.0, 0.0, 1.0]);

        let RoutingSpec::Global(ps) = shortest_path_routing(&Graph::cycle(4)).unwrap() else {
            panic!("expected global routing")
        };
        assert_row(&ps[2], 0, &[0.0, 0.5, 0.0, 0.5]);

        let RoutingSpec::Global(ps) = shortest_path_routing(&Graph::complete(4)).unwrap() else {
            panic!("expected global routing")
        };
        for x in 0..4 {
            for i in (0..4).filter(|&i| i != x) {
                assert_eq!(ps[x].get(i, x), 1.0);
                assert_eq!(ps[x].row(i).len(), 1);
            }
        }
    }

    #[test]
    fn shortest_path_splits_by_path_count() {
        // 0 reaches 5 through 1 (one path via 3) or 2 (two paths via 3, 4).
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5)]).unwrap();
        let RoutingSpec::Global(ps) = shortest_path_routing(&g).unwrap() else { unreachable!() };
        assert_row(&ps[5], 0, &[0.0, 1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn shortest_path_rejects_disconnected() {
        let g = Graph::from_edges_allow_disconnected(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(shortest_path_routing(&g), Err(Error::Disconnected { .. })));
    }

    #[test]
    fn consistency_checks() {
        let g = Graph::path(3);
        assert!(validate_consistency(&uniform_random_walk(&g), &g).is_consistent());

        let off_support =
            TransitionMatrix::from_dense(&[vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]]).unwrap();
        let report = validate_consistency(&off_support, &g);
        assert!(!report.is_consistent());
        assert!(report.issues[0].contains("p[0][2]"));

        let short_row =
            TransitionMatrix::from_dense(&[vec![0.0, 0.9, 0.0], vec![0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]]).unwrap();
        let report = validate_consistency(&short_row, &g);
        assert_eq!(report.issues, vec!["row 0 sums to 0.9".to_string()]);
    }

    #[test]
    fn validate_detects_trapped_vertex() {
        // On the cycle 0-1-2-3-4-5, vertices 0 and 1 bounce between each other
        // and never approach destination 3.
        let g = Graph::cycle(6);
        let mut dense = uniform_random_walk(&g).to_dense();
        dense[0] = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        dense[1] = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let spec = RoutingSpec::Local(TransitionMatrix::from_dense(&dense).unwrap());
        assert!(matches!(spec.validate(&g), Err(Error::Inconsistent(_))));
        assert!(RoutingSpec::Local(uniform_random_walk(&g)).validate(&g).is_ok());
    }

    #[test]
    fn stationary_examples() {
        let path = stationary_distribution(&uniform_random_walk(&Graph::path(3)), 1e-12).unwrap();
        for (a, b) in path.pi.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
        let k4 = stationary_distribution(&uniform_random_walk(&Graph::complete(4)), 1e-12).unwrap();
        assert!(k4.pi.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        let star = stationary_distribution(&uniform_random_walk(&Graph::star(5)), 1e-12).unwrap();
        assert!((star.pi_max - 0.5).abs() < 1e-12);
        for leaf in 1..5 {
            assert!((star.pi[leaf] - 0.125).abs() < 1e-12);
        }
        assert!(star.residual <= 1e-12);
    }

    #[test]
    fn stationary_reports_non_convergence() {
        // Rows that do not sum to one leak mass; the iteration cannot settle
        // on a fixed point of P^T with unit mass.
        let p = TransitionMatrix::from_dense(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(stationary_distribution(&p, 1e-12), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn parse_both_formats() {
        let p = uniform_random_walk(&Graph::star(5));
        assert_eq!(TransitionMatrix::parse(&p.to_csv(), 5).unwrap(), p);
        assert_eq!(TransitionMatrix::parse(&p.to_triplets(), 5).unwrap(), p);
        assert!(matches!(TransitionMatrix::parse("0 1 0.5\n0 1 0.5", 2), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(TransitionMatrix::parse("0,1\n", 2), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(TransitionMatrix::parse("0 5 1", 2), Err(Error::Parse { .. })));
    }
}
