//! Test-only oracles, written independently of the library's algorithms.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routecap::Graph;

/// Every connected graph on `n` vertices, one representative per
/// isomorphism class.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let perms = permutations(n);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> =
            pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect();
        let canon = perms
            .iter()
            .map(|p| {
                let mut e: Vec<(usize, usize)> =
                    edges.iter().map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b]))).collect();
                e.sort_unstable();
                e
            })
            .min()
            .unwrap();
        if !seen.insert(canon) {
            continue;
        }
        if let Ok(g) = Graph::from_edges(n, edges) {
            out.push(g);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Erdős–Rényi graph resampled until connected.
pub fn random_connected(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.random::<f64>() < p).collect();
        if let Ok(g) = Graph::from_edges(n, edges) {
            return g;
        }
    }
}

/// Uniform random recursive tree.
pub fn random_tree(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    Graph::from_edges(n, edges).unwrap()
}

/// Betweenness by explicit enumeration of every shortest path: for each
/// ordered pair (s, t), each path contributes `1 / sigma_st` to the source
/// and to every interior vertex.
pub fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let dist: Vec<Vec<usize>> = (0..n).map(|s| bfs(g, s)).collect();
    let mut b = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut paths = Vec::new();
            let mut current = vec![s];
            enumerate(g, &dist, t, &mut current, &mut paths);
            let weight = 1.0 / paths.len() as f64;
            for path in &paths {
                for &v in &path[..path.len() - 1] {
                    b[v] += weight;
                }
            }
        }
    }
    b
}

fn enumerate(g: &Graph, dist: &[Vec<usize>], t: usize, current: &mut Vec<usize>, paths: &mut Vec<Vec<usize>>) {
    let v = *current.last().unwrap();
    if v == t {
        paths.push(current.clone());
        return;
    }
    for &w in g.neighbors(v) {
        if dist[w][t] + 1 == dist[v][t] {
            current.push(w);
            enumerate(g, dist, t, current, paths);
            current.pop();
        }
    }
}

fn bfs(g: &Graph, s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; g.n()];
    d[s] = 0;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                queue.push_back(w);
            }
        }
    }
    d
}

/// True when every ordered pair is joined by exactly one shortest path.
pub fn has_unique_shortest_paths(g: &Graph) -> bool {
    let n = g.n();
    let dist: Vec<Vec<usize>> = (0..n).map(|s| bfs(g, s)).collect();
    (0..n).all(|s| {
        (0..n).all(|t| {
            s == t || {
                let mut paths = Vec::new();
                enumerate(g, &dist, t, &mut vec![s], &mut paths);
                paths.len() == 1
            }
        })
    })
}

/// Dense reference solve of `(I - Pd^T) x = b` by Gaussian elimination with
/// partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Ordinary least squares `y = a + b x`; returns `b`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

pub fn mean_normalized(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x / mean).collect()
}

/// Prints one verdict line and fails the test on a miss.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}
