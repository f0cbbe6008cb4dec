//! Stationary occupancy analysis of static routings.
//!
//! For every destination `i` the occupancy column `beta_i` solves
//!
//! ```text
//! beta_i = Pd_i^T beta_i + J_i,    Pd_i = (I - diag(A[i, .])) P
//! ```
//!
//! where `Pd_i` is the routing matrix with the rows of `i`'s neighbors
//! zeroed (packets there are delivered, not forwarded) and `J_i` is column
//! `i` of the born matrix. The columns form the occupancy matrix `alpha0`,
//! whose row sums `s0` give per-vertex load per unit injection. Everything
//! else (capacity, transit time, betweenness, queue lengths, bounds) is read
//! off `alpha0`.

use std::fmt::Write as _;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DegreeStats, Graph};
use crate::routing::{
    stationary_distribution, unreachable_vertex, validate_consistency, RoutingKind, RoutingSpec, StationaryDistribution,
    TransitionMatrix, DEFAULT_STATIONARY_TOL,
};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Slack for the hard `t0 * rc0 <= 1` bound.
pub const HARD_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// One dense LU solve per destination.
    Direct,
    /// Truncated Neumann series per destination.
    Neumann,
    /// Rank-`(k_i + 1)` updates of one shared fundamental matrix. Local
    /// routings only; roughly one dense inverse per routing instead of one
    /// per destination.
    LowRank,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Neumann stopping threshold on the l1 norm of the last series term.
    pub tol: f64,
    /// Neumann iteration cap.
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, tol: DEFAULT_TOL, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

impl SolveOptions {
    pub fn with_method(method: SolveMethod) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Expected packets born per step at vertex `i` for destination `j`, per unit
/// injection rate. Uniform unless custom weights are supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct BornMatrix {
    n: usize,
    weights: Option<Vec<Vec<f64>>>,
}

impl BornMatrix {
    pub fn uniform(n: usize) -> Self {
        Self { n, weights: None }
    }

    /// Non-uniform generation pattern: nonnegative, zero diagonal, summing to
    /// one.
    pub fn custom(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        let mut total = 0.0;
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidParams(format!("born matrix has nonzero diagonal at {i}")));
            }
            if row.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                return Err(Error::InvalidParams(format!("born matrix row {i} has a negative entry")));
            }
            total += row.iter().sum::<f64>();
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("born matrix sums to {total}, expected 1")));
        }
        Ok(Self { n, weights: Some(weights) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    fn uniform_value(&self) -> f64 {
        1.0 / (self.n * (self.n - 1)) as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i][j],
            None if i == j => 0.0,
            None => self.uniform_value(),
        }
    }

    /// Column `j`, the birth pattern of packets destined to `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }
}

/// `Pd = (I - diag(A[dest, .])) P`: the routing with the rows of `dest`'s
/// neighbors removed. Sparse rows, like [`TransitionMatrix`], but
/// substochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedMatrix {
    pub dest: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl RestrictedMatrix {
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, p)| p)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
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
}

pub fn destination_restricted_matrix(p: &TransitionMatrix, g: &Graph, dest: usize) -> RestrictedMatrix {
    let rows = (0..p.n())
        .map(|i| if g.is_adjacent(dest, i) { Vec::new() } else { p.row(i).to_vec() })
        .collect();
    RestrictedMatrix { dest, rows }
}

/// `y = Pd_dest^T x` without materializing `Pd_dest`.
fn restricted_transpose_mul(p: &TransitionMatrix, g: &Graph, dest: usize, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (u, &xu) in x.iter().enumerate() {
        if xu == 0.0 || g.is_adjacent(dest, u) {
            continue;
        }
        for &(v, p) in p.row(u) {
            y[v] += p * xu;
        }
    }
}

/// The occupancy matrix `alpha0`, row-major. Entry `(i, j)` is the expected
/// number of packets destined to `j` at the head of `i`'s queue per unit
/// of `R / C`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AlphaMatrix {
    fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let n = columns.len();
        let mut values = vec![0.0; n * n];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * n + j] = v;
            }
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// `beta_j`, the occupancy profile of packets destined to `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// `s0_i`, per-vertex load per unit injection.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub alpha: AlphaMatrix,
    pub method: SolveMethod,
    pub tol: f64,
    /// Max-norm residual of the occupancy equation over all destinations.
    pub residual: f64,
}

/// Solves the occupancy equation with the uniform born matrix.
pub fn solve_alpha(g: &Graph, routing: &RoutingSpec, opts: &SolveOptions) -> Result<AlphaSolution> {
    solve_alpha_with_born(g, routing, &BornMatrix::uniform(g.n()), opts)
}

pub fn solve_alpha_with_born(
    g: &Graph,
    routing: &RoutingSpec,
    born: &BornMatrix,
    opts: &SolveOptions,
) -> Result<AlphaSolution> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParams("occupancy analysis needs at least two vertices".into()));
    }
    if routing.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: routing.n() });
    }
    if born.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: born.n() });
    }
    let mut issues = Vec::new();
    match routing {
        RoutingSpec::Local(p) => issues.extend(validate_consistency(p, g).issues),
        RoutingSpec::Global(ps) => {
            for (x, p) in ps.iter().enumerate() {
                issues.extend(validate_consistency(p, g).issues.into_iter().map(|s| format!("P_{x}: {s}")));
            }
        }
    }
    if !issues.is_empty() {
        return Err(Error::Inconsistent(issues));
    }

    let columns: Vec<Vec<f64>> = match (opts.method, routing) {
        (SolveMethod::LowRank, RoutingSpec::Local(p)) => {
            for dest in 0..n {
                if unreachable_vertex(p, g, dest).is_some() {
                    return Err(Error::SingularSystem { destination: dest });
                }
            }
            let base = LowRankBase::new(p)?;
            (0..n).into_par_iter().map(|dest| base.solve(g, born, dest)).collect::<Result<_>>()?
        }
        (SolveMethod::LowRank, RoutingSpec::Global(_)) => {
            return Err(Error::InvalidParams(
                "the low-rank solver needs a single (local) routing matrix".into(),
            ));
        }
        (SolveMethod::Direct, _) => (0..n)
            .into_par_iter()
            .map(|dest| solve_direct(routing.matrix_for(dest), g, born, dest))
            .collect::<Result<_>>()?,
        (SolveMethod::Neumann, _) => (0..n)
            .into_par_iter()
            .map(|dest| solve_neumann(routing.matrix_for(dest), g, born, dest, opts))
            .collect::<Result<_>>()?,
    };

    let mut columns = columns;
    let mut residual: f64 = 0.0;
    for (dest, col) in columns.iter_mut().enumerate() {
        finalize_column(col, dest)?;
        residual = residual.max(column_residual(routing.matrix_for(dest), g, born, dest, col));
    }
    Ok(AlphaSolution { alpha: AlphaMatrix::from_columns(columns), method: opts.method, tol: opts.tol, residual })
}

/// The destination's own entry must vanish (all inflow to it comes from
/// zeroed rows); tiny negative round-off is clamped.
fn finalize_column(col: &mut [f64], dest: usize) -> Result<()> {
    let scale = col.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if col[dest].abs() > 1e-9 * scale.max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "occupancy of destination {dest} at itself is {} (expected 0)",
            col[dest]
        )));
    }
    col[dest] = 0.0;
    for (v, x) in col.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x < -1e-10 * scale {
                return Err(Error::InvariantViolation(format!(
                    "negative occupancy {x} at vertex {v} for destination {dest}"
                )));
            }
            *x = 0.0;
        }
    }
    Ok(())
}

fn column_residual(p: &TransitionMatrix, g: &Graph, born: &BornMatrix, dest: usize, col: &[f64]) -> f64 {
    let mut image = vec![0.0; col.len()];
    restricted_transpose_mul(p, g, dest, col, &mut image);
    col.iter()
        .zip(&image)
        .enumerate()
        .map(|(v, (b, pb))| (b - pb - born.get(v, dest)).abs())
        .fold(0.0, f64::max)
}

fn solve_direct(p: &TransitionMatrix, g: &Graph, born: &BornMatrix, dest: usize) -> Result<Vec<f64>> {
    let n = g.n();
    // (I - Pd^T)[v][u] = delta_vu - Pd[u][v]
    let mut m = Mat::<f64>::identity(n, n);
    for u in (0..n).filter(|&u| !g.is_adjacent(dest, u)) {
        for &(v, pv) in p.row(u) {
            m[(v, u)] -= pv;
        }
    }
    let rhs = Mat::<f64>::from_fn(n, 1, |v, _| born.get(v, dest));
    let x = m.partial_piv_lu().solve(&rhs);
    let col: Vec<f64> = (0..n).map(|v| x[(v, 0)]).collect();
    if col.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { destination: dest });
    }
    // A rank-deficient system can still yield finite garbage.
    let scale = col.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if column_residual(p, g, born, dest, &col) > 1e-8 * scale {
        return Err(Error::SingularSystem { destination: dest });
    }
    Ok(col)
}

fn solve_neumann(
    p: &TransitionMatrix,
    g: &Graph,
    born: &BornMatrix,
    dest: usize,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let mut sum = born.column(dest);
    let mut term = sum.clone();
    let mut next = vec![0.0; sum.len()];
    let mut increment = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        restricted_transpose_mul(p, g, dest, &term, &mut next);
        std::mem::swap(&mut term, &mut next);
        increment = 0.0;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
            increment += t.abs();
        }
        if !increment.is_finite() {
            break;
        }
        if increment <= opts.tol {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergent { destination: dest, iterations: opts.max_iterations, increment })
}

/// Shared factorization for the low-rank route.
///
/// With `K = I - P + 1 u^T`, `u = 1/n`, `K` is invertible for an irreducible
/// `P`, and `I - Pd_i = K + U V^T` with `U = [1, E_S]`, `V^T = [-u^T; P_S]`,
/// `S` the neighbors of `i`. Woodbury on the transposed system gives each
/// column from `Z = K^{-1}` and `W = P Z` in `O(n k_i + k_i^3)`.
struct LowRankBase {
    n: usize,
    /// `Z`, row-major.
    z: Vec<f64>,
    /// `P Z`, row-major.
    w: Vec<f64>,
    /// `Z^T u`, i.e. column sums of `Z` over `n`.
    g: Vec<f64>,
}

impl LowRankBase {
    fn new(p: &TransitionMatrix) -> Result<Self> {
        let n = p.n();
        let inv_n = 1.0 / n as f64;
        let mut k = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 + inv_n } else { inv_n });
        for i in 0..n {
            for &(j, pij) in p.row(i) {
                k[(i, j)] -= pij;
            }
        }
        let inv = k.partial_piv_lu().inverse();
        let mut z = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                z[i * n + j] = inv[(i, j)];
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { destination: 0 });
        }
        let mut w = vec![0.0; n * n];
        for s in 0..n {
            let out = &mut w[s * n..(s + 1) * n];
            for &(j, pj) in p.row(s) {
                for (o, zj) in out.iter_mut().zip(&z[j * n..(j + 1) * n]) {
                    *o += pj * zj;
                }
            }
        }
        let mut g = vec![0.0; n];
        for i in 0..n {
            for (gv, zv) in g.iter_mut().zip(&z[i * n..(i + 1) * n]) {
                *gv += zv;
            }
        }
        g.iter_mut().for_each(|x| *x *= inv_n);
        Ok(Self { n, z, w, g })
    }

    fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.n..(i + 1) * self.n]
    }

    fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    fn solve(&self, g: &Graph, born: &BornMatrix, dest: usize) -> Result<Vec<f64>> {
        let n = self.n;
        let s = g.neighbors(dest);
        let k = s.len();

        // a = Z^T J_dest
        let a: Vec<f64> = if born.is_uniform() {
            let c = born.get(0, 1);
            let zi = self.z_row(dest);
            (0..n).map(|v| c * (n as f64 * self.g[v] - zi[v])).collect()
        } else {
            let mut a = vec![0.0; n];
            for r in 0..n {
                let jr = born.get(r, dest);
                if jr != 0.0 {
                    for (av, zv) in a.iter_mut().zip(self.z_row(r)) {
                        *av += jr * zv;
                    }
                }
            }
            a
        };

        // Capacitance matrix M = I + U^T (Z^T V) and right-hand side U^T a.
        let dim = k + 1;
        let mut m = Mat::<f64>::identity(dim, dim);
        let mut rhs = Mat::<f64>::zeros(dim, 1);
        m[(0, 0)] -= self.g.iter().sum::<f64>();
        rhs[(0, 0)] = a.iter().sum();
        for (t, &st) in s.iter().enumerate() {
            let wt = self.w_row(st);
            m[(0, t + 1)] += wt.iter().sum::<f64>();
            m[(t + 1, 0)] -= self.g[st];
            for (r, &sr) in s.iter().enumerate() {
                m[(r + 1, t + 1)] += wt[sr];
            }
            rhs[(t + 1, 0)] = a[st];
        }
        let coef = m.partial_piv_lu().solve(&rhs);

        let mut y = a;
        let c0 = coef[(0, 0)];
        for (yv, gv) in y.iter_mut().zip(&self.g) {
            *yv += c0 * gv;
        }
        for (t, &st) in s.iter().enumerate() {
            let ct = coef[(t + 1, 0)];
            for (yv, wv) in y.iter_mut().zip(self.w_row(st)) {
                *yv -= ct * wv;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { destination: dest });
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    pub n: usize,
    /// `Rc / C = 1 / max_i s0_i`.
    pub rc0: f64,
    /// `T`, mean transit hops.
    #[serde(rename = "T")]
    pub mean_time: f64,
    /// `T / N`.
    pub t0: f64,
    /// `T_s = N * sum_i alpha0[i][s]`, mean hops of packets destined to `s`.
    #[serde(rename = "T_s")]
    pub per_destination_time: Vec<f64>,
    #[serde(rename = "s0")]
    pub row_sums: Vec<f64>,
    /// `B_i = N (N - 1) s0_i`.
    pub betweenness: Vec<f64>,
    pub b_max: f64,
    pub b_mean: f64,
    /// `N (N - 1) / B_max`; agrees with `rc0` up to round-off.
    pub rc0_from_betweenness: f64,
}

pub fn capacity_report(alpha: &AlphaMatrix) -> CapacityReport {
    let n = alpha.n();
    let pairs = (n * (n - 1)) as f64;
    let row_sums = alpha.row_sums();
    let s_max = row_sums.iter().copied().fold(0.0, f64::max);
    let mean_time: f64 = row_sums.iter().sum();
    let per_destination_time = (0..n).map(|s| n as f64 * (0..n).map(|i| alpha.get(i, s)).sum::<f64>()).collect();
    let betweenness: Vec<f64> = row_sums.iter().map(|s| pairs * s).collect();
    let b_max = betweenness.iter().copied().fold(0.0, f64::max);
    let b_mean = betweenness.iter().sum::<f64>() / n as f64;
    CapacityReport {
        n,
        rc0: 1.0 / s_max,
        mean_time,
        t0: mean_time / n as f64,
        per_destination_time,
        row_sums,
        betweenness,
        b_max,
        b_mean,
        rc0_from_betweenness: pairs / b_max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueLengths {
    /// `L_i = R s0_i`.
    pub per_vertex: Vec<f64>,
    pub total: f64,
    /// `L / R`, equal to `T`.
    pub time: f64,
}

/// Free-flow queue lengths at injection rate `rate` and service capacity
/// `capacity`.
pub fn queue_lengths(alpha: &AlphaMatrix, rate: f64, capacity: f64) -> Result<QueueLengths> {
    if !(rate > 0.0 && capacity > 0.0) {
        return Err(Error::InvalidParams(format!(
            "rate and capacity must be positive (got R = {rate}, C = {capacity})"
        )));
    }
    let s0 = alpha.row_sums();
    let load = rate / capacity * s0.iter().copied().fold(0.0, f64::max);
    if load >= 1.0 {
        return Err(Error::Congested { load });
    }
    let per_vertex: Vec<f64> = s0.iter().map(|s| rate * s).collect();
    let total: f64 = per_vertex.iter().sum();
    Ok(QueueLengths { per_vertex, total, time: total / rate })
}

/// Large sparse network approximation of `rc0` from the stationary
/// distribution: `N / (pi_max * sum_i 1 / sum_j A[i][j] pi_j)`.
pub fn approx_capacity(g: &Graph, pi: &StationaryDistribution) -> f64 {
    let inverse_neighbor_mass: f64 = (0..g.n())
        .map(|i| 1.0 / g.neighbors(i).iter().map(|&j| pi.pi[j]).sum::<f64>())
        .sum();
    g.n() as f64 / (pi.pi_max * inverse_neighbor_mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Exact consequence of the definitions; violations are bugs.
    Hard,
    /// Approximate or asymptotic; reported, not enforced.
    Soft,
}

/// `value <= limit` (or `>=` when `lower` is set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub value: f64,
    pub limit: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn upper(kind: BoundKind, value: f64, limit: f64, slack: f64) -> Self {
        Self { kind, value, limit, holds: value <= limit + slack }
    }

    fn lower(kind: BoundKind, value: f64, limit: f64, slack: f64) -> Self {
        Self { kind, value, limit, holds: value >= limit - slack }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiameterBounds {
    /// `rc0 <= N / Z`.
    pub capacity: BoundCheck,
    /// `T >= Z`.
    pub time: BoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    /// `t0 * rc0 <= 1`.
    pub t0rc0: BoundCheck,
    /// `rc0 <= 1 / <1/k>`.
    pub harmonic: BoundCheck,
    pub diameter: DiameterBounds,
    /// `T * pi_max * rc0`, asymptotically 1 for large sparse networks under a
    /// local routing. Absent for global routings.
    pub eq5_ratio: Option<f64>,
}

pub fn bounds_report(
    report: &CapacityReport,
    stats: &DegreeStats,
    z: f64,
    pi: Option<&StationaryDistribution>,
) -> BoundsReport {
    let n = report.n as f64;
    BoundsReport {
        t0rc0: BoundCheck::upper(BoundKind::Hard, report.t0 * report.rc0, 1.0, HARD_BOUND_SLACK),
        harmonic: BoundCheck::upper(BoundKind::Soft, report.rc0, stats.harmonic_bound, 0.0),
        diameter: DiameterBounds {
            capacity: BoundCheck::upper(BoundKind::Soft, report.rc0, n / z, 1e-9),
            time: BoundCheck::lower(BoundKind::Soft, report.mean_time, z, 1e-9),
        },
        eq5_ratio: pi.map(|pi| report.mean_time * pi.pi_max * report.rc0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverInfo {
    pub method: SolveMethod,
    pub tol: f64,
    pub residual: f64,
}

/// Full analysis of one graph and routing, in the exported report layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub routing_kind: RoutingKind,
    #[serde(flatten)]
    pub capacity: CapacityReport,
    pub degree_stats: DegreeStats,
    pub average_shortest_path_length: f64,
    /// Stationary distribution of a local routing.
    pub stationary: Option<StationaryDistribution>,
    pub approx_rc0: Option<f64>,
    pub bounds: BoundsReport,
    pub solver: SolverInfo,
}

/// Solves, then derives the capacity report, bounds and (for local routings)
/// the stationary-distribution approximation.
pub fn analyze(g: &Graph, routing: &RoutingSpec, opts: &SolveOptions) -> Result<(AnalysisReport, AlphaMatrix)> {
    let solution = solve_alpha(g, routing, opts)?;
    let capacity = capacity_report(&solution.alpha);
    let degree_stats = g.degree_stats();
    let z = g.average_shortest_path_length()?;
    let stationary = match routing {
        RoutingSpec::Local(p) => Some(stationary_distribution(p, DEFAULT_STATIONARY_TOL)?),
        RoutingSpec::Global(_) => None,
    };
    let bounds = bounds_report(&capacity, &degree_stats, z, stationary.as_ref());
    let approx_rc0 = stationary.as_ref().map(|pi| approx_capacity(g, pi));
    let report = AnalysisReport {
        routing_kind: routing.kind(),
        capacity,
        degree_stats,
        average_shortest_path_length: z,
        stationary,
        approx_rc0,
        bounds,
        solver: SolverInfo { method: solution.method, tol: solution.tol, residual: solution.residual },
    };
    Ok((report, solution.alpha))
}
