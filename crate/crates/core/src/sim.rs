//! Discrete-time packet transport.
//!
//! Every step each vertex serves up to `C` packets from the head of its FIFO
//! queue. A served packet whose current vertex neighbors its destination is
//! delivered; any other is forwarded along the routing matrix, avoiding the
//! last `n_avoid` vertices it came from. Forwarded packets join the back of
//! the next queue at the end of the step (in shuffled order), followed by
//! the packets generated that step.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::routing::{RoutingSpec, TransitionMatrix};

/// Longest supported avoidance memory.
pub const MAX_AVOID: usize = 8;
pub const DEFAULT_WARMUP: usize = 20_000;
pub const DEFAULT_MEASURE: usize = 30_000;
/// Congestion threshold on the order parameter. When one vertex saturates,
/// `eta ~ (C / Rc) (1 - Rc / R)` just above the transition, so bisection
/// overshoots `Rc` by a relative amount of about `threshold * Rc / C`.
pub const DEFAULT_ETA_THRESHOLD: f64 = 0.01;
const MIN_REGRESSION_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Packets served per vertex per step.
    pub capacity: usize,
    /// Mean packets generated per step.
    pub rate: f64,
    pub n_avoid: usize,
    pub seed: u64,
    pub warmup_steps: usize,
    pub measure_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            capacity: 1,
            rate: 0.0,
            n_avoid: 1,
            seed: 0,
            warmup_steps: DEFAULT_WARMUP,
            measure_steps: DEFAULT_MEASURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub source: usize,
    pub destination: usize,
    pub birth: u64,
    recent: [u32; MAX_AVOID],
    recent_len: u8,
}

impl Packet {
    /// Vertices this packet may not step back to, oldest first.
    pub fn recent_visits(&self) -> impl Iterator<Item = usize> + '_ {
        self.recent[..self.recent_len as usize].iter().map(|&v| v as usize)
    }

    fn avoids(&self, v: usize) -> bool {
        self.recent[..self.recent_len as usize].contains(&(v as u32))
    }

    fn remember(&mut self, v: usize, depth: usize) {
        if depth == 0 {
            return;
        }
        let len = self.recent_len as usize;
        if len < depth {
            self.recent[len] = v as u32;
            self.recent_len += 1;
        } else {
            self.recent.copy_within(1..depth, 0);
            self.recent[depth - 1] = v as u32;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub generated: u64,
    pub delivered: u64,
    /// Packets in the network at the end of the step.
    pub in_flight: u64,
}

/// Cumulative next-hop distributions for one transition matrix.
struct RowSampler {
    cols: Vec<Vec<usize>>,
    cdf: Vec<Vec<f64>>,
}

impl RowSampler {
    fn new(p: &TransitionMatrix) -> Self {
        let (cols, cdf) = (0..p.n())
            .map(|i| {
                let mut acc = 0.0;
                let row = p.row(i);
                let cdf = row
                    .iter()
                    .map(|&(_, w)| {
                        acc += w;
                        acc
                    })
                    .collect();
                (row.iter().map(|&(j, _)| j).collect(), cdf)
            })
            .unzip();
        Self { cols, cdf }
    }

    fn draw(&self, v: usize, rng: &mut ChaCha8Rng) -> usize {
        let cdf = &self.cdf[v];
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.cols[v][k]
    }

    fn mass(&self, v: usize, j: usize) -> f64 {
        match self.cols[v].binary_search(&j) {
            Ok(0) => self.cdf[v][0],
            Ok(k) => self.cdf[v][k] - self.cdf[v][k - 1],
            Err(_) => 0.0,
        }
    }
}

/// Live simulation state.
pub struct Simulation<'a> {
    graph: &'a Graph,
    samplers: Vec<RowSampler>,
    global: bool,
    config: SimConfig,
    rng: ChaCha8Rng,
    packets: Vec<Packet>,
    free: Vec<u32>,
    queues: Vec<std::collections::VecDeque<u32>>,
    arrivals: Vec<(usize, u32)>,
    step: u64,
    next_id: u64,
    in_flight: u64,
    generated_total: u64,
    delivered_total: u64,
    measuring: bool,
    stats: Accumulators,
}

struct Accumulators {
    steps: u64,
    queue_sum: Vec<u64>,
    service: Vec<u64>,
    deliveries: u64,
    delivery_time_sum: u64,
    dest_deliveries: Vec<u64>,
    dest_time_sum: Vec<u64>,
}

impl Accumulators {
    fn new(n: usize) -> Self {
        Self {
            steps: 0,
            queue_sum: vec![0; n],
            service: vec![0; n * n],
            deliveries: 0,
            delivery_time_sum: 0,
            dest_deliveries: vec![0; n],
            dest_time_sum: vec![0; n],
        }
    }
}

impl<'a> Simulation<'a> {
    pub fn new(graph: &'a Graph, routing: &RoutingSpec, config: SimConfig) -> Result<Self> {
        validate_config(&config)?;
        routing.validate(graph)?;
        let n = graph.n();
        let samplers = match routing {
            RoutingSpec::Local(p) => vec![RowSampler::new(p)],
            RoutingSpec::Global(ps) => ps.iter().map(RowSampler::new).collect(),
        };
        Ok(Self {
            graph,
            samplers,
            global: matches!(routing, RoutingSpec::Global(_)),
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            packets: Vec::new(),
            free: Vec::new(),
            queues: vec![Default::default(); n],
            arrivals: Vec::new(),
            step: 0,
            next_id: 0,
            in_flight: 0,
            generated_total: 0,
            delivered_total: 0,
            measuring: false,
            stats: Accumulators::new(n),
        })
    }

    pub fn in_flight(&self) -> u64 {
        self.in_flight
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    /// Packets queued at `v`, head first.
    pub fn queue(&self, v: usize) -> impl Iterator<Item = &Packet> + '_ {
        self.queues[v].iter().map(|&idx| &self.packets[idx as usize])
    }

    /// Appends a packet to the back of `vertex`'s queue as if it had just
    /// arrived there after visiting `history` (oldest first).
    pub fn inject(&mut self, vertex: usize, destination: usize, history: &[usize]) -> u64 {
        let mut packet = self.new_packet(vertex, destination);
        for &h in history {
            packet.remember(h, self.config.n_avoid);
        }
        let id = packet.id;
        let idx = self.alloc(packet);
        self.queues[vertex].push_back(idx);
        self.in_flight += 1;
        self.generated_total += 1;
        id
    }

    fn new_packet(&mut self, source: usize, destination: usize) -> Packet {
        let id = self.next_id;
        self.next_id += 1;
        Packet { id, source, destination, birth: self.step, recent: [0; MAX_AVOID], recent_len: 0 }
    }

    fn alloc(&mut self, packet: Packet) -> u32 {
        match self.free.pop() {
            Some(idx) => {
                self.packets[idx as usize] = packet;
                idx
            }
            None => {
                self.packets.push(packet);
                (self.packets.len() - 1) as u32
            }
        }
    }

    fn next_hop(&mut self, v: usize, idx: u32) -> usize {
        let packet = &self.packets[idx as usize];
        let sampler = &self.samplers[if self.global { packet.destination } else { 0 }];
        if packet.recent_len == 0 {
            return sampler.draw(v, &mut self.rng);
        }
        let excluded: f64 = packet.recent_visits().map(|r| sampler.mass(v, r)).sum();
        if excluded >= 1.0 - 1e-12 {
            // Every neighbor is excluded: ignore the avoidance rule.
            return sampler.draw(v, &mut self.rng);
        }
        loop {
            let j = sampler.draw(v, &mut self.rng);
            if !packet.avoids(j) {
                return j;
            }
        }
    }

    /// One synchronous step: service, forwarding, generation.
    pub fn step(&mut self) -> StepStats {
        let n = self.graph.n();
        let capacity = self.config.capacity;
        let mut delivered = 0;
        self.arrivals.clear();
        for v in 0..n {
            for _ in 0..capacity.min(self.queues[v].len()) {
                let idx = self.queues[v].pop_front().unwrap();
                let dest = self.packets[idx as usize].destination;
                if self.measuring {
                    self.stats.service[v * n + dest] += 1;
                }
                if self.graph.is_adjacent(v, dest) {
                    delivered += 1;
                    if self.measuring {
                        let elapsed = self.step - self.packets[idx as usize].birth;
                        self.stats.deliveries += 1;
                        self.stats.delivery_time_sum += elapsed;
                        self.stats.dest_deliveries[dest] += 1;
                        self.stats.dest_time_sum[dest] += elapsed;
                    }
                    self.free.push(idx);
                } else {
                    let next = self.next_hop(v, idx);
                    self.packets[idx as usize].remember(v, self.config.n_avoid);
                    self.arrivals.push((next, idx));
                }
            }
        }
        let mut arrivals = std::mem::take(&mut self.arrivals);
        arrivals.shuffle(&mut self.rng);
        for &(w, idx) in &arrivals {
            self.queues[w].push_back(idx);
        }
        self.arrivals = arrivals;

        let rate = self.config.rate;
        let mut generated = rate.floor() as u64;
        let frac = rate - rate.floor();
        if frac > 0.0 && self.rng.random_bool(frac) {
            generated += 1;
        }
        for _ in 0..generated {
            let source = self.rng.random_range(0..n);
            let mut dest = self.rng.random_range(0..n - 1);
            if dest >= source {
                dest += 1;
            }
            let packet = self.new_packet(source, dest);
            let idx = self.alloc(packet);
            self.queues[source].push_back(idx);
        }

        self.in_flight = self.in_flight + generated - delivered;
        self.generated_total += generated;
        self.delivered_total += delivered;
        if self.measuring {
            self.stats.steps += 1;
            for (acc, q) in self.stats.queue_sum.iter_mut().zip(&self.queues) {
                *acc += q.len() as u64;
            }
        }
        self.step += 1;
        StepStats { generated, delivered, in_flight: self.in_flight }
    }

    /// Steps without collecting statistics; returns `W(t)` for those steps.
    pub fn advance(&mut self, steps: usize) -> Vec<u64> {
        self.measuring = false;
        (0..steps).map(|_| self.step().in_flight).collect()
    }

    /// Runs `steps` steps with fresh statistics and summarizes that window.
    /// The returned trace and order parameter cover the window only.
    pub fn measure(&mut self, steps: usize) -> SimResult {
        let n = self.graph.n();
        self.stats = Accumulators::new(n);
        self.measuring = true;
        let window_start = self.step;
        let w_trace: Vec<u64> = (0..steps).map(|_| self.step().in_flight).collect();
        self.measuring = false;
        self.summarize(w_trace, window_start as usize)
    }

    /// Warmup followed by one measurement window. The trace covers both.
    pub fn run(mut self) -> SimResult {
        let SimConfig { warmup_steps, measure_steps, .. } = self.config;
        let mut trace = self.advance(warmup_steps);
        let mut result = self.measure(measure_steps);
        trace.append(&mut result.w_trace);
        result.w_trace = trace;
        result
    }

    fn summarize(&self, w_trace: Vec<u64>, window_start: usize) -> SimResult {
        let n = self.graph.n();
        let cfg = self.config;
        let acc = &self.stats;
        let steps = acc.steps.max(1) as f64;
        let mean_queue_lengths: Vec<f64> = acc.queue_sum.iter().map(|&s| s as f64 / steps).collect();
        let per_service = steps * cfg.capacity as f64;
        let eta = if cfg.rate > 0.0 {
            order_parameter(&w_trace, 0..w_trace.len(), cfg.rate, cfg.capacity as f64).unwrap_or(0.0)
        } else {
            0.0
        };
        let mut warnings = Vec::new();
        let min_degree = (0..n).map(|v| self.graph.degree(v)).min().unwrap_or(0);
        if cfg.n_avoid > 0 && cfg.n_avoid >= min_degree {
            warnings.push(format!(
                "n_avoid = {} is not below the minimum degree {min_degree}; dead-end fallbacks will occur",
                cfg.n_avoid
            ));
        }
        SimResult {
            n,
            config: cfg,
            window_start,
            window_steps: acc.steps as usize,
            eta,
            generated_count: self.generated_total,
            delivered_count: self.delivered_total,
            in_flight: self.in_flight,
            measured_deliveries: acc.deliveries,
            mean_delivery_time: (acc.deliveries > 0).then(|| acc.delivery_time_sum as f64 / acc.deliveries as f64),
            mean_total_queue_length: mean_queue_lengths.iter().sum(),
            mean_queue_lengths,
            per_destination_delivery_time: acc
                .dest_deliveries
                .iter()
                .zip(&acc.dest_time_sum)
                .map(|(&c, &s)| (c > 0).then(|| s as f64 / c as f64))
                .collect(),
            head_occupancy: acc.service.iter().map(|&c| c as f64 / per_service).collect(),
            warnings,
            w_trace,
        }
    }
}

fn validate_config(cfg: &SimConfig) -> Result<()> {
    if cfg.capacity == 0 {
        return Err(Error::InvalidParams("capacity must be at least 1".into()));
    }
    if !(cfg.rate >= 0.0 && cfg.rate.is_finite()) {
        return Err(Error::InvalidParams(format!("rate must be finite and nonnegative, got {}", cfg.rate)));
    }
    if cfg.measure_steps < 100 {
        return Err(Error::InvalidParams(format!("measure_steps must be at least 100, got {}", cfg.measure_steps)));
    }
    if cfg.n_avoid > MAX_AVOID {
        return Err(Error::InvalidParams(format!("n_avoid is limited to {MAX_AVOID}, got {}", cfg.n_avoid)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub n: usize,
    pub config: SimConfig,
    /// First step of the measurement window.
    pub window_start: usize,
    pub window_steps: usize,
    /// Order parameter over the measurement window.
    pub eta: f64,
    pub generated_count: u64,
    pub delivered_count: u64,
    /// Packets still in the network at the end.
    pub in_flight: u64,
    /// Deliveries during the measurement window.
    pub measured_deliveries: u64,
    /// Mean steps from generation to removal, over measured deliveries.
    pub mean_delivery_time: Option<f64>,
    /// Time average of the total queued packets, `W`.
    pub mean_total_queue_length: f64,
    pub mean_queue_lengths: Vec<f64>,
    pub per_destination_delivery_time: Vec<Option<f64>>,
    /// Row-major `n x n`: services at vertex `i` of packets destined to `j`
    /// per step, divided by `C`. With `C = 1` this is the probability that
    /// the head of `i`'s queue holds a packet for `j`; it estimates
    /// `(R / C) alpha0`.
    #[serde(skip)]
    pub head_occupancy: Vec<f64>,
    pub warnings: Vec<String>,
    /// `W(t)` after every step; from step 0 for [`Simulation::run`], the
    /// window only for [`Simulation::measure`].
    #[serde(skip)]
    pub w_trace: Vec<u64>,
}

impl SimResult {
    pub fn head_occupancy_at(&self, i: usize, j: usize) -> f64 {
        self.head_occupancy[i * self.n + j]
    }

    /// `W(t)` as two-column CSV.
    pub fn w_trace_csv(&self) -> String {
        let mut out = String::from("step,w\n");
        for (t, w) in self.w_trace.iter().enumerate() {
            out.push_str(&format!("{t},{w}\n"));
        }
        out
    }
}

/// Runs one simulation.
pub fn run(graph: &Graph, routing: &RoutingSpec, config: SimConfig) -> Result<SimResult> {
    Ok(Simulation::new(graph, routing, config)?.run())
}

/// `eta = C * slope / R`, with the least-squares slope of `W(t)` over
/// `window`, clamped below at zero.
pub fn order_parameter(w_trace: &[u64], window: Range<usize>, rate: f64, capacity: f64) -> Result<f64> {
    if rate.is_nan() || rate <= 0.0 {
        return Err(Error::InvalidParams(format!("order parameter needs R > 0, got {rate}")));
    }
    if window.end > w_trace.len() || window.start > window.end {
        return Err(Error::InvalidParams(format!(
            "window {window:?} outside trace of length {}",
            w_trace.len()
        )));
    }
    let points = window.len();
    if points < MIN_REGRESSION_POINTS {
        return Err(Error::DegenerateWindow { points });
    }
    let ys = &w_trace[window];
    let m = points as f64;
    let x_mean = (m - 1.0) / 2.0;
    let y_mean = ys.iter().map(|&y| y as f64).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, &y) in ys.iter().enumerate() {
        let dx = x as f64 - x_mean;
        sxy += dx * (y as f64 - y_mean);
        sxx += dx * dx;
    }
    Ok((capacity * (sxy / sxx) / rate).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub rate: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcEstimate {
    pub rc: f64,
    pub low: f64,
    pub high: f64,
    pub probes: Vec<Probe>,
}

/// Bisection on `R` for the free-flow/congestion transition: a probe is
/// congested iff its order parameter exceeds `eta_threshold`.
pub fn estimate_rc(
    graph: &Graph,
    routing: &RoutingSpec,
    base: &SimConfig,
    r_low: f64,
    r_high: f64,
    resolution: f64,
    eta_threshold: f64,
) -> Result<RcEstimate> {
    if !(0.0 < r_low && r_low < r_high && resolution > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 < r_low < r_high and resolution > 0 (got [{r_low}, {r_high}], {resolution})"
        )));
    }
    let eta_at = |rate: f64| -> Result<f64> { Ok(run(graph, routing, SimConfig { rate, ..*base })?.eta) };
    let (eta_low, eta_high) = rayon::join(|| eta_at(r_low), || eta_at(r_high));
    let (eta_low, eta_high) = (eta_low?, eta_high?);
    if eta_low > eta_threshold || eta_high <= eta_threshold {
        return Err(Error::BadBracket { r_low, r_high, eta_low, eta_high });
    }
    let mut probes = vec![Probe { rate: r_low, eta: eta_low }, Probe { rate: r_high, eta: eta_high }];
    let (mut lo, mut hi) = (r_low, r_high);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let eta = eta_at(mid)?;
        probes.push(Probe { rate: mid, eta });
        if eta > eta_threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RcEstimate { rc: 0.5 * (lo + hi), low: lo, high: hi, probes })
}
