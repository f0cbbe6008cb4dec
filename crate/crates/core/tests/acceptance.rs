//! Acceptance suite. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p routecap --test acceptance -- --nocapture`.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use routecap::analysis::{analyze, approx_capacity, capacity_report, solve_alpha, SolveMethod, SolveOptions};
use routecap::routing::{
    degree_biased, random_consistent, shortest_path_routing, stationary_distribution, uniform_random_walk,
    DEFAULT_STATIONARY_TOL,
};
use routecap::sim::{estimate_rc, SimConfig, Simulation, DEFAULT_ETA_THRESHOLD};
use routecap::{generate_ba, Error, Graph, RoutingSpec};
use std::time::Instant;

fn walk(g: &Graph) -> RoutingSpec {
    RoutingSpec::Local(uniform_random_walk(g))
}

fn lowrank() -> SolveOptions {
    SolveOptions::with_method(SolveMethod::LowRank)
}

fn rc0(g: &Graph, routing: &RoutingSpec, opts: &SolveOptions) -> f64 {
    capacity_report(&solve_alpha(g, routing, opts).unwrap().alpha).rc0
}

/// Graphs for the shortest-path checks: random connected graphs with
/// N <= 50, drawn from a fixed seed.
fn random_test_graphs(count: usize, seed: u64) -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(5..=50);
            let p = rng.random_range(1.5 / n as f64..0.4);
            random_connected(n, p, &mut rng)
        })
        .collect()
}

fn all_small_graphs() -> Vec<Graph> {
    (2..=5).flat_map(connected_graphs).collect()
}

#[test]
fn criterion_1_transit_capacity_product_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut instances: Vec<(Graph, RoutingSpec, SolveOptions)> = Vec::new();
    for k in 0..100 {
        let n = rng.random_range(50..=600);
        let m = rng.random_range(1..=5);
        let g = generate_ba(n, m, rng.random()).unwrap();
        let p = if k % 2 == 0 { uniform_random_walk(&g) } else { degree_biased(&g, rng.random_range(-1.0..=1.0)) };
        instances.push((g, RoutingSpec::Local(p), lowrank()));
    }
    for _ in 0..20 {
        let n = rng.random_range(20..=100);
        let g = if rng.random_bool(0.5) {
            generate_ba(n, rng.random_range(1..=4), rng.random()).unwrap()
        } else {
            random_connected(n, 4.0 / n as f64, &mut rng)
        };
        let routing = shortest_path_routing(&g).unwrap();
        instances.push((g, routing, SolveOptions::default()));
    }
    let count = instances.len();
    let worst = instances
        .par_iter()
        .map(|(g, routing, opts)| {
            let report = capacity_report(&solve_alpha(g, routing, opts).unwrap().alpha);
            report.t0 * report.rc0
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    let complete_gap = (2..=12)
        .map(|n| {
            let g = Graph::complete(n);
            let report = capacity_report(&solve_alpha(&g, &walk(&g), &SolveOptions::default()).unwrap().alpha);
            (report.t0 * report.rc0 - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1.0 + 1e-12 && complete_gap <= 1e-12 && elapsed < 120.0;
    verdict(
        1,
        "t0*rc0 <= 1",
        pass,
        &format!(
            "{count} instances, max t0*rc0 = {worst:.15}, max |t0*rc0 - 1| on K_2..K_12 = {complete_gap:.2e}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_2_betweenness_identity() {
    let graphs = random_test_graphs(20, 0x5eed_0002);
    let mut worst_b = 0.0f64;
    let mut worst_rc = 0.0f64;
    for g in &graphs {
        let routing = shortest_path_routing(g).unwrap();
        let report = capacity_report(&solve_alpha(g, &routing, &SolveOptions::default()).unwrap().alpha);
        let oracle = brute_force_betweenness(g);
        for (a, b) in report.betweenness.iter().zip(&oracle) {
            worst_b = worst_b.max((a - b).abs());
        }
        let n = g.n() as f64;
        let b_max = oracle.iter().copied().fold(0.0, f64::max);
        worst_rc = worst_rc.max((report.rc0 - n * (n - 1.0) / b_max).abs());
    }
    let sizes: Vec<usize> = graphs.iter().map(Graph::n).collect();
    verdict(
        2,
        "betweenness from occupancy equals path enumeration",
        worst_b <= 1e-9 && worst_rc <= 1e-9,
        &format!("N = {sizes:?}, max |dB| = {worst_b:.2e}, max |d rc0| = {worst_rc:.2e}"),
    );
}

#[test]
fn criterion_3_littles_law() {
    let g = generate_ba(200, 5, 0x5eed_0003).unwrap();
    let routing = walk(&g);
    let rc = rc0(&g, &routing, &lowrank());
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for fraction in [0.2, 0.5, 0.8] {
        let rate = fraction * rc;
        let config = SimConfig { capacity: 1, rate, seed: 0x5eed_0003, ..SimConfig::default() };
        let result = routecap::sim::run(&g, &routing, config).unwrap();
        let from_queues = result.mean_total_queue_length / rate;
        let from_deliveries = result.mean_delivery_time.unwrap();
        let rel = (from_queues - from_deliveries).abs() / from_deliveries;
        worst = worst.max(rel);
        details.push(format!("R/Rc={fraction}: L/R={from_queues:.2} T={from_deliveries:.2}"));
    }
    verdict(
        3,
        "Little's law",
        worst <= 0.10,
        &format!("Rc = {rc:.3}, {}, max rel. diff = {worst:.4}", details.join(", ")),
    );
}

#[test]
fn criterion_4_queue_and_time_profiles() {
    let g = generate_ba(600, 5, 0x5eed_0004).unwrap();
    let routing = walk(&g);
    let (rate, capacity) = (35.0, 10);
    let alpha = solve_alpha(&g, &routing, &lowrank()).unwrap().alpha;
    let report = capacity_report(&alpha);
    let analytic_l: Vec<f64> = report.row_sums.iter().map(|s| rate * s).collect();

    let config = SimConfig { capacity, rate, n_avoid: 1, seed: 0x5eed_0004, ..SimConfig::default() };
    let result = routecap::sim::run(&g, &routing, config).unwrap();
    let corr = pearson(&mean_normalized(&analytic_l), &mean_normalized(&result.mean_queue_lengths));

    let simulated_t: Vec<f64> =
        result.per_destination_delivery_time.iter().map(|t| t.expect("every destination receives packets")).collect();
    let a = mean_normalized(&report.per_destination_time);
    let s = mean_normalized(&simulated_t);
    let rmse = (a.iter().zip(&s).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();

    verdict(
        4,
        "per-vertex queue lengths and per-destination times",
        corr >= 0.95 && rmse <= 0.15,
        &format!(
            "<k> = {:.2}, rc0*C = {:.2}, pearson(L) = {corr:.4}, relative RMSE(T_s) = {rmse:.4}, eta = {:.4}",
            g.degree_stats().mean_degree,
            report.rc0 * capacity as f64,
            result.eta
        ),
    );
}

#[test]
fn criterion_5_simulated_transition_matches_analysis() {
    let cases = vec![
        ("star(5)", Graph::star(5)),
        ("K4", Graph::complete(4)),
        ("BA(200,5)", generate_ba(200, 5, 0x5eed_0005).unwrap()),
    ];
    let outcomes: Vec<(String, f64, f64)> = cases
        .par_iter()
        .map(|(name, g)| {
            let routing = walk(g);
            let analytic = rc0(g, &routing, &SolveOptions::default());
            let base = SimConfig { capacity: 1, n_avoid: 0, seed: 0x5eed_0005, ..SimConfig::default() };
            let estimate = estimate_rc(
                g,
                &routing,
                &base,
                0.5 * analytic,
                2.0 * analytic,
                0.005 * analytic,
                DEFAULT_ETA_THRESHOLD,
            )
            .unwrap();
            (name.to_string(), analytic, estimate.rc)
        })
        .collect();
    let worst = outcomes.iter().map(|(_, a, e)| (e - a).abs() / a).fold(0.0, f64::max);
    let detail: Vec<String> =
        outcomes.iter().map(|(name, a, e)| format!("{name}: analytic {a:.4} simulated {e:.4}")).collect();
    verdict(
        5,
        "simulated transition point",
        worst <= 0.10,
        &format!("{}, max rel. diff = {worst:.4}", detail.join(", ")),
    );
}

#[test]
fn criterion_6_stationary_approximation_scatter() {
    let start = Instant::now();
    let pairs: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .flat_map_iter(|graph_seed| {
            let g = generate_ba(1000, 2, 0x5eed_0600 + graph_seed).unwrap();
            (0..5u64)
                .map(|r| {
                    let p = random_consistent(&g, 1000 * graph_seed + r);
                    let pi = stationary_distribution(&p, DEFAULT_STATIONARY_TOL).unwrap();
                    let approx = approx_capacity(&g, &pi);
                    let exact = rc0(&g, &RoutingSpec::Local(p), &lowrank());
                    (approx, exact)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (approx, exact): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let deviation = median(pairs.iter().map(|(a, e)| (a - e).abs() / e).collect());
    let slope = ols_slope(&approx, &exact);
    verdict(
        6,
        "stationary-distribution capacity estimate",
        deviation <= 0.25 && (0.8..=1.2).contains(&slope),
        &format!(
            "{} routings, median rel. deviation = {deviation:.4}, slope = {slope:.4}, {:.0}s",
            pairs.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_head_occupancy_matches_occupancy_matrix() {
    const BATCHES: usize = 200;
    const BATCH_STEPS: usize = 2_000;
    const WARMUP: usize = 2_000;
    let graphs = all_small_graphs();
    let outcomes: Vec<(usize, usize, usize, f64)> = graphs
        .par_iter()
        .enumerate()
        .map(|(index, g)| {
            let n = g.n();
            let routing = walk(g);
            let alpha = solve_alpha(g, &routing, &SolveOptions::default()).unwrap().alpha;
            let rate = 0.5 * capacity_report(&alpha).rc0;
            let config = SimConfig {
                capacity: 1,
                rate,
                n_avoid: 0,
                seed: 0x5eed_0700 + index as u64,
                warmup_steps: WARMUP,
                measure_steps: BATCH_STEPS,
            };
            let mut sim = Simulation::new(g, &routing, config).unwrap();
            sim.advance(WARMUP);
            let batches: Vec<Vec<f64>> = (0..BATCHES)
                .map(|_| {
                    let r = sim.measure(BATCH_STEPS);
                    (0..n * n).map(|k| r.head_occupancy_at(k / n, k % n)).collect()
                })
                .collect();
            let mut entries = 0;
            let mut random_entries = 0;
            let mut misses = 0;
            let mut worst_z = 0.0f64;
            for k in 0..n * n {
                let expected = rate * alpha.get(k / n, k % n);
                let samples: Vec<f64> = batches.iter().map(|b| b[k]).collect();
                let mean = samples.iter().sum::<f64>() / BATCHES as f64;
                let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
                let se = (var / BATCHES as f64).sqrt();
                entries += 1;
                let diff = (mean - expected).abs();
                if se == 0.0 {
                    if diff > 1e-12 {
                        misses += 1;
                    }
                    continue;
                }
                random_entries += 1;
                worst_z = worst_z.max(diff / se);
                if diff > 3.0 * se {
                    misses += 1;
                }
            }
            (entries, random_entries, misses, worst_z)
        })
        .collect();
    let entries: usize = outcomes.iter().map(|o| o.0).sum();
    let random_entries: usize = outcomes.iter().map(|o| o.1).sum();
    let misses: usize = outcomes.iter().map(|o| o.2).sum();
    let worst_z = outcomes.iter().map(|o| o.3).fold(0.0, f64::max);
    // Two-sided normal tail beyond 3 SE.
    let expected_by_chance = 0.0027 * random_entries as f64;
    verdict(
        7,
        "simulated head occupancy within 3 SE of (R/C) alpha0",
        misses == 0,
        &format!(
            "{} graphs, {entries} entries ({random_entries} stochastic), {misses} beyond 3 SE \
             (about {expected_by_chance:.1} expected by chance alone), max |z| = {worst_z:.2}",
            graphs.len()
        ),
    );
}

#[test]
fn criterion_8_direct_and_series_solvers_agree() {
    let direct = SolveOptions::default();
    let series = SolveOptions { tol: 1e-15, ..SolveOptions::with_method(SolveMethod::Neumann) };
    let mut instances: Vec<(Graph, RoutingSpec)> = Vec::new();
    for (k, g) in all_small_graphs().into_iter().enumerate() {
        instances.push((g.clone(), walk(&g)));
        instances.push((g.clone(), RoutingSpec::Local(random_consistent(&g, k as u64))));
        instances.push((g.clone(), shortest_path_routing(&g).unwrap()));
    }
    for g in random_test_graphs(20, 0x5eed_0002) {
        instances.push((g.clone(), walk(&g)));
        instances.push((g.clone(), shortest_path_routing(&g).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    for _ in 0..10 {
        let g = generate_ba(rng.random_range(50..=120), rng.random_range(1..=4), rng.random()).unwrap();
        instances.push((g.clone(), RoutingSpec::Local(degree_biased(&g, rng.random_range(-1.0..=1.0)))));
        instances.push((g.clone(), RoutingSpec::Local(random_consistent(&g, rng.random()))));
    }
    for n in [2, 5, 10] {
        for g in [Graph::complete(n), Graph::path(n), Graph::star(n)] {
            instances.push((g.clone(), walk(&g)));
        }
    }
    // `None` marks a series that hit the iteration cap; it must fail loudly
    // with `NonConvergent` rather than return a wrong column.
    let outcomes: Vec<Option<f64>> = instances
        .par_iter()
        .map(|(g, routing)| {
            let a = solve_alpha(g, routing, &direct).unwrap().alpha;
            match solve_alpha(g, routing, &series) {
                Ok(b) => Some(a.max_abs_diff(&b.alpha)),
                Err(Error::NonConvergent { .. }) => None,
                Err(e) => panic!("unexpected solver error: {e}"),
            }
        })
        .collect();
    let worst = outcomes.iter().flatten().copied().fold(0.0, f64::max);
    let stalled = outcomes.iter().filter(|o| o.is_none()).count();
    verdict(
        8,
        "direct and Neumann-series solutions agree",
        worst <= 1e-10,
        &format!(
            "{} instances, {stalled} series stalled at the iteration cap, max |diff| over the rest = {worst:.2e}",
            instances.len()
        ),
    );
}

#[test]
fn criterion_9_shortest_path_length_bounds() {
    let mut graphs = all_small_graphs();
    graphs.extend(random_test_graphs(20, 0x5eed_0002));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    for _ in 0..10 {
        graphs.push(generate_ba(rng.random_range(50..=200), rng.random_range(1..=4), rng.random()).unwrap());
    }
    for seed in 0..10 {
        graphs.push(random_tree(rng.random_range(2..=80), seed));
    }
    graphs.extend([Graph::path(12), Graph::star(9), Graph::cycle(7)]);

    let mut bound_failures = 0;
    let mut unique_checked = 0;
    let mut worst_tight = 0.0f64;
    for g in &graphs {
        let (report, _) = analyze(g, &shortest_path_routing(g).unwrap(), &SolveOptions::default()).unwrap();
        let z = report.average_shortest_path_length;
        let n = g.n() as f64;
        if report.capacity.rc0 > n / z + 1e-9 || report.capacity.mean_time < z - 1e-9 {
            bound_failures += 1;
        }
        if has_unique_shortest_paths(g) {
            unique_checked += 1;
            worst_tight = worst_tight.max((report.capacity.mean_time - z).abs());
        }
    }
    verdict(
        9,
        "rc0 <= N/Z and T >= Z under shortest-path routing",
        bound_failures == 0 && worst_tight <= 1e-9,
        &format!(
            "{} graphs, {bound_failures} bound violations, {unique_checked} with unique paths, max |T - Z| there = {worst_tight:.2e}",
            graphs.len()
        ),
    );
}
