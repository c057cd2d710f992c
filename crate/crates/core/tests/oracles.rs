mod common;

use common::{dfs_paths, random_graph, random_instance, reference_distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tesim_core::lp::{build_arc_lp, build_lp, solve_lp, DEFAULT_TOLERANCE};
use tesim_core::paths::{all_simple_paths, build_path_set, compare_paths, yen_ksp, PathSource};
use tesim_core::raecke::{extract_weighted_paths, raecke_distribution};
use tesim_core::topology::{capacity_histogram, geant};
use tesim_core::traffic::{gravity_from_weights, TrafficMatrix};
use tesim_core::{CostMetric, Objective, RaeckeParams, Topology};

const GRID: usize = 1000;

fn lp_objective(inst: &common::Instance, obj: Objective) -> f64 {
    let sol = solve_lp(&build_lp(&inst.path_set(), &inst.tm(), &inst.t, obj), DEFAULT_TOLERANCE);
    assert!(sol.is_optimal(), "{:?}", sol.status);
    sol.objective
}

#[test]
fn lb_matches_grid_search() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        // alternate one demand on three paths with two demands on two and one
        let inst = if seed % 2 == 0 { random_instance(seed, 1, 3, 3, 0.8) } else { random_instance(seed, 2, 2, 3, 0.8) };
        let lp = lp_objective(&inst, Objective::LoadBalance);
        let grid = inst.grid_min(GRID, common::Instance::mlu);
        assert!(lp <= grid + 1e-9, "seed {seed}: lp {lp} above grid {grid}");
        worst = worst.max(grid - lp);
        assert!(grid - lp <= 5e-3, "seed {seed}: lp {lp} grid {grid}");
    }
    eprintln!("lb grid gap max {worst:.2e}");
}

#[test]
fn ad_matches_grid_search() {
    let mut worst: f64 = 0.0;
    for seed in 100..120 {
        let demands = if seed % 2 == 0 { 1 } else { 2 };
        let inst = random_instance(seed, demands, 2, 4, 0.6);
        let lp = lp_objective(&inst, Objective::AverageDelay);
        let grid = inst.grid_min(GRID, common::Instance::delay);
        assert!(lp <= grid + 1e-9, "seed {seed}: lp {lp} above grid {grid}");
        worst = worst.max(grid - lp);
        assert!(grid - lp <= 5e-3, "seed {seed}: lp {lp} grid {grid}");
    }
    eprintln!("ad grid gap max {worst:.2e}");
}

fn sorted_dfs(t: &Topology, s: usize, d: usize, metric: CostMetric) -> Vec<Vec<usize>> {
    let cost = |links: &[usize]| links.iter().map(|&l| metric.link_cost(t, l)).sum::<f64>();
    let nodes = |links: &[usize]| {
        let mut v = vec![s];
        v.extend(links.iter().map(|&l| t.link(l).dst));
        v
    };
    let mut all = dfs_paths(t, s, d);
    all.sort_by(|a, b| {
        let (ca, cb) = (cost(a), cost(b));
        let tie = (ca - cb).abs() <= 1e-9 * ca.max(cb).max(1.0);
        let by_cost = if tie { std::cmp::Ordering::Equal } else { ca.total_cmp(&cb) };
        by_cost.then_with(|| nodes(a).cmp(&nodes(b))).then_with(|| a.cmp(b))
    });
    all
}

#[test]
fn yen_equals_sorted_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..15 {
        let t = random_graph(&mut rng, 4, 6);
        for metric in [CostMetric::HopCount, CostMetric::InverseCapacity] {
            for s in 0..t.node_count() {
                for d in 0..t.node_count() {
                    if s == d {
                        continue;
                    }
                    let want = sorted_dfs(&t, s, d, metric);
                    let got: Vec<Vec<usize>> = yen_ksp(&t, s, d, 1000, metric).into_iter().map(|p| p.links).collect();
                    assert_eq!(got, want, "{s}->{d} {metric:?}");
                    let two: Vec<Vec<usize>> = yen_ksp(&t, s, d, 2, metric).into_iter().map(|p| p.links).collect();
                    assert_eq!(two[..], want[..want.len().min(2)]);
                }
            }
        }
    }
}

#[test]
fn k1_is_a_shortest_path() {
    for seed in 0..20 {
        let t = tesim_core::topology::random_topology(7, 18, (1.0, 10.0), seed);
        for metric in [CostMetric::HopCount, CostMetric::InverseCapacity] {
            for s in 0..t.node_count() {
                for d in 0..t.node_count() {
                    if s == d {
                        continue;
                    }
                    let got = yen_ksp(&t, s, d, 1, metric);
                    match reference_distance(&t, s, d, |l| metric.link_cost(&t, l)) {
                        None => assert!(got.is_empty()),
                        Some(dist) => {
                            assert_eq!(got.len(), 1);
                            assert!(got[0].is_valid(&t));
                            assert!((got[0].cost(&t, metric) - dist).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn enumeration_matches_dfs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let t = random_graph(&mut rng, 4, 6);
        for s in 0..t.node_count() {
            for d in 0..t.node_count() {
                if s == d {
                    continue;
                }
                let mut got: Vec<_> = all_simple_paths(&t, s, d, 100_000).paths.into_iter().map(|p| p.links).collect();
                let mut want = dfs_paths(&t, s, d);
                got.sort();
                want.sort();
                assert_eq!(got, want);
            }
        }
    }
}

fn random_tm(rng: &mut ChaCha8Rng, t: &Topology) -> TrafficMatrix {
    let n = t.node_count();
    let mut tm = TrafficMatrix::zeros(n);
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.gen_bool(0.5) {
                tm.set(s, d, rng.gen_range(0.0..3.0));
            }
        }
    }
    tm
}

#[test]
fn arc_form_equals_all_paths_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let t = random_graph(&mut rng, 4, 6);
        let tm = random_tm(&mut rng, &t);
        let all = build_path_set(&t, PathSource::AllPaths { max_paths: 100_000 }, 1);
        assert!(!all.truncated);
        for obj in [Objective::LoadBalance, Objective::AverageDelay] {
            let arc = solve_lp(&build_arc_lp(&t, &tm, obj), DEFAULT_TOLERANCE);
            let path = solve_lp(&build_lp(&all, &tm, &t, obj), DEFAULT_TOLERANCE);
            assert!(arc.is_optimal() && path.is_optimal());
            let tol = 1e-6 * path.objective.abs().max(1.0);
            assert!((arc.objective - path.objective).abs() <= tol, "{i} {obj:?}: arc {} path {}", arc.objective, path.objective);
        }
    }
}

#[test]
fn raecke_weights_form_distributions() {
    for seed in 0..100 {
        let t = tesim_core::topology::random_topology(4 + (seed as usize % 5), 14, (1.0, 10.0), seed);
        let dist = raecke_distribution(&t, &RaeckeParams { seed, iterations: 4, ..Default::default() });
        assert!((dist.total_weight() - 1.0).abs() < 1e-9);
        let w = extract_weighted_paths(&t, &dist);
        for s in 0..t.node_count() {
            let from_s = t.reachable_from(s);
            for d in 0..t.node_count() {
                if s == d {
                    continue;
                }
                let mutual = from_s[d] && t.reachable_from(d)[s];
                let sum = w.weight_sum(s, d);
                if mutual {
                    assert!((sum - 1.0).abs() < 1e-9, "seed {seed} {s}->{d}: {sum}");
                    assert!(w.paths(s, d).iter().all(|p| p.is_valid(&t) && p.is_loop_free()));
                } else if !from_s[d] {
                    assert!(w.paths(s, d).is_empty());
                }
            }
        }
    }
}

/// Oblivious congestion over optimal congestion for random demands.
#[test]
fn raecke_competitive_ratio_report() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_graph(&mut rng, 6, 6);
    let dist = raecke_distribution(&t, &RaeckeParams::default());
    let w = extract_weighted_paths(&t, &dist);
    let mut ratios = Vec::new();
    for _ in 0..50 {
        let tm = random_tm(&mut rng, &t);
        let mut load = vec![0.0; t.link_count()];
        for (s, d, h) in tm.demands() {
            for p in w.paths(s, d) {
                for &l in &p.links {
                    load[l] += h * p.weight.unwrap();
                }
            }
        }
        let obl = load.iter().zip(t.links()).map(|(y, l)| y / l.capacity).fold(0.0, f64::max);
        let opt = solve_lp(&build_arc_lp(&t, &tm, Objective::LoadBalance), DEFAULT_TOLERANCE);
        assert!(opt.is_optimal());
        if opt.objective > 0.0 {
            let a = obl / opt.objective;
            assert!(a >= 1.0 - 1e-6, "oblivious below optimum: {a}");
            ratios.push(a);
        }
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    eprintln!("raecke alpha over {} demands: mean {mean:.3} max {max:.3}", ratios.len());
}

#[test]
fn geant_ksp_paths_are_loop_free() {
    let t = geant();
    let set = build_path_set(&t, PathSource::Ksp(CostMetric::HopCount), 4);
    for (s, d, paths) in set.iter() {
        if s == d {
            continue;
        }
        assert!((1..=4).contains(&paths.len()), "{s}->{d}: {}", paths.len());
        for p in paths {
            assert!(p.is_valid(&t) && p.is_loop_free());
            assert_eq!((p.nodes[0], *p.nodes.last().unwrap()), (s, d));
        }
        for w in paths.windows(2) {
            assert!(compare_paths(&t, CostMetric::HopCount, &w[0], &w[1]).is_lt());
        }
    }
}

#[test]
fn geant_capacity_histogram_matches_hand_tally() {
    let t = geant();
    let mut tally = std::collections::BTreeMap::new();
    for l in t.links() {
        *tally.entry(l.capacity as u64).or_insert(0usize) += 1;
    }
    let hist = capacity_histogram(&t, 10.0).unwrap();
    let got: Vec<(u64, usize)> = hist.iter().map(|&(lo, c)| (lo.round() as u64, c)).collect();
    let mut want = Vec::new();
    let mut lo = *tally.keys().next().unwrap();
    while want.len() < got.len() {
        let c = tally.range(lo..lo * 10).map(|(_, c)| c).sum();
        want.push((lo, c));
        lo *= 10;
    }
    assert_eq!(got, want);
    assert_eq!(got.iter().map(|g| g.1).sum::<usize>(), t.link_count());
}

#[test]
fn gravity_small_example() {
    // weights 1, 2, 3: off-diagonal products sum to 2·(2 + 3 + 6) = 22
    let tm = gravity_from_weights(&[1.0, 2.0, 3.0], 22.0).unwrap();
    assert!((tm.get(0, 1) - 2.0).abs() < 1e-12);
    assert!((tm.get(2, 1) - 6.0).abs() < 1e-12);
    assert!((tm.get(0, 2) - 3.0).abs() < 1e-12);
    assert_eq!(tm.get(1, 1), 0.0);
    assert!((tm.total() - 22.0).abs() < 1e-12);
}

#[test]
fn optimal_lb_delivers_everything_when_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..20 {
        let t = random_graph(&mut rng, 4, 6);
        let tm = random_tm(&mut rng, &t);
        let r = solve_lp(&build_arc_lp(&t, &tm, Objective::LoadBalance), DEFAULT_TOLERANCE).objective;
        if r > 1.0 {
            continue;
        }
        let m = tesim_core::sim::simulate_step(Objective::LoadBalance, None, &tm, &t, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(m.throughput, 1.0, "r* = {r}, max util {}", m.max_utilization);
        checked += 1;
    }
    assert!(checked >= 5);
}
