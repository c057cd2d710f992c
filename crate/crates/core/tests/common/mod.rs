//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tesim_core::paths::{Path, PathSet, Provenance};
use tesim_core::topology::Topology;
use tesim_core::traffic::TrafficMatrix;

/// Delay approximation written as the case table over utilization intervals.
pub fn case_table(z: f64) -> f64 {
    if z < 1.0 / 3.0 {
        1.5 * z
    } else if z < 2.0 / 3.0 {
        4.5 * z - 1.0
    } else if z < 0.8 {
        15.0 * z - 8.0
    } else if z < 0.9 {
        50.0 * z - 36.0
    } else if z < 0.95 {
        200.0 * z - 171.0
    } else {
        4000.0 * z - 3781.0
    }
}

/// Loopless paths by plain recursive DFS, as node sequences resolved to
/// links (every parallel link yields its own path).
pub fn dfs_paths(t: &Topology, src: usize, dst: usize) -> Vec<Vec<usize>> {
    fn go(t: &Topology, at: usize, dst: usize, on: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == dst {
            out.push(cur.clone());
            return;
        }
        for l in t.links() {
            if l.src == at && !on[l.dst] {
                on[l.dst] = true;
                cur.push(l.id);
                go(t, l.dst, dst, on, cur, out);
                cur.pop();
                on[l.dst] = false;
            }
        }
    }
    let mut on = vec![false; t.node_count()];
    on[src] = true;
    let mut out = Vec::new();
    go(t, src, dst, &mut on, &mut Vec::new(), &mut out);
    out
}

/// Shortest distance by Bellman-Ford relaxation.
pub fn reference_distance(t: &Topology, src: usize, dst: usize, cost: impl Fn(usize) -> f64) -> Option<f64> {
    let mut d = vec![f64::INFINITY; t.node_count()];
    d[src] = 0.0;
    for _ in 0..t.node_count() {
        for l in t.links() {
            if d[l.src] + cost(l.id) < d[l.dst] {
                d[l.dst] = d[l.src] + cost(l.id);
            }
        }
    }
    d[dst].is_finite().then_some(d[dst])
}

/// Random simple digraph where every link has its reverse, 4 to 6 nodes.
pub fn random_graph(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize) -> Topology {
    let n = rng.gen_range(n_lo..=n_hi);
    let mut links = Vec::new();
    // ring for connectivity, then random chords
    for i in 0..n {
        let j = (i + 1) % n;
        let c = rng.gen_range(1.0..10.0f64).round();
        links.push((i, j, c));
        links.push((j, i, c));
    }
    for _ in 0..rng.gen_range(1..=n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b || links.iter().any(|&(s, d, _)| s == a && d == b) {
            continue;
        }
        let c = rng.gen_range(1.0..10.0f64).round();
        links.push((a, b, c));
        links.push((b, a, c));
    }
    Topology::new((0..n).map(|i| format!("n{i}")).collect(), links)
}

/// A small routing instance: demands with explicit candidate paths.
#[derive(Debug, Clone)]
pub struct Instance {
    pub t: Topology,
    pub demands: Vec<(usize, usize, f64, Vec<Path>)>,
}

impl Instance {
    pub fn path_set(&self) -> PathSet {
        let mut ps = PathSet::empty(self.t.node_count(), Provenance::Ksp);
        for (s, d, _, paths) in &self.demands {
            ps.set_paths(*s, *d, paths.clone());
        }
        ps
    }

    pub fn tm(&self) -> TrafficMatrix {
        let mut tm = TrafficMatrix::zeros(self.t.node_count());
        for &(s, d, h, _) in &self.demands {
            tm.set(s, d, h);
        }
        tm
    }

    fn loads(&self, ratios: &[Vec<f64>]) -> Vec<f64> {
        let mut y = vec![0.0; self.t.link_count()];
        for ((_, _, h, paths), r) in self.demands.iter().zip(ratios) {
            for (p, x) in paths.iter().zip(r) {
                for &l in &p.links {
                    y[l] += h * x;
                }
            }
        }
        y
    }

    pub fn mlu(&self, ratios: &[Vec<f64>]) -> f64 {
        self.loads(ratios)
            .iter()
            .zip(self.t.links())
            .map(|(y, l)| y / l.capacity)
            .fold(0.0, f64::max)
    }

    pub fn delay(&self, ratios: &[Vec<f64>]) -> f64 {
        self.loads(ratios)
            .iter()
            .zip(self.t.links())
            .map(|(y, l)| case_table(y / l.capacity))
            .sum()
    }

    /// Minimum of `f` over all splitting ratios on a grid of step `1/steps`.
    pub fn grid_min(&self, steps: usize, f: impl Fn(&Self, &[Vec<f64>]) -> f64) -> f64 {
        fn splits(k: usize, steps: usize) -> Vec<Vec<f64>> {
            match k {
                1 => vec![vec![1.0]],
                2 => (0..=steps).map(|i| vec![i as f64 / steps as f64, 1.0 - i as f64 / steps as f64]).collect(),
                3 => {
                    let mut v = Vec::new();
                    for i in 0..=steps {
                        for j in 0..=steps - i {
                            let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                            v.push(vec![a, b, (1.0 - a - b).max(0.0)]);
                        }
                    }
                    v
                }
                _ => panic!("grid oracle supports at most 3 paths per demand"),
            }
        }
        let per: Vec<Vec<Vec<f64>>> = self.demands.iter().map(|d| splits(d.3.len(), steps)).collect();
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; per.len()];
        loop {
            let ratios: Vec<Vec<f64>> = idx.iter().zip(&per).map(|(&i, p)| p[i].clone()).collect();
            best = best.min(f(self, &ratios));
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return best;
                }
                idx[k] += 1;
                if idx[k] < per[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

/// Random instance whose demands each get up to `max_paths` loopless paths;
/// `total_paths` caps the path count over all demands. Volumes keep link
/// utilization moderate so the grid resolution bounds the oracle error.
pub fn random_instance(seed: u64, demands: usize, max_paths: usize, total_paths: usize, load: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let t = random_graph(&mut rng, 4, 6);
        let n = t.node_count();
        let mut out = Vec::new();
        let mut budget = total_paths;
        let mut tries = 0;
        while out.len() < demands && tries < 50 {
            tries += 1;
            let s = rng.gen_range(0..n);
            let d = rng.gen_range(0..n);
            if s == d || out.iter().any(|&(a, b, _, _)| (a, b) == (s, d)) {
                continue;
            }
            let mut all = dfs_paths(&t, s, d);
            if all.len() < 2 {
                continue;
            }
            all.sort_by_key(|p| p.len());
            let left = demands - out.len() - 1;
            let k = max_paths.min(budget.saturating_sub(left)).min(all.len());
            if k == 0 {
                break;
            }
            budget -= k;
            let paths: Vec<Path> = all.into_iter().take(k).map(|links| Path::from_links(&t, s, links)).collect();
            let width = paths
                .iter()
                .map(|p| p.links.iter().map(|&l| t.link(l).capacity).fold(f64::INFINITY, f64::min))
                .sum::<f64>();
            let h = (rng.gen_range(0.2..1.0) * load * width * 1000.0).round() / 1000.0;
            out.push((s, d, h, paths));
        }
        if out.len() == demands {
            return Instance { t, demands: out };
        }
    }
}
