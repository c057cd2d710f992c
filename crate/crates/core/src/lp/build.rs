use super::{Cmp, LpModel, Objective, VarRole, DELAY_PIECES};
use crate::paths::PathSet;
use crate::topology::Topology;
use crate::traffic::TrafficMatrix;

fn empty_model(t: &Topology, objective: Objective) -> LpModel {
    let scale = t.links().iter().map(|l| l.capacity).fold(0.0, f64::max);
    LpModel {
        objective,
        vars: Vec::new(),
        rows: Vec::new(),
        scale: if scale > 0.0 { scale } else { 1.0 },
        unroutable: Vec::new(),
    }
}

/// Adds one flow variable per candidate path and the demand equalities
/// `Σ_p x_dp = h_d`. Returns per-link `(var, 1.0)` incidence terms.
fn add_path_flows(m: &mut LpModel, paths: &PathSet, tm: &TrafficMatrix, t: &Topology) -> Vec<Vec<(usize, f64)>> {
    let mut on_link = vec![Vec::new(); t.link_count()];
    for (src, dst, candidates) in paths.iter() {
        let volume = tm.get(src, dst);
        if candidates.is_empty() {
            if volume > 0.0 {
                m.unroutable.push((src, dst, volume));
            }
            continue;
        }
        let mut terms = Vec::with_capacity(candidates.len());
        for (path, p) in candidates.iter().enumerate() {
            let x = m.add_var(VarRole::PathFlow { src, dst, path }, 0.0);
            terms.push((x, 1.0));
            for &l in &p.links {
                on_link[l].push((x, 1.0));
            }
        }
        m.add_row(format!("demand_{src}_{dst}"), terms, Cmp::Eq, volume / m.scale);
    }
    on_link
}

/// Objective-specific link rows over the given per-link load terms.
fn add_link_rows(m: &mut LpModel, t: &Topology, on_link: Vec<Vec<(usize, f64)>>) {
    match m.objective {
        Objective::LoadBalance => {
            // Σ δ x ≤ c_l · r, with r unbounded above so overload stays feasible
            let r = m.add_var(VarRole::Utilization, 1.0);
            for (link, mut terms) in on_link.into_iter().enumerate() {
                terms.push((r, -t.link(link).capacity / m.scale));
                m.add_row(format!("cap_{link}"), terms, Cmp::Le, 0.0);
            }
        }
        Objective::AverageDelay => {
            for (link, mut terms) in on_link.into_iter().enumerate() {
                let cap = t.link(link).capacity / m.scale;
                let y = m.add_var(VarRole::Load { link }, 0.0);
                let r = m.add_var(VarRole::Cost { link }, 1.0 / cap);
                terms.push((y, -1.0));
                m.add_row(format!("load_{link}"), terms, Cmp::Eq, 0.0);
                for (k, &(slope, intercept)) in DELAY_PIECES.iter().enumerate() {
                    m.add_row(
                        format!("piece{k}_{link}"),
                        vec![(r, 1.0), (y, -slope)],
                        Cmp::Ge,
                        -intercept * cap,
                    );
                }
            }
        }
    }
}

/// Min-MLU over the given paths: `min r` s.t. demands met and every link
/// load at most `c_l · r`.
pub fn build_lb_lp(paths: &PathSet, tm: &TrafficMatrix, t: &Topology) -> LpModel {
    build_lp(paths, tm, t, Objective::LoadBalance)
}

/// Piecewise average delay over the given paths: `min Σ r_l / c_l` with six
/// piece rows per link.
pub fn build_ad_lp(paths: &PathSet, tm: &TrafficMatrix, t: &Topology) -> LpModel {
    build_lp(paths, tm, t, Objective::AverageDelay)
}

pub fn build_lp(paths: &PathSet, tm: &TrafficMatrix, t: &Topology, objective: Objective) -> LpModel {
    let mut m = empty_model(t, objective);
    let on_link = add_path_flows(&mut m, paths, tm, t);
    add_link_rows(&mut m, t, on_link);
    m
}

/// Node-arc formulation aggregated per source node. Its optimum equals the
/// path formulation over all simple paths: any arc flow decomposes into
/// simple paths plus cycles, and dropping cycles never raises a link load.
pub fn build_arc_lp(t: &Topology, tm: &TrafficMatrix, objective: Objective) -> LpModel {
    let mut m = empty_model(t, objective);
    let n = t.node_count();
    let mut on_link = vec![Vec::new(); t.link_count()];
    for s in 0..n {
        let reach = t.reachable_from(s);
        let mut demand = vec![0.0; n];
        for d in 0..n {
            let h = tm.get(s, d);
            if d == s || h <= 0.0 {
                continue;
            }
            if reach[d] {
                demand[d] = h;
            } else {
                m.unroutable.push((s, d, h));
            }
        }
        if demand.iter().all(|&h| h == 0.0) {
            continue;
        }
        let mut inflow = vec![Vec::new(); n];
        let mut outflow = vec![Vec::new(); n];
        for link in t.links() {
            if link.dst == s || !reach[link.src] {
                continue;
            }
            let f = m.add_var(VarRole::ArcFlow { source: s, link: link.id }, 0.0);
            on_link[link.id].push((f, 1.0));
            inflow[link.dst].push((f, 1.0));
            outflow[link.src].push((f, -1.0));
        }
        for v in (0..n).filter(|&v| v != s && reach[v]) {
            let mut terms = std::mem::take(&mut inflow[v]);
            terms.append(&mut outflow[v]);
            m.add_row(format!("flow_{s}_{v}"), terms, Cmp::Eq, demand[v] / m.scale);
        }
    }
    add_link_rows(&mut m, t, on_link);
    m
}
