//! Rate adaptation: LP models for load balancing (min-MLU) and piecewise
//! average delay, their solution, and conversion into per-path flows.

mod allocation;
mod build;
mod delay;
mod solve;

use std::fmt::Write as _;

pub use allocation::{decompose_arc_flows, to_allocation, DemandFlows, FlowAllocation, DEMAND_TOLERANCE};
pub use build::{build_ad_lp, build_arc_lp, build_lb_lp, build_lp};
pub use delay::{eval_piecewise_delay, queuing_delay, DELAY_BREAKPOINTS, DELAY_PIECES};
pub use solve::{solve_lp, DEFAULT_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::topology::{LinkId, NodeId};

/// Rate-adaptation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// Minimize the maximum link utilization `r`.
    #[serde(rename = "LB")]
    LoadBalance,
    /// Minimize `Σ_l r_l / c_l` with `r_l` bounded below by the delay pieces.
    #[serde(rename = "AD")]
    AverageDelay,
}

impl Objective {
    pub fn tag(self) -> &'static str {
        match self {
            Objective::LoadBalance => "LB",
            Objective::AverageDelay => "AD",
        }
    }
}

/// What an LP variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Flow on path `path` of demand `src → dst`.
    PathFlow { src: NodeId, dst: NodeId, path: usize },
    /// Flow of source-`source` traffic on `link` (arc formulation).
    ArcFlow { source: NodeId, link: LinkId },
    /// Total load `y_l`.
    Load { link: LinkId },
    /// Delay cost `r_l`.
    Cost { link: LinkId },
    /// Scalar utilization bound `r`.
    Utilization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpVar {
    pub role: VarRole,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// A minimization LP plus the bookkeeping to read flows back out.
///
/// Volume-valued variables are stored divided by `scale` (the largest link
/// capacity) to keep coefficients near 1; [`LpSolution`] values are
/// reported back in volume units.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    pub objective: Objective,
    pub vars: Vec<LpVar>,
    pub rows: Vec<LpRow>,
    pub scale: f64,
    /// Demands with positive volume but no candidate path; left out of the LP.
    pub unroutable: Vec<(NodeId, NodeId, f64)>,
}

impl LpModel {
    fn add_var(&mut self, role: VarRole, cost: f64) -> usize {
        self.vars.push(LpVar { role, cost, lower: 0.0, upper: f64::INFINITY });
        self.vars.len() - 1
    }

    fn add_row(&mut self, name: String, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(LpRow { name, terms, cmp, rhs });
    }

    pub fn rows_named(&self, prefix: &str) -> usize {
        self.rows.iter().filter(|r| r.name.starts_with(prefix)).count()
    }

    fn var_name(&self, i: usize) -> String {
        match self.vars[i].role {
            VarRole::PathFlow { src, dst, path } => format!("x_{src}_{dst}_{path}"),
            VarRole::ArcFlow { source, link } => format!("f_{source}_{link}"),
            VarRole::Load { link } => format!("y_{link}"),
            VarRole::Cost { link } => format!("r_{link}"),
            VarRole::Utilization => "r".to_string(),
        }
    }

    /// CPLEX LP text format, for offline inspection with other solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ tesim rate-adaptation model\nMinimize\n obj:");
        let mut any = false;
        for (i, v) in self.vars.iter().enumerate() {
            if v.cost != 0.0 {
                write!(out, " {} {} {}", sign(v.cost), v.cost.abs(), self.var_name(i)).unwrap();
                any = true;
            }
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            write!(out, " {}:", row.name).unwrap();
            for &(i, c) in &row.terms {
                write!(out, " {} {} {}", sign(c), c.abs(), self.var_name(i)).unwrap();
            }
            let op = match row.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            writeln!(out, " {op} {}", row.rhs).unwrap();
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            if v.upper.is_finite() {
                writeln!(out, " {} <= {} <= {}", v.lower, self.var_name(i), v.upper).unwrap();
            }
        }
        out.push_str("End\n");
        out
    }
}

fn sign(c: f64) -> char {
    if c < 0.0 {
        '-'
    } else {
        '+'
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Variable values in volume units (`r` stays dimensionless).
    pub values: Vec<f64>,
    /// Largest relative row violation observed.
    pub residual: f64,
}

impl LpSolution {
    pub fn failed(status: LpStatus) -> Self {
        LpSolution { status, objective: f64::NAN, values: Vec::new(), residual: f64::NAN }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
