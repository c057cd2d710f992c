use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus};

use super::{Cmp, LpModel, LpSolution, LpStatus, VarRole};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Solves `m` with a sparse primal/dual simplex. The returned solution is
/// `Optimal` only if every row holds within `tolerance` (relative to the
/// row's magnitude); otherwise the status is `NumericFailure`.
pub fn solve_lp(m: &LpModel, tolerance: f64) -> LpSolution {
    if m.vars.is_empty() {
        return LpSolution { status: LpStatus::Optimal, objective: 0.0, values: Vec::new(), residual: 0.0 };
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = m
        .vars
        .iter()
        .map(|v| problem.add_var(v.cost, (v.lower, v.upper)))
        .collect();
    for row in &m.rows {
        let terms: Vec<_> = row.terms.iter().map(|&(i, c)| (vars[i], c)).collect();
        let op = match row.cmp {
            Cmp::Le => ComparisonOp::Le,
            Cmp::Eq => ComparisonOp::Eq,
            Cmp::Ge => ComparisonOp::Ge,
        };
        problem.add_constraint(terms.as_slice(), op, row.rhs);
    }
    let solution = match problem.solve().map(|o| o.into_solution()) {
        Ok(Ok(s)) if s.status() == SolutionStatus::Optimal => s,
        Ok(_) => return LpSolution::failed(LpStatus::NumericFailure),
        Err(microlp::Error::Infeasible) => return LpSolution::failed(LpStatus::Infeasible),
        Err(microlp::Error::Unbounded) => return LpSolution::failed(LpStatus::Unbounded),
        Err(_) => return LpSolution::failed(LpStatus::NumericFailure),
    };
    let scaled: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
    let residual = max_residual(m, &scaled);
    let status = if residual <= tolerance && solution.objective().is_finite() {
        LpStatus::Optimal
    } else {
        LpStatus::NumericFailure
    };
    let values = scaled
        .iter()
        .zip(&m.vars)
        .map(|(&x, v)| match v.role {
            VarRole::Utilization => x,
            _ => x * m.scale,
        })
        .collect();
    LpSolution { status, objective: solution.objective(), values, residual }
}

/// Largest row violation, relative to `max(1, |rhs|, max |a_i x_i|)`.
fn max_residual(m: &LpModel, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, v) in m.vars.iter().enumerate() {
        worst = worst.max(v.lower - x[i]).max(x[i] - v.upper);
    }
    for row in &m.rows {
        let mut lhs = 0.0;
        let mut mag = row.rhs.abs().max(1.0);
        for &(i, c) in &row.terms {
            lhs += c * x[i];
            mag = mag.max((c * x[i]).abs());
        }
        let violation = match row.cmp {
            Cmp::Le => lhs - row.rhs,
            Cmp::Ge => row.rhs - lhs,
            Cmp::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(violation / mag);
    }
    worst
}
