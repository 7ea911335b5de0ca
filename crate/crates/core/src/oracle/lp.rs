use nalgebra::{DMatrix, DVector};

use super::stacked::{for_each_subset, rank, solve_consistent, StackedProblem};
use crate::error::{Error, Result};
use crate::problem::{LocalObjective, ProblemGraph, RowKind};

pub const MAX_LP_DIM: usize = 4;
pub const MAX_LP_ROWS: usize = 25;

/// Artificial box used to detect unbounded directions.
const BOX: f64 = 1e6;
const FEAS_TOL: f64 = 1e-9;

/// A small dense LP `minimise cᵀx  s.t.  A x (<=|=) b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallLp {
    pub cost: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kinds: Vec<RowKind>,
}

impl SmallLp {
    /// Vertex enumeration over all row subsets that pin down `x`.
    ///
    /// The feasible set is intersected with the box `|x_k| ≤ 10⁶`; an optimum
    /// that only exists on that box is reported as unbounded.
    pub fn solve(&self) -> Result<DVector<f64>> {
        let d = self.cost.len();
        if d > MAX_LP_DIM {
            return Err(Error::TooManyRows {
                what: "LP dimension",
                found: d,
                limit: MAX_LP_DIM,
            });
        }
        if self.b.len() > MAX_LP_ROWS {
            return Err(Error::TooManyRows {
                what: "LP rows",
                found: self.b.len(),
                limit: MAX_LP_ROWS,
            });
        }
        let m = self.b.len();
        // inequality rows, then ±x_k <= BOX
        let mut ineq: Vec<(DVector<f64>, f64, bool)> = (0..m)
            .filter(|&r| self.kinds[r] == RowKind::Inequality)
            .map(|r| (self.a.row(r).transpose(), self.b[r], false))
            .collect();
        for k in 0..d {
            for sign in [1.0, -1.0] {
                let mut e = DVector::zeros(d);
                e[k] = sign;
                ineq.push((e, BOX, true));
            }
        }
        let eq: Vec<usize> = (0..m).filter(|&r| self.kinds[r] == RowKind::Equality).collect();
        let a_eq = DMatrix::from_fn(eq.len(), d, |r, c| self.a[(eq[r], c)]);
        let eq_rank = rank(&a_eq);
        let need = d - eq_rank;

        // (objective, box rows touched, x)
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for_each_subset(ineq.len(), need, |subset| {
            let k = eq.len() + subset.len();
            let mut sys = DMatrix::zeros(k, d);
            let mut rhs = DVector::zeros(k);
            for (r, &row) in eq.iter().enumerate() {
                sys.set_row(r, &self.a.row(row));
                rhs[r] = self.b[row];
            }
            for (r, &s) in subset.iter().enumerate() {
                sys.set_row(eq.len() + r, &ineq[s].0.transpose());
                rhs[eq.len() + r] = ineq[s].1;
            }
            if rank(&sys) < d {
                return false;
            }
            let Some(x) = solve_consistent(sys, &rhs) else {
                return false;
            };
            if !self.feasible(&x, &ineq) {
                return false;
            }
            let obj = self.cost.dot(&x);
            let boxed = subset.iter().filter(|&&s| ineq[s].2).count();
            let better = match &best {
                None => true,
                Some((b, bb, _)) => {
                    let tol = 1e-12 * (1.0 + b.abs());
                    obj < b - tol || (obj <= b + tol && boxed < *bb)
                }
            };
            if better {
                best = Some((obj, boxed, x));
            }
            false
        });

        match best {
            None => Err(Error::Infeasible),
            Some((_, boxed, _)) if boxed > 0 => Err(Error::Unbounded),
            Some((_, _, x)) => Ok(x),
        }
    }

    fn feasible(&self, x: &DVector<f64>, ineq: &[(DVector<f64>, f64, bool)]) -> bool {
        ineq.iter()
            .all(|(row, b, _)| row.dot(x) <= b + FEAS_TOL * (1.0 + b.abs()))
            && (0..self.b.len())
                .filter(|&r| self.kinds[r] == RowKind::Equality)
                .all(|r| (self.a.row(r).dot(&x.transpose()) - self.b[r]).abs() <= FEAS_TOL * (1.0 + self.b[r].abs()))
    }
}

/// LP ground truth for problems with linear objectives.
///
/// When every edge is a plain consensus block (`x_i = x_j` component-wise)
/// the problem collapses to one LP in the shared variable, with the objective
/// summed over nodes and the node-constraint rows merged (exact duplicates
/// removed). Otherwise the stacked LP over all variables is solved directly.
pub fn solve_lp_vertex(problem: &ProblemGraph) -> Result<Vec<DVector<f64>>> {
    if problem
        .nodes()
        .iter()
        .any(|n| !matches!(n.objective, LocalObjective::Linear { .. }))
    {
        return Err(Error::OraclePrecondition(
            "vertex enumeration needs linear objectives on every node".into(),
        ));
    }
    if let Some(lp) = consensus_lp(problem) {
        let x = lp.solve()?;
        return Ok(vec![x; problem.num_nodes()]);
    }
    let sp = StackedProblem::new(problem);
    let lp = SmallLp {
        cost: sp.linear.clone(),
        a: sp.a.clone(),
        b: sp.b.clone(),
        kinds: sp.kinds.clone(),
    };
    Ok(sp.unstack(&lp.solve()?))
}

/// Collapses a consensus-structured problem to a single small LP.
pub fn consensus_lp(problem: &ProblemGraph) -> Option<SmallLp> {
    let d = problem.nodes().first()?.dim;
    if problem.nodes().iter().any(|n| n.dim != d || n.is_dummy()) {
        return None;
    }
    let identity = DMatrix::<f64>::identity(d, d);
    let is_consensus = problem.edges().iter().all(|e| {
        e.rows() == d
            && e.kinds.iter().all(|&k| k == RowKind::Equality)
            && e.b.iter().all(|&v| v == 0.0)
            && ((e.a_ij == identity && e.a_ji == -&identity) || (e.a_ij == -&identity && e.a_ji == identity))
    });
    if !is_consensus {
        return None;
    }

    let mut cost = DVector::zeros(d);
    for n in problem.nodes() {
        cost += n.objective.linear_term();
    }
    let mut rows: Vec<(Vec<f64>, f64, RowKind)> = Vec::new();
    for block in problem.node_constraints() {
        for r in 0..block.rows() {
            let row = (
                block.a.row(r).iter().copied().collect::<Vec<_>>(),
                block.b[r],
                block.kinds[r],
            );
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
    let mut a = DMatrix::zeros(rows.len(), d);
    let mut b = DVector::zeros(rows.len());
    let mut kinds = Vec::with_capacity(rows.len());
    for (r, (coeffs, rhs, kind)) in rows.into_iter().enumerate() {
        for (c, v) in coeffs.into_iter().enumerate() {
            a[(r, c)] = v;
        }
        b[r] = rhs;
        kinds.push(kind);
    }
    Some(SmallLp { cost, a, b, kinds })
}
