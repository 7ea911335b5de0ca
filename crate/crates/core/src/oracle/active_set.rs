use nalgebra::{DMatrix, DVector};

use super::stacked::{for_each_subset, rank, solve_consistent, StackedProblem};
use crate::error::{Error, Result};
use crate::problem::{ProblemGraph, RowKind};

/// Enumeration is exponential in the number of inequality rows.
pub const MAX_INEQUALITY_ROWS: usize = 25;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    /// One vector per node of the input problem.
    pub x: Vec<DVector<f64>>,
    /// Multiplier per constraint row, in layout row order of the lowered
    /// graph (edge rows and lowered node-constraint rows together).
    pub lambda: Vec<f64>,
    pub objective: f64,
}

/// Exact QP solve by enumerating active sets.
///
/// Candidate active sets are visited by increasing size. For each one the
/// equality-constrained KKT system is solved; the first candidate that is
/// primal feasible with non-negative multipliers on its active inequality
/// rows is a KKT point and therefore optimal for a convex problem. Active sets
/// whose KKT system does not determine `x` uniquely are skipped.
pub fn solve_active_set(problem: &ProblemGraph) -> Result<OracleSolution> {
    let sp = StackedProblem::new(problem);
    let eq = sp.rows_of(RowKind::Equality);
    let ineq = sp.rows_of(RowKind::Inequality);
    if ineq.len() > MAX_INEQUALITY_ROWS {
        return Err(Error::TooManyRows {
            what: "inequality rows",
            found: ineq.len(),
            limit: MAX_INEQUALITY_ROWS,
        });
    }
    let n = sp.num_vars();

    let mut found: Option<OracleSolution> = None;
    let mut saw_feasible = false;
    for size in 0..=ineq.len().min(n) {
        let done = for_each_subset(ineq.len(), size, |subset| {
            let active: Vec<usize> = eq.iter().copied().chain(subset.iter().map(|&k| ineq[k])).collect();
            let Some((x, mult)) = solve_kkt(&sp, &active) else {
                return false;
            };
            if !primal_feasible(&sp, &x, &ineq) {
                return false;
            }
            saw_feasible = true;
            if mult.iter().skip(eq.len()).any(|&l| l < -FEAS_TOL) {
                return false;
            }
            let mut lambda = vec![0.0; sp.num_rows()];
            for (&row, &l) in active.iter().zip(mult.iter()) {
                lambda[row] = l;
            }
            found = Some(OracleSolution {
                objective: sp.objective(&x),
                x: sp.unstack(&x),
                lambda,
            });
            true
        });
        if done {
            break;
        }
    }

    match found {
        Some(sol) => Ok(sol),
        None if saw_feasible => Err(Error::Unbounded),
        None => Err(Error::Infeasible),
    }
}

/// Solves `[H Aᵀ; A 0][x; λ] = [−q; b]` over the given active rows.
fn solve_kkt(sp: &StackedProblem, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = sp.num_vars();
    let k = active.len();
    let a_act = DMatrix::from_fn(k, n, |r, c| sp.a[(active[r], c)]);

    // x is unique iff [H; A_act] has full column rank
    let mut stacked = DMatrix::zeros(n + k, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&sp.hessian);
    stacked.view_mut((n, 0), (k, n)).copy_from(&a_act);
    if rank(&stacked) < n {
        return None;
    }

    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&sp.hessian);
    kkt.view_mut((0, n), (n, k)).copy_from(&a_act.transpose());
    kkt.view_mut((n, 0), (k, n)).copy_from(&a_act);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&sp.linear));
    for (r, &row) in active.iter().enumerate() {
        rhs[n + r] = sp.b[row];
    }
    let sol = solve_consistent(kkt, &rhs)?;
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

fn primal_feasible(sp: &StackedProblem, x: &DVector<f64>, ineq: &[usize]) -> bool {
    let ax = &sp.a * x;
    ineq.iter()
        .all(|&r| ax[r] <= sp.b[r] + FEAS_TOL * (1.0 + sp.b[r].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{EdgeConstraintBlock, LocalObjective, Node, NodeConstraintBlock};

    fn scalar(a: f64) -> Node {
        Node::new(LocalObjective::squared_distance(&DVector::from_element(1, a)))
    }

    fn row(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn unconstrained_node_returns_its_target() {
        let g = ProblemGraph::new(vec![scalar(0.7)], vec![], vec![]).unwrap();
        let sol = solve_active_set(&g).unwrap();
        assert!((sol.x[0][0] - 0.7).abs() < 1e-14);
        assert!(sol.lambda.is_empty());
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        // x <= 0 and -x <= -1
        let g = ProblemGraph::new(
            vec![scalar(0.3)],
            vec![],
            vec![NodeConstraintBlock {
                i: 0,
                a: DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
                b: DVector::from_column_slice(&[0.0, -1.0]),
                kinds: vec![RowKind::Inequality; 2],
            }],
        )
        .unwrap();
        assert_eq!(solve_active_set(&g).unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn active_inequality_gets_positive_multiplier() {
        // min ½(x0-2)² + ½(x1-0)²  s.t. x0 - x1 <= 0  →  x = (1, 1), λ = 1
        let g = ProblemGraph::new(
            vec![scalar(2.0), scalar(0.0)],
            vec![EdgeConstraintBlock {
                i: 0,
                j: 1,
                a_ij: row(1.0),
                a_ji: row(-1.0),
                b: DVector::zeros(1),
                kinds: vec![RowKind::Inequality],
            }],
            vec![],
        )
        .unwrap();
        let sol = solve_active_set(&g).unwrap();
        assert!((sol.x[0][0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1][0] - 1.0).abs() < 1e-12);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-12);
        // constant ½a² terms are not part of the objective
        assert!((sol.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_equality_rows_on_a_cycle() {
        // consensus on a triangle: the three equality rows have rank 2
        let a = [0.5, -1.0, 2.0];
        let eq = |i, j| EdgeConstraintBlock {
            i,
            j,
            a_ij: row(1.0),
            a_ji: row(-1.0),
            b: DVector::zeros(1),
            kinds: vec![RowKind::Equality],
        };
        let g = ProblemGraph::new(
            a.iter().map(|&v| scalar(v)).collect(),
            vec![eq(0, 1), eq(1, 2), eq(0, 2)],
            vec![],
        )
        .unwrap();
        let sol = solve_active_set(&g).unwrap();
        let mean = a.iter().sum::<f64>() / 3.0;
        for xi in &sol.x {
            assert!((xi[0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_rows_is_refused() {
        let k = MAX_INEQUALITY_ROWS + 1;
        let g = ProblemGraph::new(
            vec![scalar(0.0)],
            vec![],
            vec![NodeConstraintBlock {
                i: 0,
                a: DMatrix::from_element(k, 1, 1.0),
                b: DVector::from_element(k, 1.0),
                kinds: vec![RowKind::Inequality; k],
            }],
        )
        .unwrap();
        assert!(matches!(solve_active_set(&g), Err(Error::TooManyRows { .. })));
    }
}
