use nalgebra::DVector;

use super::stacked::StackedProblem;
use crate::error::{Error, Result};
use crate::problem::{ProblemGraph, RowKind};

/// Violation of each KKT condition of `minimise f(x) s.t. Ax (<=|=) b` with
/// Lagrangian `f(x) + λᵀ(Ax − b)`. All entries are non-negative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktReport {
    /// `max |Ax − b|` over equality rows.
    pub primal_eq_residual: f64,
    /// `max (Ax − b)⁺` over inequality rows.
    pub primal_ineq_violation: f64,
    /// `max (−λ)⁺` over inequality rows.
    pub dual_negativity: f64,
    /// `max |λ_r (Ax − b)_r|` over inequality rows.
    pub complementarity: f64,
    /// `‖∇f(x) + Aᵀλ‖`.
    pub stationarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        [
            self.primal_eq_residual,
            self.primal_ineq_violation,
            self.dual_negativity,
            self.complementarity,
            self.stationarity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Checks `(x, λ)` against the KKT conditions. `x` holds one vector per node
/// of `problem`; `λ` one multiplier per row in layout row order of the
/// lowered graph (see [`crate::engine::Engine::recover_duals`]).
pub fn kkt_check(problem: &ProblemGraph, x: &[DVector<f64>], lambda: &[f64]) -> Result<KktReport> {
    let sp = StackedProblem::new(problem);
    if lambda.len() != sp.num_rows() {
        return Err(Error::DimensionMismatch {
            context: "multipliers".into(),
            expected: sp.num_rows(),
            found: lambda.len(),
        });
    }
    let xs = sp.stack(x)?;
    let residual = &sp.a * &xs - &sp.b;
    let lam = DVector::from_column_slice(lambda);

    let mut report = KktReport::default();
    for r in 0..sp.num_rows() {
        match sp.kinds[r] {
            RowKind::Equality => {
                report.primal_eq_residual = report.primal_eq_residual.max(residual[r].abs());
            }
            RowKind::Inequality => {
                report.primal_ineq_violation = report.primal_ineq_violation.max(residual[r].max(0.0));
                report.dual_negativity = report.dual_negativity.max((-lam[r]).max(0.0));
                report.complementarity = report.complementarity.max((lam[r] * residual[r]).abs());
            }
        }
    }
    let grad = &sp.hessian * &xs + &sp.linear + sp.a.transpose() * &lam;
    report.stationarity = grad.norm();
    Ok(report)
}

/// [`kkt_check`] with multipliers recovered from lifted duals `μ` (length
/// `2m`) as `λ_r = ½(μ_{i|j} + μ_{j|i})`.
pub fn kkt_check_from_mu(problem: &ProblemGraph, x: &[DVector<f64>], mu: &[f64]) -> Result<KktReport> {
    let m = mu.len() / 2;
    if !mu.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            context: "lifted duals".into(),
            expected: 2 * m + 2,
            found: mu.len(),
        });
    }
    let lambda: Vec<f64> = (0..m).map(|r| 0.5 * (mu[r] + mu[r + m])).collect();
    kkt_check(problem, x, &lambda)
}
