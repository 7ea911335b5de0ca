//! Closed-form node updates.
//!
//! For a quadratic or linear `f_i`, the primal update
//!
//! ```text
//!   x_i = argmin f_i(x) + Σ_s ( z_s a_sᵀx + (c/2)(a_sᵀx − b_s/2)² )
//! ```
//!
//! (sum over the slots `s` owned by node `i`, `a_s` the matching constraint
//! row) reduces to the normal equations `H x = r_static − Σ_s a_s z_s` with
//! `H = Q + c Σ_s a_s a_sᵀ` and `r_static = −q + (c/2) Σ_s a_s b_s`. `H` does
//! not depend on the iterate, so it is factorized once.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::problem::{DirectedEdgeLayout, ProblemGraph};

/// Relative pivot floor below which a Cholesky factor is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

/// One dual slot's contribution to its owner's update.
#[derive(Clone, Debug)]
pub struct SlotTerm {
    pub slot: usize,
    /// Constraint row acting on the owner's variable.
    pub coeffs: DVector<f64>,
    /// `b_r / 2`.
    pub half_b: f64,
}

impl SlotTerm {
    pub fn apply(&self, x: &DVector<f64>) -> f64 {
        if self.coeffs.is_empty() {
            0.0
        } else {
            self.coeffs.dot(x)
        }
    }
}

/// Factorized normal equations of one node.
#[derive(Clone, Debug)]
pub struct NodeSystem {
    node: usize,
    hessian: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    rhs_static: DVector<f64>,
    terms: Vec<SlotTerm>,
}

impl NodeSystem {
    /// Assembles and factorizes the system of `node` in a lowered graph.
    pub fn new(graph: &ProblemGraph, layout: &DirectedEdgeLayout, node: usize, c: f64) -> Result<Self> {
        let objective = &graph.nodes()[node].objective;
        let dim = graph.nodes()[node].dim;

        let terms: Vec<SlotTerm> = layout
            .owned_by(node)
            .iter()
            .map(|&s| {
                let info = layout.slot(s);
                let edge = &graph.edges()[info.edge];
                SlotTerm {
                    slot: s,
                    coeffs: edge.matrix_for(node).row(info.row).transpose(),
                    half_b: 0.5 * edge.b[info.row],
                }
            })
            .collect();

        let mut hessian = objective.hessian();
        let mut rhs_static = -objective.linear_term();
        for t in &terms {
            if dim > 0 {
                hessian += c * &t.coeffs * t.coeffs.transpose();
                rhs_static += c * t.half_b * &t.coeffs;
            }
        }

        let factor = if dim == 0 {
            None
        } else {
            let chol = Cholesky::new(hessian.clone()).ok_or(Error::SingularSystem { node, c })?;
            let scale = hessian.diagonal().amax();
            let min_pivot = chol
                .l_dirty()
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v * v));
            if min_pivot.is_nan() || min_pivot <= PIVOT_TOL * scale {
                return Err(Error::SingularSystem { node, c });
            }
            Some(chol)
        };

        Ok(NodeSystem {
            node,
            hessian,
            factor,
            rhs_static,
            terms,
        })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn dim(&self) -> usize {
        self.rhs_static.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn terms(&self) -> &[SlotTerm] {
        &self.terms
    }

    /// Right-hand side `r_static − Σ_s a_s z_s` for the full slot vector `z`.
    pub fn rhs(&self, z: &[f64]) -> DVector<f64> {
        let mut rhs = self.rhs_static.clone();
        if self.dim() > 0 {
            for t in &self.terms {
                rhs.axpy(-z[t.slot], &t.coeffs, 1.0);
            }
        }
        rhs
    }

    /// Primal update given the full slot vector `z`.
    pub fn x_update(&self, z: &[f64]) -> DVector<f64> {
        match &self.factor {
            None => DVector::zeros(0),
            Some(chol) => chol.solve(&self.rhs(z)),
        }
    }

    /// Writes `y_s` for every owned slot into `y`.
    pub fn y_update_into(&self, z: &[f64], x: &DVector<f64>, c: f64, y: &mut [f64]) {
        for t in &self.terms {
            y[t.slot] = y_update_slot(z[t.slot], t.apply(x), t.half_b, c);
        }
    }
}

/// `z + 2c (a x − b/2)` for one scalar slot.
#[inline]
pub fn y_update_slot(z: f64, ax: f64, half_b: f64, c: f64) -> f64 {
    z + 2.0 * c * (ax - half_b)
}

/// `y_{i|j} = z_{i|j} + 2c (A_ij x_i − b_ij / 2)`.
pub fn y_update(z: &DVector<f64>, x: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> DVector<f64> {
    let ax = if a.ncols() == 0 {
        DVector::zeros(a.nrows())
    } else {
        a * x
    };
    z + 2.0 * c * (ax - 0.5 * b)
}
