use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ProblemGraph, RowKind};

/// The problem with all node variables stacked into one vector:
/// `minimise ½xᵀHx + qᵀx  s.t.  A x (<=|=) b`, rows in layout row order of
/// the lowered graph.
#[derive(Clone, Debug)]
pub struct StackedProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kinds: Vec<RowKind>,
    /// Offset of each input node's block in the stacked vector.
    pub offsets: Vec<usize>,
    pub dims: Vec<usize>,
}

impl StackedProblem {
    pub fn new(problem: &ProblemGraph) -> Self {
        let lowered = problem.lower_node_constraints();
        let layout = lowered.layout();
        let dims: Vec<usize> = lowered.nodes().iter().map(|n| n.dim).collect();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for d in &dims {
            offsets.push(total);
            total += d;
        }

        let mut hessian = DMatrix::zeros(total, total);
        let mut linear = DVector::zeros(total);
        for (i, node) in lowered.nodes().iter().enumerate() {
            let (o, d) = (offsets[i], dims[i]);
            hessian.view_mut((o, o), (d, d)).copy_from(&node.objective.hessian());
            linear.rows_mut(o, d).copy_from(node.objective.linear_term());
        }

        let m = layout.num_rows();
        let mut a = DMatrix::zeros(m, total);
        let mut b = DVector::zeros(m);
        let mut kinds = Vec::with_capacity(m);
        for s in 0..m {
            let info = layout.slot(s);
            let e = &lowered.edges()[info.edge];
            for (node, mat) in [(e.i, &e.a_ij), (e.j, &e.a_ji)] {
                let (o, d) = (offsets[node], dims[node]);
                for c in 0..d {
                    a[(s, o + c)] += mat[(info.row, c)];
                }
            }
            b[s] = e.b[info.row];
            kinds.push(info.kind);
        }

        let input = problem.num_nodes();
        StackedProblem {
            hessian,
            linear,
            a,
            b,
            kinds,
            offsets: offsets[..input].to_vec(),
            dims: dims[..input].to_vec(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn stack(&self, x: &[DVector<f64>]) -> Result<DVector<f64>> {
        if x.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                context: "primal solution nodes".into(),
                expected: self.dims.len(),
                found: x.len(),
            });
        }
        let mut out = DVector::zeros(self.num_vars());
        for (i, xi) in x.iter().enumerate() {
            if xi.len() != self.dims[i] {
                return Err(Error::DimensionMismatch {
                    context: format!("primal solution of node {i}"),
                    expected: self.dims[i],
                    found: xi.len(),
                });
            }
            out.rows_mut(self.offsets[i], self.dims[i]).copy_from(xi);
        }
        Ok(out)
    }

    pub fn unstack(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        self.offsets
            .iter()
            .zip(&self.dims)
            .map(|(&o, &d)| x.rows(o, d).into_owned())
            .collect()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn rows_of(&self, kind: RowKind) -> Vec<usize> {
        (0..self.num_rows()).filter(|&r| self.kinds[r] == kind).collect()
    }
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order until it
/// returns `true`. Returns whether it did.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if k > n {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return true;
        }
        // advance to the next combination
        let mut pos = k;
        loop {
            if pos == 0 {
                return false;
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                break;
            }
            if pos == 0 {
                return false;
            }
        }
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// Numerical rank by singular values relative to the largest.
pub(crate) fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// Least-squares solve that reports `None` unless the system is consistent.
pub(crate) fn solve_consistent(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = m.amax().max(1.0);
    let svd = m.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let sol = svd.solve(rhs, eps).ok()?;
    let residual = (&m * &sol - rhs).norm();
    (residual <= 1e-9 * scale * (1.0 + rhs.norm())).then_some(sol)
}
