//! Projection onto and reflection through the lifted dual feasible set
//! `M = {μ : μ = Pμ, μ_ineq ≥ 0}`.
//!
//! Both act independently on each pair of partner slots. For an inequality
//! row the projection is `max(½(a + b), 0)` on both entries; the reflection
//! `2Π − I` then swaps the pair when `a + b > 0` and negates it otherwise. For
//! an equality row there is no clamp and the reflection is the plain swap.

use crate::error::{Error, Result};
use crate::problem::{DirectedEdgeLayout, RowKind};

/// Values of two partner slots `(i|j, r)` and `(j|i, r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotPair {
    pub a: f64,
    pub b: f64,
    pub kind: RowKind,
}

impl SlotPair {
    pub fn new(a: f64, b: f64, kind: RowKind) -> Self {
        SlotPair { a, b, kind }
    }
}

pub fn project_pair(p: SlotPair) -> (f64, f64) {
    let mean = 0.5 * (p.a + p.b);
    let v = match p.kind {
        RowKind::Equality => mean,
        RowKind::Inequality => mean.max(0.0),
    };
    (v, v)
}

pub fn reflect_pair(p: SlotPair) -> (f64, f64) {
    match p.kind {
        RowKind::Equality => (p.b, p.a),
        // a + b == 0 takes the negate branch; both branches agree there
        RowKind::Inequality if p.a + p.b > 0.0 => (p.b, p.a),
        RowKind::Inequality => (-p.a, -p.b),
    }
}

fn check_len(layout: &DirectedEdgeLayout, len: usize) -> Result<()> {
    if len != layout.num_slots() {
        return Err(Error::DimensionMismatch {
            context: "slot vector".into(),
            expected: layout.num_slots(),
            found: len,
        });
    }
    Ok(())
}

fn pairwise(y: &[f64], layout: &DirectedEdgeLayout, op: fn(SlotPair) -> (f64, f64)) -> Result<Vec<f64>> {
    check_len(layout, y.len())?;
    let m = layout.num_rows();
    let mut out = vec![0.0; y.len()];
    for s in 0..m {
        let p = layout.partner(s);
        let (u, v) = op(SlotPair::new(y[s], y[p], layout.kind(s)));
        out[s] = u;
        out[p] = v;
    }
    Ok(out)
}

/// `Π_M(y)`.
pub fn project_all(y: &[f64], layout: &DirectedEdgeLayout) -> Result<Vec<f64>> {
    pairwise(y, layout, project_pair)
}

/// `R_M(y)`, the data-exchange step.
pub fn reflect_all(y: &[f64], layout: &DirectedEdgeLayout) -> Result<Vec<f64>> {
    pairwise(y, layout, reflect_pair)
}
