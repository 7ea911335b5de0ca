#![allow(dead_code)]

use ieq_pdmm::{EdgeConstraintBlock, LocalObjective, Node, NodeConstraintBlock, ProblemGraph, RowKind};
use nalgebra::{DMatrix, DVector};

pub fn scalar(a: f64) -> Node {
    Node::new(LocalObjective::squared_distance(&DVector::from_element(1, a)))
}

pub fn linear(g: f64) -> Node {
    Node::new(LocalObjective::Linear {
        g: DVector::from_element(1, g),
    })
}

pub fn edge(i: usize, j: usize, a_ij: f64, a_ji: f64, b: f64, kind: RowKind) -> EdgeConstraintBlock {
    EdgeConstraintBlock {
        i,
        j,
        a_ij: DMatrix::from_element(1, 1, a_ij),
        a_ji: DMatrix::from_element(1, 1, a_ji),
        b: DVector::from_element(1, b),
        kinds: vec![kind],
    }
}

pub fn bounds(i: usize, lo: f64, hi: f64) -> NodeConstraintBlock {
    NodeConstraintBlock {
        i,
        a: DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]),
        b: DVector::from_column_slice(&[-lo, hi]),
        kinds: vec![RowKind::Inequality; 2],
    }
}

/// `min ½(x_0 − a_0)² + ½(x_1 − a_1)²  s.t.  x_0 = x_1`.
pub fn two_node_consensus(a0: f64, a1: f64) -> ProblemGraph {
    ProblemGraph::new(
        vec![scalar(a0), scalar(a1)],
        vec![edge(0, 1, 1.0, -1.0, 0.0, RowKind::Equality)],
        vec![],
    )
    .unwrap()
}

pub fn consensus_triangle(a: [f64; 3]) -> ProblemGraph {
    ProblemGraph::new(
        a.iter().map(|&v| scalar(v)).collect(),
        vec![
            edge(0, 1, 1.0, -1.0, 0.0, RowKind::Equality),
            edge(1, 2, 1.0, -1.0, 0.0, RowKind::Equality),
            edge(0, 2, 1.0, -1.0, 0.0, RowKind::Equality),
        ],
        vec![],
    )
    .unwrap()
}

pub fn distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
