//! TOML problem description files.
//!
//! ```toml
//! [[nodes]]
//! id = 0
//! dim = 1
//! objective = { kind = "quadratic", q_matrix = { rows = 1, cols = 1, data = [1.0] }, q = [-0.5] }
//!
//! [[nodes]]
//! id = 1
//! dim = 1
//! objective = { kind = "linear", g = [1.0] }
//!
//! [[edges]]
//! i = 0
//! j = 1
//! a_ij = { rows = 1, cols = 1, data = [1.0] }
//! a_ji = { rows = 1, cols = 1, data = [-1.0] }
//! b = [0.0]
//! kinds = ["ineq"]
//!
//! [[node_constraints]]
//! i = 0
//! a = { rows = 1, cols = 1, data = [-1.0] }
//! b = [0.0]
//! kinds = ["eq"]
//! ```
//!
//! Matrices are row-major with explicit `rows`/`cols`. Node ids must cover
//! `0..n` exactly once; nodes may appear in any order. All three sections are
//! optional (a problem still needs at least one node). Unknown keys are
//! rejected. A node may carry `dummy_of = k` to mark it as the dummy of node
//! `k`; this only appears in files written from lowered graphs.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EdgeConstraintBlock, LocalObjective, Node, NodeConstraintBlock, NodeRole, ProblemGraph, RowKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub node_constraints: Vec<NodeConstraintEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub dim: usize,
    pub objective: ObjectiveEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dummy_of: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveEntry {
    Quadratic { q_matrix: MatrixEntry, q: Vec<f64> },
    Linear { g: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    pub a_ij: MatrixEntry,
    pub a_ji: MatrixEntry,
    pub b: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConstraintEntry {
    pub i: usize,
    pub a: MatrixEntry,
    pub b: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

impl MatrixEntry {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            data.extend(m.row(r).iter());
        }
        MatrixEntry {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn to_matrix(&self, context: &str) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::DimensionMismatch {
                context: format!("{context}: matrix data length ({} x {})", self.rows, self.cols),
                expected: self.rows * self.cols,
                found: self.data.len(),
            });
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl ProblemFile {
    pub fn from_graph(graph: &ProblemGraph) -> Self {
        let nodes = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| NodeEntry {
                id,
                dim: n.dim,
                objective: match &n.objective {
                    LocalObjective::Quadratic { q_matrix, q } => ObjectiveEntry::Quadratic {
                        q_matrix: MatrixEntry::from_matrix(q_matrix),
                        q: q.iter().copied().collect(),
                    },
                    LocalObjective::Linear { g } => ObjectiveEntry::Linear {
                        g: g.iter().copied().collect(),
                    },
                },
                dummy_of: match n.role {
                    NodeRole::Agent => None,
                    NodeRole::Dummy { owner } => Some(owner),
                },
            })
            .collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| EdgeEntry {
                i: e.i,
                j: e.j,
                a_ij: MatrixEntry::from_matrix(&e.a_ij),
                a_ji: MatrixEntry::from_matrix(&e.a_ji),
                b: e.b.iter().copied().collect(),
                kinds: e.kinds.clone(),
            })
            .collect();
        let node_constraints = graph
            .node_constraints()
            .iter()
            .map(|c| NodeConstraintEntry {
                i: c.i,
                a: MatrixEntry::from_matrix(&c.a),
                b: c.b.iter().copied().collect(),
                kinds: c.kinds.clone(),
            })
            .collect();
        ProblemFile {
            nodes,
            edges,
            node_constraints,
        }
    }

    /// Converts the parsed description into a validated [`ProblemGraph`].
    pub fn build(&self) -> Result<ProblemGraph> {
        let n = self.nodes.len();
        let mut slots: Vec<Option<Node>> = vec![None; n];
        for entry in &self.nodes {
            if entry.id >= n || slots[entry.id].is_some() {
                return Err(Error::InvalidNodeIds(format!("bad or repeated id {}", entry.id)));
            }
            let ctx = format!("node {}", entry.id);
            let objective = match &entry.objective {
                ObjectiveEntry::Quadratic { q_matrix, q } => LocalObjective::Quadratic {
                    q_matrix: q_matrix.to_matrix(&ctx)?,
                    q: DVector::from_column_slice(q),
                },
                ObjectiveEntry::Linear { g } => LocalObjective::Linear {
                    g: DVector::from_column_slice(g),
                },
            };
            slots[entry.id] = Some(Node {
                dim: entry.dim,
                objective,
                role: match entry.dummy_of {
                    None => NodeRole::Agent,
                    Some(owner) => NodeRole::Dummy { owner },
                },
            });
        }
        let nodes: Vec<Node> = slots.into_iter().map(|n| n.expect("ids checked")).collect();

        let edges = self
            .edges
            .iter()
            .map(|e| {
                let ctx = format!("edge ({}, {})", e.i, e.j);
                Ok(EdgeConstraintBlock {
                    i: e.i,
                    j: e.j,
                    a_ij: e.a_ij.to_matrix(&ctx)?,
                    a_ji: e.a_ji.to_matrix(&ctx)?,
                    b: DVector::from_column_slice(&e.b),
                    kinds: e.kinds.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let node_constraints = self
            .node_constraints
            .iter()
            .map(|c| {
                let ctx = format!("node constraint on node {}", c.i);
                Ok(NodeConstraintBlock {
                    i: c.i,
                    a: c.a.to_matrix(&ctx)?,
                    b: DVector::from_column_slice(&c.b),
                    kinds: c.kinds.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        ProblemGraph::new(nodes, edges, node_constraints)
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemGraph> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.build()
}

pub fn serialize_problem(graph: &ProblemGraph) -> String {
    toml::to_string(&ProblemFile::from_graph(graph)).expect("problem files always serialize")
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<ProblemGraph> {
    parse_problem(&fs::read_to_string(path)?)
}

pub fn write_problem(graph: &ProblemGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serialize_problem(graph))?;
    Ok(())
}

/// Primal iterate per node and, optionally, one multiplier per constraint row
/// in layout row order of the lowered graph and the auxiliary slot vector `z`
/// (usable as a warm start).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

impl SolutionFile {
    pub fn new(x: &[DVector<f64>], lambda: Option<&[f64]>) -> Self {
        SolutionFile {
            x: x.iter().map(|v| v.iter().copied().collect()).collect(),
            lambda: lambda.map(<[f64]>::to_vec),
            z: None,
        }
    }

    pub fn primal(&self) -> Vec<DVector<f64>> {
        self.x.iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, toml::to_string(self).expect("solution files always serialize"))?;
        Ok(())
    }
}
