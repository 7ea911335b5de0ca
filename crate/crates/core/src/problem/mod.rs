//! Problem graphs: separable objectives on nodes, linear constraint blocks on
//! edges and nodes.
//!
//! A problem is
//!
//! ```text
//!   minimise    sum_i f_i(x_i)
//!   subject to  A_ij x_i + A_ji x_j (<=|=) b_ij   for every edge {i, j}
//!               A_i x_i            (<=|=) b_i    for every node constraint
//! ```
//!
//! where each constraint row carries its own [`RowKind`]. Node constraints are
//! not handled by the iteration directly; [`ProblemGraph::lower_node_constraints`]
//! turns every node constraint block into an edge to a fresh dummy node that
//! owns no primal variable.

mod format;
mod layout;

pub use format::{parse_problem, read_problem, serialize_problem, write_problem, ProblemFile, SolutionFile};
pub use layout::{DirectedEdgeLayout, SlotInfo};

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    #[serde(rename = "eq")]
    Equality,
    #[serde(rename = "ineq")]
    Inequality,
}

/// Local cost `f_i` of one node.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalObjective {
    /// `½ xᵀ Q x + qᵀ x`
    Quadratic { q_matrix: DMatrix<f64>, q: DVector<f64> },
    /// `gᵀ x`
    Linear { g: DVector<f64> },
}

impl LocalObjective {
    /// `½ (x - a)ᵀ (x - a)`, the observation-fitting cost used throughout the
    /// bundled scenarios.
    pub fn squared_distance(a: &DVector<f64>) -> Self {
        LocalObjective::Quadratic {
            q_matrix: DMatrix::identity(a.len(), a.len()),
            q: -a,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalObjective::Quadratic { q, .. } => q.len(),
            LocalObjective::Linear { g } => g.len(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            LocalObjective::Quadratic { q_matrix, q } => 0.5 * x.dot(&(q_matrix * x)) + q.dot(x),
            LocalObjective::Linear { g } => g.dot(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LocalObjective::Quadratic { q_matrix, q } => q_matrix * x + q,
            LocalObjective::Linear { g } => g.clone(),
        }
    }

    /// Hessian (zero for linear objectives).
    pub fn hessian(&self) -> DMatrix<f64> {
        match self {
            LocalObjective::Quadratic { q_matrix, .. } => q_matrix.clone(),
            LocalObjective::Linear { g } => DMatrix::zeros(g.len(), g.len()),
        }
    }

    /// Linear term (`q` or `g`).
    pub fn linear_term(&self) -> &DVector<f64> {
        match self {
            LocalObjective::Quadratic { q, .. } => q,
            LocalObjective::Linear { g } => g,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, LocalObjective::Quadratic { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Agent,
    /// Fictive neighbour absorbing a node constraint of `owner`. Its slot
    /// updates are co-located with the owner, so no transmission is simulated.
    Dummy {
        owner: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub dim: usize,
    pub objective: LocalObjective,
    pub role: NodeRole,
}

impl Node {
    pub fn new(objective: LocalObjective) -> Self {
        Node {
            dim: objective.dim(),
            objective,
            role: NodeRole::Agent,
        }
    }

    pub fn dummy(owner: usize) -> Self {
        Node {
            dim: 0,
            objective: LocalObjective::Linear { g: DVector::zeros(0) },
            role: NodeRole::Dummy { owner },
        }
    }

    pub fn is_dummy(&self) -> bool {
        matches!(self.role, NodeRole::Dummy { .. })
    }
}

/// Rows `A_ij x_i + A_ji x_j (<=|=) b_ij` shared by nodes `i` and `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConstraintBlock {
    pub i: usize,
    pub j: usize,
    pub a_ij: DMatrix<f64>,
    pub a_ji: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kinds: Vec<RowKind>,
}

impl EdgeConstraintBlock {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    /// Coefficient matrix acting on `node`'s variable.
    pub fn matrix_for(&self, node: usize) -> &DMatrix<f64> {
        if node == self.i {
            &self.a_ij
        } else {
            &self.a_ji
        }
    }
}

/// Rows `A x_i (<=|=) b` involving a single node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeConstraintBlock {
    pub i: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kinds: Vec<RowKind>,
}

impl NodeConstraintBlock {
    pub fn rows(&self) -> usize {
        self.b.len()
    }
}

/// A validated constrained problem over a connected undirected graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemGraph {
    nodes: Vec<Node>,
    edges: Vec<EdgeConstraintBlock>,
    node_constraints: Vec<NodeConstraintBlock>,
}

impl ProblemGraph {
    /// Validates and assembles a problem graph.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<EdgeConstraintBlock>,
        node_constraints: Vec<NodeConstraintBlock>,
    ) -> Result<Self> {
        let graph = ProblemGraph {
            nodes,
            edges,
            node_constraints,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeConstraintBlock] {
        &self.edges
    }

    pub fn node_constraints(&self) -> &[NodeConstraintBlock] {
        &self.node_constraints
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Indices of non-dummy nodes.
    pub fn agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_dummy())
            .map(|(i, _)| i)
    }

    /// Total number of scalar constraint rows, edges and node constraints.
    pub fn total_rows(&self) -> usize {
        self.edges.iter().map(|e| e.rows()).sum::<usize>()
            + self.node_constraints.iter().map(|c| c.rows()).sum::<usize>()
    }

    /// `Σ_i f_i(x_i)`.
    pub fn objective_value(&self, x: &[DVector<f64>]) -> f64 {
        self.nodes.iter().zip(x).map(|(n, xi)| n.objective.value(xi)).sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidNodeIds("graph has no nodes".into()));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            validate_node(id, node)?;
            if let NodeRole::Dummy { owner } = node.role {
                if owner >= n {
                    return Err(Error::UnknownNode(owner));
                }
            }
        }

        let mut seen = HashSet::new();
        for e in &self.edges {
            for &v in &[e.i, e.j] {
                if v >= n {
                    return Err(Error::UnknownNode(v));
                }
            }
            if e.i == e.j {
                return Err(Error::SelfLoop { i: e.i, j: e.j });
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::DuplicateEdge { i: e.i, j: e.j });
            }
            let ctx = format!("edge ({}, {})", e.i, e.j);
            let m = e.b.len();
            check_dim(&ctx, "rows of A_ij", m, e.a_ij.nrows())?;
            check_dim(&ctx, "rows of A_ji", m, e.a_ji.nrows())?;
            check_dim(&ctx, "kinds", m, e.kinds.len())?;
            check_dim(&ctx, "columns of A_ij", self.nodes[e.i].dim, e.a_ij.ncols())?;
            check_dim(&ctx, "columns of A_ji", self.nodes[e.j].dim, e.a_ji.ncols())?;
        }

        for c in &self.node_constraints {
            if c.i >= n {
                return Err(Error::UnknownNode(c.i));
            }
            let ctx = format!("node constraint on node {}", c.i);
            let m = c.b.len();
            check_dim(&ctx, "rows of A", m, c.a.nrows())?;
            check_dim(&ctx, "kinds", m, c.kinds.len())?;
            check_dim(&ctx, "columns of A", self.nodes[c.i].dim, c.a.ncols())?;
        }

        let reached = self.reachable_from_first();
        if reached < n {
            return Err(Error::DisconnectedGraph { reached, total: n });
        }
        Ok(())
    }

    fn reachable_from_first(&self) -> usize {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count
    }

    /// Replaces every node constraint block by an edge to a fresh dummy node.
    ///
    /// The dummy's side of the edge is an `m × 0` matrix, so the dummy owns no
    /// primal variable. Dummies are appended after the existing nodes in block
    /// order. Idempotent.
    pub fn lower_node_constraints(&self) -> ProblemGraph {
        let mut nodes = self.nodes.clone();
        let mut edges = self.edges.clone();
        for block in &self.node_constraints {
            let dummy = nodes.len();
            nodes.push(Node::dummy(block.i));
            edges.push(EdgeConstraintBlock {
                i: block.i,
                j: dummy,
                a_ij: block.a.clone(),
                a_ji: DMatrix::zeros(block.rows(), 0),
                b: block.b.clone(),
                kinds: block.kinds.clone(),
            });
        }
        ProblemGraph {
            nodes,
            edges,
            node_constraints: Vec::new(),
        }
    }

    pub fn layout(&self) -> DirectedEdgeLayout {
        DirectedEdgeLayout::new(self)
    }
}

fn check_dim(context: &str, what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context: format!("{context}: {what}"),
            expected,
            found,
        });
    }
    Ok(())
}

fn validate_node(id: usize, node: &Node) -> Result<()> {
    let ctx = format!("node {id}");
    match &node.objective {
        LocalObjective::Quadratic { q_matrix, q } => {
            check_dim(&ctx, "length of q", node.dim, q.len())?;
            check_dim(&ctx, "rows of Q", node.dim, q_matrix.nrows())?;
            check_dim(&ctx, "columns of Q", node.dim, q_matrix.ncols())?;
            let asymmetry = (q_matrix - q_matrix.transpose()).amax();
            if asymmetry > SYMMETRY_TOL {
                return Err(Error::NonSymmetricQ { node: id, asymmetry });
            }
            if node.dim > 0 {
                let eig = SymmetricEigen::new(q_matrix.clone());
                let min = eig.eigenvalues.min();
                let scale = q_matrix.amax().max(1.0);
                if min < -PSD_TOL * scale {
                    return Err(Error::NotPositiveSemidefinite {
                        node: id,
                        min_eigenvalue: min,
                    });
                }
            }
        }
        LocalObjective::Linear { g } => check_dim(&ctx, "length of g", node.dim, g.len())?,
    }
    Ok(())
}
