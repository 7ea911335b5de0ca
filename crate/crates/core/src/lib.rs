//! Primal-dual method of multipliers for separable convex problems over a
//! graph, with linear equality and inequality constraints coupling
//! neighbouring nodes.
//!
//! A problem is a [`ProblemGraph`]: one local objective per node and
//! constraint blocks on edges (and on single nodes). The [`Engine`] runs the
//! averaged reflection iteration on the dual auxiliary variables, either
//! synchronously or with random node activation and packet loss. The
//! [`oracle`] module holds small centralised solvers to check it against.

pub mod engine;
pub mod error;
pub mod local_solver;
pub mod oracle;
pub mod problem;
pub mod reflection;
pub mod scenarios;

pub use engine::{run, Engine, Mode, RunOutcome, ScheduleConfig, Trace, TraceRow};
pub use error::{Error, Result};
pub use problem::{EdgeConstraintBlock, LocalObjective, Node, NodeConstraintBlock, NodeRole, ProblemGraph, RowKind};
