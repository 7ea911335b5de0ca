//! The IEQ-PDMM iteration.
//!
//! One application of the operator `T` maps the lifted dual iterate `z` to
//!
//! ```text
//!   x_i  = argmin f_i(x) + Σ_j z_{i|j}ᵀA_ij x + (c/2)‖A_ij x − b_ij/2‖²   (every node)
//!   y_s  = z_s + 2c (a_s x_owner − b_s/2)                                (every slot)
//!   T(z) = R_M(y)                                                         (every pair)
//! ```
//!
//! Synchronous runs apply `z ← (1−α) z + α T(z)` to every slot; stochastic
//! runs apply the same blend only to the slots selected by an
//! [`UpdateMask`]. `T(z)` is always evaluated from the full current `z`,
//! which is the stochastic Banach–Picard view of asynchronous and lossy
//! message passing. Averaging combined with masking blends only the masked
//! slots.

mod schedule;
mod trace;

pub use schedule::{MaskSampler, Mode, ScheduleConfig, UpdateMask};
pub use trace::{Trace, TraceRow};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::local_solver::NodeSystem;
use crate::problem::{DirectedEdgeLayout, ProblemGraph, RowKind};
use crate::reflection::reflect_all;

/// Consecutive iterations without primal movement needed to declare
/// convergence when `α = 1` and no reference solution is available.
pub const STAGNATION_WINDOW: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    /// Per-node primal iterate, dummy nodes included (empty vectors).
    pub x: Vec<DVector<f64>>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `μ = z + c(Cx − d)` of the last operator application.
    pub mu: Vec<f64>,
    pub k: usize,
}

/// Everything produced by one evaluation of `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Application {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub z_next: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub converged: bool,
    /// Index of the last evaluated iterate (the converged one, if any).
    pub iterations: usize,
    /// `z^{(k)}` at that index.
    pub z: Vec<f64>,
    /// Primal iterate evaluated from `z`, one vector per node of the input
    /// problem (dummy nodes created by lowering are dropped).
    pub x: Vec<DVector<f64>>,
    /// `μ` evaluated from `z`.
    pub mu: Vec<f64>,
    /// Recovered per-row multipliers `½(μ_{i|j} + μ_{j|i})`, in layout row
    /// order, with `μ` evaluated at `½(z + T(z))`.
    pub lambda: Vec<f64>,
}

/// A problem prepared for iteration under a fixed penalty `c`.
pub struct Engine {
    graph: ProblemGraph,
    layout: DirectedEdgeLayout,
    systems: Vec<NodeSystem>,
    sampler: MaskSampler,
    c: f64,
    input_nodes: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Engine {
    /// Lowers node constraints and factorizes every node system.
    pub fn new(problem: &ProblemGraph, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty c must be positive, got {c}")));
        }
        let graph = problem.lower_node_constraints();
        let layout = graph.layout();
        let systems = (0..graph.num_nodes())
            .map(|i| NodeSystem::new(&graph, &layout, i, c))
            .collect::<Result<Vec<_>>>()?;
        let sampler = MaskSampler::new(&graph, &layout);
        Ok(Engine {
            graph,
            layout,
            systems,
            sampler,
            c,
            input_nodes: problem.num_nodes(),
            pool: None,
        })
    }

    /// Runs node updates on a dedicated pool of `threads` workers (`0` for
    /// the global rayon pool, `1` for the calling thread). Results do not
    /// depend on the choice.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        self.pool = match threads {
            1 => None,
            n => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            ),
        };
        Ok(self)
    }

    /// The lowered graph the engine iterates on.
    pub fn graph(&self) -> &ProblemGraph {
        &self.graph
    }

    pub fn layout(&self) -> &DirectedEdgeLayout {
        &self.layout
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn num_slots(&self) -> usize {
        self.layout.num_slots()
    }

    pub fn initial_state(&self) -> IterationState {
        self.state_from(vec![0.0; self.num_slots()])
    }

    pub fn state_from(&self, z: Vec<f64>) -> IterationState {
        let n = self.num_slots();
        IterationState {
            x: self.systems.iter().map(|s| DVector::zeros(s.dim())).collect(),
            y: vec![0.0; n],
            z,
            mu: vec![0.0; n],
            k: 0,
        }
    }

    fn node_updates(&self, z: &[f64]) -> Vec<DVector<f64>> {
        let solve = |s: &NodeSystem| s.x_update(z);
        match &self.pool {
            None => self.systems.iter().map(solve).collect(),
            Some(pool) => pool.install(|| self.systems.par_iter().map(solve).collect()),
        }
    }

    /// Evaluates `T(z)` together with the intermediate `x`, `y` and `μ`.
    pub fn apply_t(&self, z: &[f64]) -> Result<Application> {
        if z.len() != self.num_slots() {
            return Err(Error::DimensionMismatch {
                context: "slot vector".into(),
                expected: self.num_slots(),
                found: z.len(),
            });
        }
        let x = self.node_updates(z);
        let mut y = vec![0.0; z.len()];
        let mut mu = vec![0.0; z.len()];
        for (sys, xi) in self.systems.iter().zip(&x) {
            sys.y_update_into(z, xi, self.c, &mut y);
            for t in sys.terms() {
                mu[t.slot] = z[t.slot] + self.c * (t.apply(xi) - t.half_b);
            }
        }
        let z_next = reflect_all(&y, &self.layout)?;
        Ok(Application { x, y, mu, z_next })
    }

    /// `z ← (1−α) z + α T(z)` on every slot.
    pub fn step_synchronous(&self, state: &IterationState, alpha: f64) -> Result<IterationState> {
        let app = self.apply_t(&state.z)?;
        Ok(advance(state, app, alpha, None))
    }

    /// Same as [`Engine::step_synchronous`] but only the masked slots move.
    pub fn step_stochastic(&self, state: &IterationState, mask: &UpdateMask, alpha: f64) -> Result<IterationState> {
        if mask.len() != self.num_slots() {
            return Err(Error::DimensionMismatch {
                context: "update mask".into(),
                expected: self.num_slots(),
                found: mask.len(),
            });
        }
        let app = self.apply_t(&state.z)?;
        Ok(advance(state, app, alpha, Some(&mask.bits)))
    }

    pub fn sample_mask<R: rand::Rng + ?Sized>(&self, rng: &mut R, config: &ScheduleConfig) -> UpdateMask {
        self.sampler.sample(rng, config)
    }

    /// `max` over rows of `|Ax − b|` (equality) and `(Ax − b)⁺` (inequality).
    pub fn max_violation(&self, x: &[DVector<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for e in self.graph.edges() {
            let lhs_i = dense_apply(&e.a_ij, &x[e.i]);
            let lhs_j = dense_apply(&e.a_ji, &x[e.j]);
            for r in 0..e.rows() {
                let res = lhs_i[r] + lhs_j[r] - e.b[r];
                let v = match e.kinds[r] {
                    RowKind::Equality => res.abs(),
                    RowKind::Inequality => res.max(0.0),
                };
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Per-row multipliers `λ_r = ½(μ_s + μ_partner(s))` in layout row order.
    pub fn recover_duals(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.layout.num_rows())
            .map(|s| 0.5 * (mu[s] + mu[self.layout.partner(s)]))
            .collect()
    }

    /// Iterates from `z = 0`.
    pub fn run(&self, config: &ScheduleConfig, oracle: Option<&[DVector<f64>]>) -> Result<RunOutcome> {
        self.run_from(vec![0.0; self.num_slots()], config, oracle)
    }

    /// Iterates from the given `z^{(0)}` until the stopping rule fires or the
    /// iteration budget is spent.
    ///
    /// With a reference solution the run stops once `‖x − x*‖ ≤ tol_primal`
    /// and, for `α < 1`, also `‖z − T(z)‖ ≤ tol_residual`. Without one it
    /// stops on `‖z − T(z)‖ ≤ tol_residual` for `α < 1`, and for `α = 1` once
    /// the primal iterate moved by at most `tol_primal` (max-norm) for
    /// [`STAGNATION_WINDOW`] consecutive iterations.
    pub fn run_from(
        &self,
        z0: Vec<f64>,
        config: &ScheduleConfig,
        oracle: Option<&[DVector<f64>]>,
    ) -> Result<RunOutcome> {
        config.validate()?;
        if config.c != self.c {
            return Err(Error::InvalidConfig(format!(
                "engine was factorized for c = {}, config asks for c = {}",
                self.c, config.c
            )));
        }
        if let Some(reference) = oracle {
            if reference.len() > self.input_nodes {
                return Err(Error::DimensionMismatch {
                    context: "reference solution nodes".into(),
                    expected: self.input_nodes,
                    found: reference.len(),
                });
            }
            for (i, xi) in reference.iter().enumerate() {
                if xi.len() != self.systems[i].dim() {
                    return Err(Error::DimensionMismatch {
                        context: format!("reference solution of node {i}"),
                        expected: self.systems[i].dim(),
                        found: xi.len(),
                    });
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut state = self.state_from(z0);
        if state.z.len() != self.num_slots() {
            return Err(Error::DimensionMismatch {
                context: "initial z".into(),
                expected: self.num_slots(),
                found: state.z.len(),
            });
        }
        let mut trace = Trace::default();
        let mut prev_x: Option<Vec<DVector<f64>>> = None;
        let mut still = 0usize;

        for k in 0..=config.max_iters {
            let app = self.apply_t(&state.z)?;
            let residual = l2_distance(&state.z, &app.z_next);
            let primal_error = oracle.map(|reference| {
                reference
                    .iter()
                    .zip(&app.x)
                    .map(|(r, x)| (x - r).norm_squared())
                    .sum::<f64>()
                    .sqrt()
            });
            let row = TraceRow {
                k,
                primal_error,
                fixed_point_residual: residual,
                max_violation: self.max_violation(&app.x),
                objective: self.graph.objective_value(&app.x),
            };

            let averaged = config.alpha < 1.0;
            let converged = match primal_error {
                Some(err) => err <= config.tol_primal && (!averaged || residual <= config.tol_residual),
                None if averaged => residual <= config.tol_residual,
                None => {
                    if let Some(prev) = &prev_x {
                        still = if max_change(prev, &app.x) <= config.tol_primal {
                            still + 1
                        } else {
                            0
                        };
                    }
                    still >= STAGNATION_WINDOW
                }
            };

            let last = converged || k == config.max_iters;
            if k % config.trace_every == 0 || last {
                trace.push(row);
            }
            if last {
                // with α = 1 the iterate can settle on a two-cycle whose
                // midpoint is the fixed point, so duals are read there
                let z_mid: Vec<f64> = state.z.iter().zip(&app.z_next).map(|(a, b)| 0.5 * (a + b)).collect();
                let lambda = self.recover_duals(&self.apply_t(&z_mid)?.mu);
                let mut x = app.x;
                x.truncate(self.input_nodes);
                return Ok(RunOutcome {
                    trace,
                    converged,
                    iterations: k,
                    z: state.z,
                    x,
                    mu: app.mu,
                    lambda,
                });
            }

            if oracle.is_none() && !averaged {
                prev_x = Some(app.x.clone());
            }
            state = match config.mode {
                Mode::Synchronous => advance(&state, app, config.alpha, None),
                Mode::Stochastic => {
                    let mask = self.sampler.sample(&mut rng, config);
                    advance(&state, app, config.alpha, Some(&mask.bits))
                }
            };
        }
        unreachable!("loop returns at k == max_iters")
    }
}

/// Builds an engine for `problem` from `config` and runs it from `z = 0`.
pub fn run(problem: &ProblemGraph, config: &ScheduleConfig, oracle: Option<&[DVector<f64>]>) -> Result<RunOutcome> {
    config.validate()?;
    Engine::new(problem, config.c)?
        .with_threads(config.threads)?
        .run(config, oracle)
}

fn advance(state: &IterationState, app: Application, alpha: f64, mask: Option<&[bool]>) -> IterationState {
    let mut z = state.z.clone();
    for (s, zs) in z.iter_mut().enumerate() {
        if mask.is_none_or(|m| m[s]) {
            *zs = if alpha == 1.0 {
                app.z_next[s]
            } else {
                (1.0 - alpha) * *zs + alpha * app.z_next[s]
            };
        }
    }
    IterationState {
        x: app.x,
        y: app.y,
        z,
        mu: app.mu,
        k: state.k + 1,
    }
}

fn dense_apply(a: &nalgebra::DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        DVector::zeros(a.nrows())
    } else {
        a * x
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn max_change(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(u, v)| u.iter().zip(v.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
