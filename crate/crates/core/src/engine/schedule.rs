use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::{DirectedEdgeLayout, ProblemGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every slot is refreshed every iteration.
    Synchronous,
    /// Slots are refreshed according to a random [`UpdateMask`] drawn from
    /// node activations and per-link transmission losses.
    Stochastic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub mode: Mode,
    /// Averaging weight in `(0, 1]`; `1` is the plain Banach–Picard step.
    pub alpha: f64,
    /// Penalty `c > 0`.
    pub c: f64,
    /// Probability that a node is active in an iteration (stochastic mode).
    pub node_active_prob: f64,
    /// Probability that a transmission over a directed link is lost.
    pub loss_rate: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_residual: f64,
    /// Record one trace row every this many iterations.
    pub trace_every: usize,
    /// Worker threads for node updates; `0` uses the global rayon pool.
    pub threads: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            mode: Mode::Synchronous,
            alpha: 1.0,
            c: 0.5,
            node_active_prob: 1.0,
            loss_rate: 0.0,
            seed: 0,
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_residual: 1e-8,
            trace_every: 1,
            threads: 1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("penalty c must be positive, got {}", self.c));
        }
        if !(self.node_active_prob > 0.0 && self.node_active_prob <= 1.0) {
            return bad(format!(
                "node activation probability must lie in (0, 1], got {}",
                self.node_active_prob
            ));
        }
        if !(self.loss_rate >= 0.0 && self.loss_rate < 1.0) {
            return bad(format!("loss rate must lie in [0, 1), got {}", self.loss_rate));
        }
        if self.trace_every == 0 {
            return bad("trace stride must be at least 1".into());
        }
        if !(self.tol_primal >= 0.0 && self.tol_residual >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        Ok(())
    }
}

/// Which slots of `z` are refreshed in one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateMask {
    pub bits: Vec<bool>,
}

impl UpdateMask {
    pub fn all(len: usize) -> Self {
        UpdateMask { bits: vec![true; len] }
    }

    pub fn none(len: usize) -> Self {
        UpdateMask { bits: vec![false; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// A directed link `sender → receiver` and the receiver-side slots
/// `(receiver | sender, r)` it refreshes.
#[derive(Clone, Debug)]
struct Link {
    sender: usize,
    receiver_slots: Vec<usize>,
    /// Links to or from a dummy node never leave the host and cannot be lost.
    colocated: bool,
}

/// Draws update masks for a lowered graph.
///
/// Per iteration: every agent is active independently with
/// `node_active_prob` (a dummy shares its owner's activation), and every
/// directed link between agents independently survives with `1 − loss_rate`.
/// Slot `(j|i, r)` is refreshed when `i` is active and `i → j` survived.
#[derive(Clone, Debug)]
pub struct MaskSampler {
    host: Vec<usize>,
    links: Vec<Link>,
    slots: usize,
}

impl MaskSampler {
    pub fn new(graph: &ProblemGraph, layout: &DirectedEdgeLayout) -> Self {
        let host: Vec<usize> = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| match n.role {
                crate::problem::NodeRole::Agent => i,
                crate::problem::NodeRole::Dummy { owner } => owner,
            })
            .collect();

        let m = layout.num_rows();
        let mut links: Vec<Link> = Vec::new();
        // forward slots of one edge are contiguous, so group by edge index
        let mut s = 0;
        while s < m {
            let edge = layout.slot(s).edge;
            let mut end = s;
            while end < m && layout.slot(end).edge == edge {
                end += 1;
            }
            let lo = layout.slot(s).owner;
            let hi = layout.slot(s).neighbour;
            let colocated = graph.nodes()[lo].is_dummy() || graph.nodes()[hi].is_dummy();
            // lo → hi refreshes (hi | lo, r), the mirrored slots
            links.push(Link {
                sender: lo,
                receiver_slots: (s..end).map(|r| layout.partner(r)).collect(),
                colocated,
            });
            links.push(Link {
                sender: hi,
                receiver_slots: (s..end).collect(),
                colocated,
            });
            s = end;
        }
        MaskSampler {
            host,
            links,
            slots: layout.num_slots(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, config: &ScheduleConfig) -> UpdateMask {
        let n = self.host.len();
        let mut active = vec![false; n];
        for (i, a) in active.iter_mut().enumerate() {
            if self.host[i] == i {
                *a = rng.random_bool(config.node_active_prob);
            }
        }
        for i in 0..n {
            active[i] = active[self.host[i]];
        }

        let mut mask = UpdateMask::none(self.slots);
        for link in &self.links {
            let delivered = if link.colocated {
                true
            } else {
                rng.random_bool(1.0 - config.loss_rate)
            };
            if active[link.sender] && delivered {
                for &s in &link.receiver_slots {
                    mask.bits[s] = true;
                }
            }
        }
        mask
    }
}
