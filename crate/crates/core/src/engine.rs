//! Round-synchronous consensus ADMM simulation.
//!
//! Every round runs the same barrier-separated phases on all nodes:
//!
//! 1. local primal step against the previous round's inbox,
//! 2. broadcast of the new estimates,
//! 3. multiplier step against the fresh inbox,
//! 4. penalty (and budget) update per the selected [`Scheme`],
//! 5. record and convergence check.
//!
//! A phase only reads values produced by earlier phases, so running the
//! nodes of a phase in parallel gives the same bits as running them in order.
//! The global objective is summed by the simulator as an omniscient observer;
//! a real deployment would need a distributed aggregation for it.

use alloc::vec;
use alloc::vec::Vec;

use crate::penalty::{self, EdgePenaltyState, NodeSignals, PenaltyConfig, PenaltyError, Scheme};
use crate::topology::Graph;

/// Failure inside a node model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("ill-conditioned system: {0}")]
    IllConditioned(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    Invalid(&'static str),
}

/// A node-local model that can take part in consensus ADMM.
///
/// `inbox` and `etas` are aligned with the node's sorted neighbor list:
/// `inbox[k]` is the estimate received from the `k`-th neighbor and `etas[k]`
/// the penalty of the directed edge towards it.
pub trait ConsensusModel {
    type Params: Clone + Send + Sync;

    fn params(&self) -> &Self::Params;

    /// The node's local objective `f_i` evaluated at arbitrary parameters.
    fn objective(&self, params: &Self::Params) -> Result<f64, ModelError>;

    /// Primal update. The inbox holds the neighbors' estimates from the
    /// previous round.
    fn local_step(&mut self, inbox: &[Self::Params], etas: &[f64]) -> Result<(), ModelError>;

    /// Dual ascent on the consensus errors. The inbox holds the estimates
    /// broadcast in the current round.
    fn multiplier_step(&mut self, inbox: &[Self::Params], etas: &[f64]);

    /// Appends the parameters as one flat vector (used for residuals).
    fn flatten(params: &Self::Params, out: &mut Vec<f64>);

    /// Edge auxiliary estimate `(a + b) / 2`.
    fn midpoint(a: &Self::Params, b: &Self::Params) -> Self::Params;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub penalty: PenaltyConfig,
    pub max_iterations: usize,
    /// Threshold on the relative change of the global objective.
    pub convergence_tol: f64,
    /// Stop at the first converged round. When false the run always lasts
    /// `max_iterations` rounds and records keep the `converged` flag.
    pub stop_on_convergence: bool,
    /// Consecutive rounds the objective test must pass before a round counts
    /// as converged. 1 is the plain rule; larger values ignore the early
    /// rounds where a non-monotone objective happens to cross its previous
    /// value.
    pub patience: usize,
    /// Run node phases on the rayon pool (needs the `parallel` feature;
    /// ignored otherwise).
    pub parallel: bool,
    /// How directed-edge penalties enter the node updates.
    pub coupling: Coupling,
}

/// Which penalty node `i` applies to its link with `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// `(eta_ij + eta_ji) / 2`: both endpoints weigh the link equally, which
    /// keeps the multipliers summing to zero across the network.
    #[default]
    Symmetric,
    /// `eta_ij` as owned by node `i`.
    Directed,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: Scheme::Fixed,
            penalty: PenaltyConfig::default(),
            max_iterations: 1000,
            convergence_tol: 1e-3,
            stop_on_convergence: true,
            patience: 2,
            parallel: false,
            coupling: Coupling::Symmetric,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_iterations == 0 {
            return Err(RunError::InvalidConfig("max_iterations must be ≥ 1"));
        }
        if self.patience == 0 {
            return Err(RunError::InvalidConfig("patience must be ≥ 1"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(RunError::InvalidConfig("convergence_tol must be positive"));
        }
        self.penalty.validate()?;
        Ok(())
    }
}

/// Metrics of one completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Number of completed rounds, starting at 1.
    pub t: usize,
    /// Sum of the local objectives at the nodes' current estimates.
    pub objective: f64,
    pub max_primal: f64,
    pub max_dual: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_mean: f64,
    pub converged: bool,
    /// Directed edges whose budget is spent (budget schemes only).
    pub exhausted_edges: usize,
    pub max_ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error("graph has {graph} nodes but {models} models were supplied")]
    NodeCountMismatch { graph: usize, models: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("node {node}: {source}")]
    Model { node: usize, source: ModelError },
    #[error("run diverged at round {}: {reason}", record.t)]
    Diverged {
        record: IterationRecord,
        reason: &'static str,
    },
}

#[derive(Debug, Clone)]
pub struct RunOutput<M> {
    pub records: Vec<IterationRecord>,
    /// Final node models, in node order.
    pub models: Vec<M>,
    /// Final directed-edge states, grouped by source node.
    pub edges: Vec<Vec<EdgePenaltyState>>,
}

impl<M> RunOutput<M> {
    /// First round whose record is flagged converged.
    pub fn converged_at(&self) -> Option<usize> {
        self.records.iter().find(|r| r.converged).map(|r| r.t)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.t)
    }
}

/// What an observer sees after each round.
pub struct RoundView<'a, M> {
    pub record: &'a IterationRecord,
    pub models: &'a [M],
    pub edges: &'a [Vec<EdgePenaltyState>],
}

const DIV_EPS: f64 = 1e-12;
const DIVERGENCE_FACTOR: f64 = 1e12;

/// True when the last two entries differ by less than `tol` relative to the
/// earlier one.
pub fn convergence_check(history: &[f64], tol: f64) -> bool {
    match history {
        [.., prev, curr] => (curr - prev).abs() / (prev.abs() + DIV_EPS) < tol,
        _ => false,
    }
}

/// Delivers each node's snapshot to all of its neighbors.
///
/// The result is indexed by receiver; entry `k` of an inbox comes from the
/// receiver's `k`-th neighbor.
pub fn broadcast_round<P: Clone>(graph: &Graph, snapshot: &[P]) -> Vec<Vec<P>> {
    assert_eq!(graph.num_nodes(), snapshot.len());
    (0..graph.num_nodes())
        .map(|i| graph.neighbors(i).iter().map(|&j| snapshot[j].clone()).collect())
        .collect()
}

fn map_nodes<T, R, F>(parallel: bool, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items
            .par_iter_mut()
            .enumerate()
            .map(|(i, item)| f(i, item))
            .collect();
    }
    let _ = parallel;
    items
        .iter_mut()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

fn map_indices<R, F>(parallel: bool, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

fn first_error<T>(results: Vec<Result<T, ModelError>>) -> Result<Vec<T>, RunError> {
    results
        .into_iter()
        .enumerate()
        .map(|(node, r)| r.map_err(|source| RunError::Model { node, source }))
        .collect()
}

/// Neighbor average of flattened estimates and the node's own flat vector.
fn flat_average<M: ConsensusModel>(own: &M::Params, inbox: &[M::Params]) -> (Vec<f64>, Vec<f64>) {
    let mut theta = Vec::new();
    M::flatten(own, &mut theta);
    let mut avg = vec![0.0; theta.len()];
    if inbox.is_empty() {
        avg.copy_from_slice(&theta);
        return (theta, avg);
    }
    let mut buf = Vec::with_capacity(theta.len());
    for p in inbox {
        buf.clear();
        M::flatten(p, &mut buf);
        for (a, b) in avg.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let scale = 1.0 / inbox.len() as f64;
    avg.iter_mut().for_each(|a| *a *= scale);
    (theta, avg)
}

struct Observation {
    signals: NodeSignals,
    avg: Vec<f64>,
}

/// Runs consensus ADMM to convergence or `max_iterations`.
pub fn run<M>(config: &RunConfig, graph: &Graph, models: Vec<M>) -> Result<RunOutput<M>, RunError>
where
    M: ConsensusModel + Send + Sync,
{
    run_observed(config, graph, models, |_| {})
}

/// [`run`] with a callback invoked after every round.
pub fn run_observed<M, F>(
    config: &RunConfig,
    graph: &Graph,
    mut models: Vec<M>,
    mut observer: F,
) -> Result<RunOutput<M>, RunError>
where
    M: ConsensusModel + Send + Sync,
    F: FnMut(&RoundView<'_, M>),
{
    config.validate()?;
    let n = graph.num_nodes();
    if models.len() != n {
        return Err(RunError::NodeCountMismatch {
            graph: n,
            models: models.len(),
        });
    }
    if !graph.is_connected() {
        return Err(RunError::Disconnected);
    }
    let par = config.parallel;
    let pen = &config.penalty;
    let scheme = config.scheme;

    let mut edges: Vec<Vec<EdgePenaltyState>> = (0..n)
        .map(|i| vec![EdgePenaltyState::new(pen); graph.degree(i)])
        .collect();

    let snapshot: Vec<M::Params> = models.iter().map(|m| m.params().clone()).collect();
    let mut inboxes = broadcast_round(graph, &snapshot);

    let mut f_prev = first_error(map_indices(par, n, |i| models[i].objective(models[i].params())))?;
    let initial: f64 = f_prev.iter().sum();
    if !initial.is_finite() {
        return Err(RunError::Model {
            node: f_prev.iter().position(|f| !f.is_finite()).unwrap_or(0),
            source: ModelError::NonFinite("initial objective"),
        });
    }
    let mut history = vec![initial];
    let mut streak = 0usize;
    let mut prev_avg: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut records = Vec::new();

    for t in 1..=config.max_iterations {
        let etas = applied_penalties(graph, &edges, config.coupling);

        // (1) local step against last round's inbox
        first_error(map_nodes(par, &mut models, |i, m| {
            m.local_step(&inboxes[i], &etas[i])
        }))?;

        // (2) synchronous broadcast
        let snapshot: Vec<M::Params> = models.iter().map(|m| m.params().clone()).collect();
        inboxes = broadcast_round(graph, &snapshot);

        // (3) multipliers
        map_nodes(par, &mut models, |i, m| m.multiplier_step(&inboxes[i], &etas[i]));

        // (4) penalty signals, then per-node scheduler step
        let observations = first_error(map_indices(par, n, |i| {
            let model = &models[i];
            let own = model.params();
            let inbox = &inboxes[i];
            let f_curr = model.objective(own)?;
            let f_neighbors = if scheme.ranks_neighbors() {
                inbox
                    .iter()
                    .map(|p| match pen.eval_point {
                        penalty::EvalPoint::Neighbor => model.objective(p),
                        penalty::EvalPoint::Midpoint => model.objective(&M::midpoint(own, p)),
                    })
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            let (residuals, avg) = if inbox.is_empty() {
                (penalty::ResidualPair::default(), Vec::new())
            } else {
                let (theta, avg) = flat_average::<M>(own, inbox);
                let prev = prev_avg[i].as_deref().unwrap_or(&avg);
                let node_eta = etas[i].iter().sum::<f64>() / etas[i].len() as f64;
                (penalty::local_residuals(&theta, &avg, prev, node_eta), avg)
            };
            Ok(Observation {
                signals: NodeSignals {
                    residuals,
                    f_curr,
                    f_prev: f_prev[i],
                    f_neighbors,
                },
                avg,
            })
        }))?;

        let stepped = map_nodes(par, &mut edges, |i, list| {
            penalty::step_node(scheme, pen, list, &observations[i].signals, t)
        });
        stepped.into_iter().collect::<Result<Vec<_>, _>>()?;

        // (5) record
        let mut objective = 0.0;
        let mut max_primal: f64 = 0.0;
        let mut max_dual: f64 = 0.0;
        for (i, obs) in observations.into_iter().enumerate() {
            objective += obs.signals.f_curr;
            max_primal = max_primal.max(obs.signals.residuals.primal());
            max_dual = max_dual.max(obs.signals.residuals.dual());
            f_prev[i] = obs.signals.f_curr;
            if !obs.avg.is_empty() {
                prev_avg[i] = Some(obs.avg);
            }
        }
        history.push(objective);
        streak = if convergence_check(&history, config.convergence_tol) {
            streak + 1
        } else {
            0
        };
        let converged = streak >= config.patience;
        let record = make_record(t, objective, max_primal, max_dual, converged, &edges, pen);

        if !objective.is_finite() {
            return Err(RunError::Diverged {
                record,
                reason: "global objective is not finite",
            });
        }
        if objective.abs() > DIVERGENCE_FACTOR * initial.abs().max(1.0) {
            return Err(RunError::Diverged {
                record,
                reason: "global objective exceeded 1e12 times its initial magnitude",
            });
        }

        observer(&RoundView {
            record: &record,
            models: &models,
            edges: &edges,
        });
        records.push(record);
        if converged && config.stop_on_convergence {
            break;
        }
    }

    Ok(RunOutput {
        records,
        models,
        edges,
    })
}

/// Per-node penalties handed to the models, aligned with the neighbor lists.
pub fn applied_penalties(
    graph: &Graph,
    edges: &[Vec<EdgePenaltyState>],
    coupling: Coupling,
) -> Vec<Vec<f64>> {
    (0..graph.num_nodes())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .enumerate()
                .map(|(k, &j)| match coupling {
                    Coupling::Directed => edges[i][k].eta,
                    Coupling::Symmetric => {
                        let back = graph
                            .neighbors(j)
                            .binary_search(&i)
                            .expect("graph is symmetric");
                        0.5 * (edges[i][k].eta + edges[j][back].eta)
                    }
                })
                .collect()
        })
        .collect()
}

fn make_record(
    t: usize,
    objective: f64,
    max_primal: f64,
    max_dual: f64,
    converged: bool,
    edges: &[Vec<EdgePenaltyState>],
    pen: &PenaltyConfig,
) -> IterationRecord {
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut eta_min = f64::INFINITY;
    let mut eta_max = f64::NEG_INFINITY;
    let mut exhausted = 0;
    let mut max_ceiling: f64 = pen.budget;
    for e in edges.iter().flatten() {
        count += 1;
        sum += e.eta;
        eta_min = eta_min.min(e.eta);
        eta_max = eta_max.max(e.eta);
        max_ceiling = max_ceiling.max(e.ceiling);
        if e.exhausted() {
            exhausted += 1;
        }
    }
    let (eta_min, eta_max, eta_mean) = if count == 0 {
        (pen.eta0, pen.eta0, pen.eta0)
    } else {
        (eta_min, eta_max, sum / count as f64)
    };
    IterationRecord {
        t,
        objective,
        max_primal,
        max_dual,
        eta_min,
        eta_max,
        eta_mean,
        converged,
        exhausted_edges: exhausted,
        max_ceiling,
    }
}
