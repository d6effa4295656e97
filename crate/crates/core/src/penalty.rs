//! Penalty schedulers mapping per-iteration signals to per-edge penalties.
//!
//! Six schemes are provided:
//!
//! * `fixed`: the penalty stays at `eta0`.
//! * `vp`: residual balancing on local residuals, one penalty per node, reset
//!   to `eta0` once `t >= t_reset`.
//! * `ap`: objective ranking of neighbor estimates rebased on `eta0`, active
//!   while `t < t_max`.
//! * `nap`: `ap` gated by a per-edge spending budget whose ceiling grows
//!   geometrically while the local objective still moves.
//! * `vp_ap`, `vp_nap`: residual balancing scaled by the ranking multiplier,
//!   gated by `t_max` or by the budget respectively.
//!
//! All functions here are pure; the engine owns the state.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PenaltyError {
    #[error("invalid penalty config: {0}")]
    InvalidConfig(&'static str),
    #[error("objective value is not finite: {0}")]
    NonFiniteObjective(f64),
    #[error("unknown scheme `{0}` (expected fixed, vp, ap, nap, vp_ap or vp_nap)")]
    UnknownScheme(alloc::string::String),
    #[error("unknown evaluation point `{0}` (expected neighbor or midpoint)")]
    UnknownEvalPoint(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fixed,
    Vp,
    Ap,
    Nap,
    VpAp,
    VpNap,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Fixed,
        Scheme::Vp,
        Scheme::Ap,
        Scheme::Nap,
        Scheme::VpAp,
        Scheme::VpNap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fixed => "fixed",
            Scheme::Vp => "vp",
            Scheme::Ap => "ap",
            Scheme::Nap => "nap",
            Scheme::VpAp => "vp_ap",
            Scheme::VpNap => "vp_nap",
        }
    }

    /// Whether the scheme needs `f_i` evaluated at neighbor estimates.
    pub fn ranks_neighbors(self) -> bool {
        matches!(self, Scheme::Ap | Scheme::Nap | Scheme::VpAp | Scheme::VpNap)
    }

    pub fn uses_budget(self) -> bool {
        matches!(self, Scheme::Nap | Scheme::VpNap)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = PenaltyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| PenaltyError::UnknownScheme(s.into()))
    }
}

/// Where node `i` evaluates its objective when ranking neighbor `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPoint {
    /// The neighbor's broadcast estimate `theta_j`.
    #[default]
    Neighbor,
    /// The edge auxiliary solution `(theta_i + theta_j) / 2`.
    Midpoint,
}

impl EvalPoint {
    pub fn name(self) -> &'static str {
        match self {
            EvalPoint::Neighbor => "neighbor",
            EvalPoint::Midpoint => "midpoint",
        }
    }
}

impl FromStr for EvalPoint {
    type Err = PenaltyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neighbor" => Ok(EvalPoint::Neighbor),
            "midpoint" => Ok(EvalPoint::Midpoint),
            other => Err(PenaltyError::UnknownEvalPoint(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// Initial (and reset) penalty.
    pub eta0: f64,
    /// Residual ratio threshold, `> 1`.
    pub mu: f64,
    /// Step used by residual balancing: multiply or divide by `1 + tau_fixed`.
    pub tau_fixed: f64,
    /// Last iteration at which `ap` / `vp_ap` may move the penalty.
    pub t_max: usize,
    /// Iteration from which `vp` pins every penalty to `eta0`.
    pub t_reset: usize,
    /// Initial per-edge budget.
    pub budget: f64,
    /// Geometric ceiling growth factor in `(0, 1)`.
    pub alpha: f64,
    /// Objective-change threshold in `(0, 1)` that allows ceiling growth.
    pub beta: f64,
    /// Objective spread below which all neighbors are treated as tied.
    pub tie_epsilon: f64,
    /// Compare `beta` to the relative objective change instead of the absolute one.
    pub relative_beta: bool,
    pub eval_point: EvalPoint,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            eta0: 10.0,
            mu: 10.0,
            tau_fixed: 1.0,
            t_max: 50,
            t_reset: 50,
            budget: 1.0,
            alpha: 0.5,
            beta: 0.1,
            tie_epsilon: 1e-12,
            relative_beta: true,
            eval_point: EvalPoint::Neighbor,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), PenaltyError> {
        let check = |ok: bool, msg| if ok { Ok(()) } else { Err(PenaltyError::InvalidConfig(msg)) };
        check(self.eta0.is_finite() && self.eta0 > 0.0, "eta0 must be positive")?;
        check(self.mu.is_finite() && self.mu > 1.0, "mu must be greater than 1")?;
        check(
            self.tau_fixed.is_finite() && self.tau_fixed > 0.0,
            "tau_fixed must be positive",
        )?;
        check(self.t_max >= 1, "t_max must be at least 1")?;
        check(self.t_reset >= 1, "t_reset must be at least 1")?;
        check(self.budget.is_finite() && self.budget > 0.0, "budget must be positive")?;
        check(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)")?;
        check(self.beta > 0.0 && self.beta < 1.0, "beta must lie in (0, 1)")?;
        check(
            self.tie_epsilon.is_finite() && self.tie_epsilon > 0.0,
            "tie_epsilon must be positive",
        )
    }

    /// Limit of the budget ceiling under geometric growth: `budget / (1 - alpha)`.
    pub fn ceiling_bound(&self) -> f64 {
        self.budget / (1.0 - self.alpha)
    }
}

/// Penalty and budget ledger of one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePenaltyState {
    pub eta: f64,
    /// Accumulated `|tau|` paid so far.
    pub spent: f64,
    pub ceiling: f64,
    /// Exponent of the next ceiling increment; starts at 1.
    pub growth_count: u32,
}

impl EdgePenaltyState {
    pub fn new(cfg: &PenaltyConfig) -> Self {
        EdgePenaltyState {
            eta: cfg.eta0,
            spent: 0.0,
            ceiling: cfg.budget,
            growth_count: 1,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.spent >= self.ceiling
    }
}

/// Squared local primal and dual residual norms of one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualPair {
    pub primal_sq: f64,
    pub dual_sq: f64,
}

impl ResidualPair {
    pub fn primal(&self) -> f64 {
        libm::sqrt(self.primal_sq)
    }

    pub fn dual(&self) -> f64 {
        libm::sqrt(self.dual_sq)
    }
}

/// Residual-balancing decision for one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Primal residual dominates: raise the penalty.
    Increase,
    /// Dual residual dominates: lower the penalty.
    Decrease,
    Hold,
}

/// `||r|| > mu ||s||` selects [`Balance::Increase`], `||s|| > mu ||r||` selects
/// [`Balance::Decrease`]. Compared on squared norms.
pub fn balance(res: &ResidualPair, mu: f64) -> Balance {
    let mu_sq = mu * mu;
    if res.primal_sq > mu_sq * res.dual_sq {
        Balance::Increase
    } else if res.dual_sq > mu_sq * res.primal_sq {
        Balance::Decrease
    } else {
        Balance::Hold
    }
}

/// Local residuals of a node from flattened parameter blocks.
///
/// `neighbor_avg` is the unweighted mean of the neighbors' current estimates and
/// `neighbor_avg_prev` the same mean one round earlier.
///
/// # Panics
///
/// If the three slices differ in length.
pub fn local_residuals(
    theta: &[f64],
    neighbor_avg: &[f64],
    neighbor_avg_prev: &[f64],
    eta: f64,
) -> ResidualPair {
    assert_eq!(theta.len(), neighbor_avg.len(), "parameter shape mismatch");
    assert_eq!(theta.len(), neighbor_avg_prev.len(), "parameter shape mismatch");
    let primal_sq = theta
        .iter()
        .zip(neighbor_avg)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let drift: f64 = neighbor_avg
        .iter()
        .zip(neighbor_avg_prev)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    ResidualPair {
        primal_sq,
        dual_sq: eta * eta * drift,
    }
}

/// Residual balancing on local residuals with a reset to `eta0` from `t_reset` on.
pub fn vp_update(
    state: EdgePenaltyState,
    res: &ResidualPair,
    cfg: &PenaltyConfig,
    t: usize,
) -> EdgePenaltyState {
    let eta = if t >= cfg.t_reset {
        cfg.eta0
    } else {
        match balance(res, cfg.mu) {
            Balance::Increase => state.eta * (1.0 + cfg.tau_fixed),
            Balance::Decrease => state.eta / (1.0 + cfg.tau_fixed),
            Balance::Hold => state.eta,
        }
    };
    EdgePenaltyState { eta, ..state }
}

/// Ranking multipliers `tau_j` for each neighbor.
///
/// `f_self` is the local objective at the node's own estimate and
/// `f_neighbors[k]` the same objective at the `k`-th neighbor's estimate.
/// Every returned value lies in `[-0.5, 1]`; a neighbor that scores better
/// than the node itself gets a positive value.
pub fn ap_taus(
    f_self: f64,
    f_neighbors: &[f64],
    tie_epsilon: f64,
) -> Result<Vec<f64>, PenaltyError> {
    if let Some(&bad) = core::iter::once(&f_self)
        .chain(f_neighbors)
        .find(|f| !f.is_finite())
    {
        return Err(PenaltyError::NonFiniteObjective(bad));
    }
    let (f_min, f_max) = f_neighbors
        .iter()
        .fold((f_self, f_self), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    let spread = f_max - f_min;
    if spread <= tie_epsilon * f_max.abs().max(1.0) {
        return Ok(alloc::vec![0.0; f_neighbors.len()]);
    }
    let kappa = |f: f64| (f - f_min) / spread + 1.0;
    let kappa_self = kappa(f_self);
    Ok(f_neighbors
        .iter()
        .map(|&f| kappa_self / kappa(f) - 1.0)
        .collect())
}

/// Ranking update rebased on `eta0` while `t < t_max`.
pub fn ap_update(tau: f64, cfg: &PenaltyConfig, t: usize) -> f64 {
    if t < cfg.t_max {
        cfg.eta0 * (1.0 + tau)
    } else {
        cfg.eta0
    }
}

fn objective_moved(f_curr: f64, f_prev: f64, cfg: &PenaltyConfig) -> bool {
    let change = (f_curr - f_prev).abs();
    let change = if cfg.relative_beta {
        change / (f_prev.abs() + 1e-12)
    } else {
        change
    };
    change > cfg.beta
}

/// Ceiling growth: an exhausted edge whose node objective still moves by more
/// than `beta` gets `alpha^n * budget` more room.
fn grow_ceiling(
    mut state: EdgePenaltyState,
    f_curr: f64,
    f_prev: f64,
    cfg: &PenaltyConfig,
) -> EdgePenaltyState {
    if state.exhausted() && objective_moved(f_curr, f_prev, cfg) {
        state.ceiling += libm::pow(cfg.alpha, f64::from(state.growth_count)) * cfg.budget;
        state.growth_count += 1;
    }
    state
}

/// Budget-gated ranking update followed by the ceiling update.
pub fn nap_update(
    state: EdgePenaltyState,
    tau: f64,
    f_curr: f64,
    f_prev: f64,
    cfg: &PenaltyConfig,
) -> EdgePenaltyState {
    let mut next = state;
    if state.spent < state.ceiling {
        next.eta = cfg.eta0 * (1.0 + tau);
        next.spent += tau.abs();
    } else {
        next.eta = cfg.eta0;
    }
    grow_ceiling(next, f_curr, f_prev, cfg)
}

fn scaled_balance(eta: f64, tau: f64, res: &ResidualPair, mu: f64) -> Option<f64> {
    match balance(res, mu) {
        Balance::Increase => Some(eta * (1.0 + tau) * 2.0),
        Balance::Decrease => Some(eta * (1.0 + tau) * 0.5),
        Balance::Hold => None,
    }
}

/// Residual balancing scaled by `1 + tau`, reset to `eta0` once `t > t_max`.
pub fn vp_ap_update(
    state: EdgePenaltyState,
    tau: f64,
    res: &ResidualPair,
    cfg: &PenaltyConfig,
    t: usize,
) -> EdgePenaltyState {
    let eta = if t > cfg.t_max {
        cfg.eta0
    } else {
        scaled_balance(state.eta, tau, res, cfg.mu).unwrap_or(state.eta)
    };
    EdgePenaltyState { eta, ..state }
}

/// [`vp_ap_update`] gated by the edge budget instead of `t_max`.
///
/// Only the two `tau`-bearing branches pay into the budget.
pub fn vp_nap_update(
    state: EdgePenaltyState,
    tau: f64,
    f_curr: f64,
    f_prev: f64,
    res: &ResidualPair,
    cfg: &PenaltyConfig,
) -> EdgePenaltyState {
    let mut next = state;
    if state.spent < state.ceiling {
        if let Some(eta) = scaled_balance(state.eta, tau, res, cfg.mu) {
            next.eta = eta;
            next.spent += tau.abs();
        }
    } else {
        next.eta = cfg.eta0;
    }
    grow_ceiling(next, f_curr, f_prev, cfg)
}

/// Everything a node observes at the end of a round that a scheduler may use.
#[derive(Debug, Clone, Default)]
pub struct NodeSignals {
    pub residuals: ResidualPair,
    /// `f_i` at the node's new estimate.
    pub f_curr: f64,
    /// `f_i` at the node's previous estimate.
    pub f_prev: f64,
    /// `f_i` at each neighbor's estimate, aligned with the neighbor list.
    /// Empty for schemes that do not rank neighbors.
    pub f_neighbors: Vec<f64>,
}

/// Advances the outgoing edge states of one node by one round; `t` counts
/// completed rounds from 1, as in the iteration records.
pub fn step_node(
    scheme: Scheme,
    cfg: &PenaltyConfig,
    edges: &mut [EdgePenaltyState],
    signals: &NodeSignals,
    t: usize,
) -> Result<(), PenaltyError> {
    let taus = if scheme.ranks_neighbors() {
        debug_assert_eq!(signals.f_neighbors.len(), edges.len());
        ap_taus(signals.f_curr, &signals.f_neighbors, cfg.tie_epsilon)?
    } else {
        Vec::new()
    };
    let res = &signals.residuals;
    let (f_curr, f_prev) = (signals.f_curr, signals.f_prev);
    for (k, edge) in edges.iter_mut().enumerate() {
        *edge = match scheme {
            Scheme::Fixed => *edge,
            Scheme::Vp => vp_update(*edge, res, cfg, t),
            Scheme::Ap => EdgePenaltyState {
                eta: ap_update(taus[k], cfg, t),
                ..*edge
            },
            Scheme::Nap => nap_update(*edge, taus[k], f_curr, f_prev, cfg),
            Scheme::VpAp => vp_ap_update(*edge, taus[k], res, cfg, t),
            Scheme::VpNap => vp_nap_update(*edge, taus[k], f_curr, f_prev, res, cfg),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> PenaltyConfig {
        PenaltyConfig::default()
    }

    fn res(r: f64, s: f64) -> ResidualPair {
        ResidualPair {
            primal_sq: r * r,
            dual_sq: s * s,
        }
    }

    fn with_eta(eta: f64) -> EdgePenaltyState {
        EdgePenaltyState {
            eta,
            ..EdgePenaltyState::new(&cfg())
        }
    }

    #[test]
    fn defaults_are_valid() {
        let c = cfg();
        c.validate().unwrap();
        assert_eq!(c.eta0, 10.0);
        assert_eq!(c.mu, 10.0);
        assert_eq!(c.t_max, 50);
        assert_eq!(c.t_reset, c.t_max);
        assert_eq!(c.ceiling_bound(), 2.0);
    }

    #[test]
    fn config_rejects_out_of_range() {
        let bad = [
            PenaltyConfig { eta0: 0.0, ..cfg() },
            PenaltyConfig { mu: 1.0, ..cfg() },
            PenaltyConfig { alpha: 1.0, ..cfg() },
            PenaltyConfig { beta: 0.0, ..cfg() },
            PenaltyConfig { t_max: 0, ..cfg() },
            PenaltyConfig { budget: f64::NAN, ..cfg() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn residuals_direct_evaluation() {
        let r = local_residuals(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 2.0);
        assert_eq!(r.primal_sq, 1.0);
        assert_eq!(r.dual_sq, 8.0);
        let same = local_residuals(&[3.0, 4.0], &[3.0, 4.0], &[3.0, 4.0], 5.0);
        assert_eq!(same, ResidualPair::default());
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn residuals_shape_mismatch_panics() {
        local_residuals(&[1.0], &[1.0, 2.0], &[1.0], 1.0);
    }

    #[test]
    fn vp_branches() {
        let c = cfg();
        assert_eq!(vp_update(with_eta(10.0), &res(5.0, 0.2), &c, 3).eta, 20.0);
        assert_eq!(vp_update(with_eta(10.0), &res(0.1, 5.0), &c, 3).eta, 5.0);
        assert_eq!(vp_update(with_eta(10.0), &res(1.0, 1.0), &c, 3).eta, 10.0);
        assert_eq!(vp_update(with_eta(80.0), &res(5.0, 0.2), &c, 50).eta, 10.0);
        assert_eq!(vp_update(with_eta(0.3), &res(0.0, 9.0), &c, 51).eta, 10.0);
    }

    #[test]
    fn vp_matches_global_rule_on_one_edge() {
        // With a single neighbor the local average is the neighbor itself, so
        // the local residuals reduce to the global two-node ones.
        let c = cfg();
        let theta = [1.0, -2.0];
        let other = [0.5, 0.5];
        let other_prev = [0.4, 0.7];
        let local = local_residuals(&theta, &other, &other_prev, 10.0);
        let r_global: f64 = theta.iter().zip(&other).map(|(a, b)| (a - b).powi(2)).sum();
        let s_global: f64 = 100.0
            * other
                .iter()
                .zip(&other_prev)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        let global_eta = if r_global.sqrt() > c.mu * s_global.sqrt() {
            20.0
        } else if s_global.sqrt() > c.mu * r_global.sqrt() {
            5.0
        } else {
            10.0
        };
        assert_eq!(vp_update(with_eta(10.0), &local, &c, 0).eta, global_eta);
    }

    #[test]
    fn ap_taus_examples() {
        let taus = ap_taus(2.0, &[1.0, 3.0], 1e-12).unwrap();
        assert_relative_eq!(taus[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(taus[1], -0.25, epsilon = 1e-15);

        assert_eq!(ap_taus(4.0, &[4.0, 4.0, 4.0], 1e-12).unwrap(), vec![0.0; 3]);

        let extreme = ap_taus(7.0, &[-3.0, 5.0], 1e-12).unwrap();
        assert_relative_eq!(extreme[0], 1.0, epsilon = 1e-15);
        assert_eq!(ap_update(extreme[0], &cfg(), 0), 20.0);

        assert!(ap_taus(1.0, &[], 1e-12).unwrap().is_empty());
        assert!(matches!(
            ap_taus(f64::NAN, &[1.0], 1e-12),
            Err(PenaltyError::NonFiniteObjective(_))
        ));
        assert!(ap_taus(1.0, &[f64::INFINITY], 1e-12).is_err());
    }

    #[test]
    fn ap_tie_is_scale_aware() {
        let base = 1e6;
        let taus = ap_taus(base, &[base * (1.0 + 1e-14)], 1e-12).unwrap();
        assert_eq!(taus, vec![0.0]);
        let taus = ap_taus(base, &[base * (1.0 + 1e-9)], 1e-12).unwrap();
        assert!(taus[0] < 0.0);
    }

    #[test]
    fn ap_update_examples() {
        let c = cfg();
        assert_eq!(ap_update(0.5, &c, 3), 15.0);
        assert_eq!(ap_update(0.5, &c, 50), 10.0);
        assert_eq!(ap_update(0.0, &c, 0), 10.0);
        assert_eq!(ap_update(0.0, &c, 1000), 10.0);
    }

    #[test]
    fn nap_spends_then_grows() {
        let c = PenaltyConfig {
            relative_beta: false,
            ..cfg()
        };
        let fresh = EdgePenaltyState::new(&c);
        let next = nap_update(fresh, 0.4, 1.0, 1.0, &c);
        assert_relative_eq!(next.eta, 14.0);
        assert_relative_eq!(next.spent, 0.4);

        let over = EdgePenaltyState {
            eta: 12.0,
            spent: 1.2,
            ceiling: 1.0,
            growth_count: 1,
        };
        let grown = nap_update(over, 0.3, 2.0, 1.5, &c);
        assert_eq!(grown.eta, 10.0);
        assert_eq!(grown.ceiling, 1.5);
        assert_eq!(grown.growth_count, 2);
        assert_eq!(grown.spent, 1.2);

        let still = nap_update(over, 0.3, 1.51, 1.5, &c);
        assert_eq!(still.eta, 10.0);
        assert_eq!(still.ceiling, 1.0);
        assert_eq!(still.growth_count, 1);
    }

    #[test]
    fn nap_relative_beta() {
        let c = cfg();
        let over = EdgePenaltyState {
            eta: 10.0,
            spent: 1.0,
            ceiling: 1.0,
            growth_count: 1,
        };
        // 0.5 absolute change on a scale of 1000 is below the relative threshold
        assert_eq!(nap_update(over, 0.1, 1000.5, 1000.0, &c).ceiling, 1.0);
        assert_eq!(nap_update(over, 0.1, 1200.0, 1000.0, &c).ceiling, 1.5);
    }

    #[test]
    fn nap_ceiling_never_exceeds_bound() {
        let c = PenaltyConfig {
            relative_beta: false,
            ..cfg()
        };
        let mut state = EdgePenaltyState::new(&c);
        for _ in 0..500 {
            state = nap_update(state, 1.0, 10.0, 0.0, &c);
            assert!(state.ceiling <= c.ceiling_bound());
        }
        assert!(state.ceiling > 1.999);
        assert_eq!(state.eta, c.eta0);
    }

    #[test]
    fn vp_ap_examples() {
        let c = cfg();
        assert_relative_eq!(vp_ap_update(with_eta(10.0), 0.5, &res(5.0, 0.2), &c, 0).eta, 30.0);
        assert_relative_eq!(
            vp_ap_update(with_eta(10.0), -0.25, &res(0.1, 5.0), &c, 0).eta,
            3.75
        );
        assert_eq!(vp_ap_update(with_eta(10.0), 0.5, &res(1.0, 1.0), &c, 0).eta, 10.0);
        assert_eq!(vp_ap_update(with_eta(10.0), 0.5, &res(5.0, 0.2), &c, 50).eta, 30.0);
        assert_eq!(vp_ap_update(with_eta(90.0), 0.5, &res(5.0, 0.2), &c, 51).eta, 10.0);
    }

    #[test]
    fn vp_nap_examples() {
        let c = PenaltyConfig {
            relative_beta: false,
            ..cfg()
        };
        let fresh = EdgePenaltyState::new(&c);
        let next = vp_nap_update(fresh, 0.5, 0.0, 0.0, &res(5.0, 0.2), &c);
        assert_relative_eq!(next.eta, 30.0);
        assert_relative_eq!(next.spent, 0.5);

        // hold branch does not pay
        let held = vp_nap_update(fresh, 0.5, 0.0, 0.0, &res(1.0, 1.0), &c);
        assert_eq!(held.eta, 10.0);
        assert_eq!(held.spent, 0.0);

        let exhausted = EdgePenaltyState {
            eta: 45.0,
            spent: 1.0,
            ceiling: 1.0,
            growth_count: 1,
        };
        let frozen = vp_nap_update(exhausted, 0.5, 1.0, 1.0, &res(5.0, 0.2), &c);
        assert_eq!(frozen.eta, 10.0);
        assert_eq!(frozen.ceiling, 1.0);
        let again = vp_nap_update(frozen, 0.5, 1.0, 1.0, &res(5.0, 0.2), &c);
        assert_eq!(again, frozen);

        let grown = vp_nap_update(exhausted, 0.5, 5.0, 1.0, &res(5.0, 0.2), &c);
        assert_eq!(grown.eta, 10.0);
        assert_eq!(grown.ceiling, 1.5);
        // room again: updates resume
        let resumed = vp_nap_update(grown, 0.5, 5.0, 1.0, &res(5.0, 0.2), &c);
        assert_relative_eq!(resumed.eta, 30.0);
        assert_relative_eq!(resumed.spent, 1.5);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("balanced".parse::<Scheme>().is_err());
        assert_eq!("midpoint".parse::<EvalPoint>().unwrap(), EvalPoint::Midpoint);
    }

    #[test]
    fn step_node_fixed_is_inert() {
        let c = cfg();
        let mut edges = vec![EdgePenaltyState::new(&c); 3];
        let before = edges.clone();
        let signals = NodeSignals {
            residuals: res(100.0, 0.0),
            ..NodeSignals::default()
        };
        step_node(Scheme::Fixed, &c, &mut edges, &signals, 0).unwrap();
        assert_eq!(edges, before);
    }
}
