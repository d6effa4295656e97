//! Probabilistic PCA: centralized EM and the distributed (consensus ADMM) node model.
//!
//! The generative model is `x = W z + mu + eps` with `z ~ N(0, I_M)` and
//! `eps ~ N(0, a^-1 I_D)`; `a` is the noise precision.
//!
//! A distributed node `i` minimizes, per M-step and with its E-step moments
//! held fixed, the block Lagrangian
//!
//! ```text
//! L_i(W, mu, a) = Q_i(W, mu, a) + 2<Lambda_i, W> + 2 gamma_i' mu + 2 beta_i a
//!               + sum_j eta_ij ( ||W - (W_i + W_j)/2||^2 + ||mu - (mu_i + mu_j)/2||^2
//!                                + (a - (a_i + a_j)/2)^2 )
//! ```
//!
//! where `Q_i` is the expected complete-data negative log-likelihood and the
//! anchors `W_i, W_j, ...` are the estimates of the previous round. The blocks
//! are updated in the order `mu`, `W`, `a`, each from its stationarity
//! condition with the freshest values of the other blocks.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{ConsensusModel, ModelError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpcaError {
    #[error("ill-conditioned system: {0}")]
    IllConditioned(&'static str),
    #[error("noise precision must be positive and finite, got {0}")]
    InvalidPrecision(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("need more samples ({samples}) than latent dimensions ({latent})")]
    TooFewSamples { samples: usize, latent: usize },
    #[error("data has zero variance")]
    DegenerateData,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl From<PpcaError> for ModelError {
    fn from(err: PpcaError) -> Self {
        match err {
            PpcaError::IllConditioned(what) => ModelError::IllConditioned(what),
            PpcaError::NonFinite(what) => ModelError::NonFinite(what),
            PpcaError::InvalidPrecision(_) => ModelError::NonFinite("noise precision"),
            PpcaError::ShapeMismatch(what) => ModelError::Invalid(what),
            PpcaError::TooFewSamples { .. } => ModelError::Invalid("too few samples"),
            PpcaError::DegenerateData => ModelError::Invalid("zero-variance data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaParams {
    /// `D x M` projection.
    pub w: DMatrix<f64>,
    pub mu: DVector<f64>,
    /// Noise precision.
    pub a: f64,
}

impl PpcaParams {
    pub fn new(w: DMatrix<f64>, mu: DVector<f64>, a: f64) -> Result<Self, PpcaError> {
        let params = PpcaParams { w, mu, a };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PpcaError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(PpcaError::InvalidPrecision(self.a));
        }
        if self.w.nrows() != self.mu.len() {
            return Err(PpcaError::ShapeMismatch("W rows must equal mu length"));
        }
        if self.w.ncols() == 0 || self.w.ncols() > self.w.nrows() {
            return Err(PpcaError::ShapeMismatch("need D >= M >= 1"));
        }
        if self.w.iter().chain(self.mu.iter()).any(|v| !v.is_finite()) {
            return Err(PpcaError::NonFinite("parameters"));
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Random start: `W` entries standard normal scaled by `1/sqrt(M)`,
    /// `mu` the data mean and `a = 1`.
    pub fn random_init<R: Rng + ?Sized>(x: &DMatrix<f64>, latent_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / libm::sqrt(latent_dim as f64);
        let w = DMatrix::from_fn(x.nrows(), latent_dim, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        });
        PpcaParams {
            w,
            mu: row_mean(x),
            a: 1.0,
        }
    }
}

pub(crate) fn row_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols().max(1) as f64;
    x.column_sum() / n
}

fn centered(x: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= mu;
    }
    out
}

fn check_data(params: &PpcaParams, x: &DMatrix<f64>) -> Result<(), PpcaError> {
    params.validate()?;
    if x.nrows() != params.ambient_dim() {
        return Err(PpcaError::ShapeMismatch("data rows must equal D"));
    }
    Ok(())
}

/// Posterior moments of the latent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMoments {
    /// `M x N`, column `n` is `E[z_n]`.
    pub ez: DMatrix<f64>,
    /// Posterior covariance `a^-1 (W'W + a^-1 I)^-1`, shared by all samples.
    pub cov: DMatrix<f64>,
}

impl LatentMoments {
    /// `E[z_n z_n']`.
    pub fn ezz(&self, n: usize) -> DMatrix<f64> {
        let ez = self.ez.column(n);
        &self.cov + ez * ez.transpose()
    }

    /// `sum_n E[z_n z_n']`.
    pub fn sum_ezz(&self) -> DMatrix<f64> {
        &self.cov * self.ez.ncols() as f64 + &self.ez * self.ez.transpose()
    }
}

/// Posterior `p(z | x) = N(M^-1 W'(x - mu), a^-1 M^-1)` with `M = W'W + a^-1 I`.
pub fn e_step(params: &PpcaParams, x: &DMatrix<f64>) -> Result<LatentMoments, PpcaError> {
    check_data(params, x)?;
    let m = params.latent_dim();
    let noise_var = 1.0 / params.a;
    let m_mat = params.w.transpose() * &params.w + DMatrix::identity(m, m) * noise_var;
    let chol = m_mat
        .cholesky()
        .ok_or(PpcaError::IllConditioned("posterior precision W'W + a^-1 I"))?;
    let m_inv = chol.inverse();
    let ez = &m_inv * params.w.transpose() * centered(x, &params.mu);
    let cov = m_inv * noise_var;
    if ez.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
        return Err(PpcaError::NonFinite("latent moments"));
    }
    Ok(LatentMoments { ez, cov })
}

/// Negative marginal log-likelihood of the columns of `x` under
/// `N(mu, W W' + a^-1 I)`. This is the local objective `f_i` of a node.
pub fn negative_log_likelihood(params: &PpcaParams, x: &DMatrix<f64>) -> Result<f64, PpcaError> {
    check_data(params, x)?;
    let (d, m) = (params.ambient_dim(), params.latent_dim());
    let n = x.ncols() as f64;
    let noise_var = 1.0 / params.a;
    let m_mat = params.w.transpose() * &params.w + DMatrix::identity(m, m) * noise_var;
    let chol = m_mat
        .cholesky()
        .ok_or(PpcaError::IllConditioned("marginal covariance"))?;
    let log_det_m: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * libm::log(*v)).sum();
    // |W W' + s I| = s^(D - M) |W'W + s I|
    let log_det_cov = (d - m) as f64 * libm::log(noise_var) + log_det_m;
    let xc = centered(x, &params.mu);
    let proj = params.w.transpose() * &xc;
    let solved = chol.solve(&proj);
    // Woodbury: C^-1 = (I - W M^-1 W') / s
    let quad = (xc.norm_squared() - proj.component_mul(&solved).sum()) * params.a;
    let value = 0.5 * (n * d as f64 * libm::log(2.0 * PI) + n * log_det_cov + quad);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(PpcaError::NonFinite("negative log-likelihood"))
    }
}

/// Expected residual term `R` of the complete-data likelihood:
/// `1/2 sum_n ( ||x_n - mu||^2 - 2 E[z_n]' W'(x_n - mu) + tr(E[z_n z_n'] W'W) )`.
fn expected_residual(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    mu: &DVector<f64>,
    moments: &LatentMoments,
) -> f64 {
    let xc = centered(x, mu);
    let cross = (w.transpose() * &xc).component_mul(&moments.ez).sum();
    let wtw = w.transpose() * w;
    let trace = wtw.component_mul(&moments.sum_ezz()).sum();
    0.5 * (xc.norm_squared() - 2.0 * cross + trace)
}

/// One textbook EM iteration for PPCA on the full data.
///
/// Conditional maximization in the order `mu`, `W`, `a`, which keeps the
/// likelihood non-decreasing.
pub fn em_step(params: &PpcaParams, x: &DMatrix<f64>) -> Result<PpcaParams, PpcaError> {
    let moments = e_step(params, x)?;
    let (d, m, n) = (params.ambient_dim(), params.latent_dim(), x.ncols());

    let mut mu = DVector::zeros(d);
    for k in 0..n {
        mu += x.column(k) - &params.w * moments.ez.column(k);
    }
    mu /= n as f64;

    let mut cross = DMatrix::zeros(d, m);
    let mut second = DMatrix::zeros(m, m);
    for k in 0..n {
        cross += (x.column(k) - &mu) * moments.ez.column(k).transpose();
        second += moments.ezz(k);
    }
    let w = second
        .cholesky()
        .ok_or(PpcaError::IllConditioned("sum of E[zz']"))?
        .solve(&cross.transpose())
        .transpose();

    let wtw = w.transpose() * &w;
    let mut resid = 0.0;
    for k in 0..n {
        let dev = x.column(k) - &mu;
        resid += dev.norm_squared()
            - 2.0 * moments.ez.column(k).dot(&(w.transpose() * &dev))
            + (moments.ezz(k) * &wtw).trace();
    }
    let noise_var = resid / (n * d) as f64;
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(PpcaError::IllConditioned("noise variance collapsed"));
    }
    PpcaParams::new(w, mu, 1.0 / noise_var)
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: PpcaParams,
    /// Data log-likelihood at the initial point and after each iteration.
    pub log_likelihood: Vec<f64>,
    /// Parameters after each iteration.
    pub trajectory: Vec<PpcaParams>,
}

/// Centralized PPCA by EM from `init`, `iterations` steps.
pub fn centralized_em(
    x: &DMatrix<f64>,
    init: PpcaParams,
    iterations: usize,
) -> Result<EmFit, PpcaError> {
    check_data(&init, x)?;
    if x.ncols() <= init.latent_dim() {
        return Err(PpcaError::TooFewSamples {
            samples: x.ncols(),
            latent: init.latent_dim(),
        });
    }
    if centered(x, &row_mean(x)).norm_squared() == 0.0 {
        return Err(PpcaError::DegenerateData);
    }
    let mut params = init;
    let mut log_likelihood = Vec::with_capacity(iterations + 1);
    let mut trajectory = Vec::with_capacity(iterations);
    log_likelihood.push(-negative_log_likelihood(&params, x)?);
    for _ in 0..iterations {
        params = em_step(&params, x)?;
        log_likelihood.push(-negative_log_likelihood(&params, x)?);
        trajectory.push(params.clone());
    }
    Ok(EmFit {
        params,
        log_likelihood,
        trajectory,
    })
}

/// Lagrange multipliers of one node: `lambda` for `W`, `gamma` for `mu`,
/// `beta` for `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DppcaMultipliers {
    pub lambda: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub beta: f64,
}

impl DppcaMultipliers {
    pub fn zeros(d: usize, m: usize) -> Self {
        DppcaMultipliers {
            lambda: DMatrix::zeros(d, m),
            gamma: DVector::zeros(d),
            beta: 0.0,
        }
    }
}

/// Positive root of `quad * a^2 + lin * a - c = 0` with `c > 0`, `quad >= 0`.
fn positive_root(quad: f64, lin: f64, c: f64) -> Option<f64> {
    let disc = lin * lin + 4.0 * quad * c;
    let root = if lin >= 0.0 {
        2.0 * c / (lin + libm::sqrt(disc))
    } else if quad > 0.0 {
        (-lin + libm::sqrt(disc)) / (2.0 * quad)
    } else {
        return None;
    };
    (root.is_finite() && root > 0.0).then_some(root)
}

/// Outcome of a D-PPCA M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub params: PpcaParams,
    /// The `W` normal equations needed a ridge to factor.
    pub regularized: bool,
}

/// D-PPCA M-step for one node.
///
/// `own` holds the node's estimate from the previous round, `neighbors` the
/// estimates received from its neighbors in that round and `etas` the
/// per-edge penalties, aligned with `neighbors`.
pub fn dppca_m_step(
    moments: &LatentMoments,
    x: &DMatrix<f64>,
    own: &PpcaParams,
    multipliers: &DppcaMultipliers,
    neighbors: &[PpcaParams],
    etas: &[f64],
) -> Result<MStep, PpcaError> {
    check_data(own, x)?;
    if neighbors.len() != etas.len() {
        return Err(PpcaError::ShapeMismatch("one penalty per neighbor"));
    }
    let (d, m, n) = (own.ambient_dim(), own.latent_dim(), x.ncols());
    let a_prev = own.a;
    let eta_sum: f64 = etas.iter().sum();

    // mu
    let mut mu_pull = DVector::zeros(d);
    let mut w_pull = DMatrix::zeros(d, m);
    let mut a_pull = 0.0;
    for (nb, &eta) in neighbors.iter().zip(etas) {
        mu_pull += (&own.mu + &nb.mu) * eta;
        w_pull += (&own.w + &nb.w) * eta;
        a_pull += eta * (own.a + nb.a);
    }
    let data_sum = x.column_sum() - &own.w * moments.ez.column_sum();
    let mu = (data_sum * a_prev - &multipliers.gamma * 2.0 + mu_pull)
        / (n as f64 * a_prev + 2.0 * eta_sum);

    // W: W (a sum E[zz'] + 2 sum eta I) = a sum (x - mu) E[z]' - 2 Lambda + sum eta (W_i + W_j)
    let lhs = moments.sum_ezz() * a_prev + DMatrix::identity(m, m) * (2.0 * eta_sum);
    let rhs = centered(x, &mu) * moments.ez.transpose() * a_prev - &multipliers.lambda * 2.0 + w_pull;
    let rhs_t = rhs.transpose();
    let (w, regularized) = match lhs.clone().cholesky() {
        Some(chol) => (chol.solve(&rhs_t).transpose(), false),
        None => {
            let ridge = 1e-10 * (lhs.trace().abs() / m as f64).max(1.0);
            let solved = (lhs + DMatrix::identity(m, m) * ridge)
                .lu()
                .solve(&rhs_t)
                .ok_or(PpcaError::IllConditioned("W normal equations"))?;
            (solved.transpose(), true)
        }
    };

    // a: 2 S a^2 + (R + 2 beta - sum eta (a_i + a_j)) a - N D / 2 = 0
    let resid = expected_residual(x, &w, &mu, moments);
    let half_nd = 0.5 * (n * d) as f64;
    let a = positive_root(2.0 * eta_sum, resid + 2.0 * multipliers.beta - a_pull, half_nd)
        .or_else(|| positive_root(0.0, resid, half_nd))
        .ok_or(PpcaError::IllConditioned("noise precision update"))?;

    let params = PpcaParams::new(w, mu, a)?;
    Ok(MStep {
        params,
        regularized,
    })
}

/// Dual ascent on the penalty-weighted consensus errors:
/// `gamma += 1/2 sum_j eta_ij (mu_i - mu_j)`, and likewise for `lambda`, `beta`.
pub fn dppca_multiplier_step(
    own: &PpcaParams,
    neighbors: &[PpcaParams],
    etas: &[f64],
    multipliers: &DppcaMultipliers,
) -> DppcaMultipliers {
    let mut next = multipliers.clone();
    for (nb, &eta) in neighbors.iter().zip(etas) {
        let half = 0.5 * eta;
        next.gamma += (&own.mu - &nb.mu) * half;
        next.lambda += (&own.w - &nb.w) * half;
        next.beta += half * (own.a - nb.a);
    }
    next
}

/// Value of the node's block Lagrangian (see the module docs) at `candidate`.
///
/// Moments, anchors, multipliers and penalties are those the M-step saw.
pub fn node_lagrangian(
    candidate: &PpcaParams,
    moments: &LatentMoments,
    x: &DMatrix<f64>,
    anchor: &PpcaParams,
    neighbors: &[PpcaParams],
    etas: &[f64],
    multipliers: &DppcaMultipliers,
) -> f64 {
    let nd = (x.nrows() * x.ncols()) as f64;
    let data = candidate.a * expected_residual(x, &candidate.w, &candidate.mu, moments)
        - 0.5 * nd * libm::log(candidate.a);
    let linear = 2.0 * multipliers.lambda.dot(&candidate.w)
        + 2.0 * multipliers.gamma.dot(&candidate.mu)
        + 2.0 * multipliers.beta * candidate.a;
    let penalty: f64 = neighbors
        .iter()
        .zip(etas)
        .map(|(nb, &eta)| {
            let w_mid = (&anchor.w + &nb.w) * 0.5;
            let mu_mid = (&anchor.mu + &nb.mu) * 0.5;
            let a_mid = 0.5 * (anchor.a + nb.a);
            eta * ((&candidate.w - w_mid).norm_squared()
                + (&candidate.mu - mu_mid).norm_squared()
                + (candidate.a - a_mid) * (candidate.a - a_mid))
        })
        .sum();
    data + linear + penalty
}

/// One D-PPCA node: its data shard, estimate and multipliers.
#[derive(Debug, Clone)]
pub struct DppcaNode {
    data: DMatrix<f64>,
    params: PpcaParams,
    multipliers: DppcaMultipliers,
    regularized_solves: usize,
}

impl DppcaNode {
    pub fn new(data: DMatrix<f64>, init: PpcaParams) -> Result<Self, PpcaError> {
        check_data(&init, &data)?;
        if data.ncols() == 0 {
            return Err(PpcaError::TooFewSamples {
                samples: 0,
                latent: init.latent_dim(),
            });
        }
        let multipliers = DppcaMultipliers::zeros(init.ambient_dim(), init.latent_dim());
        Ok(DppcaNode {
            data,
            params: init,
            multipliers,
            regularized_solves: 0,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn multipliers(&self) -> &DppcaMultipliers {
        &self.multipliers
    }

    /// How many M-steps needed a ridge on the `W` normal equations.
    pub fn regularized_solves(&self) -> usize {
        self.regularized_solves
    }
}

impl ConsensusModel for DppcaNode {
    type Params = PpcaParams;

    fn params(&self) -> &PpcaParams {
        &self.params
    }

    fn objective(&self, params: &PpcaParams) -> Result<f64, ModelError> {
        Ok(negative_log_likelihood(params, &self.data)?)
    }

    fn local_step(&mut self, inbox: &[PpcaParams], etas: &[f64]) -> Result<(), ModelError> {
        let moments = e_step(&self.params, &self.data)?;
        let step = dppca_m_step(
            &moments,
            &self.data,
            &self.params,
            &self.multipliers,
            inbox,
            etas,
        )?;
        if step.regularized {
            self.regularized_solves += 1;
        }
        self.params = step.params;
        Ok(())
    }

    fn multiplier_step(&mut self, inbox: &[PpcaParams], etas: &[f64]) {
        self.multipliers = dppca_multiplier_step(&self.params, inbox, etas, &self.multipliers);
    }

    /// `vec(W)` (column-major), then `mu`, then `a`.
    fn flatten(params: &PpcaParams, out: &mut Vec<f64>) {
        out.extend(params.w.iter().copied());
        out.extend(params.mu.iter().copied());
        out.push(params.a);
    }

    fn midpoint(a: &PpcaParams, b: &PpcaParams) -> PpcaParams {
        PpcaParams {
            w: (&a.w + &b.w) * 0.5,
            mu: (&a.mu + &b.mu) * 0.5,
            a: 0.5 * (a.a + b.a),
        }
    }
}
