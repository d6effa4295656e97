//! Experiment configuration: a TOML file, optionally overridden by flags.
//!
//! Every section has defaults, so an empty file is a valid config for the
//! synthetic protocol. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use adaptive_admm::data::{AffineSpec, SyntheticSpec};
use adaptive_admm::engine::Coupling;
use adaptive_admm::{EvalPoint, Graph, PenaltyConfig, RunConfig, Scheme, Topology};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file sets one.
pub const OUT_DIR_ENV: &str = "ADAPTIVE_ADMM_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scheme: String,
    pub topology: String,
    pub nodes: usize,
    /// Seed of the parameter initialization.
    pub seed: u64,
    pub latent_dim: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub patience: usize,
    /// `symmetric` or `directed`.
    pub coupling: String,
    pub parallel: bool,
    pub output_dir: Option<PathBuf>,
    pub penalty: PenaltySection,
    pub synthetic: SyntheticSection,
    pub sfm: SfmSection,
    pub affine: AffineSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        ExperimentConfig {
            scheme: Scheme::Fixed.name().to_owned(),
            topology: Topology::Complete.name().to_owned(),
            nodes: 20,
            seed: 1,
            latent_dim: 5,
            max_iterations: run.max_iterations,
            convergence_tol: run.convergence_tol,
            patience: run.patience,
            coupling: "symmetric".to_owned(),
            parallel: false,
            output_dir: None,
            penalty: PenaltySection::default(),
            synthetic: SyntheticSection::default(),
            sfm: SfmSection::default(),
            affine: AffineSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub eta0: f64,
    pub mu: f64,
    pub tau_fixed: f64,
    pub t_max: usize,
    pub t_reset: usize,
    pub budget: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tie_epsilon: f64,
    pub relative_beta: bool,
    /// `neighbor` or `midpoint`.
    pub eval_point: String,
}

impl Default for PenaltySection {
    fn default() -> Self {
        let p = PenaltyConfig::default();
        PenaltySection {
            eta0: p.eta0,
            mu: p.mu,
            tau_fixed: p.tau_fixed,
            t_max: p.t_max,
            t_reset: p.t_reset,
            budget: p.budget,
            alpha: p.alpha,
            beta: p.beta,
            tie_epsilon: p.tie_epsilon,
            relative_beta: p.relative_beta,
            eval_point: p.eval_point.name().to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub num_samples: usize,
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub noise_variance: f64,
    /// Seed of the data draw, independent of the initialization seed.
    pub seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        SyntheticSection {
            num_samples: s.num_samples,
            ambient_dim: s.ambient_dim,
            latent_dim: s.latent_dim,
            noise_variance: s.noise_variance,
            seed: s.seed,
        }
    }
}

/// Structure-from-motion runs: the scheme, seeds and penalties come from the
/// top level, the network from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfmSection {
    /// Measurement CSV; a synthetic scene from `[affine]` is used when absent.
    pub measurements: Option<PathBuf>,
    pub nodes: usize,
    pub topology: String,
}

impl Default for SfmSection {
    fn default() -> Self {
        SfmSection {
            measurements: None,
            nodes: 5,
            topology: Topology::Complete.name().to_owned(),
        }
    }
}

/// Synthetic rigid scene for `sfm` when no measurement file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffineSection {
    pub frames: usize,
    pub points: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for AffineSection {
    fn default() -> Self {
        let a = AffineSpec::default();
        AffineSection {
            frames: a.frames,
            points: a.points,
            noise_std: a.noise_std,
            seed: a.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub schemes: Vec<String>,
    pub topologies: Vec<String>,
    pub nodes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Drop runs whose max angle exceeds this many degrees from the medians.
    pub angle_filter_deg: Option<f64>,
    /// Also write a trace and summary for every run of the sweep.
    pub write_runs: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            schemes: Scheme::ALL.iter().map(|s| s.name().to_owned()).collect(),
            topologies: vec![Topology::Complete.name().to_owned()],
            nodes: vec![20],
            seeds: (1..=20).collect(),
            angle_filter_deg: None,
            write_runs: false,
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{field}`: {reason}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        parse_scheme("scheme", &self.scheme)
    }

    pub fn graph(&self) -> Result<Graph, CliError> {
        build_graph("topology", &self.topology, self.nodes)
    }

    pub fn coupling(&self) -> Result<Coupling, CliError> {
        match self.coupling.as_str() {
            "symmetric" => Ok(Coupling::Symmetric),
            "directed" => Ok(Coupling::Directed),
            other => Err(invalid("coupling", format!("expected symmetric or directed, got '{other}'"))),
        }
    }

    pub fn penalty(&self) -> Result<PenaltyConfig, CliError> {
        let p = &self.penalty;
        let eval_point: EvalPoint = p
            .eval_point
            .parse()
            .map_err(|e| invalid("penalty.eval_point", e))?;
        let cfg = PenaltyConfig {
            eta0: p.eta0,
            mu: p.mu,
            tau_fixed: p.tau_fixed,
            t_max: p.t_max,
            t_reset: p.t_reset,
            budget: p.budget,
            alpha: p.alpha,
            beta: p.beta,
            tie_epsilon: p.tie_epsilon,
            relative_beta: p.relative_beta,
            eval_point,
        };
        cfg.validate().map_err(|e| invalid("penalty", e))?;
        Ok(cfg)
    }

    /// Engine settings for one run with the given scheme.
    pub fn run_config(&self, scheme: Scheme) -> Result<RunConfig, CliError> {
        let cfg = RunConfig {
            scheme,
            penalty: self.penalty()?,
            max_iterations: self.max_iterations,
            convergence_tol: self.convergence_tol,
            stop_on_convergence: true,
            patience: self.patience,
            parallel: self.parallel,
            coupling: self.coupling()?,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec, CliError> {
        let s = &self.synthetic;
        let spec = SyntheticSpec {
            num_samples: s.num_samples,
            ambient_dim: s.ambient_dim,
            latent_dim: s.latent_dim,
            noise_variance: s.noise_variance,
            seed: s.seed,
        };
        spec.validate().map_err(|e| invalid("synthetic", e))?;
        Ok(spec)
    }

    pub fn affine_spec(&self) -> AffineSpec {
        AffineSpec {
            frames: self.affine.frames,
            points: self.affine.points,
            noise_std: self.affine.noise_std,
            seed: self.affine.seed,
        }
    }

    /// Checks everything a synthetic `run` needs before any work starts.
    pub fn validate_synthetic(&self) -> Result<(), CliError> {
        self.run_config(self.scheme()?)?;
        self.graph()?;
        let spec = self.synthetic_spec()?;
        if self.latent_dim == 0 || self.latent_dim >= spec.ambient_dim {
            return Err(invalid(
                "latent_dim",
                format!("must lie in 1..{} (the ambient dimension)", spec.ambient_dim),
            ));
        }
        let per_node = spec.num_samples / self.nodes.max(1);
        if per_node <= self.latent_dim {
            return Err(invalid(
                "nodes",
                format!(
                    "{} samples over {} nodes leaves {per_node} per node, need more than latent_dim = {}",
                    spec.num_samples, self.nodes, self.latent_dim
                ),
            ));
        }
        Ok(())
    }

    /// Output directory: explicit value, then the environment, then `out`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn parse_scheme(field: &str, name: &str) -> Result<Scheme, CliError> {
    name.parse().map_err(|e| invalid(field, e))
}

pub fn build_graph(field: &str, topology: &str, nodes: usize) -> Result<Graph, CliError> {
    let kind: Topology = topology.parse().map_err(|e| invalid(field, e))?;
    kind.build(nodes).map_err(|e| CliError::Config(e.to_string()))
}
