//! Single runs, sweeps and structure-from-motion runs.

use std::path::Path;

use adaptive_admm::data::{generate_affine, generate_synthetic, partition_even, MeasurementMatrix};
use adaptive_admm::metrics::{aggregate, run_report, BatchSummary, RunSummary};
use adaptive_admm::ppca::{DppcaNode, PpcaParams};
use adaptive_admm::{run, ConsensusModel, Graph, IterationRecord, RunConfig, RunOutput, Scheme};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_graph, parse_scheme, ExperimentConfig};
use crate::measurements::load_measurements;
use crate::output::{write_json, write_trace};
use crate::CliError;

/// Latent dimension of affine structure from motion.
pub const SFM_LATENT_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummaryJson {
    pub scheme: String,
    pub topology: String,
    pub nodes: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub max_angle_deg: f64,
    pub per_node_angle_deg: Vec<f64>,
    /// `ground_truth` for synthetic data, `svd_oracle` for SfM.
    pub reference: &'static str,
    pub final_objective: f64,
    /// Largest budget ceiling over all directed edges.
    pub max_ceiling: f64,
    pub budget_ceilings: Vec<f64>,
    pub final_etas: Vec<f64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummaryJson,
}

impl RunArtifacts {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_trace(&dir.join("trace.csv"), &self.records)?;
        write_json(&dir.join("summary.json"), &self.summary)
    }
}

/// One node model per shard, initialized in node order from one seeded stream.
pub fn init_nodes(shards: Vec<DMatrix<f64>>, latent_dim: usize, seed: u64) -> Result<Vec<DppcaNode>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shards
        .into_iter()
        .map(|x| {
            let init = PpcaParams::random_init(&x, latent_dim, &mut rng);
            DppcaNode::new(x, init).map_err(|e| CliError::Model(e.to_string()))
        })
        .collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    topology: &str,
    nodes: usize,
    out: RunOutput<DppcaNode>,
    reference: &DMatrix<f64>,
    reference_kind: &'static str,
) -> Result<RunArtifacts, CliError> {
    let bases: Vec<_> = out.models.iter().map(|m| m.params().w.clone()).collect();
    let report: RunSummary =
        run_report(&out.records, &bases, reference).map_err(|e| CliError::Model(e.to_string()))?;
    let edges = out.edges.iter().flatten();
    let budget_ceilings: Vec<f64> = edges.clone().map(|e| e.ceiling).collect();
    let summary = RunSummaryJson {
        scheme: cfg.scheme.clone(),
        topology: topology.to_owned(),
        nodes,
        seed: cfg.seed,
        iterations: report.iterations,
        converged: report.converged,
        max_angle_deg: report.max_angle_deg,
        per_node_angle_deg: report.per_node_angle_deg,
        reference: reference_kind,
        final_objective: out.records.last().map_or(f64::NAN, |r| r.objective),
        max_ceiling: budget_ceilings.iter().copied().fold(0.0, f64::max),
        budget_ceilings,
        final_etas: edges.map(|e| e.eta).collect(),
        config: cfg.clone(),
    };
    Ok(RunArtifacts {
        records: out.records,
        summary,
    })
}

fn execute(config: &RunConfig, graph: &Graph, nodes: Vec<DppcaNode>) -> Result<RunOutput<DppcaNode>, CliError> {
    run(config, graph, nodes).map_err(CliError::Run)
}

/// D-PPCA on the synthetic subspace data, scored against the true basis.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    cfg.validate_synthetic()?;
    let scheme = cfg.scheme()?;
    let graph = cfg.graph()?;
    let data = generate_synthetic(&cfg.synthetic_spec()?).map_err(|e| CliError::Model(e.to_string()))?;
    let shards = partition_even(&data.x, cfg.nodes).map_err(|e| CliError::Model(e.to_string()))?;
    let nodes = init_nodes(shards, cfg.latent_dim, cfg.seed)?;
    let out = execute(&cfg.run_config(scheme)?, &graph, nodes)?;
    summarize(cfg, &cfg.topology, cfg.nodes, out, &data.w_true, "ground_truth")
}

/// The measurement matrix named in the config, or the synthetic scene.
pub fn sfm_measurements(cfg: &ExperimentConfig) -> Result<MeasurementMatrix, CliError> {
    match &cfg.sfm.measurements {
        Some(path) => load_measurements(path),
        None => generate_affine(&cfg.affine_spec()).map_err(|e| CliError::Config(format!("invalid `affine`: {e}"))),
    }
}

/// D-PPCA over frame shards with `M = 3`, scored against the rank-3 SVD of
/// the full matrix.
pub fn run_sfm(cfg: &ExperimentConfig, m: &MeasurementMatrix) -> Result<RunArtifacts, CliError> {
    let scheme = cfg.scheme()?;
    let run_cfg = cfg.run_config(scheme)?;
    let graph = build_graph("sfm.topology", &cfg.sfm.topology, cfg.sfm.nodes)?;
    let shards = m
        .partition_frames(cfg.sfm.nodes)
        .map_err(|e| CliError::Config(format!("invalid `sfm.nodes`: {e}")))?;
    if m.points() <= SFM_LATENT_DIM {
        return Err(CliError::Config(format!(
            "measurements need more than {SFM_LATENT_DIM} points, got {}",
            m.points()
        )));
    }
    let nodes = init_nodes(shards, SFM_LATENT_DIM, cfg.seed)?;
    let out = execute(&run_cfg, &graph, nodes)?;
    let oracle = m.structure_basis(SFM_LATENT_DIM);
    summarize(cfg, &cfg.sfm.topology, cfg.sfm.nodes, out, &oracle, "svd_oracle")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub max_angle_deg: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub scheme: String,
    pub topology: String,
    pub nodes: usize,
    pub runs: usize,
    pub kept: usize,
    pub failed: usize,
    pub converged_runs: usize,
    pub median_iterations: Option<usize>,
    pub median_angle_deg: Option<f64>,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub config: ExperimentConfig,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "scheme",
    "topology",
    "nodes",
    "runs",
    "kept",
    "failed",
    "converged_runs",
    "median_iterations",
    "median_angle_deg",
];

impl SweepReport {
    pub fn table_csv(&self) -> String {
        let mut out = SWEEP_HEADER.join(",");
        out.push('\n');
        for c in &self.cells {
            let row = [
                c.scheme.clone(),
                c.topology.clone(),
                c.nodes.to_string(),
                c.runs.to_string(),
                c.kept.to_string(),
                c.failed.to_string(),
                c.converged_runs.to_string(),
                c.median_iterations.map_or_else(String::new, |v| v.to_string()),
                c.median_angle_deg.map_or_else(String::new, crate::output::sig12),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, scheme: Scheme, topology: &str, nodes: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme.name() && c.topology == topology && c.nodes == nodes)
    }
}

/// Config of one run of the sweep grid.
fn cell_config(base: &ExperimentConfig, scheme: &str, topology: &str, nodes: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        scheme: scheme.to_owned(),
        topology: topology.to_owned(),
        nodes,
        seed,
        // the grid itself is the parallel unit
        parallel: false,
        ..base.clone()
    }
}

/// Runs every scheme x topology x size cell over all seeds. A failing run is
/// recorded in its cell and the sweep carries on. Per-run artifacts go to
/// `runs_dir` when given.
pub fn sweep(cfg: &ExperimentConfig, runs_dir: Option<&Path>) -> Result<SweepReport, CliError> {
    let s = &cfg.sweep;
    for (field, empty) in [
        ("sweep.schemes", s.schemes.is_empty()),
        ("sweep.topologies", s.topologies.is_empty()),
        ("sweep.nodes", s.nodes.is_empty()),
        ("sweep.seeds", s.seeds.is_empty()),
    ] {
        if empty {
            return Err(CliError::Config(format!("`{field}` must not be empty")));
        }
    }
    let mut cells = Vec::new();
    for scheme in &s.schemes {
        parse_scheme("sweep.schemes", scheme)?;
        for topology in &s.topologies {
            for &nodes in &s.nodes {
                build_graph("sweep.topologies", topology, nodes)?;
                cell_config(cfg, scheme, topology, nodes, 0).validate_synthetic()?;
                cells.push((scheme.clone(), topology.clone(), nodes));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| s.seeds.iter().map(move |&seed| (c, seed)))
        .collect();
    let job = |&(c, seed): &(usize, u64)| -> Result<SeedResult, CliError> {
        let (scheme, topology, nodes) = &cells[c];
        let run_cfg = cell_config(cfg, scheme, topology, *nodes, seed);
        Ok(match run_synthetic(&run_cfg) {
            Ok(art) => {
                if let Some(dir) = runs_dir {
                    art.write(&dir.join(format!("{scheme}_{topology}_{nodes}_seed{seed}")))?;
                }
                SeedResult {
                    seed,
                    iterations: Some(art.summary.iterations),
                    converged: Some(art.summary.converged),
                    max_angle_deg: Some(art.summary.max_angle_deg),
                    error: None,
                }
            }
            Err(e) => SeedResult {
                seed,
                iterations: None,
                converged: None,
                max_angle_deg: None,
                error: Some(e.to_string()),
            },
        })
    };
    let results: Vec<SeedResult> = if cfg.parallel {
        jobs.par_iter().map(job).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(job).collect::<Result<_, _>>()?
    };

    let report_cells = cells
        .iter()
        .zip(results.chunks(s.seeds.len()))
        .map(|((scheme, topology, nodes), seeds)| {
            let ok: Vec<RunSummary> = seeds
                .iter()
                .filter_map(|r| {
                    Some(RunSummary {
                        iterations: r.iterations?,
                        converged: r.converged?,
                        max_angle_deg: r.max_angle_deg?,
                        per_node_angle_deg: Vec::new(),
                    })
                })
                .collect();
            let batch: BatchSummary = aggregate(&ok, s.angle_filter_deg);
            SweepCell {
                scheme: scheme.clone(),
                topology: topology.clone(),
                nodes: *nodes,
                runs: seeds.len(),
                kept: batch.kept,
                failed: seeds.len() - ok.len(),
                converged_runs: ok.iter().filter(|r| r.converged).count(),
                median_iterations: batch.median_iterations,
                median_angle_deg: batch.median_angle_deg,
                seeds: seeds.to_vec(),
            }
        })
        .collect();
    Ok(SweepReport {
        cells: report_cells,
        config: cfg.clone(),
    })
}
