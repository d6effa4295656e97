use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_admm_cli::{cmd_run, cmd_sfm, cmd_sweep, CliError, ExperimentConfig, ERROR_CODE};
use clap::{Args, Parser, Subcommand};

/// Consensus ADMM with adaptive penalties for distributed PPCA.
///
/// Exit status: 0 converged, 2 stopped at max_iterations, 1 error.
#[derive(Parser)]
#[command(version, allow_negative_numbers = true)]
struct Cli {
    /// TOML config; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One synthetic D-PPCA run.
    Run(Common),
    /// Scheme x topology x size grid over many seeds.
    Sweep(SweepArgs),
    /// Distributed affine structure from motion.
    Sfm(SfmArgs),
    /// Print the resolved config as TOML.
    PrintConfig(Common),
}

#[derive(Args, Default)]
#[command(allow_negative_numbers = true)]
struct Common {
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Initialization seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic data seed.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    coupling: Option<String>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    t_reset: Option<usize>,
    /// Run node phases (or sweep cells) on all cores.
    #[arg(long)]
    parallel: bool,
    /// Output directory (else the config, then $ADAPTIVE_ADMM_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    topologies: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    node_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Leave out runs above this max angle (degrees) from the medians.
    #[arg(long)]
    angle_filter: Option<f64>,
    /// Also write a trace and summary per run.
    #[arg(long)]
    write_runs: bool,
}

#[derive(Args)]
struct SfmArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement CSV (2F rows x N points); synthetic scene when omitted.
    #[arg(long)]
    measurements: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.scheme, self.scheme);
        set(&mut cfg.topology, self.topology);
        set(&mut cfg.nodes, self.nodes);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.synthetic.seed, self.data_seed);
        set(&mut cfg.latent_dim, self.latent_dim);
        set(&mut cfg.max_iterations, self.max_iterations);
        set(&mut cfg.convergence_tol, self.tol);
        set(&mut cfg.patience, self.patience);
        set(&mut cfg.coupling, self.coupling);
        set(&mut cfg.penalty.eta0, self.eta0);
        set(&mut cfg.penalty.t_max, self.t_max);
        set(&mut cfg.penalty.t_reset, self.t_reset);
        cfg.parallel |= self.parallel;
        if self.out.is_some() {
            cfg.output_dir = self.out;
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let outcome = match cli.command {
        Command::Run(common) => {
            common.apply(&mut cfg);
            cmd_run(&cfg)?
        }
        Command::Sweep(args) => {
            args.common.apply(&mut cfg);
            let s = &mut cfg.sweep;
            set(&mut s.schemes, args.schemes);
            set(&mut s.topologies, args.topologies);
            set(&mut s.nodes, args.node_counts);
            set(&mut s.seeds, args.seeds);
            if args.angle_filter.is_some() {
                s.angle_filter_deg = args.angle_filter;
            }
            s.write_runs |= args.write_runs;
            cmd_sweep(&cfg)?
        }
        Command::Sfm(mut args) => {
            // network flags describe the camera network here
            set(&mut cfg.sfm.nodes, args.common.nodes.take());
            set(&mut cfg.sfm.topology, args.common.topology.take());
            args.common.apply(&mut cfg);
            if args.measurements.is_some() {
                cfg.sfm.measurements = args.measurements;
            }
            cmd_sfm(&cfg)?
        }
        Command::PrintConfig(common) => {
            common.apply(&mut cfg);
            print!("{}", cfg.to_toml());
            return Ok(0);
        }
    };
    Ok(outcome.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the error status; 2 means max_iterations
            return ExitCode::from(if e.use_stderr() { ERROR_CODE as u8 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ERROR_CODE as u8)
        }
    }
}
