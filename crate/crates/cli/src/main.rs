//! `bcm`: simulate bounded-confidence opinion dynamics and recover their
//! parameters.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 acceptance
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bcm_cli::runner::{self, FitOptions};
use bcm_cli::spec::ExperimentSpec;
use bcm_core::abm::{self, LatentParams, ModelConfig, Variant};
use bcm_core::exec::{Deadline, ExecMode};
use bcm_core::rng::{stable_hash, stream_rng};
use bcm_core::svi::Method;
use rand::Rng;

#[derive(Parser)]
#[command(
    name = "bcm",
    about = "Bounded-confidence opinion dynamics: simulation and parameter inference",
    version
)]
struct Cli {
    /// Worker threads for data-parallel stages (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    parallelism: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model and write the trajectory file.
    Simulate(SimulateArgs),
    /// Fit one inference method to a trajectory file.
    Fit(FitArgs),
    /// Run a grid of experiments from a TOML spec.
    Grid(GridArgs),
    /// Run the acceptance suite (exit 3 on any failing criterion).
    Check(CheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model variant: bcmb, bcms, bcmi, bcmu, bcmg.
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value_t = 100)]
    n_agents: u32,
    #[arg(long, default_value_t = 512)]
    n_steps: u32,
    #[arg(long, default_value_t = 10)]
    interactions_per_step: u32,
    #[arg(long, default_value_t = 0.02)]
    mu_plus: f64,
    #[arg(long, default_value_t = 0.02)]
    mu_minus: f64,
    #[arg(long, default_value_t = 0.25)]
    eps_plus: f64,
    #[arg(long, default_value_t = 0.75)]
    eps_minus: f64,
    /// Leader thresholds (bcms).
    #[arg(long)]
    eps_plus_leader: Option<f64>,
    #[arg(long)]
    eps_minus_leader: Option<f64>,
    /// Leader fraction used to draw roles (bcms).
    #[arg(long, default_value_t = 0.2)]
    leader_frac: f64,
    /// Feed length F (bcmi).
    #[arg(long)]
    feed_len: Option<u32>,
    /// Attention depth K (bcmi).
    #[arg(long)]
    k_attend: Option<u32>,
    /// Backfire switch (bcmu).
    #[arg(long)]
    backfire: Option<bool>,
    /// Probability of update dynamics (bcmg).
    #[arg(long)]
    xi: Option<f64>,
    /// Rewiring threshold (bcmg).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    graph_density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trajectory file (line-delimited JSON).
    #[arg(long, default_value = "trajectory.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input trajectory file.
    #[arg(long)]
    traj: PathBuf,
    /// Inference method: svi, hmc, abc.
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds (0 = none).
    #[arg(long, default_value_t = 0.0)]
    time_limit: f64,
    /// Posterior samples to draw.
    #[arg(long, default_value_t = 200)]
    posterior_samples: usize,
    /// Posterior CSV output.
    #[arg(long, default_value = "posterior.csv")]
    out: PathBuf,
    // SVI knobs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    minibatch: Option<usize>,
    /// ELBO trace CSV (svi).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    // HMC knobs.
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    hmc_samples: Option<usize>,
    #[arg(long)]
    leapfrog: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    /// Chain dump CSV (hmc).
    #[arg(long)]
    chain_out: Option<PathBuf>,
    // ABC knobs.
    #[arg(long)]
    n_sims: Option<usize>,
    #[arg(long)]
    leader_frac: Option<f64>,
    /// Accepted-draws CSV (abc).
    #[arg(long)]
    accepted_out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Override the spec's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the spec's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec's per-method time limit (seconds).
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    /// Comma-separated criterion numbers (default: all).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<usize>,
    /// List criteria without running them.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    #[cfg(feature = "parallel")]
    if cli.parallelism > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.parallelism)
            .build_global()
        {
            log::warn!("could not configure thread pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Check(args) => return cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut config = ModelConfig::new(args.variant, args.n_agents, args.n_steps, args.seed)
        .with_mu(args.mu_plus, args.mu_minus)
        .with_interactions_per_step(args.interactions_per_step);
    let latents = match args.variant {
        Variant::Bcmb => LatentParams::bcmb(args.eps_plus, args.eps_minus),
        Variant::Bcms => {
            let mut rng = stream_rng(stable_hash(&[args.seed, 77]), 0);
            let roles = (0..args.n_agents)
                .map(|_| rng.random::<f64>() < args.leader_frac)
                .collect();
            LatentParams::bcms(
                (
                    args.eps_plus,
                    args.eps_plus_leader.unwrap_or(args.eps_plus / 2.0),
                    args.eps_minus,
                    args.eps_minus_leader
                        .unwrap_or(args.eps_minus + (1.0 - args.eps_minus) / 2.0),
                ),
                roles,
            )
        }
        Variant::Bcmi => {
            let f = args.feed_len.unwrap_or(5);
            config = config.with_feed_len(f);
            LatentParams::bcmi(args.eps_plus, args.eps_minus, args.k_attend.unwrap_or(1))
        }
        Variant::Bcmu => LatentParams::bcmu(
            args.eps_plus,
            args.eps_minus,
            args.backfire.unwrap_or(true),
        ),
        Variant::Bcmg => {
            config = config.with_xi(args.xi.unwrap_or(0.5));
            config.graph_density = Some(args.graph_density);
            LatentParams::bcmg(args.eps_plus, args.eps_minus, args.gamma.unwrap_or(0.4))
        }
    };
    let traj = abm::simulate(&config, &latents)?;
    abm::write_trajectory_file(&args.out, &traj)?;
    println!(
        "wrote {} ({} events)",
        args.out.display(),
        traj.events.len()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> anyhow::Result<()> {
    let traj = abm::read_trajectory_file(&args.traj)?;
    let mut opts = FitOptions::new(args.method, args.seed);
    if args.time_limit > 0.0 {
        opts.deadline = Some(Deadline::after_secs(args.time_limit));
    }
    opts.n_posterior = args.posterior_samples;
    if let Some(v) = args.epochs {
        opts.svi.n_epochs = v;
    }
    if let Some(v) = args.learning_rate {
        opts.svi.learning_rate = v;
    }
    opts.svi.minibatch_events = args.minibatch;
    if let Some(v) = args.burnin {
        opts.hmc.n_burnin = v;
    }
    if let Some(v) = args.hmc_samples {
        opts.hmc.n_samples = v;
    }
    if let Some(v) = args.leapfrog {
        opts.hmc.n_leapfrog = v;
    }
    if let Some(v) = args.step_size {
        opts.hmc.step_size = v;
    }
    if let Some(v) = args.n_sims {
        opts.abc.n_sims = v;
    }
    if let Some(v) = args.leader_frac {
        opts.abc.leader_frac = v;
    }

    let out = runner::run_fit(&traj, &opts)?;
    bcm_cli::write_posterior_csv(std::fs::File::create(&args.out)?, &out.samples)?;
    println!("wrote {}", args.out.display());

    if let (Some(path), Some(trace)) = (&args.trace_out, &out.elbo_trace) {
        bcm_core::svi::write_elbo_trace(std::fs::File::create(path)?, trace)?;
        println!("wrote {}", path.display());
    }
    if let (Some(path), Some(chain)) = (&args.chain_out, &out.chain) {
        bcm_core::mcmc::write_chain_csv(std::fs::File::create(path)?, chain)?;
        println!("wrote {}", path.display());
    }
    if let (Some(path), Some(abc)) = (&args.accepted_out, &out.abc) {
        bcm_core::abc::write_accepted_csv(std::fs::File::create(path)?, abc)?;
        println!("wrote {}", path.display());
    }

    // Posterior-mean summary on stdout.
    let mean = bcm_core::metrics::posterior_mean(&out.samples)?;
    for (name, value) in bcm_cli::flatten_params(&mean).iter().take(8) {
        println!("  {name} = {value:.4}");
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> anyhow::Result<()> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    if let Some(out) = args.out {
        spec.out_dir = out;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(limit) = args.time_limit {
        spec.time_limit_seconds = limit;
    }
    let output = runner::run_grid(&spec, ExecMode::Parallel)?;
    println!(
        "grid complete: {} units run, {} skipped, {} rows -> {}",
        output.executed_units,
        output.skipped_units,
        output.rows.len(),
        output.results_path.display()
    );
    for p in &output.plot_files {
        println!("  plot: {}", p.display());
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> ExitCode {
    if args.list {
        for c in bcm_cli::check::all_criteria() {
            println!("{:2}  {}", c.0, c.1);
        }
        return ExitCode::SUCCESS;
    }
    let ids = if args.criteria.is_empty() {
        None
    } else {
        Some(args.criteria)
    };
    let outcomes = bcm_cli::check::run(ids);
    let mut all_ok = true;
    for o in &outcomes {
        println!("{}", o.report_line());
        all_ok &= o.passed;
    }
    if all_ok {
        println!("acceptance: all {} criteria passed", outcomes.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILURES present");
        ExitCode::from(3)
    }
}
