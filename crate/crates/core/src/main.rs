use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uuvsim::cli::{self, CliError, Overrides, PolicySource};

#[derive(Parser, Debug)]
#[command(name = "uuvsim", version, about = "Underwater vehicle simulation and RL benchmark")]
struct Args {
    /// Run config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure batched stepping throughput.
    Bench {
        #[arg(long)]
        envs: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Train a policy with PPO.
    Train,
    /// Record one episode to CSV.
    Rollout {
        /// Checkpoint path, or `pd` for the PD baseline.
        #[arg(long)]
        policy: PolicySource,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Evaluate a checkpoint or the PD baseline.
    Eval {
        /// Checkpoint path, or `pd` for the PD baseline.
        #[arg(long)]
        policy: PolicySource,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    let Some(config) = args.config else {
        return Err(CliError::Config(uuvsim::config::ConfigError::Invalid("--config is required".into())));
    };
    let overrides = Overrides { seed: args.seed, out_dir: args.out, threads: args.threads };
    let cfg = cli::load_config(&config, &overrides)?;
    match args.command {
        Command::Bench { envs, steps } => print(&cli::cmd_bench(&cfg, envs, steps, args.threads)?),
        Command::Train => print(&cli::cmd_train(&cfg)?),
        Command::Rollout { policy, csv } => {
            let rows = cli::cmd_rollout(&cfg, &policy, &csv)?;
            println!("wrote {rows} rows to {}", csv.display());
        }
        Command::Eval { policy, episodes } => print(&cli::cmd_eval(&cfg, &policy, episodes)?),
    }
    Ok(())
}

fn print<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
