use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedgraph_core::experiment::{
    cmd_bench, cmd_eval, cmd_partition, cmd_train, cmd_train_drl, write_bench, RunConfig, RunMode,
};
use fedgraph_core::Error;

#[derive(Parser)]
#[command(name = "fedgraph", version, about = "Federated GCN simulator with a DDPG sampling controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides every seed (partition, training, controller).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per client).
    #[arg(long)]
    workers: Option<usize>,
    /// Sampler mode, e.g. fedgraph_fixed, full_batch, nonshare.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Partition the graph and write `partition.bin`.
    Partition(Common),
    /// Fixed-policy or baseline training.
    Train(Common),
    /// Train the sampling controller online.
    TrainDrl(Common),
    /// Test accuracy of a weight checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Time-to-accuracy across samplers and heterogeneity levels.
    Bench(Common),
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.reseed(seed);
    }
    if let Some(out) = &c.out {
        cfg.run.out_dir = out.clone();
    }
    if let Some(w) = c.workers {
        cfg.run.workers = w;
    }
    if let Some(m) = &c.mode {
        cfg.run.mode = RunMode::parse(m)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Partition(c) => {
            let cfg = load(&c)?;
            let path = cfg.run.out_dir.join("partition.bin");
            let summary = cmd_partition(&cfg, &path)?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let out = cmd_train(&cfg)?;
            if let Some(last) = out.records.last() {
                println!("final accuracy {:.4} after {} rounds", last.lambda, out.records.len());
            }
            println!("wrote {} and {}", out.metrics.display(), out.checkpoint.display());
        }
        Command::TrainDrl(c) => {
            let cfg = load(&c)?;
            let out = cmd_train_drl(&cfg)?;
            for (ep, r) in out.returns.iter().enumerate() {
                println!("episode {ep}: return {r:.4}");
            }
            println!(
                "wrote {}, {} and {}",
                out.metrics.display(),
                out.returns_csv.display(),
                out.checkpoint.display()
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load(&common)?;
            if !checkpoint.is_file() {
                return Err(Error::Config(format!("checkpoint {} does not exist", checkpoint.display())));
            }
            let acc = cmd_eval(&cfg, &checkpoint)?;
            println!("accuracy {acc:.6}");
        }
        Command::Bench(c) => {
            let cfg = load(&c)?;
            let rows = cmd_bench(&cfg)?;
            std::fs::create_dir_all(&cfg.run.out_dir)?;
            let path = cfg.run.out_dir.join("bench.csv");
            write_bench(&rows, BufWriter::new(File::create(&path)?))?;
            write_bench(&rows, std::io::stdout())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Precondition(_) | Error::Ingest { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEDGRAPH_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
