use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vlnce_core::config::{PlannerKind, PredictorKind, RunConfig};
use vlnce_core::harness;
use vlnce_core::sim::MotionMode;
use vlnce_core::Error;

#[derive(Parser, Debug)]
#[command(name = "vlnce", version, about = "Zero-shot navigation pipeline on synthetic indoor worlds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate worlds, ground-truth graphs, predictor examples and episodes.
    GenData,
    /// Train the waypoint model on the generated examples.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compare predictors on the held-out examples.
    EvalWaypoints,
    /// Run every episode with one planner.
    Run(RunArgs),
    /// Baseline plus runs without VisitInfo, without the graph section and without the mask.
    Ablate(RunArgs),
    /// Summarise one or more run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the summary as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Show an episode, or print the effective configuration.
    Inspect {
        #[arg(long, conflicts_with = "show_config")]
        episode: Option<String>,
        #[arg(long)]
        show_config: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    planner: Option<Planner>,
    #[arg(long)]
    predictor: Option<Predictor>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Run directory name under `<output_dir>/runs`; defaults to the planner name.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Planner {
    Oracle,
    Greedy,
    Scripted,
    Llm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Predictor {
    Geometric,
    Model,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Sliding,
    NoSliding,
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = self.planner {
            cfg.planner.kind = match p {
                Planner::Oracle => PlannerKind::Oracle,
                Planner::Greedy => PlannerKind::Greedy,
                Planner::Scripted => PlannerKind::Scripted,
                Planner::Llm => PlannerKind::Llm,
            };
        }
        if let Some(p) = self.predictor {
            cfg.predictor.kind = match p {
                Predictor::Geometric => PredictorKind::Geometric,
                Predictor::Model => PredictorKind::Model,
            };
        }
        if let Some(m) = self.mode {
            cfg.sim.mode = match m {
                Mode::Sliding => MotionMode::Sliding,
                Mode::NoSliding => MotionMode::NoSliding,
            };
        }
    }

    fn label(&self, cfg: &RunConfig) -> String {
        self.label.clone().unwrap_or_else(|| {
            match cfg.planner.kind {
                PlannerKind::Oracle => "oracle",
                PlannerKind::Greedy => "greedy",
                PlannerKind::Scripted => "scripted",
                PlannerKind::Llm => "llm",
            }
            .to_string()
        })
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::GenData => {
            cfg.validate()?;
            let d = harness::gen_data(&cfg)?;
            println!(
                "{} worlds, {} training examples, {} held-out examples, {} episodes in {}",
                d.worlds.len(),
                d.train.len(),
                d.heldout.len(),
                d.episodes.len(),
                cfg.data_dir().display()
            );
        }
        Command::Train { epochs } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            let t = harness::train_predictor(&cfg)?;
            for (i, l) in t.report.epoch_losses.iter().enumerate() {
                println!("epoch {:>3}  loss {l:.6}", i + 1);
            }
            println!("checkpoint: {}", t.checkpoint.display());
        }
        Command::EvalWaypoints => {
            cfg.validate()?;
            print!("{}", harness::eval_waypoints(&cfg)?.to_table());
        }
        Command::Run(args) => {
            args.apply(&mut cfg);
            cfg.validate()?;
            let out = harness::run(&cfg, &args.label(&cfg))?;
            print!("{}", out.report.to_table());
            println!("logs: {}", out.dir.display());
        }
        Command::Ablate(args) => {
            args.apply(&mut cfg);
            cfg.validate()?;
            print!("{}", harness::ablate(&cfg)?.to_table());
        }
        Command::Report { runs, csv } => {
            let rep = harness::report(&runs)?;
            print!("{}", rep.to_table());
            if let Some(p) = csv {
                std::fs::write(p, rep.to_csv())?;
            }
        }
        Command::Inspect { episode, show_config } => {
            cfg.validate()?;
            match episode {
                Some(id) if !show_config => print!("{}", harness::inspect_episode(&cfg, &id)?),
                _ => print!("{}", cfg.to_toml()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
