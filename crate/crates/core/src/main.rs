use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mimicarm::pipeline::{self, PipelineError, RunConfig, StageOutput, TrainIrlOverrides, CONFIG_FILE};
use mimicarm::world::Task;

#[derive(Parser)]
#[command(name = "mimicarm", version, about = "Synthetic demonstrations to cobot trajectories")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration file.
    #[arg(long, short, default_value = CONFIG_FILE)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a default configuration, robot specs and planning scene.
    InitConfig {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
        #[arg(long, default_value = "sorting")]
        task: Task,
        /// Overwrite existing files.
        #[arg(long)]
        force: bool,
    },
    /// Generate training and held-out demonstrations.
    GenDemos(ConfigArg),
    /// Train the keypoint, object, human-IK and restricted-FK models.
    TrainAll(ConfigArg),
    /// Learn a reward and policy from demonstrations (sorting).
    TrainIrl {
        #[command(flatten)]
        c: ConfigArg,
        /// Directory of demonstration files, instead of the run's training set.
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll out, retarget and benchmark against the sampling-based baseline.
    RunPipeline(ConfigArg),
    /// Plan baseline paths only.
    PlanBaseline(ConfigArg),
    /// Behavior agreement and gap-filling errors on held-out demonstrations.
    Eval(ConfigArg),
    /// Summarize everything produced so far into report.md.
    Report(ConfigArg),
}

fn print(so: &StageOutput) {
    for n in &so.notes {
        println!("{n}");
    }
    for p in &so.outputs {
        log::info!("wrote {}", p.display());
    }
}

fn run(cmd: Cmd) -> Result<()> {
    let load = |c: &ConfigArg| RunConfig::load(&c.config);
    match cmd {
        Cmd::InitConfig { dir, task, force } => {
            for p in pipeline::init_config(&dir, task, force)? {
                println!("wrote {}", p.display());
            }
        }
        Cmd::GenDemos(c) => print(&pipeline::gen_demos(&load(&c)?)?),
        Cmd::TrainAll(c) => print(&pipeline::train_all(&load(&c)?)?),
        Cmd::TrainIrl { c, demos, iters, seed } => print(&pipeline::train_irl(&load(&c)?, &TrainIrlOverrides { demos, iters, seed })?),
        Cmd::RunPipeline(c) => print(&pipeline::run_pipeline(&load(&c)?)?),
        Cmd::PlanBaseline(c) => print(&pipeline::plan_baseline(&load(&c)?)?),
        Cmd::Eval(c) => print(&pipeline::eval(&load(&c)?)?.0),
        Cmd::Report(c) => {
            let (_, md) = pipeline::report(&load(&c)?)?;
            print!("{md}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(3, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
