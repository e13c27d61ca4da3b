use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stratmed::harness::{
    case_study, distortion_study, parse_pairs, robustness_study, run_pipeline, write_atomic,
    RunConfig, Stage,
};
use stratmed::strat::StratError;
use stratmed::Error;

#[derive(Parser)]
#[command(
    name = "stratmed",
    version,
    about = "Relevance-stratified medication recommendation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    wo_p: bool,
    #[arg(long, global = true)]
    wo_s: bool,
    #[arg(long, global = true)]
    wo_sg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the dataset and interaction files.
    GenData,
    /// Build the relevance buckets.
    Stratify,
    /// Train the entity-level prototype.
    Pretrain,
    /// Train the main model.
    Train,
    /// Run every stage and the bootstrap evaluation.
    Evaluate,
    /// Train/test Jaccard per distortion level, with and without stratification.
    DistortionStudy,
    /// Test Jaccard change after erasing frequent diagnoses and procedures.
    RobustnessStudy,
    /// Relevance matrices and prediction categories for one visit.
    CaseStudy {
        #[arg(long)]
        patient: String,
        /// Zero-based visit index.
        #[arg(long, default_value_t = 0)]
        visit: usize,
    },
}

fn load_config(g: &Global) -> Result<RunConfig, Error> {
    let mut pairs = match &g.config {
        Some(path) => parse_pairs(
            &fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        )?,
        None => Vec::new(),
    };
    for s in &g.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    let mut flag = |k: &str, v: String| pairs.push((k.into(), v));
    if let Some(seed) = g.seed {
        flag("seed", seed.to_string());
    }
    if let Some(out) = &g.out {
        flag("out", out.display().to_string());
    }
    for (on, key) in [
        (g.wo_p, "ablation.wo_p"),
        (g.wo_s, "ablation.wo_s"),
        (g.wo_sg, "ablation.wo_sg"),
    ] {
        if on {
            flag(key, "true".into());
        }
    }
    RunConfig::from_pairs(&pairs)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Strat(StratError::InvalidParams(_)) => 2,
        Error::Data(_) | Error::Strat(_) | Error::Io { .. } | Error::Json(_) => 3,
        _ => 4,
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = load_config(&cli.global)?;
    let out = config.out_dir.clone();
    let stage = match cli.command {
        Command::GenData => Stage::GenData,
        Command::Stratify => Stage::Stratify,
        Command::Pretrain => Stage::Pretrain,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::DistortionStudy => {
            let study = distortion_study(&config)?;
            let path = write_out(&out, "distortion.csv", &study.to_csv())?;
            write_out(
                &out,
                "distortion_cells.json",
                &(serde_json::to_string_pretty(&study.cells)? + "\n"),
            )?;
            print!("{}", study.to_csv());
            eprintln!("wrote {}", path.display());
            return Ok(());
        }
        Command::RobustnessStudy => {
            let study = robustness_study(&config)?;
            let path = write_out(&out, "robustness.csv", &study.to_csv())?;
            write_out(
                &out,
                "robustness_cells.json",
                &(serde_json::to_string_pretty(&study.cells)? + "\n"),
            )?;
            print!("{}", study.to_csv());
            eprintln!("wrote {}", path.display());
            return Ok(());
        }
        Command::CaseStudy { patient, visit } => {
            let run = run_pipeline(&config, Stage::Train)?;
            let model = run.model.expect("train stage ran");
            let case = case_study(&model, &run.dataset, &patient, visit)?;
            let dir = out.join("case").join(format!("{patient}_v{visit}"));
            case.write(&dir)?;
            println!("correct {:?}", case.correct);
            println!("over    {:?}", case.over);
            println!("error   {:?}", case.error);
            eprintln!("wrote {}", dir.display());
            return Ok(());
        }
    };
    let run = run_pipeline(&config, stage)?;
    for s in &run.manifest.stages {
        let status = if s.cache_hit { "cached" } else { "ran" };
        eprintln!("{:<9} {status:<6} {:.2}s", s.stage.name(), s.seconds);
    }
    if let Some(report) = &run.report {
        println!("{}", stratmed::eval::MetricsReport::CSV_HEADER);
        println!("{}", report.csv_row());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
