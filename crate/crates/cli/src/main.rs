use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cosml::harness::{
    evaluate, mean_and_ci95, plot, pretrain_stage, run_suite, save_results_csv, train_stage,
    ExperimentConfig, Method, ResultRow,
};
use cosml::metalearn::Checkpoint;
use cosml::ndcore::text::{params_from_text, params_to_text};
use cosml::Error;

#[derive(Parser)]
#[command(
    name = "cosml",
    version,
    about = "Cross-domain few-shot meta-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    holdout: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the feature extractor; writes extractor.txt.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Meta-train one method; writes checkpoint.txt.
    Train {
        #[command(flatten)]
        common: Common,
        /// Extractor from `pretrain`; pre-trains afresh when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a trained checkpoint on novel holdout tasks; writes results.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Leave-one-out sweep over holdouts, methods and seeds; writes results.csv.
    Suite {
        #[command(flatten)]
        common: Common,
    },
    /// Bar chart of a results CSV as SVG.
    Plot {
        /// Results CSV to read.
        csv: PathBuf,
        /// SVG path; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Config file plus command-line overrides, validated.
fn load_config(c: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(h) = c.holdout {
        cfg = cfg.for_holdout(h);
    }
    if let Some(m) = &c.method {
        cfg.method = m.parse::<Method>()?;
    }
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(c: &Common, name: &str) -> std::result::Result<PathBuf, Failure> {
    std::fs::create_dir_all(&c.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", c.out.display())))?;
    Ok(c.out.join(name))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Pretrain { common } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seeds[0];
            let (pre, _) = pretrain_stage(&cfg, seed)?;
            let path = out_file(&common, "extractor.txt")?;
            write(&path, &params_to_text(&pre.phi))?;
            println!(
                "pretrain domain {} accuracy {:.4} -> {}",
                cfg.pretrain_domain_id,
                pre.train_accuracy,
                path.display()
            );
            Ok(())
        }
        Command::Train { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seeds[0];
            let (phi, mut audit) = match checkpoint {
                Some(path) => {
                    let phi = params_from_text::<f64>(&read(&path)?)?;
                    let expected = cfg.manifest()?;
                    if phi.manifest().layer_dims()[..cfg.split_index]
                        != expected.layer_dims()[..cfg.split_index]
                        || phi.layers() != expected.extractor_layers()
                    {
                        return Err(Failure::Config(format!(
                            "{} does not match the configured extractor",
                            path.display()
                        )));
                    }
                    (phi, Default::default())
                }
                None => {
                    let (pre, audit) = pretrain_stage(&cfg, seed)?;
                    (pre.phi, audit)
                }
            };
            let model = train_stage(&cfg, seed, phi, &mut audit)?;
            let leaked = audit.count(cfg.holdout_id);
            if leaked > 0 {
                return Err(Failure::Runtime(format!(
                    "{leaked} holdout examples consumed during training"
                )));
            }
            let path = out_file(&common, "checkpoint.txt")?;
            write(&path, &model.to_text())?;
            println!(
                "{} trained for {} iterations -> {}",
                cfg.method,
                model.state.iteration,
                path.display()
            );
            Ok(())
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seeds[0];
            let model = Checkpoint::<f64>::from_text(&read(&checkpoint)?)?;
            let started = std::time::Instant::now();
            let per_task = evaluate(&cfg, seed, &model)?;
            let (mean, ci) = mean_and_ci95(&per_task);
            let row = ResultRow {
                method: cfg.method,
                holdout_id: cfg.holdout_id,
                seed,
                n_way: cfg.n_way,
                k_shot: cfg.k_shot,
                eval_tasks: cfg.eval_tasks,
                mean_accuracy: Some(mean),
                ci95_halfwidth: Some(ci),
                wall_time_seconds: Some(started.elapsed().as_secs_f64()),
            };
            let path = out_file(&common, "results.csv")?;
            save_results_csv(&path, &[row])?;
            println!(
                "{} holdout {} accuracy {:.4} ± {:.4} -> {}",
                cfg.method,
                cfg.holdout_id,
                mean,
                ci,
                path.display()
            );
            Ok(())
        }
        Command::Suite { common } => {
            let cfg = load_config(&common)?;
            let holdouts: Vec<usize> = match common.holdout {
                Some(h) => vec![h],
                None => cfg.domain_specs.iter().map(|d| d.domain_id).collect(),
            };
            let methods: Vec<Method> = match common.method {
                Some(_) => vec![cfg.method],
                None => Method::ALL.to_vec(),
            };
            let runs = run_suite(&cfg, &holdouts, &methods);
            let rows: Vec<ResultRow> = runs.iter().map(|r| r.row.clone()).collect();
            let path = out_file(&common, "results.csv")?;
            save_results_csv(&path, &rows)?;
            let mut failed = 0;
            for r in &runs {
                match &r.outcome {
                    Ok(res) => println!(
                        "{:<18} holdout {} seed {:<4} {:.4} ± {:.4}",
                        res.method.name(),
                        res.holdout_id,
                        res.seed,
                        res.mean_accuracy,
                        res.ci95_halfwidth
                    ),
                    Err(e) => {
                        failed += 1;
                        eprintln!(
                            "{} holdout {} seed {} failed: {e}",
                            r.row.method, r.row.holdout_id, r.row.seed
                        );
                    }
                }
            }
            println!("{} runs -> {}", runs.len(), path.display());
            if failed > 0 {
                return Err(Failure::Runtime(format!(
                    "{failed} of {} runs failed",
                    runs.len()
                )));
            }
            Ok(())
        }
        Command::Plot { csv, out } => {
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            plot(&csv, &out)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}
