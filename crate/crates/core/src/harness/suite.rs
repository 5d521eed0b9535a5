use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::run::{pretrain_stage, run_pretrained, RunResult};
use crate::error::{Error, Result};

/// Results CSV header, in column order.
pub const CSV_COLUMNS: [&str; 9] = [
    "method",
    "holdout_id",
    "seed",
    "n_way",
    "k_shot",
    "eval_tasks",
    "mean_accuracy",
    "ci95_halfwidth",
    "wall_time_seconds",
];

/// One line of the results CSV. Metrics are empty for a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub holdout_id: usize,
    pub seed: u64,
    pub n_way: usize,
    pub k_shot: usize,
    pub eval_tasks: usize,
    pub mean_accuracy: Option<f64>,
    pub ci95_halfwidth: Option<f64>,
    pub wall_time_seconds: Option<f64>,
}

impl ResultRow {
    fn failed(cfg: &ExperimentConfig, seed: u64) -> Self {
        Self {
            method: cfg.method,
            holdout_id: cfg.holdout_id,
            seed,
            n_way: cfg.n_way,
            k_shot: cfg.k_shot,
            eval_tasks: cfg.eval_tasks,
            mean_accuracy: None,
            ci95_halfwidth: None,
            wall_time_seconds: None,
        }
    }
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        Self {
            method: r.method,
            holdout_id: r.holdout_id,
            seed: r.seed,
            n_way: r.n_way,
            k_shot: r.k_shot,
            eval_tasks: r.eval_tasks,
            mean_accuracy: Some(r.mean_accuracy),
            ci95_halfwidth: Some(r.ci95_halfwidth),
            wall_time_seconds: Some(r.wall_time),
        }
    }
}

/// Outcome of one suite job.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub row: ResultRow,
    pub outcome: std::result::Result<RunResult, String>,
}

impl SuiteRun {
    pub fn result(&self) -> Option<&RunResult> {
        self.outcome.as_ref().ok()
    }
}

/// Leave-one-out sweep: every holdout in `holdouts`, every method and every
/// seed of `base.seeds`. One extractor is pre-trained per (holdout, seed) and
/// shared by all methods; (holdout, seed) groups run in parallel. A failing
/// job yields a row with empty metrics and the sweep carries on.
/// Rows come back ordered by holdout, then method, then seed.
pub fn run_suite(base: &ExperimentConfig, holdouts: &[usize], methods: &[Method]) -> Vec<SuiteRun> {
    let groups: Vec<(usize, u64)> = holdouts
        .iter()
        .flat_map(|&h| base.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let mut runs: Vec<SuiteRun> = groups
        .par_iter()
        .flat_map_iter(|&(holdout, seed)| run_group(&base.for_holdout(holdout), seed, methods))
        .collect();
    let position = |m: Method| methods.iter().position(|&x| x == m);
    let hpos = |h: usize| holdouts.iter().position(|&x| x == h);
    runs.sort_by_key(|r| (hpos(r.row.holdout_id), position(r.row.method), r.row.seed));
    runs
}

fn run_group(cfg: &ExperimentConfig, seed: u64, methods: &[Method]) -> Vec<SuiteRun> {
    let started = Instant::now();
    let pre = pretrain_stage(cfg, seed);
    let pretrain_secs = started.elapsed().as_secs_f64();
    methods
        .iter()
        .map(|&method| {
            let mut cfg = cfg.clone();
            cfg.method = method;
            let outcome = match &pre {
                Ok((outcome, audit)) => {
                    run_pretrained(&cfg, seed, outcome, audit.clone()).map(|mut r| {
                        r.wall_time += pretrain_secs;
                        r
                    })
                }
                Err(e) => Err(Error::Precondition(format!("pre-training failed: {e}"))),
            };
            match outcome {
                Ok(r) => SuiteRun {
                    row: ResultRow::from(&r),
                    outcome: Ok(r),
                },
                Err(e) => SuiteRun {
                    row: ResultRow::failed(&cfg, seed),
                    outcome: Err(e.to_string()),
                },
            }
        })
        .collect()
}

/// Mean accuracy of one (holdout, method) cell over its successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub holdout_id: usize,
    pub seeds: usize,
    pub mean_accuracy: f64,
}

/// Per-cell averages of the successful runs, in first-appearance order.
pub fn aggregate(runs: &[SuiteRun]) -> Vec<Aggregate> {
    let mut cells: Vec<(Method, usize, Vec<f64>)> = Vec::new();
    for r in runs.iter().filter_map(SuiteRun::result) {
        match cells
            .iter_mut()
            .find(|c| c.0 == r.method && c.1 == r.holdout_id)
        {
            Some(c) => c.2.push(r.mean_accuracy),
            None => cells.push((r.method, r.holdout_id, vec![r.mean_accuracy])),
        }
    }
    cells
        .into_iter()
        .map(|(method, holdout_id, means)| Aggregate {
            method,
            holdout_id,
            seeds: means.len(),
            mean_accuracy: means.iter().sum::<f64>() / means.len() as f64,
        })
        .collect()
}

pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_results_csv(File::create(path)?, rows)
}

/// Parses a results CSV; any malformed line is reported with its 1-based line number.
pub fn read_results_csv<R: Read>(mut input: R) -> Result<Vec<ResultRow>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    // Line numbers come from byte offsets: the csv reader does not count blank
    // lines, and a record's offset may point at blank lines before it.
    let line_at = |byte: u64| {
        let bytes = text.as_bytes();
        let mut at = (byte as usize).min(bytes.len());
        while at < bytes.len() && (bytes[at] == b'\n' || bytes[at] == b'\r') {
            at += 1;
        }
        1 + bytes[..at].iter().filter(|&&b| b == b'\n').count()
    };
    let parse_error = |e: &csv::Error, fallback: usize| {
        let line = e.position().map_or(fallback, |p| line_at(p.byte()));
        let msg = match e.kind() {
            csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
            _ => e.to_string(),
        };
        Error::Parse { line, msg }
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| parse_error(&e, 1))?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`", CSV_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match r.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| line_at(p.byte()));
                let row: ResultRow = record
                    .deserialize(Some(&header))
                    .map_err(|e| parse_error(&e, line))?;
                if let Some(m) = row.mean_accuracy {
                    if !(0.0..=1.0).contains(&m) {
                        return Err(Error::Parse {
                            line,
                            msg: format!("mean_accuracy {m} outside [0, 1]"),
                        });
                    }
                }
                rows.push(row);
            }
            Err(e) => return Err(parse_error(&e, 0)),
        }
    }
    Ok(rows)
}

pub fn load_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_results_csv(File::open(path)?)
}
