//! Work queue of (n, replica) tasks over a bounded pool with a single
//! aggregator that journals results as they arrive and merges them in task
//! order.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;

use hypermatch_core::rng::substream_seed;

use crate::config::ExperimentConfig;
use crate::error::{HResult, HarnessError};
use crate::experiments;
use crate::plot::emit_plots;
use crate::record::{Checkpoint, RunRecord, TaskResult};

pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub index: usize,
    pub n_index: usize,
    pub replica: usize,
    pub seed: u64,
}

pub fn tasks(cfg: &ExperimentConfig, windows: usize) -> Vec<Task> {
    let mut out = Vec::with_capacity(windows * cfg.replicas);
    for n_index in 0..windows {
        let ns = substream_seed(cfg.seed, n_index as u64);
        for replica in 0..cfg.replicas {
            out.push(Task { index: out.len(), n_index, replica, seed: substream_seed(ns, replica as u64) });
        }
    }
    out
}

#[derive(Debug)]
pub enum RunOutcome {
    Complete(Box<RunRecord>),
    /// `stop_after` was reached; the journal holds `completed` of `total`.
    Interrupted { completed: usize, total: usize },
}

/// Runs the configured experiment, writing `record.json`, `data/*.csv` and
/// `plots/*.svg` under the output directory. Completed tasks found in the
/// journal are not recomputed.
pub fn run(cfg: &ExperimentConfig) -> HResult<RunOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let job = experiments::prepare(cfg)?;
    let all = tasks(cfg, job.windows());
    let total = all.len();
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let hash = cfg.hash();
    let (mut journal, done) = Checkpoint::open(&out.join(CHECKPOINT_FILE), &hash)?;

    let mut results: Vec<Option<TaskResult>> = vec![None; total];
    for t in done {
        if t.index < total {
            let i = t.index;
            results[i] = Some(t);
        }
    }
    let mut pending: Vec<Task> = all.iter().copied().filter(|t| results[t.index].is_none()).collect();
    let interrupted = match cfg.params.stop_after {
        Some(k) if k < pending.len() => {
            pending.truncate(k);
            true
        }
        _ => false,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(Task, HResult<Vec<f64>>)>();
    let mut first_error: Option<HarnessError> = None;
    std::thread::scope(|s| {
        let job = &job;
        let cancel = &cancel;
        let pending = &pending;
        s.spawn(move || {
            pool.install(|| {
                pending.par_iter().for_each_with(tx, |tx, t| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let r = job.run(t);
                    let _ = tx.send((*t, r));
                })
            })
        });
        for (t, r) in rx {
            match r {
                Ok(values) => {
                    let tr = TaskResult { index: t.index, n_index: t.n_index, replica: t.replica, values };
                    if let Err(e) = journal.append(&tr) {
                        first_error.get_or_insert(HarnessError::io(&out.join(CHECKPOINT_FILE), e));
                        cancel.store(true, Ordering::Relaxed);
                    }
                    results[t.index] = Some(tr);
                }
                Err(e) => {
                    cancel.store(true, Ordering::Relaxed);
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    if interrupted {
        let completed = results.iter().filter(|r| r.is_some()).count();
        return Ok(RunOutcome::Interrupted { completed, total });
    }

    let tasks: Vec<TaskResult> = results.into_iter().map(|r| r.expect("every task completed")).collect();
    let tables = job.aggregate(&tasks)?;
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: cfg.clone(),
        tasks,
        tables,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_outputs(&record, out)?;
    Ok(RunOutcome::Complete(Box::new(record)))
}

pub fn write_outputs(record: &RunRecord, out: &Path) -> HResult<()> {
    let data = out.join("data");
    std::fs::create_dir_all(&data).map_err(|e| HarnessError::io(&data, e))?;
    for t in &record.tables {
        let p = data.join(format!("{}.csv", t.name));
        std::fs::write(&p, t.to_csv()).map_err(|e| HarnessError::io(&p, e))?;
    }
    let p = out.join(RECORD_FILE);
    std::fs::write(&p, record.to_json()).map_err(|e| HarnessError::io(&p, e))?;
    write_plots(record, out)
}

pub fn write_plots(record: &RunRecord, out: &Path) -> HResult<()> {
    let plots = emit_plots(record);
    if plots.is_empty() {
        return Ok(());
    }
    let dir = out.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    for (name, svg) in plots {
        let p = dir.join(name);
        std::fs::write(&p, svg).map_err(|e| HarnessError::io(&p, e))?;
    }
    Ok(())
}
