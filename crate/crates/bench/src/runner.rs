//! Runs every `(problem, planner, seed)` job of a prepared spec.
//!
//! Jobs may run on several worker threads; a single writer emits records in
//! job order, so the output is byte-identical for any thread count.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use fdit::planner::BatchStatus;
use fdit::{Environment, PlanOutcome, Planner, PlannerConfig, Snapshot};

use crate::error::Result;
use crate::record::{write_record, RunRecord};
use crate::spec::{config_for, PreparedSpec};

/// One planner run.
#[derive(Clone, Debug)]
pub struct Job<'s> {
    pub env_id: &'s str,
    pub env: &'s Environment,
    pub dimension: usize,
    pub planner: &'s str,
    pub config: PlannerConfig,
}

/// Jobs in output order: problem, then planner, then run index.
pub fn jobs(spec: &PreparedSpec) -> Vec<Job<'_>> {
    let mut out = Vec::new();
    for p in &spec.problems {
        for (name, mode) in &spec.planners {
            for run in 0..spec.runs {
                out.push(Job {
                    env_id: &p.problem.env,
                    env: &p.env,
                    dimension: p.problem.dimension,
                    planner: name,
                    config: config_for(
                        &spec.base,
                        *mode,
                        p.problem.time_budget,
                        spec.base_seed + run,
                    ),
                });
            }
        }
    }
    out
}

/// Runs the planner to its budget (or batch limit) and returns the outcome
/// together with a snapshot of the final planner state.
pub fn run_with_snapshot(
    env: &Environment,
    config: &PlannerConfig,
) -> Result<(PlanOutcome, Snapshot)> {
    let mut planner = Planner::new(env, config.clone())?;
    loop {
        let status = planner.run_batch()?;
        let capped = config
            .max_batches
            .is_some_and(|m| planner.stats().batches >= m as u64);
        if status == BatchStatus::OutOfTime || capped {
            break;
        }
    }
    let snapshot = Snapshot::from_planner(&planner);
    Ok((planner.into_outcome(), snapshot))
}

/// Runs all jobs on `threads` workers, writing each record to `out` as soon
/// as every earlier job has been written. `inspect` sees every outcome.
pub fn run_benchmark<W, F>(
    spec: &PreparedSpec,
    threads: usize,
    mut out: W,
    inspect: F,
) -> Result<Vec<RunRecord>>
where
    W: Write,
    F: Fn(&Job<'_>, &PlanOutcome) + Sync,
{
    let jobs = jobs(spec);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let threads = threads.clamp(1, jobs.len().max(1));
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord>)>();

    std::thread::scope(|scope| {
        for _ in 0..threads {
            let tx = tx.clone();
            let (jobs, next, stop, inspect) = (&jobs, &next, &stop, &inspect);
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let result =
                        fdit::plan(job.env, &job.config)
                            .map_err(Into::into)
                            .map(|outcome| {
                                inspect(job, &outcome);
                                RunRecord::from_outcome(
                                    job.planner,
                                    job.env_id,
                                    job.dimension,
                                    job.config.seed,
                                    &outcome,
                                )
                            });
                    if tx.send((i, result)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut records = Vec::with_capacity(jobs.len());
        for (i, result) in rx {
            let record = match result {
                Ok(r) => r,
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            };
            pending.insert(i, record);
            while let Some(r) = pending.remove(&records.len()) {
                if let Err(e) = write_record(&mut out, &r) {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e.into());
                }
                records.push(r);
            }
        }
        Ok(records)
    })
}
