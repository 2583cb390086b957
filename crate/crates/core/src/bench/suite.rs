use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;

use super::{run_instance, BenchConfig, BenchRecord};
use crate::error::{Error, Result};
use crate::instances::rng::hash_parts;
use crate::instances::{generate, ProblemClass};

/// `base_seed ⊕ hash(class, n, p, index)`.
pub fn suite_seed(base_seed: u64, class: ProblemClass, n: usize, p: usize, index: usize) -> u64 {
    base_seed
        ^ hash_parts(&[
            class.tag().as_bytes(),
            &(n as u64).to_le_bytes(),
            &(p as u64).to_le_bytes(),
            &(index as u64).to_le_bytes(),
        ])
}

pub fn instance_id(class: ProblemClass, n: usize, p: usize, index: usize) -> String {
    format!("{class}-{n}x{p}-{index:04}")
}

#[derive(Debug, Clone)]
struct Task {
    id: String,
    class: ProblemClass,
    n: usize,
    p: usize,
    seed: u64,
}

fn tasks(cfg: &BenchConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for &(n, p) in &cfg.pairs {
        for &class in &cfg.classes {
            for index in 0..cfg.instances_per_cell {
                out.push(Task {
                    id: instance_id(class, n, p, index),
                    class,
                    n,
                    p,
                    seed: suite_seed(cfg.base_seed, class, n, p, index),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteSummary {
    pub instances_total: usize,
    /// Instances already complete in the file when resuming.
    pub instances_skipped: usize,
    pub records_written: usize,
    /// Records whose solver status is not `optimal`, over the whole file.
    pub non_optimal: usize,
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Reads a results file. With `lenient`, parsing stops quietly at the first
/// malformed row, which is what an interrupted run leaves behind.
fn read_prefix(path: &Path, lenient: bool) -> Result<Vec<BenchRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        match row {
            Ok(r) => out.push(r),
            Err(_) if lenient => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    read_prefix(path.as_ref(), false)
}

pub fn write_records(path: impl AsRef<Path>, records: &[BenchRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every instance of the suite and writes one record per instance and
/// relaxation to `cfg.output`, in suite order (pair, class, index).
///
/// With `resume`, instances whose records are all present in an existing
/// output file are kept and not rerun; the finished file is identical to the
/// one an uninterrupted run would produce, timing columns aside.
pub fn run_suite(cfg: &BenchConfig, resume: bool) -> Result<SuiteSummary> {
    cfg.validate()?;
    let path = cfg.output.as_path();
    let relaxations = cfg.ordered_relaxations();
    let all = tasks(cfg);

    let mut kept: HashMap<String, Vec<BenchRecord>> = HashMap::new();
    if resume && path.exists() {
        let mut groups: HashMap<String, Vec<BenchRecord>> = HashMap::new();
        for r in read_prefix(path, true)? {
            groups.entry(r.instance_id.clone()).or_default().push(r);
        }
        for task in &all {
            if let Some(recs) = groups.remove(&task.id) {
                let complete = recs.len() == relaxations.len()
                    && recs
                        .iter()
                        .zip(&relaxations)
                        .all(|(r, &rel)| r.relaxation == rel && r.seed == task.seed);
                if complete {
                    kept.insert(task.id.clone(), recs);
                }
            }
        }
    }

    // Rewrite the file with the kept records in suite order; the truncated
    // tail of an interrupted run is dropped here.
    let mut writer = create(path)?;
    let prefix = all.iter().take_while(|t| kept.contains_key(&t.id)).count();
    let mut records_written = 0;
    for task in &all[..prefix] {
        for r in &kept[&task.id] {
            writer.serialize(r)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let todo: Vec<(usize, &Task)> = all
        .iter()
        .enumerate()
        .skip(prefix)
        .filter(|(_, t)| !kept.contains_key(&t.id))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let mut failure: Option<Error> = None;
    let abort = AtomicBool::new(false);
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<Vec<BenchRecord>>)>();
        let todo = &todo;
        let relaxations = &relaxations;
        let abort = &abort;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(pos, task)| {
                    if abort.load(Ordering::Relaxed) {
                        return;
                    }
                    let out = generate(task.class, task.n, task.p, task.seed).and_then(|inst| {
                        run_instance(&inst, &task.id, relaxations, &cfg.solver, &cfg.refine)
                    });
                    // The receiver only hangs up after an error; nothing to do then.
                    let _ = tx.send((pos, out));
                });
            });
        });

        // Emit finished instances in suite order; kept instances beyond the
        // prefix are slotted back in at their position.
        let mut pending: BTreeMap<usize, Vec<BenchRecord>> = BTreeMap::new();
        for (pos, task) in all.iter().enumerate().skip(prefix) {
            if let Some(recs) = kept.get(&task.id) {
                pending.insert(pos, recs.clone());
            }
        }
        let mut next = prefix;
        let mut drain = |pending: &mut BTreeMap<usize, Vec<BenchRecord>>| -> Result<()> {
            while let Some(recs) = pending.remove(&next) {
                for r in &recs {
                    writer.serialize(r)?;
                }
                next += 1;
            }
            writer.flush().map_err(|e| Error::io(path, e))
        };
        let consume = || -> Result<()> {
            drain(&mut pending)?;
            for (pos, out) in rx {
                let recs = out
                    .map_err(|e| Error::Solver(format!("instance {} failed: {e}", all[pos].id)))?;
                records_written += recs.len();
                pending.insert(pos, recs);
                drain(&mut pending)?;
            }
            Ok(())
        };
        if let Err(e) = consume() {
            abort.store(true, Ordering::Relaxed);
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let non_optimal = read_records(path)?
        .iter()
        .filter(|r| !r.is_optimal())
        .count();
    Ok(SuiteSummary {
        instances_total: all.len(),
        instances_skipped: kept.len(),
        records_written,
        non_optimal,
    })
}
