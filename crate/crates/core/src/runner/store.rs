//! On-disk result store.
//!
//! A run directory holds `results.jsonl` (one [`UniverseResult`] per line,
//! sorted by id), its flat projection `results.csv`, `meta.json` describing
//! the spaces, and `timings.jsonl` with wall times. While a run is in
//! progress each worker appends to its own file under `shards/`; finishing
//! merges the shards into the sorted files and removes them. An interrupted
//! run leaves its shards behind and the next run picks them up.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ErrorCode, Status, UniverseResult};
use crate::decision_space::DecisionSpace;
use crate::error::{Error, Result};
use crate::importance::ResponseTable;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const CSV_FILE: &str = "results.csv";
pub const META_FILE: &str = "meta.json";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const SHARD_DIR: &str = "shards";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyInfo {
    pub id: String,
    pub assignments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub design: DecisionSpace,
    pub eval: DecisionSpace,
    /// Evaluation strategies in grid order; every result lists its
    /// strategy entries in this order.
    pub strategies: Vec<StrategyInfo>,
    pub global_seed: u64,
    pub test_fraction: f64,
    pub universes: usize,
    pub ok: usize,
    pub errors: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardLine {
    result: UniverseResult,
    wall_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingLine {
    id: String,
    wall_ms: u64,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Store(format!("{}: {e}", path.display()))
}

/// One append-only file per worker; a record is written with a single
/// call and flushed, so records never interleave and a crash loses at most
/// the line being written.
pub(super) struct ShardWriter {
    files: Vec<Mutex<File>>,
}

impl ShardWriter {
    pub(super) fn open(dir: &Path, workers: usize) -> Result<ShardWriter> {
        let shard_dir = dir.join(SHARD_DIR);
        fs::create_dir_all(&shard_dir)?;
        let files = (0..workers)
            .map(|i| {
                let path = shard_dir.join(format!("shard-{i:03}.jsonl"));
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map(Mutex::new)
                    .map_err(|e| store_err(&path, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShardWriter { files })
    }

    pub(super) fn append(&self, worker: usize, result: &UniverseResult, wall_ms: u64) -> Result<()> {
        let mut line = serde_json::to_string(&ShardLine { result: result.clone(), wall_ms })?;
        line.push('\n');
        let mut file = self.files[worker % self.files.len()].lock().expect("shard lock poisoned");
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

/// Everything persisted so far: finished results plus leftover shards.
#[derive(Debug, Default)]
pub(super) struct Persisted {
    pub results: BTreeMap<String, UniverseResult>,
    pub timings: BTreeMap<String, u64>,
}

pub(super) fn load_persisted(dir: &Path) -> Result<Persisted> {
    let mut out = Persisted::default();
    let results = dir.join(RESULTS_FILE);
    if results.exists() {
        for r in read_results(&results)? {
            out.results.entry(r.id.clone()).or_insert(r);
        }
    }
    let timings = dir.join(TIMINGS_FILE);
    if timings.exists() {
        for line in read_lines(&timings)? {
            if let Ok(t) = serde_json::from_str::<TimingLine>(&line) {
                out.timings.insert(t.id, t.wall_ms);
            }
        }
    }
    let shard_dir = dir.join(SHARD_DIR);
    if shard_dir.exists() {
        let mut shards: Vec<PathBuf> = fs::read_dir(&shard_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        shards.sort();
        for path in shards {
            let lines = read_lines(&path)?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                match serde_json::from_str::<ShardLine>(line) {
                    Ok(s) => {
                        out.timings.entry(s.result.id.clone()).or_insert(s.wall_ms);
                        out.results.entry(s.result.id.clone()).or_insert(s.result);
                    }
                    // a crash can cut the final record short; it is rerun
                    Err(_) if i == last => {}
                    Err(e) => return Err(store_err(&path, format!("line {}: {e}", i + 1))),
                }
            }
        }
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| store_err(path, e))?;
    BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| store_err(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<UniverseResult>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| store_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| store_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| store_err(path, e))?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per (universe, strategy).
pub fn csv_projection(meta: &StoreMeta, results: &[UniverseResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["universe_id".to_string()];
    header.extend(meta.design.decisions().iter().map(|d| d.name.clone()));
    header.extend(meta.eval.decisions().iter().map(|d| d.name.clone()));
    header.extend(["eq_odds_diff", "f1", "accuracy", "balanced_accuracy", "status"].map(String::from));
    w.write_record(&header)?;
    for r in results {
        if r.evals.len() != meta.strategies.len() {
            return Err(Error::Store(format!(
                "universe {} has {} strategy entries, expected {}",
                r.id,
                r.evals.len(),
                meta.strategies.len()
            )));
        }
        for (e, s) in r.evals.iter().zip(&meta.strategies) {
            let mut row = vec![r.id.clone()];
            for d in meta.design.decisions() {
                row.push(r.options.get(&d.name).cloned().unwrap_or_default());
            }
            for d in meta.eval.decisions() {
                row.push(s.assignments.get(&d.name).cloned().unwrap_or_default());
            }
            row.extend([cell(e.eq_odds_diff), cell(e.f1), cell(e.accuracy), cell(e.balanced_accuracy)]);
            row.push(e.status.token().to_string());
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Store(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the sorted store files and removes the shards.
pub(super) fn finalize(dir: &Path, mut meta: StoreMeta, persisted: &Persisted) -> Result<()> {
    let results: Vec<UniverseResult> = persisted.results.values().cloned().collect();
    meta.universes = results.len();
    meta.ok = results.iter().filter(|r| r.status.is_ok()).count();
    meta.errors = meta.universes - meta.ok;
    let mut jsonl = String::new();
    for r in &results {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let mut timings = String::new();
    for (id, wall_ms) in &persisted.timings {
        timings.push_str(&serde_json::to_string(&TimingLine { id: id.clone(), wall_ms: *wall_ms })?);
        timings.push('\n');
    }
    write_atomic(&dir.join(RESULTS_FILE), jsonl.as_bytes())?;
    write_atomic(&dir.join(CSV_FILE), csv_projection(&meta, &results)?.as_bytes())?;
    write_atomic(&dir.join(META_FILE), (serde_json::to_string_pretty(&meta)? + "\n").as_bytes())?;
    write_atomic(&dir.join(TIMINGS_FILE), timings.as_bytes())?;
    let shards = dir.join(SHARD_DIR);
    if shards.exists() {
        fs::remove_dir_all(&shards).map_err(|e| store_err(&shards, e))?;
    }
    Ok(())
}

/// A finished run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultStore {
    pub meta: StoreMeta,
    /// Sorted by universe id.
    pub results: Vec<UniverseResult>,
}

impl ResultStore {
    pub fn load(dir: &Path) -> Result<ResultStore> {
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| store_err(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_str(&text).map_err(|e| store_err(&meta_path, e))?;
        let results = read_results(&dir.join(RESULTS_FILE))?;
        if results.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::Store(format!("{}: results are not sorted by unique id", dir.display())));
        }
        for r in &results {
            if r.evals.len() != meta.strategies.len() {
                return Err(Error::Store(format!("universe {} has {} strategy entries", r.id, r.evals.len())));
            }
        }
        Ok(ResultStore { meta, results })
    }

    pub fn ok(&self) -> impl Iterator<Item = &UniverseResult> {
        self.results.iter().filter(|r| r.status.is_ok())
    }

    /// Study fairness metric of every ok universe, keyed by design option
    /// indices.
    pub fn response_table(&self) -> Result<ResponseTable> {
        let mut table = ResponseTable::new(&self.meta.design);
        for r in self.ok() {
            let Some(v) = r.eq_odds_diff else { continue };
            let indices = self
                .meta
                .design
                .decisions()
                .iter()
                .map(|d| {
                    r.options
                        .get(&d.name)
                        .and_then(|o| d.option_index(o))
                        .ok_or_else(|| Error::Store(format!("universe {} lacks a valid `{}` option", r.id, d.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(&indices, v)?;
        }
        Ok(table)
    }

    pub fn status_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.results {
            *out.entry(r.status.token().to_string()).or_insert(0) += 1;
        }
        out
    }

    pub fn error_count(&self, code: ErrorCode) -> usize {
        self.results.iter().filter(|r| matches!(&r.status, Status::Error { code: c, .. } if *c == code)).count()
    }
}
