//! Command line front end. Results go to stdout as JSON; failures go to
//! stderr as a JSON object with an exit code of 2 (usage), 3 (data, store or
//! manifest) or 4 (analysis).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::data::GeneratorSpec;
use crate::error::{Error, Result};
use crate::fairness::enumerate_eval_strategies;
use crate::importance::{ForestConfig, ImportanceReport};
use crate::report::{export_explorer_bundle, summarize};
use crate::robustness::{subsample_stability, StabilityConfig};
use crate::runner::{
    replicate, run_multiverse_in, store_importance, DocRef, ImportanceMethod, ResultStore, RunContext, RunManifest,
    RunOptions, SyntheticData,
};

pub const IMPORTANCE_FILE: &str = "importance.json";
pub const STABILITY_FILE: &str = "stability.csv";
pub const BUNDLE_FILE: &str = "explorer.json";

#[derive(Debug, Parser)]
#[command(name = "multiverse", version, about = "Multiverse analysis of fairness decisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an example manifest, decision spaces and data generator spec.
    Init {
        /// Target directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Rows of synthetic data.
        #[arg(long, default_value_t = 5000)]
        rows: usize,
    },
    /// Print grid sizes without running anything.
    Enumerate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        sample_fraction: Option<f64>,
    },
    /// Run every universe of the manifest, resuming a partial store.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Stop after this many new universes.
        #[arg(long)]
        max_new: Option<usize>,
    },
    /// Decision importance of a store's fairness metric.
    Importance {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Report file; defaults to importance.json in the store.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement of importances from row subsamples with the full store.
    Stability {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10, 0.20])]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        repetitions: usize,
        /// CSV file; defaults to stability.csv in the store.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full runs under several global seeds and their importance agreement.
    Replicate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Global seeds; defaults to the manifest's replication seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Summary statistics of a store.
    Summarize {
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Write the explorer bundle.
    Export {
        #[command(flatten)]
        store: StoreArgs,
        /// Importance report to include; defaults to importance.json in the
        /// store when present.
        #[arg(long)]
        importance: Option<PathBuf>,
        /// Bundle file; defaults to explorer.json in the store.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Run directory; defaults to the manifest's output directory.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    Forest,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Seed of the forest and of subsampling.
    #[arg(id = "analysis_seed", long = "analysis-seed", default_value_t = 0)]
    seed: u64,
}

impl AnalysisArgs {
    fn method(&self) -> ImportanceMethod {
        match self.method {
            MethodArg::Auto => ImportanceMethod::Auto,
            MethodArg::Exact => ImportanceMethod::Exact,
            MethodArg::Forest => ImportanceMethod::Forest,
        }
    }

    fn forest(&self) -> ForestConfig {
        ForestConfig { trees: self.trees, seed: self.seed, max_order: self.max_order, ..ForestConfig::default() }
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    Ok(if path.is_absolute() { path.to_path_buf() } else { std::env::current_dir()?.join(path) })
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = RunManifest::load(&self.manifest)?;
        if let Some(seed) = self.seed {
            m.global_seed = seed;
        }
        if let Some(w) = self.workers {
            m.workers = w;
        }
        if let Some(f) = self.sample_fraction {
            m.sample_fraction = Some(f);
        }
        if let Some(out) = &self.out {
            m.output_dir = absolute(out)?;
        }
        Ok(m)
    }
}

impl StoreArgs {
    fn dir(&self) -> Result<PathBuf> {
        match (&self.store, &self.manifest) {
            (Some(dir), _) => Ok(dir.clone()),
            (None, Some(m)) => Ok(RunManifest::load(m)?.output_path()),
            (None, None) => Err(Error::Manifest("give --store or --manifest".into())),
        }
    }
}

fn write_new(path: &Path, contents: &str) -> Result<()> {
    if path.exists() {
        return Err(Error::Manifest(format!("{} already exists", path.display())));
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn init(out: &Path, rows: usize) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out)?;
    let example = RunManifest::example(rows);
    let (design, eval) = example.spaces()?;
    let files = ["manifest.json", "design_space.json", "eval_space.json", "generator.json"];
    let manifest = RunManifest {
        synthetic: Some(SyntheticData { spec: DocRef::Path(files[3].into()), seed: 0 }),
        design_space: DocRef::Path(files[1].into()),
        eval_space: DocRef::Path(files[2].into()),
        ..example
    };
    for f in files {
        if out.join(f).exists() {
            return Err(Error::Manifest(format!("{} already exists", out.join(f).display())));
        }
    }
    write_new(&out.join(files[1]), &(serde_json::to_string_pretty(&design)? + "\n"))?;
    write_new(&out.join(files[2]), &(serde_json::to_string_pretty(&eval)? + "\n"))?;
    write_new(&out.join(files[3]), &(serde_json::to_string_pretty(&GeneratorSpec::example(rows))? + "\n"))?;
    write_new(&out.join(files[0]), &(manifest.to_json()? + "\n"))?;
    Ok(json!({ "directory": out, "files": files }))
}

fn enumerate_sizes(manifest: Option<&Path>, sample_fraction: Option<f64>) -> Result<serde_json::Value> {
    let mut m = match manifest {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::example(0),
    };
    if sample_fraction.is_some() {
        m.sample_fraction = sample_fraction;
    }
    let (design, eval) = m.spaces()?;
    let universes = design.grid_size();
    let strategies = enumerate_eval_strategies(&eval)?.len() as u128;
    let selected = match m.sample_fraction {
        None => universes,
        Some(f) => crate::decision_space::sample(&design, f, m.sample_seed, m.global_seed)?.len() as u128,
    };
    Ok(json!({
        "design_universes": universes as u64,
        "eval_strategies": strategies as u64,
        "fairness_values": (universes * strategies) as u64,
        "selected_universes": selected as u64,
    }))
}

fn load_importance(path: &Path) -> Result<ImportanceReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Store(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Store(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn execute(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Init { out, rows } => init(&out, rows),
        Command::Enumerate { manifest, sample_fraction } => enumerate_sizes(manifest.as_deref(), sample_fraction),
        Command::Run { run, max_new } => {
            let ctx = RunContext::new(run.manifest()?)?;
            let dir = ctx.manifest.output_path();
            to_value(&run_multiverse_in(&ctx, &dir, &RunOptions { max_new })?)
        }
        Command::Importance { store, analysis, out } => {
            let dir = store.dir()?;
            let report = store_importance(&ResultStore::load(&dir)?, analysis.method(), &analysis.forest())?;
            let path = out.unwrap_or_else(|| dir.join(IMPORTANCE_FILE));
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            to_value(&report)
        }
        Command::Stability { store, analysis, fractions, repetitions, out } => {
            let dir = store.dir()?;
            let table = ResultStore::load(&dir)?.response_table()?;
            let config = StabilityConfig { fractions, repetitions, seed: analysis.seed, forest: analysis.forest() };
            let report = subsample_stability(&table, &config)?;
            std::fs::write(out.unwrap_or_else(|| dir.join(STABILITY_FILE)), report.to_csv())?;
            to_value(&report)
        }
        Command::Replicate { run, analysis, seeds } => {
            let ctx = RunContext::new(run.manifest()?)?;
            let seeds = if seeds.is_empty() { ctx.manifest.replication_seeds.clone() } else { seeds };
            to_value(&replicate(&ctx, &seeds, analysis.method(), &analysis.forest())?)
        }
        Command::Summarize { store } => to_value(&summarize(&ResultStore::load(&store.dir()?)?)),
        Command::Export { store, importance, out } => {
            let dir = store.dir()?;
            let result_store = ResultStore::load(&dir)?;
            let importance = match importance {
                Some(p) => Some(load_importance(&p)?),
                None if dir.join(IMPORTANCE_FILE).exists() => Some(load_importance(&dir.join(IMPORTANCE_FILE))?),
                None => None,
            };
            let path = out.unwrap_or_else(|| dir.join(BUNDLE_FILE));
            export_explorer_bundle(&result_store, importance.as_ref(), &path)?;
            Ok(json!({
                "bundle": path,
                "universes": result_store.results.len(),
                "importance": importance.is_some(),
            }))
        }
    }
}

fn error_json(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": { "kind": kind, "message": message, "exit_code": code } }).to_string()
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = writeln!(stderr, "{}", error_json("usage", e.to_string().trim_end(), 2));
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("json values serialize");
            let _ = writeln!(stdout, "{text}");
            0
        }
        Err(e) => {
            let code = e.exit_code();
            let _ = writeln!(stderr, "{}", error_json(e.kind(), &e.to_string(), code));
            code
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
