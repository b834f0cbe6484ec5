//! Shared setup for commands: inputs, planner, and the run directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use subgoal_core::env::{Affordances, Benchmark, Simulator, Split, TaskSpec};
use subgoal_core::eval::sample_prompt_pairs;
use subgoal_core::grammar::Catalog;
use subgoal_core::io::write_atomic;
use subgoal_core::lm::{load_pairs, RemoteModel, TrainingPair};
use subgoal_core::pipeline::{PipelineError, Planner, PlannerConfig};

use crate::config::{ModelKind, RunConfig};

/// Catalog and simulator built from the configured paths.
pub fn simulator(cfg: &RunConfig) -> anyhow::Result<Simulator> {
    RunConfig::require_file("paths.catalog", &cfg.paths.catalog)?;
    let catalog = Catalog::load(&cfg.paths.catalog)?;
    let affordances = match &cfg.paths.affordances {
        Some(p) => {
            RunConfig::require_file("paths.affordances", p)?;
            Affordances::load(p)?
        }
        None => Affordances::builtin(),
    };
    Ok(Simulator::new(catalog, affordances).with_exec(cfg.exec))
}

pub fn benchmark(cfg: &RunConfig, sim: &Simulator) -> anyhow::Result<Benchmark> {
    let bench = Benchmark::load(&cfg.paths.benchmark, &sim.catalog)
        .with_context(|| format!("loading benchmark from {}", cfg.paths.benchmark.display()))?;
    bench.validate(sim)?;
    Ok(bench)
}

/// Tasks of `splits` in file order, at most `limit` per split.
pub fn tasks<'a>(bench: &'a Benchmark, splits: &[Split], limit: Option<usize>) -> Vec<(Split, &'a TaskSpec)> {
    splits
        .iter()
        .flat_map(|&s| {
            let ts = bench.split(s);
            let n = limit.unwrap_or(ts.len()).min(ts.len());
            ts.into_iter().take(n).map(move |t| (s, t))
        })
        .collect()
}

/// The configured pairs file, or a seeded sample of the benchmark pool.
pub fn prompt_pairs(cfg: &RunConfig, bench: &Benchmark, catalog: &Catalog) -> anyhow::Result<Vec<TrainingPair>> {
    match &cfg.paths.pairs {
        Some(p) => {
            RunConfig::require_file("paths.pairs", p)?;
            Ok(load_pairs(p, catalog)?)
        }
        None => Ok(sample_prompt_pairs(bench, cfg.prompt.n_per_type, cfg.prompt.seed)?),
    }
}

pub fn planner_config(cfg: &RunConfig) -> anyhow::Result<PlannerConfig> {
    Ok(PlannerConfig {
        beam: cfg.decode.clone(),
        criterion: cfg.criterion()?,
    })
}

pub fn build_planner(
    cfg: &RunConfig,
    pcfg: PlannerConfig,
    pairs: Vec<TrainingPair>,
    catalog: &Catalog,
) -> Result<Planner, PipelineError> {
    match cfg.model.kind {
        ModelKind::Ngram => Planner::reference(pairs, catalog, &cfg.model.reference, pcfg),
        ModelKind::Remote => {
            let endpoint = cfg.model.endpoint.clone().expect("validated");
            Planner::new(Arc::new(RemoteModel::new(endpoint, cfg.model.top_k)), pairs, catalog, pcfg)
        }
    }
}

pub fn planner(cfg: &RunConfig, pairs: Vec<TrainingPair>, catalog: &Catalog) -> anyhow::Result<Planner> {
    Ok(build_planner(cfg, planner_config(cfg)?, pairs, catalog)?)
}

/// Output directory of one command invocation, with its manifest.
pub struct RunDir {
    pub path: PathBuf,
    command: &'static str,
    hash: String,
    config: serde_json::Value,
    seeds: serde_json::Value,
    files: Vec<String>,
}

impl RunDir {
    /// `explicit`, else `output.dir/<run_name>`, else
    /// `output.dir/<command>-<hash prefix>`.
    pub fn create(cfg: &RunConfig, command: &'static str, explicit: Option<&Path>) -> anyhow::Result<Self> {
        let hash = cfg.hash();
        let path = match (explicit, &cfg.output.run_name) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(name)) => cfg.output.dir.join(name),
            (None, None) => cfg.output.dir.join(format!("{command}-{}", &hash[..12])),
        };
        std::fs::create_dir_all(&path).with_context(|| format!("creating run directory {}", path.display()))?;
        Ok(RunDir {
            path,
            command,
            hash,
            config: serde_json::to_value(cfg).expect("config serializes"),
            seeds: json!({
                "generator": cfg.generator.seed,
                "prompt": cfg.prompt.seed,
                "exec": cfg.exec.seed,
            }),
            files: Vec::new(),
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Atomically writes `name` and lists it in the manifest.
    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.file(name);
        write_atomic(&p, contents.as_bytes()).with_context(|| format!("writing {}", p.display()))?;
        self.record(name);
        Ok(())
    }

    /// Lists a file another writer produced.
    pub fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let mut s = String::new();
        for r in rows {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        self.write(name, &s)
    }

    /// Writes `manifest.json`; call once all artifacts are in place.
    pub fn finish(mut self, summary: serde_json::Value) -> anyhow::Result<PathBuf> {
        self.files.sort();
        let manifest = json!({
            "command": self.command,
            "config_hash": self.hash,
            "seeds": self.seeds,
            "files": self.files,
            "summary": summary,
            "config": self.config,
        });
        let p = self.file("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_atomic(&p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?;
        Ok(self.path)
    }
}
