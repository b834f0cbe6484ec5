//! Run configuration: one TOML file plus `key.path=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subgoal_core::decode::BeamConfig;
use subgoal_core::env::{ExecConfig, GeneratorConfig, Split};
use subgoal_core::eval::AblationConfig;
use subgoal_core::lm::SlotConfig;
use subgoal_core::ranker::{FeatureConfig, FeedbackConfig, RolloutConfig, TrainConfig};
use subgoal_core::rerank::RankCriterion;

/// A problem with the configuration itself; the binary exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub catalog: PathBuf,
    /// Built-in table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affordances: Option<PathBuf>,
    /// Directory holding the scene and task files.
    pub benchmark: PathBuf,
    /// Demonstration pairs; sampled from the benchmark pool when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ngram,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub top_k: usize,
    pub reference: SlotConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Ngram,
            endpoint: None,
            top_k: 0,
            reference: SlotConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankConfig {
    /// `forward`, `reverse` or `wmi`.
    pub criterion: String,
    pub lambda: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            criterion: "wmi".into(),
            lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptConfig {
    /// Pool examples per task type when no pairs file is given.
    pub n_per_type: usize,
    pub seed: u64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig { n_per_type: 2, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub splits: Vec<Split>,
    /// Tasks per split at most; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            splits: vec![Split::Eval],
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub splits: Vec<Split>,
    /// Trained ranker; the re-ranked row is skipped without it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            splits: vec![Split::Eval, Split::Ambiguity],
            params: None,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Run directory name; `<command>-<config hash prefix>` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_name: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "runs".into(),
            run_name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub decode: BeamConfig,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub exec: ExecConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub sweep: AblationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Sets `path` (dot separated) in `root` to `raw`, read as a TOML value
/// when it parses as one and as a string otherwise.
fn apply_override(root: &mut toml::Table, path: &str, raw: &str) -> anyhow::Result<()> {
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("override `{path}`: empty key")));
    }
    let (last, parents) = keys.split_last().expect("split yields a key");
    let mut table = root;
    for k in parents {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{path}`: `{k}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses `text`, applies `overrides`, resolves relative paths against
    /// `base` and validates.
    pub fn from_text(text: &str, base: &Path, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("config: {}", e.message())))?;
        cfg.paths.catalog = resolve(base, &cfg.paths.catalog);
        cfg.paths.benchmark = resolve(base, &cfg.paths.benchmark);
        cfg.paths.affordances = cfg.paths.affordances.map(|p| resolve(base, &p));
        cfg.paths.pairs = cfg.paths.pairs.map(|p| resolve(base, &p));
        cfg.eval.params = cfg.eval.params.map(|p| resolve(base, &p));
        cfg.output.dir = resolve(base, &cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base, overrides)
    }

    pub fn criterion(&self) -> anyhow::Result<RankCriterion> {
        RankCriterion::from_name(&self.rank.criterion, self.rank.lambda).map_err(|e| config_err(format!("rank: {e}")))
    }

    fn validate(&self) -> anyhow::Result<()> {
        self.criterion()?;
        self.decode.validate().map_err(|e| config_err(format!("decode: {e}")))?;
        self.generator.validate().map_err(|e| config_err(format!("generator: {e}")))?;
        if self.model.kind == ModelKind::Remote && self.model.endpoint.is_none() {
            return Err(config_err("model.endpoint is required when model.kind = \"remote\""));
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0) {
            return Err(config_err("train.learning_rate must be positive"));
        }
        if self.feedback.k == 0 {
            return Err(config_err("feedback.k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.exec.failure_rate) {
            return Err(config_err("exec.failure_rate must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Requires an input file named by `field` to exist.
    pub fn require_file(field: &str, path: &Path) -> anyhow::Result<()> {
        if !path.is_file() {
            return Err(config_err(format!("{field}: no such file: {}", path.display())));
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
