//! Run configuration, loaded from TOML.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{EnsembleConfig, HttpConfig};
use crate::operators::OperatorParams;
use crate::problems::{DistanceRatio, ProblemId, ScoreOptions, DEFAULT_TOLERANCE};
use crate::sandbox::{CandidateLanguage, ResourceLimits, SandboxConfig, DEFAULT_LOG_CAP};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Which islands send migrants to which.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Each island exchanges with its two ring neighbours.
    Ring,
    /// Every island sends to every other island.
    Full,
    /// Directed `[from, to]` pairs.
    Edges(Vec<[usize; 2]>),
}

impl Topology {
    /// Destinations of `island`, sorted and without duplicates or self-loops.
    pub fn neighbors(&self, island: usize, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = match self {
            Topology::Ring if n > 1 => vec![(island + n - 1) % n, (island + 1) % n],
            Topology::Ring => vec![],
            Topology::Full => (0..n).collect(),
            Topology::Edges(edges) => edges.iter().filter(|e| e[0] == island).map(|e| e[1]).collect(),
        };
        out.retain(|&d| d != island);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Named component ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationPreset {
    /// Meta-prompting and inspirations.
    Full,
    /// Meta-prompting only.
    Mp,
    /// Inspirations only.
    Insp,
    /// Neither, evolution and migration still on.
    None,
    /// Every step prompts with the initial pair only.
    NoEvolution,
}

impl AblationPreset {
    pub fn toggles(self) -> Ablation {
        let (meta_prompting, inspirations, evolution) = match self {
            AblationPreset::Full => (true, true, true),
            AblationPreset::Mp => (true, false, true),
            AblationPreset::Insp => (false, true, true),
            AblationPreset::None => (false, false, true),
            AblationPreset::NoEvolution => (false, false, false),
        };
        Ablation { meta_prompting, inspirations, evolution }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AblationPreset::Full => "full",
            AblationPreset::Mp => "mp",
            AblationPreset::Insp => "insp",
            AblationPreset::None => "none",
            AblationPreset::NoEvolution => "no-evolution",
        }
    }
}

impl FromStr for AblationPreset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "full" => AblationPreset::Full,
            "mp" => AblationPreset::Mp,
            "insp" => AblationPreset::Insp,
            "none" => AblationPreset::None,
            "no-evolution" => AblationPreset::NoEvolution,
            other => return invalid(format!("unknown ablation {other:?}")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub meta_prompting: bool,
    pub inspirations: bool,
    /// Off means every step regenerates from the initial pair, without migration.
    pub evolution: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        AblationPreset::Full.toggles()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Replay,
}

impl FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            other => invalid(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub backend: BackendKind,
    /// Replay transcript; relative paths resolve against the run directory.
    pub transcript: Option<PathBuf>,
    /// Require each replayed record's digest to match the request.
    pub strict: bool,
    pub ensemble: EnsembleConfig,
    pub http: HttpConfig,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            backend: BackendKind::Http,
            transcript: None,
            strict: false,
            ensemble: EnsembleConfig::default(),
            http: HttpConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxSettings {
    pub language: CandidateLanguage,
    /// Overrides the language's default interpreter command.
    pub interpreter: Option<Vec<String>>,
    pub workers: usize,
    pub log_cap_bytes: usize,
    pub scratch_root: Option<PathBuf>,
}

impl Default for SandboxSettings {
    fn default() -> Self {
        SandboxSettings {
            language: CandidateLanguage::Python,
            interpreter: None,
            workers: 5,
            log_cap_bytes: DEFAULT_LOG_CAP,
            scratch_root: None,
        }
    }
}

impl SandboxSettings {
    pub fn sandbox_config(&self) -> SandboxConfig {
        SandboxConfig {
            language: self.language,
            interpreter: self.interpreter.clone().unwrap_or_else(|| self.language.default_interpreter()),
            scratch_root: self.scratch_root.clone(),
            log_cap_bytes: self.log_cap_bytes,
            workers: self.workers,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitOverrides {
    pub wall_seconds: Option<f64>,
    pub memory_bytes: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringSettings {
    pub tolerance: f64,
    pub distance_ratio: DistanceRatio,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        ScoringSettings { tolerance: DEFAULT_TOLERANCE, distance_ratio: DistanceRatio::Squared }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemId,
    /// Defaults to the problem's standard budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "d::num_islands")]
    pub num_islands: usize,
    #[serde(default = "d::topology")]
    pub topology: Topology,
    #[serde(default = "d::migration_every")]
    pub migration_every: u64,
    #[serde(default = "d::migration_rate")]
    pub migration_rate: f64,
    #[serde(default = "d::p_explore")]
    pub p_explore: f64,
    #[serde(default = "d::max_population")]
    pub max_population: usize,
    #[serde(default = "d::init_population")]
    pub init_population: usize,
    #[serde(default = "d::num_inspirations")]
    pub num_inspirations: usize,
    /// Omit for an unlimited ancestor chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ancestor_depth: Option<usize>,
    /// Extra checkpoints every this many epochs, besides migrations and the end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub sandbox: SandboxSettings,
    #[serde(default)]
    pub limits: LimitOverrides,
    #[serde(default)]
    pub scoring: ScoringSettings,
}

mod d {
    use super::Topology;
    pub fn num_islands() -> usize {
        5
    }
    pub fn topology() -> Topology {
        Topology::Ring
    }
    pub fn migration_every() -> u64 {
        40
    }
    pub fn migration_rate() -> f64 {
        0.1
    }
    pub fn p_explore() -> f64 {
        0.3
    }
    pub fn max_population() -> usize {
        40
    }
    pub fn init_population() -> usize {
        6
    }
    pub fn num_inspirations() -> usize {
        3
    }
}

impl RunConfig {
    /// Standard settings for `problem`.
    pub fn new(problem: ProblemId) -> Self {
        RunConfig {
            problem,
            epochs: None,
            master_seed: 0,
            num_islands: d::num_islands(),
            topology: d::topology(),
            migration_every: d::migration_every(),
            migration_rate: d::migration_rate(),
            p_explore: d::p_explore(),
            max_population: d::max_population(),
            init_population: d::init_population(),
            num_inspirations: d::num_inspirations(),
            max_ancestor_depth: None,
            checkpoint_every: None,
            ablation: Ablation::default(),
            llm: LlmSettings::default(),
            sandbox: SandboxSettings::default(),
            limits: LimitOverrides::default(),
            scoring: ScoringSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn total_epochs(&self) -> u64 {
        self.epochs.unwrap_or_else(|| self.problem.default_epochs())
    }

    pub fn resource_limits(&self) -> ResourceLimits {
        let base = self.problem.default_limits();
        ResourceLimits::new(
            self.limits.wall_seconds.unwrap_or(base.wall_seconds),
            self.limits.memory_bytes.unwrap_or(base.memory_bytes),
        )
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions {
            tolerance: self.scoring.tolerance,
            distance_ratio: self.scoring.distance_ratio,
            instance_size: None,
        }
    }

    pub fn operator_params(&self) -> OperatorParams {
        OperatorParams {
            p_explore: self.p_explore,
            num_inspirations: self.num_inspirations,
            max_ancestor_depth: self.max_ancestor_depth,
            meta_prompting: self.ablation.meta_prompting,
        }
    }

    pub fn apply_preset(&mut self, preset: AblationPreset) {
        self.ablation = preset.toggles();
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_islands == 0 {
            return invalid("num_islands must be positive");
        }
        if self.migration_every == 0 {
            return invalid("migration_every must be positive");
        }
        if !(self.migration_rate > 0.0 && self.migration_rate <= 1.0) {
            return invalid("migration_rate must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_explore) {
            return invalid("p_explore must lie in [0, 1]");
        }
        if self.max_population == 0 {
            return invalid("max_population must be positive");
        }
        if self.total_epochs() == 0 {
            return invalid("epochs must be positive");
        }
        if self.max_ancestor_depth == Some(0) {
            return invalid("max_ancestor_depth must be positive; omit it for unlimited");
        }
        if self.checkpoint_every == Some(0) {
            return invalid("checkpoint_every must be positive");
        }
        if let Topology::Edges(edges) = &self.topology {
            if let Some(e) = edges.iter().find(|e| e[0] >= self.num_islands || e[1] >= self.num_islands) {
                return invalid(format!("topology edge {e:?} names an island outside 0..{}", self.num_islands));
            }
        }
        if !self.resource_limits().is_valid() {
            return invalid("resource limits must be positive");
        }
        if !(self.scoring.tolerance >= 0.0 && self.scoring.tolerance.is_finite()) {
            return invalid("scoring tolerance must be a nonnegative number");
        }
        if self.sandbox.workers == 0 {
            return invalid("sandbox workers must be positive");
        }
        self.llm.ensemble.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.llm.backend == BackendKind::Replay && self.llm.transcript.is_none() {
            return invalid("the replay backend needs llm.transcript");
        }
        Ok(())
    }
}
