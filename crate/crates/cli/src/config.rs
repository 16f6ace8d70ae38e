//! Versioned JSON run configurations. Unknown keys are rejected and the
//! resolved copy written next to the outputs has every default filled in.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use traji_agents::{BcConfig, DatiConfig, DdpgConfig, Task};
use traji_ais::fixture::FixtureConfig;
use traji_ais::{AisTaskConfig, ClusterLabel, IngestConfig, Polygon, SegmentConfig};
use traji_core::FamilySpec;

pub const CONFIG_VERSION: u32 = 1;
pub const OUT_ENV: &str = "TRAJI_OUT";
pub const RESOLVED_NAME: &str = "config.resolved.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dati,
    #[serde(alias = "ddpg-ti")]
    #[value(name = "ddpg-ti", alias = "ddpg_ti")]
    DdpgTi,
    Bc,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dati => "dati",
            AgentKind::DdpgTi => "ddpg_ti",
            AgentKind::Bc => "bc",
        }
    }
}

fn default_margin() -> f64 {
    0.1
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Family name; `spec` overrides its shape parameters when given.
    pub family: String,
    #[serde(default)]
    pub spec: Option<FamilySpec>,
    /// ROI growth as a fraction of the family's extent.
    #[serde(default = "default_margin")]
    pub roi_margin: f64,
    /// Reward threshold on the normalized smoothed DTW.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl TaskConfig {
    pub fn resolve(&mut self) -> Result<()> {
        if self.spec.is_none() {
            self.spec = Some(FamilySpec::by_name(&self.family).with_context(|| format!("unknown family `{}`", self.family))?);
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Task> {
        let spec = match &self.spec {
            Some(s) => s.clone(),
            None => FamilySpec::by_name(&self.family).with_context(|| format!("unknown family `{}`", self.family))?,
        };
        Ok(Task::family(spec, self.roi_margin, self.epsilon)?)
    }
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_refs() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub agent: AgentKind,
    pub task: TaskConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Evaluation references per seed.
    #[serde(default = "default_refs")]
    pub eval_refs: u64,
    #[serde(default)]
    pub dati: DatiConfig,
    #[serde(default)]
    pub ddpg: DdpgConfig,
    #[serde(default)]
    pub bc: BcConfig,
    /// Episodes between intermediate checkpoints; 0 keeps only the final one.
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(&mut self) -> Result<()> {
        check_version(self.version)?;
        self.task.resolve()?;
        if self.seeds.is_empty() {
            bail!("`seeds` must not be empty");
        }
        Ok(())
    }
}

fn default_per_cluster() -> usize {
    170
}

fn default_train_clusters() -> Vec<ClusterLabel> {
    vec![ClusterLabel::Up, ClusterLabel::Down]
}

fn default_quantile() -> f64 {
    0.9
}

fn default_kink_threshold() -> f64 {
    traji_ais::kinks::DEFAULT_KINK_THRESHOLD_DEG
}

fn default_start_region() -> Polygon {
    traji_ais::fixture::start_region()
}

/// One document drives every AIS stage; each stage reads the keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AisConfig {
    pub version: u32,
    /// Raw AIS CSV for `ingest`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub segment: SegmentConfig,
    #[serde(default = "default_kink_threshold")]
    pub kink_threshold_deg: f64,
    #[serde(default = "default_train_clusters")]
    pub train_clusters: Vec<ClusterLabel>,
    #[serde(default = "default_per_cluster")]
    pub per_cluster: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub task: AisTaskConfig,
    #[serde(default)]
    pub dati: DatiConfig,
    /// Cluster whose generator scores the test tracks.
    #[serde(default = "up")]
    pub detect_cluster: ClusterLabel,
    /// Test tracks: other-cluster tracks starting inside this polygon.
    #[serde(default = "default_start_region")]
    pub start_region: Polygon,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default)]
    pub fixture: FixtureConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn up() -> ClusterLabel {
    ClusterLabel::Up
}

impl AisConfig {
    pub fn resolve(&mut self) -> Result<()> {
        check_version(self.version)?;
        if !(0.0..=1.0).contains(&self.quantile) {
            bail!("`quantile` must lie in [0, 1]");
        }
        Ok(())
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != CONFIG_VERSION {
        bail!("unsupported config version {v} (expected {CONFIG_VERSION})");
    }
    Ok(())
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// `TRAJI_OUT`, else the configured directory, else `fallback`.
pub fn out_dir(configured: Option<&Path>, fallback: &str) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(fallback)),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
