//! Run configuration, read from TOML. Every field has a default, so an empty
//! file describes the reference pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_SUCCESS_RADIUS;
use crate::obstacle::{DEFAULT_ELEVATION_BAND, DEFAULT_SLOPE_THRESHOLD};
use crate::planner::LlmClientConfig;
use crate::predictor::{ModelConfig, PredictorConfig, TrainConfig};
use crate::prompting::PromptSections;
use crate::radial::RadialGrid;
use crate::sim::{EpisodeSpec, MotionMode, ScanConfig, Terrain, WorldSpec};
use crate::topograph::DEFAULT_MERGE_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstacleSettings {
    pub slope_threshold: f64,
    pub elevation_band: (f64, f64),
}

impl Default for ObstacleSettings {
    fn default() -> Self {
        Self {
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            elevation_band: DEFAULT_ELEVATION_BAND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    #[default]
    Geometric,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSettings {
    pub kind: PredictorKind,
    pub k: usize,
    pub nms_radius: f64,
    /// Score floor for the geometric predictor.
    pub min_score: f64,
    /// Score floor for the learned model, whose regression logits sit well
    /// below the target peak.
    pub model_min_score: f64,
    pub mask: bool,
    /// Trained weights; defaults to `<output_dir>/model.json`.
    pub checkpoint: Option<PathBuf>,
    pub model: ModelConfig,
    /// Target Gaussian width, in bins.
    pub sigma: f64,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        let p = PredictorConfig::default();
        Self {
            kind: PredictorKind::Geometric,
            k: p.k,
            nms_radius: p.nms_radius,
            min_score: p.min_score,
            model_min_score: 0.0,
            mask: p.mask,
            checkpoint: None,
            model: ModelConfig::default(),
            sigma: 1.0,
        }
    }
}

impl PredictorSettings {
    pub fn geometric_config(&self) -> PredictorConfig {
        PredictorConfig {
            k: self.k,
            nms_radius: self.nms_radius,
            min_score: self.min_score,
            mask: self.mask,
        }
    }

    pub fn model_config(&self) -> PredictorConfig {
        PredictorConfig {
            min_score: self.model_min_score,
            ..self.geometric_config()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    #[default]
    Oracle,
    Greedy,
    /// Prompt-reading test planner used for prompt ablations.
    Scripted,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    pub kind: PlannerKind,
    pub llm: LlmClientConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub mode: MotionMode,
    pub scan: ScanConfig,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            mode: MotionMode::Sliding,
            scan: ScanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSettings {
    /// Worlds whose graph nodes become training examples.
    pub train_worlds: usize,
    /// Further worlds held out for predictor evaluation.
    pub heldout_worlds: usize,
    pub nodes_per_world: usize,
    pub node_spacing: f64,
    /// Cycled over worlds.
    pub terrains: Vec<Terrain>,
    pub episodes: usize,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            train_worlds: 50,
            heldout_worlds: 10,
            nodes_per_world: 20,
            node_spacing: 1.0,
            terrains: vec![Terrain::Flat, Terrain::Stairs],
            episodes: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub planner_steps: usize,
    pub actions: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            planner_steps: 20,
            actions: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: RadialGrid,
    pub obstacle: ObstacleSettings,
    pub predictor: PredictorSettings,
    pub train: TrainConfig,
    pub merge_threshold: f64,
    pub planner: PlannerSettings,
    pub prompt: PromptSections,
    pub sim: SimSettings,
    pub world: WorldSpec,
    pub episode: EpisodeSpec,
    pub data: DataSettings,
    pub budget: Budget,
    pub success_radius: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            grid: RadialGrid::default(),
            obstacle: ObstacleSettings::default(),
            predictor: PredictorSettings::default(),
            train: TrainConfig::default(),
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            planner: PlannerSettings::default(),
            prompt: PromptSections::default(),
            sim: SimSettings::default(),
            world: WorldSpec::default(),
            episode: EpisodeSpec::default(),
            data: DataSettings::default(),
            budget: Budget::default(),
            success_radius: DEFAULT_SUCCESS_RADIUS,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.obstacle.slope_threshold > 0.0) {
            return bad("obstacle.slope_threshold must be positive");
        }
        if !(self.obstacle.elevation_band.0 < self.obstacle.elevation_band.1) {
            return bad("obstacle.elevation_band must be an increasing pair");
        }
        self.predictor.geometric_config().validate()?;
        self.predictor.model_config().validate()?;
        self.predictor.model.validate()?;
        if !(self.predictor.sigma > 0.0) {
            return bad("predictor.sigma must be positive");
        }
        if self.train.batch_size == 0 || !(self.train.lr >= 0.0) {
            return bad("train.batch_size must be positive and train.lr non-negative");
        }
        if !(self.merge_threshold > 0.0) {
            return bad("merge_threshold must be positive");
        }
        if !(self.sim.scan.sample_step > 0.0) || !(self.sim.scan.noise_std >= 0.0) {
            return bad("sim.scan needs a positive sample_step and non-negative noise_std");
        }
        self.world.validate()?;
        if self.data.terrains.is_empty() {
            return bad("data.terrains must name at least one terrain");
        }
        for t in &self.data.terrains {
            WorldSpec {
                terrain: *t,
                ..self.world.clone()
            }
            .validate()?;
        }
        if !(self.data.node_spacing > 0.0) {
            return bad("data.node_spacing must be positive");
        }
        if !(self.episode.min_distance >= 0.0 && self.episode.min_distance <= self.episode.max_distance) {
            return bad("episode distance range is empty");
        }
        if self.budget.planner_steps == 0 || self.budget.actions == 0 {
            return bad("budgets must be positive");
        }
        if !(self.success_radius > 0.0) {
            return bad("success_radius must be positive");
        }
        if self.planner.kind == PlannerKind::Llm && self.planner.llm.base_url.is_empty() {
            return bad("planner.llm.base_url is required for the llm planner");
        }
        Ok(())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.predictor
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.predictor.k, 5);
        assert_eq!(cfg.merge_threshold, 0.5);
        assert_eq!(cfg.budget.planner_steps, 20);
        assert_eq!(cfg.train.epochs, 30);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.planner.kind = PlannerKind::Greedy;
        cfg.sim.mode = MotionMode::NoSliding;
        cfg.world.terrain = Terrain::Stairs;
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(RunConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn partial_sections() {
        let cfg = RunConfig::from_toml_str(
            "seed = 7\n[planner]\nkind = \"llm\"\n[planner.llm]\nmodel = \"m\"\n[sim]\nmode = \"no-sliding\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.planner.kind, PlannerKind::Llm);
        assert_eq!(cfg.planner.llm.model, "m");
        assert_eq!(cfg.planner.llm.api_key_env, "OPENAI_API_KEY");
        assert_eq!(cfg.sim.mode, MotionMode::NoSliding);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "merge_threshold = 0.0",
            "[predictor]\nk = 0",
            "[world]\ncorridor_width = 0.4",
            "[budget]\nactions = 0",
            "[grid]\nnum_angles = 7",
            "unknown_key = 1\n[predictor]\nnms_radius = -1.0",
            "[predictor.model]\nd_model = \"x\"",
        ] {
            assert!(RunConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
