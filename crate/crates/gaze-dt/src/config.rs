//! Run configuration: one TOML file covering every stage of the pipeline.
//!
//! Resolution order for each setting: CLI flag > config file > built-in
//! default. Unknown keys are rejected so typos fail loudly.

use crate::error::{GazeError, Result};
use crate::foveation::FovealConfig;
use crate::metrics::ViewingGeometry;
use crate::model::ModelConfig;
use crate::synth::{FrameStorage, OracleGazeParams, SceneSpec};
use crate::train::{NoiseSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_ENV_VAR: &str = "GAZE_DT_CONFIG";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_episodes: usize,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub storage: FrameStorage,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            n_episodes: 200,
            train_ratio: 0.75,
            val_ratio: 0.05,
            test_ratio: 0.20,
            storage: FrameStorage::Packed,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub scene: SceneSpec,
    pub oracle: OracleGazeParams,
    pub foveal: FovealConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub noise: NoiseSchedule,
    pub geometry: ViewingGeometry,
    pub paths: PathsSection,
}


impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| GazeError::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| GazeError::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Explicit path first, then `GAZE_DT_CONFIG`, then built-in defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<RunConfig> {
        if let Some(p) = explicit {
            return RunConfig::load(p);
        }
        if let Ok(p) = std::env::var(CONFIG_ENV_VAR) {
            if !p.is_empty() {
                return RunConfig::load(Path::new(&p));
            }
        }
        Ok(RunConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.noise.validate()?;
        self.geometry.validate()?;
        let r = self.dataset.train_ratio + self.dataset.val_ratio + self.dataset.test_ratio;
        if (r - 1.0).abs() > 1e-9 {
            return Err(GazeError::Config(format!(
                "split ratios sum to {r}, expected 1"
            )));
        }
        if self.foveal.crop_size_px == 0 || self.foveal.model_input_px == 0 {
            return Err(GazeError::Config("foveal sizes must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn ratios(&self) -> (f64, f64, f64) {
        (
            self.dataset.train_ratio,
            self.dataset.val_ratio,
            self.dataset.test_ratio,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| GazeError::Config(format!("serialize config: {e}")))?;
        std::fs::write(path, text).map_err(|e| GazeError::io(path, e))
    }
}
