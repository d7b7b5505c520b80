//! Room configuration file and the resources it points at.
//!
//! A config is a JSON object; every field is optional:
//!
//! ```json
//! {
//!   "mode": "feed",
//!   "manifest": "manifest.json",
//!   "weights": { "w_like": 2.0 },
//!   "rec": { "epsilon_explore": 0.0 },
//!   "tau": 0.35,
//!   "theta": 2.0
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engagement::WeightTable;
use crate::gamekit::GameScript;
use crate::model::Manifest;
use crate::recsys::RecConfig;
use crate::socialgraph::{DEFAULT_TAU, DEFAULT_THETA};
use crate::{Error, Result};

/// Minimum spacing between two broadcast ticks of one room.
pub const MIN_TICK_INTERVAL_MS: u64 = 100;
/// Lifetime of a pairing code.
pub const PAIRING_TTL_MS: u64 = 10 * 60 * 1000;

const SAMPLE_MANIFEST: &str = include_str!("../../fixtures/manifest.json");

/// The bundled 30-image sample manifest.
pub fn sample_manifest() -> Manifest {
    Manifest::from_json(SAMPLE_MANIFEST).expect("bundled manifest is valid")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomMode {
    #[default]
    Feed,
    Game,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomConfig {
    pub mode: RoomMode,
    pub weights: WeightTable,
    pub rec: RecConfig,
    /// Similarity-graph edge threshold.
    pub tau: f64,
    /// Co-engagement threshold on a cell score.
    pub theta: f64,
    pub tick_interval_ms: u64,
    /// Number of a student's own events carried in `log_tail`.
    pub log_tail_len: usize,
    /// Number of topics in a word cloud.
    pub word_cloud_terms: usize,
    pub manifest: Option<PathBuf>,
    pub game_script: Option<PathBuf>,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            mode: RoomMode::Feed,
            weights: WeightTable::default(),
            rec: RecConfig::default(),
            tau: DEFAULT_TAU,
            theta: DEFAULT_THETA,
            tick_interval_ms: MIN_TICK_INTERVAL_MS,
            log_tail_len: 20,
            word_cloud_terms: 10,
            manifest: None,
            game_script: None,
        }
    }
}

impl RoomConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.rec.validate()?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Configuration(format!("tau {} is outside [0, 1]", self.tau)));
        }
        if !self.theta.is_finite() || self.theta < 0.0 {
            return Err(Error::Configuration(format!("theta {} must be >= 0", self.theta)));
        }
        if self.tick_interval_ms < MIN_TICK_INTERVAL_MS {
            return Err(Error::Configuration(format!(
                "tick_interval_ms must be at least {MIN_TICK_INTERVAL_MS}"
            )));
        }
        if self.log_tail_len == 0 || self.word_cloud_terms == 0 {
            return Err(Error::Configuration(
                "log_tail_len and word_cloud_terms must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A validated config together with the loaded manifest and game script.
#[derive(Debug, Clone)]
pub struct RoomSetup {
    pub config: RoomConfig,
    pub manifest: Arc<Manifest>,
    /// Present exactly when the mode is [`RoomMode::Game`].
    pub script: Option<GameScript>,
}

impl RoomSetup {
    pub fn new(config: RoomConfig, manifest: Manifest, script: Option<GameScript>) -> Result<Self> {
        config.validate()?;
        if manifest.len() < config.rec.queue_len {
            return Err(Error::Configuration(format!(
                "manifest has {} images but queue_len is {}",
                manifest.len(),
                config.rec.queue_len
            )));
        }
        let script = match config.mode {
            RoomMode::Game => Some(script.unwrap_or_else(GameScript::sample)),
            RoomMode::Feed => None,
        };
        Ok(Self {
            config,
            manifest: Arc::new(manifest),
            script,
        })
    }

    /// Default config over the bundled sample manifest.
    pub fn sample() -> Self {
        Self::new(RoomConfig::default(), sample_manifest(), None).expect("sample setup is valid")
    }

    /// Loads a config file (or defaults) plus the files it references.
    /// `manifest_override` wins over the config's `manifest` entry; with
    /// neither, the bundled sample manifest is used.
    pub fn load(config_path: Option<&Path>, manifest_override: Option<&Path>) -> Result<Self> {
        let (config, base) = match config_path {
            Some(p) => (
                RoomConfig::from_json(&read_to_string(p)?)?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (RoomConfig::default(), PathBuf::new()),
        };
        let manifest = match (manifest_override, &config.manifest) {
            (Some(p), _) => Manifest::from_json(&read_to_string(p)?)?,
            (None, Some(rel)) => Manifest::from_json(&read_to_string(&base.join(rel))?)?,
            (None, None) => sample_manifest(),
        };
        let script = match &config.game_script {
            Some(rel) => Some(GameScript::from_json(&read_to_string(&base.join(rel))?)?),
            None => None,
        };
        Self::new(config, manifest, script)
    }

    pub fn with_mode(&self, mode: RoomMode) -> Result<Self> {
        let mut config = self.config.clone();
        config.mode = mode;
        Self::new(config, (*self.manifest).clone(), self.script.clone())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
