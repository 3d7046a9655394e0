//! Tracker settings from a TOML file, overridable from the command line.
//!
//! ```toml
//! [tracker]
//! f_false = 0.1
//! targets_per_type = 3
//!
//! [[distance_models]]
//! mean = 50.0
//! variance = 4.0
//! part_pair = ["head", "tail_base"]
//! ```
//!
//! Without `distance_models` the models are fitted from the templates.

use std::path::Path;

use parttrack::association::DistanceModel;
use parttrack::TrackerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerFile {
    pub tracker: TrackerConfig,
    pub distance_models: Option<Vec<DistanceModel>>,
}

impl TrackerFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_toml(path)
    }
}

pub fn load_toml<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    toml::from_str(&text).map_err(|e| HarnessError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
