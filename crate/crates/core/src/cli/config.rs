use std::fs;
use std::path::Path;

use crate::cyclegan::TrainConfig;
use crate::dataset::{parse_key_values, DatasetConfig};
use crate::error::{Error, Result};

/// Dataset and training settings read from one `key = value` file.
/// Dataset keys keep their dataset spelling (`seed` seeds the data);
/// the training seed is `train_seed`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.dataset.set(key, value)? || self.train.set(key, value)? {
            Ok(())
        } else {
            Err(Error::UnknownKey(key.to_string()))
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text, path)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::parse(&text, p)
            }
        }
    }
}
