//! Run configuration: one TOML document with `[chain]`, `[raster]`,
//! `[segmenter]` and `[analysis]` tables. Key names carry their units;
//! unknown keys are rejected and every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::AnalysisConfig;
use crate::pixel::RasterConfig;
use crate::segment::SegmenterConfig;
use crate::sim::ChainConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub raster: RasterConfig,
    pub segmenter: SegmenterConfig,
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                reason: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        self.raster.validate()?;
        self.segmenter.validate()?;
        self.analysis.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Replaces every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.chain.seed = seed;
        self.raster.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(
            RunConfig::from_toml_str("", Path::new("x")).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = "[chain]\nn_ions = 3\nrate_bright = 2000\n";
        match RunConfig::from_toml_str(text, Path::new("x.toml")) {
            Err(Error::Parse { line, reason, .. }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("rate_bright"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let text = "[segmenter]\nt_low_s = 0.002\nt_high_s = 0.001\n";
        assert!(matches!(
            RunConfig::from_toml_str(text, Path::new("x")),
            Err(Error::Config(_))
        ));
    }
}
