//! Flat pipeline configuration. Every key has a default, so an empty file is
//! a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::read_to_string;
use super::preprocess::{Reducer, DEFAULT_BLOCK};
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::gae::GaeConfig;
use crate::segmentation::{BinRule, Stride, DEFAULT_CANDIDATES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<String>,
    /// Load tag this config trains on; `None` means every load in the manifest.
    pub load: Option<String>,
    pub sampling_rate: f64,
    pub class_count: usize,
    pub block: usize,
    pub reducer: Reducer,

    pub candidates: Vec<usize>,
    /// Histogram bins; 0 means `max(2, ceil(sqrt(w)))`.
    pub bin_count: usize,
    /// Segmentation stride; 0 means `ceil(w / 2)`.
    pub stride: usize,
    pub theta_percentile: f64,
    pub max_pairs: usize,
    pub dtw_band: Option<usize>,

    pub seed: u64,

    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub decoder_dim: usize,
    pub num_gat_layers: usize,
    pub num_transformer_layers: usize,
    pub gat_heads: usize,
    pub transformer_heads: usize,
    pub kl_weight: f64,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,

    pub rf_trees: usize,
    pub rf_depth: usize,
    pub boost_rounds: usize,
    pub boost_learning_rate: f64,
    pub boost_depth: usize,
    pub l2_leaf: f64,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub cv_folds: usize,
    pub grid_step: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let gae = GaeConfig::default();
        let ens = EnsembleConfig::default();
        PipelineConfig {
            manifest: None,
            load: None,
            sampling_rate: 48000.0,
            class_count: 10,
            block: DEFAULT_BLOCK,
            reducer: Reducer::Rms,
            candidates: DEFAULT_CANDIDATES.to_vec(),
            bin_count: 0,
            stride: 0,
            theta_percentile: 20.0,
            max_pairs: 5_000_000,
            dtw_band: None,
            seed: 0,
            hidden_dim: gae.hidden_dim,
            latent_dim: gae.latent_dim,
            decoder_dim: gae.decoder_dim,
            num_gat_layers: gae.num_gat_layers,
            num_transformer_layers: gae.num_transformer_layers,
            gat_heads: gae.gat_heads,
            transformer_heads: gae.transformer_heads,
            kl_weight: gae.kl_weight,
            leaky_slope: gae.leaky_slope,
            epochs: gae.epochs,
            learning_rate: gae.learning_rate,
            train_fraction: gae.train_fraction,
            val_fraction: gae.val_fraction,
            test_fraction: gae.test_fraction,
            rf_trees: ens.rf_trees,
            rf_depth: ens.rf_depth,
            boost_rounds: ens.boost_rounds,
            boost_learning_rate: ens.boost_learning_rate,
            boost_depth: ens.boost_depth,
            l2_leaf: ens.l2_leaf,
            mlp_hidden: ens.mlp_hidden,
            mlp_epochs: ens.mlp_epochs,
            mlp_learning_rate: ens.mlp_learning_rate,
            cv_folds: ens.cv_folds,
            grid_step: ens.grid_step,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_to_string(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    /// Apply `key=value` overrides, where `value` is parsed as a TOML value
    /// (bare strings are accepted).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::invalid(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override {item:?} is not key=value")))?;
            let key = key.trim().replace('-', "_");
            let raw = raw.trim();
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key, value);
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0) {
            return Err(Error::invalid("sampling_rate must be positive"));
        }
        if self.class_count < 2 {
            return Err(Error::invalid("class_count must be at least 2"));
        }
        if self.block == 0 {
            return Err(Error::invalid("block must be at least 1"));
        }
        if self.candidates.is_empty() || self.candidates.iter().any(|&w| w < 2) {
            return Err(Error::invalid("candidates must be non-empty and each at least 2"));
        }
        if !(self.theta_percentile > 0.0 && self.theta_percentile <= 100.0) {
            return Err(Error::invalid("theta_percentile must lie in (0, 100]"));
        }
        self.gae_config().validate()?;
        self.ensemble_config().validate()
    }

    pub fn bin_rule(&self) -> BinRule {
        match self.bin_count {
            0 => BinRule::SqrtWindow,
            n => BinRule::Fixed(n),
        }
    }

    pub fn stride_rule(&self) -> Stride {
        match self.stride {
            0 => Stride::HalfWindow,
            s => Stride::Fixed(s),
        }
    }

    pub fn gae_config(&self) -> GaeConfig {
        GaeConfig {
            input_dim: crate::features::FEATURE_DIM,
            hidden_dim: self.hidden_dim,
            latent_dim: self.latent_dim,
            decoder_dim: self.decoder_dim,
            num_gat_layers: self.num_gat_layers,
            num_transformer_layers: self.num_transformer_layers,
            gat_heads: self.gat_heads,
            transformer_heads: self.transformer_heads,
            kl_weight: self.kl_weight,
            leaky_slope: self.leaky_slope,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
            train_fraction: self.train_fraction,
            val_fraction: self.val_fraction,
            test_fraction: self.test_fraction,
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            rf_trees: self.rf_trees,
            rf_depth: self.rf_depth,
            boost_rounds: self.boost_rounds,
            boost_learning_rate: self.boost_learning_rate,
            boost_depth: self.boost_depth,
            l2_leaf: self.l2_leaf,
            mlp_hidden: self.mlp_hidden,
            mlp_epochs: self.mlp_epochs,
            mlp_learning_rate: self.mlp_learning_rate,
            cv_folds: self.cv_folds,
            grid_step: self.grid_step,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn defaults_match_the_published_table() {
        let g = PipelineConfig::default().gae_config();
        assert_eq!(g, GaeConfig::default());
    }

    #[test]
    fn file_values_and_overrides() {
        let cfg = PipelineConfig::from_toml_str("epochs = 7\nreducer = \"mean\"\ncandidates = [4, 8]\n").unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.reducer, Reducer::Mean);
        assert_eq!(cfg.candidates, vec![4, 8]);
        let over = cfg
            .with_overrides(&["epochs=3".into(), "reducer=first".into(), "dtw-band=4".into()])
            .unwrap();
        assert_eq!((over.epochs, over.reducer, over.dtw_band), (3, Reducer::First, Some(4)));
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(PipelineConfig::from_toml_str("epoch = 3").is_err());
        assert!(PipelineConfig::from_toml_str("theta_percentile = 0").is_err());
        assert!(PipelineConfig::default().with_overrides(&["noequals".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let b = a.with_overrides(&["seed=1".into()]).unwrap();
        assert_eq!(a.hash(), PipelineConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
