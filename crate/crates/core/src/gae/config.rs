use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and training settings for the graph autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Width of the decoder's intermediate layer.
    pub decoder_dim: usize,
    pub num_gat_layers: usize,
    pub num_transformer_layers: usize,
    pub gat_heads: usize,
    pub transformer_heads: usize,
    pub kl_weight: f64,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        GaeConfig {
            input_dim: 10,
            hidden_dim: 64,
            latent_dim: 10,
            decoder_dim: 64,
            num_gat_layers: 3,
            num_transformer_layers: 2,
            gat_heads: 10,
            transformer_heads: 5,
            kl_weight: 0.1,
            leaky_slope: 0.2,
            epochs: 50,
            learning_rate: 5e-3,
            seed: 0,
            train_fraction: 0.70,
            val_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl GaeConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("latent_dim", self.latent_dim),
            ("decoder_dim", self.decoder_dim),
            ("gat_heads", self.gat_heads),
            ("transformer_heads", self.transformer_heads),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.num_gat_layers + self.num_transformer_layers == 0 {
            return Err(Error::invalid("the encoder needs at least one attention layer"));
        }
        if !(self.kl_weight >= 0.0) {
            return Err(Error::invalid(format!(
                "kl_weight must be non-negative, got {}",
                self.kl_weight
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions {fractions:?} must lie in [0,1] and sum to 1"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_architecture() {
        let c = GaeConfig::default();
        assert_eq!(
            (
                c.input_dim,
                c.hidden_dim,
                c.latent_dim,
                c.num_gat_layers,
                c.num_transformer_layers
            ),
            (10, 64, 10, 3, 2)
        );
        assert_eq!(
            (c.gat_heads, c.transformer_heads, c.kl_weight, c.epochs),
            (10, 5, 0.1, 50)
        );
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_fractions_and_dims() {
        let mut c = GaeConfig {
            train_fraction: 0.8,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = GaeConfig {
            hidden_dim: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c = GaeConfig {
            kl_weight: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
