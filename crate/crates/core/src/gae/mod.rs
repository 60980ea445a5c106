//! Variational graph autoencoder over segment graphs.
//!
//! The encoder stacks multi-head graph-attention layers and neighbor-restricted
//! transformer layers, then projects to a latent mean and log-variance. The
//! decoder reconstructs node features from a reparameterized latent sample.
//! The post-transformer representation `H2` is what downstream classifiers
//! consume.

mod config;
mod model;
mod train;

pub use config::GaeConfig;
pub use model::{
    attention_row_error, gat_layer, loss_vars, reparameterize, transformer_conv_layer, vae_loss, EncoderVars, Encoding,
    ForwardVars, Gae, GaeCheckpoint, GatHead, LayerOutput, LossParts, LossVars, TransformerHead,
    CHECKPOINT_FORMAT_VERSION,
};
pub use train::{stratified_split, train, LossCurves, NodeSplit, TrainedGae};
