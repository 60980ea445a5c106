use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::GaeConfig;
use crate::autodiff::{Checkpoint, Matrix, Neighborhoods, ParamId, ParamSet, Tape, Var};
use crate::data::io::{read_to_string, write_atomic};
use crate::error::{Error, Result};
use crate::graph::FaultGraph;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GatHead {
    pub weight: ParamId,
    /// `2 * hidden_dim x 1`: source half on top, neighbor half below.
    pub attention: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformerHead {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Variational graph autoencoder. Matrices act on row vectors: a layer with
/// weight `W` maps `H` to `H W`.
#[derive(Clone, Debug)]
pub struct Gae {
    config: GaeConfig,
    params: ParamSet,
    gat: Vec<Vec<GatHead>>,
    transformer: Vec<Vec<TransformerHead>>,
    mean: ParamId,
    logvar: ParamId,
    decoder_hidden: ParamId,
    decoder_output: ParamId,
}

/// One attention layer's output and the per-head attention columns.
pub struct LayerOutput<'t> {
    pub output: Var<'t>,
    pub attention: Vec<Var<'t>>,
}

/// Encoder values recorded on a tape.
pub struct EncoderVars<'t> {
    pub h2: Var<'t>,
    pub mu: Var<'t>,
    pub logvar: Var<'t>,
    pub attention: Vec<Var<'t>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    pub mu: Matrix,
    pub logvar: Matrix,
    pub h2: Matrix,
}

/// Encoder, reconstruction, and loss of one full forward pass.
pub struct ForwardVars<'t> {
    pub encoder: EncoderVars<'t>,
    pub x_hat: Var<'t>,
    pub loss: LossVars<'t>,
}

pub struct LossVars<'t> {
    pub total: Var<'t>,
    pub reconstruction: Var<'t>,
    pub kl: Var<'t>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

/// Multi-head graph attention. Per head, `e_ij = LeakyReLU(a^T [W h_i || W h_j])`
/// is softmaxed over `j` in the neighborhood of `i`, and the head output is
/// `ReLU(sum_j alpha_ij W h_j)`. Heads are averaged.
pub fn gat_layer<'t>(
    h: &Var<'t>,
    heads: &[(Var<'t>, Var<'t>)],
    nb: &Arc<Neighborhoods>,
    slope: f64,
) -> Result<LayerOutput<'t>> {
    assert!(nb.has_self_loops(), "attention neighborhoods must include self-loops");
    let mut acc: Option<Var<'t>> = None;
    let mut attention = Vec::with_capacity(heads.len());
    for (w, a) in heads {
        let wh = h.matmul(w)?;
        let width = wh.shape().1;
        if a.shape() != (2 * width, 1) {
            return Err(Error::Shape {
                op: "gat_layer",
                left: a.shape(),
                right: (2 * width, 1),
            });
        }
        let src: Vec<usize> = (0..width).collect();
        let dst: Vec<usize> = (width..2 * width).collect();
        let s = wh.matmul(&a.select_rows(&src)?)?;
        let d = wh.matmul(&a.select_rows(&dst)?)?;
        let alpha = s.edge_sum(&d, nb)?.leaky_relu(slope).masked_neighbor_softmax(nb)?;
        let out = alpha.neighbor_aggregate(&wh, nb)?.relu();
        attention.push(alpha);
        acc = Some(match acc {
            Some(sum) => sum.add(&out)?,
            None => out,
        });
    }
    let sum = acc.ok_or_else(|| Error::invalid("gat_layer needs at least one head"))?;
    Ok(LayerOutput {
        output: sum.scale(1.0 / heads.len() as f64),
        attention,
    })
}

/// Multi-head neighbor-restricted dot-product attention:
/// `ELU(sum_j softmax_j(q_i . k_j / sqrt(d)) v_j)`, averaged over heads.
pub fn transformer_conv_layer<'t>(
    h: &Var<'t>,
    heads: &[[Var<'t>; 3]],
    nb: &Arc<Neighborhoods>,
) -> Result<LayerOutput<'t>> {
    assert!(nb.has_self_loops(), "attention neighborhoods must include self-loops");
    let mut acc: Option<Var<'t>> = None;
    let mut attention = Vec::with_capacity(heads.len());
    for [wq, wk, wv] in heads {
        let q = h.matmul(wq)?;
        let k = h.matmul(wk)?;
        let v = h.matmul(wv)?;
        let scale = 1.0 / (q.shape().1 as f64).sqrt();
        let alpha = q.edge_dot(&k, nb)?.scale(scale).masked_neighbor_softmax(nb)?;
        let out = alpha.neighbor_aggregate(&v, nb)?.elu();
        attention.push(alpha);
        acc = Some(match acc {
            Some(sum) => sum.add(&out)?,
            None => out,
        });
    }
    let sum = acc.ok_or_else(|| Error::invalid("transformer_conv_layer needs at least one head"))?;
    Ok(LayerOutput {
        output: sum.scale(1.0 / heads.len() as f64),
        attention,
    })
}

/// `L_rec = (1/m) sum_i |x_i - xhat_i|^2`,
/// `L_KL = -(1/2m) sum (1 + logvar - mu^2 - exp(logvar))`, `L = L_rec + lambda L_KL`.
pub fn loss_vars<'t>(
    x: &Var<'t>,
    x_hat: &Var<'t>,
    mu: &Var<'t>,
    logvar: &Var<'t>,
    lambda: f64,
) -> Result<LossVars<'t>> {
    let m = x.shape().0;
    if m == 0 || mu.shape().0 != m || logvar.shape() != mu.shape() {
        return Err(Error::Shape {
            op: "loss",
            left: x.shape(),
            right: mu.shape(),
        });
    }
    let reconstruction = x.sub(x_hat)?.square().sum().scale(1.0 / m as f64);
    let one = x.tape().scalar(1.0);
    let kl = one
        .add(logvar)?
        .sub(&mu.square())?
        .sub(&logvar.exp())?
        .sum()
        .scale(-0.5 / m as f64);
    let total = reconstruction.add(&kl.scale(lambda))?;
    Ok(LossVars {
        total,
        reconstruction,
        kl,
    })
}

pub fn vae_loss(x: &Matrix, x_hat: &Matrix, mu: &Matrix, logvar: &Matrix, lambda: f64) -> Result<LossParts> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Shape {
            op: "loss",
            left: x.dim(),
            right: x_hat.dim(),
        });
    }
    let tape = Tape::new();
    let v = |m: &Matrix| tape.constant(m.clone());
    let l = loss_vars(&v(x), &v(x_hat), &v(mu), &v(logvar), lambda)?;
    Ok(LossParts {
        total: l.total.item(),
        reconstruction: l.reconstruction.item(),
        kl: l.kl.item(),
    })
}

/// `Z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, I)`.
pub fn reparameterize(mu: &Matrix, logvar: &Matrix, rng: &mut impl Rng) -> Result<Matrix> {
    if mu.dim() != logvar.dim() {
        return Err(Error::Shape {
            op: "reparameterize",
            left: mu.dim(),
            right: logvar.dim(),
        });
    }
    let eps = standard_normal(mu.dim(), rng);
    Ok(mu + &(logvar.mapv(|v| (0.5 * v).exp()) * &eps))
}

pub(crate) fn standard_normal(shape: (usize, usize), rng: &mut impl Rng) -> Matrix {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

/// Largest `|sum_j alpha_ij - 1|` over all nodes.
pub fn attention_row_error(alpha: &Matrix, nb: &Neighborhoods) -> f64 {
    (0..nb.node_count())
        .map(|i| (nb.row_range(i).map(|e| alpha[[e, 0]]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaeCheckpoint {
    pub format_version: u32,
    pub config: GaeConfig,
    pub params: Checkpoint,
}

impl Gae {
    /// Xavier-uniform weights and zero attention vectors, seeded by `config.seed`.
    pub fn new(config: GaeConfig) -> Result<Gae> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let hd = config.hidden_dim;
        let mut gat = Vec::new();
        for l in 0..config.num_gat_layers {
            let d_in = if l == 0 { config.input_dim } else { hd };
            let heads = (0..config.gat_heads)
                .map(|h| GatHead {
                    weight: params.insert(format!("gat.{l}.{h}.weight"), xavier(d_in, hd, &mut rng)),
                    attention: params.insert(format!("gat.{l}.{h}.attention"), Array2::zeros((2 * hd, 1))),
                })
                .collect();
            gat.push(heads);
        }
        let mut transformer = Vec::new();
        for l in 0..config.num_transformer_layers {
            let d_in = if l == 0 && config.num_gat_layers == 0 {
                config.input_dim
            } else {
                hd
            };
            let heads = (0..config.transformer_heads)
                .map(|h| TransformerHead {
                    query: params.insert(format!("transformer.{l}.{h}.query"), xavier(d_in, hd, &mut rng)),
                    key: params.insert(format!("transformer.{l}.{h}.key"), xavier(d_in, hd, &mut rng)),
                    value: params.insert(format!("transformer.{l}.{h}.value"), xavier(d_in, hd, &mut rng)),
                })
                .collect();
            transformer.push(heads);
        }
        let (zd, dd) = (config.latent_dim, config.decoder_dim);
        let mean = params.insert("latent.mean", xavier(hd, zd, &mut rng));
        let logvar = params.insert("latent.logvar", xavier(hd, zd, &mut rng));
        let decoder_hidden = params.insert("decoder.hidden", xavier(zd, dd, &mut rng));
        let decoder_output = params.insert("decoder.output", xavier(dd, config.input_dim, &mut rng));
        Ok(Gae {
            config,
            params,
            gat,
            transformer,
            mean,
            logvar,
            decoder_hidden,
            decoder_output,
        })
    }

    pub fn config(&self) -> &GaeConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn gat_heads(&self) -> &[Vec<GatHead>] {
        &self.gat
    }

    pub fn transformer_heads(&self) -> &[Vec<TransformerHead>] {
        &self.transformer
    }

    /// Ids of the latent mean/log-variance heads and the two decoder weights.
    pub fn head_ids(&self) -> [ParamId; 4] {
        [self.mean, self.logvar, self.decoder_hidden, self.decoder_output]
    }

    fn check_features(&self, features: &Matrix) -> Result<()> {
        if features.ncols() != self.config.input_dim {
            return Err(Error::invalid(format!(
                "graph has {} features per node, model expects {}",
                features.ncols(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Encoder forward on a tape; `bound` comes from `self.params().bind(tape)`.
    pub fn encode_vars<'t>(&self, bound: &[Var<'t>], x: Var<'t>, nb: &Arc<Neighborhoods>) -> Result<EncoderVars<'t>> {
        let mut h = x;
        let mut attention = Vec::new();
        for layer in &self.gat {
            let heads: Vec<_> = layer
                .iter()
                .map(|p| (bound[p.weight.0], bound[p.attention.0]))
                .collect();
            let out = gat_layer(&h, &heads, nb, self.config.leaky_slope)?;
            attention.extend(out.attention);
            h = out.output;
        }
        for layer in &self.transformer {
            let heads: Vec<_> = layer
                .iter()
                .map(|p| [bound[p.query.0], bound[p.key.0], bound[p.value.0]])
                .collect();
            let out = transformer_conv_layer(&h, &heads, nb)?;
            attention.extend(out.attention);
            h = out.output;
        }
        Ok(EncoderVars {
            mu: h.matmul(&bound[self.mean.0])?,
            logvar: h.matmul(&bound[self.logvar.0])?,
            h2: h,
            attention,
        })
    }

    /// `X_hat = sigmoid(ReLU(Z W_1) W_2)`.
    pub fn decode_vars<'t>(&self, bound: &[Var<'t>], z: &Var<'t>) -> Result<Var<'t>> {
        Ok(z.matmul(&bound[self.decoder_hidden.0])?
            .relu()
            .matmul(&bound[self.decoder_output.0])?
            .sigmoid())
    }

    /// Encode, sample `Z = mu + exp(logvar / 2) * eps` with the given noise,
    /// decode, and take the loss over `rows`.
    pub fn forward_loss<'t>(
        &self,
        bound: &[Var<'t>],
        x: Var<'t>,
        nb: &Arc<Neighborhoods>,
        eps: Var<'t>,
        rows: &[usize],
    ) -> Result<ForwardVars<'t>> {
        let encoder = self.encode_vars(bound, x, nb)?;
        let z = encoder.logvar.scale(0.5).exp().mul(&eps)?.add(&encoder.mu)?;
        let x_hat = self.decode_vars(bound, &z)?;
        let pick = |v: &Var<'t>| v.select_rows(rows);
        let loss = loss_vars(
            &pick(&x)?,
            &pick(&x_hat)?,
            &pick(&encoder.mu)?,
            &pick(&encoder.logvar)?,
            self.config.kl_weight,
        )?;
        Ok(ForwardVars { encoder, x_hat, loss })
    }

    pub fn encode(&self, graph: &FaultGraph) -> Result<Encoding> {
        self.check_features(&graph.features)?;
        let tape = Tape::new();
        let bound = self.bind_constants(&tape);
        let enc = self.encode_vars(&bound, tape.constant(graph.features.clone()), &graph.neighborhoods())?;
        let out = Encoding {
            mu: enc.mu.value().clone(),
            logvar: enc.logvar.value().clone(),
            h2: enc.h2.value().clone(),
        };
        Ok(out)
    }

    /// Deterministic encoder forward; returns the `m x hidden_dim` embedding.
    pub fn embed(&self, graph: &FaultGraph) -> Result<Matrix> {
        Ok(self.encode(graph)?.h2)
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.ncols() != self.config.latent_dim {
            return Err(Error::Shape {
                op: "decode",
                left: z.dim(),
                right: (z.nrows(), self.config.latent_dim),
            });
        }
        let tape = Tape::new();
        let bound = self.bind_constants(&tape);
        let out = self.decode_vars(&bound, &tape.constant(z.clone()))?;
        let v = out.value().clone();
        Ok(v)
    }

    fn bind_constants<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params
            .iter()
            .map(|(_, t)| tape.constant(t.value.clone()))
            .collect()
    }

    pub fn to_checkpoint(&self) -> GaeCheckpoint {
        GaeCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: self.config.clone(),
            params: self.params.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &GaeCheckpoint) -> Result<Gae> {
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint format {} (expected {CHECKPOINT_FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        let mut model = Gae::new(ckpt.config.clone())?;
        model.params.load_checkpoint(&ckpt.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(&self.to_checkpoint())?;
        write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Gae> {
        let ckpt: GaeCheckpoint = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        Gae::from_checkpoint(&ckpt)
    }
}
