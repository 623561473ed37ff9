//! The CosRec network.
//!
//! Data flow for one sample: the `L` most recent item ids are looked up in
//! the item table, pairwise-encoded into a `[2d, L, L]` grid, passed through
//! the sequence encoder (two conv blocks or the MLP ablation) to a
//! `d`-wide feature vector, concatenated with the user embedding and
//! projected to one logit per real item.

mod config;
mod embedding;
mod loss;
mod pairwise;

pub use config::{
    CosRecConfig, Variant, DEFAULT_BLOCK_CHANNELS, DEFAULT_DROPOUT, DEFAULT_HORIZON, DEFAULT_KERNELS,
    DEFAULT_MARKOV_ORDER, DEFAULT_MLP_HIDDEN,
};
pub use embedding::{lookup, scatter_add};
pub use loss::{bce_with_negatives, softplus};
pub use pairwise::{pairwise_backward, pairwise_encode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::TrainWindow;
use crate::error::{Error, Result};
use crate::nn::{
    relu, relu_backward, sigmoid_scalar, BatchNorm, BatchNormCache, Conv2d, Conv2dCache, Dense, DenseCache, Dropout,
    DropoutCache, GatherCache, Mode, ReluCache,
};
use crate::tensor::{Scalar, Tensor};

pub const CONV_NAMES: [&str; 4] = ["conv1_1", "conv1_2", "conv2_1", "conv2_2"];
pub const NORM_NAMES: [&str; 4] = ["bn1_1", "bn1_2", "bn2_1", "bn2_2"];
pub const EMBEDDING_STD: f64 = 0.01;

/// Pre-sigmoid scores for items `1..=num_items`; index `i` holds item `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn logits(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn item(&self, item: u32) -> f64 {
        self.0[item as usize - 1]
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.0.iter().map(|&v| sigmoid_scalar(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnEncoder<S> {
    pub convs: Vec<Conv2d<S>>,
    pub norms: Vec<BatchNorm<S>>,
    pub fc: Dense<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpEncoder<S> {
    pub hidden: Dense<S>,
    pub fc: Dense<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder<S> {
    Cnn(CnnEncoder<S>),
    Mlp(MlpEncoder<S>),
}

enum EncoderCache<S> {
    Cnn {
        blocks: Vec<(Conv2dCache<S>, BatchNormCache<S>, ReluCache)>,
        conv_out_shape: Vec<usize>,
        fc: DenseCache<S>,
        relu: ReluCache,
    },
    Mlp {
        input_shape: Vec<usize>,
        hidden: DenseCache<S>,
        relu_hidden: ReluCache,
        fc: DenseCache<S>,
        relu: ReluCache,
    },
}

impl<S: Scalar> Encoder<S> {
    fn build(config: &CosRecConfig) -> Result<Self> {
        let d = config.dim;
        Ok(match config.variant {
            Variant::Cnn => {
                let [d1, d2] = config.block_channels;
                let widths = [(2 * d, d1), (d1, d1), (d1, d2), (d2, d2)];
                let convs = widths
                    .iter()
                    .zip(config.kernels)
                    .map(|(&(i, o), k)| Conv2d::new(i, o, k, false))
                    .collect::<Result<Vec<_>>>()?;
                let norms = widths.iter().map(|&(_, o)| BatchNorm::new(o)).collect();
                Encoder::Cnn(CnnEncoder { convs, norms, fc: Dense::new(config.encoder_out_width(), d)? })
            }
            Variant::MlpBase => {
                let l = config.markov_order;
                Encoder::Mlp(MlpEncoder {
                    hidden: Dense::new(2 * d * l * l, config.mlp_hidden)?,
                    fc: Dense::new(config.mlp_hidden, d)?,
                })
            }
        })
    }

    fn forward(&mut self, x: &Tensor<S>, mode: Mode) -> Result<(Tensor<S>, EncoderCache<S>)> {
        match self {
            Encoder::Cnn(enc) => {
                let mut h = x.clone();
                let mut blocks = Vec::with_capacity(enc.convs.len());
                for (conv, norm) in enc.convs.iter().zip(enc.norms.iter_mut()) {
                    let (c, cc) = conv.forward(&h)?;
                    let (n, nc) = norm.forward(&c, mode)?;
                    let (r, rc) = relu(&n);
                    blocks.push((cc, nc, rc));
                    h = r;
                }
                let conv_out_shape = h.shape().to_vec();
                let batch = conv_out_shape[0];
                let flat = h.reshape([batch, enc.fc.inputs()])?;
                let (f, fc) = enc.fc.forward(&flat)?;
                let (v, rc) = relu(&f);
                Ok((v, EncoderCache::Cnn { blocks, conv_out_shape, fc, relu: rc }))
            }
            Encoder::Mlp(enc) => {
                let batch = x.dim(0);
                let flat = x.clone().reshape([batch, enc.hidden.inputs()])?;
                let (h, hc) = enc.hidden.forward(&flat)?;
                let (h, hr) = relu(&h);
                let (f, fc) = enc.fc.forward(&h)?;
                let (v, rc) = relu(&f);
                Ok((
                    v,
                    EncoderCache::Mlp { input_shape: x.shape().to_vec(), hidden: hc, relu_hidden: hr, fc, relu: rc },
                ))
            }
        }
    }

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        match self {
            Encoder::Cnn(enc) => {
                let mut h = x.clone();
                for (conv, norm) in enc.convs.iter().zip(&enc.norms) {
                    h = relu(&norm.infer(&conv.infer(&h)?)?).0;
                }
                let batch = h.dim(0);
                let flat = h.reshape([batch, enc.fc.inputs()])?;
                Ok(relu(&enc.fc.infer(&flat)?).0)
            }
            Encoder::Mlp(enc) => {
                let batch = x.dim(0);
                let flat = x.clone().reshape([batch, enc.hidden.inputs()])?;
                let h = relu(&enc.hidden.infer(&flat)?).0;
                Ok(relu(&enc.fc.infer(&h)?).0)
            }
        }
    }

    /// Returns the input gradient and parameter gradients in
    /// [`Encoder::parameters`] order.
    fn backward(&self, cache: EncoderCache<S>, grad_v: &Tensor<S>) -> Result<(Tensor<S>, Vec<Tensor<S>>)> {
        match (self, cache) {
            (Encoder::Cnn(enc), EncoderCache::Cnn { blocks, conv_out_shape, fc, relu: rc }) => {
                let g = relu_backward(rc, grad_v)?;
                let (g, fc_grads) = enc.fc.backward(fc, &g)?;
                let mut g = g.reshape(conv_out_shape)?;
                let mut per_block = Vec::with_capacity(blocks.len());
                for ((conv, norm), (cc, nc, rc)) in enc.convs.iter().zip(&enc.norms).zip(blocks).rev() {
                    let gr = relu_backward(rc, &g)?;
                    let (gn, ng) = norm.backward(nc, &gr)?;
                    let (gc, cg) = conv.backward(cc, &gn)?;
                    per_block.push((cg, ng));
                    g = gc;
                }
                per_block.reverse();
                let mut grads = Vec::new();
                for (cg, ng) in per_block {
                    grads.push(cg.weight);
                    grads.extend(cg.bias);
                    grads.push(ng.scale);
                    grads.push(ng.shift);
                }
                grads.push(fc_grads.weight);
                grads.push(fc_grads.bias);
                Ok((g, grads))
            }
            (Encoder::Mlp(enc), EncoderCache::Mlp { input_shape, hidden, relu_hidden, fc, relu: rc }) => {
                let g = relu_backward(rc, grad_v)?;
                let (g, fc_grads) = enc.fc.backward(fc, &g)?;
                let g = relu_backward(relu_hidden, &g)?;
                let (g, hidden_grads) = enc.hidden.backward(hidden, &g)?;
                let grads = vec![hidden_grads.weight, hidden_grads.bias, fc_grads.weight, fc_grads.bias];
                Ok((g.reshape(input_shape)?, grads))
            }
            _ => Err(crate::error::cache_err("encoder", "cache from a different variant")),
        }
    }

    fn parameters(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        match self {
            Encoder::Cnn(enc) => {
                for (i, (conv, norm)) in enc.convs.iter().zip(&enc.norms).enumerate() {
                    out.push((format!("{}.weight", CONV_NAMES[i]), &conv.weight));
                    if let Some(b) = &conv.bias {
                        out.push((format!("{}.bias", CONV_NAMES[i]), b));
                    }
                    out.push((format!("{}.scale", NORM_NAMES[i]), &norm.scale));
                    out.push((format!("{}.shift", NORM_NAMES[i]), &norm.shift));
                }
                out.push(("fc.weight".into(), &enc.fc.weight));
                out.push(("fc.bias".into(), &enc.fc.bias));
            }
            Encoder::Mlp(enc) => {
                out.push(("mlp_hidden.weight".into(), &enc.hidden.weight));
                out.push(("mlp_hidden.bias".into(), &enc.hidden.bias));
                out.push(("fc.weight".into(), &enc.fc.weight));
                out.push(("fc.bias".into(), &enc.fc.bias));
            }
        }
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        match self {
            Encoder::Cnn(enc) => {
                for (conv, norm) in enc.convs.iter_mut().zip(enc.norms.iter_mut()) {
                    out.push(&mut conv.weight);
                    if let Some(b) = conv.bias.as_mut() {
                        out.push(b);
                    }
                    out.push(&mut norm.scale);
                    out.push(&mut norm.shift);
                }
                out.push(&mut enc.fc.weight);
                out.push(&mut enc.fc.bias);
            }
            Encoder::Mlp(enc) => {
                out.push(&mut enc.hidden.weight);
                out.push(&mut enc.hidden.bias);
                out.push(&mut enc.fc.weight);
                out.push(&mut enc.fc.bias);
            }
        }
        out
    }
}

/// Parameter gradients, in [`CosRecModel::parameters`] order.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    pub tensors: Vec<Tensor<S>>,
}

enum Head<S> {
    Full(DenseCache<S>),
    Gather(GatherCache<S>),
}

/// Everything a training forward pass saved for [`CosRecModel::backward`].
pub struct ForwardCache<S> {
    users: Vec<u32>,
    windows: Vec<u32>,
    encoder: EncoderCache<S>,
    dropout: DropoutCache<S>,
    head: Head<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosRecModel<S = f32> {
    config: CosRecConfig,
    /// `[num_items + 1, d]`; row 0 is the padding item.
    pub item_embeddings: Tensor<S>,
    /// `[num_users, d]`
    pub user_embeddings: Tensor<S>,
    pub encoder: Encoder<S>,
    /// `[num_items, 2d]`; row `i` scores item `i + 1`.
    pub output: Dense<S>,
    dropout: Dropout,
}

impl<S: Scalar> CosRecModel<S> {
    pub fn new(config: CosRecConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        model.init_parameters(seed);
        Ok(model)
    }

    /// A model with every parameter zero and fresh normalization statistics.
    pub fn zeroed(config: CosRecConfig) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        Ok(Self {
            item_embeddings: Tensor::zeros([config.num_items + 1, d]),
            user_embeddings: Tensor::zeros([config.num_users, d]),
            encoder: Encoder::build(&config)?,
            output: Dense::new(2 * d, config.num_items)?,
            dropout: Dropout::new(config.dropout)?,
            config,
        })
    }

    /// Embeddings ~ N(0, 0.01^2), conv/dense weights Xavier-uniform, biases
    /// zero, normalization scale one and shift zero. Deterministic in `seed`.
    pub fn init_parameters(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, EMBEDDING_STD).expect("valid std");
        for table in [&mut self.item_embeddings, &mut self.user_embeddings] {
            for v in table.data_mut() {
                *v = S::lit(normal.sample(&mut rng));
            }
        }
        let xavier = |w: &mut Tensor<S>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.data_mut() {
                *v = S::lit(rng.random_range(-bound..bound));
            }
        };
        let init_dense = |layer: &mut Dense<S>, rng: &mut ChaCha8Rng| {
            let (i, o) = (layer.inputs(), layer.outputs());
            xavier(&mut layer.weight, i, o, rng);
            layer.bias.data_mut().fill(S::zero());
        };
        match &mut self.encoder {
            Encoder::Cnn(enc) => {
                for (conv, norm) in enc.convs.iter_mut().zip(enc.norms.iter_mut()) {
                    let area = conv.kernel() * conv.kernel();
                    let (i, o) = (conv.in_channels() * area, conv.out_channels() * area);
                    xavier(&mut conv.weight, i, o, &mut rng);
                    if let Some(b) = conv.bias.as_mut() {
                        b.data_mut().fill(S::zero());
                    }
                    *norm = BatchNorm::new(norm.channels());
                }
                init_dense(&mut enc.fc, &mut rng);
            }
            Encoder::Mlp(enc) => {
                init_dense(&mut enc.hidden, &mut rng);
                init_dense(&mut enc.fc, &mut rng);
            }
        }
        init_dense(&mut self.output, &mut rng);
    }

    pub fn config(&self) -> &CosRecConfig {
        &self.config
    }

    pub fn parameters(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = vec![
            ("item_embeddings".to_string(), &self.item_embeddings),
            ("user_embeddings".to_string(), &self.user_embeddings),
        ];
        out.extend(self.encoder.parameters());
        out.push(("output.weight".into(), &self.output.weight));
        out.push(("output.bias".into(), &self.output.bias));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = vec![&mut self.item_embeddings, &mut self.user_embeddings];
        out.extend(self.encoder.parameters_mut());
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    /// Non-trainable state: normalization running statistics.
    pub fn buffers(&self) -> Vec<(String, &Tensor<S>)> {
        match &self.encoder {
            Encoder::Cnn(enc) => enc
                .norms
                .iter()
                .enumerate()
                .flat_map(|(i, n)| {
                    [
                        (format!("{}.running_mean", NORM_NAMES[i]), &n.running_mean),
                        (format!("{}.running_var", NORM_NAMES[i]), &n.running_var),
                    ]
                })
                .collect(),
            Encoder::Mlp(_) => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<S>> {
        match &mut self.encoder {
            Encoder::Cnn(enc) => enc.norms.iter_mut().flat_map(|n| [&mut n.running_mean, &mut n.running_var]).collect(),
            Encoder::Mlp(_) => Vec::new(),
        }
    }

    /// The first-block filters, for inspection.
    pub fn conv_layer(&self, name: &str) -> Option<&Conv2d<S>> {
        match &self.encoder {
            Encoder::Cnn(enc) => CONV_NAMES.iter().position(|&n| n == name).map(|i| &enc.convs[i]),
            Encoder::Mlp(_) => None,
        }
    }

    /// `[L, d]` embedding rows of a window.
    pub fn lookup_window(&self, items: &[u32]) -> Result<Tensor<S>> {
        if items.len() != self.config.markov_order {
            return Err(Error::Config(format!(
                "window has {} items, model expects {}",
                items.len(),
                self.config.markov_order
            )));
        }
        lookup(&self.item_embeddings, items, "item")
    }

    fn check_batch(&self, users: &[u32], windows: &[u32]) -> Result<usize> {
        let l = self.config.markov_order;
        if windows.len() != users.len() * l {
            return Err(Error::Config(format!(
                "{} window items for {} users with L = {l}",
                windows.len(),
                users.len()
            )));
        }
        if let Some(&u) = users.iter().find(|&&u| u as usize >= self.config.num_users) {
            return Err(Error::IdOutOfRange { kind: "user", id: u as usize, limit: self.config.num_users });
        }
        Ok(users.len())
    }

    fn pairwise_input(&self, windows: &[u32], batch: usize) -> Result<Tensor<S>> {
        let (l, d) = (self.config.markov_order, self.config.dim);
        let e = lookup(&self.item_embeddings, windows, "item")?.reshape([batch, l, d])?;
        pairwise_encode(&e)
    }

    fn concat_user(&self, v: &Tensor<S>, users: &[u32]) -> Result<Tensor<S>> {
        let d = self.config.dim;
        let u = lookup(&self.user_embeddings, users, "user")?;
        let mut x = Vec::with_capacity(users.len() * 2 * d);
        for (vr, ur) in v.data().chunks_exact(d).zip(u.data().chunks_exact(d)) {
            x.extend_from_slice(vr);
            x.extend_from_slice(ur);
        }
        Ok(Tensor::new([users.len(), 2 * d], x)?)
    }

    fn features<R: Rng + ?Sized>(
        &mut self,
        users: &[u32],
        windows: &[u32],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<S>, EncoderCache<S>, DropoutCache<S>)> {
        let batch = self.check_batch(users, windows)?;
        let p = self.pairwise_input(windows, batch)?;
        let (v, enc_cache) = self.encoder.forward(&p, mode)?;
        let (v, drop_cache) = self.dropout.forward(&v, mode, rng);
        Ok((self.concat_user(&v, users)?, enc_cache, drop_cache))
    }

    /// Full forward pass producing `[B, num_items]` logits. `windows` holds
    /// `L` item ids per user, oldest first.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        users: &[u32],
        windows: &[u32],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<S>, ForwardCache<S>)> {
        let (x, encoder, dropout) = self.features(users, windows, mode, rng)?;
        let (logits, head) = self.output.forward(&x)?;
        Ok((
            logits,
            ForwardCache { users: users.to_vec(), windows: windows.to_vec(), encoder, dropout, head: Head::Full(head) },
        ))
    }

    /// Gradients of `sum(grad_logits * logits)` with respect to every parameter.
    pub fn backward(&self, cache: ForwardCache<S>, grad_logits: &Tensor<S>) -> Result<Gradients<S>> {
        let (gx, out_grads) = match cache.head {
            Head::Full(c) => self.output.backward(c, grad_logits)?,
            Head::Gather(c) => self.output.backward_gather(c, grad_logits)?,
        };
        let d = self.config.dim;
        let batch = cache.users.len();
        let mut gv = Vec::with_capacity(batch * d);
        let mut gu = Vec::with_capacity(batch * d);
        for row in gx.data().chunks_exact(2 * d) {
            gv.extend_from_slice(&row[..d]);
            gu.extend_from_slice(&row[d..]);
        }
        let gv = Dropout::backward(cache.dropout, &Tensor::new([batch, d], gv)?)?;
        let (gp, enc_grads) = self.encoder.backward(cache.encoder, &gv)?;
        let ge = pairwise_backward(&gp)?;

        let mut g_items = Tensor::zeros(self.item_embeddings.shape().to_vec());
        scatter_add(&mut g_items, &cache.windows, ge.data());
        let mut g_users = Tensor::zeros(self.user_embeddings.shape().to_vec());
        scatter_add(&mut g_users, &cache.users, &gu);

        let mut tensors = vec![g_items, g_users];
        tensors.extend(enc_grads);
        tensors.push(out_grads.weight);
        tensors.push(out_grads.bias);
        Ok(Gradients { tensors })
    }

    /// Training step objective: binary cross-entropy over each window's
    /// targets and its sampled negatives, summed and divided by the batch
    /// size, together with the parameter gradients.
    ///
    /// `negatives` holds `N * T` item ids per window, in window order.
    pub fn loss_and_backward<R: Rng + ?Sized>(
        &mut self,
        batch: &[TrainWindow],
        negatives: &[u32],
        rng: &mut R,
    ) -> Result<(S, Gradients<S>)> {
        let t = self.config.horizon;
        let b = batch.len();
        if b == 0 {
            return Err(Error::Config("empty training batch".into()));
        }
        if !negatives.len().is_multiple_of(b * t) {
            return Err(Error::Config(format!(
                "{} negatives do not divide into {b} windows x {t} targets",
                negatives.len()
            )));
        }
        let per_window_neg = negatives.len() / b;
        let per_sample = t + per_window_neg;

        let mut users = Vec::with_capacity(b);
        let mut windows = Vec::with_capacity(b * self.config.markov_order);
        let mut rows = Vec::with_capacity(b * per_sample);
        for (w, negs) in batch.iter().zip(negatives.chunks_exact(per_window_neg.max(1))) {
            if w.targets.len() != t {
                return Err(Error::Config(format!("window has {} targets, model expects {t}", w.targets.len())));
            }
            users.push(w.user);
            windows.extend_from_slice(&w.input);
            for &item in w.targets.iter().chain(negs.iter().take(per_window_neg)) {
                if item == 0 || item as usize > self.config.num_items {
                    return Err(Error::IdOutOfRange {
                        kind: "target or negative item",
                        id: item as usize,
                        limit: self.config.num_items + 1,
                    });
                }
                rows.push(item as usize - 1);
            }
            if let Some(&hit) = negs.iter().take(per_window_neg).find(|n| w.targets.contains(n)) {
                return Err(Error::NegativeIsTarget { item: hit });
            }
        }

        let (x, encoder, dropout) = self.features(&users, &windows, Mode::Train, rng)?;
        let (logits, head) = self.output.forward_gather(&x, &rows, per_sample)?;
        let (loss, grad) = bce_with_negatives(&logits, t)?;
        let cache = ForwardCache { users, windows, encoder, dropout, head: Head::Gather(head) };
        Ok((loss, self.backward(cache, &grad)?))
    }

    /// Eval-mode logits for a batch of users, `[B, num_items]`.
    pub fn score_batch(&self, users: &[u32], windows: &[u32]) -> Result<Tensor<S>> {
        let batch = self.check_batch(users, windows)?;
        let p = self.pairwise_input(windows, batch)?;
        let v = self.encoder.infer(&p)?;
        let x = self.concat_user(&v, users)?;
        self.output.infer(&x)
    }

    pub fn score(&self, user: u32, window: &[u32]) -> Result<ScoreVector> {
        let logits = self.score_batch(&[user], window)?;
        Ok(ScoreVector(logits.data().iter().map(|v| v.as_f64()).collect()))
    }
}
