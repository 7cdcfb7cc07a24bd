//! The two seizure-prediction network architectures.
//!
//! Model I is a single-branch CNN with a shared 360-unit embedding and
//! two heads: a sigmoid seizure probability and a 24-way patient
//! softmax, trained with a mixed loss.
//!
//! Model II is a Siamese encoder producing 100-unit embeddings for a
//! pair of windows; a contrastive loss acts on the embedding distance
//! while a classification branch scores the first window of each pair.
//!
//! Both consume feature maps shaped [B, 23, 13, 201]: EEG channels on
//! the convolution channel axis, cepstral coefficients by frames as
//! the spatial extent.

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, NodeId, ParamId};
use crate::nn::init::glorot_uniform;
use crate::nn::loss::{bce_loss, cce_loss, contrastive_loss};
use crate::nn::maxnorm_project;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const N_CHANNELS: usize = 23;
pub const N_COEFFS: usize = 13;
pub const N_FRAMES: usize = 201;
pub const N_PATIENTS: usize = 24;

pub const MODEL1_ARCH: &str = "multitask-cnn-v1";
pub const MODEL1_EMBED: usize = 360;
pub const MODEL1_PARAM_COUNT: usize = 106_457;
pub const MODEL1_MAXNORM: f64 = 0.4;
pub const DEFAULT_LAMBDA: f64 = 0.9;

pub const MODEL2_ARCH: &str = "siamese-cnn-v1";
pub const MODEL2_EMBED: usize = 100;
pub const MODEL2_PARAM_COUNT: usize = 136_853;
/// Factor applied to the embedding layer's Glorot draw at build time.
pub const EMBED_INIT_DAMPING: f64 = 0.02;
pub const DEFAULT_GAMMA: f64 = 0.6;
pub const DEFAULT_MARGIN: f64 = 1.0;

/// Multitask CNN. Five conv blocks (conv, relu, dropout 0.6) with
/// 2x4 max-pools after blocks 2, 4 and 5:
///
///   [23,13,201] -> 16@3x5 -> 16@3x5 -> pool -> 32@3x5 (pad h)
///   -> 32@3x5 (pad h) -> pool -> 64@3x3 (pad h) -> pool
///   -> flatten 128 -> dense 360 -> {dense 1 + sigmoid, dense 24 + softmax}
#[derive(Clone)]
pub struct Model1<T> {
    pub graph: Graph<T>,
    pub input: NodeId,
    pub embedding: NodeId,
    /// Pre-sigmoid seizure score; training gradients seed here.
    pub logit_seizure: NodeId,
    /// Pre-softmax patient scores; training gradients seed here.
    pub logit_patient: NodeId,
    pub p_seizure: NodeId,
    pub q_patient: NodeId,
    /// Kernels under the max-norm constraint.
    pub conv_kernels: Vec<ParamId>,
}

impl<T: Scalar> Model1<T> {
    pub fn build(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g: Graph<T> = Graph::new();
        let input = g.input();
        let mut conv_kernels = Vec::new();

        let block = |g: &mut Graph<T>,
                     kernels: &mut Vec<ParamId>,
                     rng: &mut ChaCha8Rng,
                     x: NodeId,
                     name: &str,
                     c_in: usize,
                     c_out: usize,
                     kernel: (usize, usize),
                     pad_h: usize|
         -> Result<NodeId> {
            let y = g.conv2d(x, name, c_in, c_out, kernel, (1, 1), (pad_h, 0), rng)?;
            if let crate::nn::graph::Op::Conv2d { kernel, .. } = g.op(y) {
                kernels.push(*kernel);
            }
            let y = g.relu(y)?;
            g.dropout(y, 0.6)
        };

        let x = block(&mut g, &mut conv_kernels, &mut rng, input, "conv1", N_CHANNELS, 16, (3, 5), 0)?;
        let x = block(&mut g, &mut conv_kernels, &mut rng, x, "conv2", 16, 16, (3, 5), 0)?;
        let x = g.maxpool2d(x, (2, 4))?;
        let x = block(&mut g, &mut conv_kernels, &mut rng, x, "conv3", 16, 32, (3, 5), 1)?;
        let x = block(&mut g, &mut conv_kernels, &mut rng, x, "conv4", 32, 32, (3, 5), 1)?;
        let x = g.maxpool2d(x, (2, 4))?;
        let x = block(&mut g, &mut conv_kernels, &mut rng, x, "conv5", 32, 64, (3, 3), 1)?;
        let x = g.maxpool2d(x, (2, 4))?;
        let x = g.flatten(x)?;
        // Spatial extent worked out above: [64, 1, 2] flattens to 128.
        let embedding = g.dense(x, "embed", 128, MODEL1_EMBED, &mut rng)?;
        let logit_seizure = g.dense(embedding, "head_seizure", MODEL1_EMBED, 1, &mut rng)?;
        let p_seizure = g.sigmoid(logit_seizure)?;
        let logit_patient = g.dense(embedding, "head_patient", MODEL1_EMBED, N_PATIENTS, &mut rng)?;
        let q_patient = g.softmax(logit_patient)?;

        let total = g.params.total_values();
        if total != MODEL1_PARAM_COUNT {
            return Err(Error::shape(format!(
                "model I has {total} parameters, expected {MODEL1_PARAM_COUNT}"
            )));
        }
        log::info!("model I built: {total} trainable parameters");
        Ok(Model1 {
            graph: g,
            input,
            embedding,
            logit_seizure,
            logit_patient,
            p_seizure,
            q_patient,
            conv_kernels,
        })
    }

    /// Re-project every conv kernel onto the max-norm ball.
    pub fn apply_maxnorm(&mut self) {
        for &k in &self.conv_kernels {
            maxnorm_project(&mut self.graph.params, k, MODEL1_MAXNORM);
        }
    }
}

/// Mixed loss for Model I with the gradient seeds for both heads:
/// lambda belongs to the binary (seizure) term.
pub fn model1_loss<T: Scalar>(
    p: &Tensor<T>,
    q: &Tensor<T>,
    y_seizure: &[T],
    y_patient: &[usize],
    lambda: T,
) -> Result<(T, Tensor<T>, Tensor<T>)> {
    if lambda < T::zero() || lambda > T::one() {
        return Err(Error::config(format!("lambda {lambda} outside [0, 1]")));
    }
    let (l_bce, mut g_p) = bce_loss(p, y_seizure)?;
    let (l_cce, mut g_q) = cce_loss(q, y_patient)?;
    let w2 = T::one() - lambda;
    g_p.scale(lambda);
    g_q.scale(w2);
    Ok((lambda * l_bce + w2 * l_cce, g_p, g_q))
}

/// Parameter set shared by both Siamese branches.
struct SiameseParams {
    stem9: (ParamId, ParamId),
    stem11: (ParamId, ParamId),
    conv3: (ParamId, ParamId),
    embed: (ParamId, ParamId),
}

/// Siamese encoder. Each branch:
///
///   [23,13,201] -> {8@5x9 valid, 8@5x11 pad w} stride (1,2), each
///   conv, relu, dropout 0.4 -> concat 16 -> 16@3x5 -> relu ->
///   dropout 0.4 -> pool 2x4 -> flatten 1104 -> dense 100
///
/// The classification branch reads the first embedding through a
/// linear 40-unit layer and a sigmoid scalar head.
#[derive(Clone)]
pub struct Model2<T> {
    pub graph: Graph<T>,
    pub input_a: NodeId,
    pub input_b: NodeId,
    pub embed_a: NodeId,
    pub embed_b: NodeId,
    pub distance: NodeId,
    /// Pre-sigmoid seizure score; training gradients seed here.
    pub logit_seizure: NodeId,
    pub p_seizure: NodeId,
}

impl<T: Scalar> Model2<T> {
    pub fn build(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g: Graph<T> = Graph::new();
        let input_a = g.input();
        let input_b = g.input();

        let conv_params = |g: &mut Graph<T>,
                           rng: &mut ChaCha8Rng,
                           name: &str,
                           c_in: usize,
                           c_out: usize,
                           (kh, kw): (usize, usize)| {
            let fan_in = c_in * kh * kw;
            let fan_out = c_out * kh * kw;
            let k = g.params.add(
                format!("{name}.kernel"),
                glorot_uniform(&[c_out, c_in, kh, kw], fan_in, fan_out, rng),
            );
            let b = g.params.add(format!("{name}.bias"), Tensor::zeros(&[c_out]));
            (k, b)
        };
        let params = SiameseParams {
            stem9: conv_params(&mut g, &mut rng, "stem9", N_CHANNELS, 8, (5, 9)),
            stem11: conv_params(&mut g, &mut rng, "stem11", N_CHANNELS, 8, (5, 11)),
            conv3: conv_params(&mut g, &mut rng, "conv3", 16, 16, (3, 5)),
            embed: {
                // Damped so initial pair distances over the raw
                // cepstral scale land inside the contrastive margin;
                // Glorot-sized starts put them near 1e2 and the first
                // optimizer steps flatten the encoder to escape d^2.
                let mut w0 =
                    glorot_uniform(&[MODEL2_EMBED, 1104], 1104, MODEL2_EMBED, &mut rng);
                w0.scale(T::from_f64_lossy(EMBED_INIT_DAMPING));
                let w = g.params.add("embed.weight", w0);
                let b = g
                    .params
                    .add("embed.bias", Tensor::zeros(&[MODEL2_EMBED]));
                (w, b)
            },
        };

        let branch = |g: &mut Graph<T>, x: NodeId| -> Result<NodeId> {
            let s9 = g.conv2d_shared(x, params.stem9.0, params.stem9.1, (1, 2), (0, 0))?;
            let s9 = g.relu(s9)?;
            let s9 = g.dropout(s9, 0.4)?;
            let s11 = g.conv2d_shared(x, params.stem11.0, params.stem11.1, (1, 2), (0, 1))?;
            let s11 = g.relu(s11)?;
            let s11 = g.dropout(s11, 0.4)?;
            // Both stems land on [8, 9, 97].
            let x = g.concat(&[s9, s11])?;
            let x = g.conv2d_shared(x, params.conv3.0, params.conv3.1, (1, 1), (0, 0))?;
            let x = g.relu(x)?;
            let x = g.dropout(x, 0.4)?;
            let x = g.maxpool2d(x, (2, 4))?;
            let x = g.flatten(x)?;
            g.dense_shared(x, params.embed.0, params.embed.1)
        };

        let embed_a = branch(&mut g, input_a)?;
        let embed_b = branch(&mut g, input_b)?;
        let distance = g.l2_distance(embed_a, embed_b)?;
        let cls = g.dense(embed_a, "cls40", MODEL2_EMBED, 40, &mut rng)?;
        let logit_seizure = g.dense(cls, "head_seizure", 40, 1, &mut rng)?;
        let p_seizure = g.sigmoid(logit_seizure)?;

        let total = g.params.total_values();
        if total != MODEL2_PARAM_COUNT {
            return Err(Error::shape(format!(
                "model II has {total} parameters, expected {MODEL2_PARAM_COUNT}"
            )));
        }
        log::info!("model II built: {total} trainable parameters");
        Ok(Model2 {
            graph: g,
            input_a,
            input_b,
            embed_a,
            embed_b,
            distance,
            logit_seizure,
            p_seizure,
        })
    }
}

/// Mixed loss for Model II with gradient seeds for the distance node
/// and the classification head: gamma belongs to the contrastive term,
/// and the binary term scores only the first window of each pair.
pub fn model2_loss<T: Scalar>(
    d: &Tensor<T>,
    same: &[T],
    p: &Tensor<T>,
    y_seizure: &[T],
    gamma: T,
    margin: T,
) -> Result<(T, Tensor<T>, Tensor<T>)> {
    if gamma < T::zero() || gamma > T::one() {
        return Err(Error::config(format!("gamma {gamma} outside [0, 1]")));
    }
    let (l_con, mut g_d) = contrastive_loss(d, same, margin)?;
    let (l_bce, mut g_p) = bce_loss(p, y_seizure)?;
    let w2 = T::one() - gamma;
    g_d.scale(gamma);
    g_p.scale(w2);
    Ok((gamma * l_con + w2 * l_bce, g_d, g_p))
}
