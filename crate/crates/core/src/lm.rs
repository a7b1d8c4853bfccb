//! Fixed-context feedforward language model with hand-written gradients.
//!
//! The next token is predicted from the previous `k` tokens: their embeddings
//! are concatenated, passed through an affine map and `tanh`, then projected
//! to vocabulary logits. Histories shorter than `k` are left-padded with a
//! reserved begin-of-sequence id equal to the vocabulary size; that id has an
//! embedding row but is never predicted.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::EmbeddingInitPlan;
use crate::corpus::Corpus;
use crate::phi::{Adam, AdamConfig};
use crate::report::round_half_up;
use crate::tokenizer::{TokenId, Tokenizer};

pub const MOVING_AVERAGE_STEPS: usize = 50;
pub const DEFAULT_CONTEXT: usize = 8;
pub const DEFAULT_DIM: usize = 32;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("token id {id} is out of range for vocabulary size {vocab_size}")]
    IdOutOfRange { id: TokenId, vocab_size: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("output mask is empty")]
    EmptyMask,
    #[error("mask position {pos} is outside a sequence of length {len}")]
    MaskOutOfRange { pos: usize, len: usize },
    #[error("history of {got} tokens exceeds the context of {context}")]
    HistoryTooLong { got: usize, context: usize },
    #[error("model vocabulary {model} does not match tokenizer vocabulary {tokenizer}")]
    VocabMismatch { model: usize, tokenizer: usize },
    #[error("corpus encodes to {tokens} tokens; at least {needed} are needed for one window")]
    CorpusTooSmall { tokens: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss at step {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Loss on every position.
    Clm,
    /// Loss on the second half of each window only.
    Dap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmModel {
    vocab_size: usize,
    context: usize,
    dim: usize,
    params: Vec<f64>,
}

struct Layout {
    embed: usize,
    proj: usize,
    proj_bias: usize,
    out: usize,
    out_bias: usize,
    total: usize,
}

impl LmModel {
    fn layout(vocab_size: usize, context: usize, dim: usize) -> Layout {
        let embed = 0;
        let proj = embed + (vocab_size + 1) * dim;
        let proj_bias = proj + context * dim * dim;
        let out = proj_bias + dim;
        let out_bias = out + dim * vocab_size;
        Layout {
            embed,
            proj,
            proj_bias,
            out,
            out_bias,
            total: out_bias + vocab_size,
        }
    }

    pub fn zeros(vocab_size: usize, context: usize, dim: usize) -> Self {
        assert!(vocab_size >= 1 && context >= 1 && dim >= 1);
        Self {
            vocab_size,
            context,
            dim,
            params: vec![0.0; Self::layout(vocab_size, context, dim).total],
        }
    }

    /// Weights uniform in [−0.1, 0.1], biases zero.
    pub fn random(vocab_size: usize, context: usize, dim: usize, seed: u64) -> Self {
        let mut model = Self::zeros(vocab_size, context, dim);
        let l = Self::layout(vocab_size, context, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, p) in model.params.iter_mut().enumerate() {
            let is_bias = (l.proj_bias..l.out).contains(&i) || i >= l.out_bias;
            if !is_bias {
                *p = rng.gen_range(-0.1..=0.1);
            }
        }
        model
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bos(&self) -> TokenId {
        self.vocab_size as TokenId
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable embedding row of `id` (the BOS id included).
    pub fn embedding_mut(&mut self, id: TokenId) -> &mut [f64] {
        let d = self.dim;
        let start = id as usize * d;
        &mut self.params[start..start + d]
    }

    /// Grows the vocabulary for tokens appended by an augmented tokenizer.
    /// New embedding rows and output columns are the means of the rows and
    /// columns of their baseline subtokens.
    pub fn extended(
        &self,
        plan: &EmbeddingInitPlan,
        new_vocab_size: usize,
    ) -> Result<Self, LmError> {
        if new_vocab_size < self.vocab_size {
            return Err(LmError::Config("vocabulary can only grow".into()));
        }
        let (old_v, d) = (self.vocab_size, self.dim);
        let mut grown = Self::zeros(new_vocab_size, self.context, d);
        let (lo, ln) = (
            Self::layout(old_v, self.context, d),
            Self::layout(new_vocab_size, self.context, d),
        );
        for id in 0..old_v {
            let src = &self.params[id * d..(id + 1) * d];
            grown.params[id * d..(id + 1) * d].copy_from_slice(src);
        }
        let bos_src = &self.params[old_v * d..(old_v + 1) * d];
        grown.params[new_vocab_size * d..(new_vocab_size + 1) * d].copy_from_slice(bos_src);
        grown.params[ln.proj..ln.out].copy_from_slice(&self.params[lo.proj..lo.out]);
        for j in 0..d {
            for v in 0..old_v {
                grown.params[ln.out + j * new_vocab_size + v] = self.params[lo.out + j * old_v + v];
            }
        }
        grown.params[ln.out_bias..ln.out_bias + old_v]
            .copy_from_slice(&self.params[lo.out_bias..lo.out_bias + old_v]);

        for entry in &plan.entries {
            let new = entry.new_id as usize;
            if new < old_v || new >= new_vocab_size {
                return Err(LmError::IdOutOfRange {
                    id: entry.new_id,
                    vocab_size: new_vocab_size,
                });
            }
            if entry.source_ids.is_empty() {
                return Err(LmError::Config(format!(
                    "empty init sources for {}",
                    entry.token
                )));
            }
            let n = entry.source_ids.len() as f64;
            for &src in &entry.source_ids {
                let src = src as usize;
                if src >= old_v {
                    return Err(LmError::IdOutOfRange {
                        id: src as TokenId,
                        vocab_size: old_v,
                    });
                }
                for j in 0..d {
                    grown.params[new * d + j] += self.params[src * d + j] / n;
                    grown.params[ln.out + j * new_vocab_size + new] +=
                        self.params[lo.out + j * old_v + src] / n;
                }
                grown.params[ln.out_bias + new] += self.params[lo.out_bias + src] / n;
            }
        }
        Ok(grown)
    }

    fn check_id(&self, id: TokenId, allow_bos: bool) -> Result<(), LmError> {
        let limit = self.vocab_size + usize::from(allow_bos);
        if (id as usize) < limit {
            Ok(())
        } else {
            Err(LmError::IdOutOfRange {
                id,
                vocab_size: self.vocab_size,
            })
        }
    }

    /// The `k` ids preceding position `i`, left-padded with BOS.
    fn history_at(&self, seq: &[TokenId], i: usize) -> Vec<TokenId> {
        (0..self.context)
            .map(|slot| {
                let back = self.context - slot;
                if i >= back {
                    seq[i - back]
                } else {
                    self.bos()
                }
            })
            .collect()
    }

    /// Forward pass: returns (concatenated embeddings, hidden activations, logits).
    fn forward(&self, history: &[TokenId]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (v, k, d) = (self.vocab_size, self.context, self.dim);
        let l = Self::layout(v, k, d);
        let mut e = Vec::with_capacity(k * d);
        for &id in history {
            let row = l.embed + id as usize * d;
            e.extend_from_slice(&self.params[row..row + d]);
        }
        let mut a = self.params[l.proj_bias..l.proj_bias + d].to_vec();
        for (i, &ei) in e.iter().enumerate() {
            if ei == 0.0 {
                continue;
            }
            let row = &self.params[l.proj + i * d..l.proj + (i + 1) * d];
            for (aj, w) in a.iter_mut().zip(row) {
                *aj += ei * w;
            }
        }
        let h: Vec<f64> = a.into_iter().map(f64::tanh).collect();
        let mut z = self.params[l.out_bias..l.out_bias + v].to_vec();
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.params[l.out + j * v..l.out + (j + 1) * v];
            for (zv, w) in z.iter_mut().zip(row) {
                *zv += hj * w;
            }
        }
        (e, h, z)
    }

    /// Logits for the next token after `history` (at most `k` ids; shorter
    /// histories are left-padded with BOS).
    pub fn logits(&self, history: &[TokenId]) -> Result<Vec<f64>, LmError> {
        if history.len() > self.context {
            return Err(LmError::HistoryTooLong {
                got: history.len(),
                context: self.context,
            });
        }
        for &id in history {
            self.check_id(id, true)?;
        }
        let mut padded = vec![self.bos(); self.context - history.len()];
        padded.extend_from_slice(history);
        Ok(self.forward(&padded).2)
    }

    pub fn predictive(&self, history: &[TokenId]) -> Result<Vec<f64>, LmError> {
        let z = self.logits(history)?;
        Ok(softmax(&z))
    }

    pub fn clm_loss(&self, sequence: &[TokenId]) -> Result<f64, LmError> {
        Ok(self.loss_impl(sequence, None, false)?.0)
    }

    pub fn dap_loss(&self, sequence: &[TokenId], output_mask: &[usize]) -> Result<f64, LmError> {
        let mask = self.mask_from_positions(sequence.len(), output_mask)?;
        Ok(self.loss_impl(sequence, Some(&mask), false)?.0)
    }

    /// Mean negative log-likelihood over all positions and its gradient.
    pub fn clm_loss_and_grad(&self, sequence: &[TokenId]) -> Result<(f64, Vec<f64>), LmError> {
        let (loss, grad) = self.loss_impl(sequence, None, true)?;
        Ok((loss, grad.expect("gradient requested")))
    }

    /// Mean negative log-likelihood over masked positions and its gradient.
    pub fn dap_loss_and_grad(
        &self,
        sequence: &[TokenId],
        output_mask: &[usize],
    ) -> Result<(f64, Vec<f64>), LmError> {
        let mask = self.mask_from_positions(sequence.len(), output_mask)?;
        let (loss, grad) = self.loss_impl(sequence, Some(&mask), true)?;
        Ok((loss, grad.expect("gradient requested")))
    }

    fn mask_from_positions(&self, len: usize, positions: &[usize]) -> Result<Vec<bool>, LmError> {
        if positions.is_empty() {
            return Err(LmError::EmptyMask);
        }
        let mut mask = vec![false; len];
        for &pos in positions {
            if pos >= len {
                return Err(LmError::MaskOutOfRange { pos, len });
            }
            mask[pos] = true;
        }
        Ok(mask)
    }

    fn loss_impl(
        &self,
        seq: &[TokenId],
        mask: Option<&[bool]>,
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>), LmError> {
        if seq.is_empty() {
            return Err(LmError::EmptySequence);
        }
        for &id in seq {
            self.check_id(id, false)?;
        }
        let (v, k, d) = (self.vocab_size, self.context, self.dim);
        let l = Self::layout(v, k, d);
        let active: Vec<usize> = (0..seq.len())
            .filter(|&i| mask.is_none_or(|m| m[i]))
            .collect();
        let scale = 1.0 / active.len() as f64;
        let mut grad = with_grad.then(|| vec![0.0; self.params.len()]);
        let mut total = 0.0;
        for &i in &active {
            let history = self.history_at(seq, i);
            let (e, h, z) = self.forward(&history);
            let lse = log_sum_exp(&z);
            let target = seq[i] as usize;
            total += lse - z[target];

            let Some(g) = grad.as_mut() else { continue };
            let mut dz: Vec<f64> = z.iter().map(|&zv| (zv - lse).exp() * scale).collect();
            dz[target] -= scale;

            let mut dh = vec![0.0; d];
            for j in 0..d {
                let w_row = &self.params[l.out + j * v..l.out + (j + 1) * v];
                let g_row = &mut g[l.out + j * v..l.out + (j + 1) * v];
                let mut acc = 0.0;
                for ((gw, w), dzv) in g_row.iter_mut().zip(w_row).zip(&dz) {
                    *gw += h[j] * dzv;
                    acc += w * dzv;
                }
                dh[j] = acc;
            }
            for (gb, dzv) in g[l.out_bias..l.out_bias + v].iter_mut().zip(&dz) {
                *gb += dzv;
            }
            let da: Vec<f64> = dh
                .iter()
                .zip(&h)
                .map(|(dh, h)| dh * (1.0 - h * h))
                .collect();
            for (gb, dav) in g[l.proj_bias..l.proj_bias + d].iter_mut().zip(&da) {
                *gb += dav;
            }
            for (slot, &id) in history.iter().enumerate() {
                let row = l.embed + id as usize * d;
                for c in 0..d {
                    let idx = slot * d + c;
                    let p_row = l.proj + idx * d;
                    let mut de = 0.0;
                    for j in 0..d {
                        g[p_row + j] += e[idx] * da[j];
                        de += self.params[p_row + j] * da[j];
                    }
                    g[row + c] += de;
                }
            }
        }
        Ok((total * scale, grad))
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|&x| (x - lse).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub mask_mode: MaskMode,
    /// Tokens per training window; must be at least `context + 1`.
    pub window: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            lr: 3e-3,
            seed: 0,
            mask_mode: MaskMode::Clm,
            window: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    /// Vocabulary size and a digest of the serialized tokenizer.
    pub tokenizer: String,
    pub vocab_size: usize,
    pub mask_mode: MaskMode,
    pub epochs: usize,
    pub window: usize,
    pub windows_per_epoch: usize,
    pub tokens_per_epoch: u64,
    pub tokens_processed: u64,
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    pub final_moving_average: f64,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self)
    }

    pub fn loss_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            s.push_str(&format!("{i},{l}\n"));
        }
        s
    }
}

pub fn tokenizer_identity(tok: &Tokenizer) -> String {
    let digest = Sha256::digest(tok.to_json().as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("v{}-{hex}", tok.vocab_size())
}

fn moving_average(losses: &[f64]) -> f64 {
    let tail = &losses[losses.len().saturating_sub(MOVING_AVERAGE_STEPS)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Trains on non-overlapping windows of the encoded corpus, one Adam step
/// per window, windows shuffled each epoch.
pub fn train_lm(
    model: &mut LmModel,
    corpus: &Corpus,
    tok: &Tokenizer,
    config: &LmConfig,
    label: &str,
) -> Result<TrainReport, LmError> {
    if model.vocab_size != tok.vocab_size() {
        return Err(LmError::VocabMismatch {
            model: model.vocab_size,
            tokenizer: tok.vocab_size(),
        });
    }
    if config.window < model.context + 1 {
        return Err(LmError::Config(format!(
            "window {} must be at least context + 1 = {}",
            config.window,
            model.context + 1
        )));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(LmError::Config("learning rate must be positive".into()));
    }
    let stream: Vec<TokenId> = corpus
        .documents()
        .iter()
        .flat_map(|doc| tok.encode(doc))
        .collect();
    let n_windows = stream.len() / config.window;
    if n_windows == 0 {
        return Err(LmError::CorpusTooSmall {
            tokens: stream.len(),
            needed: config.window,
        });
    }
    let mask: Vec<usize> = match config.mask_mode {
        MaskMode::Clm => (0..config.window).collect(),
        MaskMode::Dap => (config.window / 2..config.window).collect(),
    };

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params.len(), AdamConfig::with_lr(config.lr));
    let mut order: Vec<usize> = (0..n_windows).collect();
    let mut losses = Vec::with_capacity(n_windows * config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &w in &order {
            let window = &stream[w * config.window..(w + 1) * config.window];
            let (loss, grad) = model.dap_loss_and_grad(window, &mask)?;
            if !loss.is_finite() {
                return Err(LmError::NonFinite(losses.len()));
            }
            losses.push(loss);
            adam.step(&mut model.params, &grad)
                .map_err(|e| LmError::Config(e.to_string()))?;
        }
    }
    let tokens_per_epoch = (n_windows * config.window) as u64;
    Ok(TrainReport {
        label: label.to_owned(),
        tokenizer: tokenizer_identity(tok),
        vocab_size: tok.vocab_size(),
        mask_mode: config.mask_mode,
        epochs: config.epochs,
        window: config.window,
        windows_per_epoch: n_windows,
        tokens_per_epoch,
        tokens_processed: tokens_per_epoch * config.epochs as u64,
        initial_loss: losses.first().copied().unwrap_or(0.0),
        final_moving_average: if losses.is_empty() {
            0.0
        } else {
            moving_average(&losses)
        },
        losses,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStats {
    pub baseline: String,
    pub candidate: String,
    pub tokens_baseline: u64,
    pub tokens_candidate: u64,
    /// Percentage change from baseline to candidate, 4 decimals.
    pub tokens_delta_pct: f64,
    pub time_baseline_secs: f64,
    pub time_candidate_secs: f64,
    pub time_delta_pct: f64,
    pub final_loss_baseline: f64,
    pub final_loss_candidate: f64,
    pub final_loss_delta_pct: f64,
}

impl ComparisonStats {
    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self)
    }
}

fn delta_pct(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        round_half_up(100.0 * (b - a) / a, 4)
    }
}

pub fn compare_runs(a: &TrainReport, b: &TrainReport) -> ComparisonStats {
    ComparisonStats {
        baseline: a.label.clone(),
        candidate: b.label.clone(),
        tokens_baseline: a.tokens_processed,
        tokens_candidate: b.tokens_processed,
        tokens_delta_pct: delta_pct(a.tokens_processed as f64, b.tokens_processed as f64),
        time_baseline_secs: a.wall_clock_secs,
        time_candidate_secs: b.wall_clock_secs,
        time_delta_pct: delta_pct(a.wall_clock_secs, b.wall_clock_secs),
        final_loss_baseline: a.final_moving_average,
        final_loss_candidate: b.final_moving_average,
        final_loss_delta_pct: delta_pct(a.final_moving_average, b.final_moving_average),
    }
}
