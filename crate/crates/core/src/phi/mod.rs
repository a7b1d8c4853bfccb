//! Heuristic word scorer: a one-hidden-layer tanh regressor trained on
//! annotated 1–5 desirability scores with a ridge penalty, then used to
//! re-rank candidate words.

pub mod adam;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{Selection, SelectionEntry, SelectionKind};
use crate::gain::{GainTable, WordRecord};

pub use adam::{Adam, AdamConfig, ShapeMismatch};

pub const N_FEATURES: usize = 5;
pub const FEATURE_SPEC: &str = "domtok-phi-features/v1";
const LENGTH_CAP: usize = 32;

#[derive(Debug, Error)]
pub enum PhiError {
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("score {score} for {word:?} is outside [1, 5]")]
    ScoreOutOfRange { word: String, score: f64 },
    #[error("annotated word {0:?} is not in the gain table")]
    UnknownWord(String),
    #[error("annotations line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub gain_norm: f64,
    pub length_norm: f64,
    pub log_freq_norm: f64,
    pub alpha_fraction: f64,
    pub separator_density: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.gain_norm,
            self.length_norm,
            self.log_freq_norm,
            self.alpha_fraction,
            self.separator_density,
        ]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            gain_norm: a[0],
            length_norm: a[1],
            log_freq_norm: a[2],
            alpha_fraction: a[3],
            separator_density: a[4],
        }
    }
}

/// Character-shape features that depend on the word alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordShape {
    pub length_norm: f64,
    pub alpha_fraction: f64,
    pub separator_density: f64,
}

pub fn word_shape(word: &str) -> WordShape {
    let len = word.chars().count();
    if len == 0 {
        return WordShape {
            length_norm: 0.0,
            alpha_fraction: 0.0,
            separator_density: 0.0,
        };
    }
    let alpha = word.chars().filter(|c| c.is_alphabetic()).count();
    let separators = word
        .chars()
        .filter(|c| matches!(c, '_' | '-' | '.') || c.is_ascii_digit())
        .count();
    WordShape {
        length_norm: len.min(LENGTH_CAP) as f64 / LENGTH_CAP as f64,
        alpha_fraction: alpha as f64 / len as f64,
        separator_density: separators as f64 / len as f64,
    }
}

pub fn featurize(record: &WordRecord, table: &GainTable) -> FeatureVector {
    let max_gain = table.max_gain();
    let gain_norm = if max_gain > 0.0 {
        record.gain / max_gain
    } else {
        0.0
    };
    let max_freq = table.max_freq().max(record.freq) as f64;
    let shape = word_shape(&record.word);
    FeatureVector {
        gain_norm,
        length_norm: shape.length_norm,
        log_freq_norm: (1.0 + record.freq as f64).ln() / (1.0 + max_freq).ln(),
        alpha_fraction: shape.alpha_fraction,
        separator_density: shape.separator_density,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedWord {
    pub word: String,
    pub score: f64,
}

impl AnnotatedWord {
    pub fn new(word: impl Into<String>, score: f64) -> Result<Self, PhiError> {
        let word = word.into();
        if !(1.0..=5.0).contains(&score) {
            return Err(PhiError::ScoreOutOfRange { word, score });
        }
        Ok(Self { word, score })
    }
}

/// Parses `word<TAB>score` lines. Blank lines and `#` comments are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotatedWord>, PhiError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| PhiError::Parse {
            line: line_no,
            message,
        };
        let (word, score) = line
            .split_once('\t')
            .ok_or_else(|| err("expected word<TAB>score".into()))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|e| err(format!("score {score:?}: {e}")))?;
        let word = word.trim();
        if word.is_empty() {
            return Err(err("empty word".into()));
        }
        out.push(AnnotatedWord::new(word, score).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotatedWord>, PhiError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| PhiError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_annotations(&text)
}

/// `score(x) = b₂ + w₂ · tanh(W₁ x + b₁)`.
///
/// Parameters live in one flat vector laid out as `W₁` (row per hidden
/// unit), `b₁`, `w₂`, `b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiModel {
    hidden: usize,
    params: Vec<f64>,
    pub ridge_lambda: f64,
    pub final_loss: Option<f64>,
}

impl PhiModel {
    pub fn n_params(hidden: usize) -> usize {
        hidden * N_FEATURES + 2 * hidden + 1
    }

    pub fn zeros(hidden: usize, ridge_lambda: f64) -> Self {
        assert!(hidden >= 1, "hidden width must be at least 1");
        Self {
            hidden,
            params: vec![0.0; Self::n_params(hidden)],
            ridge_lambda,
            final_loss: None,
        }
    }

    /// Uniform initialization in [−0.1, 0.1] from a seeded generator.
    pub fn random(hidden: usize, ridge_lambda: f64, seed: u64) -> Self {
        let mut model = Self::zeros(hidden, ridge_lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            *p = rng.gen_range(-0.1..=0.1);
        }
        model
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let h = self.hidden;
        let (w1, rest) = self.params.split_at(h * N_FEATURES);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }

    pub fn output_bias_mut(&mut self) -> &mut f64 {
        self.params.last_mut().expect("model has parameters")
    }

    fn activations(&self, x: &[f64; N_FEATURES]) -> Vec<f64> {
        let (w1, b1, _, _) = self.split();
        w1.chunks_exact(N_FEATURES)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
            .collect()
    }

    pub fn score(&self, features: &FeatureVector) -> f64 {
        let (_, _, w2, b2) = self.split();
        let h = self.activations(&features.to_array());
        b2 + w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>()
    }

    fn ridge(&self) -> f64 {
        let (w1, _, w2, _) = self.split();
        w1.iter().chain(w2).map(|w| w * w).sum()
    }

    /// Mean squared error plus `ridge_lambda · Σ w²` over weights (not biases).
    pub fn loss(&self, batch: &[(FeatureVector, f64)]) -> Result<f64, PhiError> {
        if batch.is_empty() {
            return Err(PhiError::EmptyBatch);
        }
        let mse = batch
            .iter()
            .map(|(x, y)| (y - self.score(x)).powi(2))
            .sum::<f64>()
            / batch.len() as f64;
        Ok(mse + self.ridge_lambda * self.ridge())
    }

    pub fn loss_and_grad(
        &self,
        batch: &[(FeatureVector, f64)],
    ) -> Result<(f64, Vec<f64>), PhiError> {
        if batch.is_empty() {
            return Err(PhiError::EmptyBatch);
        }
        let h = self.hidden;
        let (w1, _, w2, b2) = self.split();
        let mut grad = vec![0.0; self.params.len()];
        let n = batch.len() as f64;
        let mut mse = 0.0;
        for (features, y) in batch {
            let x = features.to_array();
            let act = self.activations(&x);
            let pred = b2 + w2.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>();
            let residual = pred - y;
            mse += residual * residual;
            let d_pred = 2.0 * residual / n;
            let (g_w1, rest) = grad.split_at_mut(h * N_FEATURES);
            let (g_b1, rest) = rest.split_at_mut(h);
            let (g_w2, g_b2) = rest.split_at_mut(h);
            g_b2[0] += d_pred;
            for j in 0..h {
                g_w2[j] += d_pred * act[j];
                let d_pre = d_pred * w2[j] * (1.0 - act[j] * act[j]);
                g_b1[j] += d_pre;
                for (g, xk) in g_w1[j * N_FEATURES..(j + 1) * N_FEATURES]
                    .iter_mut()
                    .zip(&x)
                {
                    *g += d_pre * xk;
                }
            }
        }
        let lambda = self.ridge_lambda;
        for (g, w) in grad[..h * N_FEATURES].iter_mut().zip(w1) {
            *g += 2.0 * lambda * w;
        }
        let w2_start = h * N_FEATURES + h;
        for (g, w) in grad[w2_start..w2_start + h].iter_mut().zip(w2) {
            *g += 2.0 * lambda * w;
        }
        Ok((mse / n + lambda * self.ridge(), grad))
    }

    pub fn to_json(&self) -> String {
        let (w1, b1, w2, b2) = self.split();
        let file = PhiModelFile {
            feature_spec: FEATURE_SPEC.to_string(),
            hidden: self.hidden,
            hidden_weights: w1.chunks_exact(N_FEATURES).map(<[f64]>::to_vec).collect(),
            hidden_bias: b1.to_vec(),
            output_weights: w2.to_vec(),
            output_bias: b2,
            ridge_lambda: self.ridge_lambda,
            final_loss: self.final_loss,
        };
        crate::report::to_sorted_json(&file)
    }

    pub fn from_json(json: &str) -> Result<Self, PhiError> {
        let file: PhiModelFile = serde_json::from_str(json)?;
        if file.feature_spec != FEATURE_SPEC {
            return Err(PhiError::InvalidModel(format!(
                "feature spec {:?}, expected {FEATURE_SPEC:?}",
                file.feature_spec
            )));
        }
        let h = file.hidden;
        if h == 0
            || file.hidden_weights.len() != h
            || file.hidden_weights.iter().any(|r| r.len() != N_FEATURES)
            || file.hidden_bias.len() != h
            || file.output_weights.len() != h
        {
            return Err(PhiError::InvalidModel(format!(
                "parameter arrays do not match hidden width {h}"
            )));
        }
        let mut params: Vec<f64> = file.hidden_weights.concat();
        params.extend(&file.hidden_bias);
        params.extend(&file.output_weights);
        params.push(file.output_bias);
        if params.iter().any(|p| !p.is_finite())
            || file.ridge_lambda.is_nan()
            || file.ridge_lambda < 0.0
        {
            return Err(PhiError::InvalidModel(
                "non-finite parameter or negative ridge".into(),
            ));
        }
        Ok(Self {
            hidden: h,
            params,
            ridge_lambda: file.ridge_lambda,
            final_loss: file.final_loss,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PhiError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| PhiError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PhiError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| PhiError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&json)
    }
}

#[derive(Serialize, Deserialize)]
struct PhiModelFile {
    feature_spec: String,
    hidden: usize,
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
    ridge_lambda: f64,
    final_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub ridge_lambda: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for PhiTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 1e-2,
            ridge_lambda: 1e-4,
            hidden: 16,
            seed: 0,
        }
    }
}

/// Full-batch Adam on the ridge-regularized squared error.
pub fn train_on_examples(
    examples: &[(FeatureVector, f64)],
    config: &PhiTrainConfig,
) -> Result<PhiModel, PhiError> {
    if examples.is_empty() {
        return Err(PhiError::EmptyBatch);
    }
    if config.hidden == 0 {
        return Err(PhiError::InvalidModel(
            "hidden width must be at least 1".into(),
        ));
    }
    let mut model = PhiModel::random(config.hidden, config.ridge_lambda, config.seed);
    let mut adam = Adam::new(model.params.len(), AdamConfig::with_lr(config.lr));
    for _ in 0..config.epochs {
        let (_, grad) = model.loss_and_grad(examples)?;
        adam.step(&mut model.params, &grad)?;
    }
    model.final_loss = Some(model.loss(examples)?);
    Ok(model)
}

/// Featurizes the annotated words against `table` and trains on them.
pub fn train_phi(
    dataset: &[AnnotatedWord],
    table: &GainTable,
    config: &PhiTrainConfig,
) -> Result<PhiModel, PhiError> {
    let index = table.index();
    let mut examples = Vec::with_capacity(dataset.len());
    for a in dataset {
        if !(1.0..=5.0).contains(&a.score) {
            return Err(PhiError::ScoreOutOfRange {
                word: a.word.clone(),
                score: a.score,
            });
        }
        let record = index
            .get(a.word.as_str())
            .ok_or_else(|| PhiError::UnknownWord(a.word.clone()))?;
        examples.push((featurize(record, table), a.score));
    }
    train_on_examples(&examples, config)
}

/// Scores every table word, in table order.
pub fn score_table(table: &GainTable, model: &PhiModel) -> Vec<f64> {
    table
        .records()
        .iter()
        .map(|r| model.score(&featurize(r, table)))
        .collect()
}

/// Words whose score is strictly above `epsilon_prime`, best first.
pub fn select_heuristic(table: &GainTable, model: &PhiModel, epsilon_prime: f64) -> Selection {
    let mut entries: Vec<SelectionEntry> = table
        .records()
        .iter()
        .zip(score_table(table, model))
        .filter(|(_, s)| *s > epsilon_prime)
        .map(|(r, score)| SelectionEntry {
            word: r.word.clone(),
            score,
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    Selection::from_sorted(SelectionKind::Heuristic, epsilon_prime, entries)
}

/// Nearest-rank percentile (`p` in [0, 100]) of the model's scores over the
/// table; `None` for an empty table.
pub fn score_percentile(table: &GainTable, model: &PhiModel, p: f64) -> Option<f64> {
    let mut scores = score_table(table, model);
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    let rank = ((p.clamp(0.0, 100.0) / 100.0) * scores.len() as f64).ceil() as usize;
    Some(scores[rank.saturating_sub(1).min(scores.len() - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(word: &str, freq: u64, subtokens: usize, gain: f64) -> WordRecord {
        WordRecord {
            word: word.into(),
            freq,
            subtokens,
            gain,
        }
    }

    #[test]
    fn feature_formulas() {
        let table = GainTable::new(
            vec![record("an", 40, 1, 0.0), record("OpenLane", 2, 3, 0.8)],
            8,
        );
        let f = featurize(&table.records()[1], &table);
        assert_eq!(f.to_array(), [0.0, 2.0 / 32.0, 1.0, 1.0, 0.0]);

        let id = "sky130A_sky130_fd_sc_hd_config";
        let shape = word_shape(id);
        assert_eq!(shape.separator_density, 11.0 / 30.0);
        assert_eq!(shape.alpha_fraction, 19.0 / 30.0);

        let flat = GainTable::new(vec![record("a", 1, 1, 0.0), record("b", 2, 1, 0.0)], 1);
        assert_eq!(featurize(&flat.records()[0], &flat).gain_norm, 0.0);
    }

    #[test]
    fn score_of_trivial_models() {
        let x = FeatureVector::from_array([0.3, 0.1, 0.5, 0.9, 0.2]);
        let mut model = PhiModel::zeros(4, 0.0);
        assert_eq!(model.score(&x), 0.0);
        *model.output_bias_mut() = 3.0;
        assert_eq!(model.score(&x), 3.0);
    }

    #[test]
    fn loss_values() {
        let x = FeatureVector::from_array([0.0; 5]);
        let model = PhiModel::zeros(3, 0.0);
        assert_eq!(model.loss(&[(x, 2.0)]).unwrap(), 4.0);
        assert_eq!(PhiModel::zeros(3, 0.1).loss(&[(x, 2.0)]).unwrap(), 4.0);
        assert!(matches!(model.loss(&[]), Err(PhiError::EmptyBatch)));

        let mut perfect = PhiModel::zeros(3, 0.0);
        *perfect.output_bias_mut() = 2.0;
        assert_eq!(perfect.loss(&[(x, 2.0), (x, 2.0)]).unwrap(), 0.0);
    }

    #[test]
    fn epochs_zero_returns_initialization() {
        let x = FeatureVector::from_array([0.1; 5]);
        let config = PhiTrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let model = train_on_examples(&[(x, 3.0)], &config).unwrap();
        assert_eq!(
            model.params(),
            PhiModel::random(16, config.ridge_lambda, 0).params()
        );
    }

    #[test]
    fn single_example_converges() {
        let x = FeatureVector::from_array([0.4, 0.2, 0.7, 1.0, 0.0]);
        let config = PhiTrainConfig {
            epochs: 2000,
            ridge_lambda: 0.0,
            ..Default::default()
        };
        let model = train_on_examples(&[(x, 4.2); 5], &config).unwrap();
        assert!((model.score(&x) - 4.2).abs() < 0.1, "{}", model.score(&x));
    }

    #[test]
    fn out_of_range_scores_rejected() {
        assert!(AnnotatedWord::new("x", 5.5).is_err());
        assert!(AnnotatedWord::new("x", 0.9).is_err());
        let err = parse_annotations("good\t4\nbad\t7\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let table = GainTable::new(vec![record("x", 1, 2, 0.5)], 1);
        let bogus = [AnnotatedWord {
            word: "x".into(),
            score: 0.0,
        }];
        assert!(matches!(
            train_phi(&bogus, &table, &PhiTrainConfig::default()),
            Err(PhiError::ScoreOutOfRange { .. })
        ));
        let unknown = [AnnotatedWord::new("y", 2.0).unwrap()];
        assert!(matches!(
            train_phi(&unknown, &table, &PhiTrainConfig::default()),
            Err(PhiError::UnknownWord(_))
        ));
    }

    #[test]
    fn annotations_parse() {
        let words = parse_annotations("# header\nOpenLane\t4.5\n\nsky130_x\t1\n").unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[0], AnnotatedWord::new("OpenLane", 4.5).unwrap());
    }

    #[test]
    fn heuristic_selection_is_strict() {
        let table = GainTable::new(vec![record("a", 1, 2, 0.5), record("b", 3, 4, 1.5)], 1);
        let zero = PhiModel::zeros(2, 0.0);
        assert_eq!(select_heuristic(&table, &zero, -1.0).len(), 2);
        assert!(select_heuristic(&table, &zero, 0.0).is_empty());
        assert_eq!(
            select_heuristic(&table, &zero, -1.0).kind,
            SelectionKind::Heuristic
        );
    }

    #[test]
    fn model_json_round_trip() {
        let mut model = PhiModel::random(3, 0.01, 7);
        model.final_loss = Some(0.25);
        assert_eq!(PhiModel::from_json(&model.to_json()).unwrap(), model);
        let broken = model.to_json().replace(FEATURE_SPEC, "other/v0");
        assert!(PhiModel::from_json(&broken).is_err());
    }
}
