use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use domtok::lm::MaskMode;

use crate::error::{CliError, ResultExt};

pub const OUT_ENV: &str = "DOMTOK_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Threshold,
    Heuristic,
}

impl SelectMode {
    pub fn name(self) -> &'static str {
        match self {
            SelectMode::Threshold => "threshold",
            SelectMode::Heuristic => "heuristic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    Clm,
    Dap,
}

impl From<Mask> for MaskMode {
    fn from(m: Mask) -> Self {
        match m {
            Mask::Clm => MaskMode::Clm,
            Mask::Dap => MaskMode::Dap,
        }
    }
}

/// Effective configuration of one command. Persisted next to its outputs so
/// a stage can be replayed with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub tokenizer: Option<PathBuf>,
    pub train_vocab: Option<usize>,
    /// Corpus for training the baseline tokenizer; the analysis corpus if empty.
    pub base_corpus: Vec<PathBuf>,
    pub alpha: usize,
    pub epsilon: f64,
    pub epsilon_prime: Option<f64>,
    pub percentile: Option<f64>,
    pub mode: SelectMode,
    pub selection: Option<PathBuf>,
    pub cap: Option<usize>,
    pub annotations: Option<PathBuf>,
    pub phi_epochs: usize,
    pub phi_lr: f64,
    pub phi_ridge: f64,
    pub phi_hidden: usize,
    pub lm_epochs: usize,
    pub lm_lr: f64,
    pub lm_context: usize,
    pub lm_dim: usize,
    pub lm_window: usize,
    pub lm_documents: Option<usize>,
    pub mask: Mask,
    pub bins: usize,
    pub seed: u64,
    pub text: Option<String>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let phi = domtok::phi::PhiTrainConfig::default();
        let lm = domtok::lm::LmConfig::default();
        Self {
            corpus: Vec::new(),
            tokenizer: None,
            train_vocab: None,
            base_corpus: Vec::new(),
            alpha: 8,
            epsilon: 0.0,
            epsilon_prime: None,
            percentile: None,
            mode: SelectMode::Threshold,
            selection: None,
            cap: None,
            annotations: None,
            phi_epochs: phi.epochs,
            phi_lr: phi.lr,
            phi_ridge: phi.ridge_lambda,
            phi_hidden: phi.hidden,
            lm_epochs: lm.epochs,
            lm_lr: lm.lr,
            lm_context: domtok::lm::DEFAULT_CONTEXT,
            lm_dim: domtok::lm::DEFAULT_DIM,
            lm_window: lm.window,
            lm_documents: None,
            mask: Mask::Clm,
            bins: 20,
            seed: 0,
            text: None,
            out: PathBuf::from("domtok-out"),
        }
    }
}

/// Command-line overrides shared by every subcommand. Anything left unset
/// falls back to the `--config` file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file (as persisted by an earlier run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus file or directory; repeatable.
    #[arg(long, global = true)]
    pub corpus: Vec<PathBuf>,
    /// Baseline tokenizer JSON.
    #[arg(long, global = true, conflicts_with = "train_vocab")]
    pub tokenizer: Option<PathBuf>,
    /// Train a baseline BPE tokenizer with this vocabulary size instead of loading one.
    #[arg(long, global = true)]
    pub train_vocab: Option<usize>,
    /// Corpus for baseline training; repeatable.
    #[arg(long, global = true)]
    pub base_corpus: Vec<PathBuf>,
    /// Context size in words for the context-level gain diagnostic.
    #[arg(long, global = true)]
    pub alpha: Option<usize>,
    /// Gain threshold (strictly greater is selected).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Heuristic score threshold (strictly greater is selected).
    #[arg(
        long,
        global = true,
        allow_hyphen_values = true,
        conflicts_with = "percentile"
    )]
    pub epsilon_prime: Option<f64>,
    /// Set the heuristic threshold to this percentile of table scores.
    #[arg(long, global = true)]
    pub percentile: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<SelectMode>,
    /// Selection JSON to augment with.
    #[arg(long, global = true)]
    pub selection: Option<PathBuf>,
    /// Number of top selected words to add.
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Annotation TSV (`word<TAB>score`).
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub phi_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub phi_lr: Option<f64>,
    #[arg(long, global = true)]
    pub phi_ridge: Option<f64>,
    #[arg(long, global = true)]
    pub phi_hidden: Option<usize>,
    #[arg(long, global = true)]
    pub lm_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lm_lr: Option<f64>,
    #[arg(long, global = true)]
    pub lm_context: Option<usize>,
    #[arg(long, global = true)]
    pub lm_dim: Option<usize>,
    #[arg(long, global = true)]
    pub lm_window: Option<usize>,
    /// Train on the first N corpus documents only.
    #[arg(long, global = true)]
    pub lm_documents: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mask: Option<Mask>,
    /// Histogram bin count.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Text for the demo command.
    #[arg(long, global = true)]
    pub text: Option<String>,
    /// Output directory [env: DOMTOK_OUT].
    #[arg(long, global = true, env = OUT_ENV, hide_env = true)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context_input(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context_input(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if !self.corpus.is_empty() {
            c.corpus = self.corpus.clone();
        }
        if !self.base_corpus.is_empty() {
            c.base_corpus = self.base_corpus.clone();
        }
        if self.tokenizer.is_some() {
            c.tokenizer = self.tokenizer.clone();
            c.train_vocab = None;
        }
        if self.train_vocab.is_some() {
            c.train_vocab = self.train_vocab;
            c.tokenizer = None;
        }
        if self.epsilon_prime.is_some() {
            c.epsilon_prime = self.epsilon_prime;
            c.percentile = None;
        }
        if self.percentile.is_some() {
            c.percentile = self.percentile;
            c.epsilon_prime = None;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        take!(alpha, epsilon, mode, phi_epochs, phi_lr, phi_ridge, phi_hidden);
        take!(lm_epochs, lm_lr, lm_context, lm_dim, lm_window, mask, bins, seed, out);
        macro_rules! take_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    c.$field = self.$field.clone();
                }
            )*};
        }
        take_opt!(selection, cap, annotations, lm_documents, text);
        Ok(c)
    }
}

impl RunConfig {
    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Writes the effective config as `<command>.config.json` in the output
    /// directory.
    pub fn persist(&self, command: &str) -> Result<PathBuf, CliError> {
        let path = self.out_file(&format!("{command}.config.json"));
        write_text(&path, &domtok::report::to_sorted_json(self))?;
        Ok(path)
    }
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context_input(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context_input(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"alpha": 4, "epsilon": 1.5, "train_vocab": 300}"#).unwrap();
        let o = Overrides {
            config: Some(file),
            alpha: Some(6),
            tokenizer: Some("t.json".into()),
            ..Overrides::default()
        };
        let c = o.resolve().unwrap();
        assert_eq!((c.alpha, c.epsilon), (6, 1.5));
        assert_eq!((c.tokenizer, c.train_vocab), (Some("t.json".into()), None));
    }

    #[test]
    fn persisted_config_round_trips() {
        let c = RunConfig {
            cap: Some(7),
            seed: 42,
            ..RunConfig::default()
        };
        let back: RunConfig = serde_json::from_str(&domtok::report::to_sorted_json(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"alhpa": 4}"#).unwrap();
        let o = Overrides {
            config: Some(file),
            ..Overrides::default()
        };
        assert_eq!(o.resolve().unwrap_err().code, 2);
    }
}
