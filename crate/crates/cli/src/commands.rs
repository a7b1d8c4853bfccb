use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use domtok::augment::{embedding_init_plan, extend_vocab, savings_report, SavingsStats, Selection};
use domtok::corpus::{load_corpus, word_counts, Corpus};
use domtok::gain::{
    build_gain_table, conditional_entropy, mean_context_gain, select_threshold, token_bigrams,
    GainTable,
};
use domtok::lm::{
    compare_runs, train_lm, ComparisonStats, LmConfig, LmError, LmModel, TrainReport,
};
use domtok::phi::{
    load_annotations, score_percentile, select_heuristic, PhiError, PhiModel, PhiTrainConfig,
};
use domtok::report::{
    bundle_report, gain_histogram, render_demo, to_sorted_json, LmArtifacts, ReportInputs,
};
use domtok::tokenizer::{train_bpe, Tokenizer};

use crate::config::{write_text, RunConfig, SelectMode};
use crate::error::{CliError, ResultExt};

pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const GAIN_TABLE_FILE: &str = "gain_table.tsv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const PHI_MODEL_FILE: &str = "phi_model.json";
pub const AUGMENTED_FILE: &str = "augmented_tokenizer.json";
pub const INIT_PLAN_FILE: &str = "init_plan.json";
pub const SAVINGS_FILE: &str = "savings.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const REPORT_DIR: &str = "report";
pub const DEMO_FILE: &str = "demo.json";

const BASELINE_LABEL: &str = "baseline";
const AUGMENTED_LABEL: &str = "augmented";

fn selection_file(mode: SelectMode) -> String {
    format!("selection_{}.json", mode.name())
}

fn train_report_file(label: &str) -> String {
    format!("train_{label}.json")
}

#[derive(Debug, Serialize, Deserialize)]
struct Analysis {
    words: usize,
    alpha: usize,
    conditional_entropy_nats: Option<f64>,
    mean_context_gain_nats: Option<f64>,
    top_word: Option<String>,
}

/// Expands directories into their files, sorted by path.
fn corpus_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if paths.is_empty() {
        return Err(CliError::input("no corpus given (use --corpus)"));
    }
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found = Vec::new();
            for entry in WalkDir::new(path) {
                let entry = entry.with_context_input(|| format!("walking {}", path.display()))?;
                if entry.file_type().is_file() {
                    found.push(entry.into_path());
                }
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn read_corpus(paths: &[PathBuf]) -> Result<Corpus, CliError> {
    load_corpus(&corpus_files(paths)?).input()
}

fn log_written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn save(path: PathBuf, contents: &str) -> Result<(), CliError> {
    write_text(&path, contents)?;
    log_written(&path);
    Ok(())
}

fn load_tokenizer(path: &Path, hint: &str) -> Result<Tokenizer, CliError> {
    if !path.exists() {
        return Err(CliError::input(format!(
            "{} not found; {hint}",
            path.display()
        )));
    }
    Tokenizer::load(path).input()
}

fn baseline(config: &RunConfig) -> Result<Tokenizer, CliError> {
    match &config.tokenizer {
        Some(path) => Tokenizer::load(path).input(),
        None => load_tokenizer(&config.out_file(TOKENIZER_FILE), "run analyze first"),
    }
}

fn gain_table(config: &RunConfig) -> Result<GainTable, CliError> {
    let path = config.out_file(GAIN_TABLE_FILE);
    if !path.exists() {
        return Err(CliError::input(format!(
            "{} not found; run analyze first",
            path.display()
        )));
    }
    GainTable::load_tsv(&path, config.alpha).input()
}

pub fn analyze(config: &RunConfig) -> Result<(), CliError> {
    if config.alpha == 0 {
        return Err(CliError::input("--alpha must be at least 1"));
    }
    let corpus = read_corpus(&config.corpus)?;
    let tok = match (&config.tokenizer, config.train_vocab) {
        (Some(path), None) => Tokenizer::load(path).input()?,
        (None, Some(size)) => {
            let base_corpus = if config.base_corpus.is_empty() {
                corpus.clone()
            } else {
                read_corpus(&config.base_corpus)?
            };
            eprintln!("training baseline tokenizer to {size} tokens");
            train_bpe(&base_corpus, size).input()?
        }
        _ => {
            return Err(CliError::input(
                "exactly one of --tokenizer or --train-vocab is required",
            ))
        }
    };
    let table = build_gain_table(&tok, &word_counts(&corpus), config.alpha).input()?;
    let analysis = Analysis {
        words: table.len(),
        alpha: config.alpha,
        conditional_entropy_nats: conditional_entropy(&token_bigrams(&tok, &corpus)).ok(),
        mean_context_gain_nats: mean_context_gain(&tok, &corpus, config.alpha).ok(),
        top_word: table.records().first().map(|r| r.word.clone()),
    };
    save(config.out_file(TOKENIZER_FILE), &tok.to_json())?;
    save(config.out_file(GAIN_TABLE_FILE), &table.to_tsv())?;
    save(config.out_file(ANALYSIS_FILE), &to_sorted_json(&analysis))?;
    eprintln!(
        "{} words, top word {}",
        table.len(),
        analysis.top_word.as_deref().unwrap_or("-")
    );
    Ok(())
}

fn phi_error(e: PhiError) -> CliError {
    match e {
        PhiError::Shape(_) => CliError::invariant(e),
        other => CliError::input(other),
    }
}

pub fn train_phi(config: &RunConfig) -> Result<(), CliError> {
    let path = config
        .annotations
        .as_ref()
        .ok_or_else(|| CliError::input("--annotations is required"))?;
    let annotations = load_annotations(path).map_err(phi_error)?;
    let table = gain_table(config)?;
    let phi_config = PhiTrainConfig {
        epochs: config.phi_epochs,
        lr: config.phi_lr,
        ridge_lambda: config.phi_ridge,
        hidden: config.phi_hidden,
        seed: config.seed,
    };
    let model = domtok::phi::train_phi(&annotations, &table, &phi_config).map_err(phi_error)?;
    let loss = model.final_loss.unwrap_or(f64::NAN);
    if !loss.is_finite() {
        return Err(CliError::invariant(
            "scorer training produced a non-finite loss",
        ));
    }
    save(config.out_file(PHI_MODEL_FILE), &model.to_json())?;
    eprintln!("final training loss {loss:.6}");
    Ok(())
}

pub fn select(config: &RunConfig) -> Result<(), CliError> {
    let table = gain_table(config)?;
    let selection = match config.mode {
        SelectMode::Threshold => select_threshold(&table, config.epsilon),
        SelectMode::Heuristic => {
            let path = config.out_file(PHI_MODEL_FILE);
            if !path.exists() {
                return Err(CliError::input(format!(
                    "{} not found; run train-phi first",
                    path.display()
                )));
            }
            let model = PhiModel::load(&path).map_err(phi_error)?;
            let cut = match (config.epsilon_prime, config.percentile) {
                (Some(e), _) => e,
                (None, Some(p)) if (0.0..=100.0).contains(&p) => {
                    score_percentile(&table, &model, p).unwrap_or(f64::INFINITY)
                }
                (None, Some(p)) => {
                    return Err(CliError::input(format!(
                        "--percentile {p} is outside [0, 100]"
                    )))
                }
                (None, None) => {
                    return Err(CliError::input(
                        "heuristic mode needs --epsilon-prime or --percentile",
                    ))
                }
            };
            select_heuristic(&table, &model, cut)
        }
    };
    save(
        config.out_file(&selection_file(config.mode)),
        &selection.to_json(),
    )?;
    eprintln!("selected {} of {} words", selection.len(), table.len());
    Ok(())
}

pub fn augment(config: &RunConfig) -> Result<(), CliError> {
    let base = baseline(config)?;
    let path = config
        .selection
        .clone()
        .unwrap_or_else(|| config.out_file(&selection_file(config.mode)));
    let selection = Selection::load(&path).input()?;
    let extension = extend_vocab(&base, &selection, config.cap).input()?;
    let aug = extension.tokenizer;
    let plan = embedding_init_plan(&base, &aug).invariant()?;
    let corpus = read_corpus(&config.corpus)?;
    let savings = savings_report(&base, &aug, &corpus);
    if savings.augmented_tokens > savings.base_tokens {
        return Err(CliError::invariant(
            "augmented tokenizer increased the token count",
        ));
    }
    save(config.out_file(AUGMENTED_FILE), &aug.to_json())?;
    save(config.out_file(INIT_PLAN_FILE), &plan.to_json())?;
    save(config.out_file(SAVINGS_FILE), &savings.to_json())?;
    if !extension.skipped_atomic.is_empty() {
        eprintln!(
            "skipped {} words already encoded as one token",
            extension.skipped_atomic.len()
        );
    }
    eprintln!(
        "added {} tokens; {} -> {} tokens ({:.4}% saved)",
        aug.added_tokens().len(),
        savings.base_tokens,
        savings.augmented_tokens,
        savings.saved_pct
    );
    Ok(())
}

fn lm_error(e: LmError) -> CliError {
    match e {
        LmError::CorpusTooSmall { .. } | LmError::Config(_) | LmError::VocabMismatch { .. } => {
            CliError::input(e)
        }
        other => CliError::invariant(other),
    }
}

pub fn lm(config: &RunConfig) -> Result<(), CliError> {
    let base = baseline(config)?;
    let aug = load_tokenizer(&config.out_file(AUGMENTED_FILE), "run augment first")?;
    let plan = embedding_init_plan(&base, &aug).input()?;
    let mut corpus = read_corpus(&config.corpus)?;
    if let Some(n) = config.lm_documents {
        corpus = corpus.head(n);
    }
    if config.lm_context == 0 || config.lm_dim == 0 {
        return Err(CliError::input(
            "--lm-context and --lm-dim must be at least 1",
        ));
    }
    let lm_config = LmConfig {
        epochs: config.lm_epochs,
        lr: config.lm_lr,
        seed: config.seed,
        mask_mode: config.mask.into(),
        window: config.lm_window,
    };
    let init = LmModel::random(
        base.vocab_size(),
        config.lm_context,
        config.lm_dim,
        config.seed,
    );
    let mut base_model = init.clone();
    let base_report =
        train_lm(&mut base_model, &corpus, &base, &lm_config, BASELINE_LABEL).map_err(lm_error)?;
    let mut aug_model = init.extended(&plan, aug.vocab_size()).map_err(lm_error)?;
    let aug_report =
        train_lm(&mut aug_model, &corpus, &aug, &lm_config, AUGMENTED_LABEL).map_err(lm_error)?;
    let comparison = compare_runs(&base_report, &aug_report);
    for report in [&base_report, &aug_report] {
        save(
            config.out_file(&train_report_file(&report.label)),
            &report.to_json(),
        )?;
        save(
            config.out_file(&format!("loss_{}.csv", report.label)),
            &report.loss_csv(),
        )?;
        eprintln!(
            "{}: {} tokens, loss {:.4} -> {:.4}, {:.2}s",
            report.label,
            report.tokens_processed,
            report.initial_loss,
            report.final_moving_average,
            report.wall_clock_secs
        );
    }
    save(config.out_file(COMPARISON_FILE), &comparison.to_json())?;
    eprintln!(
        "token delta {:+.4}%, time delta {:+.4}%",
        comparison.tokens_delta_pct, comparison.time_delta_pct
    );
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context_input(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context_input(|| format!("parsing {}", path.display()))
}

pub fn report(config: &RunConfig) -> Result<(), CliError> {
    if config.bins == 0 {
        return Err(CliError::input("--bins must be at least 1"));
    }
    let table = gain_table(config)?;
    let savings_path = config.out_file(SAVINGS_FILE);
    if !savings_path.exists() {
        return Err(CliError::input(format!(
            "{} not found; run augment first",
            savings_path.display()
        )));
    }
    let savings: SavingsStats = read_json(&savings_path)?;

    let mut loaded = Vec::new();
    for mode in [SelectMode::Threshold, SelectMode::Heuristic] {
        let path = config.out_file(&selection_file(mode));
        if path.exists() {
            loaded.push((mode.name().to_owned(), Selection::load(&path).input()?));
        }
    }
    if loaded.is_empty() {
        return Err(CliError::input("no selection found; run select first"));
    }
    let mut histograms = Vec::new();
    for (_, sel) in &loaded {
        histograms.push(gain_histogram(sel, &table, config.bins).input()?);
    }
    let selections: BTreeMap<String, &Selection> = loaded
        .iter()
        .map(|(name, sel)| (name.clone(), sel))
        .collect();

    let analysis: Option<Analysis> = {
        let path = config.out_file(ANALYSIS_FILE);
        if path.exists() {
            Some(read_json(&path)?)
        } else {
            None
        }
    };

    let train_paths =
        [BASELINE_LABEL, AUGMENTED_LABEL].map(|l| config.out_file(&train_report_file(l)));
    let comparison_path = config.out_file(COMPARISON_FILE);
    let lm_stage: Option<(Vec<TrainReport>, ComparisonStats)> =
        if train_paths.iter().all(|p| p.exists()) && comparison_path.exists() {
            let reports = train_paths
                .iter()
                .map(|p| read_json(p))
                .collect::<Result<Vec<TrainReport>, _>>()?;
            Some((reports, read_json(&comparison_path)?))
        } else {
            eprintln!("notice: no LM stage outputs found; train sections omitted");
            None
        };

    let inputs = ReportInputs {
        table: &table,
        selections,
        savings: &savings,
        histograms,
        conditional_entropy: analysis.and_then(|a| a.conditional_entropy_nats),
        lm: lm_stage.as_ref().map(|(reports, comparison)| LmArtifacts {
            reports: reports.iter().collect(),
            comparison,
        }),
    };
    let dir = config.out_file(REPORT_DIR);
    let written = bundle_report(&inputs, &dir).input()?;
    eprintln!("wrote {} files under {}", written.len(), dir.display());
    Ok(())
}

pub fn demo(config: &RunConfig) -> Result<(), CliError> {
    let text = config
        .text
        .as_deref()
        .ok_or_else(|| CliError::input("--text is required"))?;
    let base = baseline(config)?;
    let aug = load_tokenizer(&config.out_file(AUGMENTED_FILE), "run augment first")?;
    let output = render_demo(&base, &aug, text);
    print!("{}", output.to_text());
    save(config.out_file(DEMO_FILE), &output.to_json())
}
