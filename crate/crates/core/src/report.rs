//! Report aggregation: gain histograms, tokenization demos, and the on-disk
//! report bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{SavingsStats, Selection};
use crate::gain::GainTable;
use crate::lm::{ComparisonStats, TrainReport};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("gain table is empty")]
    EmptyTable,
    #[error("selected word {0:?} is not in the gain table")]
    UnknownWord(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Rounds half away from zero for positive values, half up in general.
pub fn round_half_up(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    (x * scale + 0.5).floor() / scale
}

/// Pretty JSON with object keys sorted at every level, newline-terminated.
pub fn to_sorted_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut s = serde_json::to_string_pretty(&value).expect("JSON values serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub label: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], c);
        }
        s
    }
}

/// Equal-width histogram of the selected words' gains over `[0, max gain]`.
/// The last bin is closed so the maximum lands inside it. A table whose
/// maximum gain is zero uses `[0, 1]` so edges stay strictly ascending.
pub fn gain_histogram(
    selection: &Selection,
    table: &GainTable,
    bins: usize,
) -> Result<Histogram, ReportError> {
    if bins == 0 {
        return Err(ReportError::ZeroBins);
    }
    if table.is_empty() {
        return Err(ReportError::EmptyTable);
    }
    let max = table.max_gain();
    let top = if max > 0.0 { max } else { 1.0 };
    let bin_edges: Vec<f64> = (0..=bins).map(|i| top * i as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    let index = table.index();
    for word in selection.words() {
        let record = index
            .get(word)
            .ok_or_else(|| ReportError::UnknownWord(word.to_owned()))?;
        let bin = ((record.gain / top) * bins as f64).floor() as usize;
        counts[bin.min(bins - 1)] += 1;
    }
    let label = match selection.kind {
        crate::augment::SelectionKind::Threshold => "threshold",
        crate::augment::SelectionKind::Heuristic => "heuristic",
    };
    Ok(Histogram {
        label: label.to_owned(),
        bin_edges,
        counts,
    })
}

pub fn mean_gain(selection: &Selection, table: &GainTable) -> Result<f64, ReportError> {
    if selection.is_empty() {
        return Ok(0.0);
    }
    let index = table.index();
    let mut sum = 0.0;
    for word in selection.words() {
        sum += index
            .get(word)
            .ok_or_else(|| ReportError::UnknownWord(word.to_owned()))?
            .gain;
    }
    Ok(sum / selection.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoOutput {
    pub text: String,
    pub base_tokens: Vec<String>,
    pub augmented_tokens: Vec<String>,
    pub base_count: usize,
    pub augmented_count: usize,
    /// Percentage of base tokens saved, 2 decimals; 0 for empty text.
    pub reduction_pct: f64,
}

impl DemoOutput {
    pub fn to_json(&self) -> String {
        to_sorted_json(self)
    }

    /// Two aligned rows of `|`-separated tokens plus a count line.
    pub fn to_text(&self) -> String {
        let row = |name: &str, tokens: &[String], count: usize| {
            let shown: Vec<String> = tokens.iter().map(|t| t.replace('\n', "\\n")).collect();
            format!("{name:<10} {count:>4}  |{}|\n", shown.join("|"))
        };
        let mut s = row("base", &self.base_tokens, self.base_count);
        s.push_str(&row(
            "augmented",
            &self.augmented_tokens,
            self.augmented_count,
        ));
        let _ = writeln!(s, "reduction  {:.2}%", self.reduction_pct);
        s
    }
}

pub fn render_demo(base: &Tokenizer, augmented: &Tokenizer, text: &str) -> DemoOutput {
    let pieces = |tok: &Tokenizer| -> Vec<String> {
        tok.encode(text)
            .into_iter()
            .map(|id| {
                tok.token_text(id)
                    .expect("encoded ids are in the vocabulary")
            })
            .collect()
    };
    let base_tokens = pieces(base);
    let augmented_tokens = pieces(augmented);
    let (b, a) = (base_tokens.len(), augmented_tokens.len());
    let reduction_pct = if b == 0 {
        0.0
    } else {
        round_half_up(100.0 * (b as f64 - a as f64) / b as f64, 2)
    };
    DemoOutput {
        text: text.to_owned(),
        base_tokens,
        augmented_tokens,
        base_count: b,
        augmented_count: a,
        reduction_pct,
    }
}

pub struct LmArtifacts<'a> {
    pub reports: Vec<&'a TrainReport>,
    pub comparison: &'a ComparisonStats,
}

/// Everything `bundle_report` writes. Selections and histograms are keyed
/// by name in the output.
pub struct ReportInputs<'a> {
    pub table: &'a GainTable,
    pub selections: BTreeMap<String, &'a Selection>,
    pub savings: &'a SavingsStats,
    pub histograms: Vec<Histogram>,
    pub conditional_entropy: Option<f64>,
    pub lm: Option<LmArtifacts<'a>>,
}

pub const GAIN_TABLE_FILE: &str = "gain_table.tsv";
pub const SELECTIONS_FILE: &str = "selections.json";
pub const SAVINGS_FILE: &str = "savings.json";
pub const HISTOGRAMS_FILE: &str = "histograms.json";
pub const TRAIN_REPORTS_FILE: &str = "train_reports.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const SUMMARY_FILE: &str = "summary.txt";

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    fs::write(&path, contents).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the report directory and returns the files written, in order.
/// Without an LM stage the train report and comparison files are skipped
/// and the summary says so.
pub fn bundle_report(inputs: &ReportInputs<'_>, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let csv_dir = dir.join("csv");
    fs::create_dir_all(&csv_dir).map_err(|source| ReportError::Io {
        path: csv_dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    write(
        dir.join(GAIN_TABLE_FILE),
        &inputs.table.to_tsv(),
        &mut written,
    )?;
    write(
        dir.join(SELECTIONS_FILE),
        &to_sorted_json(&inputs.selections),
        &mut written,
    )?;
    write(
        dir.join(SAVINGS_FILE),
        &inputs.savings.to_json(),
        &mut written,
    )?;
    write(
        dir.join(HISTOGRAMS_FILE),
        &to_sorted_json(&inputs.histograms),
        &mut written,
    )?;
    for h in &inputs.histograms {
        write(
            csv_dir.join(format!("histogram_{}.csv", h.label)),
            &h.to_csv(),
            &mut written,
        )?;
    }
    if let Some(lm) = &inputs.lm {
        write(
            dir.join(TRAIN_REPORTS_FILE),
            &to_sorted_json(&lm.reports),
            &mut written,
        )?;
        write(
            dir.join(COMPARISON_FILE),
            &lm.comparison.to_json(),
            &mut written,
        )?;
        for r in &lm.reports {
            write(
                csv_dir.join(format!("loss_{}.csv", r.label)),
                &r.loss_csv(),
                &mut written,
            )?;
        }
    }
    write(dir.join(SUMMARY_FILE), &summary(inputs), &mut written)?;
    Ok(written)
}

fn summary(inputs: &ReportInputs<'_>) -> String {
    let mut s = String::new();
    let t = inputs.table;
    let _ = writeln!(s, "gain table: {} words, alpha {}", t.len(), t.alpha());
    if let Some(top) = t.records().first() {
        let _ = writeln!(
            s,
            "top word: {} (freq {}, {} subtokens, gain {:.4} nats)",
            top.word, top.freq, top.subtokens, top.gain
        );
    }
    if let Some(h) = inputs.conditional_entropy {
        let _ = writeln!(s, "token bigram conditional entropy: {h:.4} nats");
    }
    for (name, sel) in &inputs.selections {
        let mean = mean_gain(sel, t).unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "selection {name}: {} words, mean gain {mean:.4} nats",
            sel.len()
        );
    }
    let sv = inputs.savings;
    let _ = writeln!(
        s,
        "savings: {} -> {} tokens ({} saved, {:.4}%)",
        sv.base_tokens, sv.augmented_tokens, sv.saved_tokens, sv.saved_pct
    );
    for h in &inputs.histograms {
        let _ = writeln!(
            s,
            "histogram {}: {} bins, {} words",
            h.label,
            h.counts.len(),
            h.total()
        );
    }
    match &inputs.lm {
        Some(lm) => {
            for r in &lm.reports {
                let _ = writeln!(
                    s,
                    "lm {}: {} tokens, loss {:.4} -> {:.4}, {:.2}s",
                    r.label,
                    r.tokens_processed,
                    r.initial_loss,
                    r.final_moving_average,
                    r.wall_clock_secs
                );
            }
            let c = lm.comparison;
            let _ = writeln!(
                s,
                "comparison {} vs {}: tokens {:+.4}%, time {:+.4}%, final loss {:+.4}%",
                c.candidate,
                c.baseline,
                c.tokens_delta_pct,
                c.time_delta_pct,
                c.final_loss_delta_pct
            );
        }
        None => s.push_str("lm stage not run; train reports omitted\n"),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{SelectionEntry, SelectionKind};
    use crate::fixtures::{golden_tokenizer, GOLDEN_ADDED, GOLDEN_SENTENCE};
    use crate::gain::WordRecord;
    use proptest::prelude::*;

    fn table(gains: &[f64]) -> GainTable {
        let records = gains
            .iter()
            .enumerate()
            .map(|(i, &gain)| WordRecord {
                word: format!("w{i}"),
                freq: 1,
                subtokens: 2,
                gain,
            })
            .collect();
        GainTable::new(records, 8)
    }

    fn select_all(t: &GainTable) -> Selection {
        let entries = t
            .records()
            .iter()
            .map(|r| SelectionEntry {
                word: r.word.clone(),
                score: r.gain,
            })
            .collect();
        Selection::new(SelectionKind::Threshold, 0.0, entries).unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_up(38.461538, 2), 38.46);
        assert_eq!(round_half_up(0.125, 2), 0.13);
        assert_eq!(round_half_up(-12.0, 4), -12.0);
    }

    #[test]
    fn sorted_json_keys() {
        let mut m = serde_json::Map::new();
        m.insert("zeta".into(), 1.into());
        m.insert("alpha".into(), 2.into());
        let s = to_sorted_json(&m);
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn identical_gains_fill_one_bin() {
        let t = table(&[1.5, 1.5, 1.5]);
        let h = gain_histogram(&select_all(&t), &t, 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 3]);
        assert_eq!(h.bin_edges.last(), Some(&1.5));
    }

    #[test]
    fn empty_selection_and_errors() {
        let t = table(&[2.0, 1.0]);
        let empty = Selection::new(SelectionKind::Threshold, 5.0, vec![]).unwrap();
        assert_eq!(gain_histogram(&empty, &t, 3).unwrap().counts, vec![0, 0, 0]);
        assert!(matches!(
            gain_histogram(&empty, &t, 0),
            Err(ReportError::ZeroBins)
        ));
        assert!(matches!(
            gain_histogram(&empty, &table(&[]), 2),
            Err(ReportError::EmptyTable)
        ));
        let zero = table(&[0.0]);
        let h = gain_histogram(&select_all(&zero), &zero, 2).unwrap();
        assert_eq!((h.counts, h.bin_edges), (vec![1, 0], vec![0.0, 0.5, 1.0]));
    }

    #[test]
    fn fixture_demo() {
        let base = golden_tokenizer();
        let aug = base.with_added_tokens(GOLDEN_ADDED.iter().map(|s| s.to_string()));
        let demo = render_demo(&base, &aug, GOLDEN_SENTENCE);
        assert_eq!((demo.base_count, demo.augmented_count), (13, 8));
        assert_eq!(demo.reduction_pct, 38.46);
        assert!(demo.to_text().contains("38.46%"));

        let plain = render_demo(&base, &aug, "the cat sat");
        assert_eq!(plain.base_tokens, plain.augmented_tokens);
        assert_eq!(plain.reduction_pct, 0.0);

        let empty = render_demo(&base, &aug, "");
        assert_eq!(
            (empty.base_count, empty.augmented_count, empty.reduction_pct),
            (0, 0, 0.0)
        );
    }

    proptest! {
        #[test]
        fn histogram_conserves(gains in prop::collection::vec(0.0f64..50.0, 1..60), bins in 1usize..20, take in 0usize..60) {
            let t = table(&gains);
            let sel = select_all(&t).truncated(take);
            let h = gain_histogram(&sel, &t, bins).unwrap();
            prop_assert_eq!(h.total(), sel.len() as u64);
            prop_assert_eq!(h.counts.len() + 1, h.bin_edges.len());
            prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
