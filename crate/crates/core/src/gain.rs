//! Subtoken fertility and information gain of corpus words.
//!
//! All logarithms are natural, so gains are in nats.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{Selection, SelectionEntry, SelectionKind};
use crate::corpus::{pre_tokenize, Corpus, WordCounts};
use crate::tokenizer::{TokenId, Tokenizer};

#[derive(Debug, Error)]
pub enum GainError {
    #[error("word is empty")]
    EmptyWord,
    #[error("context size alpha must be at least 1")]
    ZeroAlpha,
    #[error("subtoken counts are empty")]
    EmptyContext,
    #[error("{what} must be at least 1")]
    ZeroCount { what: &'static str },
    #[error("no (x, y) pairs to compute a conditional entropy over")]
    EmptyPairs,
    #[error("gain table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot access gain table {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordRecord {
    pub word: String,
    pub freq: u64,
    pub subtokens: usize,
    pub gain: f64,
}

/// Records sorted by gain descending, then frequency descending, then word.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    records: Vec<WordRecord>,
    alpha: usize,
}

pub fn subtoken_count(tok: &Tokenizer, word: &str) -> Result<usize, GainError> {
    if word.is_empty() {
        return Err(GainError::EmptyWord);
    }
    Ok(tok.encode(word).len())
}

/// `ln(1 + ΣN) − ln(1 + α)` over the subtoken counts of a context.
pub fn context_gain(subtoken_counts: &[usize], alpha: usize) -> Result<f64, GainError> {
    if alpha == 0 {
        return Err(GainError::ZeroAlpha);
    }
    if subtoken_counts.is_empty() {
        return Err(GainError::EmptyContext);
    }
    if subtoken_counts.contains(&0) {
        return Err(GainError::ZeroCount {
            what: "subtoken count",
        });
    }
    let total: usize = subtoken_counts.iter().sum();
    Ok((1.0 + total as f64).ln() - (1.0 + alpha as f64).ln())
}

/// Per-word gain `ln(1 + f·N) − ln(1 + f)`: the word's `f` occurrences
/// ideally cost `f` tokens and actually cost `f·N`.
pub fn word_gain(freq: u64, subtokens: usize) -> Result<f64, GainError> {
    if freq == 0 {
        return Err(GainError::ZeroCount { what: "frequency" });
    }
    if subtokens == 0 {
        return Err(GainError::ZeroCount {
            what: "subtoken count",
        });
    }
    let f = freq as f64;
    Ok((1.0 + f * subtokens as f64).ln() - (1.0 + f).ln())
}

fn record_order(a: &WordRecord, b: &WordRecord) -> std::cmp::Ordering {
    b.gain
        .total_cmp(&a.gain)
        .then(b.freq.cmp(&a.freq))
        .then_with(|| a.word.cmp(&b.word))
}

pub fn build_gain_table(
    tok: &Tokenizer,
    counts: &WordCounts,
    alpha: usize,
) -> Result<GainTable, GainError> {
    if alpha == 0 {
        return Err(GainError::ZeroAlpha);
    }
    let entries: Vec<(&str, u64)> = counts.iter().collect();
    let records = entries
        .par_iter()
        .map(|&(word, freq)| {
            let subtokens = subtoken_count(tok, word)?;
            Ok(WordRecord {
                word: word.to_owned(),
                freq,
                subtokens,
                gain: word_gain(freq, subtokens)?,
            })
        })
        .collect::<Result<Vec<_>, GainError>>()?;
    Ok(GainTable::new(records, alpha))
}

impl GainTable {
    pub fn new(mut records: Vec<WordRecord>, alpha: usize) -> Self {
        records.sort_by(record_order);
        Self {
            records,
            alpha: alpha.max(1),
        }
    }

    pub fn records(&self) -> &[WordRecord] {
        &self.records
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_gain(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.gain)
    }

    pub fn max_freq(&self) -> u64 {
        self.records.iter().map(|r| r.freq).max().unwrap_or(0)
    }

    pub fn get(&self, word: &str) -> Option<&WordRecord> {
        self.records.iter().find(|r| r.word == word)
    }

    pub fn index(&self) -> HashMap<&str, &WordRecord> {
        self.records.iter().map(|r| (r.word.as_str(), r)).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tfreq\tsubtokens\tgain_nats\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.word, r.freq, r.subtokens, r.gain
            ));
        }
        out
    }

    pub fn from_tsv(text: &str, alpha: usize) -> Result<Self, GainError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "word\tfreq\tsubtokens\tgain_nats")) => {}
            _ => {
                return Err(GainError::Parse {
                    line: 1,
                    message: "expected header word\\tfreq\\tsubtokens\\tgain_nats".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let err = |message: String| GainError::Parse {
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [word, freq, subtokens, gain] = cols[..] else {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            };
            let freq: u64 = freq.parse().map_err(|e| err(format!("freq: {e}")))?;
            let subtokens: usize = subtokens
                .parse()
                .map_err(|e| err(format!("subtokens: {e}")))?;
            let gain: f64 = gain.parse().map_err(|e| err(format!("gain_nats: {e}")))?;
            if word.is_empty() || freq == 0 || subtokens == 0 || !gain.is_finite() {
                return Err(err("empty word, zero count or non-finite gain".into()));
            }
            records.push(WordRecord {
                word: word.to_owned(),
                freq,
                subtokens,
                gain,
            });
        }
        Ok(Self::new(records, alpha))
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<(), GainError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|source| GainError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load_tsv(path: impl AsRef<Path>, alpha: usize) -> Result<Self, GainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GainError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_tsv(&text, alpha)
    }
}

/// Words whose gain is strictly above `epsilon`, in table order.
pub fn select_threshold(table: &GainTable, epsilon: f64) -> Selection {
    let entries = table
        .records()
        .iter()
        .filter(|r| r.gain > epsilon)
        .map(|r| SelectionEntry {
            word: r.word.clone(),
            score: r.gain,
        })
        .collect();
    Selection::from_sorted(SelectionKind::Threshold, epsilon, entries)
}

/// Empirical `H(Y|X) = −Σ P(x,y) ln P(y|x)` from pair counts.
pub fn conditional_entropy<K: Ord>(pair_counts: &BTreeMap<(K, K), u64>) -> Result<f64, GainError> {
    if pair_counts.is_empty() {
        return Err(GainError::EmptyPairs);
    }
    if pair_counts.values().any(|&c| c == 0) {
        return Err(GainError::ZeroCount { what: "pair count" });
    }
    let total: u64 = pair_counts.values().sum();
    let mut marginal: BTreeMap<&K, u64> = BTreeMap::new();
    for ((x, _), c) in pair_counts {
        *marginal.entry(x).or_default() += c;
    }
    let h = pair_counts
        .iter()
        .map(|((x, _), &c)| {
            let joint = c as f64 / total as f64;
            let cond = c as f64 / marginal[x] as f64;
            -joint * cond.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Adjacent token pairs within each document.
pub fn token_bigrams(tok: &Tokenizer, corpus: &Corpus) -> BTreeMap<(TokenId, TokenId), u64> {
    let mut counts = BTreeMap::new();
    for doc in corpus.documents() {
        for w in tok.encode(doc).windows(2) {
            *counts.entry((w[0], w[1])).or_default() += 1;
        }
    }
    counts
}

/// Mean context gain over consecutive windows of `alpha` words; a trailing
/// partial window is scored against its own length.
pub fn mean_context_gain(tok: &Tokenizer, corpus: &Corpus, alpha: usize) -> Result<f64, GainError> {
    if alpha == 0 {
        return Err(GainError::ZeroAlpha);
    }
    let mut cache: HashMap<&str, usize> = HashMap::new();
    let (mut sum, mut windows) = (0.0, 0usize);
    for doc in corpus.documents() {
        let counts: Vec<usize> = pre_tokenize(doc)
            .into_iter()
            .map(|w| *cache.entry(w).or_insert_with(|| tok.encode(w).len()))
            .collect();
        for chunk in counts.chunks(alpha) {
            sum += context_gain(chunk, chunk.len())?;
            windows += 1;
        }
    }
    Ok(if windows == 0 {
        0.0
    } else {
        sum / windows as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::golden_tokenizer;

    const TOL: f64 = 1e-5;

    #[test]
    fn golden_fertilities() {
        let tok = golden_tokenizer();
        assert_eq!(subtoken_count(&tok, "OpenLane").unwrap(), 3);
        assert_eq!(subtoken_count(&tok, "an").unwrap(), 1);
        assert_eq!(subtoken_count(&tok, "Introduce").unwrap(), 3);
        assert!(matches!(
            subtoken_count(&tok, ""),
            Err(GainError::EmptyWord)
        ));
    }

    #[test]
    fn context_gain_values() {
        assert_eq!(context_gain(&[1; 8], 8).unwrap(), 0.0);
        let golden = context_gain(&[3, 3, 1, 1, 2, 1, 1, 1], 8).unwrap();
        assert!((golden - 0.44183).abs() < TOL, "{golden}");
        assert!((context_gain(&[5], 1).unwrap() - 1.09861).abs() < TOL);
        assert!(context_gain(&[1], 0).is_err());
        assert!(context_gain(&[], 3).is_err());
        assert!(context_gain(&[0, 1], 3).is_err());
    }

    #[test]
    fn word_gain_values() {
        assert_eq!(word_gain(5, 1).unwrap(), 0.0);
        assert!((word_gain(1, 3).unwrap() - std::f64::consts::LN_2).abs() < TOL);
        // ln 41 − ln 11
        assert!((word_gain(10, 4).unwrap() - 1.31568).abs() < TOL);
        assert!(word_gain(0, 3).is_err());
        assert!(word_gain(3, 0).is_err());
    }

    #[test]
    fn gain_table_ordering() {
        let tok = golden_tokenizer();
        let mut counts = WordCounts::default();
        counts.add("a", 1);
        let table = build_gain_table(&tok, &counts, 8).unwrap();
        assert_eq!(
            table.records(),
            [WordRecord {
                word: "a".into(),
                freq: 1,
                subtokens: 1,
                gain: 0.0
            }]
        );

        let mut counts = WordCounts::default();
        counts.add("OpenLane", 2);
        counts.add("an", 2);
        let table = build_gain_table(&tok, &counts, 8).unwrap();
        assert_eq!(table.records()[0].word, "OpenLane");

        assert!(build_gain_table(&tok, &WordCounts::default(), 8)
            .unwrap()
            .is_empty());
        assert!(build_gain_table(&tok, &counts, 0).is_err());
    }

    #[test]
    fn ties_break_by_freq_then_word() {
        let table = GainTable::new(
            vec![
                WordRecord {
                    word: "b".into(),
                    freq: 1,
                    subtokens: 1,
                    gain: 0.0,
                },
                WordRecord {
                    word: "a".into(),
                    freq: 1,
                    subtokens: 1,
                    gain: 0.0,
                },
                WordRecord {
                    word: "c".into(),
                    freq: 3,
                    subtokens: 1,
                    gain: 0.0,
                },
            ],
            1,
        );
        let words: Vec<_> = table.records().iter().map(|r| r.word.as_str()).collect();
        assert_eq!(words, ["c", "a", "b"]);
    }

    fn table_with_gains(gains: &[f64]) -> GainTable {
        let records = gains
            .iter()
            .enumerate()
            .map(|(i, &g)| WordRecord {
                word: format!("w{i}"),
                freq: 1,
                subtokens: 2,
                gain: g,
            })
            .collect();
        GainTable::new(records, 1)
    }

    #[test]
    fn threshold_selection() {
        let table = table_with_gains(&[1.3, 0.7, 0.0]);
        let sel = select_threshold(&table, 0.5);
        assert_eq!(sel.words().collect::<Vec<_>>(), ["w0", "w1"]);
        assert_eq!(sel.threshold, 0.5);
        assert!(select_threshold(&table, 1.3).is_empty());
        assert_eq!(select_threshold(&table, -1.0).len(), 3);
    }

    #[test]
    fn entropy_values() {
        let mut pairs = BTreeMap::new();
        pairs.insert(("a", "b"), 10);
        assert_eq!(conditional_entropy(&pairs).unwrap(), 0.0);

        let pairs = BTreeMap::from([(("a", "b"), 1), (("a", "c"), 1)]);
        assert!((conditional_entropy(&pairs).unwrap() - 2f64.ln()).abs() < 1e-12);

        let pairs = BTreeMap::from([(("a", "b"), 3), (("a", "c"), 1)]);
        let expected = -(0.75f64 * 0.75f64.ln()) - 0.25 * 0.25f64.ln();
        assert!((conditional_entropy(&pairs).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.56233).abs() < TOL);

        assert!(conditional_entropy(&BTreeMap::<(u32, u32), u64>::new()).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let table = table_with_gains(&[1.25, 0.1 + 0.2, 0.0]);
        let text = table.to_tsv();
        assert!(text.starts_with("word\tfreq\tsubtokens\tgain_nats\n"));
        assert_eq!(GainTable::from_tsv(&text, 1).unwrap(), table);
        let err = GainTable::from_tsv("word\tfreq\tsubtokens\tgain_nats\nx\t1\n", 1).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gain_monotone(f in 1u64..5000, n in 1usize..64) {
                let g = word_gain(f, n).unwrap();
                prop_assert!(g >= 0.0);
                prop_assert_eq!(g == 0.0, n == 1);
                prop_assert!(word_gain(f, n + 1).unwrap() > g);
                if n >= 2 {
                    prop_assert!(word_gain(f + 1, n).unwrap() > g);
                }
            }

            #[test]
            fn entropy_zero_iff_unique_successor(
                pairs in prop::collection::btree_map((0u8..4, 0u8..4), 1u64..20, 1..12)
            ) {
                let h = conditional_entropy(&pairs).unwrap();
                prop_assert!(h >= 0.0);
                let mut succ: BTreeMap<u8, usize> = BTreeMap::new();
                for (x, _) in pairs.keys() {
                    *succ.entry(*x).or_default() += 1;
                }
                let unique = succ.values().all(|&n| n == 1);
                prop_assert_eq!(h == 0.0, unique);
            }
        }
    }
}
