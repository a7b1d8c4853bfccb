//! Applying a word selection to a baseline tokenizer and measuring the
//! resulting token savings.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::report::round_half_up;
use crate::tokenizer::{TokenId, Tokenizer};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("cap {cap} exceeds the {len} selected words")]
    CapTooLarge { cap: usize, len: usize },
    #[error("augmented tokenizer does not derive from the baseline: {0}")]
    NotDerived(String),
    #[error("added token {0:?} has an empty baseline encoding")]
    EmptyEncoding(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed selection JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    /// Raw gain above a threshold.
    Threshold,
    /// Heuristic scorer output above a threshold.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub word: String,
    pub score: f64,
}

/// Candidate words ordered by score descending, with the threshold that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kind: SelectionKind,
    pub threshold: f64,
    entries: Vec<SelectionEntry>,
}

impl Selection {
    /// Builds a selection, validating uniqueness and ordering.
    pub fn new(
        kind: SelectionKind,
        threshold: f64,
        entries: Vec<SelectionEntry>,
    ) -> Result<Self, AugmentError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if e.word.is_empty() || !seen.insert(e.word.as_str()) {
                return Err(AugmentError::InvalidSelection(format!(
                    "empty or duplicate word {:?}",
                    e.word
                )));
            }
            if !e.score.is_finite() {
                return Err(AugmentError::InvalidSelection(format!(
                    "non-finite score for {:?}",
                    e.word
                )));
            }
        }
        if entries.windows(2).any(|w| w[0].score < w[1].score) {
            return Err(AugmentError::InvalidSelection(
                "entries are not sorted by score descending".into(),
            ));
        }
        Ok(Self::from_sorted(kind, threshold, entries))
    }

    pub(crate) fn from_sorted(
        kind: SelectionKind,
        threshold: f64,
        entries: Vec<SelectionEntry>,
    ) -> Self {
        Self {
            kind,
            threshold,
            entries,
        }
    }

    pub fn entries(&self) -> &[SelectionEntry] {
        &self.entries
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `n` entries.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            kind: self.kind,
            threshold: self.threshold,
            entries: self.entries.iter().take(n).cloned().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self)
    }

    pub fn from_json(json: &str) -> Result<Self, AugmentError> {
        let raw: Selection = serde_json::from_str(json)?;
        Self::new(raw.kind, raw.threshold, raw.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AugmentError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| AugmentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&json)
    }
}

#[derive(Debug, Clone)]
pub struct Extension {
    pub tokenizer: Tokenizer,
    /// Selected words that already encode to a single token and were skipped.
    pub skipped_atomic: Vec<String>,
}

/// Appends the top `cap` selected words as added tokens. Baseline ids,
/// vocabulary and merges are untouched.
pub fn extend_vocab(
    base: &Tokenizer,
    selection: &Selection,
    cap: Option<usize>,
) -> Result<Extension, AugmentError> {
    let take = match cap {
        Some(cap) if cap > selection.len() => {
            return Err(AugmentError::CapTooLarge {
                cap,
                len: selection.len(),
            })
        }
        Some(cap) => cap,
        None => selection.len(),
    };
    let mut added = Vec::new();
    let mut skipped_atomic = Vec::new();
    for word in selection.words().take(take) {
        if base.encode(word).len() <= 1 {
            skipped_atomic.push(word.to_owned());
        } else {
            added.push(word.to_owned());
        }
    }
    Ok(Extension {
        tokenizer: base.with_added_tokens(added),
        skipped_atomic,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitEntry {
    pub new_id: TokenId,
    pub token: String,
    /// Baseline ids whose embedding rows are averaged into the new row.
    pub source_ids: Vec<TokenId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingInitPlan {
    pub entries: Vec<InitEntry>,
}

impl EmbeddingInitPlan {
    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self)
    }
}

pub fn embedding_init_plan(
    base: &Tokenizer,
    augmented: &Tokenizer,
) -> Result<EmbeddingInitPlan, AugmentError> {
    if base.vocab() != augmented.vocab() || base.merges() != augmented.merges() {
        return Err(AugmentError::NotDerived(
            "vocabulary or merges differ".into(),
        ));
    }
    let known = base.added_tokens();
    if !augmented.added_tokens().starts_with(known) {
        return Err(AugmentError::NotDerived(
            "baseline added tokens are not a prefix of the augmented ones".into(),
        ));
    }
    let mut entries = Vec::new();
    for token in &augmented.added_tokens()[known.len()..] {
        let source_ids = base.encode(token);
        if source_ids.is_empty() {
            return Err(AugmentError::EmptyEncoding(token.clone()));
        }
        entries.push(InitEntry {
            new_id: augmented
                .added_token_id(token)
                .expect("added token has an id"),
            token: token.clone(),
            source_ids,
        });
    }
    Ok(EmbeddingInitPlan { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSavings {
    pub index: usize,
    pub base_tokens: u64,
    pub augmented_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsStats {
    pub base_tokens: u64,
    pub augmented_tokens: u64,
    pub saved_tokens: i64,
    /// Percentage of baseline tokens saved, rounded to 4 decimals.
    pub saved_pct: f64,
    pub per_document: Vec<DocumentSavings>,
    pub added_token_hits: BTreeMap<String, u64>,
}

impl SavingsStats {
    pub fn to_json(&self) -> String {
        crate::report::to_sorted_json(self)
    }
}

pub fn savings_report(base: &Tokenizer, augmented: &Tokenizer, corpus: &Corpus) -> SavingsStats {
    let per_doc: Vec<(DocumentSavings, BTreeMap<String, u64>)> = corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(index, doc)| {
            let b = base.encode(doc);
            let a = augmented.encode(doc);
            let mut hits = BTreeMap::new();
            for &id in &a {
                if augmented.is_added(id) {
                    let t = augmented.token_text(id).expect("id is in range");
                    *hits.entry(t).or_default() += 1;
                }
            }
            (
                DocumentSavings {
                    index,
                    base_tokens: b.len() as u64,
                    augmented_tokens: a.len() as u64,
                },
                hits,
            )
        })
        .collect();

    let mut added_token_hits = BTreeMap::new();
    let mut per_document = Vec::with_capacity(per_doc.len());
    for (doc, hits) in per_doc {
        for (t, n) in hits {
            *added_token_hits.entry(t).or_default() += n;
        }
        per_document.push(doc);
    }
    let base_tokens: u64 = per_document.iter().map(|d| d.base_tokens).sum();
    let augmented_tokens: u64 = per_document.iter().map(|d| d.augmented_tokens).sum();
    let saved_tokens = base_tokens as i64 - augmented_tokens as i64;
    let saved_pct = if base_tokens == 0 {
        0.0
    } else {
        round_half_up(100.0 * saved_tokens as f64 / base_tokens as f64, 4)
    };
    SavingsStats {
        base_tokens,
        augmented_tokens,
        saved_tokens,
        saved_pct,
        per_document,
        added_token_hits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{golden_tokenizer, GOLDEN_ADDED, GOLDEN_SENTENCE};

    fn selection(words: &[&str]) -> Selection {
        let entries = words
            .iter()
            .enumerate()
            .map(|(i, w)| SelectionEntry {
                word: w.to_string(),
                score: -(i as f64),
            })
            .collect();
        Selection::new(SelectionKind::Threshold, 0.0, entries).unwrap()
    }

    #[test]
    fn golden_extension_shrinks_sentence() {
        let base = golden_tokenizer();
        let ext = extend_vocab(&base, &selection(&["OpenLane", "Introduce", "EDA"]), None).unwrap();
        assert!(ext.skipped_atomic.is_empty());
        assert_eq!(base.encode(GOLDEN_SENTENCE).len(), 13);
        assert_eq!(ext.tokenizer.encode(GOLDEN_SENTENCE).len(), 8);
        assert_eq!(ext.tokenizer.base_vocab_size(), base.base_vocab_size());
        assert_eq!(ext.tokenizer.merges(), base.merges());
    }

    #[test]
    fn atomic_words_are_skipped() {
        let base = golden_tokenizer();
        let ext = extend_vocab(&base, &selection(&["an"]), None).unwrap();
        assert_eq!(ext.skipped_atomic, ["an"]);
        assert_eq!(ext.tokenizer, base);

        let ext = extend_vocab(&base, &selection(&[]), None).unwrap();
        assert_eq!(ext.tokenizer, base);
    }

    #[test]
    fn cap_limits_and_validates() {
        let base = golden_tokenizer();
        let sel = selection(&GOLDEN_ADDED);
        let ext = extend_vocab(&base, &sel, Some(1)).unwrap();
        assert_eq!(ext.tokenizer.added_tokens(), ["Introduce"]);
        assert!(matches!(
            extend_vocab(&base, &sel, Some(4)),
            Err(AugmentError::CapTooLarge { cap: 4, len: 3 })
        ));
    }

    #[test]
    fn selection_rejects_duplicates_and_disorder() {
        let e = |w: &str, s: f64| SelectionEntry {
            word: w.into(),
            score: s,
        };
        assert!(Selection::new(
            SelectionKind::Heuristic,
            0.0,
            vec![e("a", 1.0), e("a", 0.5)]
        )
        .is_err());
        assert!(Selection::new(
            SelectionKind::Heuristic,
            0.0,
            vec![e("a", 0.5), e("b", 1.0)]
        )
        .is_err());
        let sel = Selection::new(
            SelectionKind::Heuristic,
            0.25,
            vec![e("a", 1.0), e("b", 0.5)],
        )
        .unwrap();
        assert_eq!(Selection::from_json(&sel.to_json()).unwrap(), sel);
    }

    #[test]
    fn init_plan_maps_to_baseline_pieces() {
        let base = golden_tokenizer();
        let aug = base.with_added_tokens(["OpenLane".to_string(), "an".to_string()]);
        let plan = embedding_init_plan(&base, &aug).unwrap();
        let pieces: Vec<_> = plan.entries[0]
            .source_ids
            .iter()
            .map(|&id| base.token_text(id).unwrap())
            .collect();
        assert_eq!(pieces, ["Open", "L", "ane"]);
        assert_eq!(plan.entries[0].new_id as usize, base.vocab_size());
        assert_eq!(
            plan.entries[1].source_ids,
            [base.vocab().id(b"an").unwrap()]
        );

        assert!(embedding_init_plan(&base, &base)
            .unwrap()
            .entries
            .is_empty());
        let other = Tokenizer::bytes_only();
        assert!(embedding_init_plan(&base, &other).is_err());
    }

    #[test]
    fn savings_on_golden_sentence() {
        let base = golden_tokenizer();
        let aug = base.with_added_tokens(GOLDEN_ADDED.map(String::from));
        let corpus = Corpus::from_documents([GOLDEN_SENTENCE]);
        let stats = savings_report(&base, &aug, &corpus);
        assert_eq!((stats.base_tokens, stats.augmented_tokens), (13, 8));
        assert_eq!(stats.saved_tokens, 5);
        assert_eq!(stats.saved_pct, 38.4615);
        assert_eq!(stats.added_token_hits["OpenLane"], 1);

        let plain = Corpus::from_documents(["an tool"]);
        assert_eq!(savings_report(&base, &aug, &plain).saved_pct, 0.0);
    }

    mod props {
        use super::super::*;
        use crate::fixtures::golden_tokenizer;
        use proptest::prelude::*;

        const WORDS: [&str; 8] = [
            "Introduce",
            "OpenLane",
            "EDA",
            "tool",
            "an",
            "Lane",
            "rodu",
            "ce",
        ];

        proptest! {
            #[test]
            fn savings_non_negative_and_monotone_in_cap(
                docs in prop::collection::vec(
                    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 0..12)
                        .prop_map(|w| w.join(" ")),
                    1..4),
            ) {
                let base = golden_tokenizer();
                let corpus = Corpus::from_documents(&docs);
                let entries = WORDS.iter().enumerate()
                    .map(|(i, w)| SelectionEntry { word: w.to_string(), score: 10.0 - i as f64 })
                    .collect();
                let sel = Selection::new(SelectionKind::Threshold, 0.0, entries).unwrap();
                let mut last = 0;
                for cap in 0..=WORDS.len() {
                    let ext = extend_vocab(&base, &sel, Some(cap)).unwrap();
                    let stats = savings_report(&base, &ext.tokenizer, &corpus);
                    for d in &stats.per_document {
                        prop_assert!(d.augmented_tokens <= d.base_tokens);
                    }
                    prop_assert!(stats.saved_tokens >= last);
                    last = stats.saved_tokens;
                }
            }

            #[test]
            fn extension_preserves_encoding_without_hits(text in "[a-z ,.]{0,40}") {
                let base = golden_tokenizer();
                let aug = base.with_added_tokens(["OpenLane".to_string(), "EDA".to_string()]);
                prop_assert_eq!(aug.encode(&text), base.encode(&text));
                prop_assert_eq!(aug.decode(&aug.encode(&text)).unwrap(), text);
            }
        }
    }
}
