//! Corpus ingestion, word splitting and frequency counting.
//!
//! Words are whitespace-separated fragments with leading and trailing
//! non-alphanumeric characters stripped. Anything internal to a fragment is
//! kept, so identifiers such as `sky130A_sky130_fd_sc_hd_config` or
//! `run.tcl` stay whole.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus file {path} is not valid UTF-8 (first invalid byte at offset {offset})")]
    InvalidUtf8 { path: PathBuf, offset: usize },
}

/// A set of normalized documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<String>,
    total_words: usize,
    total_chars: usize,
}

impl Corpus {
    /// Builds a corpus from raw strings, applying NFC and LF line endings.
    pub fn from_documents<I, S>(documents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let documents: Vec<String> = documents
            .into_iter()
            .map(|d| normalize(d.as_ref()))
            .collect();
        let total_words = documents.iter().map(|d| word_spans(d).count()).sum();
        let total_chars = documents.iter().map(|d| d.chars().count()).sum();
        Self {
            documents,
            total_words,
            total_chars,
        }
    }

    pub fn documents(&self) -> &[String] {
        &self.documents
    }

    pub fn total_words(&self) -> usize {
        self.total_words
    }

    pub fn total_chars(&self) -> usize {
        self.total_chars
    }

    pub fn is_empty(&self) -> bool {
        self.documents.iter().all(|d| d.is_empty())
    }

    /// The first `n` documents as a new corpus.
    pub fn head(&self, n: usize) -> Self {
        Self::from_documents(self.documents.iter().take(n))
    }

    /// Appends the documents of `other`.
    pub fn concat(mut self, other: Corpus) -> Self {
        self.total_words += other.total_words;
        self.total_chars += other.total_chars;
        self.documents.extend(other.documents);
        self
    }
}

/// NFC normalization plus CRLF / CR to LF.
pub fn normalize(text: &str) -> String {
    let unified = if text.contains('\r') {
        text.replace("\r\n", "\n").replace('\r', "\n")
    } else {
        text.to_owned()
    };
    unified.nfc().collect()
}

/// Reads each path as one document.
pub fn load_corpus<P: AsRef<Path>>(paths: &[P]) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        let text = String::from_utf8(bytes).map_err(|e| CorpusError::InvalidUtf8 {
            path: path.to_owned(),
            offset: e.utf8_error().valid_up_to(),
        })?;
        documents.push(text);
    }
    Ok(Corpus::from_documents(documents))
}

/// Splits a whitespace-free fragment into (leading punctuation, core, trailing
/// punctuation) byte lengths. The core is empty when the fragment holds no
/// alphanumeric character.
pub(crate) fn split_fragment(fragment: &str) -> (usize, Range<usize>) {
    let start = fragment
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i);
    match start {
        None => (fragment.len(), fragment.len()..fragment.len()),
        Some(start) => {
            let end = fragment
                .char_indices()
                .rev()
                .find(|(_, c)| c.is_alphanumeric())
                .map(|(i, c)| i + c.len_utf8())
                .unwrap_or(start);
            (start, start..end)
        }
    }
}

/// Byte ranges of the words of `text`, in order.
pub fn word_spans(text: &str) -> impl Iterator<Item = Range<usize>> + '_ {
    fragments(text).filter_map(move |frag| {
        let (_, core) = split_fragment(&text[frag.clone()]);
        (!core.is_empty()).then(|| frag.start + core.start..frag.start + core.end)
    })
}

/// Maximal runs of non-whitespace characters.
pub(crate) fn fragments(text: &str) -> impl Iterator<Item = Range<usize>> + '_ {
    let mut pos = 0;
    std::iter::from_fn(move || {
        let rest = &text[pos..];
        let lead = rest
            .char_indices()
            .find(|(_, c)| !c.is_whitespace())
            .map(|(i, _)| i)?;
        let start = pos + lead;
        let len = text[start..]
            .char_indices()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, _)| i)
            .unwrap_or(text.len() - start);
        pos = start + len;
        Some(start..start + len)
    })
}

/// Splits text into candidate words.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    word_spans(text).map(|r| &text[r]).collect()
}

/// Word frequencies, kept in a sorted map so iteration order is stable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCounts {
    entries: BTreeMap<String, u64>,
}

impl WordCounts {
    pub fn from_text(text: &str) -> Self {
        let mut counts = Self::default();
        for word in pre_tokenize(text) {
            counts.add(word, 1);
        }
        counts
    }

    pub fn add(&mut self, word: &str, count: u64) {
        if count == 0 || word.is_empty() {
            return;
        }
        *self.entries.entry(word.to_owned()).or_default() += count;
    }

    /// Associative, commutative merge of partial counts.
    pub fn merge(mut self, other: WordCounts) -> Self {
        let (mut big, small) = if self.entries.len() >= other.entries.len() {
            (std::mem::take(&mut self.entries), other.entries)
        } else {
            (other.entries, std::mem::take(&mut self.entries))
        };
        for (word, count) in small {
            *big.entry(word).or_default() += count;
        }
        Self { entries: big }
    }

    pub fn get(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, c)| (w.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }
}

pub fn word_counts(corpus: &Corpus) -> WordCounts {
    corpus
        .documents()
        .par_iter()
        .map(|doc| WordCounts::from_text(doc))
        .reduce(WordCounts::default, WordCounts::merge)
}
