//! Byte-level BPE tokenizer with verbatim added tokens.
//!
//! Ids `0..256` are the single bytes, in byte order. Merge products follow.
//! Added tokens are appended after the trained vocabulary and matched before
//! BPE runs, but only on whole words.

mod io;
mod segment;
mod train;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use train::{train_bpe, train_bpe_from_counts};

use segment::{segment, Piece};

pub type TokenId = u32;

/// Minimum trainable vocabulary: the 256 bytes plus one merge.
pub const MIN_VOCAB_SIZE: usize = 257;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("target vocabulary size {0} is below the minimum of {MIN_VOCAB_SIZE}")]
    VocabTooSmall(usize),
    #[error("token id {id} is out of range (vocabulary size {vocab_size})")]
    UnknownId { id: TokenId, vocab_size: usize },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot access tokenizer file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed tokenizer JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
}

impl TokenizerError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Bijection between token byte strings and dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_of: Vec<Vec<u8>>,
    id_of: HashMap<Vec<u8>, TokenId>,
}

impl Vocab {
    /// The 256 single-byte tokens.
    pub fn bytes() -> Self {
        let token_of: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { token_of, id_of }
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id(&self, token: &[u8]) -> Option<TokenId> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&[u8]> {
        self.token_of.get(id as usize).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.token_of
    }

    /// Returns the id of `token`, inserting it if new.
    fn intern(&mut self, token: Vec<u8>) -> TokenId {
        if let Some(id) = self.id(&token) {
            return id;
        }
        let id = self.token_of.len() as TokenId;
        self.id_of.insert(token.clone(), id);
        self.token_of.push(token);
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeRule {
    pub left: TokenId,
    pub right: TokenId,
    pub merged: TokenId,
    pub rank: u32,
}

#[derive(Clone)]
pub struct Tokenizer {
    vocab: Vocab,
    merges: Vec<MergeRule>,
    merge_index: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    added_tokens: Vec<String>,
    added_index: HashMap<String, TokenId>,
    added_max_len: usize,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer")
            .field("vocab", &self.vocab.len())
            .field("merges", &self.merges.len())
            .field("added_tokens", &self.added_tokens.len())
            .finish()
    }
}

impl PartialEq for Tokenizer {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.merges == other.merges
            && self.added_tokens == other.added_tokens
    }
}

impl Tokenizer {
    /// A tokenizer with only the byte vocabulary.
    pub fn bytes_only() -> Self {
        Self::assemble(Vocab::bytes(), Vec::new(), Vec::new())
    }

    /// Builds a tokenizer from merges given as token byte strings.
    ///
    /// The vocabulary is the 256 bytes followed by each distinct merge
    /// product in rank order. Each merge operand must be a byte or the product
    /// of an earlier merge.
    pub fn from_merges<L, R>(
        merges: impl IntoIterator<Item = (L, R)>,
        added_tokens: Vec<String>,
    ) -> Result<Self, TokenizerError>
    where
        L: AsRef<[u8]>,
        R: AsRef<[u8]>,
    {
        let mut vocab = Vocab::bytes();
        let mut rules = Vec::new();
        for (rank, (left, right)) in merges.into_iter().enumerate() {
            let (left, right) = (left.as_ref(), right.as_ref());
            let lookup = |side: &str, token: &[u8]| {
                vocab.id(token).ok_or_else(|| {
                    TokenizerError::invalid(
                        format!("merges[{rank}]"),
                        format!(
                            "{side} operand {:?} is not produced by any earlier merge",
                            String::from_utf8_lossy(token)
                        ),
                    )
                })
            };
            let l = lookup("left", left)?;
            let r = lookup("right", right)?;
            let merged = vocab.intern([left, right].concat());
            rules.push(MergeRule {
                left: l,
                right: r,
                merged,
                rank: rank as u32,
            });
        }
        Self::from_vocab_and_merges(vocab, rules, added_tokens)
    }

    pub(crate) fn from_vocab_and_merges(
        vocab: Vocab,
        merges: Vec<MergeRule>,
        added_tokens: Vec<String>,
    ) -> Result<Self, TokenizerError> {
        let mut seen = HashMap::new();
        for (i, (a, b)) in merges.iter().map(|m| (m.left, m.right)).enumerate() {
            if let Some(prev) = seen.insert((a, b), i) {
                return Err(TokenizerError::invalid(
                    format!("merges[{i}]"),
                    format!("duplicate of merges[{prev}]"),
                ));
            }
        }
        let mut added_seen = HashMap::new();
        for (i, t) in added_tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TokenizerError::invalid(
                    format!("added_tokens[{i}]"),
                    "empty token",
                ));
            }
            if let Some(prev) = added_seen.insert(t.as_str(), i) {
                return Err(TokenizerError::invalid(
                    format!("added_tokens[{i}]"),
                    format!("duplicate of added_tokens[{prev}]"),
                ));
            }
        }
        Ok(Self::assemble(vocab, merges, added_tokens))
    }

    fn assemble(vocab: Vocab, merges: Vec<MergeRule>, added_tokens: Vec<String>) -> Self {
        let merge_index = merges
            .iter()
            .map(|m| ((m.left, m.right), (m.rank, m.merged)))
            .collect();
        let base = vocab.len() as TokenId;
        let added_index = added_tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), base + i as TokenId))
            .collect();
        let added_max_len = added_tokens.iter().map(String::len).max().unwrap_or(0);
        Self {
            vocab,
            merges,
            merge_index,
            added_tokens,
            added_index,
            added_max_len,
        }
    }

    /// Same vocabulary and merges with `added` appended to the added tokens.
    pub fn with_added_tokens(&self, added: impl IntoIterator<Item = String>) -> Self {
        let mut tokens = self.added_tokens.clone();
        for t in added {
            if !t.is_empty() && !self.added_index.contains_key(&t) && !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        Self::assemble(self.vocab.clone(), self.merges.clone(), tokens)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn added_tokens(&self) -> &[String] {
        &self.added_tokens
    }

    /// Size of the trained vocabulary, excluding added tokens.
    pub fn base_vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Total number of ids, including added tokens.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + self.added_tokens.len()
    }

    pub fn added_token_id(&self, token: &str) -> Option<TokenId> {
        self.added_index.get(token).copied()
    }

    pub fn is_added(&self, id: TokenId) -> bool {
        (id as usize) >= self.vocab.len() && (id as usize) < self.vocab_size()
    }

    pub fn token_bytes(&self, id: TokenId) -> Result<&[u8], TokenizerError> {
        let idx = id as usize;
        if let Some(t) = self.vocab.token(id) {
            Ok(t)
        } else if idx < self.vocab_size() {
            Ok(self.added_tokens[idx - self.vocab.len()].as_bytes())
        } else {
            Err(TokenizerError::UnknownId {
                id,
                vocab_size: self.vocab_size(),
            })
        }
    }

    /// Human-readable token text (lossy for partial UTF-8 sequences).
    pub fn token_text(&self, id: TokenId) -> Result<String, TokenizerError> {
        self.token_bytes(id)
            .map(|b| String::from_utf8_lossy(b).into_owned())
    }

    /// Applies BPE merges to one piece of raw bytes.
    pub fn bpe(&self, bytes: &[u8]) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = bytes.iter().map(|&b| b as TokenId).collect();
        loop {
            let best = ids
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.merge_index
                        .get(&(w[0], w[1]))
                        .map(|&(rank, merged)| (rank, i, merged))
                })
                .min();
            let Some((_, i, merged)) = best else { break };
            ids[i] = merged;
            ids.remove(i + 1);
        }
        ids
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let pieces = segment(text);
        let mut out = Vec::with_capacity(text.len() / 3);
        let mut i = 0;
        while i < pieces.len() {
            if !self.added_tokens.is_empty() {
                if let Some((last, ids)) = self.match_added(text, &pieces, i) {
                    out.extend(ids);
                    i = last + 1;
                    continue;
                }
            }
            out.extend(self.bpe(text[pieces[i].range.clone()].as_bytes()));
            i += 1;
        }
        out
    }

    /// Longest added token starting at the word of `pieces[i]` and ending at
    /// a word end. A match is only taken when it does not cost more tokens
    /// than the plain encoding of the pieces it replaces, which can happen
    /// when the plain path would fold a leading space into a single token.
    fn match_added(&self, text: &str, pieces: &[Piece], i: usize) -> Option<(usize, Vec<TokenId>)> {
        let word = pieces[i].word.as_ref()?;
        let limit = word.start + self.added_max_len;
        let mut candidates = Vec::new();
        for (j, p) in pieces.iter().enumerate().skip(i) {
            if p.range.start >= limit {
                break;
            }
            if let Some(w) = &p.word {
                if w.end > limit {
                    break;
                }
                if let Some(&id) = self.added_index.get(&text[word.start..w.end]) {
                    candidates.push((j, id));
                }
            }
        }
        let lead_space = pieces[i].range.start < word.start;
        let cost = 1 + usize::from(lead_space);
        for &(j, id) in candidates.iter().rev() {
            let plain: usize = pieces[i..=j]
                .iter()
                .map(|p| self.bpe(text[p.range.clone()].as_bytes()).len())
                .sum();
            if cost <= plain {
                let mut ids = Vec::with_capacity(cost);
                if lead_space {
                    ids.push(b' ' as TokenId);
                }
                ids.push(id);
                return Some((j, ids));
            }
        }
        None
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let mut bytes = Vec::with_capacity(ids.len() * 4);
        for &id in ids {
            bytes.extend_from_slice(self.token_bytes(id)?);
        }
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}
