use std::collections::HashMap;

use super::{MergeRule, TokenId, Tokenizer, TokenizerError, Vocab, MIN_VOCAB_SIZE};
use crate::corpus::{word_counts, Corpus, WordCounts};

/// Trains byte-level BPE over the words of `corpus`.
pub fn train_bpe(corpus: &Corpus, target_vocab_size: usize) -> Result<Tokenizer, TokenizerError> {
    train_bpe_from_counts(&word_counts(corpus), target_vocab_size)
}

/// Trains byte-level BPE from word frequencies.
///
/// Each step merges the most frequent adjacent pair; ties go to the pair
/// whose (left, right) byte strings sort first. Training stops at the target
/// size or when no pair is left.
pub fn train_bpe_from_counts(
    counts: &WordCounts,
    target_vocab_size: usize,
) -> Result<Tokenizer, TokenizerError> {
    if target_vocab_size < MIN_VOCAB_SIZE {
        return Err(TokenizerError::VocabTooSmall(target_vocab_size));
    }
    let mut words: Vec<(Vec<TokenId>, u64)> = counts
        .iter()
        .map(|(w, c)| (w.bytes().map(TokenId::from).collect::<Vec<TokenId>>(), c))
        .filter(|(ids, _)| ids.len() > 1)
        .collect();

    let mut vocab = Vocab::bytes();
    let mut merges = Vec::new();
    while vocab.len() < target_vocab_size {
        let mut pair_counts: HashMap<(TokenId, TokenId), u64> = HashMap::new();
        for (ids, count) in &words {
            for w in ids.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_default() += count;
            }
        }
        let best = pair_counts.into_iter().max_by(|(a, ca), (b, cb)| {
            ca.cmp(cb).then_with(|| {
                // Reverse so that the lexicographically smaller pair is "greater".
                let ka = (vocab.token(a.0), vocab.token(a.1));
                let kb = (vocab.token(b.0), vocab.token(b.1));
                kb.cmp(&ka)
            })
        });
        let Some(((left, right), _)) = best else {
            break;
        };

        let product = [
            vocab.token(left).unwrap_or_default(),
            vocab.token(right).unwrap_or_default(),
        ]
        .concat();
        let merged = vocab.intern(product);
        merges.push(MergeRule {
            left,
            right,
            merged,
            rank: merges.len() as u32,
        });
        for (ids, _) in &mut words {
            apply_merge(ids, left, right, merged);
        }
        words.retain(|(ids, _)| ids.len() > 1);
    }
    Tokenizer::from_vocab_and_merges(vocab, merges, Vec::new())
}

/// Replaces non-overlapping occurrences of (left, right), scanning left to right.
fn apply_merge(ids: &mut Vec<TokenId>, left: TokenId, right: TokenId, merged: TokenId) {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && ids[i] == left && ids[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    *ids = out;
}
