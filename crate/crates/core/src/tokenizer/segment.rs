//! Splits text into the pieces that BPE runs over.
//!
//! Every byte of the input lands in exactly one piece. Word cores (as produced
//! by `pre_tokenize`) are always their own piece, optionally carrying one
//! leading ASCII space; leading and trailing punctuation of a fragment form
//! separate pieces; other whitespace forms pieces of its own.

use std::ops::Range;

use crate::corpus::{fragments, split_fragment};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Piece {
    pub range: Range<usize>,
    /// Byte range of the word core when this piece holds one.
    pub word: Option<Range<usize>>,
}

impl Piece {
    fn plain(range: Range<usize>) -> Self {
        Self { range, word: None }
    }
}

pub(crate) fn segment(text: &str) -> Vec<Piece> {
    let bytes = text.as_bytes();
    let mut pieces = Vec::new();
    let mut cursor = 0;
    for frag in fragments(text) {
        // Whitespace run preceding the fragment; a final ' ' attaches forward.
        let mut start = frag.start;
        if cursor < frag.start {
            if bytes[frag.start - 1] == b' ' {
                if cursor < frag.start - 1 {
                    pieces.push(Piece::plain(cursor..frag.start - 1));
                }
                start = frag.start - 1;
            } else {
                pieces.push(Piece::plain(cursor..frag.start));
            }
        }

        let (lead, core) = split_fragment(&text[frag.clone()]);
        if core.is_empty() {
            pieces.push(Piece::plain(start..frag.end));
        } else {
            let core = frag.start + core.start..frag.start + core.end;
            if lead > 0 {
                pieces.push(Piece::plain(start..core.start));
                start = core.start;
            }
            pieces.push(Piece {
                range: start..core.end,
                word: Some(core.clone()),
            });
            if core.end < frag.end {
                pieces.push(Piece::plain(core.end..frag.end));
            }
        }
        cursor = frag.end;
    }
    if cursor < text.len() {
        pieces.push(Piece::plain(cursor..text.len()));
    }
    pieces
}
