//! JSON persistence.
//!
//! ```json
//! { "added_tokens": ["OpenLane"], "merges": ["O p", "Op en"], "vocab": ["\\x00", "..."] }
//! ```
//!
//! `vocab[i]` is the token with id `i`; `merges[r]` is the rule with rank `r`
//! written as `"left right"`. Bytes outside printable ASCII, the space and the
//! backslash are written as `\xHH`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MergeRule, Tokenizer, TokenizerError, Vocab};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenizerFile {
    added_tokens: Vec<String>,
    merges: Vec<String>,
    vocab: Vec<String>,
}

pub fn escape_token(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x21..=0x7e).contains(&b) && b != b'\\' {
            out.push(b as char);
        } else {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

pub fn unescape_token(s: &str) -> Result<Vec<u8>, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                let hex = s
                    .get(i + 1..i + 4)
                    .filter(|h| h.starts_with('x'))
                    .ok_or_else(|| format!("bad escape at byte {i}"))?;
                let b = u8::from_str_radix(&hex[1..], 16)
                    .map_err(|_| format!("bad hex escape {hex:?} at byte {i}"))?;
                out.push(b);
                i += 4;
            }
            b if (0x21..=0x7e).contains(&b) => {
                out.push(b);
                i += 1;
            }
            b => return Err(format!("unescaped byte 0x{b:02x} at byte {i}")),
        }
    }
    Ok(out)
}

impl Tokenizer {
    pub fn to_json(&self) -> String {
        let file = TokenizerFile {
            added_tokens: self
                .added_tokens
                .iter()
                .map(|t| escape_token(t.as_bytes()))
                .collect(),
            merges: self
                .merges
                .iter()
                .map(|m| {
                    format!(
                        "{} {}",
                        escape_token(&self.vocab.token_of[m.left as usize]),
                        escape_token(&self.vocab.token_of[m.right as usize])
                    )
                })
                .collect(),
            vocab: self
                .vocab
                .token_of
                .iter()
                .map(|t| escape_token(t))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("tokenizer serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self, TokenizerError> {
        let file: TokenizerFile = serde_json::from_str(json).map_err(|e| TokenizerError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;

        let mut token_of = Vec::with_capacity(file.vocab.len());
        for (i, s) in file.vocab.iter().enumerate() {
            let t =
                unescape_token(s).map_err(|m| TokenizerError::invalid(format!("vocab[{i}]"), m))?;
            if t.is_empty() {
                return Err(TokenizerError::invalid(
                    format!("vocab[{i}]"),
                    "empty token",
                ));
            }
            token_of.push(t);
        }
        if token_of.len() < 256 {
            return Err(TokenizerError::invalid(
                "vocab",
                format!(
                    "{} entries; the 256 byte tokens are required",
                    token_of.len()
                ),
            ));
        }
        for (b, t) in token_of.iter().take(256).enumerate() {
            if t.as_slice() != [b as u8] {
                return Err(TokenizerError::invalid(
                    format!("vocab[{b}]"),
                    format!("expected byte token \\x{b:02x}"),
                ));
            }
        }
        let mut vocab = Vocab {
            token_of: Vec::new(),
            id_of: Default::default(),
        };
        for (i, t) in token_of.into_iter().enumerate() {
            if let Some(prev) = vocab.id(&t) {
                return Err(TokenizerError::invalid(
                    format!("vocab[{i}]"),
                    format!("duplicate of vocab[{prev}] ({:?})", escape_token(&t)),
                ));
            }
            vocab.intern(t);
        }

        // Ranks are array positions; an operand must exist before its rank.
        let mut available = vec![false; vocab.len()];
        available[..256].iter_mut().for_each(|a| *a = true);
        let mut merges = Vec::with_capacity(file.merges.len());
        for (rank, s) in file.merges.iter().enumerate() {
            let field = format!("merges[{rank}]");
            let (l, r) = s
                .split_once(' ')
                .filter(|(_, r)| !r.contains(' '))
                .ok_or_else(|| TokenizerError::invalid(&field, "expected \"left right\""))?;
            let resolve = |part: &str| -> Result<u32, TokenizerError> {
                let bytes = unescape_token(part).map_err(|m| TokenizerError::invalid(&field, m))?;
                vocab.id(&bytes).ok_or_else(|| {
                    TokenizerError::invalid(&field, format!("token {part:?} not in vocab"))
                })
            };
            let (left, right) = (resolve(l)?, resolve(r)?);
            for side in [left, right] {
                if !available[side as usize] {
                    return Err(TokenizerError::invalid(
                        &field,
                        format!(
                            "operand {:?} is only produced by a later rank",
                            escape_token(&vocab.token_of[side as usize])
                        ),
                    ));
                }
            }
            let product = [
                vocab.token_of[left as usize].as_slice(),
                vocab.token_of[right as usize].as_slice(),
            ]
            .concat();
            let merged = vocab.id(&product).ok_or_else(|| {
                TokenizerError::invalid(
                    &field,
                    format!("product {:?} not in vocab", escape_token(&product)),
                )
            })?;
            available[merged as usize] = true;
            merges.push(MergeRule {
                left,
                right,
                merged,
                rank: rank as u32,
            });
        }
        if let Some(i) = available.iter().position(|a| !a) {
            return Err(TokenizerError::invalid(
                format!("vocab[{i}]"),
                "token is neither a byte nor a merge product",
            ));
        }

        let mut added = Vec::with_capacity(file.added_tokens.len());
        for (i, s) in file.added_tokens.iter().enumerate() {
            let field = format!("added_tokens[{i}]");
            let bytes = unescape_token(s).map_err(|m| TokenizerError::invalid(&field, m))?;
            let token = String::from_utf8(bytes)
                .map_err(|_| TokenizerError::invalid(&field, "not valid UTF-8"))?;
            added.push(token);
        }
        Tokenizer::from_vocab_and_merges(vocab, merges, added)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| TokenizerError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&json)
    }
}
