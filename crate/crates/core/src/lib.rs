//! Domain tokenizer adaptation: rank corpus words by how many subtokens they
//! cost, optionally re-rank with a learned scorer, extend a byte-level BPE
//! vocabulary with the winners, and measure the savings.

pub mod augment;
pub mod corpus;
pub mod fixtures;
pub mod gain;
pub mod lm;
pub mod phi;
pub mod report;
pub mod tokenizer;

pub use augment::{extend_vocab, savings_report, Selection, SelectionKind};
pub use corpus::{load_corpus, Corpus, WordCounts};
pub use gain::{build_gain_table, select_threshold, GainTable};
pub use tokenizer::{TokenId, Tokenizer};
