//! Regenerates the bundled fixture files under `crates/core/fixtures`.
//!
//! Usage: cargo run -p domtok-core --example gen_fixtures [-- <dir>]

use std::fs;
use std::path::{Path, PathBuf};

use domtok::fixtures;
use domtok::tokenizer::train_bpe;
use domtok::Corpus;

fn write(path: &Path, contents: &str) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).expect("create fixture directory");
    }
    fs::write(path, contents).expect("write fixture file");
    println!("wrote {}", path.display());
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    let general = fixtures::general_corpus_documents();
    for (i, doc) in general.iter().enumerate() {
        write(&root.join(format!("general/general_{i:02}.txt")), doc);
    }
    for (i, doc) in fixtures::domain_corpus_documents().iter().enumerate() {
        write(&root.join(format!("domain/domain_{i:02}.txt")), doc);
    }
    write(
        &root.join("annotations.tsv"),
        &fixtures::annotations_tsv(&fixtures::fixture_annotations()),
    );
    write(
        &root.join("golden_tokenizer.json"),
        &fixtures::golden_tokenizer().to_json(),
    );
    let baseline = train_bpe(
        &Corpus::from_documents(general),
        fixtures::BASELINE_VOCAB_SIZE,
    )
    .expect("baseline vocabulary size is valid");
    write(&root.join("baseline_tokenizer.json"), &baseline.to_json());
}
