//! The bundled fixture files must match what the generators produce.

use std::fs;
use std::path::{Path, PathBuf};

use domtok::fixtures;
use domtok::phi::load_annotations;
use domtok::tokenizer::Tokenizer;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

#[test]
fn corpus_files_match_generator() {
    for (i, doc) in fixtures::general_corpus_documents().iter().enumerate() {
        let on_disk = fs::read_to_string(fixture(&format!("general/general_{i:02}.txt"))).unwrap();
        assert!(
            on_disk == *doc,
            "general_{i:02}.txt is stale; rerun the gen_fixtures example"
        );
    }
    for (i, doc) in fixtures::domain_corpus_documents().iter().enumerate() {
        let on_disk = fs::read_to_string(fixture(&format!("domain/domain_{i:02}.txt"))).unwrap();
        assert!(
            on_disk == *doc,
            "domain_{i:02}.txt is stale; rerun the gen_fixtures example"
        );
    }
}

#[test]
fn annotation_file_matches_generator() {
    let on_disk = fs::read_to_string(fixture("annotations.tsv")).unwrap();
    assert_eq!(
        on_disk,
        fixtures::annotations_tsv(&fixtures::fixture_annotations())
    );
    assert_eq!(
        load_annotations(fixture("annotations.tsv")).unwrap(),
        fixtures::fixture_annotations()
    );
}

#[test]
fn golden_tokenizer_file_matches_fixture() {
    let loaded = Tokenizer::load(fixture("golden_tokenizer.json")).unwrap();
    assert_eq!(loaded, fixtures::golden_tokenizer());
}

#[test]
fn domain_corpus_is_about_a_megabyte() {
    let bytes: usize = fixtures::domain_corpus_documents()
        .iter()
        .map(String::len)
        .sum();
    assert!((900_000..1_200_000).contains(&bytes), "{bytes}");
}
