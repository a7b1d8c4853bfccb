//! Runs the `domtok` binary against the bundled fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use domtok::augment::{Selection, SelectionEntry, SelectionKind};
use domtok::fixtures::{GOLDEN_ADDED, GOLDEN_SENTENCE};
use domtok::gain::GainTable;
use domtok::phi::PhiModel;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(rel)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domtok"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DOMTOK_OUT")
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exited normally")
}

#[track_caller]
fn ok(out: &Path, args: &[&str]) -> Output {
    let output = run(out, args);
    assert_eq!(
        code(&output),
        0,
        "{args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn analyze_fixture(out: &Path) {
    let tok = fixture("baseline_tokenizer.json");
    let corpus = fixture("domain");
    ok(
        out,
        &[
            "analyze",
            "--corpus",
            path_str(&corpus),
            "--tokenizer",
            path_str(&tok),
        ],
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_produces_report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let corpus = fixture("domain");
    let corpus = path_str(&corpus);
    let annotations = fixture("annotations.tsv");

    analyze_fixture(out);
    let table = GainTable::load_tsv(out.join("gain_table.tsv"), 8).unwrap();
    let top = &table.records()[0];
    assert!(top.gain >= table.records()[1].gain);
    assert!(
        top.word.contains('_') || top.word.contains('.'),
        "{}",
        top.word
    );

    ok(out, &["train-phi", "--annotations", path_str(&annotations)]);
    ok(out, &["select", "--epsilon", "0"]);
    ok(
        out,
        &["select", "--mode", "heuristic", "--percentile", "90"],
    );
    ok(out, &["augment", "--corpus", corpus, "--cap", "200"]);
    ok(
        out,
        &[
            "lm",
            "--corpus",
            corpus,
            "--lm-documents",
            "1",
            "--lm-epochs",
            "1",
        ],
    );
    ok(out, &["report"]);

    let mut names: Vec<String> = fs::read_dir(out.join("report"))
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| e.file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7, "{names:?}");
    let cmp = json(&out.join("comparison.json"));
    assert!(cmp["tokens_delta_pct"].as_f64().unwrap() < 0.0);
    let savings = json(&out.join("savings.json"));
    assert!(savings["saved_pct"].as_f64().unwrap() >= 10.0);

    let demo = ok(
        out,
        &["demo", "--text", "Set SYNTH_STRATEGY before routing"],
    );
    assert!(String::from_utf8_lossy(&demo.stdout).contains("reduction"));
    for name in [
        "analyze",
        "train-phi",
        "select-threshold",
        "select-heuristic",
        "augment",
        "lm",
        "report",
        "demo",
    ] {
        let config = json(&out.join(format!("{name}.config.json")));
        assert!(config["seed"].is_u64(), "{name}");
    }
}

#[test]
fn input_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let tok = fixture("baseline_tokenizer.json");
    let tok = path_str(&tok);

    let missing = run(
        out,
        &[
            "analyze",
            "--corpus",
            "/no/such/file.txt",
            "--tokenizer",
            tok,
        ],
    );
    assert_eq!(code(&missing), 2);

    let corpus = fixture("domain/domain_00.txt");
    let zero_alpha = run(
        out,
        &[
            "analyze",
            "--corpus",
            path_str(&corpus),
            "--tokenizer",
            tok,
            "--alpha",
            "0",
        ],
    );
    assert_eq!(code(&zero_alpha), 2);

    let neither = run(out, &["analyze", "--corpus", path_str(&corpus)]);
    assert_eq!(code(&neither), 2);
    let both = run(
        out,
        &[
            "analyze",
            "--corpus",
            path_str(&corpus),
            "--tokenizer",
            tok,
            "--train-vocab",
            "300",
        ],
    );
    assert_eq!(code(&both), 2);

    let no_table = run(out, &["select"]);
    assert_eq!(code(&no_table), 2);
}

#[test]
fn heuristic_select_without_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    analyze_fixture(dir.path());
    let output = run(
        dir.path(),
        &["select", "--mode", "heuristic", "--percentile", "90"],
    );
    assert_eq!(code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("train-phi"));
}

#[test]
fn zero_threshold_selects_every_multi_token_word() {
    let dir = tempfile::tempdir().unwrap();
    analyze_fixture(dir.path());
    ok(dir.path(), &["select", "--epsilon", "0"]);
    let table = GainTable::load_tsv(dir.path().join("gain_table.tsv"), 8).unwrap();
    let sel = Selection::load(dir.path().join("selection_threshold.json")).unwrap();
    let multi = table.records().iter().filter(|r| r.subtokens > 1).count();
    assert_eq!(sel.len(), multi);
}

#[test]
fn empty_corpus_gives_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "  \n").unwrap();
    let out = dir.path().join("out");
    let tok = fixture("golden_tokenizer.json");
    ok(
        &out,
        &[
            "analyze",
            "--corpus",
            path_str(&empty),
            "--tokenizer",
            path_str(&tok),
        ],
    );
    ok(&out, &["select", "--epsilon", "0"]);
    assert!(Selection::load(out.join("selection_threshold.json"))
        .unwrap()
        .is_empty());
}

#[test]
fn train_phi_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    analyze_fixture(out);
    let annotations = fixture("annotations.tsv");

    ok(out, &["train-phi", "--annotations", path_str(&annotations)]);
    let model = PhiModel::load(out.join("phi_model.json")).unwrap();
    assert!(model.final_loss.unwrap() < 0.05);

    ok(
        out,
        &[
            "train-phi",
            "--annotations",
            path_str(&annotations),
            "--phi-epochs",
            "0",
            "--seed",
            "5",
        ],
    );
    let init = PhiModel::load(out.join("phi_model.json")).unwrap();
    assert_eq!(init.params(), PhiModel::random(16, 1e-4, 5).params());

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "SYNTH_STRATEGY\t7\n").unwrap();
    assert_eq!(
        code(&run(out, &["train-phi", "--annotations", path_str(&bad)])),
        2
    );
}

fn golden_setup(dir: &Path, words: &[&str]) -> (PathBuf, PathBuf) {
    let corpus = dir.join("sentence.txt");
    fs::write(&corpus, GOLDEN_SENTENCE).unwrap();
    let entries = words
        .iter()
        .enumerate()
        .map(|(i, w)| SelectionEntry {
            word: w.to_string(),
            score: 10.0 - i as f64,
        })
        .collect();
    let sel = dir.join("sel.json");
    fs::write(
        &sel,
        Selection::new(SelectionKind::Threshold, 0.0, entries)
            .unwrap()
            .to_json(),
    )
    .unwrap();
    (corpus, sel)
}

#[test]
fn augment_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let tok = fixture("golden_tokenizer.json");
    let (corpus, sel) = golden_setup(dir.path(), &GOLDEN_ADDED);
    let args = [
        "augment",
        "--corpus",
        path_str(&corpus),
        "--tokenizer",
        path_str(&tok),
        "--selection",
        path_str(&sel),
    ];

    ok(&out, &args);
    let savings = json(&out.join("savings.json"));
    assert_eq!(savings["saved_pct"].as_f64().unwrap(), 38.4615);
    assert_eq!(savings["augmented_tokens"].as_u64().unwrap(), 8);

    let mut too_big = args.to_vec();
    too_big.extend(["--cap", "4"]);
    assert_eq!(code(&run(&out, &too_big)), 2);

    let (_, empty) = golden_setup(dir.path(), &[]);
    let mut no_op = args.to_vec();
    no_op[6] = path_str(&empty);
    ok(&out, &no_op);
    let savings = json(&out.join("savings.json"));
    assert_eq!(savings["saved_tokens"].as_i64().unwrap(), 0);
}

#[test]
fn lm_is_reproducible_and_rejects_tiny_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let tok = fixture("baseline_tokenizer.json");
    let corpus = fixture("domain/domain_00.txt");
    let (tok, corpus) = (path_str(&tok), path_str(&corpus));
    ok(&out, &["analyze", "--corpus", corpus, "--tokenizer", tok]);
    ok(&out, &["select", "--epsilon", "0"]);
    ok(&out, &["augment", "--corpus", corpus, "--cap", "50"]);

    let lm = [
        "lm",
        "--corpus",
        corpus,
        "--lm-epochs",
        "1",
        "--lm-dim",
        "4",
        "--seed",
        "9",
    ];
    ok(&out, &lm);
    let first = json(&out.join("train_augmented.json"));
    ok(&out, &lm);
    let second = json(&out.join("train_augmented.json"));
    assert_eq!(first["losses"], second["losses"]);
    assert!(
        json(&out.join("comparison.json"))["tokens_delta_pct"]
            .as_f64()
            .unwrap()
            < 0.0
    );

    let tiny = dir.path().join("tiny.txt");
    fs::write(&tiny, "EDA").unwrap();
    assert_eq!(code(&run(&out, &["lm", "--corpus", path_str(&tiny)])), 2);
}

#[test]
fn persisted_config_replays_a_stage() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    analyze_fixture(&first);
    let second = dir.path().join("b");
    let config = first.join("analyze.config.json");
    ok(&second, &["analyze", "--config", path_str(&config)]);
    assert_eq!(
        fs::read(first.join("gain_table.tsv")).unwrap(),
        fs::read(second.join("gain_table.tsv")).unwrap()
    );
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("domain/domain_00.txt");
    let tok = fixture("golden_tokenizer.json");
    let status = Command::new(env!("CARGO_BIN_EXE_domtok"))
        .args([
            "analyze",
            "--corpus",
            path_str(&corpus),
            "--tokenizer",
            path_str(&tok),
        ])
        .env("DOMTOK_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&status), 0);
    assert!(dir.path().join("gain_table.tsv").exists());
}

#[test]
fn report_without_lm_stage_succeeds_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let corpus = fixture("domain/domain_00.txt");
    analyze_fixture(out);
    ok(out, &["select", "--epsilon", "0"]);
    ok(
        out,
        &["augment", "--corpus", path_str(&corpus), "--cap", "20"],
    );
    let output = ok(out, &["report"]);
    assert!(String::from_utf8_lossy(&output.stderr).contains("omitted"));
    assert!(!out.join("report/train_reports.json").exists());
    let first = fs::read(out.join("report/summary.txt")).unwrap();
    ok(out, &["report"]);
    assert_eq!(fs::read(out.join("report/summary.txt")).unwrap(), first);
}
