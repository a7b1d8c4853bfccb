//! Bundled fixtures: a hand-built tokenizer reproducing the "OpenLane"
//! example splits, and seeded generators for the synthetic corpora and the
//! annotation set shipped under `fixtures/`.

use std::collections::BTreeSet;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::phi::{word_shape, AnnotatedWord};
use crate::tokenizer::Tokenizer;

pub const GOLDEN_SENTENCE: &str = "Introduce OpenLane, an EDA tool";
pub const GOLDEN_ADDED: [&str; 3] = ["Introduce", "OpenLane", "EDA"];

const GOLDEN_MERGES: [(&str, &str); 17] = [
    ("I", "n"),
    ("In", "t"),
    ("r", "o"),
    ("ro", "d"),
    ("rod", "u"),
    ("c", "e"),
    ("O", "p"),
    ("Op", "e"),
    ("Ope", "n"),
    ("a", "n"),
    ("an", "e"),
    ("D", "A"),
    (" ", "an"),
    ("t", "o"),
    ("to", "o"),
    ("too", "l"),
    (" ", "tool"),
];

/// A general-purpose stand-in that splits the example sentence into 13
/// tokens: `Int rodu ce ␠ Open L ane , ␠an ␠ E DA ␠tool`.
pub fn golden_tokenizer() -> Tokenizer {
    Tokenizer::from_merges(GOLDEN_MERGES, Vec::new()).expect("fixture merges are well-formed")
}

pub const GENERAL_SEED: u64 = 0x6e6e_7261_6c00;
pub const DOMAIN_SEED: u64 = 0xd0a1;
pub const GENERAL_DOCUMENTS: usize = 4;
pub const DOMAIN_DOCUMENTS: usize = 16;
pub const BASELINE_VOCAB_SIZE: usize = 1024;

const GENERAL_WORDS: &[&str] = &[
    "the",
    "of",
    "and",
    "to",
    "a",
    "in",
    "is",
    "that",
    "for",
    "it",
    "as",
    "with",
    "was",
    "on",
    "be",
    "by",
    "this",
    "are",
    "or",
    "from",
    "at",
    "which",
    "an",
    "have",
    "not",
    "can",
    "all",
    "has",
    "but",
    "will",
    "one",
    "more",
    "when",
    "they",
    "their",
    "there",
    "we",
    "you",
    "use",
    "used",
    "each",
    "other",
    "some",
    "into",
    "only",
    "then",
    "time",
    "new",
    "also",
    "should",
    "first",
    "these",
    "may",
    "any",
    "two",
    "out",
    "than",
    "its",
    "after",
    "over",
    "must",
    "file",
    "files",
    "design",
    "designs",
    "value",
    "values",
    "step",
    "steps",
    "run",
    "runs",
    "output",
    "input",
    "default",
    "set",
    "sets",
    "tool",
    "tools",
    "open",
    "source",
    "flow",
    "final",
    "report",
    "reports",
    "result",
    "results",
    "check",
    "checks",
    "power",
    "area",
    "size",
    "layer",
    "layers",
    "user",
    "users",
    "number",
    "option",
    "options",
    "list",
    "path",
    "paths",
    "variable",
    "variables",
    "script",
    "scripts",
    "command",
    "commands",
    "stage",
    "stages",
    "process",
    "example",
    "data",
    "model",
    "models",
    "system",
    "support",
    "version",
    "level",
    "mode",
    "name",
    "names",
    "type",
    "types",
    "line",
    "lines",
    "point",
    "points",
    "order",
    "group",
    "work",
    "make",
    "made",
    "need",
    "needs",
    "based",
    "following",
    "current",
    "order",
    "during",
    "before",
    "between",
    "within",
    "without",
    "where",
    "while",
    "because",
    "however",
    "using",
    "provides",
    "provided",
    "generate",
    "generated",
    "generates",
    "create",
    "created",
    "contains",
    "include",
    "includes",
    "information",
    "configuration",
    "directory",
    "location",
    "specified",
    "specify",
    "available",
    "required",
    "possible",
    "different",
    "specific",
    "several",
    "many",
    "most",
    "such",
    "same",
    "given",
    "small",
    "large",
    "high",
    "low",
    "top",
    "bottom",
    "left",
    "right",
    "inside",
    "outside",
    "across",
    "along",
    "through",
    "under",
    "above",
    "below",
    "these",
    "those",
    "would",
    "could",
    "might",
    "how",
    "what",
    "why",
    "who",
    "if",
    "so",
    "do",
    "does",
    "done",
    "see",
    "show",
    "shows",
    "note",
    "read",
    "write",
    "written",
    "start",
    "end",
    "begin",
    "change",
    "changes",
    "update",
    "updated",
    "keep",
    "allow",
    "allows",
    "enable",
    "disable",
    "enabled",
    "disabled",
    "instead",
    "again",
    "further",
    "section",
    "chapter",
    "page",
    "guide",
    "document",
    "documentation",
    "step",
    "build",
    "built",
    "install",
    "installed",
    "machine",
    "memory",
    "speed",
    "fast",
    "slow",
    "quality",
    "target",
    "targets",
    "metal",
    "wire",
    "wires",
    "signal",
    "signals",
    "logic",
    "gate",
    "gates",
    "cell",
    "cells",
    "block",
    "blocks",
    "route",
    "routes",
    "place",
    "placed",
    "clock",
    "delay",
    "delays",
    "path",
    "net",
    "nets",
    "pin",
    "pins",
    "grid",
    "core",
    "die",
    "chip",
    "final",
    "stage",
    "total",
    "minimum",
    "maximum",
    "percent",
    "rate",
    "ratio",
    "better",
    "good",
    "best",
    "well",
    "very",
    "much",
    "often",
    "always",
    "never",
    "usually",
];

const DOMAIN_TERMS: &[&str] = &[
    "OpenLane",
    "OpenROAD",
    "Yosys",
    "Magic",
    "Netgen",
    "KLayout",
    "TritonRoute",
    "TritonCTS",
    "RePlAce",
    "OpenDP",
    "FastRoute",
    "OpenSTA",
    "OpenPhySyn",
    "CVC",
    "ioPlacer",
    "pdngen",
    "tapcell",
    "ABC",
    "Fault",
    "CU-GR",
    "OpenRAM",
    "Caravel",
    "SkyWater",
    "Efabless",
    "GDSII",
    "RTL",
    "netlist",
    "netlists",
    "floorplan",
    "floorplanning",
    "synthesis",
    "placement",
    "routing",
    "antenna",
    "parasitics",
    "DRC",
    "LVS",
    "STA",
    "CTS",
    "SPEF",
    "SDC",
    "LEF",
    "DEF",
    "Liberty",
    "Verilog",
    "SystemVerilog",
    "testbench",
    "macro",
    "macros",
    "standard-cell",
    "powerplan",
    "decap",
    "filler",
    "welltap",
    "endcap",
    "hold",
    "setup",
    "slack",
    "skew",
    "utilization",
    "congestion",
    "legalization",
    "resizer",
    "buffering",
    "tiehi",
    "tielo",
    "multi-corner",
    "sign-off",
    "tapeout",
    "chiplet",
    "wafer",
    "lithography",
    "photomask",
    "interposer",
    "bumps",
    "padframe",
    "IO-ring",
    "PDK",
    "gf180mcu",
    "sky130",
    "OpenPDK",
    "Docker",
    "Makefile",
    "Tcl",
    "JSON",
    "regression",
    "flattening",
    "hierarchy",
    "HDL",
    "RTL-to-GDSII",
    "timing-driven",
    "wirelength",
    "via",
    "vias",
    "halo",
    "blockage",
    "blockages",
    "keepout",
    "pinout",
    "harden",
    "hardening",
    "microarchitecture",
    "SoC",
    "ASIC",
    "FPGA",
    "MPW",
    "Chipignite",
    "Sky130A",
    "OpenFASoC",
    "DFT",
    "ATPG",
    "scan-chain",
    "equivalence",
    "Netgen-LVS",
    "KLayout-DRC",
    "Magic-DRC",
];

const CONFIG_VARS: &[&str] = &[
    "FP_CORE_UTIL",
    "PL_TARGET_DENSITY",
    "GLB_RT_ADJUSTMENT",
    "SYNTH_STRATEGY",
    "CLOCK_PERIOD",
    "CLOCK_PORT",
    "CLOCK_NET",
    "ROUTING_CORES",
    "DIE_AREA",
    "FP_SIZING",
    "FP_PDN_VPITCH",
    "FP_PDN_HPITCH",
    "PL_BASIC_PLACEMENT",
    "PL_RESIZER_DESIGN_OPTIMIZATIONS",
    "GLB_RESIZER_TIMING_OPTIMIZATIONS",
    "SYNTH_MAX_FANOUT",
    "SYNTH_BUFFERING",
    "CTS_TARGET_SKEW",
    "CTS_TOLERANCE",
    "DIODE_INSERTION_STRATEGY",
    "RUN_KLAYOUT_XOR",
    "RUN_CVC",
    "VERILOG_FILES",
    "DESIGN_NAME",
    "BASE_SDC_FILE",
    "FP_PIN_ORDER_CFG",
    "MACRO_PLACEMENT_CFG",
    "EXTRA_LEFS",
    "EXTRA_GDS_FILES",
    "QUIT_ON_TIMING_VIOLATIONS",
];

const PDKS: &[&str] = &["sky130", "sky130A", "sky130B", "gf180mcu"];
const LIBS: &[&str] = &["fd_sc_hd", "fd_sc_hs", "fd_sc_ms", "fd_sc_ls", "fd_sc_hvl"];
const CELLS: &[&str] = &[
    "inv",
    "nand2",
    "nor2",
    "buf",
    "dfxtp",
    "mux2",
    "xor2",
    "and3",
    "clkbuf",
    "decap",
    "fill",
    "diode",
    "conb",
    "ebufn",
    "dlygate4sd3",
    "a21oi",
    "o211ai",
    "sdfxtp",
];
const DRIVES: &[u32] = &[1, 2, 4, 8, 12, 16];
const FILE_STEMS: &[&str] = &[
    "config",
    "pin_order",
    "macro_placement",
    "base",
    "interactive",
    "flow",
    "pdn_cfg",
    "synth_top",
    "signoff",
    "user_project_wrapper",
];
const FILE_EXTS: &[&str] = &["tcl", "json", "cfg", "sdc", "lef", "def", "v"];

/// The identifier pool of the synthetic domain corpus.
pub fn domain_identifiers() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(DOMAIN_SEED ^ 0x1d);
    let mut seen = BTreeSet::new();
    let mut pool = vec!["sky130A_sky130_fd_sc_hd_config".to_string()];
    seen.insert(pool[0].clone());
    let mut push = |s: String, pool: &mut Vec<String>| {
        if seen.insert(s.clone()) {
            pool.push(s);
        }
    };
    for v in CONFIG_VARS {
        push(v.to_string(), &mut pool);
    }
    while pool.len() < 120 {
        let s = format!(
            "{}_{}__{}_{}",
            PDKS.choose(&mut rng).unwrap(),
            LIBS.choose(&mut rng).unwrap(),
            CELLS.choose(&mut rng).unwrap(),
            DRIVES.choose(&mut rng).unwrap()
        );
        push(s, &mut pool);
    }
    while pool.len() < 150 {
        let s = format!(
            "{}.{}",
            FILE_STEMS.choose(&mut rng).unwrap(),
            FILE_EXTS.choose(&mut rng).unwrap()
        );
        push(s, &mut pool);
    }
    pool
}

pub fn domain_terms() -> Vec<String> {
    let mut seen = BTreeSet::new();
    DOMAIN_TERMS
        .iter()
        .filter(|t| seen.insert(**t))
        .map(|t| t.to_string())
        .collect()
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("non-empty weights")
}

fn general_words() -> Vec<&'static str> {
    let mut seen = BTreeSet::new();
    GENERAL_WORDS
        .iter()
        .copied()
        .filter(|w| seen.insert(*w))
        .collect()
}

fn write_sentence(
    out: &mut String,
    rng: &mut ChaCha8Rng,
    mut word: impl FnMut(&mut ChaCha8Rng) -> String,
) {
    let len = rng.gen_range(8..=18);
    for i in 0..len {
        if i > 0 {
            out.push_str(if rng.gen_bool(0.06) { ", " } else { " " });
        }
        let w = word(rng);
        if i == 0 {
            let mut chars = w.chars();
            if let Some(c) = chars.next() {
                out.extend(c.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(&w);
        }
    }
    out.push('.');
}

fn write_document(
    rng: &mut ChaCha8Rng,
    target_bytes: usize,
    mut word: impl FnMut(&mut ChaCha8Rng) -> String,
) -> String {
    let mut doc = String::with_capacity(target_bytes + 256);
    while doc.len() < target_bytes {
        let sentences = rng.gen_range(3..=7);
        for s in 0..sentences {
            if s > 0 {
                doc.push(' ');
            }
            write_sentence(&mut doc, rng, &mut word);
        }
        doc.push_str("\n\n");
    }
    doc
}

/// Plain English-like text over a fixed word list (about 300 KB in total).
pub fn general_corpus_documents() -> Vec<String> {
    let words = general_words();
    let dist = zipf(words.len());
    let mut rng = ChaCha8Rng::seed_from_u64(GENERAL_SEED);
    (0..GENERAL_DOCUMENTS)
        .map(|_| write_document(&mut rng, 75_000, |r| words[dist.sample(r)].to_string()))
        .collect()
}

/// Identifier-rich EDA-style text mixing the general word list with domain
/// terms and identifiers (about 1 MB in total).
pub fn domain_corpus_documents() -> Vec<String> {
    let words = general_words();
    let terms = domain_terms();
    let ids = domain_identifiers();
    let (wd, td, idd) = (zipf(words.len()), zipf(terms.len()), zipf(ids.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(DOMAIN_SEED);
    (0..DOMAIN_DOCUMENTS)
        .map(|_| {
            write_document(&mut rng, 64_000, |r| {
                let roll: f64 = r.gen();
                if roll < 0.64 {
                    words[wd.sample(r)].to_string()
                } else if roll < 0.88 {
                    terms[td.sample(r)].clone()
                } else {
                    ids[idd.sample(r)].clone()
                }
            })
        })
        .collect()
}

/// Synthetic desirability scores: domain terms score in [4, 5] growing with
/// length, identifiers score in [1, 2] growing with their alphabetic share.
/// Hyphenated terms are left unannotated since their shape is that of an
/// identifier.
pub fn fixture_annotations() -> Vec<AnnotatedWord> {
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let mut out = Vec::new();
    for t in domain_terms() {
        if word_shape(&t).separator_density > 0.0 {
            continue;
        }
        let len = t.chars().count().min(12) as f64;
        out.push(AnnotatedWord::new(t, round(4.0 + len / 12.0)).expect("score in range"));
    }
    for id in domain_identifiers() {
        let alpha = word_shape(&id).alpha_fraction;
        out.push(AnnotatedWord::new(id, round(1.0 + alpha)).expect("score in range"));
    }
    out
}

/// Renders annotations in the `word<TAB>score` file format.
pub fn annotations_tsv(words: &[AnnotatedWord]) -> String {
    let mut s = String::from("# word\tscore\n");
    for w in words {
        s.push_str(&format!("{}\t{}\n", w.word, w.score));
    }
    s
}
