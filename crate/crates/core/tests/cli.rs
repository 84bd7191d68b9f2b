mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture_corpus, naive_matches, write, FIXTURE_INVENTORY, FIXTURE_LEXICON};
use cxg_core::cli::SelectionRecord;
use cxg_core::grammar::{GrammarInventory, Lexicon, TagSet};
use cxg_core::matcher::{parse_corpus, Match};
use cxg_core::rhgat::{ModelDims, RHgatParams, Task};
use cxg_core::selector::{self, SelectorConfig, Universe};

fn cxg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxg"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cxg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(dir: &Path, sentences: usize) {
    write(dir, "inv.txt", FIXTURE_INVENTORY);
    write(dir, "lex.tsv", FIXTURE_LEXICON);
    write(dir, "corpus.tsv", &fixture_corpus(sentences, 5));
}

const INPUTS: [&str; 6] = ["--inventory", "inv.txt", "--lexicon", "lex.tsv", "--corpus", "corpus.tsv"];

fn with_inputs<'a>(sub: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![sub];
    v.extend(INPUTS);
    v.extend(extra);
    v
}

fn inventory() -> GrammarInventory {
    let tags = TagSet::universal();
    let lexicon = Lexicon::parse_str(FIXTURE_LEXICON, "lex", &tags).unwrap();
    GrammarInventory::parse_str(FIXTURE_INVENTORY, "inv", &tags, lexicon).unwrap()
}

#[test]
fn malformed_token_line_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 2);
    write(d, "corpus.tsv", "# sent_id = a\n0\tthe\tDET\t-\n1\tstaff\n");
    let out = cxg(d, &with_inputs("match", &[]));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("corpus.tsv:3"), "{stderr}");
}

#[test]
fn missing_files_and_bad_flags_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 2);
    let mut args = with_inputs("match", &[]);
    args[2] = "nope.txt";
    assert_eq!(cxg(d, &args).status.code(), Some(2));
    assert_eq!(cxg(d, &with_inputs("match", &["--jobs", "0"])).status.code(), Some(2));
    assert_eq!(cxg(d, &with_inputs("select", &["--t0", "-1"])).status.code(), Some(2));
    assert_eq!(cxg(d, &["network", "--inventory", "inv.txt"]).status.code(), Some(2));
}

#[test]
fn empty_corpus_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 1);
    write(d, "corpus.tsv", "");
    assert_eq!(ok(d, &with_inputs("match", &[])), "");
    assert_eq!(ok(d, &with_inputs("select", &[])), "");
}

#[test]
fn match_output_agrees_with_window_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 25);
    let inv = inventory();
    let corpus = parse_corpus(&fixture_corpus(25, 5), "c", &TagSet::universal()).unwrap();
    let mut expected = Vec::new();
    for s in &corpus {
        for m in naive_matches(s, &inv) {
            expected.push((s.sentence_id.clone(), inv.construction(m.construction_id).unwrap().label.clone(), m.start, m.end));
        }
    }
    let got: Vec<_> = ok(d, &with_inputs("match", &[]))
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (
                v["sentence_id"].as_str().unwrap().to_string(),
                v["construction"].as_str().unwrap().to_string(),
                v["start"].as_u64().unwrap() as usize,
                v["end"].as_u64().unwrap() as usize,
            )
        })
        .collect();
    let sorted = |mut v: Vec<(String, String, usize, usize)>| {
        v.sort();
        v
    };
    assert!(!expected.is_empty());
    assert_eq!(sorted(got), sorted(expected));
}

#[test]
fn exact_select_reaches_the_exhaustive_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 20);
    let inv = inventory();
    let corpus = parse_corpus(&fixture_corpus(20, 5), "c", &TagSet::universal()).unwrap();
    let text = ok(d, &with_inputs("select", &["--exact"]));
    let records: Vec<SelectionRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), corpus.len());
    let config = SelectorConfig::default();
    for (r, s) in records.iter().zip(&corpus) {
        assert_eq!(r.sentence_id, s.sentence_id);
        assert_eq!(r.tokens, s.len());
        let universe = Universe::new(naive_matches(s, &inv), &inv).unwrap();
        assert_eq!(r.candidates, universe.len());
        if universe.is_empty() {
            assert!(r.selected.is_empty());
            continue;
        }
        let best = selector::score(&selector::solve_exact(&universe, &config).unwrap(), &universe, &config);
        assert_eq!(r.solver, "exact");
        assert!((r.total - best.total).abs() < 1e-9, "{}: {} vs {}", r.sentence_id, r.total, best.total);
    }
}

#[test]
fn coverage_only_selection_keeps_every_token_covered() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 15);
    let inv = inventory();
    let corpus = parse_corpus(&fixture_corpus(15, 5), "c", &TagSet::universal()).unwrap();
    let text = ok(d, &with_inputs("select", &["--exact", "--w2", "0", "--w3", "0"]));
    for (line, s) in text.lines().zip(&corpus) {
        let r: SelectionRecord = serde_json::from_str(line).unwrap();
        let all: Vec<Match> = naive_matches(s, &inv);
        let reachable = (0..s.len()).filter(|&t| all.iter().any(|m| m.covered().contains(&t))).count();
        assert_eq!(r.s_ob1, reachable, "{}", r.sentence_id);
        assert_eq!(r.total, r.s_ob1 as f64);
    }
}

#[test]
fn hypergraph_follows_selection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 6);
    let sel = ok(d, &with_inputs("select", &[]));
    write(d, "sel.jsonl", &sel);
    let text = ok(d, &["hypergraph", "--inventory", "inv.txt", "--lexicon", "lex.tsv", "--selection", "sel.jsonl"]);
    assert_eq!(text.matches("# sent_id = ").count(), sel.lines().count());
    write(d, "bad.jsonl", "{\"sentence_id\":\"x\"}\n");
    let out = cxg(d, &["hypergraph", "--inventory", "inv.txt", "--selection", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_epochs_writes_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cxg(d, &["toy-train", "--size", "10", "--dim", "5", "--vocab", "4", "--epochs", "0", "--seed", "9", "--out", "p.bin", "--trace", "t.tsv"]);
    assert!(out.status.success());
    let bytes = std::fs::read(d.join("p.bin")).unwrap();
    let init = RHgatParams::init(ModelDims::new(5, 4, Task::Classify { classes: 2 }), 9).unwrap();
    assert_eq!(bytes, init.to_bytes());
    let trace = std::fs::read_to_string(d.join("t.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    assert!(trace.starts_with("0\t"));
}

#[test]
fn network_links_the_relation_groups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "inv.txt",
        "think--PRON--AUX\nknow--PRON--AUX\nbelieve--PRON--AUX\nSCONJ--PRON--AUX\nif--PRON--AUX\nif--PRON--can\nSCONJ--PRON--AUX--VERB\n",
    );
    write(d, "lex.tsv", "think\tVERB\nknow\tVERB\nbelieve\tVERB\nif\tSCONJ\ncan\tAUX\n");
    write(d, "emb.txt", "7 2\n1 0\n1 0.1\n1 0.2\n0.5 0.5\n0 1\n0.1 1\n0.3 1\n");
    let base = ["network", "--inventory", "inv.txt", "--lexicon", "lex.tsv", "--embeddings", "emb.txt", "--k", "6"];
    let records = ok(d, &[&base[..], &["--format", "records"]].concat());
    for line in [
        "think--PRON--AUX\tknow--PRON--AUX\tpolysemy\tfalse",
        "think--PRON--AUX\tbelieve--PRON--AUX\tpolysemy\tfalse",
        "know--PRON--AUX\tbelieve--PRON--AUX\tpolysemy\tfalse",
        "SCONJ--PRON--AUX\tif--PRON--AUX\tinstance\ttrue",
        "if--PRON--AUX\tif--PRON--can\tinstance\ttrue",
        "SCONJ--PRON--AUX--VERB\tSCONJ--PRON--AUX\tsubpart\ttrue",
    ] {
        assert!(records.lines().any(|l| l == line), "missing {line:?} in\n{records}");
    }
    let dot = ok(d, &base);
    assert!(dot.starts_with("digraph constructicon {"));
    assert_eq!(dot.matches("dir=none").count(), 3);

    let params = RHgatParams::init(ModelDims::new(3, 7, Task::Regress), 1).unwrap();
    std::fs::write(d.join("p.bin"), params.to_bytes()).unwrap();
    let from_params = cxg(d, &["network", "--inventory", "inv.txt", "--params", "p.bin", "--k", "3"]);
    assert!(from_params.status.success());
    let both = cxg(d, &[&base[..], &["--params", "p.bin"]].concat());
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn metrics_prints_exact_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d, 10);
    let text = ok(d, &with_inputs("metrics", &[]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for (line, name) in lines.iter().zip(["aoc", "acr"]) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[0], name);
        let value: f64 = fields[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&value));
        let (n, den) = fields[1].split_once('/').unwrap_or((fields[1], "1"));
        let ratio = n.parse::<f64>().unwrap() / den.parse::<f64>().unwrap();
        assert!((ratio - value).abs() < 1e-12);
    }
}
