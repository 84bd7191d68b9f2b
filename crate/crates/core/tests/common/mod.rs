#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cxg_core::grammar::{GrammarInventory, Lexicon, PosTag, Slot, TagSet};
use cxg_core::hypergraph::{Hyperedge, Hypergraph};
use cxg_core::matcher::{AnnotatedSentence, Match};
use cxg_core::rhgat::{Matrix, ModelDims, RHgatParams, Sample, Target, Task};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub struct Instance {
    pub params: RHgatParams,
    pub sample: Sample,
    pub probe: Matrix,
}

/// Random graph, features and parameters with every tensor jittered away
/// from its initial value, so biases and gains are exercised too.
pub fn random_instance(rng: &mut ChaCha8Rng, max_m: usize, max_edges: usize, max_d: usize, vocab: usize) -> Instance {
    let m = rng.random_range(2..=max_m);
    let d = rng.random_range(3..=max_d);
    let edge_count = rng.random_range(1..=max_edges);
    let edges = (0..edge_count)
        .map(|_| {
            let size = rng.random_range(2..=m.min(4));
            let mut members = sample(rng, m, size).into_vec();
            members.sort_unstable();
            Hyperedge {
                construction_id: rng.random_range(0..vocab),
                members,
            }
        })
        .collect();
    let graph = Hypergraph::new(m, edges).unwrap();
    let regress = rng.random_bool(0.3);
    let (task, target) = if regress {
        (Task::Regress, Target::Value(normal(rng)))
    } else {
        (Task::Classify { classes: 3 }, Target::Class(rng.random_range(0..3)))
    };
    let mut dims = ModelDims::new(d, vocab, task);
    dims.layers = rng.random_range(1..=2);
    let mut params = RHgatParams::init(dims, rng.random()).unwrap();
    for (_, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.3 * normal(rng);
        }
    }
    let features = Matrix::from_fn(m, d, |_, _| normal(rng));
    let probe = Matrix::from_fn(m, d, |_, _| normal(rng));
    Instance {
        params,
        sample: Sample {
            features,
            graph,
            target,
        },
        probe,
    }
}

pub const WORDS: [&str; 8] = ["the", "staff", "be", "if", "it", "to", "hard", "food"];
pub const TAGS: [&str; 5] = ["NOUN", "VERB", "AUX", "PRON", "ADV"];

pub fn random_sentence(rng: &mut ChaCha8Rng, len: usize) -> AnnotatedSentence {
    let tags = TagSet::universal();
    let tokens = (0..len).map(|_| {
        let mut w = WORDS[rng.random_range(0..WORDS.len())].to_string();
        if rng.random_bool(0.2) {
            w = w.to_uppercase();
        }
        let tag = tags.get(TAGS[rng.random_range(0..TAGS.len())]).unwrap();
        let cluster = if rng.random_bool(0.7) { Some(rng.random_range(0..3)) } else { None };
        (w, tag, cluster)
    });
    AnnotatedSentence::new("r", tokens).unwrap()
}

pub fn random_label(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(2..=4);
    (0..len)
        .map(|_| match rng.random_range(0..3) {
            0 => WORDS[rng.random_range(0..WORDS.len())].to_string(),
            1 => TAGS[rng.random_range(0..TAGS.len())].to_string(),
            _ => format!("<{}>", rng.random_range(0..3)),
        })
        .collect::<Vec<_>>()
        .join("--")
}

pub fn random_inventory(rng: &mut ChaCha8Rng, max: usize) -> GrammarInventory {
    let n = rng.random_range(1..=max);
    let labels: BTreeSet<String> = (0..n).map(|_| random_label(rng)).collect();
    GrammarInventory::from_labels(labels, &TagSet::universal(), Lexicon::new()).unwrap()
}

fn token_fills(slot: &Slot, surface: &str, upos: &PosTag, cluster: Option<u32>) -> bool {
    match slot {
        Slot::Lexical(w) => surface.to_lowercase() == *w,
        Slot::Syntactic(t) => t == upos,
        Slot::Semantic(k) => cluster == Some(*k),
    }
}

/// Checks every construction against every window; ordered by start, then id.
pub fn naive_matches(sentence: &AnnotatedSentence, inventory: &GrammarInventory) -> Vec<Match> {
    let mut out = Vec::new();
    for c in inventory.constructions() {
        let len = c.slots.len();
        if len > sentence.len() {
            continue;
        }
        for start in 0..=sentence.len() - len {
            let all = (0..len).all(|o| {
                let t = &sentence.tokens[start + o];
                token_fills(&c.slots[o], &t.surface, &t.upos, t.cluster)
            });
            if all {
                out.push(Match::new(c.id, start, start + len));
            }
        }
    }
    out.sort_by_key(|m| (m.start, m.construction_id));
    out
}

pub const FIXTURE_INVENTORY: &str = "\
NOUN--AUX--be
ADV--hard--to
if--PRON--VERB
DET--NOUN
PRON--VERB
AUX--be
ADJ--NOUN
DET--ADJ--NOUN
<1>--NOUN
VERB--DET--NOUN
";

pub const FIXTURE_LEXICON: &str = "\
be\tAUX,VERB\t
hard\tADV,ADJ\t2
to\tPART,ADP\t
if\tSCONJ\t
food\tNOUN\t1
staff\tNOUN\t1
";

/// A small deterministic corpus in the tab-separated token format.
pub fn fixture_corpus(sentences: usize, seed: u64) -> String {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: [(&str, &str); 14] = [
        ("the", "DET"),
        ("staff", "NOUN"),
        ("should", "AUX"),
        ("be", "AUX"),
        ("food", "NOUN"),
        ("fancy", "ADJ"),
        ("try", "VERB"),
        ("too", "ADV"),
        ("hard", "ADV"),
        ("to", "PART"),
        ("if", "SCONJ"),
        ("it", "PRON"),
        ("served", "VERB"),
        ("prices", "NOUN"),
    ];
    let mut out = String::new();
    for s in 0..sentences {
        out.push_str(&format!("# sent_id = doc{s}\n"));
        let len = rng.random_range(4..=18);
        for i in 0..len {
            let (w, t) = vocab[rng.random_range(0..vocab.len())];
            let cluster = match w {
                "staff" | "food" | "prices" => "1".to_string(),
                _ if rng.random_bool(0.2) => "0".to_string(),
                _ => "-".to_string(),
            };
            out.push_str(&format!("{i}\t{w}\t{t}\t{cluster}\n"));
        }
        out.push('\n');
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}
