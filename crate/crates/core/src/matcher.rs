//! Construction matching over annotated sentences, overlap classification,
//! word-to-subword span alignment and the AoC/ACR sparsity metrics.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{GrammarInventory, PosTag, Slot, TagSet};
use crate::selector::{self, SelectorConfig, Universe};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub upos: PosTag,
    pub cluster: Option<u32>,
}

impl Token {
    pub fn new(index: usize, surface: &str, upos: PosTag, cluster: Option<u32>) -> Self {
        Token {
            index,
            surface: surface.to_string(),
            upos,
            cluster,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
}

impl AnnotatedSentence {
    /// Builds a sentence from `(surface, upos, cluster)` triples, numbering tokens densely.
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: impl IntoIterator<Item = (String, PosTag, Option<u32>)>,
    ) -> Result<Self> {
        let tokens: Vec<Token> = tokens
            .into_iter()
            .enumerate()
            .map(|(index, (surface, upos, cluster))| Token {
                index,
                surface,
                upos,
                cluster,
            })
            .collect();
        if tokens.is_empty() {
            return Err(Error::Config("a sentence needs at least one token".into()));
        }
        Ok(AnnotatedSentence {
            sentence_id: sentence_id.into(),
            tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One instantiation of a construction on a contiguous token span `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Match {
    pub construction_id: usize,
    pub start: usize,
    pub end: usize,
}

impl Match {
    pub fn new(construction_id: usize, start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Match {
            construction_id,
            start,
            end,
        }
    }

    pub fn covered(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    Inclusion,
    Intersection,
    Disjoint,
}

/// Relation between the token sets of two matches in the same sentence.
pub fn classify_overlap(a: &Match, b: &Match) -> Overlap {
    let a_in_b = b.start <= a.start && a.end <= b.end;
    let b_in_a = a.start <= b.start && b.end <= a.end;
    if a_in_b || b_in_a {
        Overlap::Inclusion
    } else if a.start < b.end && b.start < a.end {
        Overlap::Intersection
    } else {
        Overlap::Disjoint
    }
}

#[derive(Default)]
struct TrieNode {
    lexical: HashMap<String, usize>,
    syntactic: HashMap<PosTag, usize>,
    semantic: HashMap<u32, usize>,
    complete: Vec<usize>,
}

/// A slot trie over an inventory; each token advances every live path whose
/// next slot it fills.
pub struct Matcher {
    nodes: Vec<TrieNode>,
}

impl Matcher {
    pub fn new(inventory: &GrammarInventory) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for c in inventory.constructions() {
            let mut at = 0;
            for slot in &c.slots {
                let fresh = nodes.len();
                let node = &mut nodes[at];
                let next = match slot {
                    Slot::Lexical(w) => *node.lexical.entry(w.clone()).or_insert(fresh),
                    Slot::Syntactic(t) => *node.syntactic.entry(t.clone()).or_insert(fresh),
                    Slot::Semantic(k) => *node.semantic.entry(*k).or_insert(fresh),
                };
                if next == fresh {
                    nodes.push(TrieNode::default());
                }
                at = next;
            }
            nodes[at].complete.push(c.id);
        }
        Matcher { nodes }
    }

    /// All matches in `sentence`, ordered by start then construction id.
    pub fn find(&self, sentence: &AnnotatedSentence) -> Vec<Match> {
        let tokens = &sentence.tokens;
        let mut out = Vec::new();
        let mut frontier: Vec<usize> = Vec::new();
        let mut next: Vec<usize> = Vec::new();
        for start in 0..tokens.len() {
            let mut found = Vec::new();
            frontier.clear();
            frontier.push(0usize);
            for (offset, token) in tokens[start..].iter().enumerate() {
                next.clear();
                let lower = token.surface.to_lowercase();
                for &at in &frontier {
                    let node = &self.nodes[at];
                    next.extend(node.lexical.get(&lower));
                    next.extend(node.syntactic.get(&token.upos));
                    if let Some(k) = token.cluster {
                        next.extend(node.semantic.get(&k));
                    }
                }
                let end = start + offset + 1;
                for &at in &next {
                    found.extend(self.nodes[at].complete.iter().map(|&id| Match::new(id, start, end)));
                }
                if next.is_empty() {
                    break;
                }
                std::mem::swap(&mut frontier, &mut next);
            }
            found.sort_by_key(|m| m.construction_id);
            out.extend(found);
        }
        out
    }
}

/// Every instantiation of every inventory construction in `sentence`.
pub fn match_all(sentence: &AnnotatedSentence, inventory: &GrammarInventory) -> Vec<Match> {
    Matcher::new(inventory).find(sentence)
}

/// Word index to half-open subword interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubwordAlignment {
    word_to_subwords: Vec<Range<usize>>,
}

impl SubwordAlignment {
    /// Validates that the intervals are non-empty, increasing and tile `0..n`.
    pub fn new(word_to_subwords: Vec<Range<usize>>) -> Result<Self> {
        let mut expected = 0;
        for (word, r) in word_to_subwords.iter().enumerate() {
            if r.start >= r.end {
                return Err(Error::InvalidAlignment(format!("word {word} maps to an empty interval")));
            }
            if r.start != expected {
                return Err(Error::InvalidAlignment(format!(
                    "word {word} starts at subword {} but {expected} was expected",
                    r.start
                )));
            }
            expected = r.end;
        }
        Ok(SubwordAlignment { word_to_subwords })
    }

    /// Builds the alignment from per-subword word indices (as emitted by
    /// subword tokenizers), e.g. `[0, 1, 1, 2]`.
    pub fn from_word_ids(word_ids: &[usize]) -> Result<Self> {
        let mut ranges: Vec<Range<usize>> = Vec::new();
        for (sub, &word) in word_ids.iter().enumerate() {
            if word + 1 == ranges.len() {
                if let Some(last) = ranges.last_mut() {
                    last.end = sub + 1;
                }
            } else if word == ranges.len() {
                ranges.push(sub..sub + 1);
            } else {
                return Err(Error::InvalidAlignment(format!(
                    "subword {sub} maps to word {word} out of order"
                )));
            }
        }
        Self::new(ranges)
    }

    /// One subword per word.
    pub fn identity(words: usize) -> Self {
        SubwordAlignment {
            word_to_subwords: (0..words).map(|i| i..i + 1).collect(),
        }
    }

    pub fn get(&self, word: usize) -> Option<&Range<usize>> {
        self.word_to_subwords.get(word)
    }

    pub fn words(&self) -> usize {
        self.word_to_subwords.len()
    }

    pub fn subwords(&self) -> usize {
        self.word_to_subwords.last().map_or(0, |r| r.end)
    }
}

/// Maps each match's word span onto the subword sequence, preserving order.
pub fn align_to_subwords(matches: &[Match], alignment: &SubwordAlignment) -> Result<Vec<Range<usize>>> {
    matches
        .iter()
        .map(|m| {
            if m.end > alignment.words() {
                return Err(Error::MissingAlignment(m.start.max(alignment.words())));
            }
            let first = alignment.get(m.start).ok_or(Error::MissingAlignment(m.start))?;
            let last = alignment
                .get(m.end - 1)
                .ok_or(Error::MissingAlignment(m.end - 1))?;
            Ok(first.start..last.end)
        })
        .collect()
}

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn mean(total: BigRational, n: usize) -> BigRational {
    total / BigInt::from(n)
}

/// Average ratio of matched constructions to sentence length, exact.
pub fn aoc(corpus: &[AnnotatedSentence], inventory: &GrammarInventory) -> Result<BigRational> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let matcher = Matcher::new(inventory);
    let total = corpus
        .par_iter()
        .map(|s| ratio(matcher.find(s).len(), s.len()))
        .reduce(BigRational::zero, |a, b| a + b);
    Ok(mean(total, corpus.len()))
}

/// Largest universe solved exhaustively when computing ACR.
pub const ACR_EXACT_LIMIT: usize = 20;

/// The unconditional max-coverage selection used by ACR: the objective with
/// the overlap and concreteness weights zeroed.
pub fn max_coverage_selection(
    matches: &[Match],
    inventory: &GrammarInventory,
    config: &SelectorConfig,
) -> Result<Vec<Match>> {
    if matches.is_empty() {
        return Ok(Vec::new());
    }
    let config = SelectorConfig {
        w2: 0.0,
        w3: 0.0,
        ..config.clone()
    };
    let universe = Universe::new(matches.to_vec(), inventory)?;
    let selection = if universe.len() <= ACR_EXACT_LIMIT {
        selector::solve_exact(&universe, &config)?
    } else {
        let sa = selector::solve_sa(&universe, &config)?;
        selector::prune_redundant(&universe, &sa)
    };
    Ok(selection.chosen(&universe).into_iter().cloned().collect())
}

/// Average ratio of total selected construction length to sentence length
/// under unconditional maximum coverage, exact.
pub fn acr(
    corpus: &[AnnotatedSentence],
    inventory: &GrammarInventory,
    config: &SelectorConfig,
) -> Result<BigRational> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let matcher = Matcher::new(inventory);
    let per_sentence = corpus
        .par_iter()
        .map(|s| {
            let chosen = max_coverage_selection(&matcher.find(s), inventory, config)?;
            Ok(ratio(chosen.iter().map(Match::len).sum(), s.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_sentence
        .into_iter()
        .fold(BigRational::zero(), |a, b| a + b);
    Ok(mean(total, corpus.len()))
}

fn flush_sentence(
    tokens: &mut Vec<Token>,
    pending_id: &mut Option<String>,
    corpus: &mut Vec<AnnotatedSentence>,
) {
    if !tokens.is_empty() {
        let sentence_id = pending_id
            .take()
            .unwrap_or_else(|| format!("s{}", corpus.len() + 1));
        corpus.push(AnnotatedSentence {
            sentence_id,
            tokens: std::mem::take(tokens),
        });
    }
}

/// Reads the tab-separated corpus format: `index<TAB>surface<TAB>UPOS<TAB>cluster-or-dash`
/// per token, blank lines between sentences. A `# sent_id = X` (or `# id = X`)
/// comment names the following sentence; other `#` lines are ignored. Unnamed
/// sentences are called `s1`, `s2`, ... by position.
pub fn parse_corpus(text: &str, source_name: &str, tags: &TagSet) -> Result<Vec<AnnotatedSentence>> {
    let mut corpus = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut pending_id: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush_sentence(&mut tokens, &mut pending_id, &mut corpus);
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            for key in ["sent_id", "id"] {
                if let Some(rest) = comment.strip_prefix(key) {
                    if let Some(value) = rest.trim_start().strip_prefix('=') {
                        if !tokens.is_empty() {
                            return Err(Error::parse(source_name, line_no, "sentence id inside a sentence"));
                        }
                        pending_id = Some(value.trim().to_string());
                        break;
                    }
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index: usize = cols[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(source_name, line_no, format!("invalid token index {:?}", cols[0])))?;
        if index != tokens.len() {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("token index {index} out of sequence, expected {}", tokens.len()),
            ));
        }
        let surface = cols[1].trim();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::parse(source_name, line_no, "empty or multi-word surface"));
        }
        let upos = tags
            .get(cols[2].trim())
            .ok_or_else(|| Error::parse(source_name, line_no, format!("unknown POS tag {:?}", cols[2])))?;
        let cluster = match cols[3].trim() {
            "-" | "_" => None,
            c => Some(c.parse::<u32>().map_err(|_| {
                Error::parse(source_name, line_no, format!("invalid cluster {c:?}"))
            })?),
        };
        tokens.push(Token {
            index,
            surface: surface.to_string(),
            upos,
            cluster,
        });
    }
    flush_sentence(&mut tokens, &mut pending_id, &mut corpus);
    Ok(corpus)
}

pub fn load_corpus(path: &Path, tags: &TagSet) -> Result<Vec<AnnotatedSentence>> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string(), tags)
}

/// One line of the match output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub sentence_id: String,
    pub construction: String,
    pub start: usize,
    pub end: usize,
}

impl MatchRecord {
    pub fn new(sentence_id: &str, m: &Match, inventory: &GrammarInventory) -> Result<Self> {
        Ok(MatchRecord {
            sentence_id: sentence_id.to_string(),
            construction: inventory.construction(m.construction_id)?.label.clone(),
            start: m.start,
            end: m.end,
        })
    }

    pub fn to_match(&self, inventory: &GrammarInventory) -> Result<Match> {
        let id = inventory
            .id_of(&self.construction)
            .ok_or_else(|| Error::UnknownLabel(self.construction.clone()))?;
        let len = inventory.construction(id)?.len();
        if self.end <= self.start || self.end - self.start != len {
            return Err(Error::Config(format!(
                "span [{}, {}) does not fit construction {:?}",
                self.start, self.end, self.construction
            )));
        }
        Ok(Match::new(id, self.start, self.end))
    }
}

pub fn write_match_records<W: Write>(mut out: W, records: &[MatchRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_match_records<R: BufRead>(input: R, source_name: &str) -> Result<Vec<MatchRecord>> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}
