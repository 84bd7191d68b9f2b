//! Slots, constructions, the lexicon and the cross-level slot matching predicate.
//!
//! A construction is written as a `--`-joined sequence of slots, e.g.
//! `NOUN--AUX--be`. Each slot sits at one of three abstraction levels:
//!
//! * syntactic: a Universal POS tag (`NOUN`, `AUX`, ...),
//! * semantic: a cluster id written with an angle-bracket sigil (`<7>`),
//! * lexical: a lowercase surface word (`be`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcher::Token;

/// Separator between slots in a construction label.
pub const SLOT_SEPARATOR: &str = "--";

/// The 17 Universal Dependencies part-of-speech tags.
pub const UNIVERSAL_POS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosTag(String);

impl PosTag {
    /// Wraps a tag without checking it against a [`TagSet`]; loaders validate.
    pub fn new(tag: impl Into<String>) -> Self {
        PosTag(tag.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The POS inventory accepted at load time: the universal tags plus any declared extras.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSet {
    tags: BTreeSet<String>,
}

impl Default for TagSet {
    fn default() -> Self {
        Self::universal()
    }
}

impl TagSet {
    pub fn universal() -> Self {
        TagSet {
            tags: UNIVERSAL_POS_TAGS.iter().map(|t| t.to_string()).collect(),
        }
    }

    /// Declares an extra tag. Extra tags must not be confusable with lexical
    /// words or semantic sigils, so they may not contain lowercase letters.
    pub fn with_extra(mut self, tag: &str) -> Result<Self> {
        let ok = !tag.is_empty()
            && !tag.starts_with('<')
            && !tag.contains('-')
            && !tag.chars().any(|c| c.is_whitespace() || c.is_lowercase());
        if !ok {
            return Err(Error::Config(format!("invalid extra POS tag {tag:?}")));
        }
        self.tags.insert(tag.to_string());
        Ok(self)
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn get(&self, tag: &str) -> Option<PosTag> {
        self.contains(tag).then(|| PosTag::new(tag))
    }
}

/// Abstraction level of a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotLevel {
    Lexical,
    Syntactic,
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Lexical(String),
    Syntactic(PosTag),
    Semantic(u32),
}

impl Slot {
    pub fn level(&self) -> SlotLevel {
        match self {
            Slot::Lexical(_) => SlotLevel::Lexical,
            Slot::Syntactic(_) => SlotLevel::Syntactic,
            Slot::Semantic(_) => SlotLevel::Semantic,
        }
    }

    pub fn is_lexical(&self) -> bool {
        matches!(self, Slot::Lexical(_))
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Lexical(w) => f.write_str(w),
            Slot::Syntactic(t) => f.write_str(t.as_str()),
            Slot::Semantic(k) => write!(f, "<{k}>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Construction {
    pub id: usize,
    pub slots: Vec<Slot>,
    pub label: String,
}

impl Construction {
    /// Parses `label` and stores its canonical rendering.
    pub fn parse(id: usize, label: &str, tags: &TagSet) -> Result<Self> {
        let slots = parse_construction(label, tags)?;
        let label = render_slots(&slots);
        Ok(Construction { id, slots, label })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

fn label_error(label: &str, reason: impl Into<String>) -> Error {
    Error::InvalidLabel {
        label: label.to_string(),
        reason: reason.into(),
    }
}

fn parse_slot(token: &str, label: &str, tags: &TagSet) -> Result<Slot> {
    if token.is_empty() {
        return Err(label_error(label, "empty slot between separators"));
    }
    if let Some(tag) = tags.get(token) {
        return Ok(Slot::Syntactic(tag));
    }
    if let Some(rest) = token.strip_prefix('<') {
        let digits = rest
            .strip_suffix('>')
            .ok_or_else(|| label_error(label, format!("unknown sigil form {token:?}")))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(label_error(label, format!("unknown sigil form {token:?}")));
        }
        let cluster = digits
            .parse::<u32>()
            .map_err(|_| label_error(label, format!("cluster id out of range in {token:?}")))?;
        return Ok(Slot::Semantic(cluster));
    }
    if token.chars().count() >= 2 && token.chars().all(|c| c.is_ascii_uppercase()) {
        return Err(label_error(label, format!("unknown POS tag {token:?}")));
    }
    if token.contains('-') || token.chars().any(char::is_whitespace) {
        return Err(label_error(
            label,
            format!("lexical slot {token:?} contains a dash or whitespace"),
        ));
    }
    Ok(Slot::Lexical(token.to_lowercase()))
}

/// Splits a `--`-joined label into slots.
///
/// Classification precedence: an exact POS tag is syntactic, an `<k>` sigil
/// is semantic, anything else is a (lowercased) lexical word. All-uppercase
/// tokens that are not known tags are rejected as unknown POS tags.
pub fn parse_construction(label: &str, tags: &TagSet) -> Result<Vec<Slot>> {
    let label = label.trim();
    let slots = label
        .split(SLOT_SEPARATOR)
        .map(|tok| parse_slot(tok, label, tags))
        .collect::<Result<Vec<_>>>()?;
    if slots.len() < 2 {
        return Err(label_error(label, "a construction needs at least 2 slots"));
    }
    Ok(slots)
}

pub fn render_slots(slots: &[Slot]) -> String {
    slots
        .iter()
        .map(Slot::to_string)
        .collect::<Vec<_>>()
        .join(SLOT_SEPARATOR)
}

/// Word-level POS and semantic-cluster information.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    pos_of: BTreeMap<String, BTreeSet<PosTag>>,
    cluster_of: BTreeMap<String, u32>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a word. The word is lowercased; an empty `pos` set is rejected.
    pub fn insert(
        &mut self,
        word: &str,
        pos: impl IntoIterator<Item = PosTag>,
        cluster: Option<u32>,
    ) -> Result<()> {
        let word = word.to_lowercase();
        let pos: BTreeSet<PosTag> = pos.into_iter().collect();
        if word.is_empty() || pos.is_empty() {
            return Err(Error::Config(format!(
                "lexicon entry {word:?} needs a word and at least one POS tag"
            )));
        }
        self.pos_of.insert(word.clone(), pos);
        match cluster {
            Some(k) => {
                self.cluster_of.insert(word, k);
            }
            None => {
                self.cluster_of.remove(&word);
            }
        }
        Ok(())
    }

    pub fn pos_of(&self, word: &str) -> Option<&BTreeSet<PosTag>> {
        self.pos_of.get(word)
    }

    pub fn cluster_of(&self, word: &str) -> Option<u32> {
        self.cluster_of.get(word).copied()
    }

    pub fn has_pos(&self, word: &str, tag: &PosTag) -> bool {
        self.pos_of(word).is_some_and(|set| set.contains(tag))
    }

    pub fn len(&self) -> usize {
        self.pos_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos_of.is_empty()
    }

    fn share_pos(&self, a: &str, b: &str) -> bool {
        match (self.pos_of(a), self.pos_of(b)) {
            (Some(x), Some(y)) => !x.is_disjoint(y),
            _ => false,
        }
    }

    fn share_cluster(&self, a: &str, b: &str) -> bool {
        matches!((self.cluster_of(a), self.cluster_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// Parses `word<TAB>POS[,POS...]<TAB>cluster` lines; the cluster column may be
    /// empty or absent. Blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str, source_name: &str, tags: &TagSet) -> Result<Self> {
        let mut lexicon = Lexicon::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let word = cols[0].trim();
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::parse(source_name, line_no, "invalid word"));
            }
            let mut pos = Vec::new();
            for tag in cols[1].split(',').map(str::trim) {
                match tags.get(tag) {
                    Some(t) => pos.push(t),
                    None => {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            format!("unknown POS tag {tag:?}"),
                        ))
                    }
                }
            }
            let cluster = match cols.get(2).map(|c| c.trim()) {
                None | Some("") => None,
                Some(c) => Some(c.parse::<u32>().map_err(|_| {
                    Error::parse(source_name, line_no, format!("invalid cluster id {c:?}"))
                })?),
            };
            if lexicon.pos_of.contains_key(&word.to_lowercase()) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("duplicate lexicon entry {word:?}"),
                ));
            }
            lexicon
                .insert(word, pos, cluster)
                .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path, tags: &TagSet) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, &path.display().to_string(), tags)
    }
}

/// Cross-level slot matching used by the multi-level edit distance.
///
/// * lexical/lexical: same word, or the words share a POS tag or a semantic cluster;
/// * syntactic/syntactic and semantic/semantic: identical values;
/// * lexical/syntactic: the word carries the tag;
/// * lexical/semantic: the word's cluster equals the slot's cluster;
/// * syntactic/semantic: never.
pub fn is_match(a: &Slot, b: &Slot, lexicon: &Lexicon) -> bool {
    match (a, b) {
        (Slot::Lexical(x), Slot::Lexical(y)) => {
            x == y || lexicon.share_pos(x, y) || lexicon.share_cluster(x, y)
        }
        (Slot::Syntactic(x), Slot::Syntactic(y)) => x == y,
        (Slot::Semantic(x), Slot::Semantic(y)) => x == y,
        (Slot::Lexical(w), Slot::Syntactic(t)) | (Slot::Syntactic(t), Slot::Lexical(w)) => {
            lexicon.has_pos(w, t)
        }
        (Slot::Lexical(w), Slot::Semantic(k)) | (Slot::Semantic(k), Slot::Lexical(w)) => {
            lexicon.cluster_of(w) == Some(*k)
        }
        (Slot::Syntactic(_), Slot::Semantic(_)) | (Slot::Semantic(_), Slot::Syntactic(_)) => false,
    }
}

/// Whether a sentence token fills `slot`.
pub fn slot_matches_token(slot: &Slot, token: &Token) -> bool {
    match slot {
        Slot::Lexical(w) => token.surface.to_lowercase() == *w,
        Slot::Syntactic(t) => token.upos == *t,
        Slot::Semantic(k) => token.cluster == Some(*k),
    }
}

/// The constructions of a language plus its lexicon. Immutable once built.
#[derive(Clone, Debug, Default)]
pub struct GrammarInventory {
    constructions: Vec<Construction>,
    by_label: HashMap<String, usize>,
    pub lexicon: Lexicon,
}

impl GrammarInventory {
    pub fn from_labels<S: AsRef<str>>(
        labels: impl IntoIterator<Item = S>,
        tags: &TagSet,
        lexicon: Lexicon,
    ) -> Result<Self> {
        let mut inventory = GrammarInventory {
            lexicon,
            ..Default::default()
        };
        for label in labels {
            inventory.push(label.as_ref(), tags)?;
        }
        Ok(inventory)
    }

    fn push(&mut self, label: &str, tags: &TagSet) -> Result<()> {
        let c = Construction::parse(self.constructions.len(), label, tags)?;
        if self.by_label.contains_key(&c.label) {
            return Err(Error::DuplicateLabel(c.label));
        }
        self.by_label.insert(c.label.clone(), c.id);
        self.constructions.push(c);
        Ok(())
    }

    /// One label per line; blank lines and `#` comments are skipped.
    pub fn parse_str(
        text: &str,
        source_name: &str,
        tags: &TagSet,
        lexicon: Lexicon,
    ) -> Result<Self> {
        let mut inventory = GrammarInventory {
            lexicon,
            ..Default::default()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            inventory
                .push(line, tags)
                .map_err(|e| Error::parse(source_name, idx + 1, e.to_string()))?;
        }
        Ok(inventory)
    }

    pub fn load(path: &Path, tags: &TagSet, lexicon: Lexicon) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, &path.display().to_string(), tags, lexicon)
    }

    pub fn constructions(&self) -> &[Construction] {
        &self.constructions
    }

    pub fn get(&self, id: usize) -> Option<&Construction> {
        self.constructions.get(id)
    }

    pub fn construction(&self, id: usize) -> Result<&Construction> {
        self.get(id).ok_or(Error::UnknownConstruction {
            id,
            size: self.len(),
        })
    }

    pub fn id_of(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.constructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constructions.is_empty()
    }
}
