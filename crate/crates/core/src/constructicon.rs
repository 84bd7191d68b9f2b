//! Typed networks of constructions.
//!
//! Every construction is linked to its `k` nearest neighbours under
//! `gamma * SD + MD`, where `SD` is cosine distance between construction
//! embeddings and `MD` a slot-level edit distance that lets slots of different
//! abstraction levels match. Each candidate pair is then typed as polysemy,
//! subpart or instance, or dropped.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grammar::{is_match, Construction, GrammarInventory, Lexicon, Slot};
use crate::rhgat::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConfig {
    pub k: usize,
    pub gamma: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { k: 15, gamma: 10.0 }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config("gamma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Polysemy,
    Subpart,
    Instance,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Polysemy => "polysemy",
            Relation::Subpart => "subpart",
            Relation::Instance => "instance",
        }
    }

    pub fn is_directed(self) -> bool {
        self != Relation::Polysemy
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "polysemy" => Ok(Relation::Polysemy),
            "subpart" => Ok(Relation::Subpart),
            "instance" => Ok(Relation::Instance),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

/// A typed link. Polysemy links are undirected and stored with `src < dst`;
/// subpart links point whole to part, instance links abstract to concrete.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: Relation,
}

impl TypedEdge {
    pub fn directed(&self) -> bool {
        self.relation.is_directed()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructiconGraph {
    pub nodes: Vec<usize>,
    /// Sorted by `(src, dst, relation)`, no duplicates.
    pub edges: Vec<TypedEdge>,
}

/// Cosine distance `1 - cos(e_i, e_j)`, in `[0, 2]`.
pub fn sd(embeddings: &Matrix, i: usize, j: usize) -> Result<f64> {
    for idx in [i, j] {
        if idx >= embeddings.rows() {
            return Err(Error::NodeOutOfRange {
                index: idx,
                len: embeddings.rows(),
            });
        }
    }
    let (a, b) = (embeddings.row(i), embeddings.row(j));
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 {
        return Err(Error::ZeroNorm(i));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm(j));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cos = (dot / (na * nb).sqrt()).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Multi-level edit distance: unit insertions and deletions, and substitutions
/// that are free whenever the two slots match across levels.
pub fn med(a: &Construction, b: &Construction, lexicon: &Lexicon) -> usize {
    med_slots(&a.slots, &b.slots, lexicon)
}

pub fn med_slots(a: &[Slot], b: &[Slot], lexicon: &Lexicon) -> usize {
    let q = b.len();
    let mut prev: Vec<usize> = (0..=q).collect();
    let mut cur = vec![0; q + 1];
    for (i, sa) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, sb) in b.iter().enumerate() {
            let sub = usize::from(!is_match(sa, sb, lexicon));
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + sub);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q]
}

/// All-pairs [`med`], rows computed in parallel.
pub fn md_matrix(inventory: &GrammarInventory) -> Vec<Vec<usize>> {
    let cs = inventory.constructions();
    cs.par_iter()
        .map(|a| {
            cs.iter()
                .map(|b| if a.id == b.id { 0 } else { med(a, b, &inventory.lexicon) })
                .collect()
        })
        .collect()
}

/// The `k` constructions nearest to `g` under `gamma * SD + MD`, excluding
/// `g`; equal distances go to the smaller id. Returned in rank order.
pub fn neighbors(g: usize, embeddings: &Matrix, md: &[Vec<usize>], config: &NetworkConfig) -> Result<Vec<usize>> {
    let n = md.len();
    if n <= config.k {
        return Err(Error::InventoryTooSmall { size: n, k: config.k });
    }
    if g >= n {
        return Err(Error::NodeOutOfRange { index: g, len: n });
    }
    let mut scored = Vec::with_capacity(n - 1);
    for h in (0..n).filter(|&h| h != g) {
        scored.push((config.gamma * sd(embeddings, g, h)? + md[g][h] as f64, h));
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    Ok(scored.into_iter().take(config.k).map(|(_, h)| h).collect())
}

fn is_subpart(long: &[Slot], short: &[Slot]) -> bool {
    long.windows(short.len()).any(|w| w == short)
}

/// Which of `a`, `b` is more concrete at every position where levels differ:
/// `Some(true)` if `b` is consistently the concrete side.
fn instance_direction(a: &[Slot], b: &[Slot], lexicon: &Lexicon) -> Option<bool> {
    let mut direction = None;
    for (x, y) in a.iter().zip(b) {
        if !is_match(x, y, lexicon) {
            return None;
        }
        let step = match (x.is_lexical(), y.is_lexical()) {
            (false, true) => true,
            (true, false) => false,
            _ => continue,
        };
        match direction {
            None => direction = Some(step),
            Some(d) if d != step => return None,
            _ => {}
        }
    }
    direction
}

fn is_polysemy(a: &[Slot], b: &[Slot], lexicon: &Lexicon) -> bool {
    let mut differs = false;
    for (x, y) in a.iter().zip(b) {
        if x == y {
            continue;
        }
        match (x, y) {
            (Slot::Lexical(_), Slot::Lexical(_)) if is_match(x, y, lexicon) => differs = true,
            _ => return false,
        }
    }
    differs
}

/// Types the pair, checking subpart, then instance, then polysemy. The
/// returned edge is already oriented.
pub fn type_relation(a: &Construction, b: &Construction, lexicon: &Lexicon) -> Option<TypedEdge> {
    if a.id == b.id {
        return None;
    }
    let edge = |src: usize, dst: usize, relation| Some(TypedEdge { src, dst, relation });
    let (sa, sb) = (&a.slots, &b.slots);
    if sa.len() != sb.len() {
        let (long, short) = if sa.len() > sb.len() { (a, b) } else { (b, a) };
        return if is_subpart(&long.slots, &short.slots) {
            edge(long.id, short.id, Relation::Subpart)
        } else {
            None
        };
    }
    if let Some(b_concrete) = instance_direction(sa, sb, lexicon) {
        return if b_concrete {
            edge(a.id, b.id, Relation::Instance)
        } else {
            edge(b.id, a.id, Relation::Instance)
        };
    }
    if is_polysemy(sa, sb, lexicon) {
        return edge(a.id.min(b.id), a.id.max(b.id), Relation::Polysemy);
    }
    None
}

/// Links every construction to its typed neighbours; edges found from either
/// endpoint are merged.
pub fn build_network(
    inventory: &GrammarInventory,
    embeddings: &Matrix,
    config: &NetworkConfig,
) -> Result<ConstructiconGraph> {
    config.validate()?;
    let n = inventory.len();
    if embeddings.rows() != n {
        return Err(Error::Dimension(format!(
            "{} embedding rows for {n} constructions",
            embeddings.rows()
        )));
    }
    let md = md_matrix(inventory);
    let cs = inventory.constructions();
    let per_node: Vec<Vec<TypedEdge>> = (0..n)
        .into_par_iter()
        .map(|g| {
            let near = neighbors(g, embeddings, &md, config)?;
            Ok(near
                .into_iter()
                .filter_map(|h| type_relation(&cs[g], &cs[h], &inventory.lexicon))
                .collect())
        })
        .collect::<Result<_>>()?;
    let edges: BTreeSet<TypedEdge> = per_node.into_iter().flatten().collect();
    Ok(ConstructiconGraph {
        nodes: (0..n).collect(),
        edges: edges.into_iter().collect(),
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl ConstructiconGraph {
    /// Graphviz document; polysemy edges are drawn without arrowheads.
    pub fn to_dot(&self, inventory: &GrammarInventory) -> Result<String> {
        let mut out = String::from("digraph constructicon {\n");
        for &id in &self.nodes {
            let label = &inventory.construction(id)?.label;
            writeln!(out, "  n{id} [label=\"{}\"];", dot_escape(label)).unwrap();
        }
        for e in &self.edges {
            let style = if e.directed() { "" } else { ", dir=none" };
            writeln!(out, "  n{} -> n{} [label=\"{}\"{style}];", e.src, e.dst, e.relation).unwrap();
        }
        out.push_str("}\n");
        Ok(out)
    }

    /// One `src<TAB>dst<TAB>relation<TAB>directed` line per edge.
    pub fn to_records(&self, inventory: &GrammarInventory) -> Result<String> {
        let mut out = String::new();
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                inventory.construction(e.src)?.label,
                inventory.construction(e.dst)?.label,
                e.relation,
                e.directed()
            )
            .unwrap();
        }
        Ok(out)
    }

    /// Inverse of [`ConstructiconGraph::to_records`]; nodes are the whole inventory.
    pub fn parse_records(text: &str, source_name: &str, inventory: &GrammarInventory) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::parse(source_name, line_no, msg);
            let fields: Vec<&str> = line.split('\t').collect();
            let [src, dst, relation, directed] = fields[..] else {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            };
            let id = |label: &str| inventory.id_of(label).ok_or_else(|| err(format!("unknown construction {label:?}")));
            let (src, dst) = (id(src)?, id(dst)?);
            let relation: Relation = relation.parse().map_err(err)?;
            let directed: bool = directed
                .parse()
                .map_err(|_| err(format!("expected true or false, found {directed:?}")))?;
            if directed != relation.is_directed() {
                return Err(err(format!("{relation} edges have directed = {}", relation.is_directed())));
            }
            if src == dst {
                return Err(err("self-loop".into()));
            }
            if !directed && src > dst {
                return Err(err("undirected edges must list the smaller id first".into()));
            }
            if !edges.insert(TypedEdge { src, dst, relation }) {
                return Err(err("duplicate edge".into()));
            }
        }
        Ok(ConstructiconGraph {
            nodes: (0..inventory.len()).collect(),
            edges: edges.into_iter().collect(),
        })
    }
}
