//! Sentence hypergraphs: tokens are nodes, selected constructions are hyperedges.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grammar::GrammarInventory;
use crate::matcher::Match;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hyperedge {
    pub construction_id: usize,
    /// Member node indices, ascending.
    pub members: Vec<usize>,
}

/// Incidence is stored as per-edge membership lists; [`Hypergraph::incidence`]
/// materializes the dense `m x n` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    node_count: usize,
    edges: Vec<Hyperedge>,
    node_edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Checks every edge has at least two distinct, in-range members.
    pub fn new(node_count: usize, edges: Vec<Hyperedge>) -> Result<Self> {
        let mut node_edges = vec![Vec::new(); node_count];
        for (j, e) in edges.iter().enumerate() {
            if e.members.len() < 2 {
                return Err(Error::Config(format!("hyperedge {j} has fewer than 2 members")));
            }
            if e.members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "hyperedge {j} members must be strictly increasing"
                )));
            }
            for &i in &e.members {
                if i >= node_count {
                    return Err(Error::NodeOutOfRange {
                        index: i,
                        len: node_count,
                    });
                }
                node_edges[i].push(j);
            }
        }
        Ok(Hypergraph {
            node_count,
            edges,
            node_edges,
        })
    }

    /// Nodes `0..sentence_len`, one hyperedge per match in selection order.
    pub fn build(sentence_len: usize, selection: &[Match]) -> Result<Self> {
        let edges = selection
            .iter()
            .map(|m| {
                if m.end > sentence_len || m.start >= m.end {
                    return Err(Error::SpanOutOfRange {
                        start: m.start,
                        end: m.end,
                        len: sentence_len,
                    });
                }
                Ok(Hyperedge {
                    construction_id: m.construction_id,
                    members: m.covered().collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sentence_len, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge_constructions(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.construction_id).collect()
    }

    /// Hyperedges containing `node`, ascending.
    pub fn incident_edges(&self, node: usize) -> Result<&[usize]> {
        self.node_edges
            .get(node)
            .map(Vec::as_slice)
            .ok_or(Error::NodeOutOfRange {
                index: node,
                len: self.node_count,
            })
    }

    /// Dense incidence matrix, `incidence()[i][j]` iff node `i` is in edge `j`.
    pub fn incidence(&self) -> Vec<Vec<bool>> {
        let mut h = vec![vec![false; self.edges.len()]; self.node_count];
        for (j, e) in self.edges.iter().enumerate() {
            for &i in &e.members {
                h[i][j] = true;
            }
        }
        h
    }

    /// `nodes <m>` followed by one `label: i1 i2 ...` line per edge.
    pub fn to_text(&self, inventory: &GrammarInventory) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "nodes {}", self.node_count).unwrap();
        for e in &self.edges {
            let label = &inventory.construction(e.construction_id)?.label;
            let members: Vec<String> = e.members.iter().map(usize::to_string).collect();
            writeln!(out, "{label}: {}", members.join(" ")).unwrap();
        }
        Ok(out)
    }

    /// Parses the [`Hypergraph::to_text`] block starting at `first_line` (1-based, for diagnostics).
    pub fn parse_text(
        lines: &[&str],
        first_line: usize,
        source_name: &str,
        inventory: &GrammarInventory,
    ) -> Result<Self> {
        let header = lines
            .first()
            .ok_or_else(|| Error::parse(source_name, first_line, "missing `nodes` header"))?;
        let node_count: usize = header
            .strip_prefix("nodes ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::parse(source_name, first_line, "expected `nodes <count>`"))?;
        let mut edges = Vec::new();
        for (offset, line) in lines[1..].iter().enumerate() {
            let line_no = first_line + offset + 1;
            let (label, members) = line
                .rsplit_once(':')
                .ok_or_else(|| Error::parse(source_name, line_no, "expected `label: members`"))?;
            let construction_id = inventory
                .id_of(label.trim())
                .ok_or_else(|| Error::parse(source_name, line_no, format!("unknown construction {label:?}")))?;
            let members = members
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
            edges.push(Hyperedge {
                construction_id,
                members,
            });
        }
        Self::new(node_count, edges).map_err(|e| Error::parse(source_name, first_line, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{Lexicon, TagSet};
    use proptest::prelude::*;

    #[test]
    fn two_overlapping_edges() {
        let h = Hypergraph::build(5, &[Match::new(0, 0, 3), Match::new(1, 2, 5)]).unwrap();
        let inc = h.incidence();
        assert_eq!(inc[2], vec![true, true]);
        let col_sums: Vec<usize> = (0..2).map(|j| inc.iter().filter(|r| r[j]).count()).collect();
        assert_eq!(col_sums, vec![3, 3]);
        assert_eq!(h.incident_edges(2).unwrap(), &[0, 1]);
        assert_eq!(h.incident_edges(0).unwrap(), &[0]);
        assert!(matches!(h.incident_edges(5), Err(Error::NodeOutOfRange { .. })));
    }

    #[test]
    fn degenerate_graphs() {
        let empty = Hypergraph::build(4, &[]).unwrap();
        assert!(empty.incidence().iter().all(|row| row.is_empty()));
        assert!(empty.incident_edges(3).unwrap().is_empty());

        let full = Hypergraph::build(3, &[Match::new(0, 0, 3)]).unwrap();
        assert_eq!(full.incidence(), vec![vec![true]; 3]);
        for i in 0..3 {
            assert_eq!(full.incident_edges(i).unwrap(), &[0]);
        }
        assert!(matches!(
            Hypergraph::build(3, &[Match::new(0, 2, 4)]),
            Err(Error::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let inv = GrammarInventory::from_labels(
            ["NOUN--AUX--be", "if--PRON--VERB"],
            &TagSet::universal(),
            Lexicon::new(),
        )
        .unwrap();
        let h = Hypergraph::build(6, &[Match::new(0, 0, 3), Match::new(1, 3, 6)]).unwrap();
        let text = h.to_text(&inv).unwrap();
        assert_eq!(text, "nodes 6\nNOUN--AUX--be: 0 1 2\nif--PRON--VERB: 3 4 5\n");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(Hypergraph::parse_text(&lines, 1, "h.txt", &inv).unwrap(), h);
    }

    proptest! {
        #[test]
        fn incidence_agrees_with_edge_lists(
            m in 2usize..12,
            spans in prop::collection::vec((0usize..10, 2usize..4), 0..6),
        ) {
            let matches: Vec<Match> = spans
                .into_iter()
                .filter(|(s, l)| s + l <= m)
                .enumerate()
                .map(|(j, (s, l))| Match::new(j, s, s + l))
                .collect();
            let h = Hypergraph::build(m, &matches).unwrap();
            let inc = h.incidence();
            let ones: usize = inc.iter().map(|r| r.iter().filter(|&&b| b).count()).sum();
            prop_assert_eq!(ones, h.edges().iter().map(|e| e.members.len()).sum::<usize>());
            for (i, row) in inc.iter().enumerate() {
                let nonzero: Vec<usize> = (0..row.len()).filter(|&j| row[j]).collect();
                prop_assert_eq!(h.incident_edges(i).unwrap(), nonzero.as_slice());
            }
            prop_assert_eq!(Hypergraph::build(m, &matches).unwrap(), h);
        }
    }
}
