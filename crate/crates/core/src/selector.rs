//! Conditional max-coverage selection.
//!
//! Given every match found in a sentence, pick a subset that covers many
//! tokens, overlaps little and prefers concrete slots. The objective is
//!
//! ```text
//! total = w1 * coverage - w2 * overlap + w3 * concreteness
//! ```
//!
//! where `coverage` counts distinct covered tokens, `overlap` is the number of
//! redundant token covers (`sum |c_i| - |union c_i|`) and `concreteness` sums
//! the mean slot score of each selected construction. The search is simulated
//! annealing over bit vectors; [`solve_exact`] enumerates small universes.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{GrammarInventory, SlotLevel};
use crate::matcher::Match;

/// Largest universe [`solve_exact`] will enumerate.
pub const EXACT_LIMIT: usize = 25;

/// Totals closer than this are treated as ties.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub s_syn: f64,
    pub s_sem: f64,
    pub s_lex: f64,
    pub t0: f64,
    pub tf: f64,
    pub k_max: usize,
    pub flip_ratio: f64,
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            w1: 1.0,
            w2: 0.4,
            w3: 0.3,
            s_syn: 1.0,
            s_sem: 1.2,
            s_lex: 1.5,
            t0: 1.0,
            tf: 0.01,
            k_max: 2000,
            flip_ratio: 0.3,
            seed: 0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w1, self.w2, self.w3, self.s_syn, self.s_sem, self.s_lex];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("weights and slot scores must be finite and non-negative".into()));
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::Config("t0 must be positive".into()));
        }
        if !(self.tf > 0.0 && self.tf < self.t0) {
            return Err(Error::Config("tf must lie in (0, t0)".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if !(self.flip_ratio > 0.0 && self.flip_ratio <= 1.0) {
            return Err(Error::Config("flip_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; unspecified keys keep their defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let config: SelectorConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn slot_score(&self, level: SlotLevel) -> f64 {
        match level {
            SlotLevel::Syntactic => self.s_syn,
            SlotLevel::Semantic => self.s_sem,
            SlotLevel::Lexical => self.s_lex,
        }
    }
}

/// The candidate matches of one sentence together with their slot levels.
#[derive(Clone, Debug)]
pub struct Universe {
    matches: Vec<Match>,
    levels: Vec<Vec<SlotLevel>>,
    width: usize,
}

impl Universe {
    pub fn new(matches: Vec<Match>, inventory: &GrammarInventory) -> Result<Self> {
        let levels = matches
            .iter()
            .map(|m| {
                let c = inventory.construction(m.construction_id)?;
                if c.len() != m.len() {
                    return Err(Error::Config(format!(
                        "match [{}, {}) does not fit {:?}",
                        m.start, m.end, c.label
                    )));
                }
                Ok(c.slots.iter().map(|s| s.level()).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_levels(matches, levels))
    }

    /// Builds a universe from explicit per-match slot levels.
    pub fn from_levels(matches: Vec<Match>, levels: Vec<Vec<SlotLevel>>) -> Self {
        assert_eq!(matches.len(), levels.len());
        for (m, l) in matches.iter().zip(&levels) {
            assert_eq!(m.len(), l.len(), "slot levels must cover the match span");
        }
        let width = matches.iter().map(|m| m.end).max().unwrap_or(0);
        Universe {
            matches,
            levels,
            width,
        }
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Mean slot score of match `i`.
    pub fn concreteness(&self, i: usize, config: &SelectorConfig) -> f64 {
        let levels = &self.levels[i];
        let sum: f64 = levels.iter().map(|&l| config.slot_score(l)).sum();
        sum / levels.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Selection {
    pub bits: Vec<bool>,
}

impl Selection {
    pub fn empty(n: usize) -> Self {
        Selection {
            bits: vec![false; n],
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn chosen<'u>(&self, universe: &'u Universe) -> Vec<&'u Match> {
        self.indices().map(|i| &universe.matches[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_ob1: usize,
    pub s_ob2: usize,
    pub s_ob3: f64,
    pub total: f64,
}

pub fn score(selection: &Selection, universe: &Universe, config: &SelectorConfig) -> ScoreBreakdown {
    assert_eq!(selection.bits.len(), universe.len());
    let mut covered = vec![false; universe.width];
    let mut mass = 0;
    let mut s_ob3 = 0.0;
    for i in selection.indices() {
        let m = &universe.matches[i];
        mass += m.len();
        covered[m.covered()].iter_mut().for_each(|c| *c = true);
        s_ob3 += universe.concreteness(i, config);
    }
    let s_ob1 = covered.iter().filter(|&&c| c).count();
    let s_ob2 = mass - s_ob1;
    ScoreBreakdown {
        s_ob1,
        s_ob2,
        s_ob3,
        total: combine(s_ob1, s_ob2, s_ob3, config),
    }
}

fn combine(s_ob1: usize, s_ob2: usize, s_ob3: f64, config: &SelectorConfig) -> f64 {
    config.w1 * s_ob1 as f64 - config.w2 * s_ob2 as f64 + config.w3 * s_ob3
}

/// Exponential cooling from `t0` at `k = 0` down to `tf` at `k = k_max`.
pub fn cool(t0: f64, tf: f64, k: usize, k_max: usize) -> f64 {
    t0 * (-(k as f64) * (t0 / tf).ln() / k_max as f64).exp()
}

/// Number of bits flipped at temperature `t`: `max(1, round(rho * n * t / t0))`, capped at `n`.
pub fn flip_count(n: usize, t: f64, config: &SelectorConfig) -> usize {
    let scaled = (config.flip_ratio * n as f64 * t / config.t0).round() as usize;
    scaled.max(1).min(n)
}

/// Flips `flip_count` distinct, uniformly chosen bits.
pub fn rand_flip<R: Rng + ?Sized>(
    selection: &Selection,
    t: f64,
    config: &SelectorConfig,
    rng: &mut R,
) -> Selection {
    let n = selection.bits.len();
    let mut out = selection.clone();
    if n == 0 {
        return out;
    }
    for i in index::sample(rng, n, flip_count(n, t, config)) {
        out.bits[i] = !out.bits[i];
    }
    out
}

/// Greedy start: repeatedly add the match with the largest positive marginal
/// gain in total score (lowest index on ties).
pub fn initial_feasible(universe: &Universe, config: &SelectorConfig) -> Selection {
    let mut current = Selection::empty(universe.len());
    let mut current_total = score(&current, universe, config).total;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..universe.len() {
            if current.bits[i] {
                continue;
            }
            current.bits[i] = true;
            let gain = score(&current, universe, config).total - current_total;
            current.bits[i] = false;
            if gain > 0.0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, _)) => {
                current.bits[i] = true;
                current_total = score(&current, universe, config).total;
            }
            None => return current,
        }
    }
}

/// One annealing step, recorded by [`solve_sa_traced`].
#[derive(Clone, Debug, PartialEq)]
pub struct SaStep {
    pub k: usize,
    pub temperature: f64,
    pub delta: f64,
    pub accepted: bool,
}

pub fn solve_sa(universe: &Universe, config: &SelectorConfig) -> Result<Selection> {
    solve_sa_inner(universe, config, None)
}

/// [`solve_sa`] plus the per-step trace.
pub fn solve_sa_traced(universe: &Universe, config: &SelectorConfig) -> Result<(Selection, Vec<SaStep>)> {
    let mut trace = Vec::with_capacity(config.k_max);
    let selection = solve_sa_inner(universe, config, Some(&mut trace))?;
    Ok((selection, trace))
}

fn solve_sa_inner(
    universe: &Universe,
    config: &SelectorConfig,
    mut trace: Option<&mut Vec<SaStep>>,
) -> Result<Selection> {
    if universe.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = initial_feasible(universe, config);
    let mut current_total = score(&current, universe, config).total;
    // Metropolis moves may walk downhill, so the best state visited is kept.
    let mut best = current.clone();
    let mut best_total = current_total;

    for k in 0..config.k_max {
        let t = cool(config.t0, config.tf, k, config.k_max);
        let candidate = rand_flip(&current, t, config, &mut rng);
        let candidate_total = score(&candidate, universe, config).total;
        let delta = candidate_total - current_total;
        let accepted = delta > 0.0 || rng.random::<f64>() <= (delta / t).exp();
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(SaStep {
                k,
                temperature: t,
                delta,
                accepted,
            });
        }
        if accepted {
            current = candidate;
            current_total = candidate_total;
            if current_total > best_total {
                best = current.clone();
                best_total = current_total;
            }
        }
    }
    Ok(best)
}

/// Exhaustive search over all subsets. Ties (within [`TIE_EPS`]) prefer fewer
/// matches, then the lexicographically smallest bit vector.
pub fn solve_exact(universe: &Universe, config: &SelectorConfig) -> Result<Selection> {
    let n = universe.len();
    if n > EXACT_LIMIT {
        return Err(Error::UniverseTooLarge {
            size: n,
            limit: EXACT_LIMIT,
        });
    }
    let concreteness: Vec<f64> = (0..n).map(|i| universe.concreteness(i, config)).collect();
    let mut search = ExactSearch {
        universe,
        config,
        concreteness,
        cover_count: vec![0; universe.width],
        bits: vec![false; n],
        best_bits: vec![false; n],
        best_total: f64::NEG_INFINITY,
        best_count: 0,
    };
    search.descend(0, 0, 0, 0, 0.0);
    Ok(Selection {
        bits: search.best_bits,
    })
}

struct ExactSearch<'a> {
    universe: &'a Universe,
    config: &'a SelectorConfig,
    concreteness: Vec<f64>,
    cover_count: Vec<u32>,
    bits: Vec<bool>,
    best_bits: Vec<bool>,
    best_total: f64,
    best_count: usize,
}

impl ExactSearch<'_> {
    // Leaves are reached in lexicographic bit order (exclude before include),
    // so on a full tie the incumbent is already the smallest vector.
    fn descend(&mut self, i: usize, count: usize, union: usize, mass: usize, s_ob3: f64) {
        if i == self.bits.len() {
            let total = combine(union, mass - union, s_ob3, self.config);
            let better = total > self.best_total + TIE_EPS
                || (total >= self.best_total - TIE_EPS && count < self.best_count);
            if better {
                self.best_total = total;
                self.best_count = count;
                self.best_bits.copy_from_slice(&self.bits);
            }
            return;
        }
        self.descend(i + 1, count, union, mass, s_ob3);

        let m = self.universe.matches[i].clone();
        let mut fresh = 0;
        for c in &mut self.cover_count[m.covered()] {
            if *c == 0 {
                fresh += 1;
            }
            *c += 1;
        }
        self.bits[i] = true;
        self.descend(
            i + 1,
            count + 1,
            union + fresh,
            mass + m.len(),
            s_ob3 + self.concreteness[i],
        );
        self.bits[i] = false;
        for c in &mut self.cover_count[m.covered()] {
            *c -= 1;
        }
    }
}

/// Drops selected matches, highest index first, whose removal leaves the
/// covered token set unchanged.
pub fn prune_redundant(universe: &Universe, selection: &Selection) -> Selection {
    let mut out = selection.clone();
    let mut cover_count = vec![0u32; universe.width];
    for i in out.indices() {
        for c in &mut cover_count[universe.matches[i].covered()] {
            *c += 1;
        }
    }
    for i in (0..out.bits.len()).rev() {
        if !out.bits[i] {
            continue;
        }
        let span = universe.matches[i].covered();
        if cover_count[span.clone()].iter().all(|&c| c > 1) {
            out.bits[i] = false;
            for c in &mut cover_count[span] {
                *c -= 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn syn_universe(spans: &[(usize, usize)]) -> Universe {
        let matches = spans.iter().map(|&(s, e)| Match::new(0, s, e)).collect::<Vec<_>>();
        let levels = spans
            .iter()
            .map(|&(s, e)| vec![SlotLevel::Syntactic; e - s])
            .collect();
        Universe::from_levels(matches, levels)
    }

    fn all(n: usize) -> Selection {
        Selection { bits: vec![true; n] }
    }

    #[test]
    fn score_of_three_spans() {
        let u = syn_universe(&[(0, 3), (2, 5), (7, 10)]);
        let s = score(&all(3), &u, &SelectorConfig::default());
        assert_eq!((s.s_ob1, s.s_ob2), (8, 1));
        assert!((s.s_ob3 - 3.0).abs() < 1e-12);
        assert!((s.total - 8.5).abs() < 1e-12);

        let empty = score(&Selection::empty(3), &u, &SelectorConfig::default());
        assert_eq!(
            empty,
            ScoreBreakdown {
                s_ob1: 0,
                s_ob2: 0,
                s_ob3: 0.0,
                total: 0.0
            }
        );
    }

    #[test]
    fn concreteness_is_mean_slot_score() {
        let u = Universe::from_levels(
            vec![Match::new(0, 0, 3)],
            vec![vec![SlotLevel::Syntactic, SlotLevel::Lexical, SlotLevel::Lexical]],
        );
        let s = score(&all(1), &u, &SelectorConfig::default());
        assert!((s.s_ob3 - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cooling_schedule() {
        assert_eq!(cool(1.0, 0.01, 0, 100), 1.0);
        assert!((cool(1.0, 0.01, 100, 100) - 0.01).abs() < 1e-15);
        assert!((cool(1.0, 0.01, 1, 2) - 0.1).abs() < 1e-15);
        for k in 0..100 {
            assert!(cool(2.0, 0.05, k + 1, 100) < cool(2.0, 0.05, k, 100));
        }
    }

    #[test]
    fn flip_counts() {
        let config = SelectorConfig {
            flip_ratio: 0.5,
            ..Default::default()
        };
        assert_eq!(flip_count(10, config.t0, &config), 5);
        let small = SelectorConfig {
            flip_ratio: 0.05,
            ..Default::default()
        };
        assert_eq!(flip_count(10, small.tf, &small), 1);
        assert_eq!(flip_count(3, 1.0, &SelectorConfig { flip_ratio: 1.0, ..Default::default() }), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let start = Selection::empty(10);
        let flipped = rand_flip(&start, config.t0, &config, &mut rng);
        assert_eq!(flipped.count(), 5);
        let cold = rand_flip(&start, small.tf, &small, &mut rng);
        assert_eq!(cold.count(), 1);
    }

    #[test]
    fn greedy_start() {
        let config = SelectorConfig::default();
        let disjoint = syn_universe(&[(0, 2), (2, 4), (5, 8)]);
        assert_eq!(initial_feasible(&disjoint, &config), all(3));

        // inner adds no coverage; its concreteness 0.3 loses to the 0.8 overlap penalty
        let nested = syn_universe(&[(0, 4), (1, 3)]);
        assert_eq!(initial_feasible(&nested, &config).bits, vec![true, false]);

        let empty = syn_universe(&[]);
        assert_eq!(initial_feasible(&empty, &config), Selection::empty(0));
    }

    #[test]
    fn exact_prefers_lexical_duplicate() {
        let u = Universe::from_levels(
            vec![Match::new(0, 0, 2), Match::new(1, 0, 2)],
            vec![vec![SlotLevel::Lexical; 2], vec![SlotLevel::Syntactic; 2]],
        );
        let config = SelectorConfig::default();
        assert_eq!(solve_exact(&u, &config).unwrap().bits, vec![true, false]);

        let single = syn_universe(&[(1, 3)]);
        assert_eq!(solve_exact(&single, &config).unwrap(), all(1));
        let disjoint = syn_universe(&[(0, 2), (2, 4), (5, 8)]);
        assert_eq!(solve_exact(&disjoint, &config).unwrap(), all(3));
    }

    #[test]
    fn exact_tie_break_prefers_fewer_matches() {
        // With w2 = w3 = 0 both {A} and {A, B} cover 3 tokens.
        let u = syn_universe(&[(0, 3), (1, 3)]);
        let config = SelectorConfig {
            w2: 0.0,
            w3: 0.0,
            ..Default::default()
        };
        assert_eq!(solve_exact(&u, &config).unwrap().bits, vec![true, false]);
        // Two equal-coverage singletons: the lexicographically smaller wins.
        let u = syn_universe(&[(0, 2), (0, 2)]);
        assert_eq!(solve_exact(&u, &config).unwrap().bits, vec![false, true]);
    }

    #[test]
    fn exact_guards_size() {
        let spans: Vec<_> = (0..26).map(|i| (i, i + 2)).collect();
        let u = syn_universe(&spans);
        assert!(matches!(
            solve_exact(&u, &SelectorConfig::default()),
            Err(Error::UniverseTooLarge { size: 26, .. })
        ));
    }

    #[test]
    fn sa_singleton_and_errors() {
        let config = SelectorConfig::default();
        let u = syn_universe(&[(0, 2)]);
        assert_eq!(solve_sa(&u, &config).unwrap(), all(1));
        assert!(matches!(solve_sa(&syn_universe(&[]), &config), Err(Error::EmptyUniverse)));
        let bad = SelectorConfig {
            tf: 2.0,
            ..Default::default()
        };
        assert!(solve_sa(&u, &bad).is_err());
    }

    #[test]
    fn sa_trace_accepts_every_improvement() {
        let u = syn_universe(&[(0, 3), (2, 5), (4, 6), (5, 9), (1, 2), (6, 8), (0, 9)]);
        for seed in 0..5 {
            let config = SelectorConfig {
                seed,
                k_max: 300,
                ..Default::default()
            };
            let (sel, trace) = solve_sa_traced(&u, &config).unwrap();
            assert_eq!(trace.len(), 300);
            assert!(trace.iter().filter(|s| s.delta > 0.0).all(|s| s.accepted));
            assert_eq!(sel, solve_sa(&u, &config).unwrap());
        }
    }

    #[test]
    fn config_file() {
        let c = SelectorConfig::parse_str("w2 = 0.5\nseed = 9\n# comment\nk_max = 10\n").unwrap();
        assert_eq!(c.w2, 0.5);
        assert_eq!(c.seed, 9);
        assert_eq!(c.k_max, 10);
        assert_eq!(c.w1, 1.0);
        assert!(SelectorConfig::parse_str("bogus = 1").is_err());
        assert!(SelectorConfig::parse_str("tf = 5.0").is_err());
    }

    #[test]
    fn pruning_keeps_coverage() {
        let u = syn_universe(&[(0, 3), (1, 3), (2, 5)]);
        let pruned = prune_redundant(&u, &all(3));
        assert_eq!(pruned.bits, vec![true, false, true]);
    }

    fn arb_universe() -> impl Strategy<Value = Universe> {
        prop::collection::vec((0usize..12, 2usize..5, prop::collection::vec(0u8..3, 5)), 1..9).prop_map(
            |specs| {
                let mut matches = Vec::new();
                let mut levels = Vec::new();
                for (i, (start, len, lv)) in specs.into_iter().enumerate() {
                    matches.push(Match::new(i, start, start + len));
                    levels.push(
                        lv[..len]
                            .iter()
                            .map(|l| match l {
                                0 => SlotLevel::Syntactic,
                                1 => SlotLevel::Semantic,
                                _ => SlotLevel::Lexical,
                            })
                            .collect(),
                    );
                }
                Universe::from_levels(matches, levels)
            },
        )
    }

    fn brute_force_best(u: &Universe, config: &SelectorConfig) -> f64 {
        (0u32..1 << u.len())
            .map(|mask| {
                let sel = Selection {
                    bits: (0..u.len()).map(|i| mask >> i & 1 == 1).collect(),
                };
                score(&sel, u, config).total
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    proptest! {
        #[test]
        fn total_is_weighted_sum(u in arb_universe(), mask in any::<u16>()) {
            let config = SelectorConfig::default();
            let sel = Selection { bits: (0..u.len()).map(|i| mask >> i & 1 == 1).collect() };
            let s = score(&sel, &u, &config);
            prop_assert_eq!(s.total, 1.0 * s.s_ob1 as f64 - 0.4 * s.s_ob2 as f64 + 0.3 * s.s_ob3);

            // independent recomputation of the components
            let chosen = sel.chosen(&u);
            let mut union = std::collections::BTreeSet::new();
            for m in &chosen { union.extend(m.covered()); }
            prop_assert_eq!(s.s_ob1, union.len());
            prop_assert_eq!(s.s_ob2, chosen.iter().map(|m| m.len()).sum::<usize>() - union.len());

            let disjoint = chosen.iter().enumerate().all(|(i, a)| {
                chosen[i + 1..].iter().all(|b| a.end <= b.start || b.end <= a.start)
            });
            if disjoint { prop_assert_eq!(s.s_ob2, 0); }
            let max_depth = (0..u.width)
                .map(|t| chosen.iter().filter(|m| m.covered().contains(&t)).count())
                .max()
                .unwrap_or(0);
            if max_depth <= 2 {
                let mut pairwise = 0;
                for (i, a) in chosen.iter().enumerate() {
                    for b in &chosen[i + 1..] {
                        pairwise += a.end.min(b.end).saturating_sub(a.start.max(b.start));
                    }
                }
                prop_assert_eq!(s.s_ob2, pairwise);
            }
        }

        #[test]
        fn exact_matches_brute_force(u in arb_universe()) {
            let config = SelectorConfig::default();
            let sel = solve_exact(&u, &config).unwrap();
            let got = score(&sel, &u, &config).total;
            prop_assert!((got - brute_force_best(&u, &config)).abs() < 1e-9);
        }

        #[test]
        fn exact_is_permutation_invariant(u in arb_universe(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let config = SelectorConfig::default();
            let mut order: Vec<usize> = (0..u.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permuted = Universe::from_levels(
                order.iter().map(|&i| u.matches[i].clone()).collect(),
                order.iter().map(|&i| u.levels[i].clone()).collect(),
            );
            let a = solve_exact(&u, &config).unwrap();
            let b = solve_exact(&permuted, &config).unwrap();
            let ta = score(&a, &u, &config).total;
            let tb = score(&b, &permuted, &config).total;
            prop_assert!((ta - tb).abs() < 1e-9);
            prop_assert_eq!(a.count(), b.count());
            // when the optimum is unique the same matches are chosen
            let optima = (0u32..1 << u.len())
                .filter(|mask| {
                    let sel = Selection { bits: (0..u.len()).map(|i| mask >> i & 1 == 1).collect() };
                    (score(&sel, &u, &config).total - ta).abs() < 1e-9
                })
                .count();
            if optima == 1 {
                let mut ma: Vec<_> = a.chosen(&u).into_iter().cloned().collect();
                let mut mb: Vec<_> = b.chosen(&permuted).into_iter().cloned().collect();
                ma.sort();
                mb.sort();
                prop_assert_eq!(ma, mb);
            }
        }

        #[test]
        fn sa_never_below_greedy_and_is_deterministic(u in arb_universe(), seed in any::<u64>()) {
            let config = SelectorConfig { seed, k_max: 400, ..Default::default() };
            let sa = solve_sa(&u, &config).unwrap();
            let greedy = initial_feasible(&u, &config);
            prop_assert!(score(&sa, &u, &config).total >= score(&greedy, &u, &config).total);
            prop_assert_eq!(sa, solve_sa(&u, &config).unwrap());
        }

        #[test]
        fn flipping_twice_restores(bits in prop::collection::vec(any::<bool>(), 1..20), seed in any::<u64>()) {
            let config = SelectorConfig::default();
            let sel = Selection { bits };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let flipped = rand_flip(&sel, 0.5, &config, &mut rng);
            let differing: Vec<usize> = (0..sel.bits.len()).filter(|&i| sel.bits[i] != flipped.bits[i]).collect();
            prop_assert_eq!(differing.len(), flip_count(sel.bits.len(), 0.5, &config));
            let mut back = flipped.clone();
            for i in differing { back.bits[i] = !back.bits[i]; }
            prop_assert_eq!(back, sel);
        }
    }
}
