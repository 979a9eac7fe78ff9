//! Iterative pairwise similarity of subject nodes.
//!
//! For a candidate pair `(u, v)` the score at iteration `k` is
//!
//! ```text
//! (1 - beta) / |P(u) ∪ P(v)| * Σ_{j ∈ P(u) ∩ P(v)} w_j * match_j(u, v) + beta
//! ```
//!
//! where `P(.)` is the set of outgoing predicate labels and `match_j` is the
//! best maximal nonrepeating matching between the `j`-neighborhoods, scored
//! with the iteration `k - 1` similarities and normalized by
//! `|N_u^j| + |N_v^j| - |M|`. Neighbor scores are the previous pair score for
//! two subject nodes, idf-weighted token overlap for two literals, 1 for a
//! node with itself, and 0 for everything else.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::matching::{max_matching_value, MatchingProblem};
use crate::rdf::{NodeId, PredId, RdfGraph, Term};
use crate::text::{AnalysisConfig, IdfTable};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("beta must lie in (0, 1), got {0}")]
    Beta(f64),
    #[error("max_iterations must be positive")]
    MaxIterations,
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("similarity table line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub exact_matching_limit: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            beta: 0.15,
            max_iterations: 10,
            epsilon: 1e-4,
            exact_matching_limit: 8,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SimilarityError::Beta(self.beta));
        }
        if self.max_iterations == 0 {
            return Err(SimilarityError::MaxIterations);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SimilarityError::Epsilon(self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    #[default]
    Uniform,
    Rarity,
}

impl WeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Uniform => "uniform",
            WeightMode::Rarity => "rarity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(WeightMode::Uniform),
            "rarity" => Some(WeightMode::Rarity),
            _ => None,
        }
    }
}

/// Per-predicate weights in `(0, 1]`, indexed by predicate id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateWeights {
    mode: WeightMode,
    weights: Vec<f64>,
}

impl PredicateWeights {
    pub fn uniform(predicate_count: usize) -> Self {
        PredicateWeights {
            mode: WeightMode::Uniform,
            weights: vec![1.0; predicate_count],
        }
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn get(&self, p: PredId) -> f64 {
        self.weights.get(p.index()).copied().unwrap_or(1.0)
    }
}

/// Uniform mode gives every predicate weight 1. Rarity mode uses
/// `ln((1 + S) / (1 + s_j)) + 1` over subject counts, scaled so the rarest
/// predicate gets weight 1.
pub fn compute_predicate_weights(g: &RdfGraph, mode: WeightMode) -> PredicateWeights {
    match mode {
        WeightMode::Uniform => PredicateWeights::uniform(g.predicate_count()),
        WeightMode::Rarity => {
            let mut carriers = vec![0usize; g.predicate_count()];
            let mut subjects = 0usize;
            for s in g.subjects() {
                subjects += 1;
                for (p, _) in g.out_edges(s) {
                    carriers[p.index()] += 1;
                }
            }
            let raw: Vec<f64> = carriers
                .iter()
                .map(|&c| ((1.0 + subjects as f64) / (1.0 + c as f64)).ln() + 1.0)
                .collect();
            let max = raw.iter().copied().fold(1.0, f64::max);
            PredicateWeights {
                mode,
                weights: raw.into_iter().map(|w| w / max).collect(),
            }
        }
    }
}

/// Unordered subject pairs sharing at least one outgoing predicate, each
/// stored as `(min, max)` and sorted.
pub fn candidate_pairs(g: &RdfGraph) -> Vec<(NodeId, NodeId)> {
    let mut carriers: Vec<Vec<NodeId>> = vec![Vec::new(); g.predicate_count()];
    let subjects: Vec<NodeId> = g.subjects().collect();
    for &s in &subjects {
        for (p, _) in g.out_edges(s) {
            carriers[p.index()].push(s);
        }
    }
    let mut pairs = Vec::new();
    for &u in &subjects {
        let mut partners: BTreeSet<NodeId> = BTreeSet::new();
        for (p, _) in g.out_edges(u) {
            partners.extend(carriers[p.index()].iter().copied().filter(|&v| v > u));
        }
        pairs.extend(partners.into_iter().map(|v| (u, v)));
    }
    pairs
}

/// Sparse symmetric score table over candidate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    iteration: usize,
    pairs: Vec<(NodeId, NodeId)>,
    scores: Vec<f64>,
    index: HashMap<(NodeId, NodeId), usize>,
    /// Largest absolute change per iteration, starting at iteration 1.
    pub deltas: Vec<f64>,
    /// Pairs whose score used the greedy matching fallback in the last step.
    pub approximate: BTreeSet<(NodeId, NodeId)>,
    pub converged: bool,
}

fn ordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SimilarityMatrix {
    /// Iteration-0 matrix: every candidate pair at 1.
    pub fn initial(pairs: Vec<(NodeId, NodeId)>) -> Self {
        let scores = vec![1.0; pairs.len()];
        Self::from_scores(0, pairs, scores)
    }

    /// Matrix with explicit scores; pairs are stored in `(min, max)` order.
    pub fn from_scores(iteration: usize, pairs: Vec<(NodeId, NodeId)>, scores: Vec<f64>) -> Self {
        assert_eq!(pairs.len(), scores.len());
        let pairs: Vec<_> = pairs.into_iter().map(|(a, b)| ordered(a, b)).collect();
        let index = pairs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        SimilarityMatrix {
            iteration,
            pairs,
            scores,
            index,
            deltas: Vec::new(),
            approximate: BTreeSet::new(),
            converged: false,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Score of a candidate pair in either order.
    pub fn get(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.index.get(&ordered(a, b)).map(|&i| self.scores[i])
    }

    /// Score with absent pairs read as 0.
    pub fn score(&self, a: NodeId, b: NodeId) -> f64 {
        self.get(a, b).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.pairs.iter().copied().zip(self.scores.iter().copied())
    }

    pub fn max_abs_diff(&self, other: &SimilarityMatrix) -> f64 {
        debug_assert_eq!(self.pairs, other.pairs);
        self.scores
            .iter()
            .zip(&other.scores)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Versioned table sorted by node key, scores with 6 decimals.
    pub fn to_tsv(&self, g: &RdfGraph, header: &SimilarityHeader) -> String {
        let mut rows: Vec<(String, String, f64)> = self
            .iter()
            .map(|((a, b), s)| {
                let (ka, kb) = (g.term(a).key(), g.term(b).key());
                if ka <= kb {
                    (ka, kb, s)
                } else {
                    (kb, ka, s)
                }
            })
            .collect();
        rows.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        let mut out = String::from("# semsearch similarity v1\n");
        let _ = writeln!(
            out,
            "# beta={} k={} epsilon={} weights={}",
            header.beta,
            header.iteration,
            header.epsilon,
            header.weight_mode.as_str()
        );
        for (a, b, s) in rows {
            let _ = writeln!(out, "{a}\t{b}\t{s:.6}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityHeader {
    pub beta: f64,
    pub iteration: usize,
    pub epsilon: f64,
    pub weight_mode: WeightMode,
}

/// `(node key, node key, score)` as read back from a similarity table.
pub type ScoreRow = (String, String, f64);

/// Reads a persisted similarity table back into header and rows.
pub fn read_similarity_tsv(text: &str) -> Result<(SimilarityHeader, Vec<ScoreRow>), SimilarityError> {
    let err = |line: usize, message: &str| SimilarityError::Format {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some("# semsearch similarity v1") {
        return Err(err(1, "missing or unsupported version header"));
    }
    let params = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| err(2, "missing parameter header"))?;
    let mut kv: HashMap<&str, &str> = HashMap::new();
    for part in params.split(' ') {
        let (k, v) = part.split_once('=').ok_or_else(|| err(2, "malformed parameter"))?;
        kv.insert(k, v);
    }
    let header = SimilarityHeader {
        beta: kv.get("beta").and_then(|v| v.parse().ok()).ok_or_else(|| err(2, "beta"))?,
        iteration: kv.get("k").and_then(|v| v.parse().ok()).ok_or_else(|| err(2, "k"))?,
        epsilon: kv.get("epsilon").and_then(|v| v.parse().ok()).ok_or_else(|| err(2, "epsilon"))?,
        weight_mode: kv
            .get("weights")
            .and_then(|v| WeightMode::parse(v))
            .ok_or_else(|| err(2, "weights"))?,
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next().and_then(|s| s.parse::<f64>().ok())) {
            (Some(a), Some(b), Some(s)) => rows.push((a.to_string(), b.to_string(), s)),
            _ => return Err(err(i + 3, "expected node_a, node_b, score")),
        }
    }
    Ok((header, rows))
}

/// Token ids of each literal node, sorted, with per-token idf weights.
struct LiteralProfiles {
    tokens: HashMap<NodeId, Vec<u32>>,
    idf: Vec<f64>,
}

impl LiteralProfiles {
    fn build(g: &RdfGraph, idf: &IdfTable, analysis: &AnalysisConfig) -> Self {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut weights = Vec::new();
        let mut tokens = HashMap::new();
        for n in g.node_ids() {
            if let Term::Literal(lit) = g.term(n) {
                let mut ids: Vec<u32> = analysis
                    .analyze(&lit.lexical_form)
                    .into_iter()
                    .map(|t| {
                        let next = vocab.len() as u32;
                        *vocab.entry(t.clone()).or_insert_with(|| {
                            weights.push(idf.idf(&t));
                            next
                        })
                    })
                    .collect();
                ids.sort_unstable();
                tokens.insert(n, ids);
            }
        }
        LiteralProfiles { tokens, idf: weights }
    }

    fn sim(&self, x: NodeId, y: NodeId) -> f64 {
        let (Some(a), Some(b)) = (self.tokens.get(&x), self.tokens.get(&y)) else {
            return 0.0;
        };
        let (mut i, mut j) = (0, 0);
        let (mut shared, mut union) = (0.0, 0.0);
        while i < a.len() || j < b.len() {
            let take = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x == y => {
                    shared += self.idf[*x as usize];
                    i += 1;
                    j += 1;
                    *x
                }
                (Some(x), Some(y)) if x < y => {
                    i += 1;
                    *x
                }
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (_, Some(y)) => {
                    j += 1;
                    *y
                }
                (None, None) => unreachable!(),
            };
            union += self.idf[take as usize];
        }
        if union == 0.0 {
            0.0
        } else {
            shared / union
        }
    }
}

/// Precomputed parts of one pair's update: the predicate-union size, the
/// weighted sum of predicates whose neighborhoods hold no subject nodes on
/// both sides (their matching value never changes), and the predicates that
/// must be re-matched each iteration.
struct PairPlan {
    union: u32,
    static_sum: f64,
    static_approximate: bool,
    dynamic: Box<[PredId]>,
}

/// Holds everything the iteration needs for one graph.
pub struct SimilarityEngine<'g> {
    graph: &'g RdfGraph,
    weights: PredicateWeights,
    config: SimilarityConfig,
    literals: LiteralProfiles,
    /// Outgoing adjacency per node sorted by predicate id.
    profiles: Vec<Vec<(PredId, &'g [NodeId])>>,
}

impl<'g> SimilarityEngine<'g> {
    pub fn new(
        graph: &'g RdfGraph,
        idf: &IdfTable,
        analysis: &AnalysisConfig,
        weights: PredicateWeights,
        config: SimilarityConfig,
    ) -> Result<Self, SimilarityError> {
        config.validate()?;
        let profiles = graph
            .node_ids()
            .map(|n| {
                let mut edges: Vec<(PredId, &[NodeId])> = graph.out_edges(n).collect();
                edges.sort_unstable_by_key(|(p, _)| *p);
                edges
            })
            .collect();
        Ok(SimilarityEngine {
            graph,
            weights,
            config,
            literals: LiteralProfiles::build(graph, idf, analysis),
            profiles,
        })
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.config
    }

    pub fn weights(&self) -> &PredicateWeights {
        &self.weights
    }

    /// Neighbor similarity read from the previous iteration's matrix.
    pub fn neighbor_sim(&self, prev: &SimilarityMatrix, x: NodeId, y: NodeId) -> f64 {
        if x == y {
            return 1.0;
        }
        match (self.graph.term(x), self.graph.term(y)) {
            (Term::Literal(_), Term::Literal(_)) => self.literals.sim(x, y),
            (Term::Literal(_), _) | (_, Term::Literal(_)) => 0.0,
            _ => prev.score(x, y),
        }
    }

    fn match_predicate(&self, prev: &SimilarityMatrix, nu: &[NodeId], nv: &[NodeId]) -> (f64, bool) {
        let problem = MatchingProblem::from_fn(nu.len(), nv.len(), |r, c| self.neighbor_sim(prev, nu[r], nv[c]));
        let m = max_matching_value(&problem, self.config.exact_matching_limit);
        (m.value, m.approximate)
    }

    /// One update of a single pair against `prev`. Accepts any pair,
    /// including a node with itself and pairs outside the candidate set.
    /// Returns the score and whether greedy matching was needed.
    pub fn pair_value(&self, prev: &SimilarityMatrix, u: NodeId, v: NodeId) -> (f64, bool) {
        let (u, v) = ordered(u, v);
        let (pu, pv) = (&self.profiles[u.index()], &self.profiles[v.index()]);
        let mut union = 0usize;
        let mut sum = 0.0;
        let mut approximate = false;
        let (mut i, mut j) = (0, 0);
        while i < pu.len() || j < pv.len() {
            union += 1;
            match (pu.get(i), pv.get(j)) {
                (Some((p, nu)), Some((q, nv))) if p == q => {
                    let (value, approx) = self.match_predicate(prev, nu, nv);
                    sum += value * self.weights.get(*p);
                    approximate |= approx;
                    i += 1;
                    j += 1;
                }
                (Some((p, _)), Some((q, _))) if p < q => i += 1,
                (Some(_), None) => i += 1,
                _ => j += 1,
            }
        }
        let beta = self.config.beta;
        if union == 0 {
            return (beta, false);
        }
        ((1.0 - beta) * (sum / union as f64) + beta, approximate)
    }

    fn has_subject(&self, nodes: &[NodeId]) -> bool {
        nodes.iter().any(|&n| self.graph.is_subject(n))
    }

    fn plan(&self, prev: &SimilarityMatrix, u: NodeId, v: NodeId) -> PairPlan {
        let (pu, pv) = (&self.profiles[u.index()], &self.profiles[v.index()]);
        let mut plan = PairPlan {
            union: 0,
            static_sum: 0.0,
            static_approximate: false,
            dynamic: Box::new([]),
        };
        let mut dynamic = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < pu.len() || j < pv.len() {
            plan.union += 1;
            match (pu.get(i), pv.get(j)) {
                (Some((p, nu)), Some((q, nv))) if p == q => {
                    if self.has_subject(nu) && self.has_subject(nv) {
                        dynamic.push(*p);
                    } else {
                        let (value, approx) = self.match_predicate(prev, nu, nv);
                        plan.static_sum += value * self.weights.get(*p);
                        plan.static_approximate |= approx;
                    }
                    i += 1;
                    j += 1;
                }
                (Some((p, _)), Some((q, _))) if p < q => i += 1,
                (Some(_), None) => i += 1,
                _ => j += 1,
            }
        }
        plan.dynamic = dynamic.into_boxed_slice();
        plan
    }

    fn planned_value(&self, prev: &SimilarityMatrix, plan: &PairPlan, u: NodeId, v: NodeId) -> (f64, bool) {
        let mut sum = plan.static_sum;
        let mut approximate = plan.static_approximate;
        for &p in plan.dynamic.iter() {
            let (value, approx) = self.match_predicate(prev, self.graph.neighbors(u, p), self.graph.neighbors(v, p));
            sum += value * self.weights.get(p);
            approximate |= approx;
        }
        let beta = self.config.beta;
        ((1.0 - beta) * (sum / plan.union as f64) + beta, approximate)
    }

    /// Computes iteration `k` from the frozen `k - 1` matrix.
    pub fn step(&self, prev: &SimilarityMatrix) -> SimilarityMatrix {
        let results: Vec<(f64, bool)> = map_pairs(&prev.pairs, |&(u, v)| self.pair_value(prev, u, v));
        self.assemble(prev, results)
    }

    fn assemble(&self, prev: &SimilarityMatrix, results: Vec<(f64, bool)>) -> SimilarityMatrix {
        let mut approximate = BTreeSet::new();
        let mut scores = Vec::with_capacity(results.len());
        for (pair, (score, approx)) in prev.pairs.iter().zip(results) {
            if approx {
                approximate.insert(*pair);
            }
            scores.push(score);
        }
        let mut next = SimilarityMatrix::from_scores(prev.iteration + 1, prev.pairs.clone(), scores);
        next.approximate = approximate;
        next
    }

    /// Iterates from the all-ones start until the largest change is at most
    /// `epsilon` or `max_iterations` steps have run.
    pub fn compute(&self) -> SimilarityMatrix {
        let mut current = SimilarityMatrix::initial(candidate_pairs(self.graph));
        let plans: Vec<PairPlan> = map_pairs(&current.pairs, |&(u, v)| self.plan(&current, u, v));
        let mut deltas = Vec::new();
        let mut converged = false;
        for _ in 0..self.config.max_iterations {
            let results = map_indexed(&current.pairs, |i, &(u, v)| self.planned_value(&current, &plans[i], u, v));
            let next = self.assemble(&current, results);
            let delta = next.max_abs_diff(&current);
            deltas.push(delta);
            current = next;
            log::debug!("similarity iteration {} max delta {delta:.3e}", current.iteration);
            if delta <= self.config.epsilon {
                converged = true;
                break;
            }
        }
        current.deltas = deltas;
        current.converged = converged;
        if !current.approximate.is_empty() {
            log::info!("{} pairs scored with greedy matching", current.approximate.len());
        }
        current
    }
}

pub fn compute_similarity(
    graph: &RdfGraph,
    idf: &IdfTable,
    analysis: &AnalysisConfig,
    weights: PredicateWeights,
    config: SimilarityConfig,
) -> Result<SimilarityMatrix, SimilarityError> {
    Ok(SimilarityEngine::new(graph, idf, analysis, weights, config)?.compute())
}

#[cfg(feature = "parallel")]
fn map_pairs<T: Send>(pairs: &[(NodeId, NodeId)], f: impl Fn(&(NodeId, NodeId)) -> T + Sync + Send) -> Vec<T> {
    pairs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_pairs<T>(pairs: &[(NodeId, NodeId)], f: impl Fn(&(NodeId, NodeId)) -> T) -> Vec<T> {
    pairs.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn map_indexed<T: Send>(pairs: &[(NodeId, NodeId)], f: impl Fn(usize, &(NodeId, NodeId)) -> T + Sync + Send) -> Vec<T> {
    pairs.par_iter().enumerate().map(|(i, p)| f(i, p)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T>(pairs: &[(NodeId, NodeId)], f: impl Fn(usize, &(NodeId, NodeId)) -> T) -> Vec<T> {
    pairs.iter().enumerate().map(|(i, p)| f(i, p)).collect()
}
