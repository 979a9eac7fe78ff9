//! Query execution: keyword hits, same-class augmentation and ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::index::{ElementKind, Field, GraphIndex, KeywordIndex};
use crate::text::AnalysisConfig;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("query has no searchable keywords")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("sigma must lie in (0, 1), got {0}")]
    Sigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub k: usize,
    pub sigma: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { k: 10, sigma: 0.3 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::ZeroK);
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(SearchError::Sigma(self.sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub raw: String,
    /// Normalized keywords in query order, without repeats.
    pub keywords: Vec<String>,
}

impl Query {
    pub fn parse(raw: &str, analysis: &AnalysisConfig) -> Result<Self, SearchError> {
        let keywords = analysis.analyze(raw);
        if keywords.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        Ok(Query {
            raw: raw.to_string(),
            keywords,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    pub entity: String,
    /// Number of distinct query keywords matched.
    pub hitcount: usize,
    pub matched_fields: BTreeSet<(String, ElementKind, Field)>,
}

/// Hits per anchor entity, ordered by hitcount (highest first) then IRI.
pub fn find_query_hits(q: &Query, ki: &KeywordIndex) -> Vec<Hit> {
    type Matches<'a> = (BTreeSet<&'a str>, BTreeSet<(String, ElementKind, Field)>);
    let mut by_entity: BTreeMap<&str, Matches> = BTreeMap::new();
    for kw in &q.keywords {
        for r in ki.lookup(kw) {
            let (keywords, fields) = by_entity.entry(r.anchor.as_str()).or_default();
            keywords.insert(kw.as_str());
            fields.insert((kw.clone(), r.kind, r.field));
        }
    }
    let mut hits: Vec<Hit> = by_entity
        .into_iter()
        .map(|(entity, (keywords, matched_fields))| Hit {
            entity: entity.to_string(),
            hitcount: keywords.len(),
            matched_fields,
        })
        .collect();
    hits.sort_by(|a, b| b.hitcount.cmp(&a.hitcount).then_with(|| a.entity.cmp(&b.entity)));
    hits
}

/// Fraction of query keywords the hit covers.
pub fn score_direct(h: &Hit, q: &Query) -> f64 {
    h.hitcount as f64 / q.keywords.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Direct,
    Augmented { via: String, sim: f64 },
}

impl Provenance {
    fn rank(&self) -> u8 {
        match self {
            Provenance::Direct => 0,
            Provenance::Augmented { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultEntry {
    pub entity: String,
    /// Relevance confidence in `(0, 1]`.
    pub confidence: f64,
    pub provenance: Provenance,
    /// How many hits produced this entity, directly or through augmentation.
    pub hitcount: usize,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    iri: &'a str,
    confidence: f64,
    provenance: &'static str,
    via: Option<&'a str>,
}

impl ResultEntry {
    pub fn via(&self) -> Option<&str> {
        match &self.provenance {
            Provenance::Direct => None,
            Provenance::Augmented { via, .. } => Some(via),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ResultLine {
            iri: &self.entity,
            confidence: self.confidence,
            provenance: match self.provenance {
                Provenance::Direct => "direct",
                Provenance::Augmented { .. } => "augmented",
            },
            via: self.via(),
        })
        .expect("result serializes")
    }
}

fn better(candidate: &ResultEntry, current: &ResultEntry) -> bool {
    match candidate.confidence.total_cmp(&current.confidence) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => candidate.provenance.rank() < current.provenance.rank(),
    }
}

/// Emits each hit and its same-class co-members with similarity at least
/// `sigma`, merges duplicates keeping the highest confidence, ranks and
/// truncates to `k`.
pub fn get_top_k_nodes(hits: &[Hit], q: &Query, gi: &GraphIndex, cfg: &SearchConfig) -> Vec<ResultEntry> {
    let mut merged: HashMap<String, ResultEntry> = HashMap::new();
    let mut offer = |entry: ResultEntry| match merged.get_mut(&entry.entity) {
        Some(existing) => {
            let count = existing.hitcount + 1;
            if better(&entry, existing) {
                *existing = entry;
            }
            existing.hitcount = count;
        }
        None => {
            merged.insert(entry.entity.clone(), entry);
        }
    };
    for hit in hits {
        let direct = score_direct(hit, q);
        offer(ResultEntry {
            entity: hit.entity.clone(),
            confidence: direct,
            provenance: Provenance::Direct,
            hitcount: 1,
        });
        let Some(entry) = gi.get(&hit.entity) else { continue };
        for (neighbor, sim) in &entry.co_members {
            // co-members are sorted by similarity, highest first
            if *sim < cfg.sigma {
                break;
            }
            offer(ResultEntry {
                entity: neighbor.clone(),
                confidence: sim * direct,
                provenance: Provenance::Augmented {
                    via: hit.entity.clone(),
                    sim: *sim,
                },
                hitcount: 1,
            });
        }
    }
    let mut results: Vec<ResultEntry> = merged.into_values().collect();
    results.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.provenance.rank().cmp(&b.provenance.rank()))
            .then_with(|| a.entity.cmp(&b.entity))
    });
    results.truncate(cfg.k);
    results
}

/// Read-only query engine over a keyword index and a graph index.
#[derive(Debug, Clone)]
pub struct SearchEngine {
    pub analysis: AnalysisConfig,
    pub keyword_index: KeywordIndex,
    pub graph_index: GraphIndex,
    pub config: SearchConfig,
}

impl SearchEngine {
    pub fn new(analysis: AnalysisConfig, keyword_index: KeywordIndex, graph_index: GraphIndex, config: SearchConfig) -> Self {
        SearchEngine {
            analysis,
            keyword_index,
            graph_index,
            config,
        }
    }

    pub fn search(&self, querystring: &str) -> Result<Vec<ResultEntry>, SearchError> {
        self.search_with(querystring, &self.config)
    }

    pub fn search_k(&self, querystring: &str, k: usize) -> Result<Vec<ResultEntry>, SearchError> {
        self.search_with(querystring, &SearchConfig { k, ..self.config })
    }

    pub fn search_with(&self, querystring: &str, cfg: &SearchConfig) -> Result<Vec<ResultEntry>, SearchError> {
        cfg.validate()?;
        let q = Query::parse(querystring, &self.analysis)?;
        let hits = find_query_hits(&q, &self.keyword_index);
        Ok(get_top_k_nodes(&hits, &q, &self.graph_index, cfg))
    }
}

/// Human-readable table: rank, IRI, confidence percentage, provenance.
pub fn render_table(results: &[ResultEntry]) -> String {
    let width = results.iter().map(|r| r.entity.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:>4}  {:<width$}  {:>7}  provenance\n", "rank", "iri", "conf");
    for (i, r) in results.iter().enumerate() {
        let prov = match &r.provenance {
            Provenance::Direct => "direct".to_string(),
            Provenance::Augmented { via, sim } => format!("via {via} (sim {sim:.3})"),
        };
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>6.1}%  {prov}", i + 1, r.entity, r.confidence * 100.0);
    }
    out
}

/// One JSON object per line.
pub fn render_json_lines(results: &[ResultEntry]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&r.to_json().to_string());
        out.push('\n');
    }
    out
}
