//! Precision, recall and F-measure over a gold relevance file, per query
//! and macro-averaged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::search::SearchEngine;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("recall is undefined without relevant items")]
    NoRelevant,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("gold file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("gold set has no queries")]
    EmptyGold,
}

/// `tp / (tp + fp)`, or 0 when nothing was returned.
pub fn precision(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

pub fn recall(tp: usize, fn_: usize) -> Result<f64, EvalError> {
    if tp + fn_ == 0 {
        return Err(EvalError::NoRelevant);
    }
    Ok(tp as f64 / (tp + fn_) as f64)
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Query text to relevant IRIs, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldSet {
    pub entries: Vec<(String, BTreeSet<String>)>,
}

impl GoldSet {
    /// Lines of `query \t iri1,iri2,...`; `#` lines and blank lines skipped.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: &str| EvalError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (query, iris) = line.split_once('\t').ok_or_else(|| err("expected query<TAB>iris"))?;
            let relevant: BTreeSet<String> = iris
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            if relevant.is_empty() {
                return Err(err("relevant set is empty"));
            }
            entries.push((query.trim().to_string(), relevant));
        }
        if entries.is_empty() {
            return Err(EvalError::EmptyGold);
        }
        Ok(GoldSet { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryEval {
    pub query: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl QueryEval {
    pub fn from_sets(query: &str, returned: &[String], relevant: &BTreeSet<String>) -> Result<Self, EvalError> {
        let returned: BTreeSet<&String> = returned.iter().collect();
        let tp = returned.iter().filter(|r| relevant.contains(**r)).count();
        let fp = returned.len() - tp;
        let fn_ = relevant.len() - tp;
        let p = precision(tp, fp);
        let r = recall(tp, fn_)?;
        Ok(QueryEval {
            query: query.to_string(),
            precision: p,
            recall: r,
            f_measure: f_measure(p, r),
            tp,
            fp,
            fn_,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub per_query: Vec<QueryEval>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of per-query F-measures.
    pub macro_f_measure: f64,
    /// F-measure of the macro precision and recall.
    pub f_of_macro_means: f64,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn from_queries(k: usize, per_query: Vec<QueryEval>, warnings: Vec<String>) -> Self {
        let n = per_query.len().max(1) as f64;
        let mean = |f: fn(&QueryEval) -> f64| per_query.iter().map(f).sum::<f64>() / n;
        let macro_precision = mean(|q| q.precision);
        let macro_recall = mean(|q| q.recall);
        let macro_f_measure = mean(|q| q.f_measure);
        EvalReport {
            k,
            macro_precision,
            macro_recall,
            macro_f_measure,
            f_of_macro_means: f_measure(macro_precision, macro_recall),
            per_query,
            warnings,
        }
    }

    pub fn render_table(&self) -> String {
        let width = self.per_query.iter().map(|q| q.query.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>6}  {:>9}  {:>3}  {:>3}  {:>3}\n",
            "query", "precision", "recall", "f-measure", "tp", "fp", "fn"
        );
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.3}  {:>6.3}  {:>9.3}  {:>3}  {:>3}  {:>3}",
                q.query, q.precision, q.recall, q.f_measure, q.tp, q.fp, q.fn_
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.3}  {:>6.3}  {:>9.3}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f_measure
        );
        let _ = writeln!(out, "F of macro P/R: {:.3} (k = {})", self.f_of_macro_means, self.k);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Anything that answers a query with a ranked list of IRIs.
pub trait Retriever {
    /// Ranked IRIs; an invalid query yields `Err` with a message.
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>, String>;

    /// Whether the IRI names a known entity.
    fn knows(&self, _iri: &str) -> bool {
        true
    }
}

impl Retriever for SearchEngine {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>, String> {
        self.search_k(query, k)
            .map(|rs| rs.into_iter().map(|r| r.entity).collect())
            .map_err(|e| e.to_string())
    }

    fn knows(&self, iri: &str) -> bool {
        self.graph_index.contains(iri)
    }
}

/// Runs every gold query at cutoff `k`. Unknown gold IRIs and rejected
/// queries become warnings; unanswered relevant items count as misses.
pub fn evaluate<R: Retriever + ?Sized>(engine: &R, gold: &GoldSet, k: usize) -> Result<EvalReport, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let mut warnings = Vec::new();
    let mut per_query = Vec::with_capacity(gold.entries.len());
    for (query, relevant) in &gold.entries {
        for iri in relevant {
            if !engine.knows(iri) {
                warnings.push(format!("query {query:?}: gold IRI {iri} is not in the graph"));
            }
        }
        let returned = match engine.retrieve(query, k) {
            Ok(r) => r,
            Err(msg) => {
                warnings.push(format!("query {query:?}: {msg}"));
                Vec::new()
            }
        };
        per_query.push(QueryEval::from_sets(query, &returned, relevant)?);
    }
    Ok(EvalReport::from_queries(k, per_query, warnings))
}

/// Fixed answers per query; handy for checking the bookkeeping.
impl Retriever for BTreeMap<String, Vec<String>> {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>, String> {
        Ok(self.get(query).map(|v| v.iter().take(k).cloned().collect()).unwrap_or_default())
    }
}
