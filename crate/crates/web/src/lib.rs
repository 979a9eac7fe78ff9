//! Browser demo: build a search index from pasted N-Triples, run keyword
//! queries and inspect the equivalence classes.

use semsearch::pipeline::{self, Build, PipelineConfig};
use semsearch::rdf::{parse_ntriples_str, ParseMode};
use semsearch::text::AnalysisConfig;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub const PLANTS_ATHLETES: &str = include_str!("../../../data/plants_athletes.nt");
pub const PHILOSOPHERS: &str = include_str!("../../../data/philosophers.nt");

/// Build state shared by the wasm wrapper and native tests.
pub struct Session {
    build: Build,
    skipped: usize,
}

impl Session {
    pub fn new(ntriples: &str, beta: f64, tau: f64, sigma: f64) -> Result<Session, String> {
        let (graph, stats) = parse_ntriples_str(ntriples, ParseMode::Lenient).map_err(|e| e.to_string())?;
        if graph.triple_count() == 0 {
            return Err("no triples found".into());
        }
        let config = PipelineConfig {
            beta,
            tau,
            sigma,
            ..Default::default()
        };
        let build = pipeline::build(&graph, &config, AnalysisConfig::default()).map_err(|e| e.to_string())?;
        Ok(Session {
            build,
            skipped: stats.skipped,
        })
    }

    pub fn stats(&self) -> Value {
        let s = &self.build.stats;
        json!({
            "triples": s.triples,
            "subjects": s.subjects,
            "candidate_pairs": s.candidate_pairs,
            "iterations": s.iterations,
            "converged": s.converged,
            "classes": s.classes,
            "summary_edges": s.summary_edges,
            "skipped_lines": self.skipped,
        })
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Value, String> {
        let mut cfg = self.build.config.search();
        cfg.k = k;
        let results = self.build.engine().search_with(query, &cfg).map_err(|e| e.to_string())?;
        Ok(Value::Array(results.iter().map(|r| r.to_json()).collect()))
    }

    /// Classes with more than one member, largest first, each with the
    /// similarity of every member pair, plus the summary edges.
    pub fn classes(&self) -> Value {
        let summary = &self.build.summary;
        let mut classes: Vec<_> = summary.classes.iter().filter(|c| c.members.len() > 1).collect();
        classes.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then(a.id.cmp(&b.id)));
        let classes: Vec<Value> = classes
            .iter()
            .map(|c| {
                let mut pairs = Vec::new();
                for (i, a) in c.members.iter().enumerate() {
                    if let Some(entry) = self.build.graph_index.get(a) {
                        for (b, sim) in &entry.co_members {
                            if c.members[i + 1..].contains(b) {
                                pairs.push(json!([a, b, sim]));
                            }
                        }
                    }
                }
                json!({ "id": c.id.0, "members": c.members, "pairs": pairs })
            })
            .collect();
        let edges: Vec<Value> = summary.edges.iter().map(|(s, p, o)| json!([s.0, p, o.0])).collect();
        json!({ "classes": classes, "edges": edges })
    }
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(ntriples: &str, beta: f64, tau: f64, sigma: f64) -> Result<Demo, JsValue> {
        Session::new(ntriples, beta, tau, sigma)
            .map(|session| Demo { session })
            .map_err(|e| JsValue::from_str(&e))
    }

    pub fn stats(&self) -> String {
        self.session.stats().to_string()
    }

    pub fn search(&self, query: &str, k: usize) -> Result<String, JsValue> {
        self.session
            .search(query, k)
            .map(|v| v.to_string())
            .map_err(|e| JsValue::from_str(&e))
    }

    pub fn classes(&self) -> String {
        self.session.classes().to_string()
    }
}

#[wasm_bindgen]
pub fn sample(name: &str) -> String {
    match name {
        "philosophers" => PHILOSOPHERS,
        _ => PLANTS_ATHLETES,
    }
    .to_string()
}
