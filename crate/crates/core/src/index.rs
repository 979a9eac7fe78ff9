//! Keyword index (token to graph elements) and graph index (entity to
//! summary class and co-member similarities).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::codec::{escape, unescape};
use crate::rdf::{local_name, RdfGraph, Term, RDF_TYPE};
use crate::similarity::SimilarityMatrix;
use crate::summary::{ClassId, SummaryGraph};
use crate::text::AnalysisConfig;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("entity {0} is missing from the summary partition")]
    Unclassified(String),
    #[error("unsupported index format: {0}")]
    Version(String),
    #[error("index line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Entity,
    Class,
    Property,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    IriLocalName,
    LiteralValue,
    PredicateLabel,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Entity => "entity",
            ElementKind::Class => "class",
            ElementKind::Property => "property",
            ElementKind::Literal => "literal",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "entity" => ElementKind::Entity,
            "class" => ElementKind::Class,
            "property" => ElementKind::Property,
            "literal" => ElementKind::Literal,
            _ => return None,
        })
    }
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::IriLocalName => "iri-local-name",
            Field::LiteralValue => "literal-value",
            Field::PredicateLabel => "predicate-label",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "iri-local-name" => Field::IriLocalName,
            "literal-value" => Field::LiteralValue,
            "predicate-label" => Field::PredicateLabel,
            _ => return None,
        })
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One posting. `anchor` is the subject entity the element attaches to and
/// `target` is the matched element itself (node key or predicate IRI).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphElementRef {
    pub anchor: String,
    pub kind: ElementKind,
    pub field: Field,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeywordIndex {
    postings: BTreeMap<String, Vec<GraphElementRef>>,
}

impl KeywordIndex {
    /// Indexes subject local names, literal values anchored to their
    /// subject, predicate labels anchored to every subject carrying the
    /// predicate, and `rdf:type` object names as class postings.
    pub fn build(g: &RdfGraph, analysis: &AnalysisConfig) -> Self {
        // (token, anchor, kind) -> smallest ref, so each token counts once
        // per entity and kind
        let mut dedup: BTreeMap<(String, String, ElementKind), GraphElementRef> = BTreeMap::new();
        let mut add = |text: &str, r: GraphElementRef| {
            for token in analysis.analyze(text) {
                let key = (token, r.anchor.clone(), r.kind);
                match dedup.get(&key) {
                    Some(existing) if existing <= &r => {}
                    _ => {
                        dedup.insert(key, r.clone());
                    }
                }
            }
        };
        for s in g.subjects() {
            let anchor = g.term(s).key();
            if let Term::Iri(iri) = g.term(s) {
                add(
                    iri.local_name(),
                    GraphElementRef {
                        anchor: anchor.clone(),
                        kind: ElementKind::Entity,
                        field: Field::IriLocalName,
                        target: anchor.clone(),
                    },
                );
            }
            for (p, objs) in g.out_edges(s) {
                let pred = g.predicate(p).as_str();
                add(
                    local_name(pred),
                    GraphElementRef {
                        anchor: anchor.clone(),
                        kind: ElementKind::Property,
                        field: Field::PredicateLabel,
                        target: pred.to_string(),
                    },
                );
                for &o in objs {
                    match g.term(o) {
                        Term::Literal(lit) => add(
                            &lit.lexical_form,
                            GraphElementRef {
                                anchor: anchor.clone(),
                                kind: ElementKind::Literal,
                                field: Field::LiteralValue,
                                target: g.term(o).key(),
                            },
                        ),
                        Term::Iri(class) if pred == RDF_TYPE => add(
                            class.local_name(),
                            GraphElementRef {
                                anchor: anchor.clone(),
                                kind: ElementKind::Class,
                                field: Field::IriLocalName,
                                target: class.as_str().to_string(),
                            },
                        ),
                        _ => {}
                    }
                }
            }
        }
        let mut postings: BTreeMap<String, Vec<GraphElementRef>> = BTreeMap::new();
        for ((token, _, _), r) in dedup {
            postings.entry(token).or_default().push(r);
        }
        for list in postings.values_mut() {
            list.sort();
        }
        KeywordIndex { postings }
    }

    /// Postings for an already-normalized token.
    pub fn lookup(&self, token: &str) -> &[GraphElementRef] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn token_count(&self) -> usize {
        self.postings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GraphElementRef)> {
        self.postings
            .iter()
            .flat_map(|(t, refs)| refs.iter().map(move |r| (t.as_str(), r)))
    }

    /// `token \t kind \t anchor \t field \t target`, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# semsearch keyword-index v1\n");
        for (token, r) in self.iter() {
            let _ = writeln!(out, "{token}\t{}\t{}\t{}\t{}", r.kind, escape(&r.anchor), r.field, escape(&r.target));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, IndexError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "# semsearch keyword-index v1")) => {}
            other => return Err(IndexError::Version(other.map(|(_, l)| l.to_string()).unwrap_or_default())),
        }
        let mut postings: BTreeMap<String, Vec<GraphElementRef>> = BTreeMap::new();
        for (i, line) in lines {
            let err = |message: &str| IndexError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let parts: Vec<&str> = line.split('\t').collect();
            let [token, kind, anchor, field, target] = parts.as_slice() else {
                return Err(err("expected 5 columns"));
            };
            postings.entry(token.to_string()).or_default().push(GraphElementRef {
                anchor: unescape(anchor),
                kind: ElementKind::parse(kind).ok_or_else(|| err("unknown kind"))?,
                field: Field::parse(field).ok_or_else(|| err("unknown field"))?,
                target: unescape(target),
            });
        }
        Ok(KeywordIndex { postings })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEntry {
    pub class: ClassId,
    /// Other members of the class with their pair similarity, highest first.
    pub co_members: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphIndex {
    entries: BTreeMap<String, GraphEntry>,
}

impl GraphIndex {
    /// Materializes every classified node's class and co-member scores.
    /// Co-members that are not a candidate pair carry score 0.
    pub fn build(g: &RdfGraph, sg: &SummaryGraph, sim: &SimilarityMatrix) -> Result<Self, IndexError> {
        for s in g.subjects() {
            let key = g.term(s).key();
            if sg.class_of(&key).is_none() {
                return Err(IndexError::Unclassified(key));
            }
        }
        let mut entries = BTreeMap::new();
        for class in &sg.classes {
            let ids: Vec<_> = class
                .members
                .iter()
                .map(|m| node_for_key(g, m).ok_or_else(|| IndexError::Unclassified(m.clone())))
                .collect::<Result<_, _>>()?;
            for (i, member) in class.members.iter().enumerate() {
                let mut co: Vec<(String, f64)> = class
                    .members
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, other)| (other.clone(), sim.score(ids[i], ids[j])))
                    .collect();
                co.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                entries.insert(
                    member.clone(),
                    GraphEntry {
                        class: class.id,
                        co_members: co,
                    },
                );
            }
        }
        Ok(GraphIndex { entries })
    }

    pub fn get(&self, entity: &str) -> Option<&GraphEntry> {
        self.entries.get(entity)
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.entries.contains_key(entity)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GraphEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `entity \t class_id \t member=score,...` with full-precision scores.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# semsearch graph-index v1\n");
        for (entity, e) in &self.entries {
            let co: Vec<String> = e.co_members.iter().map(|(m, s)| format!("{}={s}", escape(m))).collect();
            let _ = writeln!(out, "{}\t{}\t{}", escape(entity), e.class.0, co.join(","));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, IndexError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "# semsearch graph-index v1")) => {}
            other => return Err(IndexError::Version(other.map(|(_, l)| l.to_string()).unwrap_or_default())),
        }
        let mut entries = BTreeMap::new();
        for (i, line) in lines {
            let err = |message: &str| IndexError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let parts: Vec<&str> = line.split('\t').collect();
            let [entity, class, co] = parts.as_slice() else {
                return Err(err("expected 3 columns"));
            };
            let class: u32 = class.parse().map_err(|_| err("bad class id"))?;
            let mut co_members = Vec::new();
            if !co.is_empty() {
                for item in co.split(',') {
                    let (m, s) = item.split_once('=').ok_or_else(|| err("expected member=score"))?;
                    let s: f64 = s.parse().map_err(|_| err("bad score"))?;
                    co_members.push((unescape(m), s));
                }
            }
            entries.insert(
                unescape(entity),
                GraphEntry {
                    class: ClassId(class),
                    co_members,
                },
            );
        }
        Ok(GraphIndex { entries })
    }
}

fn node_for_key(g: &RdfGraph, key: &str) -> Option<crate::rdf::NodeId> {
    let term = match key.strip_prefix("_:") {
        Some(label) => Term::Blank(label.to_string()),
        None => Term::Iri(crate::rdf::Iri::new(key)?),
    };
    g.node_id(&term)
}

/// Every anchor and target must name a live node or predicate.
pub fn dangling_refs(g: &RdfGraph, ki: &KeywordIndex) -> Vec<GraphElementRef> {
    let nodes: BTreeSet<String> = g.node_ids().map(|n| g.term(n).key()).collect();
    let preds: BTreeSet<&str> = g.predicate_ids().map(|p| g.predicate(p).as_str()).collect();
    ki.iter()
        .map(|(_, r)| r)
        .filter(|r| {
            let target_ok = match r.kind {
                ElementKind::Property => preds.contains(r.target.as_str()),
                _ => nodes.contains(&r.target),
            };
            !(nodes.contains(&r.anchor) && target_ok)
        })
        .cloned()
        .collect()
}
