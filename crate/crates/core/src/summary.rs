//! Equivalence classes of graph nodes and the class-level summary graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::codec::{escape, unescape};
use crate::rdf::{NodeId, RdfGraph, Term};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("tau must lie in (0, 1], got {0}")]
    Tau(f64),
    #[error("tau {tau} must exceed beta {beta}")]
    TauBelowBeta { tau: f64, beta: f64 },
    #[error("unsupported summary format: {0}")]
    Version(String),
    #[error("summary line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("node {0} appears in more than one class")]
    Overlap(String),
    #[error("class {0} is empty")]
    EmptyClass(u32),
    #[error("edge refers to unknown class {0}")]
    UnknownClass(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub tau: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { tau: 0.7 }
    }
}

impl ClusterConfig {
    pub fn validate(&self, beta: f64) -> Result<(), SummaryError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(SummaryError::Tau(self.tau));
        }
        if self.tau <= beta {
            return Err(SummaryError::TauBelowBeta { tau: self.tau, beta });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub id: ClassId,
    /// Node keys, sorted; the first one is the representative.
    pub members: Vec<String>,
}

impl EquivalenceClass {
    pub fn representative(&self) -> &str {
        &self.members[0]
    }
}

/// Disjoint-set forest with path halving and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Single-link closure: nodes joined by any pair scoring at least `tau`
/// share a class. Returned groups are sorted by representative key.
pub fn cluster(g: &RdfGraph, sim: &SimilarityMatrix, cfg: &ClusterConfig, nodes: &[NodeId]) -> Vec<Vec<NodeId>> {
    let position: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut uf = UnionFind::new(nodes.len());
    for ((a, b), score) in sim.iter() {
        if score >= cfg.tau {
            if let (Some(&i), Some(&j)) = (position.get(&a), position.get(&b)) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(*n);
    }
    let mut classes: Vec<(String, Vec<NodeId>)> = groups
        .into_values()
        .map(|mut members| {
            members.sort_by_key(|n| g.term(*n).key());
            (g.term(members[0]).key(), members)
        })
        .collect();
    classes.sort_by(|a, b| a.0.cmp(&b.0));
    classes.into_iter().map(|(_, m)| m).collect()
}

/// `G' = (V', L', E')`: classes plus labeled class-to-class edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryGraph {
    pub tau: f64,
    pub beta: f64,
    pub classes: Vec<EquivalenceClass>,
    pub edges: BTreeSet<(ClassId, String, ClassId)>,
    membership: HashMap<String, ClassId>,
}

impl SummaryGraph {
    pub fn empty(tau: f64, beta: f64) -> Self {
        SummaryGraph {
            tau,
            beta,
            classes: Vec::new(),
            edges: BTreeSet::new(),
            membership: HashMap::new(),
        }
    }

    fn from_parts(
        tau: f64,
        beta: f64,
        classes: Vec<EquivalenceClass>,
        edges: BTreeSet<(ClassId, String, ClassId)>,
    ) -> Result<Self, SummaryError> {
        let mut membership = HashMap::new();
        for c in &classes {
            if c.members.is_empty() {
                return Err(SummaryError::EmptyClass(c.id.0));
            }
            for m in &c.members {
                if membership.insert(m.clone(), c.id).is_some() {
                    return Err(SummaryError::Overlap(m.clone()));
                }
            }
        }
        let ids: BTreeSet<ClassId> = classes.iter().map(|c| c.id).collect();
        for (a, _, b) in &edges {
            for id in [a, b] {
                if !ids.contains(id) {
                    return Err(SummaryError::UnknownClass(id.0));
                }
            }
        }
        Ok(SummaryGraph {
            tau,
            beta,
            classes,
            edges,
            membership,
        })
    }

    pub fn class_of(&self, key: &str) -> Option<ClassId> {
        self.membership.get(key).copied()
    }

    pub fn class(&self, id: ClassId) -> Option<&EquivalenceClass> {
        self.classes.get(id.0 as usize).filter(|c| c.id == id)
    }

    pub fn member_count(&self) -> usize {
        self.classes.iter().map(|c| c.members.len()).sum()
    }

    /// Versioned text form: header, one class per line, then edges.
    /// Member keys are percent-escaped.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# semsearch summary v1\n");
        let _ = writeln!(out, "tau\t{}", self.tau);
        let _ = writeln!(out, "beta\t{}", self.beta);
        let _ = writeln!(out, "classes\t{}", self.classes.len());
        for c in &self.classes {
            let members: Vec<String> = c.members.iter().map(|m| escape(m)).collect();
            let _ = writeln!(out, "{}\t{}", c.id.0, members.join(","));
        }
        for (a, p, b) in &self.edges {
            let _ = writeln!(out, "{}\t{}\t{}", a.0, p, b.0);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SummaryError> {
        let mut lines = text.lines().enumerate();
        let fmt = |line: usize, message: &str| SummaryError::Format {
            line: line + 1,
            message: message.to_string(),
        };
        match lines.next() {
            Some((_, "# semsearch summary v1")) => {}
            Some((_, other)) => return Err(SummaryError::Version(other.to_string())),
            None => return Err(SummaryError::Version(String::new())),
        }
        let mut header = |name: &str| -> Result<String, SummaryError> {
            let (i, line) = lines.next().ok_or_else(|| fmt(usize::MAX - 1, "truncated header"))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix('\t'))
                .map(str::to_string)
                .ok_or_else(|| fmt(i, &format!("expected {name}")))
        };
        let tau: f64 = header("tau")?.parse().map_err(|_| fmt(1, "bad tau"))?;
        let beta: f64 = header("beta")?.parse().map_err(|_| fmt(2, "bad beta"))?;
        let count: usize = header("classes")?.parse().map_err(|_| fmt(3, "bad class count"))?;
        let mut classes = Vec::with_capacity(count);
        let mut edges = BTreeSet::new();
        for (i, line) in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                [id, members] if classes.len() < count => {
                    let id: u32 = id.parse().map_err(|_| fmt(i, "bad class id"))?;
                    if id as usize != classes.len() {
                        return Err(fmt(i, "class ids must be consecutive"));
                    }
                    let members: Vec<String> = if members.is_empty() {
                        Vec::new()
                    } else {
                        members.split(',').map(unescape).collect()
                    };
                    classes.push(EquivalenceClass {
                        id: ClassId(id),
                        members,
                    });
                }
                [a, p, b] if classes.len() == count => {
                    let a: u32 = a.parse().map_err(|_| fmt(i, "bad class id"))?;
                    let b: u32 = b.parse().map_err(|_| fmt(i, "bad class id"))?;
                    edges.insert((ClassId(a), p.to_string(), ClassId(b)));
                }
                _ => return Err(fmt(i, "unexpected line")),
            }
        }
        if classes.len() != count {
            return Err(fmt(0, "class count does not match header"));
        }
        Self::from_parts(tau, beta, classes, edges)
    }
}

/// Builds `G'` from subject classes. Object-only non-literal nodes become
/// singleton classes; literals are not classified and produce no edges.
pub fn build_summary(
    g: &RdfGraph,
    subject_classes: &[Vec<NodeId>],
    tau: f64,
    beta: f64,
) -> Result<SummaryGraph, SummaryError> {
    let mut groups: Vec<Vec<NodeId>> = subject_classes.to_vec();
    let classified: BTreeSet<NodeId> = groups.iter().flatten().copied().collect();
    for n in g.node_ids() {
        if !classified.contains(&n) && !g.term(n).is_literal() {
            groups.push(vec![n]);
        }
    }
    let mut keyed: Vec<(Vec<String>, Vec<NodeId>)> = groups
        .into_iter()
        .map(|nodes| {
            let mut keys: Vec<String> = nodes.iter().map(|n| g.term(*n).key()).collect();
            keys.sort();
            (keys, nodes)
        })
        .collect();
    keyed.sort_by(|a, b| a.0[0].cmp(&b.0[0]));

    let mut node_class: HashMap<NodeId, ClassId> = HashMap::new();
    let mut classes = Vec::with_capacity(keyed.len());
    for (i, (keys, nodes)) in keyed.into_iter().enumerate() {
        let id = ClassId(i as u32);
        for n in nodes {
            node_class.insert(n, id);
        }
        classes.push(EquivalenceClass { id, members: keys });
    }

    let mut edges = BTreeSet::new();
    for s in g.node_ids() {
        let Some(&cs) = node_class.get(&s) else { continue };
        for (p, objs) in g.out_edges(s) {
            for o in objs {
                if let Some(&co) = node_class.get(o) {
                    edges.insert((cs, g.predicate(p).as_str().to_string(), co));
                }
            }
        }
    }
    SummaryGraph::from_parts(tau, beta, classes, edges)
}

/// Checks both directions of the edge correspondence and the partition
/// against the base graph. Returns a description of the first violation.
pub fn verify_summary(g: &RdfGraph, sg: &SummaryGraph) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for n in g.node_ids() {
        let key = g.term(n).key();
        match (g.term(n), sg.class_of(&key)) {
            (Term::Literal(_), Some(_)) => return Err(format!("literal {key} is classified")),
            (Term::Literal(_), None) => {}
            (_, None) => return Err(format!("node {key} has no class")),
            (_, Some(_)) => {
                seen.insert(key);
            }
        }
    }
    if seen.len() != sg.member_count() {
        return Err("summary has members absent from the graph".into());
    }
    let mut witnessed = BTreeSet::new();
    for t in g.triples() {
        if t.object.is_literal() {
            continue;
        }
        let cs = sg.class_of(&t.subject.key()).ok_or("unclassified subject")?;
        let co = sg.class_of(&t.object.key()).ok_or("unclassified object")?;
        let edge = (cs, t.predicate.as_str().to_string(), co);
        if !sg.edges.contains(&edge) {
            return Err(format!("triple {t} has no summary edge"));
        }
        witnessed.insert(edge);
    }
    if let Some(e) = sg.edges.iter().find(|e| !witnessed.contains(*e)) {
        return Err(format!("summary edge {e:?} has no witness triple"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_ntriples_str, ParseMode};

    fn graph(doc: &str) -> RdfGraph {
        parse_ntriples_str(doc, ParseMode::FailFast).unwrap().0
    }

    fn abc() -> (RdfGraph, Vec<NodeId>) {
        let g = graph("<http://x/a> <http://x/p> \"1\" .\n<http://x/b> <http://x/p> \"2\" .\n<http://x/c> <http://x/p> \"3\" .\n");
        let nodes: Vec<NodeId> = g.subjects().collect();
        (g, nodes)
    }

    fn matrix(nodes: &[NodeId], scores: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let pairs: Vec<_> = scores.iter().map(|&(a, b, _)| (nodes[a], nodes[b])).collect();
        SimilarityMatrix::from_scores(1, pairs, scores.iter().map(|s| s.2).collect())
    }

    #[test]
    fn no_merges_below_tau() {
        let (g, n) = abc();
        let m = matrix(&n, &[(0, 1, 0.5), (1, 2, 0.69)]);
        let classes = cluster(&g, &m, &ClusterConfig::default(), &n);
        assert_eq!(classes.len(), 3);
    }

    #[test]
    fn single_merge() {
        let (g, n) = abc();
        let m = matrix(&n, &[(0, 1, 0.9)]);
        let classes = cluster(&g, &m, &ClusterConfig::default(), &n);
        assert_eq!(classes, vec![vec![n[0], n[1]], vec![n[2]]]);
    }

    #[test]
    fn single_link_is_transitive() {
        let (g, n) = abc();
        let m = matrix(&n, &[(0, 1, 0.8), (1, 2, 0.8), (0, 2, 0.1)]);
        let classes = cluster(&g, &m, &ClusterConfig::default(), &n);
        assert_eq!(classes, vec![vec![n[0], n[1], n[2]]]);
    }

    #[test]
    fn summary_edges() {
        let g = graph(
            "<http://x/a> <http://x/p> <http://x/b> .\n<http://x/a2> <http://x/p> <http://x/b2> .\n<http://x/a> <http://x/q> <http://x/a2> .\n<http://x/a> <http://x/r> \"lit\" .\n",
        );
        let id = |s: &str| g.node_id(&Term::iri(s)).unwrap();
        let groups = vec![vec![id("http://x/a"), id("http://x/a2")]];
        let mut sg = build_summary(&g, &groups, 0.7, 0.15).unwrap();
        // b and b2 are object-only singletons
        assert_eq!(sg.classes.len(), 3);
        let ca = sg.class_of("http://x/a").unwrap();
        let cb = sg.class_of("http://x/b").unwrap();
        let cb2 = sg.class_of("http://x/b2").unwrap();
        assert!(sg.edges.contains(&(ca, "http://x/p".into(), cb)));
        assert!(sg.edges.contains(&(ca, "http://x/p".into(), cb2)));
        assert!(sg.edges.contains(&(ca, "http://x/q".into(), ca)));
        assert_eq!(sg.edges.len(), 3);
        verify_summary(&g, &sg).unwrap();

        let groups = vec![vec![id("http://x/a"), id("http://x/a2")], vec![id("http://x/b"), id("http://x/b2")]];
        sg = build_summary(&g, &groups, 0.7, 0.15).unwrap();
        assert_eq!(sg.edges.iter().filter(|e| e.1 == "http://x/p").count(), 1);
        verify_summary(&g, &sg).unwrap();
    }

    #[test]
    fn text_round_trip_and_validation() {
        let g = graph("<http://x/a,1> <http://x/p> <http://x/b%> .\n");
        let groups: Vec<Vec<NodeId>> = g.subjects().map(|n| vec![n]).collect();
        let sg = build_summary(&g, &groups, 0.7, 0.15).unwrap();
        let back = SummaryGraph::from_text(&sg.to_text()).unwrap();
        assert_eq!(back, sg);

        let empty = SummaryGraph::empty(0.7, 0.15);
        assert_eq!(SummaryGraph::from_text(&empty.to_text()).unwrap(), empty);

        let overlapping = "# semsearch summary v1\ntau\t0.7\nbeta\t0.15\nclasses\t2\n0\tx,y\n1\ty\n";
        assert_eq!(SummaryGraph::from_text(overlapping), Err(SummaryError::Overlap("y".into())));
        let wrong_version = "# semsearch summary v2\n";
        assert!(matches!(SummaryGraph::from_text(wrong_version), Err(SummaryError::Version(_))));
        let dangling = "# semsearch summary v1\ntau\t0.7\nbeta\t0.15\nclasses\t1\n0\tx\n0\tp\t4\n";
        assert_eq!(SummaryGraph::from_text(dangling), Err(SummaryError::UnknownClass(4)));
    }

    #[test]
    fn tau_validation() {
        assert!(ClusterConfig { tau: 0.7 }.validate(0.15).is_ok());
        assert_eq!(ClusterConfig { tau: 0.1 }.validate(0.15), Err(SummaryError::TauBelowBeta { tau: 0.1, beta: 0.15 }));
        assert!(ClusterConfig { tau: 1.2 }.validate(0.15).is_err());
    }
}
