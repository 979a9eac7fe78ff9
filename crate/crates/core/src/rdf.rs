//! RDF terms, an N-Triples reader/writer and the in-memory graph.
//!
//! The graph is a directed labeled multigraph `G = (V, L, E)`: every subject
//! and object term is a node with a stable integer id, predicates are
//! interned labels, and each node keeps its outgoing edges grouped by
//! predicate in insertion order. Duplicate triples collapse to one edge.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("read error at line {line}: {message}")]
    Io { line: usize, message: String },
}

/// An absolute IRI with the angle brackets stripped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri(String);

impl Iri {
    /// Rejects empty values and values containing whitespace.
    pub fn new(value: impl Into<String>) -> Option<Self> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Iri(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Text after the last `/` or `#`; the whole IRI when neither occurs or
    /// the IRI ends with a separator.
    pub fn local_name(&self) -> &str {
        local_name(&self.0)
    }
}

pub(crate) fn local_name(iri: &str) -> &str {
    let trimmed = iri.trim_end_matches(['/', '#']);
    match trimmed.rfind(['/', '#']) {
        Some(pos) => &trimmed[pos + 1..],
        None => trimmed,
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub lexical_form: String,
    pub datatype: Option<Iri>,
    pub language_tag: Option<String>,
}

impl Literal {
    pub fn plain(lexical_form: impl Into<String>) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: None,
            language_tag: None,
        }
    }

    /// Language-tagged string; the datatype is always `rdf:langString`.
    pub fn lang(lexical_form: impl Into<String>, tag: impl Into<String>) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: Some(Iri(RDF_LANG_STRING.to_string())),
            language_tag: Some(tag.into()),
        }
    }

    pub fn typed(lexical_form: impl Into<String>, datatype: Iri) -> Self {
        Literal {
            lexical_form: lexical_form.into(),
            datatype: Some(datatype),
            language_tag: None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        for c in self.lexical_form.chars() {
            match c {
                '"' => f.write_str("\\\"")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\r' => f.write_str("\\r")?,
                '\t' => f.write_str("\\t")?,
                c => write!(f, "{c}")?,
            }
        }
        f.write_str("\"")?;
        if let Some(tag) = &self.language_tag {
            write!(f, "@{tag}")
        } else if let Some(dt) = &self.datatype {
            write!(f, "^^{dt}")
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Blank(String),
    Literal(Literal),
}

impl Term {
    pub fn iri(value: &str) -> Self {
        Term::Iri(Iri::new(value).expect("valid IRI"))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    /// Stable textual key used in persisted artifacts: the bare IRI,
    /// `_:label` for blank nodes and the N-Triples form for literals.
    pub fn key(&self) -> String {
        match self {
            Term::Iri(iri) => iri.0.clone(),
            Term::Blank(label) => format!("_:{label}"),
            Term::Literal(lit) => lit.to_string(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Blank(label) => write!(f, "_:{label}"),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Iri,
    pub object: Term,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PredId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    FailFast,
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines: usize,
    pub triples: usize,
    pub duplicates: usize,
    pub skipped: usize,
    /// Errors for skipped lines in lenient mode.
    pub errors: Vec<ParseError>,
}

/// Directed labeled multigraph built from a set of triples.
#[derive(Debug, Clone, Default)]
pub struct RdfGraph {
    nodes: IndexSet<Term>,
    predicates: IndexSet<Iri>,
    out: Vec<IndexMap<PredId, Vec<NodeId>>>,
    edges: HashSet<(NodeId, PredId, NodeId)>,
}

impl RdfGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Self {
        let mut g = RdfGraph::new();
        for t in triples {
            g.insert(t);
        }
        g
    }

    fn intern_node(&mut self, term: Term) -> NodeId {
        let (idx, fresh) = self.nodes.insert_full(term);
        if fresh {
            self.out.push(IndexMap::new());
        }
        NodeId(idx as u32)
    }

    /// Adds a triple; returns false when it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let s = self.intern_node(triple.subject);
        let o = self.intern_node(triple.object);
        let (p, _) = self.predicates.insert_full(triple.predicate);
        let p = PredId(p as u32);
        let inserted = self.edges.insert((s, p, o));
        if inserted {
            self.out[s.index()].entry(p).or_default().push(o);
        }
        inserted
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    pub fn triple_count(&self) -> usize {
        self.edges.len()
    }

    pub fn term(&self, id: NodeId) -> &Term {
        &self.nodes[id.index()]
    }

    pub fn predicate(&self, id: PredId) -> &Iri {
        &self.predicates[id.index()]
    }

    pub fn node_id(&self, term: &Term) -> Option<NodeId> {
        self.nodes.get_index_of(term).map(|i| NodeId(i as u32))
    }

    pub fn predicate_id(&self, iri: &Iri) -> Option<PredId> {
        self.predicates.get_index_of(iri).map(|i| PredId(i as u32))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn predicate_ids(&self) -> impl Iterator<Item = PredId> {
        (0..self.predicates.len() as u32).map(PredId)
    }

    /// Nodes with at least one outgoing edge.
    pub fn subjects(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|n| !self.out[n.index()].is_empty())
    }

    pub fn is_subject(&self, node: NodeId) -> bool {
        self.out.get(node.index()).is_some_and(|m| !m.is_empty())
    }

    /// Objects `o` with `(u, p, o)` in insertion order; empty for unknown
    /// nodes or predicates.
    pub fn neighbors(&self, u: NodeId, p: PredId) -> &[NodeId] {
        self.out
            .get(u.index())
            .and_then(|m| m.get(&p))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Outgoing adjacency of `u` grouped by predicate.
    pub fn out_edges(&self, u: NodeId) -> impl Iterator<Item = (PredId, &[NodeId])> {
        self.out
            .get(u.index())
            .into_iter()
            .flat_map(|m| m.iter().map(|(p, objs)| (*p, objs.as_slice())))
    }

    /// Predicates with at least one outgoing edge from `u`, sorted by id.
    pub fn predicate_labels(&self, u: NodeId) -> Vec<PredId> {
        let mut labels: Vec<PredId> = self
            .out
            .get(u.index())
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default();
        labels.sort_unstable();
        labels
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_edges(u).map(|(_, objs)| objs.len()).sum()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.node_ids().flat_map(move |s| {
            self.out_edges(s).flat_map(move |(p, objs)| {
                objs.iter().map(move |o| Triple {
                    subject: self.term(s).clone(),
                    predicate: self.predicate(p).clone(),
                    object: self.term(*o).clone(),
                })
            })
        })
    }

    pub fn triple_set(&self) -> HashSet<Triple> {
        self.triples().collect()
    }

    /// N-Triples serialization with lines sorted, so the output is the
    /// same for any insertion order.
    pub fn to_ntriples(&self) -> String {
        let mut lines: Vec<String> = self.triples().map(|t| t.to_string()).collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    /// Rebuilds the graph with nodes and predicates numbered in sorted
    /// order, giving ids that do not depend on input line order.
    pub fn canonical(&self) -> RdfGraph {
        let mut triples: Vec<Triple> = self.triples().collect();
        triples.sort();
        let mut terms: Vec<&Term> = self.nodes.iter().collect();
        terms.sort();
        let mut preds: Vec<&Iri> = self.predicates.iter().collect();
        preds.sort();
        let mut g = RdfGraph::new();
        for t in terms {
            g.intern_node(t.clone());
        }
        for p in preds {
            g.predicates.insert(p.clone());
        }
        for t in triples {
            g.insert(t);
        }
        g
    }
}

/// Parses a whole N-Triples document held in memory.
pub fn parse_ntriples_str(input: &str, mode: ParseMode) -> Result<(RdfGraph, ParseStats), ParseError> {
    parse_ntriples(input.as_bytes(), mode)
}

/// Reads N-Triples line by line. In fail-fast mode the first malformed line
/// aborts; in lenient mode malformed lines are skipped and counted.
pub fn parse_ntriples<R: BufRead>(reader: R, mode: ParseMode) -> Result<(RdfGraph, ParseStats), ParseError> {
    let mut graph = RdfGraph::new();
    let mut stats = ParseStats::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ParseError::Io {
            line: line_no,
            message: e.to_string(),
        })?;
        stats.lines += 1;
        match parse_line(&line, line_no) {
            Ok(Some(triple)) => {
                stats.triples += 1;
                if !graph.insert(triple) {
                    stats.duplicates += 1;
                }
            }
            Ok(None) => {}
            Err(err) => match mode {
                ParseMode::FailFast => return Err(err),
                ParseMode::Lenient => {
                    stats.skipped += 1;
                    stats.errors.push(err);
                }
            },
        }
    }
    Ok((graph, stats))
}

/// Parses one line; `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<Triple>, ParseError> {
    let mut cur = Cursor {
        chars: line.char_indices().collect(),
        pos: 0,
        line: line_no,
    };
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let subject = match cur.peek() {
        Some('<') => Term::Iri(cur.iri()?),
        Some('_') => Term::Blank(cur.blank()?),
        _ => return Err(cur.error("expected IRI or blank node as subject")),
    };
    cur.require_ws()?;
    let predicate = match cur.peek() {
        Some('<') => cur.iri()?,
        _ => return Err(cur.error("expected IRI as predicate")),
    };
    cur.require_ws()?;
    let object = match cur.peek() {
        Some('<') => Term::Iri(cur.iri()?),
        Some('_') => Term::Blank(cur.blank()?),
        Some('"') => Term::Literal(cur.literal()?),
        _ => return Err(cur.error("expected IRI, blank node or literal as object")),
    };
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err(cur.error("expected '.' at end of triple"));
    }
    cur.pos += 1;
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some('#') {
        return Err(cur.error("unexpected content after '.'"));
    }
    Ok(Some(Triple {
        subject,
        predicate,
        object,
    }))
}

struct Cursor {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn require_ws(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        self.skip_ws();
        if self.pos == start && !matches!(self.peek(), Some('<' | '"')) {
            return Err(self.error("expected whitespace between terms"));
        }
        Ok(())
    }

    fn iri(&mut self) -> Result<Iri, ParseError> {
        debug_assert_eq!(self.peek(), Some('<'));
        self.pos += 1;
        let mut value = String::new();
        loop {
            match self.next() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some('\\') => value.push(self.unicode_escape()?),
                Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    self.pos -= 1;
                    return Err(self.error("invalid character in IRI"));
                }
                Some(c) => value.push(c),
            }
        }
        Iri::new(value).ok_or_else(|| self.error("empty IRI"))
    }

    fn blank(&mut self) -> Result<String, ParseError> {
        if self.next() != Some('_') || self.next() != Some(':') {
            return Err(self.error("expected '_:' blank node prefix"));
        }
        let mut label = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                label.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        // A trailing '.' belongs to the statement terminator.
        while label.ends_with('.') {
            label.pop();
            self.pos -= 1;
        }
        if label.is_empty() {
            return Err(self.error("empty blank node label"));
        }
        Ok(label)
    }

    fn unicode_escape(&mut self) -> Result<char, ParseError> {
        let width = match self.next() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("invalid escape")),
        };
        let mut code = 0u32;
        for _ in 0..width {
            let digit = self
                .next()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.error("invalid hex digit in escape"))?;
            code = code * 16 + digit;
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a valid code point"))
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        debug_assert_eq!(self.peek(), Some('"'));
        self.pos += 1;
        let mut lexical = String::new();
        loop {
            match self.next() {
                None => return Err(self.error("unterminated literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u' | 'U') => {
                            lexical.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.error("invalid escape in literal")),
                    };
                    self.pos += 1;
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let shaped = !tag.is_empty()
                    && tag.split('-').all(|part| !part.is_empty())
                    && tag.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
                if !shaped {
                    return Err(self.error("malformed language tag"));
                }
                Ok(Literal::lang(lexical, tag))
            }
            Some('^') => {
                self.pos += 1;
                if self.next() != Some('^') || self.peek() != Some('<') {
                    return Err(self.error("expected '^^<datatype>'"));
                }
                let dt = self.iri()?;
                Ok(Literal::typed(lexical, dt))
            }
            _ => Ok(Literal::plain(lexical)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(doc: &str) -> RdfGraph {
        parse_ntriples_str(doc, ParseMode::FailFast).unwrap().0
    }

    #[test]
    fn parses_iri_triple() {
        let t = parse_line("<http://x/a> <http://x/p> <http://x/b> .", 1)
            .unwrap()
            .unwrap();
        assert_eq!(t.subject, Term::iri("http://x/a"));
        assert_eq!(t.predicate.as_str(), "http://x/p");
        assert_eq!(t.object, Term::iri("http://x/b"));
    }

    #[test]
    fn parses_language_literal() {
        let t = parse_line("<http://x/a> <http://x/p> \"v\"@en .", 1)
            .unwrap()
            .unwrap();
        let Term::Literal(lit) = t.object else {
            panic!("expected literal")
        };
        assert_eq!(lit.lexical_form, "v");
        assert_eq!(lit.language_tag.as_deref(), Some("en"));
        assert_eq!(lit.datatype.as_ref().map(Iri::as_str), Some(RDF_LANG_STRING));
    }

    #[test]
    fn missing_object_is_error_with_line() {
        let doc = "<http://x/a> <http://x/p> <http://x/b> .\n<http://x/a> <http://x/p> .\n";
        let err = parse_ntriples_str(doc, ParseMode::FailFast).unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_skips_and_counts() {
        let doc = "<http://x/a> <http://x/p> <http://x/b> .\nnot a triple\n<http://x/a> <http://x/p> .\n";
        let (g, stats) = parse_ntriples_str(doc, ParseMode::Lenient).unwrap();
        assert_eq!(g.triple_count(), 1);
        assert_eq!(stats.skipped, 2);
        assert_eq!(stats.errors.len(), 2);
    }

    #[test]
    fn comments_blanks_and_duplicates() {
        let doc = "# header\n\n<http://x/a> <http://x/p> \"x\" . # trailing\n<http://x/a> <http://x/p> \"x\" .\n";
        let (g, stats) = parse_ntriples_str(doc, ParseMode::FailFast).unwrap();
        assert_eq!(g.triple_count(), 1);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn escapes_typed_literals_and_blank_nodes() {
        let doc = "_:b1 <http://x/p> \"a\\tb\\u00e9\\\"\"^^<http://www.w3.org/2001/XMLSchema#string>.\n";
        let g = parse(doc);
        let t = g.triples().next().unwrap();
        assert_eq!(t.subject, Term::Blank("b1".into()));
        let Term::Literal(lit) = t.object else {
            panic!()
        };
        assert_eq!(lit.lexical_form, "a\tbé\"");
        assert!(lit.datatype.is_some());
        // round trip through the writer
        let again = parse(&g.to_ntriples());
        assert_eq!(again.triple_set(), g.triple_set());
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "<http://x/a> <http://x/p> <http://x/b>",
            "<http://x/a> \"p\" <http://x/b> .",
            "<http://x/a> <http://x/p> <http://x/b> . extra",
            "<http://x/a> <http://x/p> \"unterminated .",
            "<http://x/a b> <http://x/p> <http://x/b> .",
            "<> <http://x/p> <http://x/b> .",
            "<http://x/a> <http://x/p> \"x\"@ .",
        ] {
            assert!(parse_line(bad, 1).is_err(), "{bad}");
        }
    }

    #[test]
    fn neighbors_follow_outgoing_edges_in_insertion_order() {
        let g = parse(
            "<http://x/a> <http://x/p> <http://x/b> .\n<http://x/a> <http://x/p> <http://x/c> .\n<http://x/a> <http://x/q> \"s\" .\n",
        );
        let a = g.node_id(&Term::iri("http://x/a")).unwrap();
        let b = g.node_id(&Term::iri("http://x/b")).unwrap();
        let c = g.node_id(&Term::iri("http://x/c")).unwrap();
        let p = g.predicate_id(&Iri::new("http://x/p").unwrap()).unwrap();
        let q = g.predicate_id(&Iri::new("http://x/q").unwrap()).unwrap();
        assert_eq!(g.neighbors(a, p), &[b, c]);
        assert!(g.neighbors(b, p).is_empty());
        assert!(g.neighbors(NodeId(999), p).is_empty());
        assert_eq!(g.predicate_labels(a), vec![p, q]);
        let lit = g.node_id(&Term::Literal(Literal::plain("s"))).unwrap();
        assert!(g.predicate_labels(lit).is_empty());
        assert!(g.predicate_labels(NodeId(999)).is_empty());
        assert_eq!(g.out_degree(a), 3);
    }

    #[test]
    fn local_names() {
        assert_eq!(local_name("http://dbpedia.org/resource/Andre_Agassi"), "Andre_Agassi");
        assert_eq!(local_name("http://x.org/onto#notableIdeas"), "notableIdeas");
        assert_eq!(local_name("http://x.org/a/"), "a");
        assert_eq!(local_name("urn:isbn:123"), "urn:isbn:123");
    }
}
