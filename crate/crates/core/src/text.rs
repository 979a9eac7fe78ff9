//! Tokenization, idf weighting and literal similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rust_stemmers::{Algorithm, Stemmer};
use thiserror::Error;

use crate::rdf::Literal;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("no literals to weight")]
    EmptyCorpus,
    #[error("idf table line {line}: {message}")]
    Format { line: usize, message: String },
}

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "had", "has", "have",
    "he", "her", "his", "if", "in", "into", "is", "it", "its", "no", "not", "of", "on", "or",
    "she", "such", "that", "the", "their", "then", "there", "these", "they", "this", "to",
    "was", "were", "which", "who", "will", "with",
];

#[derive(Clone)]
pub struct AnalysisConfig {
    pub stemming_enabled: bool,
    pub stopwords: BTreeSet<String>,
    stemmer: Arc<Stemmer>,
}

impl std::fmt::Debug for AnalysisConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalysisConfig")
            .field("stemming_enabled", &self.stemming_enabled)
            .field("stopwords", &self.stopwords.len())
            .finish()
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self::new(true, DEFAULT_STOPWORDS.iter().map(|s| s.to_string()))
    }
}

impl AnalysisConfig {
    pub fn new(stemming_enabled: bool, stopwords: impl IntoIterator<Item = String>) -> Self {
        AnalysisConfig {
            stemming_enabled,
            stopwords: stopwords.into_iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect(),
            stemmer: Arc::new(Stemmer::create(Algorithm::English)),
        }
    }

    /// Stopword file: one token per line, `#` lines ignored.
    pub fn parse_stopwords(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    }

    /// Normalized tokens in first-occurrence order, without duplicates.
    pub fn analyze(&self, text: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for raw in split_words(text) {
            let lower = raw.to_lowercase();
            if self.stopwords.contains(&lower) {
                continue;
            }
            let token = if self.stemming_enabled {
                self.stemmer.stem(&lower).into_owned()
            } else {
                lower
            };
            if !token.is_empty() && seen.insert(token.clone()) {
                out.push(token);
            }
        }
        out
    }

    pub fn tokenize(&self, text: &str) -> TokenSet {
        TokenSet(self.analyze(text).into_iter().collect())
    }
}

/// Splits on non-alphanumeric characters and on lower-to-upper camel case
/// boundaries, so `notableIdeas` yields `notable` and `Ideas`.
fn split_words(text: &str) -> Vec<&str> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    let mut prev_lower = false;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if let Some(s) = start {
                if prev_lower && c.is_uppercase() {
                    words.push(&text[s..i]);
                    start = Some(i);
                }
            } else {
                start = Some(i);
            }
            prev_lower = c.is_lowercase() || c.is_numeric();
        } else {
            if let Some(s) = start.take() {
                words.push(&text[s..i]);
            }
            prev_lower = false;
        }
    }
    if let Some(s) = start {
        words.push(&text[s..]);
    }
    words
}

/// Set of normalized tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(pub BTreeSet<String>);

impl TokenSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSet(iter.into_iter().map(Into::into).collect())
    }
}

/// Document frequencies over the literal corpus with smoothed idf
/// `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    doc_count: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn build<'a, I>(corpus: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = &'a TokenSet>,
    {
        let mut doc_count = 0;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            doc_count += 1;
            for t in doc.iter() {
                *df.entry(t.to_string()).or_default() += 1;
            }
        }
        if doc_count == 0 {
            return Err(TextError::EmptyCorpus);
        }
        Ok(IdfTable { doc_count, df })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn df(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }

    /// Unseen tokens use df = 0.
    pub fn idf(&self, token: &str) -> f64 {
        smoothed_idf(self.doc_count, self.df(token))
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, usize)> {
        self.df.iter().map(|(t, d)| (t.as_str(), *d))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# semsearch idf v1\tdoc_count\t{}\n", self.doc_count);
        for (t, d) in &self.df {
            let _ = writeln!(out, "{t}\t{d}\t{:.6}", self.idf(t));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, TextError> {
        let mut lines = text.lines().enumerate();
        let fmt_err = |line: usize, message: &str| TextError::Format {
            line: line + 1,
            message: message.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| fmt_err(0, "missing header"))?;
        let doc_count = header
            .strip_prefix("# semsearch idf v1\tdoc_count\t")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| fmt_err(0, "bad header or version"))?;
        let mut df = BTreeMap::new();
        for (i, line) in lines {
            let mut parts = line.split('\t');
            let (Some(tok), Some(d)) = (parts.next(), parts.next()) else {
                return Err(fmt_err(i, "expected token, df, idf"));
            };
            let d: usize = d.parse().map_err(|_| fmt_err(i, "bad df"))?;
            if d == 0 || d > doc_count {
                return Err(fmt_err(i, "df out of range"));
            }
            df.insert(tok.to_string(), d);
        }
        Ok(IdfTable { doc_count, df })
    }
}

pub fn smoothed_idf(doc_count: usize, df: usize) -> f64 {
    ((1.0 + doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// idf-weighted Jaccard of the two token sets; 0 when both are empty.
pub fn token_set_sim(x: &TokenSet, y: &TokenSet, idf: &IdfTable) -> f64 {
    let mut shared = 0.0;
    let mut union = 0.0;
    for t in x.0.union(&y.0) {
        let w = idf.idf(t);
        union += w;
        if x.contains(t) && y.contains(t) {
            shared += w;
        }
    }
    if union == 0.0 {
        0.0
    } else {
        shared / union
    }
}

pub fn literal_sim(x: &Literal, y: &Literal, idf: &IdfTable, cfg: &AnalysisConfig) -> f64 {
    token_set_sim(&cfg.tokenize(&x.lexical_form), &cfg.tokenize(&y.lexical_form), idf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn no_stem() -> AnalysisConfig {
        AnalysisConfig::new(false, DEFAULT_STOPWORDS.iter().map(|s| s.to_string()))
    }

    fn ts(tokens: &[&str]) -> TokenSet {
        tokens.iter().copied().collect()
    }

    #[test]
    fn tokenize_examples() {
        let cfg = no_stem();
        assert_eq!(cfg.tokenize("Andre Agassi"), ts(&["andre", "agassi"]));
        assert_eq!(cfg.tokenize("the anthem"), ts(&["anthem"]));
        assert!(cfg.tokenize("").is_empty());
        assert_eq!(cfg.tokenize("Andre_Agassi"), ts(&["andre", "agassi"]));
        assert_eq!(cfg.tokenize("notableIdeas"), ts(&["notable", "ideas"]));
    }

    #[test]
    fn stemming_collapses_inflections() {
        let cfg = AnalysisConfig::default();
        assert_eq!(cfg.tokenize("ideas"), cfg.tokenize("idea"));
        assert_eq!(cfg.tokenize("notableIdeas"), cfg.tokenize("notable idea"));
        // idempotent on normalized output
        let once: Vec<String> = cfg.analyze("Flowering shrubs and national anthems");
        let twice = cfg.analyze(&once.join(" "));
        assert_eq!(once, twice);
    }

    #[test]
    fn stopwords_apply_before_stemming() {
        let cfg = AnalysisConfig::new(true, ["was".to_string()]);
        assert!(cfg.tokenize("was").is_empty());
        assert!(!cfg.tokenize("wa").is_empty());
    }

    #[test]
    fn stopword_file_parsing() {
        let words = AnalysisConfig::parse_stopwords("# list\nthe\n\n  of \n");
        assert_eq!(words, vec!["the", "of"]);
    }

    #[test]
    fn idf_two_doc_corpus() {
        let corpus = [ts(&["alpha", "beta"]), ts(&["alpha", "gamma"])];
        let idf = IdfTable::build(&corpus).unwrap();
        assert_eq!(idf.df("alpha"), 2);
        assert_eq!(idf.df("beta"), 1);
        assert_relative_eq!(idf.idf("alpha"), 1.0, epsilon = 1e-12);
        // ln(3/2) + 1
        assert_relative_eq!(idf.idf("beta"), 1.405_465_108_108_164_4, epsilon = 1e-12);
        // unseen: ln(3/1) + 1
        assert_relative_eq!(idf.idf("zeta"), 3f64.ln() + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn idf_single_doc_and_empty() {
        let idf = IdfTable::build(&[ts(&["x"])]).unwrap();
        assert_relative_eq!(idf.idf("x"), 1.0, epsilon = 1e-12);
        let empty: [TokenSet; 0] = [];
        assert_eq!(IdfTable::build(&empty), Err(TextError::EmptyCorpus));
    }

    #[test]
    fn idf_tsv_round_trip() {
        let corpus = [ts(&["alpha", "beta"]), ts(&["alpha", "gamma"])];
        let idf = IdfTable::build(&corpus).unwrap();
        assert_eq!(IdfTable::from_tsv(&idf.to_tsv()).unwrap(), idf);
        assert!(IdfTable::from_tsv("# semsearch idf v9\tdoc_count\t2\n").is_err());
    }

    #[test]
    fn literal_sim_examples() {
        let cfg = no_stem();
        let corpus = [ts(&["alpha", "beta"]), ts(&["alpha", "gamma"])];
        let idf = IdfTable::build(&corpus).unwrap();
        let a = Literal::plain("alpha beta");
        let b = Literal::plain("alpha gamma");
        let c = Literal::plain("delta");
        assert_relative_eq!(literal_sim(&a, &a, &idf, &cfg), 1.0);
        assert_eq!(literal_sim(&a, &c, &idf, &cfg), 0.0);
        // 1 / (1 + 2 * (ln(3/2) + 1))
        let expected = 1.0 / (1.0 + 2.0 * ((1.5f64).ln() + 1.0));
        assert_relative_eq!(literal_sim(&a, &b, &idf, &cfg), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, 0.2624, epsilon = 1e-4);
        assert_eq!(literal_sim(&Literal::plain(""), &Literal::plain("the"), &idf, &cfg), 0.0);
    }

    fn token_sets() -> impl Strategy<Value = Vec<TokenSet>> {
        let tok = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]);
        prop::collection::vec(prop::collection::btree_set(tok, 0..5), 1..8)
            .prop_map(|docs| docs.into_iter().map(|d| d.into_iter().collect()).collect())
    }

    proptest! {
        #[test]
        fn sim_symmetric_bounded(docs in token_sets(), i in 0usize..8, j in 0usize..8) {
            let idf = IdfTable::build(&docs).unwrap();
            let x = &docs[i % docs.len()];
            let y = &docs[j % docs.len()];
            let s = token_set_sim(x, y, &idf);
            prop_assert_eq!(s, token_set_sim(y, x, &idf));
            prop_assert!((0.0..=1.0).contains(&s));
            if s == 1.0 {
                prop_assert!(x == y && !x.is_empty());
            }
            if x == y && !x.is_empty() {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn adding_shared_token_never_decreases(docs in token_sets(), i in 0usize..8, j in 0usize..8) {
            let idf = IdfTable::build(&docs).unwrap();
            let mut x = docs[i % docs.len()].clone();
            let mut y = docs[j % docs.len()].clone();
            let before = token_set_sim(&x, &y, &idf);
            x.0.insert("shared".into());
            y.0.insert("shared".into());
            prop_assert!(token_set_sim(&x, &y, &idf) >= before - 1e-12);
        }

        #[test]
        fn df_consistency(docs in token_sets()) {
            let idf = IdfTable::build(&docs).unwrap();
            let total_df: usize = idf.tokens().map(|(_, d)| d).sum();
            let total_distinct: usize = docs.iter().map(TokenSet::len).sum();
            prop_assert_eq!(total_df, total_distinct);
            for (t, d) in idf.tokens() {
                prop_assert!(d >= 1 && d <= idf.doc_count());
                prop_assert!(idf.idf(t) >= 1.0);
            }
        }
    }
}
