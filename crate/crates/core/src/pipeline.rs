//! Build configuration, the offline build pipeline and persisted artifacts.
//!
//! Everything expensive happens in [`build`]; a query process only loads
//! the keyword index, the graph index and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::index::{GraphIndex, IndexError, KeywordIndex};
use crate::rdf::{NodeId, RdfGraph, Term};
use crate::search::{SearchConfig, SearchEngine, SearchError};
use crate::similarity::{
    compute_predicate_weights, SimilarityConfig, SimilarityEngine, SimilarityError, SimilarityHeader,
    SimilarityMatrix, WeightMode,
};
use crate::summary::{build_summary, cluster, ClusterConfig, SummaryError, SummaryGraph};
use crate::text::{AnalysisConfig, IdfTable, TextError, TokenSet, DEFAULT_STOPWORDS};

pub const FORMAT_VERSION: &str = "semsearch-build v1";
pub const IDF_FILE: &str = "idf.tsv";
pub const SIMILARITY_FILE: &str = "similarity.tsv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const KEYWORD_INDEX_FILE: &str = "keyword_index.tsv";
pub const GRAPH_INDEX_FILE: &str = "graph_index.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("artifact {0} does not match the build manifest")]
    Stale(String),
}

impl PipelineError {
    /// Whether the error is a usage or validation problem rather than a
    /// runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PipelineError::Config { .. }
                | PipelineError::UnknownKey(_)
                | PipelineError::Value { .. }
                | PipelineError::Search(_)
        ) || matches!(
            self,
            PipelineError::Similarity(
                SimilarityError::Beta(_) | SimilarityError::MaxIterations | SimilarityError::Epsilon(_)
            ) | PipelineError::Summary(SummaryError::Tau(_) | SummaryError::TauBelowBeta { .. })
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All tunables of a build, settable from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub exact_matching_limit: usize,
    pub tau: f64,
    pub sigma: f64,
    pub k: usize,
    pub weight_mode: String,
    pub stemming: bool,
    pub stopwords: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub artifacts: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sim = SimilarityConfig::default();
        let search = SearchConfig::default();
        PipelineConfig {
            beta: sim.beta,
            max_iterations: sim.max_iterations,
            epsilon: sim.epsilon,
            exact_matching_limit: sim.exact_matching_limit,
            tau: ClusterConfig::default().tau,
            sigma: search.sigma,
            k: search.k,
            weight_mode: WeightMode::Uniform.as_str().to_string(),
            stemming: true,
            stopwords: None,
            dataset: None,
            artifacts: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| PipelineError::Value {
        key: key.to_string(),
        message: e.to_string(),
    })
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        match key {
            "beta" => self.beta = parse_value(key, value)?,
            "max_iterations" => self.max_iterations = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "exact_matching_limit" => self.exact_matching_limit = parse_value(key, value)?,
            "tau" => self.tau = parse_value(key, value)?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "weight_mode" => self.weight_mode = value.to_string(),
            "stemming" => self.stemming = parse_value(key, value)?,
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "artifacts" => self.artifacts = Some(PathBuf::from(value)),
            other => return Err(PipelineError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                line: i + 1,
                message: "expected key = value".into(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            beta: self.beta,
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            exact_matching_limit: self.exact_matching_limit,
        }
    }

    pub fn cluster(&self) -> ClusterConfig {
        ClusterConfig { tau: self.tau }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            k: self.k,
            sigma: self.sigma,
        }
    }

    pub fn weight_mode(&self) -> Result<WeightMode, PipelineError> {
        WeightMode::parse(&self.weight_mode).ok_or_else(|| PipelineError::Value {
            key: "weight_mode".into(),
            message: format!("expected uniform or rarity, got {:?}", self.weight_mode),
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.similarity().validate()?;
        self.cluster().validate(self.beta)?;
        self.search().validate()?;
        self.weight_mode()?;
        Ok(())
    }

    /// Analysis settings, reading the stopword file when one is configured.
    pub fn analysis(&self) -> Result<AnalysisConfig, PipelineError> {
        let words = match &self.stopwords {
            Some(path) => AnalysisConfig::parse_stopwords(&fs::read_to_string(path).map_err(io_err(path))?),
            None => DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        };
        Ok(AnalysisConfig::new(self.stemming, words))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub triples: usize,
    pub nodes: usize,
    pub subjects: usize,
    pub literals: usize,
    pub candidate_pairs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub approximate_pairs: usize,
    pub max_deltas: Vec<f64>,
    pub classes: usize,
    pub summary_edges: usize,
    pub keyword_tokens: usize,
}

/// In-memory result of a build.
pub struct Build {
    pub config: PipelineConfig,
    pub analysis: AnalysisConfig,
    pub idf: IdfTable,
    pub similarity: SimilarityMatrix,
    pub similarity_text: String,
    pub summary: SummaryGraph,
    pub keyword_index: KeywordIndex,
    pub graph_index: GraphIndex,
    pub stats: BuildStats,
}

fn literal_corpus(g: &RdfGraph, analysis: &AnalysisConfig) -> Vec<TokenSet> {
    g.node_ids()
        .filter_map(|n| match g.term(n) {
            Term::Literal(lit) => Some(analysis.tokenize(&lit.lexical_form)),
            _ => None,
        })
        .collect()
}

/// Runs idf weighting, similarity iteration, clustering, summary and index
/// construction over a parsed graph.
pub fn build(g: &RdfGraph, config: &PipelineConfig, analysis: AnalysisConfig) -> Result<Build, PipelineError> {
    config.validate()?;
    let corpus = literal_corpus(g, &analysis);
    // A graph without literals still gets a well-defined (empty) table.
    let idf = if corpus.is_empty() {
        IdfTable::build(&[TokenSet::default()])?
    } else {
        IdfTable::build(&corpus)?
    };
    let weight_mode = config.weight_mode()?;
    let weights = compute_predicate_weights(g, weight_mode);
    let sim_cfg = config.similarity();
    let engine = SimilarityEngine::new(g, &idf, &analysis, weights, sim_cfg)?;
    let similarity = engine.compute();
    let similarity_text = similarity.to_tsv(
        g,
        &SimilarityHeader {
            beta: sim_cfg.beta,
            iteration: similarity.iteration(),
            epsilon: sim_cfg.epsilon,
            weight_mode,
        },
    );

    let subjects: Vec<NodeId> = g.subjects().collect();
    let groups = cluster(g, &similarity, &config.cluster(), &subjects);
    let summary = build_summary(g, &groups, config.tau, config.beta)?;
    let keyword_index = KeywordIndex::build(g, &analysis);
    let graph_index = GraphIndex::build(g, &summary, &similarity)?;

    let stats = BuildStats {
        triples: g.triple_count(),
        nodes: g.node_count(),
        subjects: subjects.len(),
        literals: corpus.len(),
        candidate_pairs: similarity.len(),
        iterations: similarity.iteration(),
        converged: similarity.converged,
        approximate_pairs: similarity.approximate.len(),
        max_deltas: similarity.deltas.clone(),
        classes: summary.classes.len(),
        summary_edges: summary.edges.len(),
        keyword_tokens: keyword_index.token_count(),
    };
    Ok(Build {
        config: config.clone(),
        analysis,
        idf,
        similarity,
        similarity_text,
        summary,
        keyword_index,
        graph_index,
        stats,
    })
}

/// Settings a query process needs to reproduce the build's analysis and
/// search defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub exact_matching_limit: usize,
    pub tau: f64,
    pub sigma: f64,
    pub k: usize,
    pub weight_mode: String,
    pub stemming: bool,
    pub stopwords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub dataset_sha256: String,
    pub config: ManifestConfig,
    pub stats: BuildStats,
    /// File name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Build {
    /// Artifact file names and contents, in a fixed order.
    pub fn artifact_files(&self) -> Vec<(&'static str, String)> {
        vec![
            (IDF_FILE, self.idf.to_tsv()),
            (SIMILARITY_FILE, self.similarity_text.clone()),
            (SUMMARY_FILE, self.summary.to_text()),
            (KEYWORD_INDEX_FILE, self.keyword_index.to_tsv()),
            (GRAPH_INDEX_FILE, self.graph_index.to_tsv()),
        ]
    }

    pub fn manifest(&self, dataset_sha256: &str) -> Manifest {
        let c = &self.config;
        Manifest {
            format: FORMAT_VERSION.to_string(),
            dataset_sha256: dataset_sha256.to_string(),
            config: ManifestConfig {
                beta: c.beta,
                max_iterations: c.max_iterations,
                epsilon: c.epsilon,
                exact_matching_limit: c.exact_matching_limit,
                tau: c.tau,
                sigma: c.sigma,
                k: c.k,
                weight_mode: c.weight_mode.clone(),
                stemming: c.stemming,
                stopwords: self.analysis.stopwords.iter().cloned().collect(),
            },
            stats: self.stats.clone(),
            artifacts: self
                .artifact_files()
                .into_iter()
                .map(|(name, body)| (name.to_string(), sha256_hex(body.as_bytes())))
                .collect(),
        }
    }

    /// Writes all artifacts plus `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path, dataset_sha256: &str) -> Result<Manifest, PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, body) in self.artifact_files() {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        let manifest = self.manifest(dataset_sha256);
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(io_err(&path))?;
        Ok(manifest)
    }

    pub fn engine(&self) -> SearchEngine {
        SearchEngine::new(
            self.analysis.clone(),
            self.keyword_index.clone(),
            self.graph_index.clone(),
            self.config.search(),
        )
    }
}

/// Query-time state loaded from an artifact directory.
#[derive(Debug, Clone)]
pub struct LoadedArtifacts {
    pub manifest: Manifest,
    pub engine: SearchEngine,
}

fn read_checked(dir: &Path, name: &str, manifest: &Manifest) -> Result<String, PipelineError> {
    let path = dir.join(name);
    let body = fs::read_to_string(&path).map_err(io_err(&path))?;
    match manifest.artifacts.get(name) {
        Some(hash) if *hash == sha256_hex(body.as_bytes()) => Ok(body),
        _ => Err(PipelineError::Stale(name.to_string())),
    }
}

impl LoadedArtifacts {
    /// Loads the manifest and query-time indexes, refusing artifacts whose
    /// content hash differs from the manifest.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        if manifest.format != FORMAT_VERSION {
            return Err(PipelineError::Manifest(format!("unsupported format {:?}", manifest.format)));
        }
        for name in [IDF_FILE, SIMILARITY_FILE, SUMMARY_FILE] {
            read_checked(dir, name, &manifest)?;
        }
        let keyword_index = KeywordIndex::from_tsv(&read_checked(dir, KEYWORD_INDEX_FILE, &manifest)?)?;
        let graph_index = GraphIndex::from_tsv(&read_checked(dir, GRAPH_INDEX_FILE, &manifest)?)?;
        let c = &manifest.config;
        let analysis = AnalysisConfig::new(c.stemming, c.stopwords.iter().cloned());
        let search = SearchConfig { k: c.k, sigma: c.sigma };
        search.validate()?;
        Ok(LoadedArtifacts {
            engine: SearchEngine::new(analysis, keyword_index, graph_index, search),
            manifest,
        })
    }

    pub fn summary(dir: &Path) -> Result<SummaryGraph, PipelineError> {
        let path = dir.join(SUMMARY_FILE);
        Ok(SummaryGraph::from_text(&fs::read_to_string(&path).map_err(io_err(&path))?)?)
    }
}
