//! Keyword search over RDF graphs.
//!
//! A build parses N-Triples into an [`rdf::RdfGraph`], scores every pair of
//! subject nodes that share an outgoing predicate with an iterative
//! neighborhood-matching similarity, groups nodes into equivalence classes
//! and indexes keywords to graph elements. Queries then return the matching
//! entities plus their closest same-class neighbors, each with a relevance
//! confidence.

mod codec;
pub mod eval;
pub mod index;
pub mod matching;
pub mod pipeline;
pub mod rdf;
pub mod search;
pub mod similarity;
pub mod summary;
pub mod text;

pub use eval::{evaluate, f_measure, precision, recall, EvalReport, GoldSet};
pub use pipeline::{build, Build, LoadedArtifacts, PipelineConfig, PipelineError};
pub use rdf::{parse_ntriples, parse_ntriples_str, ParseMode, RdfGraph};
pub use search::{ResultEntry, SearchConfig, SearchEngine, SearchError};
