use std::fs;

use semsearch::pipeline::{self, LoadedArtifacts, PipelineConfig, PipelineError};
use semsearch::rdf::{parse_ntriples_str, ParseMode};
use semsearch::summary::SummaryGraph;
use semsearch::text::AnalysisConfig;

const PLANTS: &str = include_str!("../../../data/plants_athletes.nt");

fn write_build(dir: &std::path::Path) -> pipeline::Build {
    let g = parse_ntriples_str(PLANTS, ParseMode::FailFast).unwrap().0;
    let b = pipeline::build(&g, &PipelineConfig::default(), AnalysisConfig::default()).unwrap();
    b.write_to(dir, &pipeline::sha256_hex(PLANTS.as_bytes())).unwrap();
    b
}

#[test]
fn loaded_engine_answers_like_the_in_memory_one() {
    let dir = tempfile::tempdir().unwrap();
    let b = write_build(dir.path());
    let loaded = LoadedArtifacts::load(dir.path()).unwrap();
    for q in ["acacia", "andre agassi", "desert herb", "tennis"] {
        assert_eq!(loaded.engine.search(q).unwrap(), b.engine().search(q).unwrap(), "{q}");
    }
    assert_eq!(loaded.manifest.stats.classes, b.summary.classes.len());
    assert_eq!(LoadedArtifacts::summary(dir.path()).unwrap(), b.summary);
}

#[test]
fn edited_artifact_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    write_build(dir.path());
    let path = dir.path().join(pipeline::GRAPH_INDEX_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("http://example.org/Extra\t0\t\n");
    fs::write(&path, text).unwrap();
    match LoadedArtifacts::load(dir.path()) {
        Err(PipelineError::Stale(name)) => assert_eq!(name, pipeline::GRAPH_INDEX_FILE),
        other => panic!("expected a stale artifact error, got {other:?}"),
    }
}

#[test]
fn manifest_records_config_and_hashes() {
    let dir = tempfile::tempdir().unwrap();
    write_build(dir.path());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(pipeline::MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(json["config"]["beta"], 0.15);
    assert_eq!(json["config"]["tau"], 0.7);
    assert_eq!(json["dataset_sha256"], pipeline::sha256_hex(PLANTS.as_bytes()));
    assert_eq!(json["artifacts"].as_object().unwrap().len(), 5);
    let summary = fs::read_to_string(dir.path().join(pipeline::SUMMARY_FILE)).unwrap();
    assert!(SummaryGraph::from_text(&summary).is_ok());
}

#[test]
fn graph_without_literals_builds() {
    let g = parse_ntriples_str("<http://x/alpha> <http://x/p> <http://x/beta> .\n", ParseMode::FailFast).unwrap().0;
    let b = pipeline::build(&g, &PipelineConfig::default(), AnalysisConfig::default()).unwrap();
    assert_eq!(b.engine().search("alpha").unwrap()[0].entity, "http://x/alpha");
}
