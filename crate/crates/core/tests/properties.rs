mod common;

use proptest::prelude::*;
use semsearch::pipeline::{self, PipelineConfig};
use semsearch::rdf::{parse_ntriples_str, ParseMode};
use semsearch::text::AnalysisConfig;

fn build(text: &str, tau: f64) -> pipeline::Build {
    let g = parse_ntriples_str(text, ParseMode::FailFast).unwrap().0;
    let cfg = PipelineConfig {
        tau,
        ..Default::default()
    };
    pipeline::build(&g, &cfg, AnalysisConfig::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn line_order_does_not_change_artifacts(seed in any::<u64>(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let text = common::random_graph(&mut common::rng(seed), 12, 3);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut common::rng(shuffle));
        let a = build(&text, 0.7);
        let b = build(&lines.join("\n"), 0.7);
        prop_assert_eq!(a.artifact_files(), b.artifact_files());
    }

    #[test]
    fn higher_tau_refines_classes(seed in any::<u64>()) {
        let text = common::random_graph(&mut common::rng(seed), 15, 3);
        let coarse = build(&text, 0.3);
        let fine = build(&text, 0.8);
        for class in &fine.summary.classes {
            let parents: std::collections::BTreeSet<_> =
                class.members.iter().map(|m| coarse.summary.class_of(m).unwrap()).collect();
            prop_assert_eq!(parents.len(), 1);
        }
    }

    #[test]
    fn results_are_ranked_and_bounded(seed in any::<u64>(), k in 1usize..8) {
        let text = common::random_graph(&mut common::rng(seed), 20, 3);
        let b = build(&text, 0.7);
        let engine = b.engine();
        for word in &common::WORDS[..8] {
            let results = engine.search_k(word, k).unwrap();
            prop_assert!(results.len() <= k);
            for w in results.windows(2) {
                prop_assert!(w[0].confidence >= w[1].confidence);
            }
            let mut seen = std::collections::BTreeSet::new();
            for r in &results {
                prop_assert!(r.confidence > 0.0 && r.confidence <= 1.0);
                prop_assert!(seen.insert(r.entity.clone()));
            }
        }
    }
}
