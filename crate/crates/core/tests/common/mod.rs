#![allow(dead_code)]

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "river", "stone", "garden", "violin", "harbor", "lantern", "meadow", "copper", "falcon", "orchard", "glacier",
    "temple", "saddle", "pepper", "canyon", "ember", "quartz", "willow", "marble", "tundra", "the", "of", "and",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn phrase(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Random N-Triples over `subjects` subject nodes and `predicates`
/// predicates. Objects mix other subjects, external IRIs and literals.
pub fn random_graph(rng: &mut ChaCha8Rng, subjects: usize, predicates: usize) -> String {
    let mut out = String::new();
    for s in 0..subjects {
        let edges = rng.gen_range(1..=4);
        for _ in 0..edges {
            let p = rng.gen_range(0..predicates);
            let object = match rng.gen_range(0..3) {
                0 => format!("<http://r.example/s{}>", rng.gen_range(0..subjects)),
                1 => format!("<http://r.example/x{}>", rng.gen_range(0..6)),
                _ => format!("\"{}\"", phrase(rng, 3)),
            };
            writeln!(out, "<http://r.example/s{s}> <http://r.example/p{p}> {object} .").unwrap();
        }
    }
    out
}

/// Row-major random weights in [0, 1).
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.gen::<f64>()).collect()
}

/// Maximum of `sum / (rows + cols - |M|)` over every maximal
/// nonrepeating matching, found by enumerating all matchings.
pub fn brute_force_matching(rows: usize, cols: usize, w: &[f64]) -> f64 {
    fn rec(r: usize, rows: usize, cols: usize, w: &[f64], used: &mut [bool], size: usize, sum: f64, best: &mut f64) {
        if r == rows {
            // maximal: no free row and free column remain together
            let free_cols = used.iter().filter(|u| !**u).count();
            let free_rows = rows - size;
            if free_cols == 0 || free_rows == 0 {
                *best = best.max(sum / (rows + cols - size) as f64);
            }
            return;
        }
        rec(r + 1, rows, cols, w, used, size, sum, best);
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                rec(r + 1, rows, cols, w, used, size + 1, sum + w[r * cols + c], best);
                used[c] = false;
            }
        }
    }
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    rec(0, rows, cols, w, &mut vec![false; cols], 0, 0.0, &mut best);
    best
}

/// A DBpedia-like dataset of roughly `triples` triples: typed entities in a
/// handful of classes with labels, class-specific attributes and links.
pub fn synthetic_dataset(seed: u64, triples: usize) -> String {
    const CLASSES: &[&str] = &["Person", "City", "River", "Book", "Film", "Band", "Company", "Planet"];
    let mut rng = rng(seed);
    let subjects = triples / 5;
    let mut out = String::new();
    for s in 0..subjects {
        let class = CLASSES[s % CLASSES.len()];
        let subject = format!("<http://dbpedia.example/resource/{class}_{s}>");
        let mut line = |p: &str, o: String| {
            writeln!(out, "{subject} <{p}> {o} .").unwrap();
        };
        line(
            "http://www.w3.org/1999/02/22-rdf-syntax-ns#type",
            format!("<http://dbpedia.example/ontology/{class}>"),
        );
        line("http://www.w3.org/2000/01/rdf-schema#label", format!("\"{}\"@en", phrase(&mut rng, 3)));
        line(
            &format!("http://dbpedia.example/ontology/{}Note", class.to_lowercase()),
            format!("\"{}\"", phrase(&mut rng, 5)),
        );
        let target = rng.gen_range(0..subjects);
        let tclass = CLASSES[target % CLASSES.len()];
        line(
            &format!("http://dbpedia.example/ontology/{}Link", class.to_lowercase()),
            format!("<http://dbpedia.example/resource/{tclass}_{target}>"),
        );
        line(
            "http://dbpedia.example/ontology/country",
            format!("<http://dbpedia.example/resource/Country_{}>", rng.gen_range(0..20)),
        );
    }
    out
}
