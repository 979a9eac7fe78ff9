//! Maximum-weight bipartite matching over a dense weight matrix.
//!
//! In a complete bipartite graph every maximal nonrepeating matching pairs
//! `min(rows, cols)` elements, so maximizing the normalized matching score
//! reduces to a rectangular assignment problem. Small problems are solved
//! exactly with the Hungarian method; larger ones fall back to greedy
//! selection of the heaviest remaining cell.

/// Row-major `rows x cols` matrix of similarity scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingProblem {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl MatchingProblem {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), rows * cols, "weight matrix has wrong size");
        MatchingProblem { rows, cols, weights }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                weights.push(f(r, c));
            }
        }
        MatchingProblem { rows, cols, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Matched `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of matched weights.
    pub total: f64,
    /// `total / (rows + cols - |M|)`.
    pub value: f64,
    /// True when the greedy approximation was used.
    pub approximate: bool,
}

impl Matching {
    fn empty() -> Self {
        Matching {
            pairs: Vec::new(),
            total: 0.0,
            value: 0.0,
            approximate: false,
        }
    }
}

/// Best matching value; exact when `min(rows, cols) <= exact_limit`.
pub fn max_matching_value(problem: &MatchingProblem, exact_limit: usize) -> Matching {
    if problem.is_empty() {
        return Matching::empty();
    }
    let (mut pairs, approximate) = if problem.rows.min(problem.cols) <= exact_limit {
        (hungarian(problem), false)
    } else {
        (greedy(problem), true)
    };
    pairs.sort_unstable();
    let total: f64 = pairs.iter().map(|&(r, c)| problem.weight(r, c)).sum();
    let denom = (problem.rows + problem.cols - pairs.len()) as f64;
    Matching {
        value: total / denom,
        total,
        pairs,
        approximate,
    }
}

/// Hungarian method with potentials on the transposed problem when needed,
/// so the smaller side is always the one being assigned.
fn hungarian(problem: &MatchingProblem) -> Vec<(usize, usize)> {
    let transpose = problem.rows > problem.cols;
    let (n, m) = if transpose {
        (problem.cols, problem.rows)
    } else {
        (problem.rows, problem.cols)
    };
    // Minimize cost = -weight; indices are 1-based with 0 as the virtual column.
    let cost = |i: usize, j: usize| -> f64 {
        if transpose {
            -problem.weight(j - 1, i - 1)
        } else {
            -problem.weight(i - 1, j - 1)
        }
    };
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut assigned_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .filter(|&j| assigned_row[j] != 0)
        .map(|j| {
            let i = assigned_row[j] - 1;
            let j = j - 1;
            if transpose {
                (j, i)
            } else {
                (i, j)
            }
        })
        .collect()
}

/// Repeatedly takes the heaviest cell whose row and column are still free.
/// Ties break by row then column.
fn greedy(problem: &MatchingProblem) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = (0..problem.rows)
        .flat_map(|r| (0..problem.cols).map(move |c| (r, c)))
        .collect();
    cells.sort_by(|a, b| {
        problem
            .weight(b.0, b.1)
            .total_cmp(&problem.weight(a.0, a.1))
            .then(a.cmp(b))
    });
    let mut row_used = vec![false; problem.rows];
    let mut col_used = vec![false; problem.cols];
    let target = problem.rows.min(problem.cols);
    let mut pairs = Vec::with_capacity(target);
    for (r, c) in cells {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            pairs.push((r, c));
            if pairs.len() == target {
                break;
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every injective map from the smaller side into the
    /// larger one, i.e. every maximal nonrepeating matching.
    fn brute_force(p: &MatchingProblem) -> f64 {
        fn rec(p: &MatchingProblem, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64, t: bool) {
            let (n, m) = if t { (p.cols(), p.rows()) } else { (p.rows(), p.cols()) };
            if row == n {
                *best = best.max(acc);
                return;
            }
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    let w = if t { p.weight(j, row) } else { p.weight(row, j) };
                    rec(p, row + 1, used, acc + w, best, t);
                    used[j] = false;
                }
            }
        }
        if p.is_empty() {
            return 0.0;
        }
        let t = p.rows() > p.cols();
        let mut best = f64::NEG_INFINITY;
        let m = p.rows().max(p.cols());
        rec(p, 0, &mut vec![false; m], 0.0, &mut best, t);
        best / (p.rows() + p.cols() - p.rows().min(p.cols())) as f64
    }

    #[test]
    fn single_cell() {
        let m = max_matching_value(&MatchingProblem::new(1, 1, vec![0.42]), 8);
        assert_eq!(m.value, 0.42);
        assert_eq!(m.pairs, vec![(0, 0)]);
    }

    #[test]
    fn identity_is_perfect() {
        let m = max_matching_value(&MatchingProblem::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]), 8);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.value, 1.0);
    }

    #[test]
    fn empty_matrix() {
        let m = max_matching_value(&MatchingProblem::new(0, 3, vec![]), 8);
        assert_eq!(m.value, 0.0);
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn rectangular_denominator_uses_larger_side() {
        // 1x3: best cell 0.9, value 0.9 / (1 + 3 - 1)
        let m = max_matching_value(&MatchingProblem::new(1, 3, vec![0.1, 0.9, 0.3]), 8);
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert!((m.value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn greedy_is_flagged_and_can_be_suboptimal() {
        // greedy takes 0.9 then 0.0; optimum is 0.8 + 0.8
        let p = MatchingProblem::new(2, 2, vec![0.9, 0.8, 0.8, 0.0]);
        let approx = max_matching_value(&p, 1);
        assert!(approx.approximate);
        assert!((approx.total - 0.9).abs() < 1e-15);
        let exact = max_matching_value(&p, 2);
        assert!(!exact.approximate);
        assert!((exact.total - 1.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(rows in 1usize..6, cols in 1usize..7, seed in prop::collection::vec(0.0f64..=1.0, 42)) {
            let p = MatchingProblem::from_fn(rows, cols, |r, c| seed[r * cols + c]);
            let got = max_matching_value(&p, 8);
            prop_assert!((got.value - brute_force(&p)).abs() <= 1e-12);
            prop_assert_eq!(got.pairs.len(), rows.min(cols));
        }
    }
}
