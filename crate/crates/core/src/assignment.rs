//! Maximum-score bipartite matching (Hungarian method, shortest augmenting
//! paths with potentials).
//!
//! Pairs are optional: a row or column may stay unmatched, contributing zero.
//! Pairs scoring below `forbid_below` can never be matched. With non-negative
//! scores this is the classic rectangular assignment problem.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub rows: usize,
    pub cols: usize,
    /// Row-major scores.
    pub scores: Vec<f64>,
    pub forbid_below: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl AssignmentProblem {
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>, forbid_below: f64) -> Self {
        assert_eq!(scores.len(), rows * cols, "score matrix must be rows x cols");
        Self { rows, cols, scores, forbid_below }
    }

    pub fn from_rows(rows: &[Vec<f64>], forbid_below: f64) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged score matrix");
        Self::new(rows.len(), cols, rows.concat(), forbid_below)
    }

    #[inline]
    pub fn score(&self, r: usize, c: usize) -> f64 {
        self.scores[r * self.cols + c]
    }

    fn allowed(&self, r: usize, c: usize) -> bool {
        self.score(r, c) >= self.forbid_below
    }
}

/// Solves the problem exactly in O((r + c)^3).
pub fn solve(p: &AssignmentProblem) -> Result<Matching> {
    for r in 0..p.rows {
        for c in 0..p.cols {
            if !p.score(r, c).is_finite() {
                return Err(Error::NonFiniteScore { row: r, col: c });
            }
        }
    }
    if p.rows == 0 || p.cols == 0 {
        return Ok(Matching::default());
    }

    // Square cost matrix of side r + c: real rows can fall back to a private
    // dummy column and real columns to a private dummy row, both at zero cost.
    let (r, c) = (p.rows, p.cols);
    let n = r + c;
    let cost = |i: usize, j: usize| -> f64 {
        match (i < r, j < c) {
            (true, true) => {
                if p.allowed(i, j) {
                    -p.score(i, j)
                } else {
                    f64::INFINITY
                }
            }
            (true, false) => {
                if j - c == i {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (false, true) => {
                if i - r == j {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (false, false) => 0.0,
        }
    };

    // 1-based arrays; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(delta.is_finite(), "a zero-cost completion always exists");
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=c)
        .filter_map(|j| {
            let i = owner[j];
            (i >= 1 && i <= r).then(|| (i - 1, j - 1))
        })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| p.score(i, j)).sum();
    Ok(Matching { pairs, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = solve(&AssignmentProblem::from_rows(&[vec![1.0]], 0.0)).unwrap();
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.total, 1.0);
    }

    #[test]
    fn two_by_two() {
        let m = solve(&AssignmentProblem::from_rows(&[vec![0.9, 0.2], vec![0.3, 0.8]], 0.0)).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert!((m.total - 1.7).abs() < 1e-12);
    }

    #[test]
    fn rectangular_leaves_surplus_unmatched() {
        let wide = AssignmentProblem::from_rows(&[vec![0.1, 0.9, 0.5]], 0.0);
        assert_eq!(solve(&wide).unwrap().pairs, vec![(0, 1)]);
        let tall = AssignmentProblem::from_rows(&[vec![0.1], vec![0.9], vec![0.5]], 0.0);
        assert_eq!(solve(&tall).unwrap().pairs, vec![(1, 0)]);
    }

    #[test]
    fn forbidden_pairs_are_never_matched() {
        let p = AssignmentProblem::from_rows(&[vec![0.9, 0.05], vec![0.95, 0.02]], 0.1);
        let m = solve(&p).unwrap();
        assert_eq!(m.pairs, vec![(1, 0)]);
        let none = AssignmentProblem::from_rows(&[vec![0.01, 0.02]], 0.5);
        assert!(solve(&none).unwrap().pairs.is_empty());
    }

    #[test]
    fn empty_and_non_finite() {
        assert!(solve(&AssignmentProblem::new(0, 3, vec![], 0.0)).unwrap().pairs.is_empty());
        let bad = AssignmentProblem::from_rows(&[vec![0.0, f64::NAN]], 0.0);
        assert!(matches!(solve(&bad), Err(Error::NonFiniteScore { row: 0, col: 1 })));
    }
}
