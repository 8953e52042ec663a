//! Exact brute-force k-nearest neighbours with majority vote.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl KnnModel {
    pub fn fit(p: &KnnParams, x: &[Vec<f64>], y: &[usize]) -> KnnModel {
        KnnModel {
            k: p.k.clamp(1, x.len()),
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    /// Training rows nearest to `q`, closest first; equal distances keep
    /// training order.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        let k = self.k;
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote shares; ties resolve to the lowest class at prediction time.
    pub fn predict_scores(&self, q: &[f64], n_classes: usize) -> Vec<f64> {
        let mut votes = vec![0.0; n_classes];
        for i in self.neighbours(q) {
            votes[self.y[i]] += 1.0;
        }
        let k = self.k as f64;
        votes.iter().map(|v| v / k).collect()
    }
}
