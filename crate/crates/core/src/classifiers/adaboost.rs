//! Multi-class AdaBoost (SAMME) over weighted decision stumps.

use serde::{Deserialize, Serialize};

use super::argmax;
use super::tree::{MaxFeatures, Tree, TreeParams};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub estimators: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { estimators: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each fitted weak learner, including a
    /// final one rejected for doing no better than chance.
    pub errors: Vec<f64>,
    pub n_classes: usize,
}

impl AdaBoostModel {
    pub fn fit(p: &AdaBoostParams, x: &[Vec<f64>], y: &[usize], k: usize) -> AdaBoostModel {
        let tp = TreeParams {
            max_depth: 1,
            max_features: MaxFeatures::All,
            min_samples_split: 2,
        };
        let n = x.len();
        let mut w = vec![1.0 / n as f64; n];
        let chance = 1.0 - 1.0 / k as f64;
        let mut rng = rng_from(0, &[]);
        let mut m = AdaBoostModel {
            stumps: Vec::new(),
            alphas: Vec::new(),
            errors: Vec::new(),
            n_classes: k,
        };
        for _ in 0..p.estimators {
            let stump = Tree::fit(&tp, x, y, &w, k, &mut rng);
            let miss: Vec<bool> = x.iter().zip(y).map(|(r, &c)| argmax(stump.leaf(r)) != c).collect();
            let total: f64 = w.iter().sum();
            let err = miss.iter().zip(&w).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total;
            m.errors.push(err);
            if err >= chance {
                if m.stumps.is_empty() {
                    m.stumps.push(stump);
                    m.alphas.push(1.0);
                }
                break;
            }
            if err <= 0.0 {
                m.stumps.push(stump);
                m.alphas.push(1.0);
                break;
            }
            let alpha = ((1.0 - err) / err).ln() + ((k - 1) as f64).ln();
            for (wi, miss) in w.iter_mut().zip(&miss) {
                if *miss {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            m.stumps.push(stump);
            m.alphas.push(alpha);
        }
        m
    }

    /// Normalized weighted votes.
    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n_classes];
        for (t, a) in self.stumps.iter().zip(&self.alphas) {
            s[argmax(t.leaf(x))] += a;
        }
        let total: f64 = s.iter().sum();
        if total > 0.0 {
            s.iter_mut().for_each(|v| *v /= total);
        }
        s
    }
}
