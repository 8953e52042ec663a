//! Weighted CART trees with the Gini criterion, and random forests of them.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.clamp(1, d),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Count(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "all" => Ok(MaxFeatures::All),
            n => n
                .parse()
                .map(MaxFeatures::Count)
                .map_err(|_| Error::Config(format!("bad max_features `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    w: &'a [f64],
    k: usize,
    p: &'a TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn distribution(&self, idx: &[usize]) -> (Vec<f64>, f64) {
        let mut counts = vec![0.0; self.k];
        for &i in idx {
            counts[self.y[i]] += self.w[i];
        }
        let total = counts.iter().sum();
        (counts, total)
    }

    /// Best `(feature, threshold, weighted child impurity)` over `features`.
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let (counts, total) = self.distribution(idx);
        let parent = gini(&counts, total) * total;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.k];
            let mut wl = 0.0;
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.y[i]] += self.w[i];
                wl += self.w[i];
                let (a, b) = (self.x[i][f], self.x[order[pos + 1]][f]);
                if a == b {
                    continue;
                }
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let wr = total - wl;
                let score = gini(&left, wl) * wl + gini(&right, wr) * wr;
                if best.is_none_or(|(_, _, s)| score < s - 1e-12) {
                    let mut t = 0.5 * (a + b);
                    if t == b {
                        t = a;
                    }
                    best = Some((f, t, score));
                }
            }
        }
        best.filter(|(_, _, s)| *s < parent - 1e-12)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let (counts, total) = self.distribution(&idx);
        let id = self.nodes.len();
        let dist: Vec<f64> = counts.iter().map(|c| c / total).collect();
        self.nodes.push(Node::Leaf(dist));
        let pure = counts.iter().filter(|c| **c > 0.0).count() <= 1;
        if pure || depth >= self.p.max_depth || idx.len() < self.p.min_samples_split.max(2) {
            return id;
        }
        let d = self.x[0].len();
        let m = self.p.max_features.resolve(d);
        let features: Vec<usize> = if m >= d {
            (0..d).collect()
        } else {
            sample(rng, d, m).into_vec()
        };
        let Some((feature, threshold, _)) = self.best_split(&idx, &features) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    /// Grows a tree on the rows with positive weight.
    pub fn fit(
        p: &TreeParams,
        x: &[Vec<f64>],
        y: &[usize],
        w: &[f64],
        k: usize,
        rng: &mut Rng,
    ) -> Tree {
        let idx: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
        let mut b = Builder {
            x,
            y,
            w,
            k,
            p,
            nodes: Vec::new(),
        };
        b.grow(idx, 0, rng);
        Tree { nodes: b.nodes }
    }

    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf(d) => return d,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            match &t.nodes[n] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            trees: 100,
            max_depth: 75,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

impl RfModel {
    pub fn fit(p: &RfParams, x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> RfModel {
        let tp = TreeParams {
            max_depth: p.max_depth,
            max_features: p.max_features,
            min_samples_split: p.min_samples_split,
        };
        let trees = (0..p.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from(seed, &[0x7ee, t as u64]);
                let mut w = vec![0.0; x.len()];
                if p.bootstrap {
                    for _ in 0..x.len() {
                        w[rng.random_range(0..x.len())] += 1.0;
                    }
                } else {
                    w.fill(1.0);
                }
                Tree::fit(&tp, x, y, &w, k, &mut rng)
            })
            .collect();
        RfModel { trees, n_classes: k }
    }

    /// Mean leaf class distribution over the trees.
    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in s.iter_mut().zip(t.leaf(x)) {
                *a += b;
            }
        }
        let n = self.trees.len() as f64;
        s.iter().map(|v| v / n).collect()
    }
}
