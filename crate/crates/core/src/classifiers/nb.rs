//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::softmax_in_place;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            var_smoothing: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub log_prior: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl NbModel {
    pub fn fit(p: &NbParams, x: &[Vec<f64>], y: &[usize], k: usize) -> NbModel {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut count = vec![0.0f64; k];
        let mut mean = vec![vec![0.0; d]; k];
        let mut var = vec![vec![0.0; d]; k];
        for (r, &c) in x.iter().zip(y) {
            count[c] += 1.0;
            for j in 0..d {
                mean[c][j] += r[j];
            }
        }
        for c in 0..k {
            for v in &mut mean[c] {
                *v /= count[c].max(1.0);
            }
        }
        for (r, &c) in x.iter().zip(y) {
            for j in 0..d {
                var[c][j] += (r[j] - mean[c][j]).powi(2);
            }
        }
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            max_var = max_var.max(x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n);
        }
        let eps = (p.var_smoothing * max_var).max(f64::MIN_POSITIVE);
        for c in 0..k {
            for v in &mut var[c] {
                *v = *v / count[c].max(1.0) + eps;
            }
        }
        NbModel {
            log_prior: count.iter().map(|c| (c / n).ln()).collect(),
            mean,
            var,
        }
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        (0..self.log_prior.len())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(self.mean[c].iter().zip(&self.var[c]))
                    .map(|(xi, (m, v))| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v))
                    .sum();
                self.log_prior[c] + ll
            })
            .collect()
    }

    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.log_joint(x);
        softmax_in_place(&mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::super::{accuracy, argmax};
    use super::*;

    #[test]
    fn matches_closed_form_bayes_rule() {
        // Class 0: {0, 2} (mean 1, var 1); class 1: {3, 5, 7} (mean 5, var 8/3).
        let x = vec![vec![0.0], vec![2.0], vec![3.0], vec![5.0], vec![7.0]];
        let y = vec![0, 0, 1, 1, 1];
        let m = NbModel::fit(&NbParams { var_smoothing: 0.0 }, &x, &y, 2);
        let gauss = |x: f64, mu: f64, v: f64| (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        for q in [-1.0, 1.0, 2.5, 3.2, 4.0, 9.0] {
            let a = 0.4 * gauss(q, 1.0, 1.0);
            let b = 0.6 * gauss(q, 5.0, 8.0 / 3.0);
            let post = m.predict_scores(&[q]);
            assert!((post[0] - a / (a + b)).abs() < 1e-12, "{q}");
            assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_blobs() {
        let (x, y) = blobs(200, 2, 4.0, 11);
        let (xt, yt) = blobs(200, 2, 4.0, 12);
        let m = NbModel::fit(&NbParams::default(), &x, &y, 2);
        let pred: Vec<usize> = xt.iter().map(|r| argmax(&m.predict_scores(r))).collect();
        assert!(accuracy(&pred, &yt) >= 0.99);
    }

    #[test]
    fn duplication_invariant() {
        let (x, y) = blobs(40, 3, 2.0, 3);
        let (x2, y2) = repeat(&x, &y, 3);
        let a = NbModel::fit(&NbParams::default(), &x, &y, 3);
        let b = NbModel::fit(&NbParams::default(), &x2, &y2, 3);
        let (xt, _) = blobs(50, 3, 2.0, 99);
        for r in &xt {
            assert_eq!(argmax(&a.predict_scores(r)), argmax(&b.predict_scores(r)));
        }
    }
}
