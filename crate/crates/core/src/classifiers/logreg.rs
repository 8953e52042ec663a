//! One-vs-rest L2-regularized logistic regression, fitted by full-batch
//! gradient descent with a backtracking line search.

use serde::{Deserialize, Serialize};

use super::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    /// L2 strength on the summed log-loss; the intercept is not penalized.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop when the largest gradient component, divided by the row count,
    /// falls below this.
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            lambda: 1.0,
            max_iter: 10_000,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// One `(weights, intercept)` per class.
    pub coef: Vec<(Vec<f64>, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary loss with targets `s` in {-1, +1}.
fn loss(x: &[Vec<f64>], s: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let data: f64 = x
        .iter()
        .zip(s)
        .map(|(r, si)| softplus(-si * (dot(r, w) + b)))
        .sum();
    data + 0.5 * lambda * dot(w, w)
}

fn gradient(x: &[Vec<f64>], s: &[f64], w: &[f64], b: f64, lambda: f64) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut gb = 0.0;
    for (r, si) in x.iter().zip(s) {
        let coef = -si * sigmoid(-si * (dot(r, w) + b));
        for (g, xi) in gw.iter_mut().zip(r) {
            *g += coef * xi;
        }
        gb += coef;
    }
    (gw, gb)
}

/// Fits one binary problem; returns weights, intercept, convergence and
/// iteration count.
pub fn fit_binary(p: &LogRegParams, x: &[Vec<f64>], s: &[f64]) -> (Vec<f64>, f64, bool, usize) {
    let d = x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0 / x.len() as f64;
    let mut f = loss(x, s, &w, b, p.lambda);
    let limit = p.tol * x.len() as f64;
    for it in 0..p.max_iter {
        let (gw, gb) = gradient(x, s, &w, b, p.lambda);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax <= limit {
            return (w, b, true, it);
        }
        let gg = dot(&gw, &gw) + gb * gb;
        step *= 2.0;
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let nb = b - step * gb;
            let nf = loss(x, s, &nw, nb, p.lambda);
            if nf <= f - 1e-4 * step * gg {
                if nf >= f {
                    // The loss no longer resolves the decrease.
                    return (nw, nb, true, it + 1);
                }
                w = nw;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (w, b, true, it);
            }
        }
    }
    (w, b, false, p.max_iter)
}

impl LogRegModel {
    pub fn fit(p: &LogRegParams, x: &[Vec<f64>], y: &[usize], k: usize) -> LogRegModel {
        let classes: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
        let mut coef = Vec::new();
        let mut converged = true;
        let mut iterations = 0;
        for c in classes {
            let s: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let (w, b, ok, it) = fit_binary(p, x, &s);
            converged &= ok;
            iterations = iterations.max(it);
            coef.push((w, b));
        }
        LogRegModel {
            coef,
            converged,
            iterations,
        }
    }

    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let probs: Vec<f64> = self.coef.iter().map(|(w, b)| sigmoid(dot(x, w) + b)).collect();
        if probs.len() == 1 {
            return vec![1.0 - probs[0], probs[0]];
        }
        let s: f64 = probs.iter().sum();
        probs.iter().map(|p| p / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::super::{accuracy, argmax};
    use super::*;

    fn predict(m: &LogRegModel, x: &[Vec<f64>]) -> Vec<usize> {
        x.iter().map(|r| argmax(&m.predict_scores(r))).collect()
    }

    #[test]
    fn separated_blobs() {
        let (x, y) = blobs(200, 2, 4.0, 1);
        let (xt, yt) = blobs(200, 2, 4.0, 2);
        let m = LogRegModel::fit(&LogRegParams::default(), &x, &y, 2);
        assert!(m.converged);
        assert!(accuracy(&predict(&m, &xt), &yt) >= 0.99);
    }

    #[test]
    fn xor_is_not_linear() {
        let (x, y) = xor(50, 0.5, 3);
        let m = LogRegModel::fit(&LogRegParams::default(), &x, &y, 2);
        assert!(accuracy(&predict(&m, &x), &y) <= 0.6);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let (x, y) = blobs(50, 2, 1.0, 5);
        let s: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let p = LogRegParams { tol: 1e-7, ..Default::default() };
        let (w, b, ok, it) = fit_binary(&p, &x, &s);
        assert!(ok, "{it}");
        let f0 = loss(&x, &s, &w, b, 1.0);
        for dw in [[1e-3, 0.0], [0.0, 1e-3], [-1e-3, 0.0]] {
            let w2 = vec![w[0] + dw[0], w[1] + dw[1]];
            assert!(loss(&x, &s, &w2, b, 1.0) >= f0);
        }
    }

    #[test]
    fn three_classes_score_to_one() {
        let (x, y) = blobs(60, 3, 3.0, 8);
        let m = LogRegModel::fit(&LogRegParams::default(), &x, &y, 3);
        assert_eq!(m.coef.len(), 3);
        for r in &x[..10] {
            assert!((m.predict_scores(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(accuracy(&predict(&m, &x), &y) > 0.9);
    }

    #[test]
    fn duplication_keeps_decisions_on_blobs() {
        let (x, y) = blobs(50, 2, 4.0, 9);
        let (x2, y2) = repeat(&x, &y, 2);
        let a = LogRegModel::fit(&LogRegParams::default(), &x, &y, 2);
        let b = LogRegModel::fit(&LogRegParams::default(), &x2, &y2, 2);
        let (xt, _) = blobs(100, 2, 4.0, 10);
        assert_eq!(predict(&a, &xt), predict(&b, &xt));
    }
}
