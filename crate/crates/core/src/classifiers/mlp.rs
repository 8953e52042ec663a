//! Multilayer perceptron: ReLU hidden layers, softmax output, cross-entropy
//! loss with L2 penalty, trained by mini-batch Adam.

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// L2 penalty, scaled by the batch size as in the loss below.
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a loss improvement of `tol`.
    pub patience: usize,
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![100, 200, 200, 100],
            lr: 0.001,
            alpha: 1e-4,
            batch_size: 32,
            epochs: 200,
            patience: 10,
            tol: 1e-4,
        }
    }
}

/// Number of weights and biases for layer sizes `[in, hidden.., out]`.
pub fn n_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn layer<'a>(sizes: &[usize], params: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
    let off: usize = n_params(&sizes[..=l]);
    let (i, o) = (sizes[l], sizes[l + 1]);
    let w = ArrayView2::from_shape((i, o), &params[off..off + i * o]).expect("layout");
    let b = ArrayView1::from(&params[off + i * o..off + i * o + o]);
    (w, b)
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Class probabilities for each row of `x`.
pub fn forward(sizes: &[usize], params: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
    let nl = sizes.len() - 1;
    let mut a = x.to_owned();
    for l in 0..nl {
        let (w, b) = layer(sizes, params, l);
        let mut z = a.dot(&w) + &b;
        if l + 1 < nl {
            z.mapv_inplace(|v| v.max(0.0));
        }
        a = z;
    }
    softmax_rows(&mut a);
    a
}

/// Mean cross-entropy plus `alpha / (2 n) * ||W||^2` over the weights (not
/// biases), and its gradient with respect to the flat parameter vector.
pub fn loss_and_grad(
    sizes: &[usize],
    params: &[f64],
    x: ArrayView2<f64>,
    y: &[usize],
    alpha: f64,
) -> (f64, Vec<f64>) {
    let n = x.nrows() as f64;
    let nl = sizes.len() - 1;
    let mut acts: Vec<Array2<f64>> = vec![x.to_owned()];
    for l in 0..nl {
        let (w, b) = layer(sizes, params, l);
        let mut z = acts[l].dot(&w) + &b;
        if l + 1 < nl {
            z.mapv_inplace(|v| v.max(0.0));
        }
        acts.push(z);
    }
    let mut delta = acts.pop().unwrap();
    softmax_rows(&mut delta);
    let mut loss = 0.0;
    for (i, &c) in y.iter().enumerate() {
        loss -= delta[[i, c]].max(1e-300).ln();
        delta[[i, c]] -= 1.0;
    }
    loss /= n;
    delta /= n;

    let mut grad = vec![0.0; params.len()];
    for l in (0..nl).rev() {
        let (w, _) = layer(sizes, params, l);
        loss += 0.5 * alpha / n * w.iter().map(|v| v * v).sum::<f64>();
        let a_prev = &acts[l];
        let gw = a_prev.t().dot(&delta) + &(&w * (alpha / n));
        let gb = delta.sum_axis(Axis(0));
        let off = n_params(&sizes[..=l]);
        let (i, o) = (sizes[l], sizes[l + 1]);
        grad[off..off + i * o].copy_from_slice(gw.as_standard_layout().as_slice().unwrap());
        grad[off + i * o..off + i * o + o].copy_from_slice(gb.as_slice().unwrap());
        if l > 0 {
            let mut d = delta.dot(&w.t());
            d.zip_mut_with(a_prev, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            delta = d;
        }
    }
    (loss, grad)
}

/// Glorot-uniform initialization of weights and biases.
pub fn init_params(sizes: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[0x31f]);
    let mut p = Vec::with_capacity(n_params(sizes));
    for w in sizes.windows(2) {
        let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
        for _ in 0..w[0] * w[1] + w[1] {
            p.push(rng.random_range(-bound..bound));
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub converged: bool,
}

fn to_array(rows: &[Vec<f64>], idx: &[usize], d: usize) -> Array2<f64> {
    let mut a = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        a.slice_mut(s![r, ..]).assign(&ArrayView1::from(&rows[i][..]));
    }
    a
}

impl MlpModel {
    pub fn fit(p: &MlpParams, x: &[Vec<f64>], y: &[usize], k: usize, seed: u64) -> MlpModel {
        let d = x[0].len();
        let mut sizes = vec![d];
        sizes.extend(&p.hidden);
        sizes.push(k);
        let mut params = init_params(&sizes, seed);
        let np = params.len();
        let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let mut t = 0i32;
        let mut rng = rng_from(seed, &[0x5bff]);
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut curve = Vec::new();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut converged = false;
        let bs = p.batch_size.clamp(1, x.len());
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(bs) {
                let xb = to_array(x, batch, d);
                let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
                let (loss, g) = loss_and_grad(&sizes, &params, xb.view(), &yb, p.alpha);
                total += loss * batch.len() as f64;
                t += 1;
                let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
                for q in 0..np {
                    m[q] = b1 * m[q] + (1.0 - b1) * g[q];
                    v[q] = b2 * v[q] + (1.0 - b2) * g[q] * g[q];
                    params[q] -= p.lr * (m[q] / c1) / ((v[q] / c2).sqrt() + eps);
                }
            }
            let loss = total / x.len() as f64;
            curve.push(loss);
            if loss > best - p.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(loss);
            if stale > p.patience {
                converged = true;
                break;
            }
        }
        MlpModel {
            sizes,
            params,
            loss_curve: curve,
            converged,
        }
    }

    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let a = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row");
        forward(&self.sizes, &self.params, a.view()).row(0).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testdata::*;
    use super::super::{accuracy, argmax};
    use super::*;

    fn predict(m: &MlpModel, x: &[Vec<f64>]) -> Vec<usize> {
        x.iter().map(|r| argmax(&m.predict_scores(r))).collect()
    }

    fn small() -> MlpParams {
        MlpParams {
            hidden: vec![16, 16],
            lr: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn separated_blobs() {
        let (x, y) = blobs(200, 2, 4.0, 1);
        let (xt, yt) = blobs(200, 2, 4.0, 2);
        let m = MlpModel::fit(&small(), &x, &y, 2, 3);
        assert!(accuracy(&predict(&m, &xt), &yt) >= 0.99);
    }

    #[test]
    fn xor() {
        let (x, y) = super::super::testdata::xor(50, 0.5, 3);
        let (xt, yt) = super::super::testdata::xor(50, 0.5, 4);
        let m = MlpModel::fit(&small(), &x, &y, 2, 3);
        assert!(accuracy(&predict(&m, &xt), &yt) >= 0.95);
    }

    #[test]
    fn reseeded_training_is_identical() {
        let (x, y) = blobs(30, 3, 2.0, 5);
        let (x2, y2) = repeat(&x, &y, 2);
        let p = MlpParams { hidden: vec![8], epochs: 5, ..Default::default() };
        assert_eq!(MlpModel::fit(&p, &x2, &y2, 3, 7), MlpModel::fit(&p, &x2, &y2, 3, 7));
    }

    #[test]
    fn epoch_cap_reports_non_convergence() {
        let (x, y) = blobs(20, 2, 1.0, 5);
        let p = MlpParams { hidden: vec![4], epochs: 2, ..Default::default() };
        let m = MlpModel::fit(&p, &x, &y, 2, 0);
        assert!(!m.converged);
        assert_eq!(m.loss_curve.len(), 2);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let sizes = [1, 2, 2];
        assert_eq!(n_params(&sizes), 10);
        let x = Array2::from_shape_vec((4, 1), vec![-1.0, -0.3, 0.4, 1.2]).unwrap();
        let y = [0, 1, 1, 0];
        let params = init_params(&sizes, 11);
        let (_, g) = loss_and_grad(&sizes, &params, x.view(), &y, 0.1);
        let h = 1e-6;
        for q in 0..params.len() {
            let mut p = params.clone();
            p[q] += h;
            let (lp, _) = loss_and_grad(&sizes, &p, x.view(), &y, 0.1);
            p[q] -= 2.0 * h;
            let (lm, _) = loss_and_grad(&sizes, &p, x.view(), &y, 0.1);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - g[q]).abs() / fd.abs().max(g[q].abs()).max(1e-8);
            assert!(rel < 1e-4 || (fd - g[q]).abs() < 1e-9, "param {q}: {fd} vs {}", g[q]);
        }
    }
}
