//! Support vector classification with a polynomial kernel. Binary problems
//! are solved by SMO with second-order working-set selection; multi-class
//! uses one-vs-one voting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dot;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (n_features * variance of the training matrix)`.
    Scale,
    Value(f64),
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Scale => f.write_str("scale"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "scale" {
            return Ok(Gamma::Scale);
        }
        s.parse()
            .map(Gamma::Value)
            .map_err(|_| Error::Config(format!("bad gamma `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub degree: u32,
    pub gamma: Gamma,
    pub coef0: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 0.1,
            degree: 3,
            gamma: Gamma::Scale,
            coef0: 0.0,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl PolyKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32)
    }
}

/// Resolves `gamma = scale` against a training matrix.
pub fn scaled_gamma(x: &[Vec<f64>]) -> f64 {
    let n = (x.len() * x.first().map_or(0, Vec::len)) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.iter().flatten().sum::<f64>() / n;
    let var = x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let d = x[0].len() as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Maximal KKT violation `m(alpha) - M(alpha)` at exit.
    pub kkt_gap: f64,
    /// Dual objective after each iteration, when requested.
    pub dual_trace: Vec<f64>,
}

/// Solves `max sum(a) - a'Qa/2` s.t. `0 <= a <= c`, `y'a = 0`, where
/// `Q_ij = y_i y_j K_ij` and `k` is the row-major kernel matrix.
pub fn solve_binary(
    k: &[f64],
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    trace: bool,
) -> SmoSolution {
    let n = y.len();
    let kk = |i: usize, j: usize| k[i * n + j];
    let mut a = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let mut dual_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    while iterations < max_iter {
        // Maximal violating i, then j by second-order gain.
        let mut gmax = f64::NEG_INFINITY;
        let mut gi = usize::MAX;
        for t in 0..n {
            let v = -y[t] * g[t];
            let in_up = if y[t] > 0.0 { !upper(a[t]) } else { !lower(a[t]) };
            if in_up && v >= gmax {
                gmax = v;
                gi = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gj = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(a[t]) } else { !upper(a[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            if gi == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = kk(gi, gi) + kk(t, t) - 2.0 * kk(gi, t);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    gj = t;
                }
            }
        }
        gap = gmax + gmax2;
        if gi == usize::MAX || gj == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        let (i, j) = (gi, gj);
        let (ai, aj) = (a[i], a[j]);
        let qij = y[i] * y[j] * kk(i, j);
        if y[i] != y[j] {
            let quad = (kk(i, i) + kk(j, j) + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let quad = (kk(i, i) + kk(j, j) - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - ai, a[j] - aj);
        for t in 0..n {
            g[t] += y[t] * (y[i] * kk(t, i) * di + y[j] * kk(t, j) * dj);
        }
        iterations += 1;
        if trace {
            dual_trace.push(0.5 * a.iter().zip(&g).map(|(a, g)| a * (1.0 - g)).sum::<f64>());
        }
    }

    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(a[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if lower(a[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    SmoSolution {
        alpha: a,
        rho,
        iterations,
        converged,
        kkt_gap: gap.max(0.0),
        dual_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// Compacted class voted for by a positive decision value.
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl BinaryMachine {
    pub fn decision(&self, kernel: &PolyKernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: PolyKernel,
    pub machines: Vec<BinaryMachine>,
    pub n_classes: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn fit(p: &SvmParams, x: &[Vec<f64>], y: &[usize], k: usize) -> Result<SvmModel> {
        if !(p.c > 0.0) {
            return Err(Error::Config(format!("svm c must be positive, got {}", p.c)));
        }
        let kernel = PolyKernel {
            gamma: match p.gamma {
                Gamma::Scale => scaled_gamma(x),
                Gamma::Value(v) => v,
            },
            coef0: p.coef0,
            degree: p.degree,
        };
        let mut machines = Vec::new();
        let mut converged = true;
        for pos in 0..k {
            for neg in pos + 1..k {
                let idx: Vec<usize> = (0..x.len()).filter(|&i| y[i] == pos || y[i] == neg).collect();
                let m = idx.len();
                let mut km = vec![0.0; m * m];
                for a in 0..m {
                    for b in a..m {
                        let v = kernel.eval(&x[idx[a]], &x[idx[b]]);
                        km[a * m + b] = v;
                        km[b * m + a] = v;
                    }
                }
                let yy: Vec<f64> = idx.iter().map(|&i| if y[i] == pos { 1.0 } else { -1.0 }).collect();
                let sol = solve_binary(&km, &yy, p.c, p.tol, p.max_iter, false);
                converged &= sol.converged;
                let mut support = Vec::new();
                let mut coef = Vec::new();
                for (t, &i) in idx.iter().enumerate() {
                    if sol.alpha[t] > 0.0 {
                        support.push(x[i].clone());
                        coef.push(sol.alpha[t] * yy[t]);
                    }
                }
                machines.push(BinaryMachine {
                    positive: pos,
                    negative: neg,
                    support,
                    coef,
                    rho: sol.rho,
                });
            }
        }
        Ok(SvmModel {
            kernel,
            machines,
            n_classes: k,
            converged,
        })
    }

    /// One-vs-one vote shares.
    pub fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for m in &self.machines {
            if m.decision(&self.kernel, x) > 0.0 {
                votes[m.positive] += 1.0;
            } else {
                votes[m.negative] += 1.0;
            }
        }
        let n = self.machines.len().max(1) as f64;
        votes.iter().map(|v| v / n).collect()
    }
}
