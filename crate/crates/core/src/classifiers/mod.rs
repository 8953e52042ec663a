//! The seven classifier families, their hyperparameters, training on a
//! feature subset with fold-internal standardization and SMOTE, and the model
//! file container.

pub mod adaboost;
pub mod grid;
pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod model_file;
pub mod nb;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::dataset::{balance, select_columns, standardize_fit, Standardizer};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub use adaboost::{AdaBoostModel, AdaBoostParams};
pub use grid::{grid_search, Grid};
pub use knn::{KnnModel, KnnParams};
pub use logreg::{LogRegModel, LogRegParams};
pub use mlp::{MlpModel, MlpParams};
pub use model_file::{read_model, write_model};
pub use nb::{NbModel, NbParams};
pub use svm::{Gamma, SvmModel, SvmParams};
pub use tree::{MaxFeatures, RfModel, RfParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nb,
    LogReg,
    Knn,
    Rf,
    AdaBoost,
    Svm,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Nb,
        Family::LogReg,
        Family::Knn,
        Family::Rf,
        Family::AdaBoost,
        Family::Svm,
        Family::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Nb => "nb",
            Family::LogReg => "logreg",
            Family::Knn => "knn",
            Family::Rf => "rf",
            Family::AdaBoost => "adaboost",
            Family::Svm => "svm",
            Family::Mlp => "mlp",
        }
    }

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Family::Nb => "NB",
            Family::LogReg => "LR",
            Family::Knn => "KNN",
            Family::Rf => "RF",
            Family::AdaBoost => "AB",
            Family::Svm => "SVM",
            Family::Mlp => "MLP",
        }
    }

    pub fn tag(self) -> u8 {
        Family::ALL.iter().position(|f| *f == self).unwrap() as u8
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown classifier `{s}` (expected nb, logreg, knn, rf, adaboost, svm or mlp)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Params {
    Nb(NbParams),
    LogReg(LogRegParams),
    Knn(KnnParams),
    Rf(RfParams),
    AdaBoost(AdaBoostParams),
    Svm(SvmParams),
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub params: Params,
    pub seed: u64,
}

impl ClassifierSpec {
    /// Default hyperparameters of a family.
    pub fn new(family: Family) -> Self {
        let params = match family {
            Family::Nb => Params::Nb(NbParams::default()),
            Family::LogReg => Params::LogReg(LogRegParams::default()),
            Family::Knn => Params::Knn(KnnParams::default()),
            Family::Rf => Params::Rf(RfParams::default()),
            Family::AdaBoost => Params::AdaBoost(AdaBoostParams::default()),
            Family::Svm => Params::Svm(SvmParams::default()),
            Family::Mlp => Params::Mlp(MlpParams::default()),
        };
        ClassifierSpec { params, seed: 0 }
    }

    /// A cheaper variant used to score candidate subsets in fast runs.
    pub fn surrogate(family: Family) -> Self {
        let mut s = Self::new(family);
        match &mut s.params {
            Params::LogReg(p) => p.max_iter = 300,
            Params::Rf(p) => p.trees = 10,
            Params::AdaBoost(p) => p.estimators = 10,
            Params::Mlp(p) => {
                p.hidden = vec![32];
                p.epochs = 30;
            }
            _ => {}
        }
        s
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn family(&self) -> Family {
        match self.params {
            Params::Nb(_) => Family::Nb,
            Params::LogReg(_) => Family::LogReg,
            Params::Knn(_) => Family::Knn,
            Params::Rf(_) => Family::Rf,
            Params::AdaBoost(_) => Family::AdaBoost,
            Params::Svm(_) => Family::Svm,
            Params::Mlp(_) => Family::Mlp,
        }
    }

    /// Sets one hyperparameter from its text form, e.g. `("c", "0.5")`.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        let family = self.family();
        let unknown = || Error::Config(format!("unknown {family} parameter `{key}`"));
        match &mut self.params {
            Params::Nb(p) => match key {
                "var_smoothing" => p.var_smoothing = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::LogReg(p) => match key {
                "lambda" => p.lambda = parse(key, value)?,
                "c" => p.lambda = 1.0 / parse::<f64>(key, value)?,
                "max_iter" => p.max_iter = parse(key, value)?,
                "tol" => p.tol = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::Knn(p) => match key {
                "k" => p.k = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::Rf(p) => match key {
                "trees" => p.trees = parse(key, value)?,
                "max_depth" => p.max_depth = parse(key, value)?,
                "max_features" => p.max_features = parse(key, value)?,
                "bootstrap" => p.bootstrap = parse(key, value)?,
                "min_samples_split" => p.min_samples_split = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::AdaBoost(p) => match key {
                "estimators" => p.estimators = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::Svm(p) => match key {
                "c" => p.c = parse(key, value)?,
                "degree" => p.degree = parse(key, value)?,
                "gamma" => p.gamma = parse(key, value)?,
                "coef0" => p.coef0 = parse(key, value)?,
                "tol" => p.tol = parse(key, value)?,
                "max_iter" => p.max_iter = parse(key, value)?,
                _ => return Err(unknown()),
            },
            Params::Mlp(p) => match key {
                "hidden" => {
                    p.hidden = value
                        .split(|c: char| c == ',' || c == ' ' || c == '-')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse(key, s))
                        .collect::<Result<_>>()?
                }
                "lr" => p.lr = parse(key, value)?,
                "alpha" => p.alpha = parse(key, value)?,
                "batch_size" => p.batch_size = parse(key, value)?,
                "epochs" => p.epochs = parse(key, value)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }
}

/// The fitted parameters of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    /// Single-class training data.
    Constant,
    Nb(NbModel),
    LogReg(LogRegModel),
    Knn(KnnModel),
    Rf(RfModel),
    AdaBoost(AdaBoostModel),
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl Learner {
    /// Scores over the compacted classes `0..k`.
    fn scores(&self, x: &[f64], k: usize) -> Vec<f64> {
        match self {
            Learner::Constant => vec![1.0],
            Learner::Nb(m) => m.predict_scores(x),
            Learner::LogReg(m) => m.predict_scores(x),
            Learner::Knn(m) => m.predict_scores(x, k),
            Learner::Rf(m) => m.predict_scores(x),
            Learner::AdaBoost(m) => m.predict_scores(x),
            Learner::Svm(m) => m.predict_scores(x),
            Learner::Mlp(m) => m.predict_scores(x),
        }
    }
}

/// Fits a family on rows whose labels are already compacted to `0..k`.
/// Returns the learner and whether the optimizer converged.
pub fn fit(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[usize], k: usize) -> Result<(Learner, bool)> {
    if k < 2 {
        return Ok((Learner::Constant, true));
    }
    Ok(match &spec.params {
        Params::Nb(p) => (Learner::Nb(NbModel::fit(p, x, y, k)), true),
        Params::LogReg(p) => {
            let m = LogRegModel::fit(p, x, y, k);
            let c = m.converged;
            (Learner::LogReg(m), c)
        }
        Params::Knn(p) => (Learner::Knn(KnnModel::fit(p, x, y)), true),
        Params::Rf(p) => (Learner::Rf(RfModel::fit(p, x, y, k, spec.seed)), true),
        Params::AdaBoost(p) => (Learner::AdaBoost(AdaBoostModel::fit(p, x, y, k)), true),
        Params::Svm(p) => {
            let m = SvmModel::fit(p, x, y, k)?;
            let c = m.converged;
            (Learner::Svm(m), c)
        }
        Params::Mlp(p) => {
            let m = MlpModel::fit(p, x, y, k, spec.seed);
            let c = m.converged;
            (Learner::Mlp(m), c)
        }
    })
}

/// Training options around the learner itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Balance classes with SMOTE (in standardized space) using this many
    /// neighbours; `None` trains on the real rows only.
    pub smote_k: Option<usize>,
    pub fold: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            smote_k: Some(5),
            fold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    /// Original label of each compacted class.
    pub classes: Vec<usize>,
    pub standardizer: Standardizer,
    /// 0-based feature columns the model reads.
    pub subset: Vec<usize>,
    pub learner: Learner,
    pub converged: bool,
    pub fold: Option<usize>,
    pub n_train_real: usize,
    pub n_train_synthetic: usize,
}

static UNCONVERGED: [AtomicUsize; 7] = [const { AtomicUsize::new(0) }; 7];

/// Fits that hit their iteration cap since the last call, per family.
/// Resets the counters.
pub fn take_unconverged() -> Vec<(Family, usize)> {
    Family::ALL
        .iter()
        .map(|f| (*f, UNCONVERGED[f.tag() as usize].swap(0, Ordering::Relaxed)))
        .filter(|(_, n)| *n > 0)
        .collect()
}

/// Trains on the columns `subset` of `rows`: fits standardization on the real
/// rows, optionally balances with SMOTE, then fits the learner.
pub fn train(
    spec: &ClassifierSpec,
    rows: &[Vec<f64>],
    labels: &[usize],
    subset: &[usize],
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    if rows.is_empty() {
        return Err(Error::Invalid("no training rows".into()));
    }
    if subset.is_empty() {
        return Err(Error::Invalid("empty feature subset".into()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let compact: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();

    let x = select_columns(rows, subset);
    let standardizer = standardize_fit(&x);
    let x = standardizer.apply(&x);
    let (x, y) = match opts.smote_k {
        Some(k) if classes.len() > 1 => {
            let seed = derive_seed(spec.seed, &[0x5307e, opts.fold.map_or(u64::MAX, |f| f as u64)]);
            balance(&x, &compact, k, seed)?
        }
        _ => (x, compact),
    };
    if classes.len() < 2 {
        warn!("single-class training data; model predicts class {} for every row", classes[0]);
    }
    let (learner, converged) = fit(spec, &x, &y, classes.len())?;
    if !converged {
        debug!("{} did not converge within its iteration cap", spec.family());
        UNCONVERGED[spec.family().tag() as usize].fetch_add(1, Ordering::Relaxed);
    }
    Ok(TrainedModel {
        spec: spec.clone(),
        n_train_real: rows.len(),
        n_train_synthetic: x.len() - rows.len(),
        classes,
        standardizer,
        subset: subset.to_vec(),
        learner,
        converged,
        fold: opts.fold,
    })
}

impl TrainedModel {
    fn prepare(&self, row: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = self.subset.iter().map(|&c| row[c]).collect();
        self.standardizer.apply_row(&x)
    }

    /// Per-class scores in the order of `classes`.
    pub fn predict_scores_row(&self, row: &[f64]) -> Vec<f64> {
        self.learner.scores(&self.prepare(row), self.classes.len())
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        self.classes[argmax(&self.predict_scores_row(row))]
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn predict_scores(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.predict_scores_row(r)).collect()
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    use crate::rng::rng_from;

    /// Gaussian blobs with unit spread; class `c` is centred at `(c*sep, c*sep)`.
    pub fn blobs(n_per: usize, classes: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from(seed, &[1]);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..classes {
            for _ in 0..n_per {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let shift = c as f64 * sep;
                x.push(vec![a + shift, b + shift]);
                y.push(c);
            }
        }
        (x, y)
    }

    /// Four clusters at (+-1, +-1); the class is the sign of x*y.
    pub fn xor(n_per: usize, spread: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from(seed, &[2]);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &(cx, cy) in &[(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            for _ in 0..n_per {
                let px = cx + spread * (rng.random::<f64>() * 2.0 - 1.0);
                let py = cy + spread * (rng.random::<f64>() * 2.0 - 1.0);
                x.push(vec![px, py]);
                y.push(usize::from(cx * cy < 0.0));
            }
        }
        (x, y)
    }

    pub fn repeat(x: &[Vec<f64>], y: &[usize], times: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut xx = Vec::new();
        let mut yy = Vec::new();
        for _ in 0..times {
            xx.extend_from_slice(x);
            yy.extend_from_slice(y);
        }
        (xx, yy)
    }
}
