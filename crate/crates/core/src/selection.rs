//! Feature selection: the Fisher discriminant ratio filter, sequential
//! forward floating search and a genetic algorithm over feature masks.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::grid::cross_validate;
use crate::classifiers::{ClassifierSpec, Family};
use crate::dataset::{FeatureMatrix, FoldPlan};
use crate::error::{Error, Result};
use crate::rng::{hash_str, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fdr,
    Sffs,
    Ga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Fdr, Algorithm::Sffs, Algorithm::Ga];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Fdr => "fdr",
            Algorithm::Sffs => "sffs",
            Algorithm::Ga => "ga",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Fdr => "FDR",
            Algorithm::Sffs => "SFFS",
            Algorithm::Ga => "GA",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown selector `{s}` (expected fdr, sffs or ga)")))
    }
}

/// Objective of the wrapper searches. Subsets are sorted 0-based indices.
pub trait SubsetScorer: Sync {
    fn n_features(&self) -> usize;
    fn score(&self, subset: &[usize]) -> Result<f64>;
}

/// Wraps a plain function as a scorer.
pub struct FnScorer<F> {
    pub n: usize,
    pub f: F,
    calls: AtomicUsize,
}

impl<F: Fn(&[usize]) -> f64 + Sync> FnScorer<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnScorer {
            n,
            f,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<F: Fn(&[usize]) -> f64 + Sync> SubsetScorer for FnScorer<F> {
    fn n_features(&self) -> usize {
        self.n
    }

    fn score(&self, subset: &[usize]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok((self.f)(subset))
    }
}

/// Mean CV accuracy of a classifier on the development matrix, with SMOTE
/// inside each training fold.
pub struct SubsetEvaluator<'a> {
    pub spec: ClassifierSpec,
    pub dev: &'a FeatureMatrix,
    pub plan: &'a FoldPlan,
    /// Only use the first this-many folds.
    pub folds: Option<usize>,
    pub smote_k: Option<usize>,
    calls: AtomicUsize,
}

impl<'a> SubsetEvaluator<'a> {
    pub fn new(spec: ClassifierSpec, dev: &'a FeatureMatrix, plan: &'a FoldPlan) -> Self {
        SubsetEvaluator {
            spec,
            dev,
            plan,
            folds: None,
            smote_k: Some(5),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_folds(mut self, folds: Option<usize>) -> Self {
        self.folds = folds;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl SubsetScorer for SubsetEvaluator<'_> {
    fn n_features(&self) -> usize {
        self.dev.n_features()
    }

    fn score(&self, subset: &[usize]) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        cross_validate(&self.spec, self.dev, self.plan, subset, self.folds, self.smote_k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    pub classifier: Option<Family>,
    pub seed: u64,
    /// Sorted 0-based feature indices.
    pub selected: Vec<usize>,
    /// Per-feature FDR scores (FDR only).
    pub scores: Vec<f64>,
    pub best_score: Option<f64>,
    /// Search log of `(subset, score)` steps.
    pub trace: Vec<(Vec<usize>, f64)>,
    pub evaluations: usize,
    pub config_hash: Option<String>,
}

fn join(ix: &[usize]) -> String {
    ix.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

fn split_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| match t.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::Invalid(format!("bad feature index `{t}`"))),
            Ok(i) => Ok(i - 1),
        })
        .collect()
}

impl SelectionResult {
    /// Text form; feature indices are written 1-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "algorithm={}", self.algorithm).unwrap();
        if let Some(c) = self.classifier {
            writeln!(s, "classifier={c}").unwrap();
        }
        writeln!(s, "seed={}", self.seed).unwrap();
        if let Some(h) = &self.config_hash {
            writeln!(s, "config_hash={h}").unwrap();
        }
        writeln!(s, "evaluations={}", self.evaluations).unwrap();
        if let Some(b) = self.best_score {
            writeln!(s, "best_score={b}").unwrap();
        }
        writeln!(s, "size={}", self.selected.len()).unwrap();
        writeln!(s, "selected={}", join(&self.selected)).unwrap();
        if !self.scores.is_empty() {
            let v: Vec<String> = self.scores.iter().map(|x| x.to_string()).collect();
            writeln!(s, "scores={}", v.join(",")).unwrap();
        }
        s.push_str("trace:\n");
        for (sub, sc) in &self.trace {
            writeln!(s, "{sc} {}", join(sub)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SelectionResult> {
        let mut r = SelectionResult {
            algorithm: Algorithm::Fdr,
            classifier: None,
            seed: 0,
            selected: Vec::new(),
            scores: Vec::new(),
            best_score: None,
            trace: Vec::new(),
            evaluations: 0,
            config_hash: None,
        };
        let mut seen_algorithm = false;
        let mut in_trace = false;
        for (n, line) in text.lines().enumerate() {
            let bad = || Error::Malformed {
                record: n + 1,
                message: format!("unexpected line `{line}`"),
            };
            if in_trace {
                let (sc, sub) = line.split_once(' ').unwrap_or((line, ""));
                r.trace
                    .push((split_indices(sub)?, sc.parse().map_err(|_| bad())?));
                continue;
            }
            if line == "trace:" {
                in_trace = true;
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(bad)?;
            match k {
                "algorithm" => {
                    r.algorithm = v.parse()?;
                    seen_algorithm = true;
                }
                "classifier" => r.classifier = Some(v.parse()?),
                "seed" => r.seed = v.parse().map_err(|_| bad())?,
                "config_hash" => r.config_hash = Some(v.to_string()),
                "evaluations" => r.evaluations = v.parse().map_err(|_| bad())?,
                "best_score" => r.best_score = Some(v.parse().map_err(|_| bad())?),
                "size" => {}
                "selected" => r.selected = split_indices(v)?,
                "scores" => {
                    r.scores = v
                        .split(',')
                        .map(|x| x.parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?
                }
                _ => return Err(bad()),
            }
        }
        if !seen_algorithm {
            return Err(Error::Header("selection file lacks algorithm=".into()));
        }
        Ok(r)
    }
}

/// Multi-class Fisher ratio per feature: sum over class pairs of the squared
/// mean difference over the summed (population) variances.
pub fn fdr_scores(rows: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let moments: Vec<Vec<(f64, f64)>> = classes
        .iter()
        .map(|&c| {
            let members: Vec<&Vec<f64>> =
                rows.iter().zip(labels).filter(|(_, l)| **l == c).map(|(r, _)| r).collect();
            let n = members.len() as f64;
            (0..d)
                .map(|j| {
                    let m = members.iter().map(|r| r[j]).sum::<f64>() / n;
                    let v = members.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
                    (m, v)
                })
                .collect()
        })
        .collect();
    (0..d)
        .map(|j| {
            let mut f = 0.0;
            for a in 0..classes.len() {
                for b in a + 1..classes.len() {
                    let (ma, va) = moments[a][j];
                    let (mb, vb) = moments[b][j];
                    let den = va + vb;
                    if den > 0.0 {
                        f += (ma - mb).powi(2) / den;
                    }
                }
            }
            f
        })
        .collect()
}

/// Keeps the features scoring strictly above `threshold`.
pub fn fdr_select(scores: &[f64], threshold: f64) -> Result<SelectionResult> {
    let selected: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > threshold).collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection(threshold));
    }
    Ok(SelectionResult {
        algorithm: Algorithm::Fdr,
        classifier: None,
        seed: 0,
        selected,
        scores: scores.to_vec(),
        best_score: None,
        trace: Vec::new(),
        evaluations: 0,
        config_hash: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffsParams {
    pub max_size: usize,
    /// Stop once this many consecutive subset sizes fail to beat the best
    /// score seen; `None` searches up to `max_size`.
    pub patience: Option<usize>,
}

impl Default for SffsParams {
    fn default() -> Self {
        SffsParams {
            max_size: 148,
            patience: None,
        }
    }
}

struct Cache<'a, S: ?Sized> {
    scorer: &'a S,
    memo: Mutex<HashMap<Vec<usize>, f64>>,
    evaluations: AtomicUsize,
}

impl<'a, S: SubsetScorer + ?Sized> Cache<'a, S> {
    fn new(scorer: &'a S) -> Self {
        Cache {
            scorer,
            memo: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    fn get(&self, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Ok(0.0);
        }
        if let Some(v) = self.memo.lock().unwrap().get(subset) {
            return Ok(*v);
        }
        let v = self.scorer.score(subset)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.memo.lock().unwrap().insert(subset.to_vec(), v);
        Ok(v)
    }

    /// Scores every subset in parallel, in input order.
    fn many(&self, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
        subsets.par_iter().map(|s| self.get(s)).collect()
    }
}

fn sorted_with(base: &[usize], extra: usize) -> Vec<usize> {
    let mut v = base.to_vec();
    let pos = v.binary_search(&extra).unwrap_err();
    v.insert(pos, extra);
    v
}

fn first_max(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Sequential forward floating search, returning the best subset over all
/// sizes visited (the smaller size on ties).
pub fn sffs<S: SubsetScorer + ?Sized>(scorer: &S, params: &SffsParams) -> Result<SelectionResult> {
    let d = scorer.n_features();
    let max_size = params.max_size.clamp(1, d);
    let cache = Cache::new(scorer);
    let mut current: Vec<usize> = Vec::new();
    let mut best_at: Vec<Option<(f64, Vec<usize>)>> = vec![None; max_size + 1];
    let mut trace = Vec::new();
    let mut overall = f64::NEG_INFINITY;
    let mut stale = 0usize;
    while current.len() < max_size {
        let candidates: Vec<usize> = (0..d).filter(|f| current.binary_search(f).is_err()).collect();
        let subsets: Vec<Vec<usize>> = candidates.iter().map(|&f| sorted_with(&current, f)).collect();
        let scores = cache.many(&subsets)?;
        let i = first_max(&scores);
        let added = candidates[i];
        current = subsets[i].clone();
        let k = current.len();
        if best_at[k].as_ref().is_none_or(|(s, _)| scores[i] > *s) {
            best_at[k] = Some((scores[i], current.clone()));
        }
        trace.push((current.clone(), scores[i]));

        // Conditional exclusion: drop a feature (never the one just added)
        // while that beats the best subset known at the smaller size.
        while current.len() > 2 {
            let removable: Vec<usize> = current.iter().copied().filter(|f| *f != added).collect();
            let reduced: Vec<Vec<usize>> = removable
                .iter()
                .map(|f| current.iter().copied().filter(|g| g != f).collect())
                .collect();
            let rs = cache.many(&reduced)?;
            let j = first_max(&rs);
            let k = current.len() - 1;
            if best_at[k].as_ref().is_some_and(|(s, _)| rs[j] > *s) {
                current = reduced[j].clone();
                best_at[k] = Some((rs[j], current.clone()));
                trace.push((current.clone(), rs[j]));
            } else {
                break;
            }
        }

        let best_now = best_at
            .iter()
            .flatten()
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_now > overall {
            overall = best_now;
            stale = 0;
        } else {
            stale += 1;
        }
        if params.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    let (score, selected) = best_at
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, Vec<usize>)>, (s, v)| match acc {
            Some((a, _)) if a >= s => acc,
            _ => Some((s, v)),
        })
        .expect("at least one size visited");
    Ok(SelectionResult {
        algorithm: Algorithm::Sffs,
        classifier: None,
        seed: 0,
        selected,
        scores: Vec::new(),
        best_score: Some(score),
        trace,
        evaluations: cache.evaluations.load(Ordering::Relaxed),
        config_hash: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub generations: usize,
    pub population: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability.
    pub mutation_rate: f64,
    /// Probability that a bit is set in the initial population.
    pub init_density: f64,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            generations: 100,
            population: 200,
            crossover_rate: 0.6,
            mutation_rate: 0.05,
            init_density: 0.5,
            seed: 0,
        }
    }
}

fn mask_subset(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

fn roulette(fitness: &[f64], rng: &mut crate::rng::Rng) -> usize {
    let total: f64 = fitness.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..fitness.len());
    }
    let mut r = rng.random::<f64>() * total;
    for (i, f) in fitness.iter().enumerate() {
        r -= f;
        if r < 0.0 {
            return i;
        }
    }
    fitness.len() - 1
}

/// Genetic search over feature masks with roulette selection, one elite,
/// single-point crossover and per-bit mutation. Returns the best non-empty
/// mask ever evaluated; the trace holds each generation's best individual,
/// starting with the initial population.
pub fn ga_select<S: SubsetScorer + ?Sized>(scorer: &S, p: &GaParams) -> Result<SelectionResult> {
    if p.population == 0 {
        return Err(Error::Config("ga population must be positive".into()));
    }
    let d = scorer.n_features();
    let cache = Cache::new(scorer);
    let mut rng = rng_from(p.seed, &[hash_str("ga")]);
    let mut pop: Vec<Vec<bool>> = (0..p.population)
        .map(|_| (0..d).map(|_| rng.random::<f64>() < p.init_density).collect())
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut trace = Vec::new();
    let mut generation = 0;
    loop {
        let subsets: Vec<Vec<usize>> = pop.iter().map(|m| mask_subset(m)).collect();
        let fitness = cache.many(&subsets)?;
        for (s, f) in subsets.iter().zip(&fitness) {
            if !s.is_empty() && best.as_ref().is_none_or(|(b, _)| f > b) {
                best = Some((*f, s.clone()));
            }
        }
        let elite = first_max(&fitness);
        trace.push((subsets[elite].clone(), fitness[elite]));
        if generation == p.generations {
            break;
        }
        generation += 1;

        let mut next = vec![pop[elite].clone()];
        while next.len() < p.population {
            let a = &pop[roulette(&fitness, &mut rng)];
            let b = &pop[roulette(&fitness, &mut rng)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if d > 1 && rng.random::<f64>() < p.crossover_rate {
                let point = rng.random_range(1..d);
                c1[point..].copy_from_slice(&b[point..]);
                c2[point..].copy_from_slice(&a[point..]);
            }
            for child in [&mut c1, &mut c2] {
                for bit in child.iter_mut() {
                    if rng.random::<f64>() < p.mutation_rate {
                        *bit = !*bit;
                    }
                }
            }
            next.push(c1);
            if next.len() < p.population {
                next.push(c2);
            }
        }
        pop = next;
    }
    let (score, selected) = best.unwrap_or((0.0, Vec::new()));
    Ok(SelectionResult {
        algorithm: Algorithm::Ga,
        classifier: None,
        seed: p.seed,
        selected,
        scores: Vec::new(),
        best_score: Some(score),
        trace,
        evaluations: cache.evaluations.load(Ordering::Relaxed),
        config_hash: None,
    })
}
