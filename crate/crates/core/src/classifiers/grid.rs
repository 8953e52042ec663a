//! Cross-validated accuracy and grid search over hyperparameters.

use std::collections::BTreeMap;

use super::{accuracy, train, ClassifierSpec, Family, TrainOptions};
use crate::dataset::{FeatureMatrix, FoldPlan};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, hash_indices};

/// Values to try per hyperparameter key, in text form.
pub type Grid = BTreeMap<String, Vec<String>>;

/// Mean validation accuracy over the first `folds` folds of `plan` (all folds
/// when `None`). Each fold trains with SMOTE inside its training part and a
/// seed derived from the spec seed, the fold and the subset.
pub fn cross_validate(
    spec: &ClassifierSpec,
    dev: &FeatureMatrix,
    plan: &FoldPlan,
    subset: &[usize],
    folds: Option<usize>,
    smote_k: Option<usize>,
) -> Result<f64> {
    let labels = dev.label_indices();
    let n_folds = folds.unwrap_or(plan.k).clamp(1, plan.k);
    let mut total = 0.0;
    for fold in 0..n_folds {
        let (tr, va) = plan.fold_rows(dev, fold)?;
        if tr.is_empty() || va.is_empty() {
            return Err(Error::Invalid(format!("fold {fold} has an empty side")));
        }
        let rows: Vec<Vec<f64>> = tr.iter().map(|&i| dev.rows[i].clone()).collect();
        let y: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let s = spec
            .clone()
            .with_seed(derive_seed(spec.seed, &[fold as u64, hash_indices(subset)]));
        let opts = TrainOptions {
            smote_k,
            fold: Some(fold),
        };
        let model = train(&s, &rows, &y, subset, &opts)?;
        let pred: Vec<usize> = va.iter().map(|&i| model.predict_row(&dev.rows[i])).collect();
        let truth: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
        total += accuracy(&pred, &truth);
    }
    Ok(total / n_folds as f64)
}

/// All points of the grid, keys in lexicographic order.
pub fn grid_points(grid: &Grid) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

/// Outcome of a grid search: the chosen spec and every scored point.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: ClassifierSpec,
    pub scores: Vec<(Vec<(String, String)>, f64)>,
}

/// Returns the spec with the best mean CV accuracy. Ties prefer points that
/// keep more keys at their default value, then the lexicographically smallest
/// value list.
pub fn grid_search(
    family: Family,
    dev: &FeatureMatrix,
    plan: &FoldPlan,
    grid: &Grid,
    subset: &[usize],
    seed: u64,
) -> Result<GridResult> {
    if grid.values().any(Vec::is_empty) {
        return Err(Error::Config(format!("empty value list in the {family} grid")));
    }
    let base = ClassifierSpec::new(family).with_seed(seed);
    let mut scored = Vec::new();
    for point in grid_points(grid) {
        let mut spec = base.clone();
        let mut defaults = 0usize;
        for (k, v) in &point {
            let mut probe = base.clone();
            probe.set_param(k, v)?;
            if probe == base {
                defaults += 1;
            }
            spec.set_param(k, v)?;
        }
        let acc = cross_validate(&spec, dev, plan, subset, None, Some(5))?;
        scored.push((point, acc, defaults, spec));
    }
    let best = scored
        .iter()
        .min_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(b.2.cmp(&a.2))
                .then_with(|| a.0.cmp(&b.0))
        })
        .map(|s| s.3.clone())
        .ok_or_else(|| Error::Config(format!("empty {family} grid")))?;
    Ok(GridResult {
        best,
        scores: scored.into_iter().map(|(p, a, _, _)| (p, a)).collect(),
    })
}
