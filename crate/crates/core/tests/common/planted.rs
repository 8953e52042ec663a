//! Planted-signal selection problem: three informative columns among 148,
//! the rest pure noise.

#![allow(dead_code)]

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};

use strokelab::classifiers::{ClassifierSpec, Family};
use strokelab::dataset::{make_folds, FeatureMatrix};
use strokelab::rng::rng_from;
use strokelab::selection::{fdr_scores, fdr_select, ga_select, sffs, GaParams, SffsParams, SubsetEvaluator};
use strokelab::trace::AgeGroup;

pub const N_FEATURES: usize = 148;
/// Class means sit this many noise standard deviations apart on each
/// informative column.
pub const SEPARATION: f64 = 3.0;

pub struct Planted {
    pub matrix: FeatureMatrix,
    /// Sorted informative columns.
    pub informative: Vec<usize>,
}

pub fn planted(per_class: usize, seed: u64) -> Planted {
    let mut rng = rng_from(seed, &[0x706c_616e_7465_64]);
    let mut informative = sample(&mut rng, N_FEATURES, 3).into_vec();
    informative.sort_unstable();
    let mut m = FeatureMatrix::default();
    for (g, group) in AgeGroup::ALL.into_iter().enumerate() {
        for i in 0..per_class {
            let mut row: Vec<f64> = (0..N_FEATURES).map(|_| StandardNormal.sample(&mut rng)).collect();
            for &j in &informative {
                row[j] += SEPARATION * g as f64;
            }
            m.push(row, group, format!("P{g}{i:05}"));
        }
    }
    Planted { matrix: m, informative }
}

pub fn recovered(selected: &[usize], informative: &[usize]) -> bool {
    informative.iter().all(|j| selected.contains(j))
}

fn evaluator<'a>(p: &'a Planted, plan: &'a strokelab::dataset::FoldPlan) -> SubsetEvaluator<'a> {
    SubsetEvaluator::new(ClassifierSpec::new(Family::Nb), &p.matrix, plan)
}

pub fn sffs_selects(p: &Planted, seed: u64, params: &SffsParams) -> Vec<usize> {
    let plan = make_folds(&p.matrix, 5, seed).unwrap();
    sffs(&evaluator(p, &plan), params).unwrap().selected
}

pub fn ga_selects(p: &Planted, seed: u64, params: &GaParams) -> Vec<usize> {
    let plan = make_folds(&p.matrix, 5, seed).unwrap();
    let params = GaParams { seed, ..params.clone() };
    ga_select(&evaluator(p, &plan).with_folds(Some(2)), &params).unwrap().selected
}

pub fn fdr_selects(p: &Planted, threshold: f64) -> Vec<usize> {
    let labels: Vec<usize> = p.matrix.labels.iter().map(|g| g.index()).collect();
    fdr_select(&fdr_scores(&p.matrix.rows, &labels), threshold).unwrap().selected
}
