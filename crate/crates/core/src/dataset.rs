//! Feature matrices, subject-disjoint splitting, fold plans, standardization
//! and SMOTE balancing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::manifest::{self, N_FEATURES};
use crate::rng::{hash_str, rng_from, Rng};
use crate::trace::AgeGroup;

/// One row per session, labelled with the subject's age group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<AgeGroup>,
    pub subject_ids: Vec<String>,
    pub config_hash: Option<String>,
}

impl FeatureMatrix {
    pub fn push(&mut self, row: Vec<f64>, label: AgeGroup, subject_id: impl Into<String>) {
        self.rows.push(row);
        self.labels.push(label);
        self.subject_ids.push(subject_id.into());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(N_FEATURES, |r| r.len())
    }

    /// Labels as class indices 0..3.
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels.iter().map(|g| g.index()).collect()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.subject_ids.iter().map(String::as_str).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn take(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            config_hash: self.config_hash.clone(),
        }
    }

    /// Keeps the 0-based feature columns `cols`.
    pub fn columns(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        select_columns(&self.rows, cols)
    }

    /// Replaces labels with a seeded permutation of themselves.
    pub fn shuffle_labels(&mut self, seed: u64) {
        let mut rng = rng_from(seed, &[hash_str("shuffle-labels")]);
        self.labels.shuffle(&mut rng);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(h) = &self.config_hash {
            writeln!(w, "# config_hash={h}").map_err(|e| Error::io("<features>", e))?;
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = manifest::FEATURES.iter().map(|f| f.0.to_string()).collect();
        header.truncate(self.n_features());
        header.push("subject_id".into());
        header.push("group".into());
        out.write_record(&header)?;
        for ((row, g), id) in self.rows.iter().zip(&self.labels).zip(&self.subject_ids) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(id.clone());
            rec.push(g.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<FeatureMatrix> {
        let mut text = String::new();
        r.read_to_string(&mut text)
            .map_err(|e| Error::io("<features>", e))?;
        let mut config_hash = None;
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(h) = rest.trim().strip_prefix("config_hash=") {
                    config_hash = Some(h.trim().to_string());
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 3 || &header[n - 2] != "subject_id" || &header[n - 1] != "group" {
            return Err(Error::Header(
                "feature table must end with subject_id,group columns".into(),
            ));
        }
        for (i, name) in header.iter().take(n - 2).enumerate() {
            if manifest::FEATURES.get(i).map(|f| f.0) != Some(name) {
                return Err(Error::Header(format!(
                    "column {} is `{name}`, expected `{}`",
                    i + 1,
                    manifest::FEATURES.get(i).map_or("-", |f| f.0)
                )));
            }
        }
        let mut m = FeatureMatrix {
            config_hash,
            ..Default::default()
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .take(n - 2)
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Malformed {
                    record: line + 1,
                    message: e.to_string(),
                })?;
            let group: AgeGroup = rec[n - 1].parse()?;
            m.push(row, group, &rec[n - 2]);
        }
        Ok(m)
    }
}

pub fn select_columns(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect()
}

/// Subject ids per group, sorted lexicographically.
fn subjects_by_group(m: &FeatureMatrix) -> BTreeMap<AgeGroup, Vec<String>> {
    let mut by: BTreeMap<AgeGroup, BTreeSet<String>> = BTreeMap::new();
    for (id, g) in m.subject_ids.iter().zip(&m.labels) {
        by.entry(*g).or_default().insert(id.clone());
    }
    by.into_iter()
        .map(|(g, s)| (g, s.into_iter().collect()))
        .collect()
}

fn shuffled(ids: &[String], seed: u64, tag: &str, group: AgeGroup) -> Vec<String> {
    let mut ids = ids.to_vec();
    let mut rng = rng_from(seed, &[hash_str(tag), group.index() as u64]);
    ids.shuffle(&mut rng);
    ids
}

/// Group-stratified, subject-disjoint split. `ratio` is the development share.
pub fn split_dev_eval(
    m: &FeatureMatrix,
    ratio: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Invalid(format!("dev ratio {ratio} must lie in (0, 1)")));
    }
    let mut eval_ids = BTreeSet::new();
    for (g, ids) in subjects_by_group(m) {
        let n = ids.len();
        if n < 2 {
            return Err(Error::TooFewSubjects(g.to_string(), n));
        }
        let n_eval = ((n as f64 * (1.0 - ratio)).round() as usize).clamp(1, n - 1);
        eval_ids.extend(shuffled(&ids, seed, "split", g).into_iter().take(n_eval));
    }
    let (mut dev, mut eval) = (Vec::new(), Vec::new());
    for (i, id) in m.subject_ids.iter().enumerate() {
        if eval_ids.contains(id) {
            eval.push(i);
        } else {
            dev.push(i);
        }
    }
    Ok((m.take(&dev), m.take(&eval)))
}

/// Assignment of development subjects to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Subject id to fold, ordered by subject id.
    pub assignments: BTreeMap<String, usize>,
    pub config_hash: Option<String>,
}

impl FoldPlan {
    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.assignments.get(subject).copied()
    }

    /// Row indices of `m` used for training and validation in `fold`.
    pub fn fold_rows(&self, m: &FeatureMatrix, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, id) in m.subject_ids.iter().enumerate() {
            match self.fold_of(id) {
                Some(f) if f == fold => test.push(i),
                Some(_) => train.push(i),
                None => {
                    return Err(Error::Invalid(format!("subject `{id}` is not in the fold plan")))
                }
            }
        }
        Ok((train, test))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "k={}", self.k).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        if let Some(h) = &self.config_hash {
            writeln!(s, "config_hash={h}").unwrap();
        }
        for (id, f) in &self.assignments {
            writeln!(s, "{id},{f}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FoldPlan> {
        let mut k = None;
        let mut seed = None;
        let mut config_hash = None;
        let mut assignments = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::Malformed {
                record: n + 1,
                message: m,
            };
            if let Some(v) = line.strip_prefix("k=") {
                k = Some(v.parse().map_err(|_| bad(format!("bad k `{v}`")))?);
            } else if let Some(v) = line.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?);
            } else if let Some(v) = line.strip_prefix("config_hash=") {
                config_hash = Some(v.to_string());
            } else {
                let (id, f) = line
                    .rsplit_once(',')
                    .ok_or_else(|| bad(format!("expected `subject,fold`, got `{line}`")))?;
                let f: usize = f.parse().map_err(|_| bad(format!("bad fold `{f}`")))?;
                assignments.insert(id.to_string(), f);
            }
        }
        let k = k.ok_or_else(|| Error::Header("fold plan lacks k=".into()))?;
        let seed = seed.ok_or_else(|| Error::Header("fold plan lacks seed=".into()))?;
        if let Some((id, f)) = assignments.iter().find(|(_, f)| **f >= k) {
            return Err(Error::Invalid(format!("subject `{id}` has fold {f} >= k={k}")));
        }
        Ok(FoldPlan {
            k,
            seed,
            assignments,
            config_hash,
        })
    }
}

/// Stratified subject-level folds: within each group, shuffled subjects are
/// dealt to folds round-robin.
pub fn make_folds(dev: &FeatureMatrix, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Invalid(format!("need k >= 2 folds, got {k}")));
    }
    let mut assignments = BTreeMap::new();
    for (g, ids) in subjects_by_group(dev) {
        if ids.len() < k {
            return Err(Error::TooFewSubjects(g.to_string(), ids.len()));
        }
        for (i, id) in shuffled(&ids, seed, "folds", g).into_iter().enumerate() {
            assignments.insert(id, i % k);
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
        config_hash: dev.config_hash.clone(),
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `n_new` synthetic rows interpolated between rows of one class and their
/// `k` nearest same-class neighbours.
pub fn smote(rows: &[Vec<f64>], k: usize, n_new: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if n_new == 0 {
        return Ok(Vec::new());
    }
    if rows.len() < 2 {
        return Err(Error::SingletonClass);
    }
    let k = k.clamp(1, rows.len() - 1);
    let neighbours: Vec<Vec<usize>> = (0..rows.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..rows.len())
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&rows[i], &rows[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    Ok((0..n_new)
        .map(|_| {
            let i = rng.random_range(0..rows.len());
            let j = neighbours[i][rng.random_range(0..k)];
            let lambda: f64 = rng.random();
            rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(x, y)| x + lambda * (y - x))
                .collect()
        })
        .collect())
}

/// Oversamples every class up to the largest class count. Synthetic rows are
/// appended after the originals.
pub fn balance(
    rows: &[Vec<f64>],
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut by: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for (r, &l) in rows.iter().zip(labels) {
        by.entry(l).or_default().push(r.clone());
    }
    let target = by.values().map(Vec::len).max().unwrap_or(0);
    let mut out_rows = rows.to_vec();
    let mut out_labels = labels.to_vec();
    for (&class, members) in &by {
        let mut rng = rng_from(seed, &[hash_str("smote"), class as u64]);
        let new = smote(members, k, target - members.len(), &mut rng)?;
        out_labels.extend(std::iter::repeat_n(class, new.len()));
        out_rows.extend(new);
    }
    Ok((out_rows, out_labels))
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Features whose training variance is zero; they map to 0.
    pub fn zero_variance(&self) -> Vec<usize> {
        (0..self.std.len()).filter(|&j| self.std[j] == 0.0).collect()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

pub fn standardize_fit(rows: &[Vec<f64>]) -> Standardizer {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let std = (0..d)
        .map(|j| {
            let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            // Relative guard so that float noise on a constant column does
            // not blow up into unit variance.
            if v.sqrt() <= 1e-12 * mean[j].abs().max(1.0) {
                0.0
            } else {
                v.sqrt()
            }
        })
        .collect();
    Standardizer { mean, std }
}

pub fn standardize_apply(rows: &[Vec<f64>], params: &Standardizer) -> Vec<Vec<f64>> {
    params.apply(rows)
}
