//! End-to-end runs: features, subject-disjoint split, selection per
//! (selector, classifier) cell, final training and evaluation, and the
//! report bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::grid::{grid_search, Grid};
use crate::classifiers::{accuracy, train, ClassifierSpec, Family, TrainOptions};
use crate::dataset::{make_folds, split_dev_eval, FeatureMatrix, FoldPlan};
use crate::error::{Error, Result};
use crate::features::manifest::{self, Category};
use crate::features::{extract_features, DirectionChangeConfig, ExtractConfig};
use crate::region::{default_tree, load_region, RegionMask};
use crate::rng::{derive_seed, hash_str};
use crate::selection::{
    fdr_scores, fdr_select, ga_select, sffs, Algorithm, GaParams, SelectionResult, SffsParams,
    SubsetEvaluator,
};
use crate::trace::{
    load_session_file, read_subjects_file, InteractionSession, SessionFormat, TestId,
    ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Reduced wrapper budgets and surrogate scoring models.
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalModel {
    /// Each development fold's model scores the evaluation set; accuracies
    /// are averaged.
    FoldAverage,
    /// One model trained on all development rows.
    Refit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub sessions: Option<PathBuf>,
    pub subjects: Option<PathBuf>,
    /// A precomputed feature matrix; replaces sessions and subjects.
    pub features: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: String,
    pub region: Option<PathBuf>,
}

fn default_format() -> String {
    "canonical".into()
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            sessions: None,
            subjects: None,
            features: None,
            format: default_format(),
            region: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub smooth: bool,
    pub noise_floor_px: f64,
    pub min_angle_deg: f64,
}

impl Default for ExtractSection {
    fn default() -> Self {
        let d = DirectionChangeConfig::default();
        ExtractSection {
            smooth: false,
            noise_floor_px: d.noise_floor_px,
            min_angle_deg: d.min_angle_deg,
        }
    }
}

impl ExtractSection {
    pub fn to_config(&self) -> ExtractConfig {
        ExtractConfig {
            direction: DirectionChangeConfig {
                noise_floor_px: self.noise_floor_px,
                min_angle_deg: self.min_angle_deg,
            },
            smooth: self.smooth,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub generations: Option<usize>,
    pub population: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SffsSection {
    pub max_size: Option<usize>,
    pub patience: Option<usize>,
}

/// Run configuration as written by the user. Mode-dependent settings left
/// out are filled in by [`PipelineConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub data: DataConfig,
    /// Report bundle directory; not part of the config hash.
    pub out: Option<PathBuf>,
    pub dev_ratio: Option<f64>,
    pub folds: Option<usize>,
    pub smote_k: Option<usize>,
    pub fdr_threshold: Option<f64>,
    pub final_model: Option<FinalModel>,
    #[serde(default)]
    pub shuffle_labels: bool,
    pub selectors: Option<Vec<Algorithm>>,
    pub classifiers: Option<Vec<Family>>,
    /// Folds used to score wrapper candidates.
    pub selection_folds: Option<usize>,
    /// Score wrapper candidates with cheaper models.
    pub surrogate: Option<bool>,
    #[serde(default)]
    pub sffs: SffsSection,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub grids: BTreeMap<Family, Grid>,
}

fn default_seed() -> u64 {
    42
}

fn default_mode() -> Mode {
    Mode::Fast
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let fast = self.mode == Mode::Fast;
        let ga = GaParams {
            generations: self.ga.generations.unwrap_or(if fast { 8 } else { 100 }),
            population: self.ga.population.unwrap_or(if fast { 20 } else { 200 }),
            crossover_rate: self.ga.crossover_rate.unwrap_or(0.6),
            mutation_rate: self.ga.mutation_rate.unwrap_or(0.05),
            init_density: 0.5,
            seed: derive_seed(self.seed, &[hash_str("ga")]),
        };
        let sffs = SffsParams {
            max_size: self.sffs.max_size.unwrap_or(if fast { 8 } else { manifest::N_FEATURES }),
            patience: self.sffs.patience.or(if fast { Some(2) } else { None }),
        };
        let r = ResolvedConfig {
            seed: self.seed,
            mode: self.mode,
            data: self.data.clone(),
            dev_ratio: self.dev_ratio.unwrap_or(0.8),
            folds: self.folds.unwrap_or(5),
            smote_k: self.smote_k.unwrap_or(5),
            fdr_threshold: self.fdr_threshold.unwrap_or(0.05),
            final_model: self.final_model.unwrap_or(FinalModel::FoldAverage),
            shuffle_labels: self.shuffle_labels,
            selectors: self.selectors.clone().unwrap_or_else(|| Algorithm::ALL.to_vec()),
            classifiers: self.classifiers.clone().unwrap_or_else(|| Family::ALL.to_vec()),
            selection_folds: self.selection_folds.unwrap_or(if fast { 2 } else { 5 }),
            surrogate: self.surrogate.unwrap_or(fast),
            sffs,
            ga,
            extract: self.extract.clone(),
            grids: self.grids.clone(),
            manifest_hash: manifest::manifest_hash(),
        };
        r.validate()?;
        Ok(r)
    }
}

/// Fully specified run settings; the config hash covers exactly this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub mode: Mode,
    pub data: DataConfig,
    pub dev_ratio: f64,
    pub folds: usize,
    pub smote_k: usize,
    pub fdr_threshold: f64,
    pub final_model: FinalModel,
    pub shuffle_labels: bool,
    pub selectors: Vec<Algorithm>,
    pub classifiers: Vec<Family>,
    pub selection_folds: usize,
    pub surrogate: bool,
    pub sffs: SffsParams,
    pub ga: GaParams,
    pub extract: ExtractSection,
    pub grids: BTreeMap<Family, Grid>,
    pub manifest_hash: String,
}

impl ResolvedConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dev_ratio > 0.0 && self.dev_ratio < 1.0) {
            return bad("dev_ratio must lie in (0, 1)");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.selection_folds == 0 || self.selection_folds > self.folds {
            return bad("selection_folds must lie in 1..=folds");
        }
        if self.selectors.is_empty() || self.classifiers.is_empty() {
            return bad("at least one selector and one classifier are required");
        }
        if self.ga.population == 0 {
            return bad("ga population must be positive");
        }
        for (name, p) in [("crossover_rate", self.ga.crossover_rate), ("mutation_rate", self.ga.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("ga {name} {p} outside [0,1]")));
            }
        }
        if self.sffs.max_size == 0 {
            return bad("sffs max_size must be positive");
        }
        for (family, grid) in &self.grids {
            for (key, values) in grid {
                let mut probe = ClassifierSpec::new(*family);
                for v in values {
                    probe
                        .set_param(key, v)
                        .map_err(|e| Error::Config(format!("grids.{family}: {e}")))?;
                }
            }
        }
        self.data.format.parse::<SessionFormat>()?;
        Ok(())
    }

    /// SHA-256 over the resolved settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// `config_hash=` line followed by the settings as JSON.
    pub fn to_lock(&self) -> String {
        let mut s = format!("config_hash={}\n", self.hash());
        s.push_str(&serde_json::to_string_pretty(self).expect("config serializes"));
        s.push('\n');
        s
    }

    pub fn from_lock(text: &str) -> Result<(String, ResolvedConfig)> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let hash = first
            .strip_prefix("config_hash=")
            .ok_or_else(|| Error::HashMismatch("config.lock has no config_hash".into()))?;
        Ok((hash.trim().to_string(), serde_json::from_str(body)?))
    }
}

fn stage(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage,
            message: other.to_string(),
        },
    }
}

/// Parses and validates every session file of a directory, in file-name
/// order.
pub fn ingest_dir(
    dir: &Path,
    format: SessionFormat,
) -> Result<Vec<(PathBuf, InteractionSession, ValidationReport)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Invalid(format!("no sessions found in {}", dir.display())));
    }
    files
        .into_par_iter()
        .map(|p| {
            let (s, r) = load_session_file(&p, format)?;
            Ok((p, s, r))
        })
        .collect()
}

/// One feature row per subject, from the subject's first drawing-test
/// session. Sessions of other tests and subjects missing from the subjects
/// table are skipped with a warning.
pub fn extract_matrix(
    sessions: &[InteractionSession],
    subjects: &[crate::trace::SubjectRecord],
    region: &RegionMask,
    cfg: &ExtractConfig,
) -> Result<(FeatureMatrix, Vec<String>)> {
    let mut notes = Vec::new();
    let by_id: BTreeMap<&str, &crate::trace::SubjectRecord> =
        subjects.iter().map(|s| (s.subject_id.as_str(), s)).collect();
    let mut chosen: BTreeMap<&str, &InteractionSession> = BTreeMap::new();
    for s in sessions {
        if s.test_id != TestId::DRAWING {
            continue;
        }
        if !by_id.contains_key(s.subject_id.as_str()) {
            notes.push(format!("subject {} has no subjects-table row; skipped", s.subject_id));
            continue;
        }
        if chosen.contains_key(s.subject_id.as_str()) {
            notes.push(format!("subject {} has several drawing sessions; kept the first", s.subject_id));
        } else {
            chosen.insert(s.subject_id.as_str(), s);
        }
    }
    if chosen.is_empty() {
        return Err(Error::Invalid("no drawing-test sessions with known subjects".into()));
    }
    let rows: Vec<Result<(Vec<f64>, Option<String>)>> = chosen
        .values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| {
            let (mask, note) = match s.canvas_size() {
                Some((w, h)) if (w, h) != (region.width, region.height) => region.clone().for_canvas(w, h),
                _ => (region.clone(), None),
            };
            Ok((extract_features(s, &mask, cfg)?.0, note))
        })
        .collect();
    let mut m = FeatureMatrix::default();
    for ((id, _), row) in chosen.iter().zip(rows) {
        let (row, note) = row?;
        if let Some(n) = note {
            notes.push(format!("{id}: {n}"));
        }
        m.push(row, by_id[id].age_group()?, *id);
    }
    Ok((m, notes))
}

/// Share (%) of each category among the selected features, averaged over
/// the results.
pub fn category_histogram(results: &[&SelectionResult]) -> Vec<(Category, f64)> {
    let mut acc = [0.0f64; 6];
    let mut n = 0usize;
    for r in results {
        if r.selected.is_empty() {
            continue;
        }
        n += 1;
        for &i in &r.selected {
            let c = manifest::category(i);
            acc[Category::ALL.iter().position(|k| *k == c).unwrap()] += 100.0 / r.selected.len() as f64;
        }
    }
    Category::ALL
        .iter()
        .zip(acc)
        .map(|(c, v)| (*c, if n == 0 { 0.0 } else { v / n as f64 }))
        .collect()
}

fn category_counts(subset: &[usize]) -> [usize; 6] {
    let mut c = [0usize; 6];
    for &i in subset {
        let k = manifest::category(i);
        c[Category::ALL.iter().position(|x| *x == k).unwrap()] += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub selector: Algorithm,
    pub classifier: Family,
    /// Evaluation accuracy in percent.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub subset: Vec<usize>,
    pub spec: ClassifierSpec,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub config: ResolvedConfig,
    pub config_hash: String,
    pub cells: Vec<CellResult>,
    /// Distinct selection results: one FDR subset shared by all classifiers
    /// and one wrapper subset per classifier.
    pub selections: Vec<SelectionResult>,
    pub histogram: Vec<(Category, f64)>,
    pub n_dev: usize,
    pub n_eval: usize,
    pub features: FeatureMatrix,
    pub folds: FoldPlan,
    /// Timing and progress lines; not part of the deterministic body.
    pub log: Vec<String>,
}

impl EvaluationReport {
    pub fn cell(&self, selector: Algorithm, classifier: Family) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.selector == selector && c.classifier == classifier)
    }

    pub fn row_average(&self, selector: Algorithm) -> Option<f64> {
        let v: Vec<f64> = self.cells.iter().filter(|c| c.selector == selector).map(|c| c.accuracy).collect();
        (!v.is_empty()).then(|| crate::stats::mean(&v))
    }

    pub fn selection(&self, selector: Algorithm, classifier: Family) -> Option<&SelectionResult> {
        self.selections.iter().find(|s| {
            s.algorithm == selector && (selector == Algorithm::Fdr || s.classifier == Some(classifier))
        })
    }

    pub fn table4_csv(&self) -> String {
        let cfg = &self.config;
        let mut s = format!("# config_hash={}\n", self.config_hash);
        s.push_str("selector");
        for f in &cfg.classifiers {
            write!(s, ",{}", f.label()).unwrap();
        }
        s.push_str(",average\n");
        for a in &cfg.selectors {
            s.push_str(a.label());
            for f in &cfg.classifiers {
                write!(s, ",{:.2}", self.cell(*a, *f).map_or(f64::NAN, |c| c.accuracy)).unwrap();
            }
            writeln!(s, ",{:.2}", self.row_average(*a).unwrap_or(f64::NAN)).unwrap();
        }
        s
    }

    /// Fixed-width table; the best cell is marked with `*`.
    pub fn table4_txt(&self) -> String {
        let cfg = &self.config;
        let best = self.cells.iter().map(|c| c.accuracy).fold(f64::NEG_INFINITY, f64::max);
        let mut s = String::new();
        writeln!(s, "Age group classification accuracy (%) on the evaluation set").unwrap();
        writeln!(
            s,
            "{} development / {} evaluation subjects, seed {}, {} mode",
            self.n_dev,
            self.n_eval,
            cfg.seed,
            if cfg.mode == Mode::Fast { "fast" } else { "full" }
        )
        .unwrap();
        writeln!(s).unwrap();
        write!(s, "{:<8}", "").unwrap();
        for f in &cfg.classifiers {
            write!(s, "{:>9}", f.label()).unwrap();
        }
        writeln!(s, "{:>9}", "Avg").unwrap();
        for a in &cfg.selectors {
            write!(s, "{:<8}", a.label()).unwrap();
            for f in &cfg.classifiers {
                let v = self.cell(*a, *f).map_or(f64::NAN, |c| c.accuracy);
                let mark = if v == best { "*" } else { " " };
                write!(s, "{:>8.2}{mark}", v).unwrap();
            }
            writeln!(s, "{:>8.2}", self.row_average(*a).unwrap_or(f64::NAN)).unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "Selected subset sizes").unwrap();
        for a in &cfg.selectors {
            write!(s, "{:<8}", a.label()).unwrap();
            for f in &cfg.classifiers {
                write!(s, "{:>9}", self.cell(*a, *f).map_or(0, |c| c.subset.len())).unwrap();
            }
            writeln!(s).unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "config_hash={}", self.config_hash).unwrap();
        s
    }

    /// Per-cell selected-feature counts by category.
    pub fn fig3_csv(&self) -> String {
        let mut s = format!("# config_hash={}\nselector,classifier,size", self.config_hash);
        for c in Category::ALL {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
        for c in &self.cells {
            write!(s, "{},{},{}", c.selector, c.classifier, c.subset.len()).unwrap();
            for n in category_counts(&c.subset) {
                write!(s, ",{n}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn fig4_csv(&self) -> String {
        let mut s = format!("# config_hash={}\ncategory,percent\n", self.config_hash);
        for (c, p) in &self.histogram {
            writeln!(s, "{c},{p:.2}").unwrap();
        }
        s
    }

    /// Files of the report bundle whose bytes depend only on the config.
    pub fn body(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("config.lock".to_string(), self.config.to_lock()),
            ("features.csv".to_string(), self.features.to_csv_string()),
            ("folds.txt".to_string(), self.folds.to_text()),
        ];
        for sel in &self.selections {
            let name = match sel.classifier {
                Some(c) => format!("selections/{}_{}.txt", sel.algorithm, c),
                None => format!("selections/{}.txt", sel.algorithm),
            };
            files.push((name, sel.to_text()));
        }
        files.push(("table4.csv".into(), self.table4_csv()));
        files.push(("table4.txt".into(), self.table4_txt()));
        files.push(("fig3.csv".into(), self.fig3_csv()));
        files.push(("fig4.csv".into(), self.fig4_csv()));
        files
    }

    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("selections")).map_err(|e| Error::io(dir, e))?;
        for (name, text) in self.body() {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        let p = dir.join("runtime.log");
        let mut log = self.log.join("\n");
        log.push('\n');
        std::fs::write(&p, log).map_err(|e| Error::io(&p, e))
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds the feature matrix named by the data section.
pub fn load_matrix(cfg: &ResolvedConfig, base: &Path) -> Result<(FeatureMatrix, Vec<String>)> {
    if let Some(f) = &cfg.data.features {
        let p = resolve_path(base, f);
        let file = std::fs::File::open(&p).map_err(|e| Error::io(&p, e)).map_err(stage("features"))?;
        return Ok((FeatureMatrix::read_csv(file).map_err(stage("features"))?, Vec::new()));
    }
    let (Some(sessions), Some(subjects)) = (&cfg.data.sessions, &cfg.data.subjects) else {
        return Err(Error::Stage {
            stage: "ingest",
            message: "config needs data.features or both data.sessions and data.subjects".into(),
        });
    };
    let format: SessionFormat = cfg.data.format.parse()?;
    let loaded = ingest_dir(&resolve_path(base, sessions), format).map_err(stage("ingest"))?;
    let subjects = read_subjects_file(&resolve_path(base, subjects)).map_err(stage("ingest"))?;
    let (region, mut notes) = match &cfg.data.region {
        Some(r) => load_region(&resolve_path(base, r), None).map_err(stage("region"))?,
        None => (default_tree(), Vec::new()),
    };
    let mut repaired = 0;
    for (p, _, r) in &loaded {
        if r.repairs().next().is_some() {
            repaired += 1;
        }
        for f in r.flags() {
            notes.push(format!("{}: {f}", p.display()));
        }
    }
    if repaired > 0 {
        notes.push(format!("{repaired} sessions needed stream repairs"));
    }
    let sessions: Vec<InteractionSession> = loaded.into_iter().map(|(_, s, _)| s).collect();
    let (m, more) = extract_matrix(&sessions, &subjects, &region, &cfg.extract.to_config())
        .map_err(stage("extract"))?;
    notes.extend(more);
    Ok((m, notes))
}

fn scoring_spec(cfg: &ResolvedConfig, family: Family, algo: Algorithm) -> ClassifierSpec {
    let base = if cfg.surrogate {
        ClassifierSpec::surrogate(family)
    } else {
        ClassifierSpec::new(family)
    };
    base.with_seed(derive_seed(cfg.seed, &[hash_str("select"), hash_str(algo.as_str()), family.tag() as u64]))
}

fn assert_disjoint(stage_name: &'static str, inputs: &FeatureMatrix, eval_ids: &BTreeSet<String>) -> Result<()> {
    if let Some(id) = inputs.subject_ids.iter().find(|id| eval_ids.contains(*id)) {
        return Err(Error::Stage {
            stage: stage_name,
            message: format!("evaluation subject {id} leaked into the stage input"),
        });
    }
    Ok(())
}

/// Runs selection, training and evaluation for every configured cell.
pub fn run_on_matrix(cfg: &ResolvedConfig, mut matrix: FeatureMatrix) -> Result<EvaluationReport> {
    let t0 = Instant::now();
    let hash = cfg.hash();
    let mut log = vec![format!("config_hash={hash}")];
    if matrix.n_features() != manifest::N_FEATURES {
        return Err(Error::Stage {
            stage: "features",
            message: format!("expected {} features, found {}", manifest::N_FEATURES, matrix.n_features()),
        });
    }
    if cfg.shuffle_labels {
        matrix.shuffle_labels(derive_seed(cfg.seed, &[hash_str("shuffle-labels")]));
        log.push("labels shuffled across subjects (control run)".into());
    }
    matrix.config_hash = Some(hash.clone());

    let (dev, eval) = split_dev_eval(&matrix, cfg.dev_ratio, cfg.seed).map_err(stage("split"))?;
    let eval_ids: BTreeSet<String> = eval.subject_ids.iter().cloned().collect();
    assert_disjoint("split", &dev, &eval_ids)?;
    let mut plan = make_folds(&dev, cfg.folds, cfg.seed).map_err(stage("folds"))?;
    plan.config_hash = Some(hash.clone());
    log.push(format!("{} development and {} evaluation subjects", dev.len(), eval.len()));

    // Selection only ever sees the development matrix.
    assert_disjoint("selection", &dev, &eval_ids)?;
    let mut selections = Vec::new();
    if cfg.selectors.contains(&Algorithm::Fdr) {
        let scores = fdr_scores(&dev.rows, &dev.label_indices());
        let mut r = match fdr_select(&scores, cfg.fdr_threshold) {
            Ok(r) => r,
            Err(Error::EmptySelection(t)) => {
                let best = crate::classifiers::argmax(&scores);
                log.push(format!("no feature passes FDR threshold {t}; keeping the top feature {}", best + 1));
                let mut r = fdr_select(&scores, f64::NEG_INFINITY)?;
                r.selected = vec![best];
                r
            }
            Err(e) => return Err(e),
        };
        r.seed = cfg.seed;
        r.config_hash = Some(hash.clone());
        log.push(format!("fdr selected {} features", r.selected.len()));
        selections.push(r);
    }
    let wrapper_jobs: Vec<(Algorithm, Family)> = cfg
        .selectors
        .iter()
        .filter(|a| **a != Algorithm::Fdr)
        .flat_map(|a| cfg.classifiers.iter().map(move |f| (*a, *f)))
        .collect();
    let wrapped: Vec<Result<(SelectionResult, f64)>> = wrapper_jobs
        .par_iter()
        .map(|&(algo, family)| {
            let t = Instant::now();
            let evaluator = SubsetEvaluator::new(scoring_spec(cfg, family, algo), &dev, &plan)
                .with_folds(Some(cfg.selection_folds));
            let mut evaluator = evaluator;
            evaluator.smote_k = Some(cfg.smote_k);
            let mut r = match algo {
                Algorithm::Sffs => sffs(&evaluator, &cfg.sffs)?,
                Algorithm::Ga => {
                    let p = GaParams {
                        seed: derive_seed(cfg.ga.seed, &[family.tag() as u64]),
                        ..cfg.ga.clone()
                    };
                    ga_select(&evaluator, &p)?
                }
                Algorithm::Fdr => unreachable!(),
            };
            r.classifier = Some(family);
            r.seed = cfg.seed;
            r.config_hash = Some(hash.clone());
            Ok((r, t.elapsed().as_secs_f64()))
        })
        .collect();
    for w in wrapped {
        let (r, secs) = w.map_err(stage("selection"))?;
        log.push(format!(
            "{} {}: {} features, {} evaluations, {secs:.1} s",
            r.algorithm,
            r.classifier.unwrap(),
            r.selected.len(),
            r.evaluations
        ));
        selections.push(r);
    }

    assert_disjoint("training", &dev, &eval_ids)?;
    let dev_labels = dev.label_indices();
    let eval_labels = eval.label_indices();
    let cells_jobs: Vec<(Algorithm, Family)> = cfg
        .selectors
        .iter()
        .flat_map(|a| cfg.classifiers.iter().map(move |f| (*a, *f)))
        .collect();
    let cells: Vec<Result<(CellResult, f64)>> = cells_jobs
        .par_iter()
        .map(|&(algo, family)| {
            let t = Instant::now();
            let sel = selections
                .iter()
                .find(|s| s.algorithm == algo && (algo == Algorithm::Fdr || s.classifier == Some(family)))
                .expect("selection computed");
            let subset = sel.selected.clone();
            let seed = derive_seed(cfg.seed, &[hash_str("final"), hash_str(algo.as_str()), family.tag() as u64]);
            let spec = match cfg.grids.get(&family) {
                Some(grid) if !grid.is_empty() => grid_search(family, &dev, &plan, grid, &subset, seed)?.best,
                _ => ClassifierSpec::new(family).with_seed(seed),
            };
            let mut fold_acc = Vec::new();
            let fit_eval = |rows: &[usize], fold: Option<usize>| -> Result<f64> {
                let x: Vec<Vec<f64>> = rows.iter().map(|&i| dev.rows[i].clone()).collect();
                let y: Vec<usize> = rows.iter().map(|&i| dev_labels[i]).collect();
                let s = spec.clone().with_seed(derive_seed(spec.seed, &[fold.map_or(u64::MAX, |f| f as u64)]));
                let opts = TrainOptions {
                    smote_k: Some(cfg.smote_k),
                    fold,
                };
                let model = train(&s, &x, &y, &subset, &opts)?;
                Ok(accuracy(&model.predict(&eval.rows), &eval_labels))
            };
            match cfg.final_model {
                FinalModel::FoldAverage => {
                    for fold in 0..plan.k {
                        let (tr, _) = plan.fold_rows(&dev, fold)?;
                        fold_acc.push(fit_eval(&tr, Some(fold))?);
                    }
                }
                FinalModel::Refit => {
                    let all: Vec<usize> = (0..dev.len()).collect();
                    fold_acc.push(fit_eval(&all, None)?);
                }
            }
            let acc = 100.0 * crate::stats::mean(&fold_acc);
            Ok((
                CellResult {
                    selector: algo,
                    classifier: family,
                    accuracy: acc,
                    fold_accuracies: fold_acc,
                    subset,
                    spec,
                },
                t.elapsed().as_secs_f64(),
            ))
        })
        .collect();
    let mut out = Vec::new();
    for c in cells {
        let (c, secs) = c.map_err(stage("training"))?;
        log.push(format!("{} {}: {:.2}% ({secs:.1} s)", c.selector, c.classifier, c.accuracy));
        out.push(c);
    }
    let refs: Vec<&SelectionResult> = selections.iter().collect();
    let histogram = category_histogram(&refs);
    for (family, n) in crate::classifiers::take_unconverged() {
        warn!("{n} {family} fits stopped at their iteration cap");
        log.push(format!("{n} {family} fits stopped at their iteration cap"));
    }
    log.push(format!("total {:.1} s", t0.elapsed().as_secs_f64()));
    for l in &log {
        info!("{l}");
    }
    Ok(EvaluationReport {
        config: cfg.clone(),
        config_hash: hash,
        cells: out,
        selections,
        histogram,
        n_dev: dev.len(),
        n_eval: eval.len(),
        features: matrix,
        folds: plan,
        log,
    })
}

/// Loads the inputs named by the config (relative to `base`) and runs.
pub fn run_pipeline(cfg: &ResolvedConfig, base: &Path) -> Result<EvaluationReport> {
    let (matrix, notes) = load_matrix(cfg, base)?;
    for n in &notes {
        warn!("{n}");
    }
    let mut report = run_on_matrix(cfg, matrix)?;
    report.log.splice(1..1, notes);
    Ok(report)
}

fn embedded_hash(text: &str) -> Option<&str> {
    text.lines().find_map(|l| {
        l.trim_start_matches("# ")
            .strip_prefix("config_hash=")
            .map(str::trim)
    })
}

/// Checks that every artifact of a bundle embeds the hash recorded in its
/// `config.lock`, then returns the text table.
pub fn verify_bundle(dir: &Path) -> Result<String> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let (expected, resolved) = ResolvedConfig::from_lock(&read("config.lock")?)?;
    if resolved.hash() != expected {
        return Err(Error::HashMismatch("config.lock contents do not match its hash".into()));
    }
    let mut names = vec![
        "features.csv".to_string(),
        "folds.txt".to_string(),
        "table4.csv".into(),
        "table4.txt".into(),
        "fig3.csv".into(),
        "fig4.csv".into(),
    ];
    if let Ok(entries) = std::fs::read_dir(dir.join("selections")) {
        let mut sel: Vec<String> = entries
            .filter_map(|e| e.ok())
            .map(|e| format!("selections/{}", e.file_name().to_string_lossy()))
            .collect();
        sel.sort();
        names.extend(sel);
    }
    for name in &names {
        let text = read(name)?;
        match embedded_hash(&text) {
            Some(h) if h == expected => {}
            Some(h) => return Err(Error::HashMismatch(format!("{name} has {h}, config.lock has {expected}"))),
            None => return Err(Error::HashMismatch(format!("{name} carries no config hash"))),
        }
    }
    read("table4.txt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::manifest::N_FEATURES;

    fn sel(selected: Vec<usize>) -> SelectionResult {
        let mut r = fdr_select(&[1.0], 0.0).unwrap();
        r.selected = selected;
        r
    }

    #[test]
    fn histogram_all_selected_matches_manifest() {
        let r = sel((0..N_FEATURES).collect());
        let h = category_histogram(&[&r]);
        for ((c, p), (c2, n)) in h.iter().zip(manifest::category_counts()) {
            assert_eq!(*c, c2);
            assert!((p - 100.0 * n as f64 / N_FEATURES as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn histogram_drawing_only() {
        let r = sel(vec![120, 130]);
        let h = category_histogram(&[&r]);
        assert_eq!(h[5], (Category::Drawing, 100.0));
        assert!((h.iter().map(|x| x.1).sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_averages_results() {
        let a = sel(vec![0]);
        let b = sel(vec![120]);
        let h = category_histogram(&[&a, &b]);
        assert_eq!(h[0].1, 50.0);
        assert_eq!(h[5].1, 50.0);
    }

    #[test]
    fn config_defaults_and_hash() {
        let c = PipelineConfig::from_toml("seed = 3\nout = \"a\"\n").unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.selectors.len(), 3);
        assert_eq!(r.classifiers.len(), 7);
        assert_eq!(r.selection_folds, 2);
        let c2 = PipelineConfig::from_toml("seed = 3\nout = \"b\"\n").unwrap();
        assert_eq!(c2.resolve().unwrap().hash(), r.hash());
        let c3 = PipelineConfig::from_toml("seed = 4\n").unwrap();
        assert_ne!(c3.resolve().unwrap().hash(), r.hash());
        let full = PipelineConfig::from_toml("mode = \"full\"\n").unwrap().resolve().unwrap();
        assert_eq!((full.ga.population, full.ga.generations), (200, 100));
        assert_eq!(full.sffs.patience, None);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(PipelineConfig::from_toml("sed = 3\n").is_err());
        assert!(PipelineConfig::from_toml("dev_ratio = 1.5\n").unwrap().resolve().is_err());
        assert!(PipelineConfig::from_toml("[grids.svm]\nc = [\"x\"]\n").unwrap().resolve().is_err());
        assert!(PipelineConfig::from_toml("[data]\nformat = \"nope\"\n").unwrap().resolve().is_err());
        let e = PipelineConfig::from_toml("selectors = [\"lasso\"]\n").unwrap_err();
        assert!(e.is_usage());
    }

    #[test]
    fn missing_inputs_name_the_stage() {
        let r = PipelineConfig::from_toml("").unwrap().resolve().unwrap();
        let e = load_matrix(&r, Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Stage { stage: "ingest", .. }), "{e}");
    }

    #[test]
    fn empty_directory_has_no_sessions() {
        let d = tempfile::tempdir().unwrap();
        let e = ingest_dir(d.path(), SessionFormat::Canonical).unwrap_err();
        assert!(e.to_string().contains("no sessions found"));
    }
}
