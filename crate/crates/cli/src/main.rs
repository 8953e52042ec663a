use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sha2::{Digest, Sha256};

use strokelab::classifiers::{accuracy, read_model, train, write_model, ClassifierSpec, Family, TrainOptions};
use strokelab::dataset::{make_folds, split_dev_eval, FeatureMatrix};
use strokelab::features::manifest;
use strokelab::pipeline::{self, ExtractSection, PipelineConfig};
use strokelab::region::{default_tree, load_region};
use strokelab::selection::{fdr_scores, fdr_select, ga_select, sffs, Algorithm, GaParams, SelectionResult, SffsParams, SubsetEvaluator};
use strokelab::synth::{generate_cohort, write_cohort, CohortSpec};
use strokelab::trace::{read_subjects_file, serialize_canonical, AgeGroup, SessionFormat};
use strokelab::{Error, Result};

#[derive(Parser)]
#[command(name = "strokelab", version, about = "Age-group detection from child drawing-test interaction logs")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate and repair session files into canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "canonical")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic cohort in canonical format.
    Synth {
        /// Cohort spec (TOML). Without it the planted three-group preset is used.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Subjects per group for the preset.
        #[arg(long, default_value_t = 200)]
        per_group: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the 148-feature matrix from drawing-test sessions.
    Extract {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        subjects: PathBuf,
        #[arg(long, default_value = "canonical")]
        format: String,
        /// Tree region (PBM or polygon text); defaults to the bundled outline.
        #[arg(long)]
        region: Option<PathBuf>,
        /// Smooth positions with a 3-tap moving average before differentiating.
        #[arg(long)]
        smooth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select features on the development split.
    Select {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        /// Classifier scoring wrapper candidates (sffs, ga).
        #[arg(long)]
        classifier: Option<Family>,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        /// Reduced budgets and surrogate scoring models.
        #[arg(long)]
        fast: bool,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the development split.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long)]
        classifier: Family,
        /// Hyperparameter override `key=value`, repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Train without SMOTE balancing.
        #[arg(long)]
        no_smote: bool,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of models on the evaluation split.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Predict the age group of every row of a feature matrix.
    Predict {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the whole pipeline from a config file and write a report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a report bundle's config hashes and print its table.
    Report {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
struct SplitArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    dev_ratio: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::read_csv(f)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dev_split(m: &FeatureMatrix, s: SplitArgs) -> Result<(FeatureMatrix, FeatureMatrix)> {
    split_dev_eval(m, s.dev_ratio, s.seed)
}

fn ingest(input: &Path, format: &str, out: &Path) -> Result<()> {
    let format: SessionFormat = format.parse()?;
    let loaded = pipeline::ingest_dir(input, format)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut log = String::new();
    for (path, session, report) in &loaded {
        for issue in &report.issues {
            log.push_str(&format!("{}: {issue}\n", path.display()));
        }
        let name = format!("{}_test{}.txt", session.subject_id, session.test_id);
        write_text(&out.join(name), &serialize_canonical(session))?;
    }
    write_text(&out.join("ingest.log"), &log)?;
    println!("ingested {} sessions into {}", loaded.len(), out.display());
    Ok(())
}

fn synth(spec: Option<&Path>, per_group: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = match spec {
        Some(p) => CohortSpec::from_toml(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => CohortSpec::planted(per_group, seed),
    };
    let cohort = generate_cohort(&spec)?;
    write_cohort(&cohort, out)?;
    write_text(&out.join("cohort.toml"), &spec.to_toml())?;
    println!("wrote {} sessions to {}", cohort.sessions.len(), out.display());
    Ok(())
}

fn extract(sessions: &Path, subjects: &Path, format: &str, region: Option<&Path>, smooth: bool, out: &Path) -> Result<()> {
    let format: SessionFormat = format.parse()?;
    let loaded = pipeline::ingest_dir(sessions, format)?;
    let subjects = read_subjects_file(subjects)?;
    let mask = match region {
        Some(p) => {
            let (m, notes) = load_region(p, None)?;
            notes.iter().for_each(|n| warn!("{n}"));
            m
        }
        None => default_tree(),
    };
    let section = ExtractSection {
        smooth,
        ..Default::default()
    };
    let sessions: Vec<_> = loaded.into_iter().map(|(_, s, _)| s).collect();
    let (mut m, notes) = pipeline::extract_matrix(&sessions, &subjects, &mask, &section.to_config())?;
    notes.iter().for_each(|n| warn!("{n}"));
    let key = extract_key(&[
        format.as_str(),
        &region.map(|p| p.display().to_string()).unwrap_or_default(),
        &smooth.to_string(),
        &manifest::manifest_hash(),
    ]);
    m.config_hash = Some(key);
    write_text(out, &m.to_csv_string())?;
    println!("extracted {} subjects x {} features to {}", m.len(), m.n_features(), out.display());
    Ok(())
}

fn extract_key(parts: &[&str]) -> String {
    hex::encode(Sha256::digest(parts.join("\u{1f}").as_bytes()))
}

#[allow(clippy::too_many_arguments)]
fn select(features: &Path, algo: Algorithm, classifier: Option<Family>, threshold: f64, fast: bool, split: SplitArgs, out: &Path) -> Result<()> {
    let m = read_matrix(features)?;
    let (dev, _) = dev_split(&m, split)?;
    let mut r = match algo {
        Algorithm::Fdr => fdr_select(&fdr_scores(&dev.rows, &dev.label_indices()), threshold)?,
        Algorithm::Sffs | Algorithm::Ga => {
            let family = classifier
                .ok_or_else(|| Error::Invalid(format!("--classifier is required for {algo}")))?;
            let plan = make_folds(&dev, split.folds, split.seed)?;
            let spec = if fast { ClassifierSpec::surrogate(family) } else { ClassifierSpec::new(family) };
            let evaluator = SubsetEvaluator::new(spec.with_seed(split.seed), &dev, &plan)
                .with_folds(Some(if fast { 2.min(split.folds) } else { split.folds }));
            let mut r = if algo == Algorithm::Sffs {
                let p = if fast {
                    SffsParams { max_size: 8, patience: Some(2) }
                } else {
                    SffsParams::default()
                };
                sffs(&evaluator, &p)?
            } else {
                let mut p = GaParams { seed: split.seed, ..Default::default() };
                if fast {
                    p.population = 20;
                    p.generations = 8;
                }
                ga_select(&evaluator, &p)?
            };
            r.classifier = Some(family);
            r
        }
    };
    r.seed = split.seed;
    r.config_hash = m.config_hash.clone();
    write_text(out, &r.to_text())?;
    println!("{algo} selected {} features", r.selected.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(features: &Path, selection: Option<&Path>, family: Family, params: &[String], no_smote: bool, split: SplitArgs, out: &Path) -> Result<()> {
    let m = read_matrix(features)?;
    let (dev, _) = dev_split(&m, split)?;
    let subset: Vec<usize> = match selection {
        Some(p) => {
            let sel = SelectionResult::from_text(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?;
            if sel.config_hash.is_some() && sel.config_hash != m.config_hash {
                return Err(Error::HashMismatch(format!("{} was made from different features", p.display())));
            }
            sel.selected
        }
        None => (0..m.n_features()).collect(),
    };
    let mut spec = ClassifierSpec::new(family).with_seed(split.seed);
    for kv in params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--param expects key=value, got `{kv}`")))?;
        spec.set_param(k, v)?;
    }
    let opts = TrainOptions {
        smote_k: if no_smote { None } else { Some(5) },
        fold: None,
    };
    let model = train(&spec, &dev.rows, &dev.label_indices(), &subset, &opts)?;
    if !model.converged {
        warn!("{family} stopped at its iteration cap before converging");
    }
    let f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    write_model(std::io::BufWriter::new(f), &model)?;
    println!(
        "trained {family} on {} rows ({} synthetic) with {} features",
        model.n_train_real + model.n_train_synthetic,
        model.n_train_synthetic,
        subset.len()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<strokelab::classifiers::TrainedModel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}

fn evaluate(features: &Path, models: &[PathBuf], split: SplitArgs) -> Result<()> {
    let m = read_matrix(features)?;
    let (_, eval) = dev_split(&m, split)?;
    let truth = eval.label_indices();
    let mut accs = Vec::new();
    for p in models {
        let model = load_model(p)?;
        let acc = 100.0 * accuracy(&model.predict(&eval.rows), &truth);
        println!("{}\taccuracy={acc:.2}", p.display());
        accs.push(acc);
    }
    if accs.len() > 1 {
        println!("mean\taccuracy={:.2}", strokelab::stats::mean(&accs));
    }
    Ok(())
}

fn predict(features: &Path, model: &Path) -> Result<()> {
    let m = read_matrix(features)?;
    let model = load_model(model)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "subject_id,predicted");
    for (id, row) in m.subject_ids.iter().zip(&m.rows) {
        let g = AgeGroup::from_index(model.predict_row(row)).map_or("?", AgeGroup::as_str);
        let _ = writeln!(w, "{id},{g}");
    }
    Ok(())
}

fn run(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = PipelineConfig::load(config)?;
    let resolved = cfg.resolve()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let out = match (out, &cfg.out) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) if o.is_absolute() => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => return Err(Error::Config("no output directory: set `out` or pass --out".into())),
    };
    let report = pipeline::run_pipeline(&resolved, base)?;
    report.write_bundle(&out)?;
    info!("report bundle written to {}", out.display());
    print!("{}", report.table4_txt());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, format, out } => ingest(&input, &format, &out),
        Command::Synth { spec, per_group, seed, out } => synth(spec.as_deref(), per_group, seed, &out),
        Command::Extract { sessions, subjects, format, region, smooth, out } => {
            extract(&sessions, &subjects, &format, region.as_deref(), smooth, &out)
        }
        Command::Select { features, algo, classifier, threshold, fast, split, out } => {
            select(&features, algo, classifier, threshold, fast, split, &out)
        }
        Command::Train { features, selection, classifier, params, no_smote, split, out } => {
            train_cmd(&features, selection.as_deref(), classifier, &params, no_smote, split, &out)
        }
        Command::Evaluate { features, models, split } => evaluate(&features, &models, split),
        Command::Predict { features, model } => predict(&features, &model),
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Report { bundle } => {
            print!("{}", pipeline::verify_bundle(&bundle)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot set up {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
