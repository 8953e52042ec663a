use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn strokelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strokelab")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["ingest", "synth", "extract", "select", "train", "evaluate", "predict", "run", "report"] {
        let o = strokelab(&[sub, "--help"]);
        assert!(o.status.success(), "{sub} --help failed");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(strokelab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn extract_on_empty_dir_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let sessions = tmp.path().join("sessions");
    std::fs::create_dir(&sessions).unwrap();
    let subjects = tmp.path().join("subjects.csv");
    std::fs::write(&subjects, "subject_id,age,level,gender,handedness,emotion\n").unwrap();
    let o = strokelab(&["extract", "--sessions", p(&sessions), "--subjects", p(&subjects), "--out", p(&tmp.path().join("f.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("no sessions found"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn bad_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(strokelab(&["run", "--config", p(&missing)]).status.code(), Some(2));
    let unknown = tmp.path().join("unknown.toml");
    std::fs::write(&unknown, "seed = 1\nbogus_key = 3\nout = \"o\"\n").unwrap();
    let o = strokelab(&["run", "--config", p(&unknown)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let no_data = tmp.path().join("nodata.toml");
    std::fs::write(&no_data, "seed = 1\nout = \"o\"\n").unwrap();
    let o = strokelab(&["run", "--config", p(&no_data)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("ingest"), "{}", stderr(&o));
}

fn body_digest(dir: &Path) -> String {
    let mut names = vec![
        "config.lock",
        "features.csv",
        "folds.txt",
        "table4.csv",
        "table4.txt",
        "fig3.csv",
        "fig4.csv",
        "selections/fdr.txt",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for fam in ["nb", "logreg", "knn", "rf", "adaboost", "svm", "mlp"] {
        names.push(format!("selections/sffs_{fam}.txt"));
        names.push(format!("selections/ga_{fam}.txt"));
    }
    let mut h = Sha256::new();
    for n in &names {
        h.update(n.as_bytes());
        h.update(std::fs::read(dir.join(n)).unwrap_or_else(|e| panic!("{n}: {e}")));
    }
    hex::encode(h.finalize())
}

/// Small synthetic fixture through the full CLI flow.
#[test]
fn run_report_and_tamper_check() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cohort = root.join("cohort");
    let o = strokelab(&["synth", "--per-group", "12", "--seed", "3", "--out", p(&cohort)]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(
        root.join("run.toml"),
        "seed = 11\nmode = \"fast\"\nfolds = 3\nout = \"bundle\"\n[data]\nsessions = \"cohort/sessions\"\nsubjects = \"cohort/subjects.csv\"\n",
    )
    .unwrap();
    let o = strokelab(&["run", "--config", p(&root.join("run.toml"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("SFFS") && table.contains("SVM"), "{table}");

    let bundle = root.join("bundle");
    let digest = body_digest(&bundle);
    assert_eq!(digest, GOLDEN_BODY, "report body changed");

    let o = strokelab(&["report", "--bundle", p(&bundle)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), table);

    let csv = bundle.join("table4.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    let forged = format!("{}{}\n{rest}", &first[..first.len() - 1], if first.ends_with('0') { '1' } else { '0' });
    std::fs::write(&csv, forged).unwrap();
    let o = strokelab(&["report", "--bundle", p(&bundle)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("table4.csv"), "{}", stderr(&o));
}

const GOLDEN_BODY: &str = "cd1c4ae0722eb72edca2351ebf66ef6749414c1d76d4c6e73598b07504d3915f";

#[test]
fn stage_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cohort = root.join("cohort");
    assert!(strokelab(&["synth", "--per-group", "10", "--seed", "4", "--out", p(&cohort)]).status.success());
    let features = root.join("features.csv");
    let o = strokelab(&[
        "extract",
        "--sessions",
        p(&cohort.join("sessions")),
        "--subjects",
        p(&cohort.join("subjects.csv")),
        "--out",
        p(&features),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sel = root.join("fdr.txt");
    let o = strokelab(&["select", "--features", p(&features), "--algo", "fdr", "--out", p(&sel), "--folds", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = root.join("nb.model");
    let o = strokelab(&[
        "train", "--features", p(&features), "--selection", p(&sel), "--classifier", "nb", "--folds", "3", "--out", p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = strokelab(&["evaluate", "--features", p(&features), "--model", p(&model), "--folds", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("accuracy="));
    let o = strokelab(&["predict", "--features", p(&features), "--model", p(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("subject_id,predicted\n"));
    assert_eq!(out.lines().count(), 31);
}
