use std::fs;
use std::path::Path;

use embedkit::cli;
use embedkit::corpus::save_benchmark;
use embedkit::pipeline::synthetic::{latent_corpus, SyntheticOptions};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["embedkit"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small train/test benchmark directories on disk.
fn corpus() -> TempDir {
    let dir = TempDir::new().unwrap();
    let c = latent_corpus(&SyntheticOptions {
        languages: 3,
        train_pairs: 60,
        test_pairs: 30,
        dim: 12,
        latent_dim: 4,
        ..SyntheticOptions::default()
    })
    .unwrap();
    save_benchmark(&c.train, dir.path().join("train")).unwrap();
    save_benchmark(&c.test, dir.path().join("test")).unwrap();
    dir
}

fn findings(out: &str) -> Vec<Value> {
    out.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn validate_accepts_a_clean_corpus() {
    let dir = corpus();
    let r = run(&["validate", p(&dir.path().join("train"))]);
    assert_eq!(r.code, 0, "{}", r.err);
    let f = findings(&r.out);
    assert!(f.iter().all(|v| v["ok"] == true));
    // three .emb, three .tsv, the directory itself
    assert_eq!(f.len(), 7);
}

#[test]
fn validate_reports_truncation() {
    let dir = corpus();
    let emb = dir.path().join("train/l01.emb");
    let bytes = fs::read(&emb).unwrap();
    fs::write(&emb, &bytes[..bytes.len() - 3]).unwrap();
    let r = run(&["validate", p(&emb)]);
    assert_eq!(r.code, 1);
    assert_eq!(findings(&r.out)[0]["error"], "TruncatedPayload");
}

#[test]
fn validate_reports_unresolved_ids() {
    let dir = corpus();
    let tsv = dir.path().join("test/l00.tsv");
    let text = fs::read_to_string(&tsv).unwrap();
    fs::write(&tsv, format!("{text}2.5\tnowhere\tte0b\n")).unwrap();
    let r = run(&["validate", p(&dir.path().join("test"))]);
    assert_eq!(r.code, 1);
    let f = findings(&r.out);
    let last = f.last().unwrap();
    assert_eq!(last["error"], "UnresolvedId");
}

#[test]
fn fit_transform_eval_round_trip() {
    let dir = corpus();
    let model = dir.path().join("ica.rdx");
    let r = run(&[
        "--seed",
        "3",
        "fit",
        "--technique",
        "ica",
        "--k",
        "4",
        "--train",
        p(&dir.path().join("train")),
        "--out",
        p(&model),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(model.is_file());
    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("ica.rdx.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 3);
    assert!(!manifest["inputs"].as_object().unwrap().is_empty());

    let reduced = dir.path().join("l00.k4.emb");
    let r = run(&[
        "transform",
        "--model",
        p(&model),
        "--input",
        p(&dir.path().join("test/l00.emb")),
        "--out",
        p(&reduced),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let r = run(&["validate", p(&reduced)]);
    assert_eq!(r.code, 0, "{}", r.out);

    let report = dir.path().join("ica.json");
    let tsv = dir.path().join("ica.tsv");
    let r = run(&[
        "eval",
        "--test",
        p(&dir.path().join("test")),
        "--model",
        p(&model),
        "--out",
        p(&report),
        "--tsv",
        p(&tsv),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["k"], 4);
    assert_eq!(v["d"], 12);
    assert_eq!(fs::read_to_string(&tsv).unwrap().lines().count(), 3);
    assert!(v["aggregate"]["avg_r"].as_f64().unwrap() > 0.5);
}

#[test]
fn fit_usage_errors() {
    let dir = corpus();
    let train = dir.path().join("train");
    let out = dir.path().join("m.rdx");
    let r = run(&[
        "fit",
        "--technique",
        "kpca",
        "--k",
        "4",
        "--train",
        p(&train),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("--kernel"));
    let r = run(&[
        "fit",
        "--technique",
        "ipca",
        "--k",
        "50",
        "--train",
        p(&train),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
    assert!(!out.exists());
    let r = run(&[
        "fit",
        "--technique",
        "bogus",
        "--train",
        p(&train),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn ttest_on_value_files() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    fs::write(&a, "[0.4342, 0.4531, 0.3274, 0.2855, 0.7096]").unwrap();
    fs::write(&b, "[0.5019, 0.5230, 0.5269, 0.5392, 0.7488]").unwrap();
    let r = run(&["stats", "ttest", p(&a), p(&b)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(r.out.lines().next().unwrap()).unwrap();
    assert!((v["p"].as_f64().unwrap() - 0.041).abs() < 0.002);
    assert_eq!(v["df"], 4);
}

#[test]
fn stats_mean_std_and_reduction() {
    let r = run(&["stats", "mean-std", "--values", "50,40,40,45,70"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("49.00 ± 11.14"));
    let r = run(&["stats", "reduction", "--d", "768", "--k", "49,209"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("49/768\t") && r.out.contains("94%"));
    let r = run(&["stats", "reduction", "--d", "768", "--k", "800"]);
    assert_eq!(r.code, 2);
}

#[test]
fn sweep_writes_tables() {
    let dir = corpus();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "grid = [2, 4]\nseed = 5\n\n[[techniques]]\ntechnique = \"ipca\"\n\n[[techniques]]\ntechnique = \"ica\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = run(&[
        "sweep",
        "--config",
        p(&config),
        "--train",
        p(&dir.path().join("train")),
        "--test",
        p(&dir.path().join("test")),
        "--out-dir",
        p(&out),
        "--jobs",
        "2",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let table: Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(table["entries"].as_array().unwrap().len(), 4);
    assert!(table["baseline"].is_object());
    assert_eq!(
        fs::read_to_string(out.join("sweep.tsv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    assert!(out.join("retention.tsv").is_file());
    assert!(out.join("sweep.json.manifest.json").is_file());
    assert!(fs::read_dir(&out).unwrap().all(|e| !e
        .unwrap()
        .path()
        .to_string_lossy()
        .ends_with(".partial")));
}

#[test]
fn sweep_rejects_bad_grid() {
    let dir = corpus();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "grid = [100]\n\n[[techniques]]\ntechnique = \"ipca\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = run(&[
        "sweep",
        "--config",
        p(&config),
        "--train",
        p(&dir.path().join("train")),
        "--test",
        p(&dir.path().join("test")),
        "--out-dir",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
    assert!(!out.exists());
}

#[test]
fn viz_exports_one_line_per_row() {
    let dir = corpus();
    let model = dir.path().join("pca3.rdx");
    let r = run(&[
        "fit",
        "--technique",
        "ipca",
        "--k",
        "3",
        "--train",
        p(&dir.path().join("train")),
        "--out",
        p(&model),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let out = dir.path().join("viz.tsv");
    let r = run(&[
        "viz",
        "--model",
        p(&model),
        "--test",
        p(&dir.path().join("test")),
        "--matrix",
        "l02",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 60);
    assert!(text
        .lines()
        .all(|l| l.split('\t').count() == 5 && l.contains("\tl02:")));

    let wide = dir.path().join("pca4.rdx");
    run(&[
        "fit",
        "--technique",
        "ipca",
        "--k",
        "4",
        "--train",
        p(&dir.path().join("train")),
        "--out",
        p(&wide),
    ]);
    let r = run(&[
        "viz",
        "--model",
        p(&wide),
        "--input",
        p(&dir.path().join("test/l00.emb")),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn subsample_writes_balanced_pairs() {
    let dir = corpus();
    let out = dir.path().join("sub.tsv");
    let r = run(&[
        "--seed",
        "2",
        "subsample",
        "--train",
        p(&dir.path().join("train")),
        "--cap",
        "20",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 60);
    let r = run(&[
        "subsample",
        "--train",
        p(&dir.path().join("train")),
        "--cap",
        "61",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn corrupt_model_is_a_validation_failure() {
    let dir = corpus();
    let model = dir.path().join("junk.rdx");
    fs::write(&model, b"RDX1\x09junk").unwrap();
    let out = dir.path().join("x.emb");
    let r = run(&[
        "transform",
        "--model",
        p(&model),
        "--input",
        p(&dir.path().join("test/l00.emb")),
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("version"));
}

#[test]
fn help_and_missing_args() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["fit"]).code, 2);
    assert_eq!(run(&[]).code, 2);
}
