use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use caselab_core::analysis::{run_bayesnet, run_svm_grid, BayesAnalysisConfig, SvmAnalysisConfig};
use caselab_core::bayesnet::HillClimbConfig;
use caselab_core::clustering::k_means;
use caselab_core::registry::{personalized_predict, ModelArtifact};
use caselab_core::svm::{Grid, SmoConfig};
use caselab_core::synth::{generate, GeneratorConfig};
use caselab_core::tabular::{clean_sentinels, fit_encoder, load_csv, write_csv, Dataset, Record, Schema, Value};

fn caselab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caselab"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> (String, String) {
    let out = caselab(dir, args);
    let (stdout, stderr) = (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    );
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    (stdout, stderr)
}

fn load(dir: &Path, data: &str, schema: &str) -> Dataset {
    let schema: Schema = toml::from_str(&std::fs::read_to_string(dir.join(schema)).unwrap()).unwrap();
    clean_sentinels(&load_csv(dir.join(data), &schema).unwrap()).0
}

/// Synthetic dataset plus a cohort CSV built through the CLI.
fn prepared(n: &str, seed: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    ok(
        &path,
        &[
            "synth",
            "--n",
            n,
            "--seed",
            seed,
            "--out",
            "data.csv",
            "--criteria-out",
            "criteria.toml",
        ],
    );
    ok(
        &path,
        &[
            "cohort",
            "--data",
            "data.csv",
            "--schema",
            "data.schema.toml",
            "--criteria",
            "criteria.toml",
            "--out",
            "cohort.csv",
        ],
    );
    (dir, path)
}

#[test]
fn synth_matches_library_and_describe_reports_gender() {
    let (_dir, path) = prepared("2892", "7");
    let mut expected = Vec::new();
    let cfg = GeneratorConfig {
        seed: 7,
        ..GeneratorConfig::default()
    };
    write_csv(&generate(&cfg).unwrap(), &mut expected).unwrap();
    assert_eq!(std::fs::read(path.join("data.csv")).unwrap(), expected);

    let (table, _) = ok(
        &path,
        &[
            "describe",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--columns",
            "gender",
        ],
    );
    assert!(table.contains("(n = 2892)"), "{table}");
    let men = table.lines().find(|l| l.contains("Men")).unwrap();
    assert!(men.contains("1750 (60.5)"), "{men}");

    let (json, _) = ok(
        &path,
        &[
            "describe",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--columns",
            "gender",
            "--json",
        ],
    );
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let pct = parsed[0]["summary"]["categories"][0]["percent"].as_f64().unwrap();
    assert!((pct - 60.5).abs() < 0.1, "{pct}");
}

#[test]
fn cohort_prints_flowchart() {
    let (_dir, path) = prepared("2892", "0");
    let (text, _) = ok(
        &path,
        &[
            "cohort",
            "--data",
            "data.csv",
            "--schema",
            "data.schema.toml",
            "--criteria",
            "criteria.toml",
            "--flowchart-out",
            "flow.json",
            "--missingness-out",
            "missing.json",
        ],
    );
    assert!(text.contains("excluded: incomplete data (n = 467)"), "{text}");
    assert!(text.contains("Included (n = 2892)"), "{text}");
    let flow: serde_json::Value = serde_json::from_slice(&std::fs::read(path.join("flow.json")).unwrap()).unwrap();
    assert_eq!(flow["initial_n"], 4279);
    let missing: serde_json::Value =
        serde_json::from_slice(&std::fs::read(path.join("missing.json")).unwrap()).unwrap();
    assert_eq!(missing["incomplete_n"], 467);
}

#[test]
fn bn_recovers_edge_and_matches_library() {
    let (_dir, path) = prepared("2892", "0");
    let vars = "gender,assaultCategory,injuryType,victimCategory,age,timeToEval,aggravatingFactors";
    let (stdout, _) = ok(
        &path,
        &[
            "bn",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--target",
            "TIW",
            "--variables",
            vars,
            "--seed",
            "3",
            "--out",
            "bn.json",
            "--dot",
            "bn.dot",
        ],
    );
    assert!(stdout.lines().any(|l| l == "timeToEval -> TIW"), "{stdout}");
    assert!(stdout.contains("direct causes of TIW: timeToEval"), "{stdout}");
    assert!(std::fs::read_to_string(path.join("bn.dot"))
        .unwrap()
        .starts_with("digraph"));

    let cohort = load(&path, "cohort.csv", "data.schema.toml");
    let config = BayesAnalysisConfig {
        variables: vars.split(',').map(String::from).collect(),
        target: "TIW".into(),
        hill_climb: HillClimbConfig {
            seed: 3,
            ..HillClimbConfig::default()
        },
        alpha: 1.0,
        target_as_sink: true,
    };
    let lib = run_bayesnet(&cohort, &config).unwrap();
    assert!(stdout.starts_with(&lib.scored.dag.edge_list()));
    assert!(stdout.contains(&format!("BIC {}\n", lib.scored.total)));

    let artifact = ModelArtifact::load(&path.join("bn.json")).unwrap();
    assert_eq!(artifact.payload, lib.artifact.payload);
    std::fs::write(
        path.join("rec.toml"),
        "victimCategory = \"Other\"\ntimeToEval = \"[12-47]\"\n",
    )
    .unwrap();
    let (pred, _) = ok(&path, &["predict", "--model", "bn.json", "--record", "rec.toml"]);
    let record: Record = [
        ("victimCategory".to_string(), Value::Label("Other".into())),
        ("timeToEval".to_string(), Value::Label("[12-47]".into())),
    ]
    .into();
    let expected = serde_json::to_value(personalized_predict(&lib.artifact, &record).unwrap()).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&pred).unwrap(), expected);
}

#[test]
fn predict_with_malformed_record_names_the_field() {
    let (_dir, path) = prepared("400", "1");
    ok(
        &path,
        &[
            "bn",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--target",
            "TIW",
            "--variables",
            "victimCategory,timeToEval",
            "--seed",
            "0",
            "--out",
            "bn.json",
        ],
    );
    let artifact = ModelArtifact::load(&path.join("bn.json")).unwrap();
    let required = artifact
        .required_variables
        .first()
        .expect("the chain makes the target depend on something")
        .clone();
    std::fs::write(path.join("empty.json"), "{}").unwrap();
    let out = caselab(&path, &["predict", "--model", "bn.json", "--record", "empty.json"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains(&format!("`{required}`")), "{stderr}");

    std::fs::write(
        path.join("bad.json"),
        "{\"victimCategory\": \"Robot\", \"timeToEval\": \"≥72\"}",
    )
    .unwrap();
    let out = caselab(&path, &["predict", "--model", "bn.json", "--record", "bad.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("Robot"));
}

#[test]
fn svm_grid_matches_library() {
    let (_dir, path) = prepared("300", "2");
    let (stdout, _) = ok(
        &path,
        &[
            "svm-grid",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--target",
            "injuryType",
            "--positive",
            "No injury",
            "--features",
            "ageYears,gender",
            "--gammas",
            "0.5",
            "--costs",
            "1,10",
            "--folds",
            "3",
            "--seed",
            "4",
            "--out",
            "svm.json",
        ],
    );
    let cohort = load(&path, "cohort.csv", "data.schema.toml");
    let config = SvmAnalysisConfig {
        features: vec!["ageYears".into(), "gender".into()],
        target: "injuryType".into(),
        positive: "No injury".into(),
        grid: Grid {
            gammas: vec![0.5],
            costs: vec![1.0, 10.0],
        },
        folds: 3,
        seed: 4,
        smo: SmoConfig::default(),
    };
    let lib = run_svm_grid(&cohort, &config).unwrap();
    assert_eq!(stdout, lib.grid.to_csv());

    let artifact = ModelArtifact::load(&path.join("svm.json")).unwrap();
    assert_eq!(artifact.payload, lib.artifact.payload);
    std::fs::write(path.join("rec.json"), "{\"ageYears\": 44, \"gender\": \"Women\"}").unwrap();
    let (pred, _) = ok(&path, &["predict", "--model", "svm.json", "--record", "rec.json"]);
    let record: Record = [
        ("ageYears".to_string(), Value::Number(44.0)),
        ("gender".to_string(), Value::Label("Women".into())),
    ]
    .into();
    let expected = serde_json::to_value(personalized_predict(&lib.artifact, &record).unwrap()).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&pred).unwrap(), expected);
}

#[test]
fn defaulted_seed_is_printed_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();
    let (_, stderr) = ok(path, &["synth", "--n", "100", "--out", "a.csv"]);
    let seed = stderr
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .and_then(|rest| rest.split_whitespace().next())
        .expect("seed line")
        .to_string();
    ok(path, &["synth", "--n", "100", "--seed", &seed, "--out", "b.csv"]);
    assert_eq!(
        std::fs::read(path.join("a.csv")).unwrap(),
        std::fs::read(path.join("b.csv")).unwrap()
    );
    let (_, stderr) = ok(path, &["synth", "--n", "100", "--seed", "5", "--out", "c.csv"]);
    assert!(!stderr.contains("seed: "));
}

#[test]
fn cluster_matches_library() {
    let (_dir, path) = prepared("200", "6");
    let (stdout, stderr) = ok(
        &path,
        &[
            "cluster",
            "--data",
            "cohort.csv",
            "--schema",
            "data.schema.toml",
            "--features",
            "ageYears,timeToEvalHours",
            "--k",
            "3",
            "--seed",
            "8",
            "--out",
            "clusters.csv",
        ],
    );
    assert!(stdout.is_empty());
    assert!(stderr.contains("mean silhouette"));
    let cohort = load(&path, "cohort.csv", "data.schema.toml");
    let x = fit_encoder(&cohort, &["ageYears", "timeToEvalHours"])
        .unwrap()
        .encode(&cohort)
        .unwrap();
    let lib = k_means(&x, 3, 8, 300).unwrap();
    assert_eq!(
        std::fs::read_to_string(path.join("clusters.csv")).unwrap(),
        lib.to_csv()
    );
}

#[test]
fn ingest_cleans_sentinels_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();
    std::fs::write(
        path.join("schema.toml"),
        "[[columns]]\nname = \"age\"\nkind = \"continuous\"\nvalid_range = [0.0, 120.0]\nsentinel_codes = [\"999\"]\n\n\
         [[columns]]\nname = \"sex\"\nkind = \"categorical\"\ncategories = [\"F\", \"M\"]\n",
    )
    .unwrap();
    std::fs::write(path.join("raw.csv"), "age,sex\n30,F\n999,M\n150,F\n42,\n").unwrap();
    let (stdout, _) = ok(
        path,
        &[
            "ingest",
            "--data",
            "raw.csv",
            "--schema",
            "schema.toml",
            "--out",
            "clean.csv",
            "--report",
            "report.json",
        ],
    );
    assert!(stdout.contains("age: 1 sentinel, 1 out of range"), "{stdout}");
    assert_eq!(
        std::fs::read_to_string(path.join("clean.csv")).unwrap(),
        "age,sex\n30,F\n,M\n,F\n42,\n"
    );
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(path.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["total_conversions"], 2);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();
    std::fs::write(
        path.join("schema.toml"),
        "[[columns]]\nname = \"sex\"\nkind = \"categorical\"\ncategories = [\"F\", \"M\"]\n",
    )
    .unwrap();
    std::fs::write(path.join("raw.csv"), "sex\nF\nX\n").unwrap();
    std::fs::write(path.join("broken.toml"), "columns = [\n").unwrap();

    for args in [
        &["describe", "--data", "raw.csv", "--schema", "schema.toml"][..],
        &["describe", "--data", "raw.csv", "--schema", "broken.toml"],
        &["describe", "--data", "missing.csv", "--schema", "schema.toml"],
    ] {
        let out = caselab(path, args);
        assert!(!out.status.success(), "{args:?}");
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{stderr}");
        assert!(stderr.starts_with("error: "), "{stderr}");
    }
    let stderr =
        String::from_utf8(caselab(path, &["describe", "--data", "raw.csv", "--schema", "schema.toml"]).stderr).unwrap();
    assert!(stderr.contains("raw.csv") && stderr.contains("line 3"), "{stderr}");
}
