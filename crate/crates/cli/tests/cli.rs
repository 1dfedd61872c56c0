use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use recession_core::data_io::{
    write_vintage, BinarySeries, Category, Frequency, Stamp, Transform, Variable, VariableMeta, VintageSnapshot,
};
use recession_core::Month;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recession"))
        .current_dir(dir)
        .env_remove("RECESSION_VINTAGES")
        .env_remove("RECESSION_OUTPUT")
        .env_remove("RECESSION_LABELS")
        .env_remove("RECESSION_FORECASTS")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn keys_and_help_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["keys"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("block_len")));
    assert_eq!(bin(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["--set", "models=", "backtest"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("model list is empty"));

    let o = bin(dir.path(), &["--set", "no_such_key=1", "--set", "knn_k=zero", "backtest"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("no_such_key") && err.contains("knn_k"), "{err}");

    fs::write(dir.path().join("run.conf"), "horizons = 0, 2\n").unwrap();
    let o = bin(dir.path(), &["--config", "run.conf", "backtest"]);
    assert_eq!(o.status.code(), Some(1));

    let o = bin(dir.path(), &["--vintages", "missing", "date"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(bin(dir.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("labels.csv"), "month,value\n2000-01,0\n2000-02,1\n").unwrap();
    fs::write(
        dir.path().join("f.csv"),
        "as_of,target,horizon,model,probability,threshold,call\n\
         1999-12,2000-01,1,ridge,0.2,0.5,0\n\
         2000-01,2000-02,1,ridge,0.7,0.5,1\n",
    )
    .unwrap();
    // the output directory is an existing regular file
    fs::write(dir.path().join("out"), "").unwrap();
    let o = bin(dir.path(), &["--labels", "labels.csv", "--forecasts", "f.csv", "evaluate"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn linear(id: &str, as_of: Month, start: Month, slope: f64) -> Variable {
    Variable {
        meta: VariableMeta {
            id: id.into(),
            category: Category::Output,
            transform: Transform::None,
            frequency: Frequency::Monthly,
        },
        observations: start
            .through(as_of - 2)
            .enumerate()
            .map(|(i, m)| (Stamp::month(m), 10.0 + slope * i as f64))
            .collect(),
    }
}

#[test]
fn monotone_series_have_no_turning_points() {
    let dir = tempfile::tempdir().unwrap();
    let as_of: Month = "2010-01".parse().unwrap();
    let start = as_of - 120;
    let snap = VintageSnapshot {
        as_of,
        variables: vec![
            linear("ip", as_of, start, 1.0),
            linear("employment", as_of, start, 0.5),
            linear("income", as_of, start, 2.0),
            linear("sales", as_of, start, 0.25),
        ],
        indicator: BinarySeries::new(start, vec![0; 119]).unwrap(),
    };
    write_vintage(&dir.path().join("data"), &snap).unwrap();
    let o = bin(dir.path(), &["date"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tp = fs::read_to_string(dir.path().join("out/turning_points.csv")).unwrap();
    assert_eq!(tp.lines().count(), 1, "{tp}");
    let summary = fs::read_to_string(dir.path().join("out/dating_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().contains(",0,0,"), "{summary}");
}

#[test]
fn evaluate_writes_the_frozen_metrics_table() {
    let dir = tempfile::tempdir().unwrap();
    let labels = "month,value\n\
        2001-01,0\n2001-02,0\n2001-03,1\n2001-04,1\n2001-05,0\n2001-06,0\n2001-07,1\n2001-08,0\n";
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    let mut f = String::from("as_of,target,horizon,model,probability,threshold,call\n");
    let ridge = [0.1, 0.2, 0.8, 0.6, 0.3, 0.65, 0.9, 0.05];
    let logit = [0.5, 0.1, 0.4, 0.9, 0.5, 0.2, 0.5, 0.3];
    for (name, probs, h) in [("ridge", ridge, 1), ("logit", logit, 3)] {
        for (i, p) in probs.iter().enumerate() {
            let target = format!("2001-{:02}", i + 1);
            let as_of: Month = target.parse::<Month>().unwrap() - h;
            f += &format!("{as_of},{target},{h},{name},{p},0.5,{}\n", u8::from(*p >= 0.5));
        }
    }
    // a target beyond the labels is ignored
    f += "2001-08,2001-09,1,ridge,0.7,0.5,1\n";
    fs::write(dir.path().join("f.csv"), f).unwrap();

    let o = bin(dir.path(), &["--labels", "labels.csv", "--forecasts", "f.csv", "evaluate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let got = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(golden("metrics.csv"), &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(golden("metrics.csv")).unwrap());

    // ridge ranks every positive above every negative except 0.65 > 0.6
    let ridge_row = got.lines().find(|l| l.starts_with("1,ridge")).unwrap();
    let auroc: f64 = ridge_row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((auroc - 14.0 / 15.0).abs() < 1e-12, "{ridge_row}");
    assert!(dir.path().join("out/curves/roc_ridge_h1.csv").is_file());
    assert!(dir.path().join("out/curves/pr_logit_h3.csv").is_file());
}

#[test]
fn flags_beat_environment() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_recession"));
        cmd.current_dir(dir.path())
            .args(["--set", "months=120", "--set", "vintage_count=2", "--set", "noise_variables=2"])
            .args(extra)
            .arg("generate");
        match env {
            Some(v) => cmd.env("RECESSION_VINTAGES", v),
            None => cmd.env_remove("RECESSION_VINTAGES"),
        };
        cmd.output().unwrap()
    };
    assert_eq!(gen(&[], Some("from_env")).status.code(), Some(0));
    assert!(dir.path().join("from_env/truth.csv").is_file());
    assert_eq!(gen(&["--vintages", "from_flag"], Some("from_env2")).status.code(), Some(0));
    assert!(dir.path().join("from_flag/truth.csv").is_file());
    assert!(!dir.path().join("from_env2").exists());
}
