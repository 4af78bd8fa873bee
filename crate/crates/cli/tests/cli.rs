use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn callnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_callnet")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn small_data(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let o = callnet(&[
        "synth",
        "--set",
        "n_nodes=3000",
        "--set",
        "n_subjects=900",
        "--seed",
        "9",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    data
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(callnet(&["--help"]).status.code(), Some(0));
    assert_eq!(callnet(&["--version"]).status.code(), Some(0));
    assert_eq!(callnet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(callnet(&["run", "--seed", "x"]).status.code(), Some(1));
}

#[test]
fn repo_configs_resolve() {
    let o = callnet(&["run", "--config", &repo_config("experiment.toml"), "--print-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("classifiers = [\"logit\", \"tree\", \"forest\"]"), "{text}");
    assert!(text.contains("configs/../data/cdr.csv"), "{text}");

    for name in ["synth-scale.toml", "synth-small.toml"] {
        let o = callnet(&["synth", "--config", &repo_config(name), "--print-config"]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}

#[test]
fn set_overrides_nested_keys() {
    let o = callnet(&["run", "--set", "emp.roi=0.1", "--set", "forest.n_trees=7", "--print-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("roi = 0.1"), "{text}");
    assert!(text.contains("n_trees = 7"), "{text}");

    let o = callnet(&["synth", "--set", "n_nodes=12345", "--print-config"]);
    assert!(stdout(&o).contains("n_nodes = 12345"));

    // invalid values and malformed pairs are configuration errors
    assert_eq!(callnet(&["run", "--set", "emp.roi=-1", "--print-config"]).status.code(), Some(1));
    assert_eq!(callnet(&["run", "--set", "emp.roi", "--print-config"]).status.code(), Some(1));
    assert_eq!(callnet(&["run", "--set", "emp.roi.x=1", "--print-config"]).status.code(), Some(1));
}

#[test]
fn missing_input_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("nowhere");
    let o = callnet(&["run", "--data", data.to_str().unwrap(), "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&data.join("cdr.csv").display().to_string()), "{}", stderr(&o));
}

#[test]
fn stage_commands_share_one_output_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_data(tmp.path());
    let out = tmp.path().join("out");
    let common = ["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let run = |cmd: &[&str]| {
        let args: Vec<&str> = cmd.iter().chain(common.iter()).copied().collect();
        let o = callnet(&args);
        assert!(o.status.success(), "{cmd:?}: {}", stderr(&o));
        stdout(&o)
    };

    assert!(run(&["ingest"]).contains("rows_read"));
    let graphs = run(&["build-graph", "--timeframe", "t1"]);
    assert_eq!(graphs.lines().filter(|l| l.starts_with("t1")).count(), 3, "{graphs}");
    assert!(run(&["propagate", "--timeframe", "t2", "--method", "pr"]).contains("t2"));
    assert!(run(&["netstats", "--timeframe", "t1", "--permutations", "5"]).contains("dyadicity"));
    assert!(run(&["featurize"]).contains("subjects"));
    run(&["train", "--model", "A", "--model", "H", "--classifier", "logit"]);

    let scores_h = out.join("scores/H.logit.csv");
    let scores_a = out.join("scores/A.logit.csv");
    let loans = out.join("features/loans.csv");
    let o = callnet(&[
        "evaluate",
        "--scores",
        scores_h.to_str().unwrap(),
        "--loans",
        loans.to_str().unwrap(),
        "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let auc = v["auc"].as_f64().unwrap();
    assert!(auc > 0.5 && auc < 1.0);

    // the saved model reproduces its test scores
    let rescored = tmp.path().join("rescored.csv");
    let o = callnet(&[
        "predict",
        "--model",
        out.join("models/H.logit.json").to_str().unwrap(),
        "--features",
        out.join("features/matrix.csv").to_str().unwrap(),
        "--out",
        rescored.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = std::fs::read_to_string(&scores_h).unwrap();
    let all = std::fs::read_to_string(&rescored).unwrap();
    let all_lines: std::collections::HashSet<&str> = all.lines().collect();
    assert!(written.lines().skip(1).all(|l| all_lines.contains(l)));

    let o = callnet(&["compare", "--scores", scores_a.to_str().unwrap(), scores_h.to_str().unwrap(), "--delong"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(" vs "));

    let o = callnet(&[
        "sweep",
        "--scores",
        scores_h.to_str().unwrap(),
        "--loans",
        loans.to_str().unwrap(),
        "--grid",
        "0.01:0.1:0.01",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let emp: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(emp.len(), 10);
    assert!(emp.windows(2).all(|w| w[1] <= w[0]));

    let o = callnet(&["importance", "--model", "H", "--set", "forest.n_trees=30", "--top", "5"]
        .iter()
        .chain(common.iter())
        .copied()
        .collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
}
