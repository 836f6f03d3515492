use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorimotor")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eval_prints_rows_and_summary() {
    let args = ["eval", "--synthetic", "classes=10,pool=40", "--protocol", "fixed,arbitrary", "--seed", "0,1"];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    let mut blocks = text.split("\n\n");
    let rows = blocks.next().unwrap();
    assert!(rows.starts_with("seed,examples_per_class,protocol,classifier,theta_loc,accuracy,mean_sensations"));
    assert_eq!(rows.lines().count(), 5);
    let summary = blocks.next().unwrap();
    assert!(summary.starts_with("examples_per_class,protocol,classifier,theta_loc,seeds,mean_accuracy,ci95"));
    assert_eq!(stdout(&run(&args)), text);
}

#[test]
fn missing_dataset_exits_nonzero_with_error_line() {
    let o = run(&["eval", "--data", "/definitely/not/here.fgrd"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error kind=io message="), "{err}");
    assert!(err.contains("/definitely/not/here.fgrd"));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn bad_flag_values_are_config_errors() {
    for args in [
        &["eval", "--protocol", "zigzag"][..],
        &["eval", "--examples-per-class", "0"],
        &["curve", "--classifier", "lstm"],
    ] {
        let o = run(args);
        assert!(!o.status.success());
        assert!(stderr(&o).starts_with("error kind=config"), "{}", stderr(&o));
    }
}

#[test]
fn synth_file_feeds_eval_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.fgrd");
    let o = run(&["synth", "--synthetic", "pool=40,perturb=0.2", "--examples-per-class", "4", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::metadata(&data).unwrap().len(), 16 + 40 * 951);

    let out = dir.path().join("acc.csv");
    let results = dir.path().join("results.jsonl");
    let o = run(&[
        "eval", "--data", data.to_str().unwrap(), "--test-count", "10", "--examples-per-class", "1",
        "--out", out.to_str().unwrap(), "--results", results.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("acc.summary.csv").exists());
    let csv = fs::read_to_string(&out).unwrap();
    let accuracy: f64 = csv.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    let dump = fs::read_to_string(&results).unwrap();
    assert_eq!(dump.lines().count(), 10);
    let correct = dump.lines().filter(|l| l.contains("\"status\":\"correct\"")).count();
    assert_eq!(accuracy, correct as f64 / 10.0);

    let o = run(&["curve", "--data", data.to_str().unwrap(), "--test-count", "10", "--classifier", "knn"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let values: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 25);
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        format!(
            "# theta sweep\nsynthetic = classes=10,pool=40\nexamples_per_class = 1\nprotocol = fixed\n\
             theta_loc = 11,13,15\nseed = 5\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let thetas: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(thetas, ["11", "13", "15"]);

    // flags override the file
    let o = run(&["eval", "--config", cfg.to_str().unwrap(), "--theta-loc", "12"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",12,"));
}

#[test]
fn train_and_traces_with_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let o = run(&["train", "--synthetic", "pool=40", "--seed", "2", "--out", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("trained 10 examples"));

    let traces = dir.path().join("traces");
    let o = run(&[
        "traces", "--synthetic", "pool=40", "--seed", "2", "--model", model.to_str().unwrap(),
        "--examples", "0,1,2", "--out", traces.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = fs::read_to_string(traces.join("traces.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    assert!(!lines.contains("\"sensation\":1,"));
    assert!(Path::new(&traces.join("final_grids.fgrd")).exists());

    let o = run(&["traces", "--synthetic", "pool=40", "--examples", "999", "--out", traces.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=model"), "{}", stderr(&o));
}
