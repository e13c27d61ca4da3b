use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "synth.num_patients=30
synth.num_diag=40
synth.num_proc=10
synth.num_med=12
strat.q_mm=4
strat.q_md=6
strat.q_mp=6
train.dim=8
train.epochs=2
train.pretrain_epochs=1
bootstrap.rounds=3
study.levels=100,140
study.seeds=1,2
study.mus=20,100
";

fn stratmed(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("run.cfg");
    if !config.exists() {
        fs::write(&config, TINY).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_stratmed"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn gen_data_is_byte_identical_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = stratmed(d.path(), &["gen-data", "--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["out/data/dataset.jsonl", "out/data/ddi.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
    let text = fs::read_to_string(a.path().join("out/data/dataset.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1 + 30);
}

#[test]
fn evaluate_then_rerun_hits_cache() {
    let dir = tempfile::tempdir().unwrap();
    let first = stratmed(dir.path(), &["evaluate"]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(stdout(&first).starts_with("jaccard_mean"));
    let m = manifest(dir.path());
    let stages = m["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 5);
    assert!(stages.iter().all(|s| s["seconds"].as_f64().unwrap() > 0.0));
    let sum: f64 = stages.iter().map(|s| s["seconds"].as_f64().unwrap()).sum();
    let total = m["total_seconds"].as_f64().unwrap();
    assert!(sum <= total && sum >= 0.9 * total, "{sum} vs {total}");
    let metrics = fs::read(dir.path().join("out/eval/metrics.json")).unwrap();

    let second = stratmed(dir.path(), &["evaluate"]);
    assert!(second.status.success());
    assert_eq!(stdout(&second), stdout(&first));
    let m = manifest(dir.path());
    assert!(m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["cache_hit"] == true));
    assert_eq!(
        fs::read(dir.path().join("out/eval/metrics.json")).unwrap(),
        metrics
    );
}

#[test]
fn wo_s_flag_gives_single_layer_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = stratmed(dir.path(), &["stratify", "--wo-s"]);
    assert!(o.status.success());
    let s: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/strat/summary.json")).unwrap())
            .unwrap();
    assert!(s
        .as_array()
        .unwrap()
        .iter()
        .all(|b| b["layer_sizes"].as_array().unwrap().len() == 1));
}

#[test]
fn studies_write_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let o = stratmed(dir.path(), &["distortion-study"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/distortion.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,variant,train_jaccard,test_jaccard,gap");
    assert_eq!(lines.len(), 1 + 2 * 2);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        let [train, test, gap] = [2, 3, 4].map(|i| f[i].parse::<f64>().unwrap());
        assert!((gap - (train - test)).abs() <= 1e-12);
    }
    let o = stratmed(dir.path(), &["robustness-study"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/robustness.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("mu,variant,jaccard_delta"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn case_study_writes_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let o = stratmed(
        dir.path(),
        &["case-study", "--patient", "P00000", "--visit", "0"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let case = dir.path().join("out/case/P00000_v0");
    for f in ["counts.csv", "relevance.csv", "case.json"] {
        assert!(case.join(f).is_file(), "{f}");
    }
    let o = stratmed(dir.path(), &["case-study", "--patient", "nobody"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stratmed(dir.path(), &["gen-data", "--set", "strat.qmm=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strat.qmm"));
    let o = stratmed(dir.path(), &["gen-data", "--set", "train.delta=2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_stratmed"))
        .args(["gen-data", "--config"])
        .arg(dir.path().join("absent.cfg"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let files = tempfile::tempdir().unwrap();
    let missing = files.path().join("missing.jsonl");
    fs::write(
        files.path().join("run.cfg"),
        format!(
            "data.dataset={}\ndata.ddi={}\n",
            missing.display(),
            missing.display()
        ),
    )
    .unwrap();
    let o = stratmed(files.path(), &["gen-data"]);
    assert_eq!(o.status.code(), Some(3));
}
