use stratmed::data::{
    generate_synthetic, load_dataset, load_ddi, save_dataset, save_ddi, Split, SyntheticConfig,
};
use stratmed::eval::{bootstrap_evaluate, evaluate, BootstrapConfig};
use stratmed::harness::{run_pipeline, RunConfig, Stage};
use stratmed::model::{load_main_checkpoint, save_main_checkpoint, Recommender};

const SMALL: &str = "seed=21
synth.num_patients=120
synth.num_diag=60
synth.num_proc=20
synth.num_med=25
strat.q_mm=20
strat.q_md=40
strat.q_mp=40
train.dim=16
train.epochs=4
train.pretrain_epochs=2
bootstrap.rounds=4
";

#[test]
fn files_round_trip_through_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (d, ddi) = generate_synthetic(&SyntheticConfig {
        num_patients: 50,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    save_dataset(&d, dir.path().join("d.jsonl")).unwrap();
    save_ddi(&ddi, dir.path().join("ddi.csv")).unwrap();
    let back = load_dataset(dir.path().join("d.jsonl")).unwrap();
    assert_eq!(back, d);
    assert_eq!(
        load_ddi(dir.path().join("ddi.csv"), d.vocab.num_med).unwrap(),
        ddi
    );
}

#[test]
fn trained_model_beats_nothing_and_survives_checkpointing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::parse(SMALL).unwrap();
    cfg.out_dir = dir.path().join("run");
    let out = run_pipeline(&cfg, Stage::Evaluate).unwrap();
    let model = out.model.unwrap();
    let report = out.report.unwrap();
    assert!(report.jaccard.mean > 0.1, "{:?}", report.jaccard);
    assert!(report.jaccard.std > 0.0);
    let train = out.train_report.unwrap();
    assert!(train.epochs.last().unwrap().train_loss < train.epochs[0].train_loss);

    let path = dir.path().join("again.ckpt");
    save_main_checkpoint(&model, train.best_epoch, &path).unwrap();
    let (reloaded, meta) = load_main_checkpoint(
        &path,
        out.dataset.vocab,
        out.buckets.clone().unwrap(),
        out.ddi.clone(),
    )
    .unwrap();
    assert_eq!(meta.best_epoch, train.best_epoch);
    let p = &out.dataset.patients[0];
    assert_eq!(
        model.predict_patient(p.visits()).unwrap(),
        reloaded.predict_patient(p.visits()).unwrap()
    );
    assert_eq!(
        evaluate(&model, &out.dataset, Split::Test, &out.ddi).unwrap(),
        evaluate(&reloaded, &out.dataset, Split::Test, &out.ddi).unwrap()
    );
}

#[test]
fn file_source_matches_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let mut synth = RunConfig::parse(SMALL).unwrap();
    synth.out_dir = dir.path().join("synth");
    let a = run_pipeline(&synth, Stage::Evaluate).unwrap();

    let data = dir.path().join("synth/data");
    let text = SMALL
        .lines()
        .filter(|l| !l.starts_with("synth."))
        .chain([
            format!("data.dataset={}", data.join("dataset.jsonl").display()).as_str(),
            format!("data.ddi={}", data.join("ddi.csv").display()).as_str(),
        ])
        .collect::<Vec<_>>()
        .join("\n");
    let mut files = RunConfig::parse(&text).unwrap();
    files.out_dir = dir.path().join("files");
    let b = run_pipeline(&files, Stage::Evaluate).unwrap();
    assert_eq!(a.report, b.report);
}

#[test]
fn full_split_single_round_equals_plain_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::parse(SMALL).unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    let out = run_pipeline(&cfg, Stage::Train).unwrap();
    let model = out.model.unwrap();
    let plain = evaluate(&model, &out.dataset, Split::Test, &out.ddi).unwrap();
    let boot = bootstrap_evaluate(
        &model,
        &out.dataset,
        Split::Test,
        &out.ddi,
        &BootstrapConfig {
            rounds: 1,
            fraction: 1.0,
            seed: 0,
        },
    )
    .unwrap();
    assert_eq!(boot.jaccard.mean, plain.jaccard);
    assert_eq!(boot.ddi.mean, plain.ddi_rate);
    assert_eq!(boot.jaccard.std, 0.0);
}
