use callnet::eval::auc;
use callnet::models::ModelKind;
use callnet::pipeline::{run_pipeline, ExperimentConfig, Paths};
use callnet::synth::{generate, SynthConfig};

#[test]
fn realized_default_rate_near_target() {
    for seed in [1, 2] {
        let cfg = SynthConfig {
            seed,
            n_nodes: 60_000,
            n_subjects: 20_000,
            ..Default::default()
        };
        let rate = generate(&cfg).unwrap().realized_default_rate();
        assert!((rate - cfg.default_rate).abs() <= 0.005, "seed {seed}: rate {rate}");
    }
}

#[test]
fn no_planted_effect_gives_chance_auc() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let synth = SynthConfig {
        seed: 3,
        n_nodes: 20_000,
        n_subjects: 8_000,
        default_rate: 0.25,
        planted_feature_effect: 0.0,
        ..Default::default()
    };
    generate(&synth).unwrap().write_to_dir(&data).unwrap();
    let mut cfg = ExperimentConfig {
        paths: Paths::inputs_in(&data, tmp.path().join("out")),
        models: vec!["H".into()],
        classifiers: vec![ModelKind::Logit],
        primary_classifier: ModelKind::Logit,
        ..Default::default()
    };
    cfg.importance.models.clear();
    cfg.netstats.permutations = 0;
    let report = run_pipeline(&cfg).unwrap();
    let h = &report.models[0];
    assert!((h.auc - 0.5).abs() <= 0.03, "AUC {}", h.auc);

    // the scores written for H agree with the reported AUC
    let scores = callnet::pipeline::read_scores(callnet::pipeline::open(&tmp.path().join("out/scores/H.logit.csv")).unwrap()).unwrap();
    assert!((auc(&scores.scores, &scores.y).unwrap() - h.auc).abs() < 1e-12);
}
