use terank_core::embeddings::{load_csv, load_emb1, save_csv, save_emb1};
use terank_core::synth::{gen_model_zoo, SYNTHETIC_DATASET};
use terank_core::{
    rank_and_report, score_model, MetricId, MetricParams, PcaTarget, PerturbConfig, PerturbMode,
    Pool, Regime, Weighting,
};

fn zoo_config() -> terank_core::ZooConfig {
    terank_core::ZooConfig::from_ranges(4, 3, 40, 10, (8.0, 8.0), (3.0, 12.0), 3)
}

#[test]
fn zoo_survives_both_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (zoo, _) = gen_model_zoo(&zoo_config()).unwrap();
    for set in &zoo {
        let emb = dir.path().join(format!("{}.emb1", set.model_id()));
        let csv = dir.path().join(format!("{}.csv", set.model_id()));
        save_emb1(set, &emb).unwrap();
        save_csv(set, &csv).unwrap();
        let a = load_emb1(&emb).unwrap();
        let b = load_csv(&csv, "label").unwrap();
        for back in [&a, &b] {
            assert_eq!(back.model_id(), set.model_id());
            assert_eq!(back.labels(), set.labels());
            assert_eq!(back.features(), set.features());
        }
    }
}

#[test]
fn scores_from_disk_match_scores_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let (zoo, truth) = gen_model_zoo(&zoo_config()).unwrap();
    let cfg = PerturbConfig::default().with_mode(PerturbMode::Sa);
    let params = MetricParams::default();
    let mut records = Vec::new();
    for set in &zoo {
        let path = dir.path().join(format!("{}.emb1", set.model_id()));
        save_emb1(set, &path).unwrap();
        let loaded = load_emb1(&path).unwrap();
        let a = score_model(set, MetricId::Gbc, &cfg, PcaTarget::default(), &params).unwrap();
        let b = score_model(&loaded, MetricId::Gbc, &cfg, PcaTarget::default(), &params).unwrap();
        assert_eq!(a.score, b.score);
        records.push(b);
    }
    let report = rank_and_report(
        &records,
        &truth,
        SYNTHETIC_DATASET,
        Regime::Synthetic,
        Pool::Supervised,
        Weighting::Symmetric,
    )
    .unwrap();
    assert!((-1.0..=1.0).contains(&report.tau_w));
    let mut ranks: Vec<usize> = report.models.iter().map(|m| m.pred_rank).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (0..zoo.len()).collect::<Vec<_>>());
}
