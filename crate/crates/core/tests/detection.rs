use subscan_core::{
    evaluate_detection, synthesize, NetworkLayout, ScanConfig, SortedBackground, SynthSpec,
};

fn spec(n_nodes: usize, rho: f64, delta: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        n_nodes,
        n_background: 100,
        n_clean_eval: 100,
        n_anomalous_eval: 100,
        affected_fraction: rho,
        shift: delta,
        seed,
    }
}

#[test]
fn forced_separation() {
    let data = synthesize(&spec(100, 1.0, 10.0, 4)).unwrap();
    let report = evaluate_detection(
        &SortedBackground::new(&data.background),
        &data.clean,
        &data.anomalous,
        &ScanConfig::default(),
        &NetworkLayout::single("all", 100).unwrap(),
    )
    .unwrap();
    assert!(report.scan_auc >= 0.99, "{report:?}");
    assert!(report.all_nodes_auc >= 0.99, "{report:?}");
    assert_eq!((report.n_clean, report.n_anom), (100, 100));
}

#[test]
fn null_case_is_chance() {
    let data = synthesize(&spec(200, 0.1, 0.0, 9)).unwrap();
    let report = evaluate_detection(
        &data.background,
        &data.clean,
        &data.anomalous,
        &ScanConfig::default(),
        &NetworkLayout::single("all", 200).unwrap(),
    )
    .unwrap();
    assert!((0.4..=0.6).contains(&report.scan_auc), "{report:?}");
    assert!((0.4..=0.6).contains(&report.all_nodes_auc), "{report:?}");
}

#[test]
fn row_sweep_and_sorted_backgrounds_agree() {
    let data = synthesize(&spec(50, 0.2, 1.0, 2)).unwrap();
    let layout = NetworkLayout::single("all", 50).unwrap();
    let cfg = ScanConfig::default();
    let a = evaluate_detection(
        &data.background,
        &data.clean,
        &data.anomalous,
        &cfg,
        &layout,
    )
    .unwrap();
    let b = evaluate_detection(
        &SortedBackground::new(&data.background),
        &data.clean,
        &data.anomalous,
        &cfg,
        &layout,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.scan_scores, b.scan_scores);
}

#[test]
fn mismatched_layout_is_rejected() {
    let data = synthesize(&spec(20, 0.5, 1.0, 1)).unwrap();
    let err = evaluate_detection(
        &data.background,
        &data.clean,
        &data.anomalous,
        &ScanConfig::default(),
        &NetworkLayout::single("all", 21).unwrap(),
    )
    .unwrap_err();
    assert!(err.is_dimension_mismatch());
}
