mod support;

use vibgraph::graph::GraphFile;
use vibgraph::pipeline::{build_graph_for_load, read_f1_csv, train_model, Subset, TrainedModel};

#[test]
fn graph_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = support::small_dataset(dir.path());
    let build = build_graph_for_load(&cfg, "1hp").unwrap();
    let path = dir.path().join("g.json");
    let windows = build.save(&path).unwrap();
    assert_eq!(GraphFile::load(&path).unwrap(), build.graph);
    let csv = std::fs::read_to_string(windows).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={} seed=0\nwindow,score\n", cfg.hash())));
    assert_eq!(csv.lines().count(), 2 + cfg.candidates.len());
}

#[test]
fn foreign_graphs_use_the_training_scaler() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = support::small_dataset(dir.path());
    let own = build_graph_for_load(&cfg, "1hp").unwrap().graph;
    let other = build_graph_for_load(&cfg, "2hp").unwrap().graph;
    let training = train_model(&own, &cfg).unwrap();
    let model = &training.model;

    // the training graph is already in the training scale
    assert_eq!(own.rescaled(&model.meta.scaler).unwrap().features, own.features);

    // a foreign graph's own min-max features are ignored; its raw features are
    // mapped through the training scaler instead
    let mut scrambled = other.clone();
    scrambled.features.fill(0.5);
    assert_eq!(
        model.predict_proba(&scrambled).unwrap(),
        model.predict_proba(&other).unwrap()
    );
    let expected = model.meta.scaler.transform(&other.raw_features).unwrap();
    assert_eq!(other.rescaled(&model.meta.scaler).unwrap().features, expected);

    let report = model.evaluate(&other, Subset::Auto).unwrap();
    assert_eq!(report.subset, "all");
    assert_eq!(report.confusion.total() as usize, other.node_count());
    assert!(model.evaluate(&other, Subset::Val).is_err());
}

#[test]
fn saved_model_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = support::small_dataset(dir.path());
    let graph = build_graph_for_load(&cfg, "1hp").unwrap().graph;
    let training = train_model(&graph, &cfg).unwrap();
    let out = dir.path().join("model");
    training.save(&out).unwrap();

    let loaded = TrainedModel::load(&out).unwrap();
    assert_eq!(loaded.evaluate(&graph, Subset::Auto).unwrap(), training.test_report);
    assert_eq!(loaded.evaluate(&graph, Subset::Val).unwrap(), training.val_report);
    let curves = std::fs::read_to_string(out.join("loss_curves.csv")).unwrap();
    assert!(curves.starts_with("# config_hash="));
    assert_eq!(curves.lines().count(), 2 + cfg.epochs);
}

#[test]
fn tampered_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = support::small_dataset(dir.path());
    let graph = build_graph_for_load(&cfg, "1hp").unwrap().graph;
    let out = dir.path().join("model");
    train_model(&graph, &cfg).unwrap().save(&out).unwrap();
    let path = out.join("config.toml");
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("epochs = 3", "epochs = 4");
    std::fs::write(&path, text).unwrap();
    assert!(TrainedModel::load(&out).is_err());
}

#[test]
fn f1_csv_formats() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.csv");
    std::fs::write(&plain, "0.9\n1.0\n0.95\n").unwrap();
    assert_eq!(read_f1_csv(&plain).unwrap(), vec![0.9, 1.0, 0.95]);
    let table = dir.path().join("table.csv");
    std::fs::write(&table, "# run 1\nclass,f1\n0,0.5\n1,0.75\n").unwrap();
    assert_eq!(read_f1_csv(&table).unwrap(), vec![0.5, 0.75]);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "class,f1\n0,abc\n").unwrap();
    assert!(read_f1_csv(&bad).is_err());
}
