//! End-to-end runs: graph construction, training, evaluation, and the
//! cross-load protocol. The command-line tool is a thin layer over these.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::data::io::{read_to_string, write_atomic};
use crate::data::{assemble_dataset, load_recordings, PipelineConfig};
use crate::ensemble::{fit_ensemble, EnsembleModel};
use crate::error::{Error, Result};
use crate::features::{feature_matrix, MinMaxScaler};
use crate::gae::{train, Gae, GaeCheckpoint, LossCurves, NodeSplit};
use crate::graph::{
    build_graph, distance_matrix_csv, pairwise_distances, threshold_from_percentile, CondensedDistances, FaultGraph,
    GraphFile, GraphMeta,
};
use crate::segmentation::{segment, select_window, Segment, Stride, TimeSeries, WindowSelection};
use crate::stats::{
    f1_summary, macro_f1_grid_markdown, paired_ttest, wilcoxon_signed_rank, Alternative, EvaluationReport, TestResult,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// `# config_hash=<hash> seed=<seed>` header line for CSV outputs.
pub fn stamp_line(config_hash: &str, seed: u64) -> String {
    format!("# config_hash={config_hash} seed={seed}\n")
}

/// A graph together with the window search that shaped it.
#[derive(Clone, Debug)]
pub struct GraphBuild {
    pub graph: FaultGraph,
    pub selection: WindowSelection,
    pub distances: CondensedDistances,
}

impl GraphBuild {
    /// Write the graph file and, next to it, `<stem>.windows.csv`.
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        GraphFile::save(&self.graph, path)?;
        let windows = path.with_extension("windows.csv");
        let meta = &self.graph.meta;
        let body = stamp_line(&meta.config_hash, meta.seed) + &self.selection.to_csv();
        write_atomic(&windows, body.as_bytes())?;
        Ok(windows)
    }
}

/// Load the manifest named in the config and assemble one series per load.
pub fn load_dataset(cfg: &PipelineConfig) -> Result<BTreeMap<String, TimeSeries>> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no manifest path"))?;
    let recordings = load_recordings(manifest.as_ref(), cfg.sampling_rate, cfg.class_count)?;
    assemble_dataset(&recordings, cfg.block, cfg.reducer, cfg.class_count)
}

/// Build the graph of one load tag from the config's manifest.
pub fn build_graph_for_load(cfg: &PipelineConfig, load: &str) -> Result<GraphBuild> {
    let mut data = load_dataset(cfg)?;
    let series = data.remove(load).ok_or_else(|| {
        let known: Vec<&String> = data.keys().collect();
        Error::invalid(format!("load {load:?} not in manifest (have {known:?})"))
    })?;
    build_graph_from_series(&series, cfg)
}

/// Window selection, segmentation, features, scaling, DTW distances, and
/// thresholding. Window scores are computed on non-overlapping windows.
pub fn build_graph_from_series(series: &TimeSeries, cfg: &PipelineConfig) -> Result<GraphBuild> {
    cfg.validate()?;
    let bins = cfg.bin_rule();
    let selection = select_window(series.samples(), &cfg.candidates, Stride::Window, bins)?;
    let w = selection.w_star;
    let step = cfg.stride_rule().step_for(w);
    let segments = segment(series, w, step)?;
    if segments.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: only {} segment(s) of width {w}",
            series.source_id,
            segments.len()
        )));
    }
    let raw = feature_matrix(&segments, bins)?;
    let scaler = MinMaxScaler::fit(&raw)?;
    let distances = pairwise_distances(&segments, cfg.max_pairs, cfg.dtw_band)?;
    let theta = threshold_from_percentile(distances.values(), cfg.theta_percentile)?;
    let meta = GraphMeta {
        source_id: series.source_id.clone(),
        w_star: w,
        step,
        theta,
        theta_percentile: cfg.theta_percentile,
        bin_count: bins.bins_for(w),
        scaler,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    let graph = build_graph(&segments, &raw, &distances, theta, meta)?;
    log::info!(
        "{}: w*={w}, {} nodes, {} edges, theta={theta:.6}",
        series.source_id,
        graph.node_count(),
        graph.edges.len()
    );
    Ok(GraphBuild {
        graph,
        selection,
        distances,
    })
}

/// Pairwise DTW distances of a graph's stored segments as a dense CSV.
pub fn dtw_heatmap(graph: &FaultGraph, max_pairs: usize, band: Option<usize>) -> Result<String> {
    let segments: Vec<Segment> = graph
        .segments
        .iter()
        .zip(&graph.labels)
        .enumerate()
        .map(|(i, (values, &label))| Segment {
            values: values.clone(),
            start_index: i * graph.meta.step,
            label,
        })
        .collect();
    let d = pairwise_distances(&segments, max_pairs, band)?;
    Ok(stamp_line(&graph.meta.config_hash, graph.meta.seed) + &distance_matrix_csv(&d))
}

/// Which nodes of a graph to score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Subset {
    /// The held-out test split on the training graph, every node elsewhere.
    #[default]
    Auto,
    All,
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Subset::Auto),
            "all" => Ok(Subset::All),
            "train" => Ok(Subset::Train),
            "val" => Ok(Subset::Val),
            "test" => Ok(Subset::Test),
            _ => Err(Error::invalid(format!(
                "unknown subset {s:?} (auto, all, train, val, test)"
            ))),
        }
    }
}

/// Everything about a trained model except its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    pub source_id: String,
    pub config_hash: String,
    pub seed: u64,
    /// Config hash recorded in the training graph.
    pub graph_config_hash: String,
    pub node_count: usize,
    pub w_star: usize,
    /// Feature scaler of the training graph; other graphs are rescaled with it.
    pub scaler: MinMaxScaler,
    pub split: NodeSplit,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    meta: ModelMeta,
    gae: GaeCheckpoint,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    config_hash: String,
    seed: u64,
    ensemble: EnsembleModel,
}

/// A GAE plus the ensemble fitted on its training-node embeddings.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub config: PipelineConfig,
    pub meta: ModelMeta,
    pub gae: Gae,
    pub ensemble: EnsembleModel,
}

/// Result of [`train_model`]: the model, its loss curves, and its scores on
/// the validation and test splits of the training graph.
#[derive(Clone, Debug)]
pub struct Training {
    pub model: TrainedModel,
    pub curves: LossCurves,
    pub val_report: EvaluationReport,
    pub test_report: EvaluationReport,
}

/// Train the GAE on `graph`, embed every node, and fit the ensemble on the
/// training split's embeddings.
pub fn train_model(graph: &FaultGraph, cfg: &PipelineConfig) -> Result<Training> {
    cfg.validate()?;
    let trained = train(graph, &cfg.gae_config())?;
    let h2 = trained.model.embed(graph)?;
    let x = h2.select(Axis(0), &trained.split.train);
    let y: Vec<usize> = trained.split.train.iter().map(|&i| graph.labels[i]).collect();
    let ensemble = fit_ensemble(&x, &y, &cfg.ensemble_config())?;
    let model = TrainedModel {
        config: cfg.clone(),
        meta: ModelMeta {
            format_version: MODEL_FORMAT_VERSION,
            source_id: graph.meta.source_id.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            graph_config_hash: graph.meta.config_hash.clone(),
            node_count: graph.node_count(),
            w_star: graph.meta.w_star,
            scaler: graph.meta.scaler.clone(),
            split: trained.split,
        },
        gae: trained.model,
        ensemble,
    };
    let val_report = model.evaluate(graph, Subset::Val)?;
    let test_report = model.evaluate(graph, Subset::Test)?;
    log::info!(
        "{}: validation macro F1 {:.4}, test macro F1 {:.4}",
        model.meta.source_id,
        val_report.macro_f1,
        test_report.macro_f1
    );
    Ok(Training {
        model,
        curves: trained.curves,
        val_report,
        test_report,
    })
}

impl TrainedModel {
    /// Whether `graph` looks like the graph this model was trained on.
    pub fn is_training_graph(&self, graph: &FaultGraph) -> bool {
        graph.meta.source_id == self.meta.source_id
            && graph.meta.config_hash == self.meta.graph_config_hash
            && graph.node_count() == self.meta.node_count
            && graph.meta.w_star == self.meta.w_star
    }

    fn subset_nodes(&self, graph: &FaultGraph, subset: Subset) -> Result<(Vec<usize>, &'static str)> {
        let own = self.is_training_graph(graph);
        let split = |name: &str| {
            if own {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "the {name} split only exists on the training graph {}",
                    self.meta.source_id
                )))
            }
        };
        Ok(match subset {
            Subset::Auto if own => (self.meta.split.test.clone(), "test_split"),
            Subset::Auto | Subset::All => ((0..graph.node_count()).collect(), "all"),
            Subset::Train => {
                split("train")?;
                (self.meta.split.train.clone(), "train_split")
            }
            Subset::Val => {
                split("val")?;
                (self.meta.split.val.clone(), "val_split")
            }
            Subset::Test => {
                split("test")?;
                (self.meta.split.test.clone(), "test_split")
            }
        })
    }

    /// Class probabilities for every node of `graph`, after rescaling its raw
    /// features with the training scaler.
    pub fn predict_proba(&self, graph: &FaultGraph) -> Result<ndarray::Array2<f64>> {
        let g = graph.rescaled(&self.meta.scaler)?;
        let h2 = self.gae.embed(&g)?;
        self.ensemble.predict_proba(&h2)
    }

    pub fn evaluate(&self, graph: &FaultGraph, subset: Subset) -> Result<EvaluationReport> {
        let (nodes, name) = self.subset_nodes(graph, subset)?;
        if nodes.is_empty() {
            return Err(Error::invalid(format!("{name} of {} is empty", graph.meta.source_id)));
        }
        let c = self.ensemble.class_count();
        if let Some(&bad) = nodes.iter().map(|&i| &graph.labels[i]).find(|&&y| y >= c) {
            return Err(Error::invalid(format!(
                "class {bad} was not seen in training ({c} classes)"
            )));
        }
        let probs = self.predict_proba(graph)?.select(Axis(0), &nodes);
        let predicted = crate::ensemble::argmax_rows(&probs);
        let truth: Vec<usize> = nodes.iter().map(|&i| graph.labels[i]).collect();
        EvaluationReport::from_predictions(
            &self.meta.source_id,
            &graph.meta.source_id,
            name,
            &truth,
            &predicted,
            c,
            &self.meta.config_hash,
            self.meta.seed,
        )
    }

    /// Write `model.json`, `ensemble.json`, and `config.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let model = ModelFile {
            meta: self.meta.clone(),
            gae: self.gae.to_checkpoint(),
        };
        write_atomic(&dir.join("model.json"), &serde_json::to_vec(&model)?)?;
        let ens = EnsembleFile {
            config_hash: self.meta.config_hash.clone(),
            seed: self.meta.seed,
            ensemble: self.ensemble.clone(),
        };
        write_atomic(&dir.join("ensemble.json"), &serde_json::to_vec(&ens)?)?;
        let toml = toml::to_string(&self.config).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let body = stamp_line(&self.meta.config_hash, self.meta.seed) + &toml;
        write_atomic(&dir.join("config.toml"), body.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<TrainedModel> {
        let model: ModelFile = serde_json::from_str(&read_to_string(&dir.join("model.json"))?)?;
        if model.meta.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.meta.format_version
            )));
        }
        let ens: EnsembleFile = serde_json::from_str(&read_to_string(&dir.join("ensemble.json"))?)?;
        let ensemble = EnsembleModel::from_json(&serde_json::to_string(&ens.ensemble)?)?;
        let config = PipelineConfig::load(&dir.join("config.toml"))?;
        if config.hash() != model.meta.config_hash || ens.config_hash != model.meta.config_hash {
            return Err(Error::invalid(format!(
                "{}: config hash mismatch between model files",
                dir.display()
            )));
        }
        Ok(TrainedModel {
            config,
            gae: Gae::from_checkpoint(&model.gae)?,
            meta: model.meta,
            ensemble,
        })
    }
}

impl Training {
    /// Model files plus `loss_curves.csv`, `val_report.json`, and
    /// `test_report.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.model.save(dir)?;
        let meta = &self.model.meta;
        let curves = stamp_line(&meta.config_hash, meta.seed) + &self.curves.to_csv();
        write_atomic(&dir.join("loss_curves.csv"), curves.as_bytes())?;
        write_atomic(&dir.join("val_report.json"), self.val_report.to_json()?.as_bytes())?;
        write_atomic(&dir.join("test_report.json"), self.test_report.to_json()?.as_bytes())
    }
}

/// One paired comparison in the cross-load summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub train_source: String,
    pub baseline_test: String,
    pub other_test: String,
    pub paired_t: TestResult,
    /// `None` when every per-class difference is zero.
    pub wilcoxon: Option<TestResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub train_source: String,
    pub test_source: String,
    pub subset: String,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Mean and sample standard deviation of the per-class F1 scores.
    pub f1_mean: f64,
    pub f1_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalSummary {
    pub config_hashes: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub rows: Vec<SummaryRow>,
    /// For each training load: in-domain test-split F1 vector against each
    /// cross-load F1 vector, two-sided.
    pub comparisons: Vec<PairedComparison>,
}

impl CrossEvalSummary {
    pub fn to_markdown(&self, reports: &[EvaluationReport]) -> String {
        let mut out = String::from("# Cross-load evaluation\n\n");
        for (load, hash) in &self.config_hashes {
            writeln!(out, "- {load}: config_hash={hash} seed={}", self.seeds[load]).unwrap();
        }
        out.push_str("\n## Macro F1 (rows train, columns test)\n\n");
        out.push_str(&macro_f1_grid_markdown(reports));
        out.push_str(
            "\n## Per-class F1\n\n| train | test | subset | mean | std | accuracy |\n|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} |",
                r.train_source, r.test_source, r.subset, r.f1_mean, r.f1_std, r.accuracy
            )
            .unwrap();
        }
        out.push_str("\n## Paired tests against in-domain F1\n\n| train | test | t | p (t) | W | p (W) |\n|---|---|---|---|---|---|\n");
        for c in &self.comparisons {
            let (w, pw) = match &c.wilcoxon {
                Some(r) => (r.statistic.to_string(), format!("{:.4}", r.p_value)),
                None => ("-".into(), "-".into()),
            };
            writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {w} | {pw} |",
                c.train_source, c.other_test, c.paired_t.statistic, c.paired_t.p_value
            )
            .unwrap();
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CrossEval {
    pub reports: Vec<EvaluationReport>,
    pub summary: CrossEvalSummary,
}

/// Expand config files into (config, load) pairs. A config naming its `load`
/// contributes that load; one without contributes every load in its manifest.
pub fn cross_eval_datasets(configs: &[PipelineConfig]) -> Result<Vec<(PipelineConfig, String)>> {
    let mut out = Vec::new();
    for cfg in configs {
        match &cfg.load {
            Some(load) => out.push((cfg.clone(), load.clone())),
            None => {
                for load in load_dataset(cfg)?.into_keys() {
                    out.push((cfg.clone(), load));
                }
            }
        }
    }
    let mut names: Vec<&str> = out.iter().map(|(_, l)| l.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != out.len() || out.len() < 2 {
        return Err(Error::invalid("cross-eval needs at least two distinct loads"));
    }
    Ok(out)
}

/// Train one model per load and evaluate every model on every load. Writes
/// `graphs/`, `models/<load>/`, `reports/<train>__<test>.{json,md}`, and
/// `summary.{json,md}` under `out`.
pub fn cross_eval(datasets: &[(PipelineConfig, String)], out: &Path) -> Result<CrossEval> {
    let mut graphs = Vec::new();
    for (cfg, load) in datasets {
        let build = build_graph_for_load(cfg, load)?;
        build.save(&out.join("graphs").join(format!("{load}.json")))?;
        graphs.push(build.graph);
    }
    let mut models = Vec::new();
    for ((cfg, load), graph) in datasets.iter().zip(&graphs) {
        let training = train_model(graph, cfg)?;
        training.save(&out.join("models").join(load))?;
        models.push(training.model);
    }
    let mut reports = Vec::new();
    for model in &models {
        for graph in &graphs {
            let report = model.evaluate(graph, Subset::Auto)?;
            let stem = format!("{}__{}", report.train_source, report.test_source);
            let dir = out.join("reports");
            write_atomic(&dir.join(format!("{stem}.json")), report.to_json()?.as_bytes())?;
            write_atomic(&dir.join(format!("{stem}.md")), report.to_markdown().as_bytes())?;
            reports.push(report);
        }
    }
    let summary = summarize(&models, &reports)?;
    write_atomic(
        &out.join("summary.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    write_atomic(&out.join("summary.md"), summary.to_markdown(&reports).as_bytes())?;
    Ok(CrossEval { reports, summary })
}

fn summarize(models: &[TrainedModel], reports: &[EvaluationReport]) -> Result<CrossEvalSummary> {
    let mut rows = Vec::new();
    for r in reports {
        let (f1_mean, f1_std) = f1_summary(std::slice::from_ref(&r.f1))?;
        rows.push(SummaryRow {
            train_source: r.train_source.clone(),
            test_source: r.test_source.clone(),
            subset: r.subset.clone(),
            macro_f1: r.macro_f1,
            accuracy: r.accuracy,
            f1_mean,
            f1_std,
        });
    }
    let mut comparisons = Vec::new();
    for m in models {
        let own = &m.meta.source_id;
        let Some(base) = reports.iter().find(|r| &r.train_source == own && &r.test_source == own) else {
            continue;
        };
        for other in reports
            .iter()
            .filter(|r| &r.train_source == own && &r.test_source != own)
        {
            comparisons.push(PairedComparison {
                train_source: own.clone(),
                baseline_test: own.clone(),
                other_test: other.test_source.clone(),
                paired_t: paired_ttest(&base.f1, &other.f1, Alternative::TwoSided)?,
                wilcoxon: signed_rank_unless_equal(&base.f1, &other.f1, Alternative::TwoSided)?,
            });
        }
    }
    Ok(CrossEvalSummary {
        config_hashes: models
            .iter()
            .map(|m| (m.meta.source_id.clone(), m.meta.config_hash.clone()))
            .collect(),
        seeds: models.iter().map(|m| (m.meta.source_id.clone(), m.meta.seed)).collect(),
        rows,
        comparisons,
    })
}

/// Per-class F1 values from a CSV: one value per line, or the last column of
/// each row. A non-numeric first line is a header; `#` lines are comments.
pub fn read_f1_csv(path: &Path) -> Result<Vec<f64>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    let mut first = true;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let header_allowed = std::mem::take(&mut first);
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if header_allowed => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: n + 1,
                    msg: format!("not an F1 value: {field:?}"),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{}: no F1 values", path.display())));
    }
    Ok(out)
}

/// Paired t-test and signed-rank test between two per-class F1 vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Comparison {
    pub n: usize,
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub paired_t: TestResult,
    /// `None` when every per-class difference is zero.
    pub wilcoxon: Option<TestResult>,
}

pub fn compare_f1(a: &[f64], b: &[f64], alternative: Alternative) -> Result<F1Comparison> {
    let (mean_a, std_a) = f1_summary(&[a.to_vec()])?;
    let (mean_b, std_b) = f1_summary(&[b.to_vec()])?;
    Ok(F1Comparison {
        n: a.len(),
        mean_a,
        std_a,
        mean_b,
        std_b,
        paired_t: paired_ttest(a, b, alternative)?,
        wilcoxon: signed_rank_unless_equal(a, b, alternative)?,
    })
}

fn signed_rank_unless_equal(a: &[f64], b: &[f64], alternative: Alternative) -> Result<Option<TestResult>> {
    if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12) {
        return Ok(None);
    }
    wilcoxon_signed_rank(a, b, alternative).map(Some)
}
