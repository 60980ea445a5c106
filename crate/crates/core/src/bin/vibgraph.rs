use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vibgraph::data::io::write_atomic;
use vibgraph::data::PipelineConfig;
use vibgraph::graph::GraphFile;
use vibgraph::pipeline::{self, Subset, TrainedModel};
use vibgraph::stats::Alternative;
use vibgraph::Result;

#[derive(Parser)]
#[command(
    name = "vibgraph",
    version,
    about = "Vibration fault diagnosis on DTW similarity graphs"
)]
struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file; every key has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let base = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        base.with_overrides(&self.overrides)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    TwoSided,
    Greater,
    Less,
}

#[derive(Subcommand)]
enum Command {
    /// Build the similarity graph of one load; also writes `<out>.windows.csv`.
    BuildGraph {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        load: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the autoencoder and the ensemble on a graph.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model on a graph.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// auto, all, train, val, or test.
        #[arg(long, default_value = "auto")]
        subset: Subset,
    },
    /// Train on every load and evaluate on every load.
    CrossEval {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired t-test and signed-rank test between two per-class F1 files.
    Compare {
        #[arg(long)]
        f1_a: PathBuf,
        #[arg(long)]
        f1_b: PathBuf,
        #[arg(long, value_enum, default_value = "two-sided")]
        alternative: Side,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense pairwise DTW distance matrix of a graph's segments.
    DtwHeatmap {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildGraph { cfg, load, out } => {
            let cfg = cfg.load()?;
            let build = pipeline::build_graph_for_load(&cfg, &load)?;
            let windows = build.save(&out)?;
            println!(
                "{}: w*={} nodes={} edges={} -> {} ({})",
                load,
                build.graph.meta.w_star,
                build.graph.node_count(),
                build.graph.edges.len(),
                out.display(),
                windows.display()
            );
        }
        Command::Train { cfg, graph, out } => {
            let cfg = cfg.load()?;
            let graph = GraphFile::load(&graph)?;
            let training = pipeline::train_model(&graph, &cfg)?;
            training.save(&out)?;
            println!(
                "{}: val macro F1 {:.4}, test macro F1 {:.4}, weights {:?} -> {}",
                training.model.meta.source_id,
                training.val_report.macro_f1,
                training.test_report.macro_f1,
                training.model.ensemble.weights,
                out.display()
            );
        }
        Command::Evaluate {
            model,
            graph,
            out,
            subset,
        } => {
            let model = TrainedModel::load(&model)?;
            let graph = GraphFile::load(&graph)?;
            let report = model.evaluate(&graph, subset)?;
            write_atomic(&out, report.to_json()?.as_bytes())?;
            println!(
                "{} -> {} ({}): macro F1 {:.4}, accuracy {:.4}",
                report.train_source, report.test_source, report.subset, report.macro_f1, report.accuracy
            );
        }
        Command::CrossEval {
            configs,
            overrides,
            out,
        } => {
            let configs = configs
                .iter()
                .map(|p| PipelineConfig::load(p)?.with_overrides(&overrides))
                .collect::<Result<Vec<_>>>()?;
            let datasets = pipeline::cross_eval_datasets(&configs)?;
            let result = pipeline::cross_eval(&datasets, &out)?;
            for r in &result.reports {
                println!(
                    "{} -> {} ({}): macro F1 {:.4}",
                    r.train_source, r.test_source, r.subset, r.macro_f1
                );
            }
        }
        Command::Compare {
            f1_a,
            f1_b,
            alternative,
            out,
        } => {
            let a = pipeline::read_f1_csv(&f1_a)?;
            let b = pipeline::read_f1_csv(&f1_b)?;
            let alternative = match alternative {
                Side::TwoSided => Alternative::TwoSided,
                Side::Greater => Alternative::Greater,
                Side::Less => Alternative::Less,
            };
            let json = serde_json::to_string_pretty(&pipeline::compare_f1(&a, &b, alternative)?)? + "\n";
            match out {
                Some(path) => write_atomic(&path, json.as_bytes())?,
                None => print!("{json}"),
            }
        }
        Command::DtwHeatmap { cfg, graph, out } => {
            let cfg = cfg.load()?;
            let graph = GraphFile::load(&graph)?;
            write_atomic(
                &out,
                pipeline::dtw_heatmap(&graph, cfg.max_pairs, cfg.dtw_band)?.as_bytes(),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
