use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count()).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], class_count: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; class_count]; class_count];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= class_count || p >= class_count {
            return Err(Error::invalid(format!(
                "label pair ({t}, {p}) outside 0..{class_count}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// One-vs-rest precision, recall, and F1 per class with unweighted macro
/// averages. Undefined ratios (0/0) are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Result<ClassMetrics> {
    let c = cm.class_count();
    if c < 2 {
        return Err(Error::invalid("per-class metrics need at least two classes"));
    }
    let mut precision = Vec::with_capacity(c);
    let mut recall = Vec::with_capacity(c);
    let mut f1 = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.counts[k][k] as f64;
        let predicted: u64 = (0..c).map(|t| cm.counts[t][k]).sum();
        let actual: u64 = cm.counts[k].iter().sum();
        let p = ratio(tp, predicted as f64);
        let r = ratio(tp, actual as f64);
        precision.push(p);
        recall.push(r);
        f1.push(ratio(2.0 * p * r, p + r));
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / c as f64;
    Ok(ClassMetrics {
        macro_precision: avg(&precision),
        macro_recall: avg(&recall),
        macro_f1: avg(&f1),
        precision,
        recall,
        f1,
    })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty confusion matrix"));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Metrics of one model on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub train_source: String,
    pub test_source: String,
    /// Which nodes were scored, e.g. `test_split` or `all`.
    pub subset: String,
    pub confusion: ConfusionMatrix,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub config_hash: String,
    pub seed: u64,
}

impl EvaluationReport {
    #[allow(clippy::too_many_arguments)]
    pub fn from_predictions(
        train_source: &str,
        test_source: &str,
        subset: &str,
        truth: &[usize],
        predicted: &[usize],
        class_count: usize,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self> {
        let confusion = confusion_matrix(truth, predicted, class_count)?;
        let m = precision_recall_f1(&confusion)?;
        Ok(EvaluationReport {
            train_source: train_source.into(),
            test_source: test_source.into(),
            subset: subset.into(),
            accuracy: accuracy(&confusion)?,
            confusion,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            macro_f1: m.macro_f1,
            config_hash: config_hash.into(),
            seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-class precision/recall/F1 grid plus the confusion matrix.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "### {} -> {} ({})\n\nmacro F1 {:.4}, accuracy {:.4}\n",
            self.train_source, self.test_source, self.subset, self.macro_f1, self.accuracy
        )
        .unwrap();
        out.push_str("| class | precision | recall | F1 |\n|---|---|---|---|\n");
        for c in 0..self.f1.len() {
            writeln!(
                out,
                "| {c} | {:.4} | {:.4} | {:.4} |",
                self.precision[c], self.recall[c], self.f1[c]
            )
            .unwrap();
        }
        out.push_str("\nconfusion (rows true, columns predicted)\n\n|   |");
        let c = self.confusion.class_count();
        for k in 0..c {
            write!(out, " {k} |").unwrap();
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(c));
        out.push('\n');
        for (t, row) in self.confusion.counts.iter().enumerate() {
            write!(out, "| {t} |").unwrap();
            for v in row {
                write!(out, " {v} |").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Train-by-test grid of macro F1 over a set of reports.
pub fn macro_f1_grid_markdown(reports: &[EvaluationReport]) -> String {
    let mut trains: Vec<&str> = reports.iter().map(|r| r.train_source.as_str()).collect();
    let mut tests: Vec<&str> = reports.iter().map(|r| r.test_source.as_str()).collect();
    trains.sort_unstable();
    trains.dedup();
    tests.sort_unstable();
    tests.dedup();
    let mut out = String::from("| train \\ test |");
    for t in &tests {
        write!(out, " {t} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(tests.len()));
    out.push('\n');
    for tr in &trains {
        write!(out, "| {tr} |").unwrap();
        for te in &tests {
            match reports.iter().find(|r| r.train_source == *tr && r.test_source == *te) {
                Some(r) => write!(out, " {:.4} |", r.macro_f1).unwrap(),
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}
