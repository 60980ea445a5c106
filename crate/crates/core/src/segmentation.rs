//! Entropy-based window selection and overlapping segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled channel of preprocessed vibration samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    labels: Vec<usize>,
    pub source_id: String,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, labels: Vec<usize>, source_id: impl Into<String>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::invalid(format!(
                "time series has {} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(TimeSeries {
            samples,
            labels,
            source_id: source_id.into(),
        })
    }

    /// Series with one label for every sample.
    pub fn uniform(samples: Vec<f64>, label: usize, source_id: impl Into<String>) -> Result<Self> {
        let labels = vec![label; samples.len()];
        Self::new(samples, labels, source_id)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Append another series (labels included).
    pub fn extend(&mut self, other: &TimeSeries) {
        self.samples.extend_from_slice(&other.samples);
        self.labels.extend_from_slice(&other.labels);
    }
}

/// A window of consecutive samples cut from a [`TimeSeries`].
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub values: Vec<f64>,
    pub start_index: usize,
    pub label: usize,
}

/// How many histogram bins to use for a window of a given size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    Fixed(usize),
    /// `max(2, ceil(sqrt(w)))`.
    #[default]
    SqrtWindow,
}

impl BinRule {
    pub fn bins_for(self, w: usize) -> usize {
        match self {
            BinRule::Fixed(n) => n,
            BinRule::SqrtWindow => ((w as f64).sqrt().ceil() as usize).max(2),
        }
    }
}

/// Distance between consecutive segment starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stride {
    Fixed(usize),
    /// Non-overlapping tiling, step = w.
    Window,
    /// 50% overlap, step = ceil(w / 2).
    HalfWindow,
}

impl Stride {
    pub fn step_for(self, w: usize) -> usize {
        match self {
            Stride::Fixed(s) => s,
            Stride::Window => w,
            Stride::HalfWindow => w.div_ceil(2),
        }
    }
}

pub const DEFAULT_CANDIDATES: [usize; 11] = [5, 10, 15, 20, 25, 30, 40, 50, 64, 100, 128];

/// Shannon entropy (nats) of the values' equal-width histogram over
/// `[min, max]`.
pub fn shannon_entropy(values: &[f64], bin_count: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("entropy of an empty segment"));
    }
    if bin_count == 0 {
        return Err(Error::invalid("bin_count must be at least 1"));
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = max - min;
    if span == 0.0 || bin_count == 1 {
        return Ok(0.0);
    }
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        let b = ((v - min) / span * bin_count as f64) as usize;
        counts[b.min(bin_count - 1)] += 1;
    }
    let n = values.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

fn check_window(n: usize, w: usize, step: usize) -> Result<()> {
    if w == 0 || w > n {
        return Err(Error::invalid(format!(
            "window {w} does not fit a series of length {n}"
        )));
    }
    if step == 0 {
        return Err(Error::invalid("step must be at least 1"));
    }
    Ok(())
}

/// Start offsets `0, step, 2*step, ... <= n - w`.
pub fn window_starts(n: usize, w: usize, step: usize) -> impl Iterator<Item = usize> {
    (0..=n - w).step_by(step)
}

/// Mean segment entropy for windows of size `w` at the given stride.
pub fn average_entropy(series: &[f64], w: usize, step: usize, bin_count: usize) -> Result<f64> {
    check_window(series.len(), w, step)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for start in window_starts(series.len(), w, step) {
        total += shannon_entropy(&series[start..start + w], bin_count)?;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Result of the normalized-entropy window search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSelection {
    pub w_star: usize,
    pub candidates: Vec<usize>,
    /// `average_entropy(w) / ln(w)` for each candidate, in candidate order.
    pub scores: Vec<f64>,
}

impl WindowSelection {
    pub fn score_of(&self, w: usize) -> Option<f64> {
        self.candidates.iter().position(|&c| c == w).map(|i| self.scores[i])
    }

    /// `window,score` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window,score\n");
        for (w, s) in self.candidates.iter().zip(&self.scores) {
            out.push_str(&format!("{w},{s:?}\n"));
        }
        out
    }
}

/// Choose the window maximizing mean entropy normalized by `ln w`. Ties go to
/// the smallest window.
pub fn select_window(series: &[f64], candidates: &[usize], stride: Stride, bins: BinRule) -> Result<WindowSelection> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate window sizes"));
    }
    if let Some(&w) = candidates.iter().find(|&&w| w < 2) {
        return Err(Error::invalid(format!("candidate window {w} is below 2")));
    }
    let scores = candidates
        .iter()
        .map(|&w| Ok(average_entropy(series, w, stride.step_for(w), bins.bins_for(w))? / (w as f64).ln()))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && candidates[i] < candidates[best]);
        if better {
            best = i;
        }
    }
    Ok(WindowSelection {
        w_star: candidates[best],
        candidates: candidates.to_vec(),
        scores,
    })
}

/// Majority label, ties to the lowest class id.
pub fn majority_label(labels: &[usize]) -> usize {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Cut the series into windows of `w` samples every `step` samples.
pub fn segment(series: &TimeSeries, w: usize, step: usize) -> Result<Vec<Segment>> {
    check_window(series.len(), w, step)?;
    Ok(window_starts(series.len(), w, step)
        .map(|start| Segment {
            values: series.samples[start..start + w].to_vec(),
            start_index: start,
            label: majority_label(&series.labels[start..start + w]),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[5.0; 4], 4).unwrap(), 0.0);
        let h = shannon_entropy(&[0.0, 0.0, 1.0, 1.0], 2).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
        let h = shannon_entropy(&[0.0, 1.0, 1.0, 2.0, 2.0, 2.0], 3).unwrap();
        let expected = -[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]
            .iter()
            .map(|p: &f64| p * p.ln())
            .sum::<f64>();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 1.0114).abs() < 1e-4);
        assert!(shannon_entropy(&[], 3).is_err());
        assert!(shannon_entropy(&[1.0], 0).is_err());
    }

    #[test]
    fn average_entropy_examples() {
        assert_eq!(average_entropy(&[2.0; 20], 5, 1, 3).unwrap(), 0.0);
        // every window of a period-4 sequence is a permutation of {0,1,2,3}
        let series: Vec<f64> = (0..40).map(|i| (i % 4) as f64).collect();
        let single = shannon_entropy(&series[0..4], 4).unwrap();
        let avg = average_entropy(&series, 4, 1, 4).unwrap();
        assert!((avg - single).abs() < 1e-12);
        assert!(average_entropy(&series, 41, 1, 4).is_err());
    }

    #[test]
    fn select_window_single_candidate_and_errors() {
        let series: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let sel = select_window(&series, &[16], Stride::Window, BinRule::default()).unwrap();
        assert_eq!(sel.w_star, 16);
        assert!(select_window(&series, &[], Stride::Window, BinRule::default()).is_err());
        assert!(select_window(&series, &[1, 4], Stride::Window, BinRule::default()).is_err());
    }

    #[test]
    fn select_window_ties_go_to_smallest() {
        // constant series: every score is 0
        let sel = select_window(&[1.0; 64], &[16, 4, 8], Stride::Window, BinRule::default()).unwrap();
        assert_eq!(sel.w_star, 4);
    }

    #[test]
    fn segment_counts_and_labels() {
        let s = TimeSeries::uniform((0..10).map(f64::from).collect(), 0, "t").unwrap();
        assert_eq!(segment(&s, 5, 5).unwrap().len(), 2);
        let segs = segment(&s, 5, 1).unwrap();
        assert_eq!(
            segs.iter().map(|s| s.start_index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4, 5]
        );
        let s = TimeSeries::new(vec![0.0; 5], vec![0, 0, 0, 1, 1], "t").unwrap();
        assert_eq!(segment(&s, 5, 1).unwrap()[0].label, 0);
        let s = TimeSeries::new(vec![0.0; 4], vec![2, 1, 2, 1], "t").unwrap();
        assert_eq!(segment(&s, 4, 1).unwrap()[0].label, 1);
        assert!(segment(&s, 5, 1).is_err());
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new(vec![1.0], vec![], "x").is_err());
        assert!(TimeSeries::new(vec![f64::NAN], vec![0], "x").is_err());
    }

    #[test]
    fn bin_rule_and_stride_defaults() {
        assert_eq!(BinRule::SqrtWindow.bins_for(2), 2);
        assert_eq!(BinRule::SqrtWindow.bins_for(15), 4);
        assert_eq!(BinRule::SqrtWindow.bins_for(16), 4);
        assert_eq!(Stride::HalfWindow.step_for(15), 8);
    }

    proptest! {
        #[test]
        fn entropy_is_bounded(values in prop::collection::vec(-1e3f64..1e3, 1..64), bins in 1usize..20) {
            let h = shannon_entropy(&values, bins).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (bins as f64).ln() + 1e-12);
        }

        #[test]
        fn entropy_is_permutation_and_affine_invariant(
            values in prop::collection::vec(-100f64..100.0, 2..48),
            bins in 2usize..12,
            scale in 0.01f64..50.0,
            shift in -100f64..100.0,
            seed in any::<u64>(),
        ) {
            let h = shannon_entropy(&values, bins).unwrap();
            let mut shuffled = values.clone();
            let n = shuffled.len();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (state >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(shannon_entropy(&shuffled, bins).unwrap(), h);
            let rescaled: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
            prop_assert!((shannon_entropy(&rescaled, bins).unwrap() - h).abs() < 1e-12);
        }

        #[test]
        fn non_overlapping_segments_reassemble_prefix(
            values in prop::collection::vec(-10f64..10.0, 1..200),
            w in 1usize..20,
        ) {
            prop_assume!(w <= values.len());
            let s = TimeSeries::uniform(values.clone(), 0, "p").unwrap();
            let segs = segment(&s, w, w).unwrap();
            let joined: Vec<f64> = segs.iter().flat_map(|s| s.values.iter().copied()).collect();
            prop_assert_eq!(segs.len(), (values.len() - w) / w + 1);
            prop_assert_eq!(&joined[..], &values[..joined.len()]);
        }
    }
}
