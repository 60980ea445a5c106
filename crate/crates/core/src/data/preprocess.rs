use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::io::RawRecording;
use crate::error::{Error, Result};
use crate::segmentation::TimeSeries;

pub const DEFAULT_BLOCK: usize = 1024;

/// How a block of raw samples collapses to one value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    #[default]
    Rms,
    Mean,
    First,
}

impl Reducer {
    pub fn reduce(self, block: &[f64]) -> f64 {
        match self {
            Reducer::Rms => (block.iter().map(|v| v * v).sum::<f64>() / block.len() as f64).sqrt(),
            Reducer::Mean => block.iter().sum::<f64>() / block.len() as f64,
            Reducer::First => block[0],
        }
    }
}

/// One value per full block of `block` samples; the remainder is dropped.
pub fn block_reduce(recording: &RawRecording, block: usize, reducer: Reducer) -> Result<TimeSeries> {
    if block == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    if recording.samples.len() < block {
        return Err(Error::invalid(format!(
            "{}: {} samples is shorter than one block of {block}",
            recording.file.display(),
            recording.samples.len()
        )));
    }
    let values: Vec<f64> = recording
        .samples
        .chunks_exact(block)
        .map(|b| reducer.reduce(b))
        .collect();
    TimeSeries::uniform(values, recording.fault_class, recording.load_tag.clone())
}

/// Reduce every recording and concatenate them, in manifest order, into one
/// labeled series per load tag. Every class in `0..class_count` must appear
/// under every load.
pub fn assemble_dataset(
    recordings: &[RawRecording],
    block: usize,
    reducer: Reducer,
    class_count: usize,
) -> Result<BTreeMap<String, TimeSeries>> {
    let mut out: BTreeMap<String, TimeSeries> = BTreeMap::new();
    let mut seen: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for rec in recordings {
        let reduced = block_reduce(rec, block, reducer)?;
        seen.entry(rec.load_tag.clone())
            .or_insert_with(|| vec![false; class_count])[rec.fault_class] = true;
        match out.get_mut(&rec.load_tag) {
            Some(series) => series.extend(&reduced),
            None => {
                out.insert(rec.load_tag.clone(), reduced);
            }
        }
    }
    for (tag, classes) in &seen {
        if let Some(c) = classes.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("load {tag} has no recording for class {c}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(samples: Vec<f64>, class: usize, tag: &str) -> RawRecording {
        RawRecording {
            file: format!("{tag}-{class}.csv").into(),
            channel: 0,
            samples,
            sampling_rate: 48000.0,
            fault_class: class,
            load_tag: tag.into(),
        }
    }

    #[test]
    fn rms_of_constant_blocks() {
        let ts = block_reduce(&rec(vec![-3.0; 2048], 4, "1hp"), 1024, Reducer::Rms).unwrap();
        assert_eq!(ts.samples(), &[3.0, 3.0]);
        assert_eq!(ts.labels(), &[4, 4]);
    }

    #[test]
    fn unit_block_is_absolute_value() {
        let ts = block_reduce(&rec(vec![-1.0, 2.0, -0.5], 0, "x"), 1, Reducer::Rms).unwrap();
        assert_eq!(ts.samples(), &[1.0, 2.0, 0.5]);
    }

    #[test]
    fn table_one_point_count() {
        let ts = block_reduce(&rec(vec![0.5; 4_867_072], 0, "1hp"), DEFAULT_BLOCK, Reducer::Rms).unwrap();
        assert_eq!(ts.len(), 4753);
        let ts = block_reduce(&rec(vec![0.5; 4_751_360], 0, "2hp"), DEFAULT_BLOCK, Reducer::Rms).unwrap();
        assert_eq!(ts.len(), 4640);
        let ts = block_reduce(&rec(vec![0.5; 3000], 0, "x"), DEFAULT_BLOCK, Reducer::Rms).unwrap();
        assert_eq!(ts.len(), 3000 / 1024);
    }

    #[test]
    fn short_recording_is_an_error() {
        assert!(block_reduce(&rec(vec![1.0; 10], 0, "x"), 1024, Reducer::Rms).is_err());
    }

    #[test]
    fn assemble_concatenates_in_manifest_order() {
        let recs = vec![rec(vec![1.0; 4], 1, "a"), rec(vec![2.0; 4], 0, "a")];
        let ds = assemble_dataset(&recs, 4, Reducer::Mean, 2).unwrap();
        assert_eq!(ds["a"].samples(), &[1.0, 2.0]);
        assert_eq!(ds["a"].labels(), &[1, 0]);

        let swapped = vec![recs[1].clone(), recs[0].clone()];
        let ds = assemble_dataset(&swapped, 4, Reducer::Mean, 2).unwrap();
        assert_eq!(ds["a"].labels(), &[0, 1]);
    }

    #[test]
    fn class_boundaries_align_with_blocks() {
        // 2.5 blocks of class 0 then 3 blocks of class 1: the partial block is
        // dropped, never merged across the boundary
        let recs = vec![rec(vec![1.0; 10], 0, "a"), rec(vec![5.0; 12], 1, "a")];
        let ds = assemble_dataset(&recs, 4, Reducer::Mean, 2).unwrap();
        assert_eq!(ds["a"].samples(), &[1.0, 1.0, 5.0, 5.0, 5.0]);
        assert_eq!(ds["a"].labels(), &[0, 0, 1, 1, 1]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let recs = vec![rec(vec![1.0; 4], 0, "a")];
        assert!(assemble_dataset(&recs, 4, Reducer::Mean, 2).is_err());
    }
}
