//! Seeded sinusoid datasets for tests, examples, and smoke runs.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::io::write_atomic;
use crate::error::Result;
use crate::segmentation::TimeSeries;

/// One sinusoid family per class, concatenated class after class.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    /// Period in samples of each class's sinusoid.
    pub periods: Vec<f64>,
    pub amplitude: f64,
    /// Gaussian noise standard deviation as a fraction of the amplitude.
    pub noise_fraction: f64,
    pub samples_per_class: usize,
}

impl Default for SyntheticSpec {
    /// Three classes, 10% noise, 600 samples each.
    fn default() -> Self {
        SyntheticSpec {
            periods: vec![4.0, 7.0, 11.0],
            amplitude: 1.0,
            noise_fraction: 0.1,
            samples_per_class: 600,
        }
    }
}

impl SyntheticSpec {
    pub fn class_count(&self) -> usize {
        self.periods.len()
    }

    /// Raw samples of one class with a random phase.
    pub fn class_samples(&self, class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let noise = Normal::new(0.0, self.noise_fraction * self.amplitude).expect("finite std");
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        let period = self.periods[class];
        (0..self.samples_per_class)
            .map(|t| self.amplitude * (2.0 * PI * t as f64 / period + phase).sin() + noise.sample(rng))
            .collect()
    }

    pub fn series(&self, seed: u64, source_id: &str) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(self.samples_per_class * self.class_count());
        let mut labels = Vec::with_capacity(samples.capacity());
        for class in 0..self.class_count() {
            samples.extend(self.class_samples(class, &mut rng));
            labels.extend(std::iter::repeat_n(class, self.samples_per_class));
        }
        TimeSeries::new(samples, labels, source_id).expect("finite samples")
    }
}

/// Write one CSV per (load, class) plus `manifest.csv` into `dir`. Load `k`
/// scales the amplitude by `1 + 0.25 k`. Returns the manifest path.
pub fn write_synthetic_recordings(
    dir: &Path,
    spec: &SyntheticSpec,
    loads: &[&str],
    seed: u64,
) -> Result<std::path::PathBuf> {
    let mut manifest = String::from("file,channel,fault_class,load_tag\n");
    for (k, load) in loads.iter().enumerate() {
        let load_spec = SyntheticSpec {
            amplitude: spec.amplitude * (1.0 + 0.25 * k as f64),
            ..spec.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64 * 7919));
        for class in 0..spec.class_count() {
            let name = format!("{load}_class{class}.csv");
            let body: String = load_spec
                .class_samples(class, &mut rng)
                .iter()
                .map(|v| format!("{v:?}\n"))
                .collect();
            write_atomic(&dir.join(&name), body.as_bytes())?;
            manifest.push_str(&format!("{name},0,{class},{load}\n"));
        }
    }
    let path = dir.join("manifest.csv");
    write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}
