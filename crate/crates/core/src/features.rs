//! Per-segment node features and column scaling.
//!
//! Row layout (10 columns): mean, std, skewness, kurtosis, entropy,
//! average first difference, average second difference, and the three
//! largest periodogram powers.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{shannon_entropy, BinRule, Segment};

pub const FEATURE_DIM: usize = 10;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "mean",
    "std_dev",
    "skewness",
    "kurtosis",
    "entropy_nats",
    "avg_first_diff",
    "avg_second_diff",
    "psd_amp_1",
    "psd_amp_2",
    "psd_amp_3",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub entropy_nats: f64,
    pub avg_first_diff: f64,
    pub avg_second_diff: f64,
    pub psd: [f64; 3],
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.mean,
            self.std_dev,
            self.skewness,
            self.kurtosis,
            self.entropy_nats,
            self.avg_first_diff,
            self.avg_second_diff,
            self.psd[0],
            self.psd[1],
            self.psd[2],
        ]
    }
}

fn need(op: &str, values: &[f64], min: usize) -> Result<()> {
    if values.len() < min {
        Err(Error::invalid(format!(
            "{op} needs at least {min} samples, got {}",
            values.len()
        )))
    } else {
        Ok(())
    }
}

/// Population mean, standard deviation, skewness and (non-excess) kurtosis.
/// A zero standard deviation yields zero skewness and kurtosis.
pub fn stat_features(values: &[f64]) -> Result<(f64, f64, f64, f64)> {
    need("stat_features", values, 2)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let std = m2.sqrt();
    if std == 0.0 {
        return Ok((mean, 0.0, 0.0, 0.0));
    }
    Ok((mean, std, m3 / (std * std * std), m4 / (m2 * m2)))
}

/// Average first and second differences.
pub fn temporal_features(values: &[f64]) -> Result<(f64, f64)> {
    need("temporal_features", values, 3)?;
    let w = values.len();
    let first: Vec<f64> = values.windows(2).map(|p| p[1] - p[0]).collect();
    let avg_first = first.iter().sum::<f64>() / (w - 1) as f64;
    let avg_second = first.windows(2).map(|p| p[1] - p[0]).sum::<f64>() / (w - 2) as f64;
    Ok((avg_first, avg_second))
}

/// One-sided periodogram of the mean-removed segment, DC excluded.
///
/// Bin `k` holds `2|X_k|^2 / w^2` (the Nyquist bin is not doubled), so the
/// bins sum to the population variance and a sinusoid of amplitude `A` on
/// an exact bin contributes `A^2 / 2`.
pub fn periodogram(values: &[f64]) -> Vec<f64> {
    let w = values.len();
    let n = w as f64;
    let mean = values.iter().sum::<f64>() / n;
    (1..=w / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in values.iter().enumerate() {
                let angle = 2.0 * PI * (k * t % w) as f64 / n;
                re += (v - mean) * angle.cos();
                im -= (v - mean) * angle.sin();
            }
            let p = (re * re + im * im) / (n * n);
            if 2 * k == w {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// The three largest periodogram powers, descending, zero padded.
pub fn psd_top3(values: &[f64]) -> Result<[f64; 3]> {
    need("psd_top3", values, 4)?;
    let mut psd = periodogram(values);
    psd.sort_by(|a, b| b.total_cmp(a));
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(psd) {
        *o = p;
    }
    Ok(out)
}

pub fn segment_features(values: &[f64], bin_count: usize) -> Result<FeatureVector> {
    let (mean, std_dev, skewness, kurtosis) = stat_features(values)?;
    let (avg_first_diff, avg_second_diff) = temporal_features(values)?;
    Ok(FeatureVector {
        mean,
        std_dev,
        skewness,
        kurtosis,
        entropy_nats: shannon_entropy(values, bin_count)?,
        avg_first_diff,
        avg_second_diff,
        psd: psd_top3(values)?,
    })
}

/// Stack the feature vectors of every segment into an `m x 10` matrix.
pub fn feature_matrix(segments: &[Segment], bins: BinRule) -> Result<Array2<f64>> {
    if segments.is_empty() {
        return Err(Error::invalid("feature_matrix of zero segments"));
    }
    let mut out = Array2::zeros((segments.len(), FEATURE_DIM));
    for (mut row, seg) in out.rows_mut().into_iter().zip(segments) {
        let f = segment_features(&seg.values, bins.bins_for(seg.values.len()))?;
        for (dst, v) in row.iter_mut().zip(f.to_array()) {
            *dst = v;
        }
    }
    Ok(out)
}

/// Per-column min-max parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(matrix: &Array2<f64>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mins = matrix.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b)).to_vec();
        let maxs = matrix.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b)).to_vec();
        Ok(MinMaxScaler { mins, maxs })
    }

    /// Scale to `[0, 1]`. Constant columns map to 0.5; values outside the
    /// fitted range are clipped.
    pub fn transform(&self, matrix: &Array2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.mins.len() {
            return Err(Error::Shape {
                op: "MinMaxScaler::transform",
                left: matrix.dim(),
                right: (0, self.mins.len()),
            });
        }
        let mut out = matrix.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.mins[j], self.maxs[j]);
            let span = hi - lo;
            col.mapv_inplace(|x| {
                if span > 0.0 {
                    ((x - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            });
        }
        Ok(out)
    }
}

pub fn minmax_normalize(matrix: &Array2<f64>) -> Result<(Array2<f64>, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(matrix)?;
    Ok((scaler.transform(matrix)?, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stat_examples() {
        assert_eq!(stat_features(&[1.0; 4]).unwrap(), (1.0, 0.0, 0.0, 0.0));
        let (m, s, sk, ku) = stat_features(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!((m, s, sk, ku), (0.0, 1.0, 0.0, 1.0));
        let (m, s, sk, ku) = stat_features(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert!(close(m, 1.0, 1e-15));
        assert!(close(s, 3f64.sqrt(), 1e-15));
        assert!(close(sk, 2.0 / 3f64.sqrt(), 1e-12));
        assert!(close(ku, 7.0 / 3.0, 1e-12));
        assert!(stat_features(&[1.0]).is_err());
    }

    #[test]
    fn stat_matches_two_pass_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(2..40);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let mut sum = 0.0;
            for x in &v {
                sum += x;
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for x in &v {
                ss += (x - mean) * (x - mean);
            }
            let std = (ss / n as f64).sqrt();
            let (m, s, _, _) = stat_features(&v).unwrap();
            assert!(close(m, mean, 1e-12) && close(s, std, 1e-12));
        }
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_features(&[0.0, 2.0, 4.0, 6.0]).unwrap(), (2.0, 0.0));
        assert_eq!(temporal_features(&[3.0; 5]).unwrap(), (0.0, 0.0));
        assert_eq!(temporal_features(&[0.0, 1.0, 4.0, 9.0]).unwrap(), (3.0, 2.0));
        assert!(temporal_features(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn psd_examples() {
        assert_eq!(psd_top3(&[2.0; 8]).unwrap(), [0.0; 3]);
        let w = 16;
        let sine: Vec<f64> = (0..w).map(|t| (2.0 * PI * 2.0 * t as f64 / w as f64).sin()).collect();
        let p = psd_top3(&sine).unwrap();
        assert!(p[0] > 0.0 && p[1].abs() < 1e-9 && p[2].abs() < 1e-9);
        assert!(close(p[0], 0.5, 1e-12));
        let two: Vec<f64> = (0..w)
            .map(|t| {
                let x = t as f64 / w as f64;
                2.0 * (2.0 * PI * 1.0 * x).sin() + (2.0 * PI * 3.0 * x).cos()
            })
            .collect();
        let p = psd_top3(&two).unwrap();
        assert!(close(p[0] / p[1], 4.0, 1e-6));
        assert!(psd_top3(&[1.0, 2.0, 3.0]).is_err());
        // w = 4 has only two positive-frequency bins
        assert_eq!(psd_top3(&[1.0, 2.0, 1.0, 2.0]).unwrap()[2], 0.0);
    }

    #[test]
    fn feature_matrix_layout() {
        let seg = |values: Vec<f64>| Segment {
            values,
            start_index: 0,
            label: 0,
        };
        let m = feature_matrix(&[seg(vec![3.0; 6])], BinRule::default()).unwrap();
        assert_eq!(
            m.row(0).to_vec(),
            vec![3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let segs: Vec<Segment> = (0..20)
            .map(|_| seg((0..15).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let m = feature_matrix(&segs, BinRule::Fixed(4)).unwrap();
        for (i, s) in segs.iter().enumerate() {
            let (a, b, c, d) = stat_features(&s.values).unwrap();
            let e = shannon_entropy(&s.values, 4).unwrap();
            let (f, g) = temporal_features(&s.values).unwrap();
            let p = psd_top3(&s.values).unwrap();
            assert_eq!(m.row(i).to_vec(), vec![a, b, c, d, e, f, g, p[0], p[1], p[2]]);
        }
        let mut rev = segs.clone();
        rev.reverse();
        let mr = feature_matrix(&rev, BinRule::Fixed(4)).unwrap();
        assert_eq!(mr.row(0), m.row(19));
        assert!(feature_matrix(&[], BinRule::default()).is_err());
    }

    #[test]
    fn minmax_examples() {
        let (n, sc) = minmax_normalize(&array![[0.0, 7.0], [5.0, 7.0], [10.0, 7.0]]).unwrap();
        assert_eq!(n, array![[0.0, 0.5], [0.5, 0.5], [1.0, 0.5]]);
        assert_eq!(sc.transform(&array![[0.0, 7.0], [5.0, 7.0], [10.0, 7.0]]).unwrap(), n);
        assert_eq!(sc.transform(&array![[20.0, 1.0]]).unwrap(), array![[1.0, 0.5]]);
    }

    proptest! {
        #[test]
        fn features_finite_and_bounded(values in prop::collection::vec(-1e3f64..1e3, 4..40)) {
            let f = segment_features(&values, 4).unwrap();
            prop_assert!(f.to_array().iter().all(|v| v.is_finite()));
            prop_assert!(f.std_dev >= 0.0);
            prop_assert!(f.psd[0] >= f.psd[1] && f.psd[1] >= f.psd[2]);
            // Parseval: returned power never exceeds the variance
            let total: f64 = f.psd.iter().sum();
            prop_assert!(total <= f.std_dev * f.std_dev * (1.0 + 1e-9) + 1e-9);
        }

        #[test]
        fn normalized_entries_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..20)) {
            let m = Array2::from_shape_vec((rows.len(), 3), rows.concat()).unwrap();
            let (n, _) = minmax_normalize(&m).unwrap();
            prop_assert!(n.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
