//! Two-sample, paired, and signed-rank significance tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Differences (or rank magnitudes) within this relative distance are treated
/// as equal, so `1.0 - 0.94` and `0.99 - 0.93` tie.
const TIE_TOLERANCE: f64 = 1e-9;

/// Paired differences at or below this magnitude count as zero.
const ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The first sample is larger.
    Greater,
    /// The first sample is smaller.
    Less,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    TwoSampleT,
    PairedT,
    WilcoxonSignedRank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub alternative: Alternative,
    /// `t` for the t-tests, `min(W+, W-)` for the signed-rank test.
    pub statistic: f64,
    pub p_value: f64,
    pub significant_at_0_05: bool,
    /// Degrees of freedom of the t-tests.
    pub df: Option<f64>,
    /// Mean of `a - b` for the paired tests, difference of means for Welch.
    pub mean_difference: Option<f64>,
    pub w_plus: Option<f64>,
    pub w_minus: Option<f64>,
    /// Whether a signed-rank p-value is exact rather than a normal approximation.
    pub exact: Option<bool>,
}

impl TestResult {
    fn new(kind: TestKind, alternative: Alternative, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            kind,
            alternative,
            statistic,
            p_value,
            significant_at_0_05: p_value < 0.05,
            df: None,
            mean_difference: None,
            w_plus: None,
            w_minus: None,
            exact: None,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// p-value of a t statistic with `df` degrees of freedom.
pub fn t_p_value(t: f64, df: f64, alternative: Alternative) -> f64 {
    if t.is_infinite() {
        let upper = if t > 0.0 { 0.0 } else { 1.0 };
        return match alternative {
            Alternative::TwoSided => 0.0,
            Alternative::Greater => upper,
            Alternative::Less => 1.0 - upper,
        };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    match alternative {
        Alternative::TwoSided => 2.0 * dist.sf(t.abs()),
        Alternative::Greater => dist.sf(t),
        Alternative::Less => dist.cdf(t),
    }
}

fn degenerate_t(diff: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
pub fn two_sample_ttest(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("each sample needs at least two values"));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let diff = mean(a) - mean(b);
    let (sa, sb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = sa + sb;
    let (t, df) = if se2 == 0.0 {
        (degenerate_t(diff), (a.len() + b.len() - 2) as f64)
    } else {
        let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
        (diff / se2.sqrt(), df)
    };
    let p = if t == 0.0 && se2 == 0.0 {
        1.0
    } else {
        t_p_value(t, df, alternative)
    };
    let mut r = TestResult::new(TestKind::TwoSampleT, alternative, t, p);
    r.df = Some(df);
    r.mean_difference = Some(diff);
    Ok(r)
}

/// Paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid(format!(
            "paired samples need equal lengths of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let sd = sample_variance(&d).sqrt();
    let df = n - 1.0;
    let (t, p) = if sd == 0.0 {
        let t = degenerate_t(md);
        (t, if md == 0.0 { 1.0 } else { t_p_value(t, df, alternative) })
    } else {
        let t = md / (sd / n.sqrt());
        (t, t_p_value(t, df, alternative))
    };
    let mut r = TestResult::new(TestKind::PairedT, alternative, t, p);
    r.df = Some(df);
    r.mean_difference = Some(md);
    Ok(r)
}

/// Mean ranks (1-based) of `values`, ties sharing the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && tied(values[order[end]], values[order[start]]) {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1e-300)
}

/// Largest effective sample size that gets an exact p-value.
pub const WILCOXON_EXACT_MAX: usize = 12;

/// Distribution of `2 W+` under the null: `counts[s]` is the number of sign
/// assignments whose doubled positive rank sum is `s`.
fn doubled_rank_sum_counts(doubled_ranks: &[usize]) -> Vec<u64> {
    let total: usize = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in doubled_ranks {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// Exact null probability of `W+` being at most / at least the observed value.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let counts = doubled_rank_sum_counts(&doubled);
    let observed = (2.0 * w_plus).round() as usize;
    let total = 2f64.powi(ranks.len() as i32);
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    (lower as f64 / total, upper as f64 / total)
}

/// Wilcoxon signed-rank test on `a - b`. Zero differences are dropped and
/// tied magnitudes share mean ranks. The p-value is exact for up to
/// [`WILCOXON_EXACT_MAX`] nonzero differences and otherwise uses the normal
/// approximation with tie correction (no continuity correction).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a, "sample a")?;
    check_finite(b, "sample b")?;
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| v.abs() > ZERO_TOLERANCE)
        .collect();
    wilcoxon_from_differences(&d, alternative)
}

pub fn wilcoxon_from_differences(d: &[f64], alternative: Alternative) -> Result<TestResult> {
    if d.is_empty() {
        return Err(Error::invalid(
            "signed-rank test is undefined when every difference is zero",
        ));
    }
    let magnitudes: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let w_minus = (n * (n + 1)) as f64 / 2.0 - w_plus;
    let exact = n <= WILCOXON_EXACT_MAX;
    let (lower, upper) = if exact {
        exact_tails(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        for group in sorted.chunk_by(|x, y| x == y) {
            let t = group.len() as f64;
            var -= (t * t * t - t) / 48.0;
        }
        let z = (w_plus - mean) / var.sqrt();
        let normal = Normal::standard();
        (normal.cdf(z), normal.sf(z))
    };
    let p = match alternative {
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
        Alternative::Greater => upper,
        Alternative::Less => lower,
    };
    let mut r = TestResult::new(TestKind::WilcoxonSignedRank, alternative, w_plus.min(w_minus), p);
    r.w_plus = Some(w_plus);
    r.w_minus = Some(w_minus);
    r.exact = Some(exact);
    Ok(r)
}

/// Mean and sample standard deviation over every entry of every vector.
pub fn f1_summary(vectors: &[Vec<f64>]) -> Result<(f64, f64)> {
    let all: Vec<f64> = vectors.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::invalid("f1_summary of no values"));
    }
    check_finite(&all, "F1 values")?;
    let m = mean(&all);
    let sd = if all.len() > 1 {
        sample_variance(&all).sqrt()
    } else {
        0.0
    };
    Ok((m, sd))
}

#[cfg(test)]
mod unit {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ttests_on_identical_samples() {
        let a = [0.3, 0.5, 0.9];
        let r = paired_ttest(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = two_sample_ttest(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn welch_shifted_samples() {
        let a = [1.0, 2.0, 3.0];
        let b = [11.0, 12.0, 13.0];
        let r = two_sample_ttest(&a, &b, Alternative::TwoSided).unwrap();
        // t = -10 / sqrt(1/3 + 1/3), df = 4
        assert!((r.statistic + 10.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.df.unwrap() - 4.0).abs() < 1e-12);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn welch_zero_variance_guard() {
        let r = two_sample_ttest(&[0.0, 0.0], &[1.0, 1.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, f64::NEG_INFINITY);
        assert_eq!(r.p_value, 0.0);
        assert!(two_sample_ttest(&[1.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn t_tail_values() {
        // Student t with 1 df is Cauchy: P(T > 1) = 1/4
        assert!((t_p_value(1.0, 1.0, Alternative::Greater) - 0.25).abs() < 1e-12);
        assert!((t_p_value(1.0, 1.0, Alternative::TwoSided) - 0.5).abs() < 1e-12);
        // 2 df: P(T > t) = (1 - t / sqrt(t^2 + 2)) / 2
        for t in [0.3, 1.7, 4.2] {
            let exact = 0.5 * (1.0 - t / (t * t + 2.0f64).sqrt());
            assert!((t_p_value(t, 2.0, Alternative::Greater) - exact).abs() < 1e-12);
            assert!((t_p_value(-t, 2.0, Alternative::Less) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn wilcoxon_all_positive() {
        let d = [0.1, 0.2, 0.3, 0.4, 0.5];
        let r = wilcoxon_from_differences(&d, Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.w_plus, Some(15.0));
        assert!((r.p_value - 2.0 / 32.0).abs() < 1e-15);
        assert_eq!(r.exact, Some(true));
    }

    #[test]
    fn wilcoxon_symmetric_differences() {
        let r = wilcoxon_signed_rank(&[1.0, 0.0], &[0.0, 1.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.w_plus, r.w_minus);
        assert_eq!(r.p_value, 1.0);
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn wilcoxon_normal_approximation_is_close_to_exact() {
        let d: Vec<f64> = (1..=12)
            .map(|k| if k % 3 == 0 { -(k as f64) } else { k as f64 })
            .collect();
        let exact = wilcoxon_from_differences(&d, Alternative::TwoSided).unwrap();
        let mut more = d.clone();
        more.push(13.0);
        let approx = wilcoxon_from_differences(&more, Alternative::TwoSided).unwrap();
        assert_eq!(approx.exact, Some(false));
        assert!(exact.p_value > 0.0 && approx.p_value > 0.0);
        assert!((0.0..=1.0).contains(&approx.p_value));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[1.0 - 0.94, 0.99 - 0.93]), vec![1.5, 1.5]);
    }

    #[test]
    fn f1_summary_examples() {
        assert_eq!(f1_summary(&[vec![0.7; 4]]).unwrap(), (0.7, 0.0));
        let (m, s) = f1_summary(&[vec![0.9], vec![1.0]]).unwrap();
        assert!((m - 0.95).abs() < 1e-15);
        assert!((s - 0.070710678118654).abs() < 1e-12);
        assert!(f1_summary(&[]).is_err());
    }

    proptest! {
        #[test]
        fn paired_ttest_shift_invariance(seed in any::<u64>(), shift in -5.0f64..5.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let r1 = paired_ttest(&a, &b, Alternative::TwoSided).unwrap();
            let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let r2 = paired_ttest(&a2, &b2, Alternative::TwoSided).unwrap();
            prop_assert!((r1.statistic - r2.statistic).abs() < 1e-8 * r1.statistic.abs().max(1.0));
            prop_assert!((r1.p_value - r2.p_value).abs() < 1e-8);

            let w1 = two_sample_ttest(&a, &b, Alternative::TwoSided).unwrap();
            let w2 = two_sample_ttest(&b, &a, Alternative::TwoSided).unwrap();
            prop_assert!((w1.statistic + w2.statistic).abs() < 1e-12);
            prop_assert!((w1.p_value - w2.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&w1.p_value));
        }
    }
}
