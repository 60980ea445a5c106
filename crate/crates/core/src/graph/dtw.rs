use crate::error::{Error, Result};

/// Dynamic time warping distance with absolute-difference local cost and an
/// unconstrained warping window.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_distance_banded(a, b, None)
}

/// DTW restricted to a Sakoe-Chiba band of half-width `band` around the
/// (length-scaled) diagonal. `None` disables the band.
pub fn dtw_distance_banded(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("dtw_distance of an empty sequence"));
    }
    let (n, m) = (a.len(), b.len());
    // a band narrower than the length difference admits no path
    let band = band.map(|r| r.max(n.abs_diff(m)));
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let (lo, hi) = match band {
            Some(r) => {
                let center = i * m / n;
                (center.saturating_sub(r).max(1), (center + r).min(m))
            }
            None => (1, m),
        };
        for j in lo..=hi {
            let cost = (a[i - 1] - b[j - 1]).abs();
            curr[j] = cost + prev[j - 1].min(prev[j]).min(curr[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// `1 / (1 + distance)`.
pub fn similarity(distance: f64) -> Result<f64> {
    if distance < 0.0 || distance.is_nan() {
        return Err(Error::invalid(format!("negative distance {distance}")));
    }
    Ok(1.0 / (1.0 + distance))
}
