use crate::imagecore::GrayMap;

pub const BINS: usize = 256;

/// Otsu threshold of a real-valued map.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowThreshold {
    /// Threshold in map units; foreground is `value >= threshold`.
    pub threshold: f64,
    /// Last histogram bin of the lower class.
    pub bin: usize,
    /// Counts over 256 equal-width bins spanning `[lo, hi]`.
    pub histogram: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
}

impl ShadowThreshold {
    /// A constant map has no between-class contrast.
    pub fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }
}

/// Bin index of `v` over `[lo, hi]`.
#[inline]
pub fn bin_of(v: f64, lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let t = ((v - lo) / (hi - lo) * BINS as f64).floor();
    (t.max(0.0) as usize).min(BINS - 1)
}

/// 256-bin histogram of `map` over its own value range.
pub fn histogram(map: &GrayMap) -> (Vec<u64>, f64, f64) {
    let (lo, hi) = map.min_max();
    let mut hist = vec![0u64; BINS];
    for &v in map.data() {
        hist[bin_of(v, lo, hi)] += 1;
    }
    (hist, lo, hi)
}

/// Between-class variance of splitting after bin `k`, as an exact ratio
/// `num / den` proportional to `w0 w1 (mu0 - mu1)^2`.
///
/// With `N` pixels, `W0` of them in bins `<= k`, level sums `S0` and `S`:
/// `w0 w1 (mu0 - mu1)^2 = (N S0 - S W0)^2 / (N^2 W0 W1)`; the common `N^2`
/// is dropped.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(n: u64, w0: u64, s0: u64, total: u64) -> Option<Self> {
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            return None;
        }
        let diff = i128::from(n) * i128::from(s0) - i128::from(total) * i128::from(w0);
        let d = diff.unsigned_abs();
        Some(Self {
            num: d.checked_mul(d)?,
            den: u128::from(w0) * u128::from(w1),
        })
    }

    fn greater_than(self, other: Self) -> bool {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a > b,
            // very large frames only; ratios compared in floating point
            _ => self.num as f64 / self.den as f64 > other.num as f64 / other.den as f64,
        }
    }
}

/// Threshold maximizing between-class variance over the 256-bin histogram;
/// ties go to the lowest bin. The threshold is the upper edge of the winning
/// bin mapped back to map units. A constant map returns its constant.
pub fn otsu_threshold(map: &GrayMap) -> ShadowThreshold {
    let (hist, lo, hi) = histogram(map);
    if hi <= lo {
        return ShadowThreshold {
            threshold: lo,
            bin: 0,
            histogram: hist,
            lo,
            hi,
        };
    }
    let bin = otsu_bin(&hist);
    ShadowThreshold {
        threshold: lo + (bin + 1) as f64 * (hi - lo) / BINS as f64,
        bin,
        histogram: hist,
        lo,
        hi,
    }
}

/// Winning split bin for a histogram.
pub fn otsu_bin(hist: &[u64]) -> usize {
    let n: u64 = hist.iter().sum();
    let total: u64 = hist.iter().enumerate().map(|(j, &c)| j as u64 * c).sum();
    let mut best: Option<(usize, Score)> = None;
    let (mut w0, mut s0) = (0u64, 0u64);
    for (k, &c) in hist.iter().enumerate().take(hist.len() - 1) {
        w0 += c;
        s0 += k as u64 * c;
        let Some(score) = Score::new(n, w0, s0, total) else {
            continue;
        };
        match best {
            Some((_, b)) if !score.greater_than(b) => {}
            _ => best = Some((k, score)),
        }
    }
    best.map_or(0, |(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Grid;

    #[test]
    fn two_level_map_splits_between() {
        let map = Grid::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 1.0 });
        let t = otsu_threshold(&map);
        assert!(t.threshold > 0.0 && t.threshold < 1.0);
        assert_eq!(t.bin, 0);
        assert_eq!(t.histogram.iter().sum::<u64>(), 64);
    }

    #[test]
    fn constant_map_returns_constant() {
        let map = Grid::filled(5, 5, 0.25);
        let t = otsu_threshold(&map);
        assert_eq!(t.threshold, 0.25);
        assert!(t.is_degenerate());
        assert_eq!(t.histogram[0], 25);
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_of(0.0, 0.0, 1.0), 0);
        assert_eq!(bin_of(1.0, 0.0, 1.0), 255);
        assert_eq!(bin_of(0.5, 0.0, 1.0), 128);
    }
}
