//! Pixel-level evaluation of a predicted road mask against ground truth.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imagecore::BinaryMask;

/// Confusion counts, road = positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Counts with prediction and truth swapped.
    pub fn transposed(&self) -> Self {
        Self::new(self.tp, self.tn, self.fn_, self.fp)
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self::new(self.tp * k, self.tn * k, self.fp * k, self.fn_ * k)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(
            self.tp + o.tp,
            self.tn + o.tn,
            self.fp + o.fp,
            self.fn_ + o.fn_,
        )
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    if !pred.same_dims(truth) {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// A rate as an exact fraction; `None` when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Option<Self> {
        (den > 0).then_some(Self { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// The six rates. `None` marks an undefined rate (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub acc: Option<f64>,
    pub err: Option<f64>,
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
}

/// Exact fractions behind a [`RateReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactRates {
    pub acc: Option<Ratio>,
    pub err: Option<Ratio>,
    pub tpr: Option<Ratio>,
    pub fnr: Option<Ratio>,
    pub tnr: Option<Ratio>,
    pub fpr: Option<Ratio>,
}

pub fn exact_rates(c: &ConfusionCounts) -> Result<ExactRates> {
    let n = c.n();
    if n == 0 {
        return Err(Error::EmptyInput("confusion counts are all zero".into()));
    }
    Ok(ExactRates {
        acc: Ratio::of(c.tp + c.tn, n),
        err: Ratio::of(c.fn_ + c.fp, n),
        tpr: Ratio::of(c.tp, c.tp + c.fn_),
        fnr: Ratio::of(c.fn_, c.tp + c.fn_),
        tnr: Ratio::of(c.tn, c.tn + c.fp),
        fpr: Ratio::of(c.fp, c.tn + c.fp),
    })
}

/// ACC, ERR, TPR, FNR, TNR, FPR.
pub fn rates(c: &ConfusionCounts) -> Result<RateReport> {
    let e = exact_rates(c)?;
    let v = |r: Option<Ratio>| r.map(|r| r.value());
    Ok(RateReport {
        acc: v(e.acc),
        err: v(e.err),
        tpr: v(e.tpr),
        fnr: v(e.fnr),
        tnr: v(e.tnr),
        fpr: v(e.fpr),
    })
}

impl RateReport {
    pub fn as_array(&self) -> [Option<f64>; 6] {
        [self.acc, self.err, self.tpr, self.fnr, self.tnr, self.fpr]
    }

    /// Mean of each rate over the reports where it is defined.
    pub fn macro_average(reports: &[RateReport]) -> RateReport {
        let avg = |k: usize| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.as_array()[k]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        RateReport {
            acc: avg(0),
            err: avg(1),
            tpr: avg(2),
            fnr: avg(3),
            tnr: avg(4),
            fpr: avg(5),
        }
    }
}

/// One group of consecutive frames with summed counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub first: String,
    pub last: String,
    pub frames: usize,
    pub counts: ConfusionCounts,
    /// Rates of the summed counts.
    pub micro: RateReport,
    /// Per-frame rates averaged.
    pub macro_: RateReport,
}

/// Sum counts over consecutive groups of `group_size` frames, then take
/// rates. A group size larger than the input gives a single group.
pub fn aggregate(
    reports: &[(String, ConfusionCounts)],
    group_size: usize,
) -> Result<Vec<GroupReport>> {
    if group_size == 0 {
        return Err(Error::InvalidArgument("group size must be >= 1".into()));
    }
    if reports.is_empty() {
        return Err(Error::EmptyInput("no frames to aggregate".into()));
    }
    reports
        .chunks(group_size)
        .map(|chunk| {
            let counts: ConfusionCounts = chunk.iter().map(|(_, c)| *c).sum();
            let per_frame = chunk
                .iter()
                .map(|(_, c)| rates(c))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroupReport {
                first: chunk[0].0.clone(),
                last: chunk[chunk.len() - 1].0.clone(),
                frames: chunk.len(),
                counts,
                micro: rates(&counts)?,
                macro_: RateReport::macro_average(&per_frame),
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "frame_id,tp,tn,fp,fn,acc,err,tpr,fnr,tnr,fpr";

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// One CSV row (no trailing newline). Rates use six decimals, `NA` when
/// undefined.
pub fn csv_row(id: &str, counts: &ConfusionCounts, rates: &RateReport) -> String {
    let mut s = format!(
        "{id},{},{},{},{}",
        counts.tp, counts.tn, counts.fp, counts.fn_
    );
    for r in rates.as_array() {
        let _ = write!(s, ",{}", fmt_rate(r));
    }
    s
}

/// Per-frame rows followed by one micro-averaged and one macro-averaged row
/// per group (`group_<k>` and `group_<k>_macro`).
pub fn metrics_csv(frames: &[(String, ConfusionCounts)], group_size: usize) -> Result<String> {
    let groups = aggregate(frames, group_size)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (id, c) in frames {
        out.push_str(&csv_row(id, c, &rates(c)?));
        out.push('\n');
    }
    for (k, g) in groups.iter().enumerate() {
        out.push_str(&csv_row(&format!("group_{k:02}"), &g.counts, &g.micro));
        out.push('\n');
        out.push_str(&csv_row(
            &format!("group_{k:02}_macro"),
            &g.counts,
            &g.macro_,
        ));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_inverted_predictions() {
        let truth = Grid::from_fn(6, 4, |x, y| (x + y) % 3 == 0);
        let c = confusion(&truth, &truth).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&truth.complement(), &truth).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn shifted_half_frame() {
        let truth = Grid::from_fn(10, 10, |x, _| x < 5);
        let pred = Grid::from_fn(10, 10, |x, _| (1..6).contains(&x));
        assert_eq!(
            confusion(&pred, &truth).unwrap(),
            ConfusionCounts::new(40, 40, 10, 10)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let err = confusion(&BinaryMask::empty(2, 2), &BinaryMask::empty(3, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn worked_rates() {
        let r = rates(&ConfusionCounts::new(40, 45, 5, 10)).unwrap();
        let want = [0.85, 0.15, 0.8, 0.2, 0.9, 0.1];
        for (got, want) in r.as_array().iter().zip(want) {
            assert_abs_diff_eq!(got.unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn undefined_rates() {
        let r = rates(&ConfusionCounts::new(10, 0, 0, 0)).unwrap();
        assert_eq!(r.tpr, Some(1.0));
        assert_eq!(r.fnr, Some(0.0));
        assert_eq!(r.tnr, None);
        assert_eq!(r.fpr, None);
        assert!(rates(&ConfusionCounts::default()).is_err());
        let row = csv_row("f", &ConfusionCounts::new(10, 0, 0, 0), &r);
        assert_eq!(row, "f,10,0,0,0,1.000000,0.000000,1.000000,0.000000,NA,NA");
    }

    #[test]
    fn always_positive_classifier() {
        let truth = Grid::from_fn(4, 4, |x, _| x < 2);
        let c = confusion(&BinaryMask::full(4, 4), &truth).unwrap();
        let r = rates(&c).unwrap();
        assert_eq!((r.tpr, r.fpr), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn aggregation_rules() {
        let f = |id: &str, c| (id.to_string(), c);
        let same = ConfusionCounts::new(3, 4, 1, 2);
        let g = aggregate(&[f("a", same), f("b", same)], 2).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].micro, rates(&same).unwrap());

        let g = aggregate(
            &[
                f("a", ConfusionCounts::new(1, 0, 0, 0)),
                f("b", ConfusionCounts::new(0, 0, 0, 1)),
            ],
            2,
        )
        .unwrap();
        assert_eq!(g[0].micro.tpr, Some(0.5));

        let g = aggregate(&[f("a", same), f("b", same), f("c", same)], 10).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].frames, 3);
        assert_eq!((g[0].first.as_str(), g[0].last.as_str()), ("a", "c"));

        assert!(aggregate(&[], 10).is_err());
        assert!(aggregate(&[f("a", same)], 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let frames: Vec<_> = (0..3)
            .map(|i| (format!("f{i}"), ConfusionCounts::new(1 + i, 2, 1, 0)))
            .collect();
        let csv = metrics_csv(&frames, 2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 3 + 4);
        assert!(lines[4].starts_with("group_00,3,4,2,0,"));
        assert!(lines[7].starts_with("group_01_macro,3,2,1,0,"));
    }

    fn counts() -> impl Strategy<Value = ConfusionCounts> {
        (0..1000u64, 0..1000u64, 0..1000u64, 0..1000u64)
            .prop_filter("non-empty", |c| c.0 + c.1 + c.2 + c.3 > 0)
            .prop_map(|(a, b, c, d)| ConfusionCounts::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn complementary_pairs_sum_to_one(c in counts()) {
            let e = exact_rates(&c).unwrap();
            for (a, b) in [(e.acc, e.err), (e.tpr, e.fnr), (e.tnr, e.fpr)] {
                match (a, b) {
                    (Some(a), Some(b)) => {
                        prop_assert_eq!(a.den, b.den);
                        prop_assert_eq!(a.num + b.num, a.den);
                    }
                    (None, None) => {}
                    _ => prop_assert!(false, "one side of a pair undefined"),
                }
            }
        }

        #[test]
        fn transposition_swaps_errors(bits in prop::collection::vec(any::<(bool, bool)>(), 12)) {
            let p = Grid::from_vec(4, 3, bits.iter().map(|b| b.0).collect()).unwrap();
            let t = Grid::from_vec(4, 3, bits.iter().map(|b| b.1).collect()).unwrap();
            prop_assert_eq!(confusion(&t, &p).unwrap(), confusion(&p, &t).unwrap().transposed());
        }

        #[test]
        fn rates_scale_invariant(c in counts(), k in 1..50u64) {
            prop_assert_eq!(rates(&c).unwrap(), rates(&c.scaled(k)).unwrap());
        }
    }
}
