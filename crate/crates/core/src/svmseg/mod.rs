//! Linear SVM road/non-road segmentation on raw RGB features.
//!
//! Labels are bootstrapped from a candidate mask (candidate = road, +1), the
//! dual problem is solved by pairwise coordinate ascent ([`smo`]), and every
//! pixel is classified by the sign of `w.x + b` with ties going to road.

mod smo;

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, Rgb, RgbImage};
use crate::kv::{join_reals, KeyValues};

pub const DEFAULT_C: f64 = 10.0;
/// Large box constraint that approximates the hard-margin problem.
pub const HARD_MARGIN_C: f64 = 1e9;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_SAMPLES_PER_CLASS: usize = 500;
/// Iteration cap, in passes over the training set.
pub const DEFAULT_MAX_PASSES: usize = 10_000;

pub type Feature = [f64; 3];

#[inline]
pub(crate) fn dot(a: &Feature, b: &Feature) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A training pixel: RGB feature and label (+1 road, -1 non-road).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub x: Feature,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Feature, road: bool) -> Self {
        Self {
            x,
            y: if road { 1.0 } else { -1.0 },
        }
    }

    pub fn is_road(&self) -> bool {
        self.y > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportVector {
    pub x: Feature,
    pub y: f64,
    pub lambda: f64,
}

/// Trained hyperplane `w.x + b` with its dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub w: Feature,
    pub b: f64,
    /// One multiplier per training sample (only support vectors after
    /// loading from a file).
    pub lambdas: Vec<f64>,
    pub support_vectors: Vec<SupportVector>,
    pub c: f64,
    pub iterations: usize,
}

/// Training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

impl TrainParams {
    pub fn new(c: f64, tol: f64) -> Self {
        Self {
            c,
            tol,
            ..Self::default()
        }
    }
}

/// `w = sum_i l_i y_i x_i`.
pub fn weight_vector(samples: &[LabeledSample], lambdas: &[f64]) -> Feature {
    let mut w = [0.0; 3];
    for (s, &l) in samples.iter().zip(lambdas) {
        if l != 0.0 {
            for k in 0..3 {
                w[k] += l * s.y * s.x[k];
            }
        }
    }
    w
}

/// Dual objective `sum l - 1/2 |sum l y x|^2`.
pub fn dual_objective(samples: &[LabeledSample], lambdas: &[f64]) -> f64 {
    let w = weight_vector(samples, lambdas);
    lambdas.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

/// Train with default iteration cap.
pub fn train(samples: &[LabeledSample], c: f64, tol: f64) -> Result<SvmModel> {
    train_with(samples, &TrainParams::new(c, tol))
}

pub fn train_with(samples: &[LabeledSample], params: &TrainParams) -> Result<SvmModel> {
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C and tol must be positive, got C = {}, tol = {}",
            params.c, params.tol
        )));
    }
    if samples.iter().any(|s| s.y != 1.0 && s.y != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if samples.iter().any(|s| s.x.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite feature".into()));
    }
    let pos = samples.iter().filter(|s| s.is_road()).count();
    if samples.len() < 2 || pos == 0 || pos == samples.len() {
        return Err(Error::DegenerateLabels(format!(
            "{pos} positive and {} negative samples",
            samples.len() - pos
        )));
    }

    let max_iter = params.max_passes.saturating_mul(samples.len());
    let sol = smo::solve(samples, params.c, params.tol, max_iter);
    let model = SvmModel::from_dual(samples, sol.lambdas, sol.bias, params.c, sol.iterations);
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            best: Box::new(model),
        });
    }
    if dot(&model.w, &model.w) < 1e-24 {
        return Err(Error::DegenerateModel(
            "zero weight vector: classes are not separated by any feature".into(),
        ));
    }
    Ok(model)
}

impl SvmModel {
    fn from_dual(
        samples: &[LabeledSample],
        lambdas: Vec<f64>,
        b: f64,
        c: f64,
        iterations: usize,
    ) -> Self {
        let w = weight_vector(samples, &lambdas);
        let support_vectors = samples
            .iter()
            .zip(&lambdas)
            .filter(|(_, &l)| l > 0.0)
            .map(|(s, &l)| SupportVector {
                x: s.x,
                y: s.y,
                lambda: l,
            })
            .collect();
        Self {
            w,
            b,
            lambdas,
            support_vectors,
            c,
            iterations,
        }
    }

    /// `w.x + b`.
    #[inline]
    pub fn decision(&self, x: &Feature) -> f64 {
        dot(&self.w, x) + self.b
    }

    /// `sum_i y_i l_i <x, x_i> + b` over support vectors.
    pub fn decision_expansion(&self, x: &Feature) -> f64 {
        self.support_vectors
            .iter()
            .map(|sv| sv.y * sv.lambda * dot(x, &sv.x))
            .sum::<f64>()
            + self.b
    }

    /// Road when the decision value is `>= 0`.
    #[inline]
    pub fn classify(&self, x: &Feature) -> bool {
        self.decision(x) >= 0.0
    }

    /// Geometric margin width `2 / |w|`.
    pub fn margin(&self) -> f64 {
        2.0 / dot(&self.w, &self.w).sqrt()
    }

    /// Largest KKT residual over `samples` given this model's multipliers:
    /// `l = 0` needs `y f >= 1`, `0 < l < C` needs `y f = 1`, `l = C` needs
    /// `y f <= 1`.
    pub fn kkt_residual(&self, samples: &[LabeledSample]) -> f64 {
        samples
            .iter()
            .zip(&self.lambdas)
            .map(|(s, &l)| {
                let m = s.y * self.decision(&s.x);
                if l <= 0.0 {
                    (1.0 - m).max(0.0)
                } else if l >= self.c {
                    (m - 1.0).max(0.0)
                } else {
                    (m - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("kind", "linear_svm");
        kv.push("w", join_reals(&self.w));
        kv.push("b", join_reals(&[self.b]));
        kv.push("c", join_reals(&[self.c]));
        kv.push("support_vectors", self.support_vectors.len());
        for (i, sv) in self.support_vectors.iter().enumerate() {
            kv.push(
                &format!("sv.{i}"),
                join_reals(&[sv.y, sv.lambda, sv.x[0], sv.x[1], sv.x[2]]),
            );
        }
        kv.to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let w = kv.reals("w", 3)?;
        let b = kv.real("b")?;
        let c = kv.real("c")?;
        let count: usize = kv
            .require("support_vectors")?
            .parse()
            .map_err(|_| Error::Config("support_vectors: not a count".into()))?;
        let support_vectors = (0..count)
            .map(|i| {
                let v = kv.reals(&format!("sv.{i}"), 5)?;
                Ok(SupportVector {
                    y: v[0],
                    lambda: v[1],
                    x: [v[2], v[3], v[4]],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            w: [w[0], w[1], w[2]],
            b,
            lambdas: support_vectors.iter().map(|s| s.lambda).collect(),
            support_vectors,
            c,
            iterations: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

pub fn decision(model: &SvmModel, x: &Feature) -> f64 {
    model.decision(x)
}

/// Sample up to `n_per_class` road pixels (candidate) and as many non-road
/// pixels, without replacement, deterministically from `seed`. Road samples
/// come first.
pub fn build_training_set(
    img: &RgbImage,
    candidates: &BinaryMask,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if !img.same_dims(candidates) {
        return Err(Error::DimensionMismatch(format!(
            "image {:?} vs candidate mask {:?}",
            img.dims(),
            candidates.dims()
        )));
    }
    let road: Vec<usize> = candidates.ones().collect();
    let other: Vec<usize> = candidates.complement().ones().collect();
    if road.is_empty() || other.is_empty() {
        return Err(Error::DegenerateLabels(format!(
            "candidate mask has {} road and {} non-road pixels",
            road.len(),
            other.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for (pool, is_road) in [(&road, true), (&other, false)] {
        let k = n_per_class.min(pool.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_vec();
        picked.sort_unstable();
        out.extend(
            picked
                .into_iter()
                .map(|i| LabeledSample::new(img.data()[pool[i]].to_array(), is_road)),
        );
    }
    Ok(out)
}

/// Classify every pixel: road where `w.x + b >= 0`.
pub fn segment(img: &RgbImage, model: &SvmModel) -> BinaryMask {
    img.map(|p: &Rgb| model.classify(&p.to_array()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Grid;
    use approx::assert_abs_diff_eq;

    fn pair() -> Vec<LabeledSample> {
        vec![
            LabeledSample::new([-1.0, 0.0, 0.0], false),
            LabeledSample::new([1.0, 0.0, 0.0], true),
        ]
    }

    #[test]
    fn two_point_problem_matches_analytic_solution() {
        let m = train(&pair(), 1e6, 1e-9).unwrap();
        assert_abs_diff_eq!(m.w[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.w[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.b, 0.0, epsilon = 1e-9);
        assert_eq!(m.support_vectors.len(), 2);
        for l in &m.lambdas {
            assert_abs_diff_eq!(*l, 0.5, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(m.margin(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn one_class_is_rejected() {
        let s = vec![LabeledSample::new([0.1, 0.2, 0.3], true); 4];
        assert!(matches!(
            train(&s, 1.0, 1e-3),
            Err(Error::DegenerateLabels(_))
        ));
        assert!(train(&pair(), 0.0, 1e-3).is_err());
        assert!(train(&pair(), 1.0, -1.0).is_err());
    }

    #[test]
    fn identical_features_with_mixed_labels_are_flagged() {
        let mut s = vec![LabeledSample::new([0.3, 0.3, 0.3], true); 5];
        s.extend(vec![LabeledSample::new([0.3, 0.3, 0.3], false); 5]);
        let err = train(&s, 10.0, 1e-3).unwrap_err();
        assert!(
            matches!(err, Error::DegenerateModel(_) | Error::NotConverged { .. }),
            "{err}"
        );
    }

    #[test]
    fn decision_examples() {
        let m = SvmModel {
            w: [1.0, 0.0, 0.0],
            b: 0.0,
            lambdas: vec![],
            support_vectors: vec![],
            c: 1.0,
            iterations: 0,
        };
        assert_abs_diff_eq!(m.decision(&[0.7, 0.0, 0.0]), 0.7);
        assert!(m.classify(&[0.7, 0.0, 0.0]));
        assert_eq!(m.decision(&[0.0, 0.5, 0.5]), 0.0);
        assert!(m.classify(&[0.0, 0.5, 0.5]), "ties are road");
    }

    #[test]
    fn segment_the_pair_model() {
        let m = train(&pair(), 1e6, 1e-9).unwrap();
        let img =
            Grid::from_vec(2, 1, vec![Rgb::new(0.9, 0.0, 0.0), Rgb::new(0.0, 0.0, 0.0)]).unwrap();
        // second pixel lies on the hyperplane (decision 0) and counts as road
        assert_eq!(segment(&img, &m).data(), &[true, true]);
        let dark = Grid::from_vec(1, 1, vec![Rgb::new(0.0, 0.0, 0.0)]).unwrap();
        let neg = SvmModel {
            b: -0.5,
            ..m.clone()
        };
        assert_eq!(segment(&dark, &neg).data(), &[false]);
        let uniform = Grid::filled(3, 2, Rgb::new(0.9, 0.1, 0.1));
        assert_eq!(segment(&uniform, &m).count(), 6);
    }

    #[test]
    fn training_set_sampling() {
        let img = Grid::from_vec(2, 1, vec![Rgb::gray(0.2), Rgb::gray(0.8)]).unwrap();
        let cand = Grid::from_vec(2, 1, vec![true, false]).unwrap();
        let s = build_training_set(&img, &cand, 1, 3).unwrap();
        assert_eq!(
            s,
            vec![
                LabeledSample::new([0.2; 3], true),
                LabeledSample::new([0.8; 3], false),
            ]
        );
        assert!(build_training_set(&img, &BinaryMask::full(2, 1), 1, 3).is_err());

        let big = Grid::from_fn(30, 30, |x, y| {
            Rgb::new(x as f64 / 30.0, y as f64 / 30.0, 0.5)
        });
        let cand = Grid::from_fn(30, 30, |x, _| x < 10);
        let a = build_training_set(&big, &cand, 50, 11).unwrap();
        let b = build_training_set(&big, &cand, 50, 11).unwrap();
        let c = build_training_set(&big, &cand, 50, 12).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a[..50].iter().all(|s| s.is_road() && s.x[0] < 10.0 / 30.0));
    }

    #[test]
    fn model_file_round_trip() {
        let m = train(&pair(), 1e6, 1e-9).unwrap();
        let back = SvmModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back.w, m.w);
        assert_eq!(back.b, m.b);
        assert_eq!(back.support_vectors, m.support_vectors);
        assert!(SvmModel::from_text("w = 1 2").is_err());
    }
}
