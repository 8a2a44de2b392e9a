//! Road-candidate extraction by color similarity.
//!
//! A Gaussian model (mean and covariance of RGB) is fitted on pixels assumed
//! to be road; every pixel whose Mahalanobis distance to the mean is within
//! `d_max` becomes a road candidate.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, Grid, Rgb, RgbImage};
use crate::kv::{join_reals, KeyValues};

/// Minimum number of training pixels for a model fit.
pub const MIN_TRAINING_PIXELS: usize = 16;
/// Ridge added to the covariance diagonal.
pub const COVARIANCE_EPS: f64 = 1e-6;
/// sqrt of the 95% chi-square quantile with 3 degrees of freedom (7.815).
pub const DEFAULT_D_MAX: f64 = 2.796;

pub type Mat3 = [[f64; 3]; 3];

/// Mean and covariance of road colors.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadColorModel {
    mean: [f64; 3],
    covariance: Mat3,
    covariance_inverse: Mat3,
}

impl RoadColorModel {
    /// Fit from training pixels: sample mean, unbiased sample covariance plus
    /// [`COVARIANCE_EPS`] on the diagonal.
    pub fn fit(pixels: &[Rgb]) -> Result<Self> {
        let n = pixels.len();
        if n < MIN_TRAINING_PIXELS {
            return Err(Error::InsufficientTrainingData {
                got: n,
                need: MIN_TRAINING_PIXELS,
            });
        }
        let mut mean = [0.0; 3];
        for p in pixels {
            for (m, c) in mean.iter_mut().zip(p.to_array()) {
                *m += c;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = [[0.0; 3]; 3];
        for p in pixels {
            let d = sub(p.to_array(), mean);
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += d[i] * d[j];
                }
            }
        }
        for (i, row) in cov.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v /= (n - 1) as f64;
            }
            row[i] += COVARIANCE_EPS;
        }
        Self::from_parts(mean, cov)
    }

    /// Build from an explicit mean and covariance; the covariance must be
    /// symmetric positive-definite.
    pub fn from_parts(mean: [f64; 3], covariance: Mat3) -> Result<Self> {
        for i in 0..3 {
            for j in 0..i {
                let (a, b) = (covariance[i][j], covariance[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidArgument("covariance is not symmetric".into()));
                }
            }
        }
        if !is_positive_definite(&covariance) {
            return Err(Error::InvalidArgument(
                "covariance is not positive-definite".into(),
            ));
        }
        let covariance_inverse = invert3(&covariance)
            .ok_or_else(|| Error::InvalidArgument("covariance is singular".into()))?;
        Ok(Self {
            mean,
            covariance,
            covariance_inverse,
        })
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn covariance(&self) -> &Mat3 {
        &self.covariance
    }

    pub fn covariance_inverse(&self) -> &Mat3 {
        &self.covariance_inverse
    }

    /// `sqrt((m - x)^T S^-1 (m - x))`.
    pub fn mahalanobis(&self, x: Rgb) -> f64 {
        let d = sub(self.mean, x.to_array());
        let q: f64 = (0..3)
            .map(|i| {
                d[i] * (0..3)
                    .map(|j| self.covariance_inverse[i][j] * d[j])
                    .sum::<f64>()
            })
            .sum();
        q.max(0.0).sqrt()
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("kind", "road_color_model");
        kv.push("mean", join_reals(&self.mean));
        let flat: Vec<f64> = self.covariance.iter().flatten().copied().collect();
        kv.push("covariance", join_reals(&flat));
        kv.to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let mean = kv.reals("mean", 3)?;
        let cov = kv.reals("covariance", 9)?;
        let mut covariance = [[0.0; 3]; 3];
        for (i, row) in covariance.iter_mut().enumerate() {
            row.copy_from_slice(&cov[i * 3..i * 3 + 3]);
        }
        Self::from_parts([mean[0], mean[1], mean[2]], covariance)
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

/// Fit a road color model from training pixels.
pub fn fit_road_model(pixels: &[Rgb]) -> Result<RoadColorModel> {
    RoadColorModel::fit(pixels)
}

pub fn mahalanobis(model: &RoadColorModel, x: Rgb) -> f64 {
    model.mahalanobis(x)
}

/// Mask of pixels whose Mahalanobis distance is at most `d_max`.
pub fn extract_candidates(
    img: &RgbImage,
    model: &RoadColorModel,
    d_max: f64,
) -> Result<BinaryMask> {
    if !(d_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "d_max must be non-negative, got {d_max}"
        )));
    }
    Ok(img.map(|&p| model.mahalanobis(p) <= d_max))
}

/// Distance of every pixel to the model mean.
pub fn distance_map(img: &RgbImage, model: &RoadColorModel) -> Grid<f64> {
    img.map(|&p| model.mahalanobis(p))
}

/// Pixels assumed to be road, used to fit the color model.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TrainingRegion {
    /// The default prior: bottom-center trapezoid over the middle half of the
    /// width (narrowing to 30% at its top) and the bottom fifth of the height.
    #[default]
    Trapezoid,
    /// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
    Rect {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
    },
    /// Polygon in pixel coordinates; a pixel belongs when its center is inside.
    Polygon(Vec<(f64, f64)>),
}

impl TrainingRegion {
    /// The default trapezoid as polygon vertices for a given frame size.
    pub fn trapezoid_vertices(width: usize, height: usize) -> Vec<(f64, f64)> {
        let (w, h) = (width as f64, height as f64);
        vec![
            (0.25 * w, h),
            (0.75 * w, h),
            (0.65 * w, 0.8 * h),
            (0.35 * w, 0.8 * h),
        ]
    }

    /// Rasterize the region on a `width` x `height` frame.
    pub fn mask(&self, width: usize, height: usize) -> Result<BinaryMask> {
        let mask = match self {
            Self::Trapezoid => {
                polygon_mask(&Self::trapezoid_vertices(width, height), width, height)
            }
            Self::Rect { x0, y0, x1, y1 } => {
                if x0 >= x1 || y0 >= y1 || *x1 > width || *y1 > height {
                    return Err(Error::InvalidRegion(format!(
                        "rectangle [{x0},{x1})x[{y0},{y1}) not inside {width}x{height} frame"
                    )));
                }
                Grid::from_fn(width, height, |x, y| {
                    (*x0..*x1).contains(&x) && (*y0..*y1).contains(&y)
                })
            }
            Self::Polygon(vertices) => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidRegion("polygon needs >= 3 vertices".into()));
                }
                let (w, h) = (width as f64, height as f64);
                if vertices
                    .iter()
                    .any(|&(x, y)| !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y))
                {
                    return Err(Error::InvalidRegion(format!(
                        "polygon not inside {width}x{height} frame"
                    )));
                }
                polygon_mask(vertices, width, height)
            }
        };
        let n = mask.count();
        if n < MIN_TRAINING_PIXELS {
            return Err(Error::InsufficientTrainingData {
                got: n,
                need: MIN_TRAINING_PIXELS,
            });
        }
        Ok(mask)
    }

    /// Collect the region's pixels from `img`.
    pub fn pixels(&self, img: &RgbImage) -> Result<Vec<Rgb>> {
        let mask = self.mask(img.width(), img.height())?;
        Ok(mask.ones().map(|i| img.data()[i]).collect())
    }
}

/// Even-odd test of pixel centers against a polygon.
pub fn polygon_mask(vertices: &[(f64, f64)], width: usize, height: usize) -> BinaryMask {
    Grid::from_fn(width, height, |x, y| {
        point_in_polygon(vertices, x as f64 + 0.5, y as f64 + 0.5)
    })
}

pub fn point_in_polygon(vertices: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > py) != (yj > py) {
            let x_cross = xi + (py - yi) / (yj - yi) * (xj - xi);
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl fmt::Display for TrainingRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Trapezoid => f.write_str("trapezoid"),
            Self::Rect { x0, y0, x1, y1 } => write!(f, "rect:{x0},{y0},{x1},{y1}"),
            Self::Polygon(v) => {
                let pts: Vec<String> = v.iter().map(|(x, y)| format!("{x},{y}")).collect();
                write!(f, "poly:{}", pts.join(";"))
            }
        }
    }
}

/// Parses `trapezoid`, `rect:x0,y0,x1,y1` or `poly:x,y;x,y;...`.
impl FromStr for TrainingRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "trapezoid" {
            return Ok(Self::Trapezoid);
        }
        let bad = || Error::InvalidRegion(format!("cannot parse region {s:?}"));
        if let Some(rest) = s.strip_prefix("rect:") {
            let v: Vec<usize> = rest
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if let [x0, y0, x1, y1] = v[..] {
                return Ok(Self::Rect { x0, y0, x1, y1 });
            }
            return Err(bad());
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let pts = rest
                .split(';')
                .map(|pair| {
                    let (x, y) = pair.split_once(',').ok_or_else(bad)?;
                    Ok((
                        x.trim().parse().map_err(|_| bad())?,
                        y.trim().parse().map_err(|_| bad())?,
                    ))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            return Ok(Self::Polygon(pts));
        }
        Err(bad())
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Sylvester's criterion on the leading minors.
fn is_positive_definite(m: &Mat3) -> bool {
    m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0 && det3(m) > 0.0
}

/// Adjugate inverse, symmetrized for a symmetric input.
fn invert3(m: &Mat3) -> Option<Mat3> {
    let det = det3(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let c =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / det;
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let avg = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = avg;
            inv[j][i] = avg;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]]
    }

    #[test]
    fn flat_training_set_gets_ridge() {
        let m = fit_road_model(&vec![Rgb::gray(0.5); 20]).unwrap();
        assert_eq!(m.mean(), [0.5; 3]);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { COVARIANCE_EPS } else { 0.0 };
                assert_abs_diff_eq!(m.covariance()[i][j], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn two_tone_training_set() {
        let mut px = Vec::new();
        for _ in 0..8 {
            px.push(Rgb::new(0.0, 0.0, 0.0));
            px.push(Rgb::new(1.0, 0.0, 0.0));
        }
        let m = fit_road_model(&px).unwrap();
        assert_abs_diff_eq!(m.mean()[0], 0.5, epsilon = 1e-15);
        // sample variance of eight 0s and eight 1s is 4/15
        assert_abs_diff_eq!(
            m.covariance()[0][0],
            4.0 / 15.0 + COVARIANCE_EPS,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(m.covariance()[1][1], COVARIANCE_EPS, epsilon = 1e-15);
    }

    #[test]
    fn too_few_pixels() {
        let err = fit_road_model(&vec![Rgb::gray(0.5); 15]).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientTrainingData { got: 15, .. }
        ));
    }

    #[test]
    fn distance_examples() {
        let id = RoadColorModel::from_parts([0.0; 3], diag(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(id.mahalanobis(Rgb::new(0.0, 0.0, 0.0)), 0.0);
        assert_abs_diff_eq!(
            id.mahalanobis(Rgb::new(3.0, 4.0, 0.0)),
            5.0,
            epsilon = 1e-12
        );
        let m = RoadColorModel::from_parts([0.0; 3], diag(4.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(m.mahalanobis(Rgb::new(2.0, 0.0, 0.0)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn candidates_uniform_and_boundary() {
        let model = RoadColorModel::from_parts([0.4, 0.4, 0.4], diag(0.01, 0.01, 0.01)).unwrap();
        let img = Grid::filled(4, 3, Rgb::gray(0.4));
        assert_eq!(extract_candidates(&img, &model, 1.0).unwrap().count(), 12);

        let mut img = Grid::filled(3, 3, Rgb::gray(0.9));
        img.set(1, 2, Rgb::gray(0.4));
        let mask = extract_candidates(&img, &model, 0.0).unwrap();
        assert_eq!(mask.ones().collect::<Vec<_>>(), vec![img.index(1, 2)]);
    }

    #[test]
    fn two_tone_image_straddles_default_threshold() {
        // road samples spread +-0.02 around (0.5, 0.45, 0.4); sky far away
        let mut px = Vec::new();
        for i in 0..32 {
            let d = if i % 2 == 0 { 0.02 } else { -0.02 };
            let e = if (i / 2) % 2 == 0 { 0.02 } else { -0.02 };
            let f = if (i / 4) % 2 == 0 { 0.02 } else { -0.02 };
            px.push(Rgb::new(0.5 + d, 0.45 + e, 0.4 + f));
        }
        let model = fit_road_model(&px).unwrap();
        let road = Rgb::new(0.51, 0.44, 0.41);
        let sky = Rgb::new(0.6, 0.7, 0.9);
        // distances computed by hand from the diagonal covariance
        let var = 0.0004 * 32.0 / 31.0 + COVARIANCE_EPS;
        let d_road = ((0.01f64.powi(2) * 3.0) / var).sqrt();
        assert_abs_diff_eq!(model.mahalanobis(road), d_road, epsilon = 1e-9);
        assert!(model.mahalanobis(road) < DEFAULT_D_MAX);
        assert!(model.mahalanobis(sky) > DEFAULT_D_MAX);

        let img = Grid::from_fn(4, 2, |_, y| if y == 0 { sky } else { road });
        let mask = extract_candidates(&img, &model, DEFAULT_D_MAX).unwrap();
        assert_eq!(
            mask.data(),
            &[false, false, false, false, true, true, true, true]
        );
    }

    #[test]
    fn serialization_round_trip() {
        let m = RoadColorModel::from_parts(
            [0.1, 0.2, 0.3],
            [[0.02, 0.001, 0.0], [0.001, 0.03, 0.002], [0.0, 0.002, 0.01]],
        )
        .unwrap();
        assert_eq!(RoadColorModel::from_text(&m.to_text()).unwrap(), m);
        assert!(RoadColorModel::from_text("mean = 1 2 3").is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        assert!(RoadColorModel::from_parts([0.0; 3], diag(1.0, -1.0, 1.0)).is_err());
        let asym = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(RoadColorModel::from_parts([0.0; 3], asym).is_err());
    }

    #[test]
    fn training_regions() {
        let r: TrainingRegion = "rect:1,1,5,5".parse().unwrap();
        assert_eq!(r.mask(8, 8).unwrap().count(), 16);
        assert!(r.mask(4, 4).is_err());
        assert!("rect:1,1,2,2"
            .parse::<TrainingRegion>()
            .unwrap()
            .mask(8, 8)
            .is_err());

        let t = TrainingRegion::Trapezoid.mask(320, 240).unwrap();
        assert!(t.count() > 16);
        // every pixel sits in the bottom fifth and the middle half
        for i in t.ones() {
            let (x, y) = t.coords(i);
            assert!(y >= 192 && (80..240).contains(&x));
        }

        let p: TrainingRegion = "poly:0,0;4,0;4,4;0,4".parse().unwrap();
        assert_eq!(p.mask(4, 4).unwrap().count(), 16);
        assert_eq!(p.to_string().parse::<TrainingRegion>().unwrap(), p);
        assert!("poly:0,0;9,0;9,9"
            .parse::<TrainingRegion>()
            .unwrap()
            .mask(4, 4)
            .is_err());
    }

    fn spd() -> impl Strategy<Value = Mat3> {
        (prop::array::uniform9(-1.0..1.0f64), 0.05..1.0f64).prop_map(|(a, ridge)| {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = (0..3).map(|k| a[i * 3 + k] * a[j * 3 + k]).sum();
                }
                m[i][i] += ridge;
            }
            m
        })
    }

    /// Gaussian elimination with partial pivoting, independent of `invert3`.
    fn solve(mut a: Mat3, mut b: [f64; 3]) -> [f64; 3] {
        for col in 0..3 {
            let piv = (col..3)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..3 {
                let f = a[row][col] / a[col][col];
                for k in col..3 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = [0.0; 3];
        for i in (0..3).rev() {
            let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    proptest! {
        #[test]
        fn squared_distance_matches_linear_solve(cov in spd(), m in prop::array::uniform3(0.0..1.0f64), x in prop::array::uniform3(0.0..1.0f64)) {
            let model = RoadColorModel::from_parts(m, cov).unwrap();
            let d = sub(m, x);
            let z = solve(cov, d);
            let want: f64 = (0..3).map(|i| d[i] * z[i]).sum();
            let got = model.mahalanobis(Rgb::from_array(x)).powi(2);
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
            for i in 0..3 {
                for j in 0..3 {
                    let e: f64 = (0..3).map(|k| model.covariance_inverse()[i][k] * cov[k][j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((e - id).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn distance_is_affine_invariant(
            pts in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 16..40),
            a in prop::array::uniform9(-1.0..1.0f64),
            t in prop::array::uniform3(-1.0..1.0f64),
            q in prop::array::uniform3(0.0..1.0f64),
        ) {
            let mut lin = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    lin[i][j] = a[i * 3 + j] + if i == j { 2.0 } else { 0.0 };
                }
            }
            prop_assume!(det3(&lin).abs() > 0.5);
            let apply = |p: [f64; 3]| -> Rgb {
                let mut o = [0.0; 3];
                for i in 0..3 {
                    o[i] = (0..3).map(|j| lin[i][j] * p[j]).sum::<f64>() + t[i];
                }
                Rgb::from_array(o)
            };
            // ridge-free comparison: fit on well-spread data so the ridge is negligible
            let raw: Vec<Rgb> = pts.iter().map(|&p| Rgb::from_array(p)).collect();
            let moved: Vec<Rgb> = pts.iter().map(|&p| apply(p)).collect();
            let m1 = fit_road_model(&raw).unwrap();
            let m2 = fit_road_model(&moved).unwrap();
            let strip = |m: &RoadColorModel| {
                let mut c = *m.covariance();
                for (i, row) in c.iter_mut().enumerate() { row[i] -= COVARIANCE_EPS; }
                RoadColorModel::from_parts(m.mean(), c)
            };
            if let (Ok(s1), Ok(s2)) = (strip(&m1), strip(&m2)) {
                prop_assume!(det3(s1.covariance()) > 1e-6);
                let d1 = s1.mahalanobis(Rgb::from_array(q));
                let d2 = s2.mahalanobis(apply(q));
                prop_assert!((d1 - d2).abs() <= 1e-6 * d1.max(1.0), "{} vs {}", d1, d2);
            }
        }

        #[test]
        fn candidates_monotone_in_threshold(
            pixels in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 16),
            d1 in 0.0..5.0f64, extra in 0.0..5.0f64,
        ) {
            let px: Vec<Rgb> = pixels.iter().map(|&p| Rgb::from_array(p)).collect();
            let model = fit_road_model(&px).unwrap();
            let img = Grid::from_vec(4, 4, px).unwrap();
            let a = extract_candidates(&img, &model, d1).unwrap();
            let b = extract_candidates(&img, &model, d1 + extra).unwrap();
            prop_assert!(a.is_subset_of(&b));
        }
    }
}
