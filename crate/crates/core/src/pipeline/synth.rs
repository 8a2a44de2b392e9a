//! Synthetic road scenes with exact ground truth.
//!
//! A scene is a road trapezoid over a flat background, darkened inside
//! rectangular shadow bands and perturbed by seeded uniform noise. Ground
//! truth comes from the geometry, never from the rendered pixels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorfeat::point_in_polygon;
use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, Grid, Rgb, RgbImage};
use crate::kv::{join_reals, KeyValues};

/// Road trapezoid. `x` values are fractions of the width, `top` a fraction
/// of the height; the bottom edge lies on the last row boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadGeometry {
    pub bottom_left: f64,
    pub bottom_right: f64,
    pub top_left: f64,
    pub top_right: f64,
    pub top: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self {
            bottom_left: 0.05,
            bottom_right: 0.95,
            top_left: 0.42,
            top_right: 0.58,
            top: 0.3,
        }
    }
}

impl RoadGeometry {
    pub fn polygon(&self, width: usize, height: usize) -> Vec<(f64, f64)> {
        let (w, h) = (width as f64, height as f64);
        vec![
            (self.bottom_left * w, h),
            (self.bottom_right * w, h),
            (self.top_right * w, self.top * h),
            (self.top_left * w, self.top * h),
        ]
    }

    fn validate(&self) -> Result<()> {
        let fractions = [
            self.bottom_left,
            self.bottom_right,
            self.top_left,
            self.top_right,
            self.top,
        ];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument(
                "road geometry outside the frame".into(),
            ));
        }
        if self.bottom_left >= self.bottom_right
            || self.top_left >= self.top_right
            || self.top >= 1.0
        {
            return Err(Error::InvalidArgument("degenerate road trapezoid".into()));
        }
        Ok(())
    }
}

/// Axis-aligned shadow rectangle `[x0, x1) x [y0, y1)` with a multiplicative
/// attenuation in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowBand {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub attenuation: f64,
}

impl ShadowBand {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }
}

/// Full description of one synthetic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub width: usize,
    pub height: usize,
    pub road: RoadGeometry,
    pub road_color: Rgb,
    pub background_color: Rgb,
    pub shadows: Vec<ShadowBand>,
    /// Per-channel noise drawn uniformly from `[-noise, noise]`.
    pub noise: f64,
    pub seed: u64,
}

/// A rendered scene and its ground truths.
#[derive(Debug, Clone)]
pub struct SceneFrame {
    pub image: RgbImage,
    pub truth: BinaryMask,
    pub shadow_truth: BinaryMask,
}

impl Default for SyntheticScene {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            road: RoadGeometry::default(),
            road_color: BENCH_ROAD,
            background_color: BENCH_BACKGROUND,
            shadows: Vec::new(),
            noise: 0.01,
            seed: 0,
        }
    }
}

/// Base road and background colors of the benchmark scenes. Both share the
/// same saturation-to-value ratio, so only darkening changes that ratio.
const BENCH_ROAD: Rgb = Rgb::new(0.6, 0.5, 0.4);
const BENCH_BACKGROUND: Rgb = Rgb::new(0.38, 0.6, 0.42);

impl SyntheticScene {
    /// Benchmark scene `index` (0-based) rendered with noise seed `noise_seed`.
    ///
    /// Scenes differ in brightness, road geometry and shadow layout; every scene
    /// has one or two shadow bands crossing the road above the default
    /// training strip, with attenuation between 0.4 and 0.6.
    pub fn benchmark(index: usize, noise_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + index as u64);
        let (width, height) = (320usize, 240usize);
        let mut tint = |c: Rgb| {
            let k = rng.random_range(0.95..1.05);
            c.scale(k)
        };
        let road_color = tint(BENCH_ROAD);
        let background_color = tint(BENCH_BACKGROUND);
        let spread = rng.random_range(0.0..0.06);
        let road = RoadGeometry {
            bottom_left: 0.04 + spread,
            bottom_right: 0.96 - spread,
            top_left: rng.random_range(0.38..0.44),
            top_right: rng.random_range(0.56..0.62),
            top: rng.random_range(0.25..0.35),
        };
        let k = (index % 10) as f64;
        let attenuation = (0.4 * (9.0 - k) + 0.6 * k) / 9.0;
        let mut shadows = Vec::new();
        let bands = 1 + index % 2;
        for k in 0..bands {
            let y0 = rng.random_range(100..130) + k * 40;
            let thick = rng.random_range(14..26);
            let x0 = rng.random_range(0..40);
            let x1 = width - rng.random_range(0..40);
            shadows.push(ShadowBand {
                x0,
                y0,
                x1,
                y1: (y0 + thick).min(180),
                attenuation,
            });
        }
        Self {
            width,
            height,
            road,
            road_color,
            background_color,
            shadows,
            noise: 0.01,
            seed: noise_seed,
        }
    }

    /// Same scene without its shadow bands.
    pub fn without_shadows(&self) -> Self {
        Self {
            shadows: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(Error::InvalidArgument(format!(
                "scene too small: {}x{}",
                self.width, self.height
            )));
        }
        self.road.validate()?;
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::InvalidArgument(format!(
                "noise amplitude {} outside [0, 0.5)",
                self.noise
            )));
        }
        for c in [self.road_color, self.background_color] {
            if c.to_array().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(
                    "scene colors must lie in [0, 1]".into(),
                ));
            }
        }
        for s in &self.shadows {
            if !(s.attenuation > 0.0 && s.attenuation < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "attenuation {} outside (0, 1)",
                    s.attenuation
                )));
            }
            if s.x0 >= s.x1 || s.y0 >= s.y1 || s.x0 >= self.width || s.y0 >= self.height {
                return Err(Error::InvalidArgument(format!(
                    "shadow band {s:?} does not intersect the frame"
                )));
            }
        }
        Ok(())
    }

    /// Road ground truth: pixels whose center lies inside the trapezoid.
    pub fn truth(&self) -> BinaryMask {
        let poly = self.road.polygon(self.width, self.height);
        Grid::from_fn(self.width, self.height, |x, y| {
            point_in_polygon(&poly, x as f64 + 0.5, y as f64 + 0.5)
        })
    }

    pub fn shadow_truth(&self) -> BinaryMask {
        Grid::from_fn(self.width, self.height, |x, y| {
            self.shadows.iter().any(|s| s.contains(x, y))
        })
    }

    /// Render the scene.
    pub fn generate(&self) -> Result<SceneFrame> {
        self.validate()?;
        let truth = self.truth();
        let shadow_truth = self.shadow_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let image = Grid::from_fn(self.width, self.height, |x, y| {
            let base = if *truth.get(x, y) {
                self.road_color
            } else {
                self.background_color
            };
            let lit = self
                .shadows
                .iter()
                .filter(|s| s.contains(x, y))
                .fold(base, |c, s| c.scale(s.attenuation));
            let mut jitter = || {
                if self.noise > 0.0 {
                    rng.random_range(-self.noise..=self.noise)
                } else {
                    0.0
                }
            };
            Rgb::new(lit.r + jitter(), lit.g + jitter(), lit.b + jitter()).clamp01()
        });
        Ok(SceneFrame {
            image,
            truth,
            shadow_truth,
        })
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("width", self.width);
        kv.push("height", self.height);
        let r = &self.road;
        kv.push(
            "road",
            join_reals(&[
                r.bottom_left,
                r.bottom_right,
                r.top_left,
                r.top_right,
                r.top,
            ]),
        );
        kv.push("road_color", join_reals(&self.road_color.to_array()));
        kv.push(
            "background_color",
            join_reals(&self.background_color.to_array()),
        );
        kv.push("noise", join_reals(&[self.noise]));
        kv.push("seed", self.seed);
        kv.push("shadows", self.shadows.len());
        for (i, s) in self.shadows.iter().enumerate() {
            kv.push(
                &format!("shadow.{i}"),
                format!("{} {} {} {} {:?}", s.x0, s.y0, s.x1, s.y1, s.attenuation),
            );
        }
        kv.to_text()
    }

    /// Parse the text form. Missing keys fall back to [`Default`].
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let mut s = Self::default();
        let count = |key: &str| -> Result<Option<usize>> {
            kv.get(key)
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Config(format!("{key}: not a count")))
                })
                .transpose()
        };
        if let Some(w) = count("width")? {
            s.width = w;
        }
        if let Some(h) = count("height")? {
            s.height = h;
        }
        if kv.get("road").is_some() {
            let v = kv.reals("road", 5)?;
            s.road = RoadGeometry {
                bottom_left: v[0],
                bottom_right: v[1],
                top_left: v[2],
                top_right: v[3],
                top: v[4],
            };
        }
        if kv.get("road_color").is_some() {
            let v = kv.reals("road_color", 3)?;
            s.road_color = Rgb::new(v[0], v[1], v[2]);
        }
        if kv.get("background_color").is_some() {
            let v = kv.reals("background_color", 3)?;
            s.background_color = Rgb::new(v[0], v[1], v[2]);
        }
        if kv.get("noise").is_some() {
            s.noise = kv.real("noise")?;
        }
        if let Some(seed) = kv.get("seed") {
            s.seed = seed
                .parse()
                .map_err(|_| Error::Config("seed: not an integer".into()))?;
        }
        let n = count("shadows")?.unwrap_or(0);
        s.shadows = (0..n)
            .map(|i| {
                let key = format!("shadow.{i}");
                let v = kv.reals(&key, 5)?;
                if v[..4].iter().any(|c| *c < 0.0 || c.fract() != 0.0) {
                    return Err(Error::Config(format!(
                        "{key}: corners must be pixel indices"
                    )));
                }
                Ok(ShadowBand {
                    x0: v[0] as usize,
                    y0: v[1] as usize,
                    x1: v[2] as usize,
                    y1: v[3] as usize,
                    attenuation: v[4],
                })
            })
            .collect::<Result<_>>()?;
        s.validate()?;
        Ok(s)
    }
}

/// Render a scene.
pub fn generate_scene(scene: &SyntheticScene) -> Result<SceneFrame> {
    scene.generate()
}
