//! Pixel grids, color-space conversion and image file I/O.
//!
//! Every stage of the pipeline works on a dense row-major [`Grid`]. Color
//! channels are kept as `f64` in `[0, 1]`; 8-bit quantization only happens at
//! the file boundary in [`io`].

mod color;
pub mod io;
mod se;

pub use color::{hsv_to_rgb, hsv_to_rgb_pixel, rgb_to_hsv, rgb_to_hsv_pixel};
pub use io::{load_image, load_mask, save_gray, save_image, save_mask};
pub use se::StructuringElement;

use crate::error::{Error, Result};
use crate::par;

/// An RGB pixel with channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub const fn gray(v: f64) -> Self {
        Self { r: v, g: v, b: v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.r * k, self.g * k, self.b * k)
    }

    pub fn clamp01(self) -> Self {
        Self::new(
            self.r.clamp(0.0, 1.0),
            self.g.clamp(0.0, 1.0),
            self.b.clamp(0.0, 1.0),
        )
    }

    /// Round each channel to the nearest 8-bit level.
    pub fn to_u8(self) -> [u8; 3] {
        [quantize(self.r), quantize(self.g), quantize(self.b)]
    }

    pub fn from_u8(c: [u8; 3]) -> Self {
        Self::new(
            f64::from(c[0]) / 255.0,
            f64::from(c[1]) / 255.0,
            f64::from(c[2]) / 255.0,
        )
    }
}

pub(crate) fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A pixel of the intensity/saturation/hue model used for shadow detection.
///
/// `h` is in degrees `[0, 360)`, `s` and `v` in `[0, 1]`. `v` is the mean
/// of the three RGB channels, so this is the HSI flavor of the model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }
}

/// A dense row-major 2-D grid of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type RgbImage = Grid<Rgb>;
pub type HsvImage = Grid<Hsv>;
/// Real-valued map: NDI values, distances, debug planes.
pub type GrayMap = Grid<f64>;
/// Boolean mask, `true` = foreground (road, shadow, ...).
pub type BinaryMask = Grid<bool>;

impl<T: Clone> Grid<T> {
    /// A `width` x `height` grid filled with `value`.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width >= 1 && height >= 1, "grid must be at least 1x1");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} grid needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Build a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width >= 1 && height >= 1, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.dims() == other.dims()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    /// Offset `(x, y)` by `(dx, dy)`, returning the flat index when in bounds.
    #[inline]
    pub fn offset(&self, x: usize, y: usize, dx: isize, dy: isize) -> Option<usize> {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            None
        } else {
            Some(ny as usize * self.width + nx as usize)
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Pixel-wise map, fanned out over the rayon pool when enabled.
    pub fn map<U, F>(&self, f: F) -> Grid<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        Grid {
            width: self.width,
            height: self.height,
            data: par::map_slice(&self.data, f),
        }
    }
}

impl RgbImage {
    /// Mean of each channel over the pixels selected by `mask`.
    pub fn channel_means(&self, mask: &BinaryMask) -> Option<[f64; 3]> {
        let mut sum = [0.0; 3];
        let mut n = 0usize;
        for (p, &m) in self.data.iter().zip(mask.data()) {
            if m {
                sum[0] += p.r;
                sum[1] += p.g;
                sum[2] += p.b;
                n += 1;
            }
        }
        (n > 0).then(|| sum.map(|s| s / n as f64))
    }
}

impl GrayMap {
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::filled(width, height, true)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Flat indices of foreground pixels in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn complement(&self) -> Self {
        self.zip_with_self(|a| !a)
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    /// Pixels of `self` that are not in `other`.
    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert!(self.same_dims(other));
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        assert!(self.same_dims(other));
        self.data.iter().zip(&other.data).all(|(&a, &b)| !(a && b))
    }

    fn zip_with_self(&self, f: impl Fn(bool) -> bool) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert!(
            self.same_dims(other),
            "mask dimensions differ: {:?} vs {:?}",
            self.dims(),
            other.dims()
        );
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Grid::from_vec(0, 2, Vec::<f64>::new()).is_err());
        let g = Grid::from_vec(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(*g.get(1, 1), 4);
        assert_eq!(g.coords(3), (1, 1));
    }

    #[test]
    fn offset_clips_at_border() {
        let g = BinaryMask::empty(3, 2);
        assert_eq!(g.offset(0, 0, -1, 0), None);
        assert_eq!(g.offset(2, 1, 1, 0), None);
        assert_eq!(g.offset(1, 0, 1, 1), Some(5));
    }

    #[test]
    fn mask_set_algebra() {
        let a = Grid::from_vec(2, 2, vec![true, true, false, false]).unwrap();
        let b = Grid::from_vec(2, 2, vec![true, false, true, false]).unwrap();
        assert_eq!(a.union(&b).count(), 3);
        assert_eq!(a.intersection(&b).count(), 1);
        assert_eq!(a.difference(&b).data(), &[false, true, false, false]);
        assert!(a.intersection(&b).is_subset_of(&a));
        assert!(a.difference(&b).is_disjoint(&b));
        assert_eq!(a.complement().count(), 2);
    }

    #[test]
    fn quantize_rounds_and_clamps() {
        assert_eq!(Rgb::new(-0.2, 0.5, 1.3).to_u8(), [0, 128, 255]);
        assert_eq!(Rgb::from_u8([255, 0, 51]), Rgb::new(1.0, 0.0, 0.2));
    }
}
