//! Shadow detection and compensation.
//!
//! Shadows raise saturation relative to intensity, so the normalized
//! difference `(S - V) / (S + V)` is high inside them. The pipeline here:
//!
//! 1. convert to the hue/saturation/intensity model and compute the NDI map;
//! 2. threshold it with Otsu's method (`NDI >= T` is shadow);
//! 3. split the shadow mask into connected components by iterated
//!    dilate-and-intersect;
//! 4. for each component take the ring of non-shadow pixels around it (the
//!    buffer) and map the component's per-channel mean and standard deviation
//!    onto the buffer's.
//!
//! Compensation runs on the original RGB channels; the color conversion is
//! only used to detect shadows.

mod otsu;

pub use otsu::{bin_of, histogram, otsu_bin, otsu_threshold, ShadowThreshold, BINS};

use log::debug;

use crate::error::{Error, Result};
use crate::imagecore::{rgb_to_hsv, BinaryMask, GrayMap, HsvImage, RgbImage, StructuringElement};
use crate::morphpost;

/// NDI values in `[-1, 1]`.
pub type NdiMap = GrayMap;

/// Components smaller than this are treated as NDI speckle.
pub const DEFAULT_MIN_AREA: usize = 20;
/// Buffers with fewer pixels give unreliable statistics; compensation skips them.
pub const MIN_BUFFER_PIXELS: usize = 4;
/// Below this shadow standard deviation the transfer collapses to the buffer mean.
pub const SIGMA_EPS: f64 = 1e-6;

/// `(S - V) / (S + V)`, 0 where `S + V = 0`.
pub fn ndi_value(s: f64, v: f64) -> f64 {
    let sum = s + v;
    if sum <= 0.0 {
        0.0
    } else {
        ((s - v) / sum).clamp(-1.0, 1.0)
    }
}

pub fn compute_ndi(hsv: &HsvImage) -> NdiMap {
    hsv.map(|p| ndi_value(p.s, p.v))
}

/// `value >= threshold` is foreground.
pub fn binarize(map: &GrayMap, threshold: f64) -> BinaryMask {
    map.map(|&v| v >= threshold)
}

/// Split `mask` into components by iterating `I_m = (I_{m-1} (+) B) & mask`
/// from the first unassigned pixel in row-major order until it stops growing.
/// Components come back in seed order; they are disjoint and cover `mask`.
pub fn connected_components(mask: &BinaryMask, se: &StructuringElement) -> Vec<BinaryMask> {
    connected_components_traced(mask, se)
        .into_iter()
        .map(|r| r.mask)
        .collect()
}

/// [`connected_components`] with the iteration count of each fixed point.
pub fn connected_components_traced(
    mask: &BinaryMask,
    se: &StructuringElement,
) -> Vec<morphpost::Reconstruction> {
    let mut remaining = mask.clone();
    let mut out = Vec::new();
    let mut cursor = 0;
    while let Some(seed) = (cursor..remaining.len()).find(|&i| remaining.data()[i]) {
        let r = morphpost::reconstruct(&[seed], &remaining, se);
        for i in r.mask.ones() {
            remaining.data_mut()[i] = false;
        }
        cursor = seed + 1;
        out.push(r);
    }
    out
}

/// Ring of non-shadow pixels around `component`:
/// `(component (+) se) \ component`, minus every pixel of `shadow_all`.
pub fn buffer_area(
    component: &BinaryMask,
    shadow_all: &BinaryMask,
    se: &StructuringElement,
) -> BinaryMask {
    assert!(component.same_dims(shadow_all));
    let mut ring = BinaryMask::empty(component.width(), component.height());
    for p in component.ones() {
        let (x, y) = component.coords(p);
        for &(dy, dx) in se.offsets() {
            if let Some(q) = component.offset(x, y, dx, dy) {
                if !component.data()[q] && !shadow_all.data()[q] {
                    ring.data_mut()[q] = true;
                }
            }
        }
    }
    ring
}

/// Per-channel population mean and standard deviation over a pixel set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub count: usize,
}

impl ChannelStats {
    pub fn measure(img: &RgbImage, mask: &BinaryMask) -> Option<Self> {
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for i in mask.ones() {
            let c = img.data()[i].to_array();
            for k in 0..3 {
                sum[k] += c[k];
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        let mean = sum.map(|s| s / n);
        let mut sq = [0.0; 3];
        for i in mask.ones() {
            let c = img.data()[i].to_array();
            for k in 0..3 {
                sq[k] += (c[k] - mean[k]).powi(2);
            }
        }
        Some(Self {
            mean,
            std: sq.map(|s| (s / n).sqrt()),
            count,
        })
    }
}

/// One connected shadow region with its buffer ring and both regions'
/// channel statistics.
#[derive(Debug, Clone)]
pub struct ShadowComponent {
    pub component_mask: BinaryMask,
    pub buffer_mask: BinaryMask,
    pub shadow: ChannelStats,
    /// `None` when the buffer is empty.
    pub buffer: Option<ChannelStats>,
}

impl ShadowComponent {
    pub fn measure(
        img: &RgbImage,
        component_mask: BinaryMask,
        buffer_mask: BinaryMask,
    ) -> Result<Self> {
        if !img.same_dims(&component_mask) || !img.same_dims(&buffer_mask) {
            return Err(Error::DimensionMismatch(
                "shadow component masks differ from the image".into(),
            ));
        }
        if !component_mask.is_disjoint(&buffer_mask) {
            return Err(Error::InvalidArgument(
                "buffer overlaps its shadow component".into(),
            ));
        }
        let shadow = ChannelStats::measure(img, &component_mask)
            .ok_or_else(|| Error::InvalidArgument("empty shadow component".into()))?;
        let buffer = ChannelStats::measure(img, &buffer_mask);
        Ok(Self {
            component_mask,
            buffer_mask,
            shadow,
            buffer,
        })
    }

    pub fn area(&self) -> usize {
        self.shadow.count
    }

    /// Whether the buffer is large enough to compensate from.
    pub fn has_usable_buffer(&self) -> bool {
        self.buffer.is_some_and(|b| b.count >= MIN_BUFFER_PIXELS)
    }

    /// Per-channel affine transfer `out = gain * in + offset`, or `None` when
    /// the buffer is unusable.
    pub fn transfer(&self) -> Option<[ChannelTransfer; 3]> {
        if !self.has_usable_buffer() {
            return None;
        }
        let buf = self.buffer?;
        Some(std::array::from_fn(|k| {
            ChannelTransfer::matching(
                self.shadow.mean[k],
                self.shadow.std[k],
                buf.mean[k],
                buf.std[k],
            )
        }))
    }
}

/// `out = mu_buf + (in - mu_shadow) * sigma_buf / sigma_shadow`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTransfer {
    pub gain: f64,
    pub offset: f64,
}

impl ChannelTransfer {
    pub fn matching(mu_shadow: f64, sigma_shadow: f64, mu_buf: f64, sigma_buf: f64) -> Self {
        if sigma_shadow < SIGMA_EPS {
            return Self {
                gain: 0.0,
                offset: mu_buf,
            };
        }
        let gain = sigma_buf / sigma_shadow;
        Self {
            gain,
            offset: mu_buf - mu_shadow * gain,
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        if self.gain == 0.0 {
            self.offset
        } else {
            self.gain * v + self.offset
        }
    }
}

/// Map the component's channel statistics onto its buffer's. Pixels outside
/// the component are untouched; output is clamped to `[0, 1]`. A component
/// without a usable buffer is returned unchanged.
pub fn compensate(img: &RgbImage, comp: &ShadowComponent) -> RgbImage {
    let mut out = img.clone();
    compensate_in_place(&mut out, comp);
    out
}

fn compensate_in_place(img: &mut RgbImage, comp: &ShadowComponent) -> bool {
    let Some(t) = comp.transfer() else {
        return false;
    };
    for i in comp.component_mask.ones() {
        let c = img.data()[i].to_array();
        let mapped: [f64; 3] = std::array::from_fn(|k| t[k].apply(c[k]).clamp(0.0, 1.0));
        img.data_mut()[i] = crate::imagecore::Rgb::from_array(mapped);
    }
    true
}

/// What happened to one detected component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub area: usize,
    pub buffer_pixels: usize,
    pub compensated: bool,
}

/// Output of [`remove_shadows`].
#[derive(Debug, Clone)]
pub struct ShadowRemoval {
    pub image: RgbImage,
    /// Union of the kept (>= `min_area`) shadow components.
    pub shadow_mask: BinaryMask,
    pub ndi: NdiMap,
    pub threshold: ShadowThreshold,
    /// Kept components in processing order (largest first).
    pub components: Vec<ComponentReport>,
}

/// Detect shadows and compensate each component, largest first.
///
/// A constant NDI map carries no shadow contrast and yields an empty mask.
pub fn remove_shadows(
    img: &RgbImage,
    se: &StructuringElement,
    min_area: usize,
) -> Result<ShadowRemoval> {
    let ndi = compute_ndi(&rgb_to_hsv(img));
    let threshold = otsu_threshold(&ndi);
    let (w, h) = img.dims();
    if threshold.is_degenerate() {
        debug!("constant NDI map, no shadow contrast");
        return Ok(ShadowRemoval {
            image: img.clone(),
            shadow_mask: BinaryMask::empty(w, h),
            ndi,
            threshold,
            components: Vec::new(),
        });
    }
    let shadow_all = binarize(&ndi, threshold.threshold);

    let mut components: Vec<BinaryMask> = connected_components(&shadow_all, se)
        .into_iter()
        .filter(|c| c.count() >= min_area.max(1))
        .collect();
    // stable: equal areas keep seed order
    components.sort_by_key(|c| std::cmp::Reverse(c.count()));

    let mut image = img.clone();
    let mut shadow_mask = BinaryMask::empty(w, h);
    let mut reports = Vec::with_capacity(components.len());
    for component in components {
        let ring = buffer_area(&component, &shadow_all, se);
        for i in component.ones() {
            shadow_mask.data_mut()[i] = true;
        }
        let comp = ShadowComponent::measure(&image, component, ring)?;
        let compensated = compensate_in_place(&mut image, &comp);
        if !compensated {
            debug!(
                "shadow component of {} px has a {} px buffer, left as is",
                comp.area(),
                comp.buffer.map_or(0, |b| b.count)
            );
        }
        reports.push(ComponentReport {
            area: comp.area(),
            buffer_pixels: comp.buffer.map_or(0, |b| b.count),
            compensated,
        });
    }
    Ok(ShadowRemoval {
        image,
        shadow_mask,
        ndi,
        threshold,
        components: reports,
    })
}
