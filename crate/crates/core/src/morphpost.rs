//! Binary morphology and road-mask refinement.
//!
//! Border convention: pixels outside the frame are background. Dilation is
//! clipped to the frame and erosion fails at the border, so the boundary of a
//! mask touching the frame edge is closed along that edge. [`close`] is
//! evaluated on the plane instead so that it never removes foreground.

use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, Grid, StructuringElement};
use crate::par;

/// `M (+) B`: union of the translates of `m` by every offset of `se`.
pub fn dilate(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = m.dims();
    let data = par::map_range(w * h, |i| {
        let (x, y) = (i % w, i / w);
        // p is covered when p - b lies in M for some b
        se.offsets()
            .iter()
            .any(|&(dy, dx)| m.offset(x, y, -dx, -dy).is_some_and(|q| m.data()[q]))
    });
    Grid::from_vec(w, h, data).expect("same dims")
}

/// `M (-) B = { p | p + b in M for all b in B }`.
pub fn erode(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = m.dims();
    let data = par::map_range(w * h, |i| {
        let (x, y) = (i % w, i / w);
        se.offsets()
            .iter()
            .all(|&(dy, dx)| m.offset(x, y, dx, dy).is_some_and(|q| m.data()[q]))
    });
    Grid::from_vec(w, h, data).expect("same dims")
}

/// Erosion followed by dilation.
pub fn open(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(m, se), se)
}

/// Dilation followed by erosion, evaluated on the unbounded plane (the mask
/// is background outside the frame) and cropped back to the frame.
///
/// Chaining the clipped [`dilate`] and the border-failing [`erode`] would
/// strip foreground along the frame edge; on the plane closing stays
/// extensive.
pub fn close(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let r = se
        .offsets()
        .iter()
        .map(|&(dy, dx)| dy.unsigned_abs().max(dx.unsigned_abs()))
        .max()
        .unwrap_or(0);
    if r == 0 {
        return m.clone();
    }
    let (w, h) = m.dims();
    let padded = Grid::from_fn(w + 2 * r, h + 2 * r, |x, y| {
        x >= r && y >= r && x < w + r && y < h + r && *m.get(x - r, y - r)
    });
    // the dilation of the padded mask fits inside the padding, so the
    // erosion below sees the same set the plane would
    let closed = erode(&dilate(&padded, se), se);
    Grid::from_fn(w, h, |x, y| *closed.get(x + r, y + r))
}

/// `M \ (M (-) B)`.
pub fn boundary(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    m.difference(&erode(m, se))
}

/// Result of a dilate-and-intersect fixed-point iteration.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mask: BinaryMask,
    /// Number of `X_k = (X_{k-1} (+) B) & limit` applications, counting the
    /// final one that reproduced its input.
    pub iterations: usize,
}

/// Iterate `X_k = (X_{k-1} (+) B) & limit` from `X_0 = seeds & limit` until
/// `X_k = X_{k-1}`.
///
/// Only pixels added in the previous step can add new ones, so each step
/// dilates the frontier instead of the whole set; the sequence of sets is the
/// same as the literal iteration.
pub fn reconstruct(seeds: &[usize], limit: &BinaryMask, se: &StructuringElement) -> Reconstruction {
    let (w, h) = limit.dims();
    let mut mask = BinaryMask::empty(w, h);
    let mut frontier: Vec<usize> = Vec::new();
    for &s in seeds {
        if limit.data()[s] && !mask.data()[s] {
            mask.data_mut()[s] = true;
            frontier.push(s);
        }
    }
    let mut iterations = 0;
    let mut next = Vec::new();
    while !frontier.is_empty() {
        iterations += 1;
        for &p in &frontier {
            let (x, y) = (p % w, p / w);
            for &(dy, dx) in se.offsets() {
                if let Some(q) = limit.offset(x, y, dx, dy) {
                    if limit.data()[q] && !mask.data()[q] {
                        mask.data_mut()[q] = true;
                        next.push(q);
                    }
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    Reconstruction { mask, iterations }
}

/// Per-pixel component labels (0 = background, components numbered from 1
/// in row-major order of their first pixel) and the component sizes.
pub(crate) fn label(m: &BinaryMask, se: &StructuringElement) -> (Grid<u32>, Vec<usize>) {
    let (w, h) = m.dims();
    let mut labels = Grid::filled(w, h, 0u32);
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !m.data()[start] || labels.data()[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels.data_mut()[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % w, p / w);
            for &(dy, dx) in se.offsets() {
                if let Some(q) = m.offset(x, y, dx, dy) {
                    if m.data()[q] && labels.data()[q] == 0 {
                        labels.data_mut()[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Largest connected component under the connectivity induced by `se`.
/// Ties go to the component whose first pixel comes first in row-major order.
pub fn keep_largest(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (labels, sizes) = label(m, se);
    let Some(best) = sizes
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, usize)>, (i, &s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i as u32 + 1)
    else {
        return BinaryMask::empty(m.width(), m.height());
    };
    labels.map(|&l| l == best)
}

/// Region filling from `seed` inside a closed boundary:
/// `N_k = (N_{k-1} (+) B) & boundary^c`, `N_0 = {seed}`, returned together
/// with the boundary itself.
pub fn fill_region(
    boundary_mask: &BinaryMask,
    seed: (usize, usize),
    se: &StructuringElement,
) -> Result<BinaryMask> {
    fill_region_traced(boundary_mask, seed, se).map(|r| r.mask)
}

/// [`fill_region`] that also reports the iteration count.
pub fn fill_region_traced(
    boundary_mask: &BinaryMask,
    seed: (usize, usize),
    se: &StructuringElement,
) -> Result<Reconstruction> {
    let (x, y) = seed;
    if x >= boundary_mask.width() || y >= boundary_mask.height() {
        return Err(Error::InvalidSeed(format!(
            "({x}, {y}) outside {}x{} frame",
            boundary_mask.width(),
            boundary_mask.height()
        )));
    }
    if *boundary_mask.get(x, y) {
        return Err(Error::InvalidSeed(format!(
            "({x}, {y}) lies on the boundary"
        )));
    }
    let outside = boundary_mask.complement();
    let r = reconstruct(&[boundary_mask.index(x, y)], &outside, se);
    Ok(Reconstruction {
        mask: r.mask.union(boundary_mask),
        iterations: r.iterations,
    })
}

/// Fill background regions of `m` that cannot reach the frame border.
///
/// The exterior is grown with [`fill_region`]'s iteration from every border
/// pixel outside `m`; whatever background remains unreached is a hole.
pub fn fill_holes(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = m.dims();
    let border: Vec<usize> = (0..w * h)
        .filter(|&i| {
            let (x, y) = (i % w, i / w);
            (x == 0 || y == 0 || x == w - 1 || y == h - 1) && !m.data()[i]
        })
        .collect();
    let exterior = reconstruct(&border, &m.complement(), se).mask;
    exterior.complement()
}

/// Post-processing settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphConfig {
    pub se: StructuringElement,
    /// Element used for hole filling; 4-connected by default so the fill
    /// cannot pass diagonal gaps of an 8-connected boundary.
    pub fill_se: StructuringElement,
    pub open_first: bool,
    pub fill_holes: bool,
    pub keep_largest: bool,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            se: StructuringElement::square3(),
            fill_se: StructuringElement::cross3(),
            open_first: true,
            fill_holes: true,
            keep_largest: true,
        }
    }
}

/// Refine a segmentation mask: open, close, keep the largest component, fill
/// holes. Returns every intermediate stage in order, last one being the
/// result.
pub fn refine_stages(m: &BinaryMask, cfg: &MorphConfig) -> Vec<(&'static str, BinaryMask)> {
    let mut stages = Vec::new();
    let mut cur = m.clone();
    if cfg.open_first {
        cur = open(&cur, &cfg.se);
        stages.push(("open", cur.clone()));
    }
    cur = close(&cur, &cfg.se);
    stages.push(("close", cur.clone()));
    if cfg.keep_largest {
        cur = keep_largest(&cur, &cfg.se);
        stages.push(("largest", cur.clone()));
    }
    if cfg.fill_holes {
        cur = fill_holes(&cur, &cfg.fill_se);
        stages.push(("filled", cur));
    }
    stages
}

pub fn refine(m: &BinaryMask, cfg: &MorphConfig) -> BinaryMask {
    refine_stages(m, cfg)
        .pop()
        .map(|(_, mask)| mask)
        .expect("close always runs")
}
