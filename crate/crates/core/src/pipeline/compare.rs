use std::fmt::Write as _;
use std::path::Path;

use super::config::PipelineConfig;
use super::stream::{
    create_dir, run_stream_with, write_text, FrameSource, FrameSummary, StreamReport,
};
use crate::error::{Error, Result};
use crate::imagecore::{save_image, Grid, Rgb, RgbImage};
use crate::metrics::{aggregate, csv_row, ConfusionCounts, GroupReport, CSV_HEADER};

/// The same stream run with and without shadow filtering.
#[derive(Debug)]
pub struct Comparison {
    pub with_filter: StreamReport<FrameSummary>,
    pub without_filter: StreamReport<FrameSummary>,
    pub groups_with: Vec<GroupReport>,
    pub groups_without: Vec<GroupReport>,
}

fn scored(report: &StreamReport<FrameSummary>) -> Vec<(String, ConfusionCounts)> {
    report
        .frames
        .iter()
        .filter_map(|f| f.counts.map(|c| (f.id.clone(), c)))
        .collect()
}

/// Run both variants over `sources`. Every frame needs ground truth.
pub fn compare(sources: &[FrameSource], cfg: &PipelineConfig) -> Result<Comparison> {
    let run = |filtering_enabled| {
        let cfg = PipelineConfig {
            filtering_enabled,
            ..cfg.clone()
        };
        run_stream_with(sources, &cfg, |_| Ok(()))
    };
    let with_filter = run(true)?;
    let without_filter = run(false)?;
    let (a, b) = (scored(&with_filter), scored(&without_filter));
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput(
            "comparison needs frames with ground truth".into(),
        ));
    }
    Ok(Comparison {
        groups_with: aggregate(&a, cfg.group_size)?,
        groups_without: aggregate(&b, cfg.group_size)?,
        with_filter,
        without_filter,
    })
}

impl Comparison {
    /// One micro-averaged row per group and variant, `with` first.
    pub fn csv(&self) -> String {
        let mut out = format!(
            "group,variant,{}\n",
            CSV_HEADER.replacen("frame_id,", "", 1)
        );
        for (k, (w, wo)) in self
            .groups_with
            .iter()
            .zip(&self.groups_without)
            .enumerate()
        {
            for (variant, g) in [("with", w), ("without", wo)] {
                let row = csv_row("", &g.counts, &g.micro);
                let _ = writeln!(out, "group_{k:02},{variant}{row}");
            }
        }
        out
    }

    /// Write `metrics.csv` and `chart.png` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_text(&dir.join("metrics.csv"), &self.csv())?;
        save_image(&self.chart(), dir.join("chart.png"))
    }

    /// Bar chart of per-group error rates: dark bars with filtering, light
    /// bars without, one pair per group.
    pub fn chart(&self) -> RgbImage {
        let pairs: Vec<(f64, f64)> = self
            .groups_with
            .iter()
            .zip(&self.groups_without)
            .map(|(w, wo)| (w.micro.err.unwrap_or(0.0), wo.micro.err.unwrap_or(0.0)))
            .collect();
        bar_chart(&pairs)
    }
}

const WITH_COLOR: Rgb = Rgb::new(0.15, 0.3, 0.65);
const WITHOUT_COLOR: Rgb = Rgb::new(0.9, 0.55, 0.2);
const AXIS_COLOR: Rgb = Rgb::new(0.0, 0.0, 0.0);
const GRID_COLOR: Rgb = Rgb::new(0.85, 0.85, 0.85);

/// Paired bars scaled so the tallest reaches the top margin.
pub fn bar_chart(pairs: &[(f64, f64)]) -> RgbImage {
    const H: usize = 240;
    const MARGIN: usize = 20;
    const BAR: usize = 12;
    const GAP: usize = 16;
    let w = 2 * MARGIN + pairs.len().max(1) * (2 * BAR + GAP);
    let mut img = Grid::filled(w, H, Rgb::gray(1.0));
    let top = pairs
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let base = H - MARGIN;
    let span = (base - MARGIN) as f64;
    for q in 1..=4 {
        let y = base - (span * q as f64 / 4.0) as usize;
        fill(&mut img, MARGIN, y, w - MARGIN, y + 1, GRID_COLOR);
    }
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let x = MARGIN + GAP / 2 + k * (2 * BAR + GAP);
        for (dx, v, c) in [(0, a, WITH_COLOR), (BAR, b, WITHOUT_COLOR)] {
            let len = ((v / top).clamp(0.0, 1.0) * span).round() as usize;
            fill(&mut img, x + dx, base - len, x + dx + BAR, base, c);
        }
    }
    fill(&mut img, MARGIN, base, w - MARGIN, base + 1, AXIS_COLOR);
    fill(&mut img, MARGIN, MARGIN, MARGIN + 1, base + 1, AXIS_COLOR);
    img
}

fn fill(img: &mut RgbImage, x0: usize, y0: usize, x1: usize, y1: usize, c: Rgb) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.set(x, y, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bars_scale_with_values() {
        let img = bar_chart(&[(0.1, 0.2)]);
        let height = |c: Rgb| {
            (0..img.height())
                .filter(|&y| (0..img.width()).any(|x| *img.get(x, y) == c))
                .count()
        };
        let (a, b) = (height(WITH_COLOR), height(WITHOUT_COLOR));
        assert_eq!(b, 200);
        assert_eq!(a, 100);
    }

    #[test]
    fn empty_chart_is_axes_only() {
        let img = bar_chart(&[]);
        assert!(img
            .data()
            .iter()
            .all(|p| *p != WITH_COLOR && *p != WITHOUT_COLOR));
    }
}
