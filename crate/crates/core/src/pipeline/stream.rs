use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::PipelineConfig;
use super::synth::SyntheticScene;
use crate::colorfeat::{extract_candidates, RoadColorModel};
use crate::error::{Error, Result};
use crate::imagecore::{load_image, load_mask, save_image, save_mask, BinaryMask, RgbImage};
use crate::metrics::{confusion, metrics_csv, rates, ConfusionCounts, RateReport};
use crate::morphpost::refine_stages;
use crate::par;
use crate::shadowfilter::remove_shadows;
use crate::svmseg::{build_training_set, segment, train_with, SvmModel};

/// Name of the frame/truth pairing file inside a frame directory.
pub const MANIFEST: &str = "manifest.tsv";

/// Models fitted on the first frame of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub color: RoadColorModel,
    pub svm: SvmModel,
}

/// A frame ready for processing.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub id: String,
    pub image: RgbImage,
    pub truth: Option<BinaryMask>,
}

/// Where a frame comes from. Frames are loaded lazily, one per worker.
#[derive(Debug, Clone)]
pub enum FrameSource {
    Files {
        id: String,
        image: PathBuf,
        truth: Option<PathBuf>,
    },
    Scene {
        id: String,
        scene: SyntheticScene,
    },
    Memory(FrameInput),
}

impl FrameSource {
    pub fn id(&self) -> &str {
        match self {
            Self::Files { id, .. } | Self::Scene { id, .. } => id,
            Self::Memory(f) => &f.id,
        }
    }

    pub fn load(&self) -> Result<FrameInput> {
        match self {
            Self::Files { id, image, truth } => Ok(FrameInput {
                id: id.clone(),
                image: load_image(image)?,
                truth: truth.as_ref().map(load_mask).transpose()?,
            }),
            Self::Scene { id, scene } => {
                let f = scene.generate()?;
                Ok(FrameInput {
                    id: id.clone(),
                    image: f.image,
                    truth: Some(f.truth),
                })
            }
            Self::Memory(f) => Ok(f.clone()),
        }
    }
}

/// Every intermediate of one processed frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub id: String,
    /// Road-colored pixels of the input.
    pub candidates: BinaryMask,
    /// Detected shadow; empty when filtering is disabled.
    pub shadow_mask: BinaryMask,
    /// Shadow-compensated image; the input when filtering is disabled.
    pub compensated: RgbImage,
    /// Road-colored pixels of the compensated image.
    pub clean_candidates: BinaryMask,
    pub svm_mask: BinaryMask,
    /// Post-processing stages in order; the last one is `refined`.
    pub stages: Vec<(&'static str, BinaryMask)>,
    pub refined: BinaryMask,
    pub counts: Option<ConfusionCounts>,
    pub rates: Option<RateReport>,
}

impl FrameResult {
    /// Masks worth dumping, named by stage.
    pub fn masks(&self) -> Vec<(&'static str, &BinaryMask)> {
        let mut out = vec![
            ("candidates", &self.candidates),
            ("shadow", &self.shadow_mask),
            ("clean", &self.clean_candidates),
            ("svm", &self.svm_mask),
        ];
        out.extend(self.stages.iter().map(|(n, m)| (*n, m)));
        out
    }
}

struct Filtered {
    candidates: BinaryMask,
    shadow_mask: BinaryMask,
    compensated: RgbImage,
    clean_candidates: BinaryMask,
}

fn filter_phase(img: &RgbImage, color: &RoadColorModel, cfg: &PipelineConfig) -> Result<Filtered> {
    let candidates = extract_candidates(img, color, cfg.d_max)?;
    if !cfg.filtering_enabled {
        return Ok(Filtered {
            clean_candidates: candidates.clone(),
            candidates,
            shadow_mask: BinaryMask::empty(img.width(), img.height()),
            compensated: img.clone(),
        });
    }
    let removal = remove_shadows(img, &cfg.se_detect, cfg.min_shadow_area)?;
    let clean_candidates = extract_candidates(&removal.image, color, cfg.d_max)?;
    Ok(Filtered {
        candidates,
        shadow_mask: removal.shadow_mask,
        compensated: removal.image,
        clean_candidates,
    })
}

/// Fit the road color model on the training region of `img`, then train the
/// SVM on the road candidates of the (compensated) frame.
pub fn fit_models(img: &RgbImage, cfg: &PipelineConfig) -> Result<Models> {
    cfg.validate()?;
    let color = RoadColorModel::fit(&cfg.training_region.pixels(img)?)?;
    let f = filter_phase(img, &color, cfg)?;
    let samples = build_training_set(
        &f.compensated,
        &f.clean_candidates,
        cfg.samples_per_class,
        cfg.seed,
    )?;
    let svm = train_with(&samples, &cfg.train_params())?;
    Ok(Models { color, svm })
}

/// Run all four phases on one frame with frozen models.
pub fn run_frame(frame: &FrameInput, models: &Models, cfg: &PipelineConfig) -> Result<FrameResult> {
    let tag = |source: Error| Error::Frame {
        frame: frame.id.clone(),
        source: Box::new(source),
    };
    let f = filter_phase(&frame.image, &models.color, cfg).map_err(tag)?;
    let svm_mask = segment(&f.compensated, &models.svm);
    let stages = refine_stages(&svm_mask, &cfg.morph());
    let refined = stages
        .last()
        .map_or_else(|| svm_mask.clone(), |(_, m)| m.clone());
    let (counts, rates) = match &frame.truth {
        Some(truth) => {
            let c = confusion(&refined, truth).map_err(tag)?;
            (Some(c), Some(rates(&c).map_err(tag)?))
        }
        None => (None, None),
    };
    Ok(FrameResult {
        id: frame.id.clone(),
        candidates: f.candidates,
        shadow_mask: f.shadow_mask,
        compensated: f.compensated,
        clean_candidates: f.clean_candidates,
        svm_mask,
        stages,
        refined,
        counts,
        rates,
    })
}

/// Per-frame outcome kept by [`run_stream_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSummary {
    pub id: String,
    pub counts: Option<ConfusionCounts>,
    pub rates: Option<RateReport>,
}

/// Result of a stream run.
#[derive(Debug)]
pub struct StreamReport<T> {
    pub models: Models,
    /// Processed frames in input order.
    pub frames: Vec<T>,
    /// Frames that failed, with their error, in input order.
    pub skipped: Vec<(String, Error)>,
    /// Per-frame and group CSV over the frames that had ground truth.
    pub csv: Option<String>,
}

/// Process a stream, handing every result to `sink` and keeping only
/// summaries. Models are fit on the first frame that loads and fits; the
/// remaining frames run concurrently with results kept in order.
pub fn run_stream_with<F>(
    sources: &[FrameSource],
    cfg: &PipelineConfig,
    sink: F,
) -> Result<StreamReport<FrameSummary>>
where
    F: Fn(&FrameResult) -> Result<()> + Sync + Send,
{
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::EmptyInput("no frames in stream".into()));
    }
    let mut skipped = Vec::new();
    let mut fitted = None;
    for (k, src) in sources.iter().enumerate() {
        let attempt = src
            .load()
            .and_then(|frame| fit_models(&frame.image, cfg).map(|m| (frame, m)));
        match attempt {
            Ok(found) => {
                fitted = Some((k, found));
                break;
            }
            Err(e) => {
                warn!("frame {}: cannot fit models: {e}", src.id());
                skipped.push((src.id().to_string(), e));
            }
        }
    }
    let Some((first, (first_frame, models))) = fitted else {
        return Err(Error::EmptyInput("no frame could fit the models".into()));
    };
    info!("models fitted on frame {}", first_frame.id);

    let process = |frame: &FrameInput| -> Result<FrameSummary> {
        let r = run_frame(frame, &models, cfg)?;
        sink(&r).map_err(|e| Error::Frame {
            frame: r.id.clone(),
            source: Box::new(e),
        })?;
        Ok(FrameSummary {
            id: r.id,
            counts: r.counts,
            rates: r.rates,
        })
    };
    let head = process(&first_frame);
    drop(first_frame);
    let rest = par::map_slice(&sources[first + 1..], |src| {
        src.load().and_then(|f| process(&f))
    });

    let mut frames = Vec::new();
    for (src, outcome) in sources[first..]
        .iter()
        .zip(std::iter::once(head).chain(rest))
    {
        match outcome {
            Ok(s) => frames.push(s),
            Err(e) => {
                warn!("frame {} skipped: {e}", src.id());
                skipped.push((src.id().to_string(), e));
            }
        }
    }
    let scored: Vec<(String, ConfusionCounts)> = frames
        .iter()
        .filter_map(|f| f.counts.map(|c| (f.id.clone(), c)))
        .collect();
    let csv = if scored.is_empty() {
        None
    } else {
        Some(metrics_csv(&scored, cfg.group_size)?)
    };
    Ok(StreamReport {
        models,
        frames,
        skipped,
        csv,
    })
}

/// Process a stream and keep every full result.
pub fn run_stream(
    sources: &[FrameSource],
    cfg: &PipelineConfig,
) -> Result<StreamReport<FrameResult>> {
    let kept = std::sync::Mutex::new(Vec::new());
    let report = run_stream_with(sources, cfg, |r| {
        kept.lock().expect("result store poisoned").push(r.clone());
        Ok(())
    })?;
    let mut kept = kept.into_inner().expect("result store poisoned");
    // workers finish out of order
    let order: Vec<&str> = report.frames.iter().map(|f| f.id.as_str()).collect();
    kept.sort_by_key(|r| order.iter().position(|id| *id == r.id));
    Ok(StreamReport {
        models: report.models,
        frames: kept,
        skipped: report.skipped,
        csv: report.csv,
    })
}

/// Write the refined mask of `r` (and every stage when `dump_stages`) under
/// `dir`.
pub fn write_frame(r: &FrameResult, dir: &Path, dump_stages: bool) -> Result<()> {
    let masks = dir.join("masks");
    create_dir(&masks)?;
    save_mask(&r.refined, masks.join(format!("{}.pgm", r.id)))?;
    if dump_stages {
        let stages = dir.join("stages");
        create_dir(&stages)?;
        for (name, m) in r.masks() {
            save_mask(m, stages.join(format!("{}_{name}.pgm", r.id)))?;
        }
        save_image(
            &r.compensated,
            stages.join(format!("{}_compensated.png", r.id)),
        )?;
    }
    Ok(())
}

/// Run a stream writing masks, models, config and CSV under `dir`.
pub fn run_to_dir(
    sources: &[FrameSource],
    cfg: &PipelineConfig,
    dir: &Path,
) -> Result<StreamReport<FrameSummary>> {
    create_dir(dir)?;
    let report = run_stream_with(sources, cfg, |r| write_frame(r, dir, cfg.dump_stages))?;
    report.models.color.save(dir.join("road_model.txt"))?;
    report.models.svm.save(dir.join("svm_model.txt"))?;
    write_text(&dir.join("config.txt"), &cfg.to_text())?;
    if let Some(csv) = &report.csv {
        write_text(&dir.join("metrics.csv"), csv)?;
    }
    Ok(report)
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Unwritable {
        path: dir.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

fn frame_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Frames of a directory: the pairs listed in its manifest if present,
/// otherwise every `.png`/`.ppm` file in name order without ground truth.
pub fn frames_in_dir(dir: &Path) -> Result<Vec<FrameSource>> {
    let manifest = dir.join(MANIFEST);
    if manifest.is_file() {
        return read_manifest(&manifest);
    }
    let entries = fs::read_dir(dir).map_err(|source| Error::Unreadable {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("ppm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no frames in {}", dir.display())));
    }
    Ok(paths
        .into_iter()
        .map(|image| FrameSource::Files {
            id: frame_id(&image),
            image,
            truth: None,
        })
        .collect())
}

/// Parse a manifest: one `frame<TAB>truth` pair per line, truth optional,
/// paths relative to the manifest's directory, `#` comments.
pub fn read_manifest(path: &Path) -> Result<Vec<FrameSource>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let image = cols.next().unwrap_or_default().trim();
        let truth = cols.next().map(str::trim).filter(|t| !t.is_empty());
        if image.is_empty() || cols.next().is_some() {
            return Err(Error::Config(format!(
                "{}:{}: expected frame<TAB>truth",
                path.display(),
                n + 1
            )));
        }
        let image = base.join(image);
        out.push(FrameSource::Files {
            id: frame_id(&image),
            image,
            truth: truth.map(|t| base.join(t)),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} lists no frames",
            path.display()
        )));
    }
    Ok(out)
}

/// Manifest text for `(frame, truth)` pairs given relative to its directory.
pub fn manifest_text(pairs: &[(String, Option<String>)]) -> String {
    let mut s = String::new();
    for (frame, truth) in pairs {
        s.push_str(frame);
        if let Some(t) = truth {
            s.push('\t');
            s.push_str(t);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let text = manifest_text(&[
            ("a.png".into(), Some("a_truth.pgm".into())),
            ("b.png".into(), None),
        ]);
        let path = dir.path().join(MANIFEST);
        fs::write(&path, format!("# frames\n{text}\n")).unwrap();
        let frames = read_manifest(&path).unwrap();
        assert_eq!(frames.len(), 2);
        match &frames[0] {
            FrameSource::Files { id, image, truth } => {
                assert_eq!(id, "a");
                assert_eq!(image, &dir.path().join("a.png"));
                assert_eq!(
                    truth.as_deref(),
                    Some(dir.path().join("a_truth.pgm").as_path())
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(&frames[1], FrameSource::Files { truth: None, .. }));
    }

    #[test]
    fn malformed_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST);
        fs::write(&path, "a.png\tb.pgm\tc\n").unwrap();
        assert!(read_manifest(&path).is_err());
        fs::write(&path, "# nothing\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn empty_stream_rejected() {
        let r = run_stream(&[], &PipelineConfig::default());
        assert!(matches!(r, Err(Error::EmptyInput(_))));
    }
}
