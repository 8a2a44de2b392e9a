//! End-to-end orchestration: configuration, frame streams, synthetic scenes
//! and the with/without filtering comparison.

mod compare;
mod config;
mod stream;
mod synth;

pub use compare::{bar_chart, compare, Comparison};
pub use config::{PipelineConfig, DEFAULT_GROUP_SIZE};
pub use stream::{
    fit_models, frames_in_dir, manifest_text, read_manifest, run_frame, run_stream,
    run_stream_with, run_to_dir, write_frame, FrameInput, FrameResult, FrameSource, FrameSummary,
    Models, StreamReport, MANIFEST,
};
pub use synth::{generate_scene, RoadGeometry, SceneFrame, ShadowBand, SyntheticScene};

/// Sources for the synthetic benchmark: `scenes` scenes with
/// `seeds_per_scene` noise seeds each, scene-major, ids `frame_000`...
pub fn benchmark_sources(scenes: usize, seeds_per_scene: usize, seed: u64) -> Vec<FrameSource> {
    (0..scenes * seeds_per_scene)
        .map(|k| FrameSource::Scene {
            id: format!("frame_{k:03}"),
            scene: SyntheticScene::benchmark(
                k / seeds_per_scene,
                seed.wrapping_mul(1_000_003) + k as u64,
            ),
        })
        .collect()
}
