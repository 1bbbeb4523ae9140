//! Per-video processing and the parallel dataset driver.
//!
//! Each video is one independent work unit: sample frames, align, crop,
//! co-transform the mask when one exists, and write everything under a single
//! per-video directory. A frame-level failure is logged and skipped; it never
//! aborts the video.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use image::RgbImage;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::landmarks::{alignment_template, LandmarkSet};
use crate::manifest::{Label, VideoRecord};

use super::{
    estimate_alignment, sample_frames, warp_crop, warp_mask, CropSpec, FrameSamplingPlan,
    SamplingMode,
};

/// Preprocess settings, mirroring the preprocess YAML keys plus the output
/// root (the upstream tool hardcodes its output location; here it is
/// explicit).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub dataset_name: String,
    pub dataset_root_path: PathBuf,
    pub output_root_path: PathBuf,
    #[serde(default)]
    pub comp: Option<String>,
    /// "fixed_num_frames" or "fixed_stride".
    pub mode: String,
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default)]
    pub num_frames: Option<usize>,
    #[serde(default)]
    pub perturbation: Option<String>,
    /// Crop geometry; omitted fields use margin 1.3 and size 256.
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub output_size: Option<u32>,
}

impl PreprocessConfig {
    pub fn sampling_plan(&self) -> Result<FrameSamplingPlan> {
        let mode = match self.mode.as_str() {
            "fixed_num_frames" => SamplingMode::FixedNumFrames,
            "fixed_stride" => SamplingMode::FixedStride,
            other => {
                return Err(Error::Config {
                    key: "mode".into(),
                    message: format!(
                        "unknown mode {other:?} (use fixed_num_frames or fixed_stride)"
                    ),
                })
            }
        };
        Ok(FrameSamplingPlan {
            mode,
            num_frames: self.num_frames,
            stride: self.stride,
        })
    }

    pub fn crop_spec(&self) -> CropSpec {
        let default = CropSpec::default();
        CropSpec {
            margin: self.margin.unwrap_or(default.margin),
            output_size: self.output_size.unwrap_or(default.output_size),
        }
    }
}

/// Source of per-frame landmarks. `Ok(None)` means no detected face for that
/// frame; the frame is skipped and logged.
pub trait LandmarkSource: Sync {
    fn landmarks(&self, video: &VideoRecord, frame_index: usize) -> Result<Option<LandmarkSet>>;
}

/// Landmarks read from the files referenced by the manifest record
/// (`landmark_paths`, parallel to `frame_paths`).
pub struct ManifestLandmarks {
    pub root: PathBuf,
}

impl LandmarkSource for ManifestLandmarks {
    fn landmarks(&self, video: &VideoRecord, frame_index: usize) -> Result<Option<LandmarkSet>> {
        let Some(paths) = &video.landmark_paths else {
            return Ok(None);
        };
        let Some(rel) = paths.get(frame_index) else {
            return Ok(None);
        };
        let path = self.root.join(rel);
        if !path.is_file() {
            return Ok(None);
        }
        LandmarkSet::read_json(&path).map(Some)
    }
}

/// Serialized log sink shared by all workers.
pub trait LogSink: Sync {
    fn log(&self, message: &str);
}

pub struct NullLog;

impl LogSink for NullLog {
    fn log(&self, _message: &str) {}
}

/// Collects messages in memory; used by tests and the CLI dry paths.
#[derive(Default)]
pub struct VecLog {
    lines: Mutex<Vec<String>>,
}

impl VecLog {
    pub fn take(&self) -> Vec<String> {
        std::mem::take(&mut self.lines.lock().unwrap())
    }
}

impl LogSink for VecLog {
    fn log(&self, message: &str) {
        self.lines.lock().unwrap().push(message.to_string());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedVideo {
    pub video_id: String,
    pub label: Label,
    pub out_dir: PathBuf,
    pub sampled: usize,
    pub written: usize,
    pub masks_written: usize,
    pub skipped: usize,
}

/// Output directory for a video, relative to the output root: the source
/// video directory with a redundant trailing `frames` component folded away
/// (`group/frames/<id>` becomes `group/<id>`, keeping ids like FF++'s
/// `Deepfakes/000_003` collision-free).
fn video_rel_dir(video: &VideoRecord) -> PathBuf {
    let first = video
        .frame_paths
        .first()
        .map(String::as_str)
        .unwrap_or(video.video_id.as_str());
    let mut parts: Vec<&str> = first.split('/').collect();
    parts.pop(); // file name
    if parts.len() >= 2 && parts[parts.len() - 2] == "frames" {
        parts.remove(parts.len() - 2);
    }
    if parts.is_empty() {
        PathBuf::from(&video.video_id)
    } else {
        parts.iter().collect()
    }
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::DecodeFailure {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

/// Process one video: sample, align, crop, write `frames/`, `landmarks/`,
/// and `masks/` (when the record has masks) under one per-video directory.
/// Output files are named by the source frame index, zero-padded to 4 digits.
pub fn process_video(
    root: &Path,
    video: &VideoRecord,
    out_root: &Path,
    plan: &FrameSamplingPlan,
    spec: &CropSpec,
    source: &dyn LandmarkSource,
    log: &dyn LogSink,
) -> Result<ProcessedVideo> {
    let total = video.frame_paths.len();
    if total == 0 {
        return Err(Error::EmptyDataset(root.join(video_rel_dir(video))));
    }
    let indices = sample_frames(total, plan)?;
    let template = alignment_template(spec.output_size);
    let out_dir = out_root.join(video_rel_dir(video));

    let mut written = 0usize;
    let mut masks_written = 0usize;
    let mut skipped = 0usize;
    let mut decode_failures = 0usize;
    let mut first_decode_error: Option<Error> = None;

    for &idx in &indices {
        let frame_rel = &video.frame_paths[idx];
        let frame_path = root.join(frame_rel);
        let frame = match load_rgb(&frame_path) {
            Ok(img) => img,
            Err(e) => {
                log.log(&format!(
                    "video {} frame {idx}: skipped (decode failure: {e})",
                    video.video_id
                ));
                skipped += 1;
                decode_failures += 1;
                if first_decode_error.is_none() {
                    first_decode_error = Some(e);
                }
                continue;
            }
        };
        let landmarks = match source.landmarks(video, idx) {
            Ok(Some(lms)) => lms,
            Ok(None) => {
                log.log(&format!(
                    "video {} frame {idx}: skipped (no detected face)",
                    video.video_id
                ));
                skipped += 1;
                continue;
            }
            Err(e) => {
                log.log(&format!(
                    "video {} frame {idx}: skipped (landmark error: {e})",
                    video.video_id
                ));
                skipped += 1;
                continue;
            }
        };
        let aligned = match estimate_alignment(&landmarks, &template)
            .and_then(|t| warp_crop(&frame, &landmarks, &t, spec))
        {
            Ok(v) => v,
            Err(e) => {
                log.log(&format!(
                    "video {} frame {idx}: skipped (alignment failure: {e})",
                    video.video_id
                ));
                skipped += 1;
                continue;
            }
        };
        let (face, warped_landmarks, mapping) = aligned;

        std::fs::create_dir_all(out_dir.join("frames"))?;
        std::fs::create_dir_all(out_dir.join("landmarks"))?;
        face.save(out_dir.join(format!("frames/{idx:04}.png")))
            .map_err(Error::Image)?;
        std::fs::write(
            out_dir.join(format!("landmarks/{idx:04}.json")),
            warped_landmarks.to_json(),
        )?;
        written += 1;

        if let Some(mask_rel) = video.mask_paths.as_ref().and_then(|m| m.get(idx)) {
            let mask_path = root.join(mask_rel);
            let mask_result = image::open(&mask_path)
                .map_err(|e| Error::DecodeFailure {
                    path: mask_path.clone(),
                    message: e.to_string(),
                })
                .map(|m| m.to_luma8())
                .and_then(|m| warp_mask(&m, &mapping, spec));
            match mask_result {
                Ok(mask_out) => {
                    std::fs::create_dir_all(out_dir.join("masks"))?;
                    mask_out
                        .save(out_dir.join(format!("masks/{idx:04}.png")))
                        .map_err(Error::Image)?;
                    masks_written += 1;
                }
                Err(e) => {
                    log.log(&format!(
                        "video {} frame {idx}: mask skipped ({e})",
                        video.video_id
                    ));
                }
            }
        }
    }

    if decode_failures == indices.len() {
        // nothing in the video decoded: treat the video itself as unreadable
        return Err(first_decode_error.unwrap());
    }

    log.log(&format!(
        "video {}: sampled={} written={} masks={} skipped={}",
        video.video_id,
        indices.len(),
        written,
        masks_written,
        skipped
    ));
    Ok(ProcessedVideo {
        video_id: video.video_id.clone(),
        label: video.label,
        out_dir,
        sampled: indices.len(),
        written,
        masks_written,
        skipped,
    })
}

#[derive(Debug, Default)]
pub struct PreprocessSummary {
    pub processed: Vec<ProcessedVideo>,
    /// (video_id, error message) for videos that failed outright.
    pub failures: Vec<(String, String)>,
}

/// Process every distinct video in parallel. Records duplicated across
/// splits are processed once; output bytes are independent of `workers`.
#[allow(clippy::too_many_arguments)]
pub fn preprocess_dataset(
    root: &Path,
    videos: &[VideoRecord],
    out_root: &Path,
    plan: &FrameSamplingPlan,
    spec: &CropSpec,
    source: &dyn LandmarkSource,
    workers: usize,
    log: &dyn LogSink,
) -> Result<PreprocessSummary> {
    let mut unique: Vec<&VideoRecord> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for video in videos {
        if seen.insert(video_rel_dir(video)) {
            unique.push(video);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config {
            key: "workers".into(),
            message: e.to_string(),
        })?;
    let results: Vec<(String, Result<ProcessedVideo>)> = pool.install(|| {
        unique
            .par_iter()
            .map(|video| {
                (
                    video.video_id.clone(),
                    process_video(root, video, out_root, plan, spec, source, log),
                )
            })
            .collect()
    });

    let mut summary = PreprocessSummary::default();
    for (video_id, result) in results {
        match result {
            Ok(done) => summary.processed.push(done),
            Err(e) => summary.failures.push((video_id, e.to_string())),
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Split;
    use image::Rgb;

    /// Synthetic video tree: `group/frames/<id>/NNNN.png` plus landmark JSON
    /// files, with an optional parallel mask tree.
    fn build_toy_video(
        root: &Path,
        id: &str,
        n_frames: usize,
        with_masks: bool,
        drop_landmark_at: Option<usize>,
    ) -> VideoRecord {
        let frames_dir = root.join(format!("clips/frames/{id}"));
        let lms_dir = root.join(format!("clips/landmarks/{id}"));
        std::fs::create_dir_all(&frames_dir).unwrap();
        std::fs::create_dir_all(&lms_dir).unwrap();
        let mut frame_paths = Vec::new();
        let mut landmark_paths = Vec::new();
        let mut mask_paths = Vec::new();
        for i in 0..n_frames {
            let img = RgbImage::from_fn(160, 140, |x, y| {
                Rgb([(x + i as u32) as u8, y as u8, (x * y % 256) as u8])
            });
            img.save(frames_dir.join(format!("{i:04}.png"))).unwrap();
            frame_paths.push(format!("clips/frames/{id}/{i:04}.png"));

            if drop_landmark_at != Some(i) {
                let pts: Vec<(f64, f64)> = (0..68)
                    .map(|k| {
                        let a = k as f64 / 68.0 * std::f64::consts::TAU;
                        (80.0 + 40.0 * a.cos(), 70.0 + 35.0 * a.sin())
                    })
                    .collect();
                let lms = LandmarkSet::from_vec(pts).unwrap();
                std::fs::write(lms_dir.join(format!("{i:04}.json")), lms.to_json()).unwrap();
            }
            landmark_paths.push(format!("clips/landmarks/{id}/{i:04}.json"));

            if with_masks {
                let mask_dir = root.join(format!("clips/masks/{id}"));
                std::fs::create_dir_all(&mask_dir).unwrap();
                let mask = image::GrayImage::from_fn(160, 140, |x, y| {
                    let dx = x as f64 - 80.0;
                    let dy = y as f64 - 70.0;
                    image::Luma([if dx * dx + dy * dy < 900.0 { 255 } else { 0 }])
                });
                mask.save(mask_dir.join(format!("{i:04}.png"))).unwrap();
                mask_paths.push(format!("clips/masks/{id}/{i:04}.png"));
            }
        }
        VideoRecord {
            video_id: id.into(),
            label: Label::Real,
            split: Split::Train,
            frame_paths,
            landmark_paths: Some(landmark_paths),
            mask_paths: with_masks.then_some(mask_paths),
            compression: None,
            method: None,
        }
    }

    #[test]
    fn processes_video_and_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let video = build_toy_video(root, "v0", 6, true, None);
        let out_root = root.join("out");
        let log = VecLog::default();
        let done = process_video(
            root,
            &video,
            &out_root,
            &FrameSamplingPlan::fixed_stride(2),
            &CropSpec::default(),
            &ManifestLandmarks {
                root: root.to_path_buf(),
            },
            &log,
        )
        .unwrap();
        assert_eq!(done.sampled, 3);
        assert_eq!(done.written, 3);
        assert_eq!(done.masks_written, 3);
        assert_eq!(done.skipped, 0);
        assert_eq!(done.out_dir, out_root.join("clips/v0"));
        for idx in [0, 2, 4] {
            assert!(done.out_dir.join(format!("frames/{idx:04}.png")).is_file());
            assert!(done.out_dir.join(format!("landmarks/{idx:04}.json")).is_file());
            assert!(done.out_dir.join(format!("masks/{idx:04}.png")).is_file());
        }
        let face =
            image::open(done.out_dir.join("frames/0000.png")).unwrap().to_rgb8();
        assert_eq!((face.width(), face.height()), (256, 256));
        assert!(log.take().iter().any(|l| l.contains("sampled=3")));
    }

    #[test]
    fn missing_landmarks_skip_frame_not_video() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let video = build_toy_video(root, "v1", 4, false, Some(1));
        let log = VecLog::default();
        let done = process_video(
            root,
            &video,
            &root.join("out"),
            &FrameSamplingPlan::fixed_num(4),
            &CropSpec::default(),
            &ManifestLandmarks {
                root: root.to_path_buf(),
            },
            &log,
        )
        .unwrap();
        assert_eq!(done.written, 3);
        assert_eq!(done.skipped, 1);
        assert!(log
            .take()
            .iter()
            .any(|l| l.contains("frame 1") && l.contains("no detected face")));
    }

    #[test]
    fn no_faces_at_all_yields_zero_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut video = build_toy_video(root, "v2", 3, false, None);
        video.landmark_paths = None; // no detector output at all
        let log = VecLog::default();
        let done = process_video(
            root,
            &video,
            &root.join("out"),
            &FrameSamplingPlan::fixed_num(3),
            &CropSpec::default(),
            &ManifestLandmarks {
                root: root.to_path_buf(),
            },
            &log,
        )
        .unwrap();
        assert_eq!(done.written, 0);
        assert_eq!(done.skipped, done.sampled);
    }

    #[test]
    fn parallel_dedupes_split_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let video = build_toy_video(root, "v3", 3, false, None);
        let mut test_copy = video.clone();
        test_copy.split = Split::Test;
        let summary = preprocess_dataset(
            root,
            &[video, test_copy],
            &root.join("out"),
            &FrameSamplingPlan::fixed_num(2),
            &CropSpec::default(),
            &ManifestLandmarks {
                root: root.to_path_buf(),
            },
            2,
            &NullLog,
        )
        .unwrap();
        assert_eq!(summary.processed.len(), 1);
        assert!(summary.failures.is_empty());
    }

    #[test]
    fn unreadable_video_reports_failure() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut video = build_toy_video(root, "v4", 2, false, None);
        for rel in &video.frame_paths {
            std::fs::write(root.join(rel), b"not a png").unwrap();
        }
        video.landmark_paths = None;
        let summary = preprocess_dataset(
            root,
            &[video],
            &root.join("out"),
            &FrameSamplingPlan::fixed_num(2),
            &CropSpec::default(),
            &ManifestLandmarks {
                root: root.to_path_buf(),
            },
            1,
            &NullLog,
        )
        .unwrap();
        assert!(summary.processed.is_empty());
        assert_eq!(summary.failures.len(), 1);
        assert_eq!(summary.failures[0].0, "v4");
    }

    #[test]
    fn config_mode_parsing() {
        let yaml = "dataset_name: UADFV\ndataset_root_path: /a\noutput_root_path: /b\nmode: fixed_num_frames\nnum_frames: 32\n";
        let config: PreprocessConfig = serde_yaml::from_str(yaml).unwrap();
        let plan = config.sampling_plan().unwrap();
        assert_eq!(plan.mode, SamplingMode::FixedNumFrames);
        assert_eq!(plan.num_frames, Some(32));
        assert_eq!(config.crop_spec(), CropSpec::default());

        let bad = "dataset_name: UADFV\ndataset_root_path: /a\noutput_root_path: /b\nmode: sometimes\n";
        let config: PreprocessConfig = serde_yaml::from_str(bad).unwrap();
        assert!(matches!(
            config.sampling_plan(),
            Err(Error::Config { .. })
        ));
    }
}
