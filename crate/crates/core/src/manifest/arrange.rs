//! Scanning raw dataset trees and applying each dataset family's split rule.
//!
//! Expected layouts are documented in the README. The common building block
//! is a "group" directory holding `frames/<video_id>/<image files>` with
//! optional sibling `landmarks/<video_id>/` and `masks/<video_id>/` trees.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{
    write_manifest, Compression, DatasetManifest, Label, Split, VideoRecord, SCHEMA_VERSION,
};

pub const SUPPORTED_DATASETS: [&str; 9] = [
    "FaceForensics++",
    "DeepFakeDetection",
    "FaceShifter",
    "Celeb-DF-v1",
    "Celeb-DF-v2",
    "DFDCP",
    "DFDC",
    "DeeperForensics-1.0",
    "UADFV",
];

/// Arrangement settings, mirroring the arrangement YAML keys.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrangeConfig {
    pub dataset_name: String,
    pub dataset_root_path: PathBuf,
    pub output_file_path: PathBuf,
    /// FF++-family compression level: raw, c23, or c40.
    #[serde(default)]
    pub comp: Option<String>,
    /// DeeperForensics-1.0 perturbation subset, e.g. "end_to_end".
    #[serde(default)]
    pub perturbation: Option<String>,
}

/// Scan the raw tree and apply the dataset's split rule, without writing
/// anything.
pub fn scan_dataset(config: &ArrangeConfig) -> Result<DatasetManifest> {
    let root = config.dataset_root_path.as_path();
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let videos = match normalize_name(&config.dataset_name).as_str() {
        "faceforensics" => scan_ffpp_family(root, require_comp(config)?, FakeSplit::PairJson)?,
        "deepfakedetection" => {
            scan_ffpp_family(root, default_comp(config)?, FakeSplit::DuplicateAll)?
        }
        "faceshifter" => scan_ffpp_family(root, default_comp(config)?, FakeSplit::PairJson)?,
        "celebdfv1" | "celebdfv2" => scan_celebdf(root)?,
        "dfdcp" => scan_dfdcp(root)?,
        "dfdc" => scan_dfdc(root)?,
        "deeperforensics10" => scan_df10(root, config.perturbation.as_deref())?,
        "uadfv" => scan_flat_duplicate_all(root)?,
        _ => {
            return Err(Error::UnknownDataset {
                name: config.dataset_name.clone(),
                supported: SUPPORTED_DATASETS.join(", "),
            })
        }
    };
    if videos.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    let mut videos = videos;
    videos.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(DatasetManifest {
        dataset_name: config.dataset_name.clone(),
        schema_version: SCHEMA_VERSION,
        videos,
    })
}

/// Scan, apply the split rule, and write the manifest to
/// `output_file_path`.
pub fn arrange_dataset(config: &ArrangeConfig) -> Result<DatasetManifest> {
    let manifest = scan_dataset(config)?;
    write_manifest(&manifest, &config.output_file_path)?;
    Ok(manifest)
}

fn normalize_name(name: &str) -> String {
    let squashed: String = name
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_ascii_lowercase();
    match squashed.as_str() {
        "ff" | "ffall" => "faceforensics".into(),
        "dfd" => "deepfakedetection".into(),
        "df10" => "deeperforensics10".into(),
        other => other.into(),
    }
}

fn require_comp(config: &ArrangeConfig) -> Result<Compression> {
    match &config.comp {
        Some(text) => Compression::parse(text),
        None => Err(Error::Config {
            key: "comp".into(),
            message: "FaceForensics++ requires a compression level (raw, c23, or c40)".into(),
        }),
    }
}

fn default_comp(config: &ArrangeConfig) -> Result<Compression> {
    match &config.comp {
        Some(text) => Compression::parse(text),
        None => Ok(Compression::C23),
    }
}

const IMAGE_EXTS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn sorted_dirs(parent: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(parent) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    dirs
}

fn sorted_files(dir: &Path, image_only: bool) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .filter(|p| {
                !image_only
                    || p.extension()
                        .and_then(|e| e.to_str())
                        .map(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
                        .unwrap_or(false)
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    files
}

fn rel_string(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn file_stem(text: &str) -> String {
    Path::new(text.trim())
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

struct ScannedVideo {
    video_id: String,
    frame_paths: Vec<String>,
    landmark_paths: Option<Vec<String>>,
    mask_paths: Option<Vec<String>>,
}

/// Scan `<group>/frames/*` for videos, picking up parallel `landmarks/` and
/// `masks/` trees when present. Paths come out relative to `root`.
fn scan_group(root: &Path, group: &Path) -> Vec<ScannedVideo> {
    let mut out = Vec::new();
    for video_dir in sorted_dirs(&group.join("frames")) {
        let video_id = video_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let frame_paths: Vec<String> = sorted_files(&video_dir, true)
            .iter()
            .map(|p| rel_string(root, p))
            .collect();
        if frame_paths.is_empty() {
            continue;
        }
        let side = |kind: &str, image_only: bool| -> Option<Vec<String>> {
            let dir = group.join(kind).join(&video_id);
            if dir.is_dir() {
                Some(
                    sorted_files(&dir, image_only)
                        .iter()
                        .map(|p| rel_string(root, p))
                        .collect(),
                )
            } else {
                None
            }
        };
        let landmark_paths = side("landmarks", false);
        let mask_paths = side("masks", true);
        out.push(ScannedVideo {
            video_id,
            frame_paths,
            landmark_paths,
            mask_paths,
        });
    }
    out
}

fn to_records(
    videos: Vec<ScannedVideo>,
    label: Label,
    splits: impl Fn(&str) -> Vec<Split>,
    compression: Option<Compression>,
    method: Option<&str>,
) -> Vec<VideoRecord> {
    let mut out = Vec::new();
    for video in videos {
        for split in splits(&video.video_id) {
            out.push(VideoRecord {
                video_id: video.video_id.clone(),
                label,
                split,
                frame_paths: video.frame_paths.clone(),
                landmark_paths: video.landmark_paths.clone(),
                mask_paths: video.mask_paths.clone(),
                compression,
                method: method.map(str::to_owned),
            });
        }
    }
    out
}

enum FakeSplit {
    /// Fake split assignment from the official train/test/val pair-list JSONs.
    PairJson,
    /// No official split: every video appears in all three splits.
    DuplicateAll,
}

/// FF++-layout datasets: `original_sequences/<source>/<comp>/frames/*` real
/// videos (always duplicated across the three splits) and
/// `manipulated_sequences/<method>/<comp>/frames/*` fakes.
fn scan_ffpp_family(root: &Path, comp: Compression, fake_split: FakeSplit) -> Result<Vec<VideoRecord>> {
    let mut records = Vec::new();
    for source_dir in sorted_dirs(&root.join("original_sequences")) {
        let videos = scan_group(root, &source_dir.join(comp.as_str()));
        records.extend(to_records(
            videos,
            Label::Real,
            |_| Split::ALL.to_vec(),
            Some(comp),
            None,
        ));
    }

    let pair_splits = match fake_split {
        FakeSplit::PairJson => Some(read_pair_lists(root)?),
        FakeSplit::DuplicateAll => None,
    };
    for method_dir in sorted_dirs(&root.join("manipulated_sequences")) {
        let method = method_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let videos = scan_group(root, &method_dir.join(comp.as_str()));
        records.extend(to_records(
            videos,
            Label::Fake,
            |id| match &pair_splits {
                Some(map) => map.get(id).map(|&s| vec![s]).unwrap_or_else(|| vec![Split::Train]),
                None => Split::ALL.to_vec(),
            },
            Some(comp),
            Some(&method),
        ));
    }
    Ok(records)
}

/// Read `train.json` / `test.json` / `val.json` pair lists and map the fake
/// id `a_b` (either pair order) to its split.
fn read_pair_lists(root: &Path) -> Result<BTreeMap<String, Split>> {
    let mut map = BTreeMap::new();
    for (name, split) in [
        ("train.json", Split::Train),
        ("test.json", Split::Test),
        ("val.json", Split::Validation),
    ] {
        let path = root.join(name);
        if !path.is_file() {
            return Err(Error::SplitListMissing(path));
        }
        let pairs: Vec<[String; 2]> = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        for [a, b] in pairs {
            map.insert(format!("{a}_{b}"), split);
            map.insert(format!("{b}_{a}"), split);
        }
    }
    Ok(map)
}

/// Celeb-DF v1/v2: every video trains; the official text list names the test
/// videos; validation equals test.
fn scan_celebdf(root: &Path) -> Result<Vec<VideoRecord>> {
    let list_path = root.join("List_of_testing_videos.txt");
    if !list_path.is_file() {
        return Err(Error::SplitListMissing(list_path));
    }
    let mut test_ids: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in std::fs::read_to_string(&list_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        // "<label digit> <relative path>.mp4"; only the stem matters here.
        let path_part = line.split_whitespace().last().ok_or(Error::Parse {
            line: idx + 1,
            message: "empty test-list line".into(),
        })?;
        test_ids.insert(file_stem(path_part));
    }

    let mut records = Vec::new();
    for (group, label) in [
        ("Celeb-real", Label::Real),
        ("YouTube-real", Label::Real),
        ("Celeb-synthesis", Label::Fake),
    ] {
        let videos = scan_group(root, &root.join(group));
        records.extend(to_records(
            videos,
            label,
            |id| {
                if test_ids.contains(id) {
                    vec![Split::Train, Split::Test, Split::Validation]
                } else {
                    vec![Split::Train]
                }
            },
            None,
            None,
        ));
    }
    Ok(records)
}

#[derive(Deserialize)]
struct DfdcpEntry {
    label: String,
    set: String,
    #[serde(default)]
    method: Option<String>,
}

/// DFDCP: membership, labels, and train/test assignment all come from the
/// official `dataset.json`; validation equals test.
fn scan_dfdcp(root: &Path) -> Result<Vec<VideoRecord>> {
    let list_path = root.join("dataset.json");
    if !list_path.is_file() {
        return Err(Error::SplitListMissing(list_path));
    }
    let entries: BTreeMap<String, DfdcpEntry> =
        serde_json::from_str(&std::fs::read_to_string(&list_path)?)?;

    let mut records = Vec::new();
    for group_dir in sorted_dirs(root) {
        for video in scan_group(root, &group_dir) {
            let Some(entry) = entries.get(&video.video_id) else {
                continue; // not part of the official listing
            };
            let label = match entry.label.as_str() {
                "real" => Label::Real,
                "fake" => Label::Fake,
                other => {
                    return Err(Error::Config {
                        key: "dataset.json".into(),
                        message: format!("unknown label {other:?} for {}", video.video_id),
                    })
                }
            };
            let splits = match entry.set.as_str() {
                "train" => vec![Split::Train],
                "test" => vec![Split::Test, Split::Validation],
                other => {
                    return Err(Error::Config {
                        key: "dataset.json".into(),
                        message: format!("unknown set {other:?} for {}", video.video_id),
                    })
                }
            };
            records.extend(to_records(
                vec![video],
                label,
                |_| splits.clone(),
                None,
                entry.method.as_deref(),
            ));
        }
    }
    Ok(records)
}

/// DFDC: `real/` and `fake/` groups; `test_list.txt` names test videos (one
/// id per line), the rest train; validation equals test.
fn scan_dfdc(root: &Path) -> Result<Vec<VideoRecord>> {
    let list_path = root.join("test_list.txt");
    if !list_path.is_file() {
        return Err(Error::SplitListMissing(list_path));
    }
    let test_ids: BTreeSet<String> = std::fs::read_to_string(&list_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(file_stem)
        .collect();

    let mut records = Vec::new();
    for (group, label) in [("real", Label::Real), ("fake", Label::Fake)] {
        let videos = scan_group(root, &root.join(group));
        records.extend(to_records(
            videos,
            label,
            |id| {
                if test_ids.contains(id) {
                    vec![Split::Test, Split::Validation]
                } else {
                    vec![Split::Train]
                }
            },
            None,
            None,
        ));
    }
    Ok(records)
}

/// DeeperForensics-1.0: real `source_videos/` duplicated across splits; the
/// chosen perturbation subset of `manipulated_videos/` follows the official
/// split lists in `lists/splits/{train,test,val}.txt`.
fn scan_df10(root: &Path, perturbation: Option<&str>) -> Result<Vec<VideoRecord>> {
    let perturbation = perturbation.unwrap_or("end_to_end");
    let fake_group = root.join("manipulated_videos").join(perturbation);
    if !fake_group.is_dir() {
        return Err(Error::Config {
            key: "perturbation".into(),
            message: format!("no subset directory {}", fake_group.display()),
        });
    }

    let mut split_of: BTreeMap<String, Split> = BTreeMap::new();
    for (name, split) in [
        ("train.txt", Split::Train),
        ("test.txt", Split::Test),
        ("val.txt", Split::Validation),
    ] {
        let path = root.join("lists/splits").join(name);
        if !path.is_file() {
            return Err(Error::SplitListMissing(path));
        }
        for line in std::fs::read_to_string(&path)?.lines() {
            if !line.trim().is_empty() {
                split_of.insert(file_stem(line), split);
            }
        }
    }

    let mut records = to_records(
        scan_group(root, &root.join("source_videos")),
        Label::Real,
        |_| Split::ALL.to_vec(),
        None,
        None,
    );
    records.extend(to_records(
        scan_group(root, &fake_group),
        Label::Fake,
        |id| split_of.get(id).map(|&s| vec![s]).unwrap_or_default(),
        None,
        Some(perturbation),
    ));
    Ok(records)
}

/// UADFV-style flat layout: `real/` and `fake/` groups, everything duplicated
/// across the three splits.
fn scan_flat_duplicate_all(root: &Path) -> Result<Vec<VideoRecord>> {
    let mut records = Vec::new();
    for (group, label) in [("real", Label::Real), ("fake", Label::Fake)] {
        let videos = scan_group(root, &root.join(group));
        records.extend(to_records(videos, label, |_| Split::ALL.to_vec(), None, None));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_dataset_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let config = ArrangeConfig {
            dataset_name: "NotADataset".into(),
            dataset_root_path: dir.path().to_path_buf(),
            output_file_path: dir.path().join("out.json"),
            comp: None,
            perturbation: None,
        };
        match scan_dataset(&config) {
            Err(Error::UnknownDataset { name, .. }) => assert_eq!(name, "NotADataset"),
            other => panic!("expected UnknownDataset, got {other:?}"),
        }
    }

    #[test]
    fn missing_root_is_rejected() {
        let config = ArrangeConfig {
            dataset_name: "UADFV".into(),
            dataset_root_path: PathBuf::from("/nonexistent/path"),
            output_file_path: PathBuf::from("/nonexistent/out.json"),
            comp: None,
            perturbation: None,
        };
        assert!(matches!(scan_dataset(&config), Err(Error::MissingRoot(_))));
    }

    #[test]
    fn empty_root_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let config = ArrangeConfig {
            dataset_name: "UADFV".into(),
            dataset_root_path: dir.path().to_path_buf(),
            output_file_path: dir.path().join("out.json"),
            comp: None,
            perturbation: None,
        };
        assert!(matches!(scan_dataset(&config), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn ffpp_requires_comp() {
        let dir = tempfile::tempdir().unwrap();
        let config = ArrangeConfig {
            dataset_name: "FaceForensics++".into(),
            dataset_root_path: dir.path().to_path_buf(),
            output_file_path: dir.path().join("out.json"),
            comp: None,
            perturbation: None,
        };
        match scan_dataset(&config) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "comp"),
            other => panic!("expected comp error, got {other:?}"),
        }
    }

    #[test]
    fn name_normalization_accepts_aliases() {
        assert_eq!(normalize_name("FaceForensics++"), "faceforensics");
        assert_eq!(normalize_name("FF++"), "faceforensics");
        assert_eq!(normalize_name("Celeb-DF-v2"), "celebdfv2");
        assert_eq!(normalize_name("DeeperForensics-1.0"), "deeperforensics10");
        assert_eq!(normalize_name("DFD"), "deepfakedetection");
        assert_eq!(normalize_name("dfdc"), "dfdc");
        assert_eq!(normalize_name("dfdcp"), "dfdcp");
    }

    #[test]
    fn yaml_config_rejects_unknown_keys() {
        let text = "dataset_name: UADFV\ndataset_root_path: /x\noutput_file_path: /y\nbogus: 1\n";
        let err = serde_yaml::from_str::<ArrangeConfig>(text).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
