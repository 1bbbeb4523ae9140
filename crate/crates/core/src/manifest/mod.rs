//! Unified dataset manifests: one canonical JSON file per dataset describing
//! videos, labels, splits, and artifact paths.
//!
//! The file groups records hierarchically (split → label → sorted videos), so
//! two splits holding the same videos serialize to byte-identical subtrees.
//! All paths are stored relative to the dataset root, making manifests
//! relocatable.

mod arrange;

pub use arrange::{arrange_dataset, scan_dataset, ArrangeConfig, SUPPORTED_DATASETS};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Real => "real",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Splits ordered alphabetically by name so derived ordering matches the
/// canonical JSON key order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Test,
    Train,
    Validation,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Test, Split::Train, Split::Validation];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Test => "test",
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    Raw,
    C23,
    C40,
}

impl Compression {
    pub fn as_str(self) -> &'static str {
        match self {
            Compression::Raw => "raw",
            Compression::C23 => "c23",
            Compression::C40 => "c40",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "raw" => Ok(Compression::Raw),
            "c23" => Ok(Compression::C23),
            "c40" => Ok(Compression::C40),
            other => Err(Error::Config {
                key: "comp".into(),
                message: format!("unknown compression level {other:?} (use raw, c23, or c40)"),
            }),
        }
    }
}

/// One video's entry: artifact paths relative to the dataset root, plus
/// labeling metadata. Paths use forward slashes on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    pub video_id: String,
    pub label: Label,
    pub split: Split,
    pub frame_paths: Vec<String>,
    pub landmark_paths: Option<Vec<String>>,
    pub mask_paths: Option<Vec<String>>,
    pub compression: Option<Compression>,
    /// Manipulation method or perturbation name, for fake videos that have one.
    pub method: Option<String>,
}

impl VideoRecord {
    fn sort_key(&self) -> (&'static str, &'static str, &str) {
        (self.label.as_str(), self.split.as_str(), &self.video_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub schema_version: u32,
    pub videos: Vec<VideoRecord>,
}

/// On-disk record shape: split and label are implied by the record's position
/// in the hierarchy, so they are not repeated per record. Field order is the
/// canonical (alphabetical) key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FileRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    compression: Option<Compression>,
    frame_paths: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    landmark_paths: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask_paths: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    video_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileManifest {
    dataset_name: String,
    schema_version: u32,
    splits: BTreeMap<String, BTreeMap<String, Vec<FileRecord>>>,
}

fn to_file_record(record: &VideoRecord) -> FileRecord {
    FileRecord {
        compression: record.compression,
        frame_paths: record.frame_paths.clone(),
        landmark_paths: record.landmark_paths.clone(),
        mask_paths: record.mask_paths.clone(),
        method: record.method.clone(),
        video_id: record.video_id.clone(),
    }
}

fn split_tree(manifest: &DatasetManifest) -> BTreeMap<String, BTreeMap<String, Vec<FileRecord>>> {
    let mut splits: BTreeMap<String, BTreeMap<String, Vec<FileRecord>>> = BTreeMap::new();
    for split in Split::ALL {
        splits.insert(split.as_str().to_string(), BTreeMap::new());
    }
    for video in &manifest.videos {
        splits
            .get_mut(video.split.as_str())
            .unwrap()
            .entry(video.label.as_str().to_string())
            .or_default()
            .push(to_file_record(video));
    }
    for labels in splits.values_mut() {
        for records in labels.values_mut() {
            records.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        }
    }
    splits
}

/// Canonical serialization: sorted keys, sorted records, two-space indent,
/// trailing newline. Byte-stable for equal content.
pub fn to_canonical_json(manifest: &DatasetManifest) -> String {
    let file = FileManifest {
        dataset_name: manifest.dataset_name.clone(),
        schema_version: manifest.schema_version,
        splits: split_tree(manifest),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("manifest serialization");
    text.push('\n');
    text
}

/// Canonical serialization of one split's subtree (label → records). Two
/// splits holding the same videos produce byte-identical output.
pub fn split_subtree_json(manifest: &DatasetManifest, split: Split) -> String {
    let tree = split_tree(manifest);
    let mut text =
        serde_json::to_string_pretty(&tree[split.as_str()]).expect("manifest serialization");
    text.push('\n');
    text
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let file: FileManifest = serde_json::from_str(text)?;
    let mut videos = Vec::new();
    for (split_name, labels) in &file.splits {
        let split = match split_name.as_str() {
            "test" => Split::Test,
            "train" => Split::Train,
            "validation" => Split::Validation,
            other => {
                return Err(Error::Config {
                    key: "splits".into(),
                    message: format!("unknown split {other:?}"),
                })
            }
        };
        for (label_name, records) in labels {
            let label = match label_name.as_str() {
                "real" => Label::Real,
                "fake" => Label::Fake,
                other => {
                    return Err(Error::Config {
                        key: "splits".into(),
                        message: format!("unknown label {other:?}"),
                    })
                }
            };
            for rec in records {
                videos.push(VideoRecord {
                    video_id: rec.video_id.clone(),
                    label,
                    split,
                    frame_paths: rec.frame_paths.clone(),
                    landmark_paths: rec.landmark_paths.clone(),
                    mask_paths: rec.mask_paths.clone(),
                    compression: rec.compression,
                    method: rec.method.clone(),
                });
            }
        }
    }
    videos.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(DatasetManifest {
        dataset_name: file.dataset_name,
        schema_version: file.schema_version,
        videos,
    })
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_canonical_json(manifest))?;
    Ok(())
}

/// A single problem found by [`validate_manifest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    MissingFile {
        video_id: String,
        path: String,
    },
    LengthMismatch {
        video_id: String,
        kind: String,
        frames: usize,
        got: usize,
    },
    DuplicateEntry {
        video_id: String,
        split: Split,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check manifest invariants against the filesystem. Problems become report
/// entries; the call itself does not fail.
pub fn validate_manifest(manifest: &DatasetManifest, root: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: std::collections::BTreeSet<(&str, Split)> = std::collections::BTreeSet::new();
    for video in &manifest.videos {
        if !seen.insert((&video.video_id, video.split)) {
            report.issues.push(ValidationIssue::DuplicateEntry {
                video_id: video.video_id.clone(),
                split: video.split,
            });
        }
        let frames = video.frame_paths.len();
        for (kind, list) in [
            ("landmark_paths", &video.landmark_paths),
            ("mask_paths", &video.mask_paths),
        ] {
            if let Some(list) = list {
                if list.len() != frames {
                    report.issues.push(ValidationIssue::LengthMismatch {
                        video_id: video.video_id.clone(),
                        kind: kind.into(),
                        frames,
                        got: list.len(),
                    });
                }
            }
        }
        let all_paths = video
            .frame_paths
            .iter()
            .chain(video.landmark_paths.iter().flatten())
            .chain(video.mask_paths.iter().flatten());
        for rel in all_paths {
            if !root.join(rel).exists() {
                report.issues.push(ValidationIssue::MissingFile {
                    video_id: video.video_id.clone(),
                    path: rel.clone(),
                });
            }
        }
    }
    report
}

/// Records in `split`, optionally narrowed to one label, sorted by video_id.
pub fn query_split(
    manifest: &DatasetManifest,
    split: Split,
    label_filter: Option<Label>,
) -> Vec<&VideoRecord> {
    let mut out: Vec<&VideoRecord> = manifest
        .videos
        .iter()
        .filter(|v| v.split == split && label_filter.is_none_or(|l| v.label == l))
        .collect();
    out.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, label: Label, split: Split) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            label,
            split,
            frame_paths: vec![format!("{id}/frames/0000.png")],
            landmark_paths: None,
            mask_paths: None,
            compression: None,
            method: None,
        }
    }

    fn toy_manifest() -> DatasetManifest {
        DatasetManifest {
            dataset_name: "toy".into(),
            schema_version: SCHEMA_VERSION,
            videos: vec![
                record("a", Label::Real, Split::Train),
                record("a", Label::Real, Split::Test),
                record("b", Label::Fake, Split::Train),
                record("b", Label::Fake, Split::Validation),
            ],
        }
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let manifest = toy_manifest();
        let first = to_canonical_json(&manifest);
        let reparsed = parse_manifest(&first).unwrap();
        assert_eq!(to_canonical_json(&reparsed), first);
        assert_eq!(reparsed.dataset_name, "toy");
        assert_eq!(reparsed.videos.len(), 4);
    }

    #[test]
    fn serialization_ignores_input_order() {
        let mut shuffled = toy_manifest();
        shuffled.videos.reverse();
        assert_eq!(to_canonical_json(&shuffled), to_canonical_json(&toy_manifest()));
    }

    #[test]
    fn equal_splits_serialize_identically() {
        let mut manifest = toy_manifest();
        manifest.videos = vec![
            record("x", Label::Real, Split::Test),
            record("x", Label::Real, Split::Validation),
            record("y", Label::Fake, Split::Test),
            record("y", Label::Fake, Split::Validation),
        ];
        assert_eq!(
            split_subtree_json(&manifest, Split::Test),
            split_subtree_json(&manifest, Split::Validation)
        );
        assert_ne!(
            split_subtree_json(&manifest, Split::Test),
            split_subtree_json(&manifest, Split::Train)
        );
    }

    #[test]
    fn query_split_filters_and_partitions() {
        let manifest = toy_manifest();
        let train = query_split(&manifest, Split::Train, None);
        assert_eq!(train.len(), 2);
        assert_eq!(train[0].video_id, "a"); // sorted
        assert!(query_split(&manifest, Split::Validation, Some(Label::Real)).is_empty());
        let total: usize = Split::ALL
            .iter()
            .map(|&s| query_split(&manifest, s, None).len())
            .sum();
        assert_eq!(total, manifest.videos.len());
    }

    #[test]
    fn validate_flags_each_issue_kind() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("a/frames")).unwrap();
        std::fs::write(root.join("a/frames/0000.png"), b"x").unwrap();

        let mut manifest = toy_manifest();
        manifest.videos = vec![record("a", Label::Real, Split::Train)];
        assert!(validate_manifest(&manifest, root).is_clean());

        // missing file
        manifest.videos[0].frame_paths.push("a/frames/0001.png".into());
        let report = validate_manifest(&manifest, root);
        assert_eq!(report.issues.len(), 1);
        assert!(matches!(report.issues[0], ValidationIssue::MissingFile { .. }));

        // length mismatch (landmarks shorter than frames)
        manifest.videos[0].frame_paths.pop();
        manifest.videos[0].landmark_paths = Some(vec![]);
        let report = validate_manifest(&manifest, root);
        assert_eq!(report.issues.len(), 1);
        assert!(matches!(
            report.issues[0],
            ValidationIssue::LengthMismatch { .. }
        ));

        // duplicate (video_id, split)
        manifest.videos[0].landmark_paths = None;
        let dup = manifest.videos[0].clone();
        manifest.videos.push(dup);
        let report = validate_manifest(&manifest, root);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::DuplicateEntry { .. })));
    }

    #[test]
    fn parse_rejects_unknown_split() {
        let text = r#"{"dataset_name":"t","schema_version":1,"splits":{"weird":{}}}"#;
        assert!(parse_manifest(text).is_err());
    }
}
