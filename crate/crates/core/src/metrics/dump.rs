//! Reading and writing stored prediction dumps (CSV and JSON-lines).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Jsonl,
}

impl DumpFormat {
    /// Infer from the file extension; `.jsonl`/`.ndjson` are JSON-lines,
    /// anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => DumpFormat::Jsonl,
            _ => DumpFormat::Csv,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    frame_id: String,
    video_id: String,
    dataset: String,
    score: f64,
    label: u8,
    #[serde(default)]
    checkpoint: Option<String>,
}

impl RawRecord {
    fn into_record(self, line: usize) -> Result<PredictionRecord> {
        let rec = PredictionRecord {
            frame_id: self.frame_id,
            video_id: self.video_id,
            dataset: self.dataset,
            score: self.score,
            label: self.label,
            checkpoint: self.checkpoint,
        };
        rec.validate().map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { line, message },
            other => other,
        })?;
        Ok(rec)
    }
}

/// Read a prediction dump, reporting the offending line number on failure.
/// Line numbers are 1-based and, for CSV, count the header.
pub fn read_dump(path: &Path) -> Result<Vec<PredictionRecord>> {
    match DumpFormat::from_path(path) {
        DumpFormat::Csv => read_csv(path),
        DumpFormat::Jsonl => read_jsonl(path),
    }
}

fn read_csv(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (idx, row) in reader.deserialize::<RawRecord>().enumerate() {
        let line = idx + 2; // header occupies line 1
        let raw = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(raw.into_record(line)?);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "dump contains no records".into(),
        });
    }
    Ok(out)
}

fn read_jsonl(path: &Path) -> Result<Vec<PredictionRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(raw.into_record(line_no)?);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "dump contains no records".into(),
        });
    }
    Ok(out)
}

/// Write records as CSV with the canonical header. The checkpoint column is
/// included only when at least one record carries a tag.
pub fn write_csv(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let with_checkpoint = records.iter().any(|r| r.checkpoint.is_some());
    let mut file = File::create(path)?;
    if with_checkpoint {
        writeln!(file, "frame_id,video_id,dataset,score,label,checkpoint")?;
    } else {
        writeln!(file, "frame_id,video_id,dataset,score,label")?;
    }
    for r in records {
        if with_checkpoint {
            writeln!(
                file,
                "{},{},{},{},{},{}",
                r.frame_id,
                r.video_id,
                r.dataset,
                r.score,
                r.label,
                r.checkpoint.as_deref().unwrap_or("")
            )?;
        } else {
            writeln!(
                file,
                "{},{},{},{},{}",
                r.frame_id, r.video_id, r.dataset, r.score, r.label
            )?;
        }
    }
    Ok(())
}
