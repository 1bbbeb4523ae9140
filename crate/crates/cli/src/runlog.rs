//! Run provenance: the timestamped log sink every worker writes through, and
//! the `run_manifest.json` capturing what produced an output directory.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use dfkit::preprocess::LogSink;
use dfkit::Result;
use serde::Serialize;

/// Append-only log file; one timestamped line per message, serialized
/// through a mutex so parallel workers interleave cleanly.
pub struct FileLog {
    file: Mutex<File>,
}

impl FileLog {
    pub fn create(path: &Path) -> Result<FileLog> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileLog {
            file: Mutex::new(file),
        })
    }
}

impl LogSink for FileLog {
    fn log(&self, message: &str) {
        let stamp = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
        let _ = writeln!(self.file.lock().unwrap(), "{stamp} {message}");
    }
}

/// Everything needed to reproduce a run: the command, tool version, seed,
/// worker count, and the full config snapshot. Only `started_at` and
/// `wall_time_ms` vary between identical reruns.
#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub tool_version: &'a str,
    pub seed: u64,
    pub workers: usize,
    pub config_path: String,
    pub config: serde_json::Value,
    pub started_at: String,
    pub wall_time_ms: u128,
}

pub fn write_run_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(out_dir.join("run_manifest.json"), text)?;
    Ok(())
}
