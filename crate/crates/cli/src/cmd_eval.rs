//! `dfkit eval`: score a stored prediction dump into a fixed-width metric
//! table (stdout and `metrics.txt`), a machine-readable `metrics.json`, and
//! per-group ROC/PR curve CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use dfkit::metrics::{aggregate, curves, read_dump, top3_average, GroupBy, MetricReport};
use dfkit::preprocess::LogSink;
use dfkit::Error;
use serde::Deserialize;

use crate::{CliError, CliResult, Ctx, Outcome};

fn half() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub predictions_path: PathBuf,
    pub output_dir_path: PathBuf,
    /// Decision threshold for ACC/precision/recall.
    #[serde(default = "half")]
    pub threshold: f64,
    /// "dataset" (default) or "dataset_checkpoint".
    #[serde(default)]
    pub group_by: Option<String>,
    #[serde(default = "yes")]
    pub export_curves: bool,
}

fn parse_group_by(value: &Option<String>) -> CliResult<GroupBy> {
    match value.as_deref() {
        None | Some("dataset") => Ok(GroupBy::Dataset),
        Some("dataset_checkpoint") => Ok(GroupBy::DatasetCheckpoint),
        Some(other) => Err(CliError::Core(Error::Config {
            key: "group_by".into(),
            message: format!("unknown grouping {other:?} (use dataset or dataset_checkpoint)"),
        })),
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

/// Fixed-width table, one row per group, sorted by dataset then checkpoint.
/// The `auc_top3` column averages the best three checkpoint AUCs of the row's
/// dataset (fewer when fewer exist).
fn render_table(
    reports: &BTreeMap<(String, Option<String>), MetricReport>,
    top3: &BTreeMap<String, Option<f64>>,
) -> String {
    let headers = [
        "dataset", "checkpoint", "acc", "auc", "ap", "eer", "precision", "recall", "auc_top3",
        "n_pos", "n_neg",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|((dataset, checkpoint), rep)| {
            vec![
                dataset.clone(),
                checkpoint.clone().unwrap_or_else(|| "-".into()),
                format!("{:.4}", rep.acc),
                fmt_opt(rep.auc),
                fmt_opt(rep.ap),
                fmt_opt(rep.eer),
                format!("{:.4}", rep.precision),
                format!("{:.4}", rep.recall),
                fmt_opt(top3.get(dataset).copied().flatten()),
                rep.n_pos.to_string(),
                rep.n_neg.to_string(),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render = |cells: &[String]| -> String {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < 2 {
                line.push_str(&format!("{:<width$}", cell, width = widths[i]));
            } else {
                line.push_str(&format!("{:>width$}", cell, width = widths[i]));
            }
        }
        line.trim_end().to_string() + "\n"
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut out = render(&header_cells);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&render(row));
    }
    out
}

fn slug(dataset: &str, checkpoint: &Option<String>) -> String {
    let mut raw = dataset.to_string();
    if let Some(ck) = checkpoint {
        raw.push_str("__");
        raw.push_str(ck);
    }
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<EvalConfig>()?;
    let group_by = parse_group_by(&config.group_by)?;
    let records = read_dump(&config.predictions_path)?;
    let reports = aggregate(&records, group_by, config.threshold);

    // best-three average of defined AUCs per dataset
    let mut aucs_by_dataset: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((dataset, _), rep) in &reports {
        if let Some(auc) = rep.auc {
            aucs_by_dataset.entry(dataset.clone()).or_default().push(auc);
        }
    }
    let top3: BTreeMap<String, Option<f64>> = reports
        .keys()
        .map(|(dataset, _)| {
            let value = aucs_by_dataset
                .get(dataset)
                .map(|aucs| top3_average(aucs))
                .transpose()
                .ok()
                .flatten();
            (dataset.clone(), value)
        })
        .collect();

    let table = render_table(&reports, &top3);
    print!("{table}");

    fs::create_dir_all(&config.output_dir_path).map_err(Error::from)?;
    fs::write(config.output_dir_path.join("metrics.txt"), &table).map_err(Error::from)?;

    let group_rows: Vec<serde_json::Value> = reports
        .iter()
        .map(|((dataset, checkpoint), rep)| {
            serde_json::json!({
                "dataset": dataset,
                "checkpoint": checkpoint,
                "metrics": rep,
                "auc_top3": top3.get(dataset).copied().flatten(),
            })
        })
        .collect();
    let mut json_text = serde_json::to_string_pretty(&serde_json::json!({
        "threshold": config.threshold,
        "groups": group_rows,
    }))
    .map_err(Error::from)?;
    json_text.push('\n');
    fs::write(config.output_dir_path.join("metrics.json"), json_text).map_err(Error::from)?;

    let mut curve_files = 0usize;
    if config.export_curves {
        let curve_dir = config.output_dir_path.join("curves");
        fs::create_dir_all(&curve_dir).map_err(Error::from)?;
        let (rocs, prs) = curves(&records, group_by);
        for ((dataset, checkpoint), series) in &rocs {
            let name = format!("roc_{}.csv", slug(dataset, checkpoint));
            fs::write(curve_dir.join(name), series.to_csv("fpr", "tpr")).map_err(Error::from)?;
            curve_files += 1;
        }
        for ((dataset, checkpoint), series) in &prs {
            let name = format!("pr_{}.csv", slug(dataset, checkpoint));
            fs::write(curve_dir.join(name), series.to_csv("recall", "precision"))
                .map_err(Error::from)?;
            curve_files += 1;
        }
    }

    let log = ctx.open_log(&config.output_dir_path)?;
    log.log(&format!(
        "eval: {} records -> {} groups, {} curve files",
        records.len(),
        reports.len(),
        curve_files
    ));
    ctx.write_run_manifest(&config.output_dir_path, snapshot)?;
    Ok(Outcome::Done)
}
