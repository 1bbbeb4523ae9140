//! `dfkit arrange`: raw dataset tree in, unified manifest JSON out.

use std::path::Path;

use dfkit::manifest::{arrange_dataset, ArrangeConfig};
use dfkit::preprocess::LogSink;

use crate::{CliResult, Ctx, Outcome};

pub fn run(ctx: &Ctx) -> CliResult<Outcome> {
    let (config, snapshot) = ctx.load_config::<ArrangeConfig>()?;
    let manifest = arrange_dataset(&config)?;

    let out_dir = config
        .output_file_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let log = ctx.open_log(&out_dir)?;
    log.log(&format!(
        "arrange {}: {} records -> {}",
        config.dataset_name,
        manifest.videos.len(),
        config.output_file_path.display()
    ));
    println!(
        "wrote {} ({} video records)",
        config.output_file_path.display(),
        manifest.videos.len()
    );
    ctx.write_run_manifest(&out_dir, snapshot)?;
    Ok(Outcome::Done)
}
