mod index;
mod report;
mod train;

pub use index::index_build;
pub use report::{eval, kl_diag, sample_trace, schedule_emit};
pub use train::train;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nnrs_core::trainer::TrainConfig;

use crate::failure::{usage, CmdResult, Context};

/// Config file with relative paths resolved, so everything stored from it
/// (manifest, checkpoint) names absolute files.
pub(crate) fn load_config(path: &Path) -> CmdResult<TrainConfig> {
    let path = path
        .canonicalize()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(TrainConfig::from_file(&path)?)
}

/// Buffered writer to `path`, or stdout when `None`.
pub(crate) fn output(path: Option<&PathBuf>) -> CmdResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).or_runtime(format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
