pub mod convert;
pub mod eval;
pub mod gradcheck;
pub mod monitor;
pub mod predict;
pub mod simulate;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use fallwatch::fallnet::{load_checkpoint, FallNetModel};

use crate::CliError;

pub(crate) fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

pub(crate) fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

pub(crate) fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| {
        CliError::usage(format!(
            "{key} is required (flag --{} or config key {key})",
            key.replace('_', "-")
        ))
    })
}

pub(crate) fn load_model(path: &Path) -> Result<FallNetModel<f32>, CliError> {
    load_checkpoint(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Sets `flag` on Ctrl-C. Only the first call in a process installs a handler.
pub(crate) fn interrupt_on_ctrlc(flag: Arc<AtomicBool>) {
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
}
