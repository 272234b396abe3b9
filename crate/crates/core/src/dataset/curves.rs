use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::fallnet::EpochStats;

pub const CURVE_HEADER: &str = "epoch,loss,accuracy,val_loss,val_accuracy";

/// CSV text: header then one row per epoch, floats to six decimals, LF endings.
pub fn format_curves(stats: &[EpochStats]) -> String {
    let mut out = String::with_capacity(48 * (stats.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for s in stats {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            s.epoch, s.train_loss, s.train_accuracy, s.val_loss, s.val_accuracy
        );
    }
    out
}

pub fn export_curves(stats: &[EpochStats], path: impl AsRef<Path>) -> io::Result<()> {
    if stats.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "no epoch statistics to export",
        ));
    }
    fs::write(path, format_curves(stats))
}
