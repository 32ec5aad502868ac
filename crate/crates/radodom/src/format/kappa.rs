//! κ file: `kappa = <value>` plus the calibration's provenance.

use std::path::Path;

use radodom_core::lift::KappaCalibration;

use crate::error::{write_file, Result};
use crate::format::keyvalue::Table;

pub fn save_kappa(cal: &KappaCalibration, path: &Path) -> Result<()> {
    let text = format!(
        "kappa = {}\nsamples = {}\nspeed_threshold = {}\nbackward_fraction = {}\n",
        cal.kappa, cal.sample_count, cal.speed_threshold, cal.backward_fraction
    );
    write_file(path, text.as_bytes())
}

/// Only `kappa` is required; the other fields are informational.
pub fn load_kappa(path: &Path) -> Result<KappaCalibration> {
    let mut t = Table::load(path)?;
    let mut cal = KappaCalibration::fixed(t.require("kappa")?);
    t.set("samples", &mut cal.sample_count)?;
    t.set("speed_threshold", &mut cal.speed_threshold)?;
    t.set("backward_fraction", &mut cal.backward_fraction)?;
    t.finish()?;
    Ok(cal)
}
