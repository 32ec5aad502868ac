//! Gyro stream: CSV with header `timestamp_s,wx,wy,wz` (rad/s, radar frame).

use std::path::Path;

use radodom_core::geometry::{GyroSample, Vec3};

use crate::error::{IoError, Location, Result};

pub const GYRO_HEADER: [&str; 4] = ["timestamp_s", "wx", "wy", "wz"];

pub fn save_gyro(samples: &[GyroSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(GYRO_HEADER).map_err(|e| csv_error(path, e))?;
    for s in samples {
        let r = &s.rate;
        w.write_record([s.timestamp, r.x, r.y, r.z].map(|x| x.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn load_gyro(path: &Path) -> Result<Vec<GyroSample>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(GYRO_HEADER) {
        return Err(IoError::format(path, Location::Line(1), format!("expected header `{}`", GYRO_HEADER.join(","))));
    }
    let mut out: Vec<GyroSample> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 4];
        for (slot, (field, name)) in v.iter_mut().zip(record.iter().zip(GYRO_HEADER)) {
            *slot = field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                IoError::format(path, Location::Line(line), format!("{name}: not a number: `{field}`"))
            })?;
        }
        if out.last().is_some_and(|p| v[0] <= p.timestamp) {
            return Err(IoError::format(path, Location::Line(line), "timestamps not increasing"));
        }
        out.push(GyroSample::new(v[0], Vec3::new(v[1], v[2], v[3])));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::io(path, io),
        kind => {
            let message = match kind {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                other => format!("{other:?}"),
            };
            IoError::format(path, line.map_or(Location::Header, Location::Line), message)
        }
    }
}
