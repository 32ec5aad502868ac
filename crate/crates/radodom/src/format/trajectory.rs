//! Trajectory text: one pose per line, `t x y z r00 r01 r02 r10 r11 r12 r20 r21 r22`.
//! Floats are written in shortest round-trip form, so save/load is lossless.

use std::fmt::Write as _;
use std::path::Path;

use radodom_core::geometry::{Mat3, Pose3, Rotation3, Trajectory, Vec3};

use crate::error::{read_text, write_file, IoError, Location, Result};

/// Rotations further than this from SO(3) are rejected on load.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 + 200 * traj.len());
    out.push_str("# timestamp_s x y z r00 r01 r02 r10 r11 r12 r20 r21 r22\n");
    for p in traj.poses() {
        let _ = write!(out, "{}", p.timestamp);
        for x in p.pose.translation.iter() {
            let _ = write!(out, " {x}");
        }
        let m = p.pose.rotation.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let _ = write!(out, " {}", m[(i, j)]);
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_file(path, format_trajectory(traj).as_bytes())
}

pub fn parse_trajectory(path: &Path, text: &str) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = Location::Line(i + 1);
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| IoError::format(path, at.clone(), "non-numeric field"))?;
        if values.len() != 13 {
            return Err(IoError::format(path, at, format!("expected 13 fields, found {}", values.len())));
        }
        let m = Mat3::from_row_slice(&values[4..]);
        let rotation = Rotation3::from_matrix(m, ROTATION_TOLERANCE)
            .map_err(|e| IoError::format(path, at.clone(), e.to_string()))?;
        let pose = Pose3::new(rotation, Vec3::new(values[1], values[2], values[3]));
        traj.push(values[0], pose).map_err(|e| IoError::format(path, at, e.to_string()))?;
    }
    Ok(traj)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(path, &read_text(path)?)
}
