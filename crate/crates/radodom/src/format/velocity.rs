//! Per-scan velocity trace: CSV `timestamp_s,vx,vy,vz,status`.

use std::path::Path;

use radodom_core::geometry::Vec2;
use radodom_core::lift::BodyVelocity3;
use radodom_core::pipeline::{CoastReason, ScanStatus, VelocityRecord};

use crate::error::{IoError, Location, Result};

const HEADER: [&str; 5] = ["timestamp_s", "vx", "vy", "vz", "status"];

fn status_name(s: ScanStatus) -> &'static str {
    match s {
        ScanStatus::Initialized => "initialized",
        ScanStatus::Registered => "registered",
        ScanStatus::Coasted(CoastReason::Degenerate) => "coasted_degenerate",
        ScanStatus::Coasted(CoastReason::NotConverged) => "coasted_not_converged",
    }
}

fn parse_status(s: &str) -> Option<ScanStatus> {
    Some(match s {
        "initialized" => ScanStatus::Initialized,
        "registered" => ScanStatus::Registered,
        "coasted_degenerate" => ScanStatus::Coasted(CoastReason::Degenerate),
        "coasted_not_converged" => ScanStatus::Coasted(CoastReason::NotConverged),
        _ => return None,
    })
}

pub fn save_velocities(records: &[VelocityRecord], path: &Path) -> Result<()> {
    let io = |e: csv::Error| IoError::format(path, Location::Header, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(HEADER).map_err(io)?;
    for r in records {
        let v = r.velocity.as_vector();
        w.write_record([
            r.timestamp.to_string(),
            v.x.to_string(),
            v.y.to_string(),
            v.z.to_string(),
            status_name(r.status).to_owned(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn load_velocities(path: &Path) -> Result<Vec<VelocityRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::format(path, Location::Header, e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let at = e.position().map_or(Location::Header, |p| Location::Line(p.line() as usize));
            IoError::format(path, at, e.to_string())
        })?;
        let at = Location::Line(rec.position().map_or(0, |p| p.line() as usize));
        let bad = |what: &str| IoError::format(path, at.clone(), format!("invalid {what}"));
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(HEADER[i]));
        let status = rec.get(4).and_then(parse_status).ok_or_else(|| bad("status"))?;
        out.push(VelocityRecord {
            timestamp: num(0)?,
            velocity: BodyVelocity3 { v_xy: Vec2::new(num(1)?, num(2)?), v_z: num(3)? },
            status,
        });
    }
    Ok(out)
}
