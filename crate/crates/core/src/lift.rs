//! Vertical-velocity lift of the planar velocity estimate.
//!
//! A sensor plane tilted by a constant angle relative to the plane of motion
//! sees a planar velocity whose norm is proportional to the vertical sensor
//! velocity. The proportionality constant is calibrated once against ground
//! truth and then applied to every estimate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::registration::PlanarVelocity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyVelocity3 {
    pub v_xy: nalgebra::Vector2<f64>,
    pub v_z: f64,
}

impl BodyVelocity3 {
    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.v_xy.x, self.v_xy.y, self.v_z)
    }
}

/// Default minimum planar speed (m/s) for a sample to enter the calibration.
pub const DEFAULT_SPEED_THRESHOLD: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaCalibration {
    pub kappa: f64,
    pub sample_count: usize,
    pub speed_threshold: f64,
    /// Fraction of qualifying samples with negative forward velocity. The
    /// model assumes forward motion, so a large value flags misuse.
    pub backward_fraction: f64,
}

impl KappaCalibration {
    /// A calibration from a known constant (e.g. loaded from configuration).
    pub fn fixed(kappa: f64) -> Self {
        KappaCalibration { kappa, sample_count: 1, speed_threshold: DEFAULT_SPEED_THRESHOLD, backward_fraction: 0.0 }
    }
}

/// `v_xy = v`, `v_z = kappa * |v|`.
pub fn lift(v: &PlanarVelocity, cal: &KappaCalibration) -> BodyVelocity3 {
    BodyVelocity3 { v_xy: *v.vector(), v_z: cal.kappa * v.speed() }
}

/// Planar and vertical velocity of a sensor tilted by `alpha` whose in-plane
/// velocity estimate has norm `speed_planar`.
pub fn tilt_decompose(alpha: f64, speed_planar: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(alpha);
    (c * c * speed_planar, s * c * speed_planar)
}

/// Velocity estimate at a timestamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedVelocity {
    pub timestamp: f64,
    pub velocity: PlanarVelocity,
}

/// Ground-truth vertical velocity at a timestamp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedVz {
    pub timestamp: f64,
    pub v_z: f64,
}

/// Calibrate `kappa` as the mean of `v_z / |v|` over estimates faster than
/// `threshold`, pairing each estimate with the nearest ground-truth sample no
/// more than `max_time_offset` away. Estimates without a match are dropped.
pub fn calibrate_kappa(
    estimated: &[TimedVelocity],
    ground_truth_vz: &[TimedVz],
    threshold: f64,
    max_time_offset: f64,
) -> Result<KappaCalibration> {
    let mut gt: Vec<TimedVz> = ground_truth_vz.to_vec();
    gt.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut backward = 0usize;
    for e in estimated {
        let speed = e.velocity.speed();
        if !(speed > threshold) {
            continue;
        }
        let Some(vz) = nearest(&gt, e.timestamp, max_time_offset) else {
            continue;
        };
        sum += vz / speed;
        count += 1;
        if e.velocity.vector().x < 0.0 {
            backward += 1;
        }
    }
    if count == 0 {
        return Err(Error::CalibrationFailed(alloc::format!("no time-aligned estimates above {threshold} m/s")));
    }
    let backward_fraction = backward as f64 / count as f64;
    if backward_fraction > 0.05 {
        log::warn!(
            "{:.1}% of calibration samples move backwards; the vertical model assumes forward motion",
            100.0 * backward_fraction
        );
    }
    Ok(KappaCalibration {
        kappa: sum / count as f64,
        sample_count: count,
        speed_threshold: threshold,
        backward_fraction,
    })
}

fn nearest(sorted: &[TimedVz], t: f64, tol: f64) -> Option<f64> {
    let i = sorted.partition_point(|s| s.timestamp < t);
    let mut best: Option<(f64, f64)> = None;
    for j in [i.wrapping_sub(1), i] {
        if let Some(s) = sorted.get(j) {
            let d = (s.timestamp - t).abs();
            if d <= tol && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s.v_z));
            }
        }
    }
    best.map(|(_, v)| v)
}
