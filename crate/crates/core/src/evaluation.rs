//! KITTI-style relative odometry error and the planar projection of SE(3)
//! trajectories.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::{Pose3, Rotation3, StampedPose, Trajectory, Vec3};

/// Segment lengths (m) of the standard KITTI protocol.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthError {
    pub length: f64,
    /// Percent.
    pub translation_error: f64,
    /// Degrees per 100 m.
    pub rotation_error: f64,
    pub segments: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdometryErrorReport {
    /// Mean over all evaluated segments, in percent.
    pub translation_error: f64,
    /// Mean over all evaluated segments, in degrees per 100 m.
    pub rotation_error: f64,
    pub per_length: Vec<LengthError>,
    pub segments: usize,
    /// Set when nothing could be evaluated.
    pub diagnostic: Option<String>,
}

impl OdometryErrorReport {
    fn empty(diagnostic: String) -> Self {
        OdometryErrorReport {
            translation_error: 0.0,
            rotation_error: 0.0,
            per_length: Vec::new(),
            segments: 0,
            diagnostic: Some(diagnostic),
        }
    }
}

/// `translation% / deg-per-100m` with two decimals.
impl fmt::Display for OdometryErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} / {:.2}", self.translation_error, self.rotation_error)
    }
}

/// Cumulative arc length along the poses.
fn arc_lengths(poses: &[Pose3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(poses.len());
    let mut d = 0.0;
    for (k, p) in poses.iter().enumerate() {
        if k > 0 {
            d += (p.translation - poses[k - 1].translation).norm();
        }
        out.push(d);
    }
    out
}

/// `(translation error / L, rotation angle / L)` of one segment, where the
/// error is `dg^-1 de` for the gt and estimated relative poses.
fn segment_error(gt: &[Pose3], est: &[Pose3], i: usize, j: usize, length: f64) -> (f64, f64) {
    let dg = gt[i].inverse().compose(&gt[j]);
    let de = est[i].inverse().compose(&est[j]);
    let (t, r) = pose_discrepancy(&dg, &de);
    (t / length, r / length)
}

/// Translation norm and rotation angle of `a^-1 b`, computed without forming
/// the product: `|R_a^T (t_b - t_a)| = |t_b - t_a|`, and the angle comes from
/// the chord `|R_b - R_a|_F = 2 sqrt(2) sin(theta / 2)`. Both are exactly zero
/// for identical poses and well conditioned for small errors.
pub fn pose_discrepancy(a: &Pose3, b: &Pose3) -> (f64, f64) {
    let chord = (b.rotation.matrix() - a.rotation.matrix()).norm();
    let half = (chord / (2.0 * core::f64::consts::SQRT_2)).min(1.0);
    ((b.translation - a.translation).norm(), 2.0 * libm::asin(half))
}

/// Ground-truth poses paired with the estimate interpolated at the same
/// timestamps; gt samples outside the estimate's span are dropped.
fn align(gt: &Trajectory, est: &Trajectory) -> (Vec<Pose3>, Vec<Pose3>) {
    let mut g = Vec::with_capacity(gt.len());
    let mut e = Vec::with_capacity(gt.len());
    for p in gt.poses() {
        if let Some(q) = est.pose_at(p.timestamp) {
            g.push(p.pose);
            e.push(q);
        }
    }
    (g, e)
}

/// Relative-pose error over segments of fixed ground-truth arc length.
///
/// For every ground-truth frame and every length `L`, the segment ends at the
/// first frame at least `L` meters further along the path. Errors are the
/// translation norm and rotation angle of the discrepancy between the two
/// relative poses divided by `L`, averaged over all segments.
pub fn kitti_error(gt: &Trajectory, est: &Trajectory, lengths: &[f64]) -> OdometryErrorReport {
    let (g, e) = align(gt, est);
    let dist = arc_lengths(&g);
    let Some(&shortest) = lengths.iter().min_by(|a, b| a.total_cmp(b)) else {
        return OdometryErrorReport::empty("no segment lengths given".into());
    };
    let total = dist.last().copied().unwrap_or(0.0);
    if g.len() < 2 || total <= shortest {
        return OdometryErrorReport::empty(alloc::format!(
            "overlapping ground truth spans {total:.1} m, shorter than the {shortest:.1} m segment"
        ));
    }
    let mut per_length = Vec::with_capacity(lengths.len());
    let (mut t_sum, mut r_sum, mut count) = (0.0, 0.0, 0usize);
    for &length in lengths {
        let (mut t_l, mut r_l, mut n_l) = (0.0, 0.0, 0usize);
        let mut j = 0;
        for i in 0..g.len() {
            // Segment ends move forward monotonically with the start frame.
            j = j.max(i);
            while j < g.len() && dist[j] < dist[i] + length {
                j += 1;
            }
            if j == g.len() {
                break;
            }
            let (t, r) = segment_error(&g, &e, i, j, length);
            t_l += t;
            r_l += r;
            n_l += 1;
            t_sum += t;
            r_sum += r;
            count += 1;
        }
        per_length.push(if n_l > 0 {
            LengthError {
                length,
                translation_error: 100.0 * t_l / n_l as f64,
                rotation_error: to_deg_per_100m(r_l / n_l as f64),
                segments: n_l,
            }
        } else {
            LengthError { length, translation_error: 0.0, rotation_error: 0.0, segments: 0 }
        });
    }
    if count == 0 {
        return OdometryErrorReport::empty("no complete segment".into());
    }
    OdometryErrorReport {
        translation_error: 100.0 * t_sum / count as f64,
        rotation_error: to_deg_per_100m(r_sum / count as f64),
        per_length,
        segments: count,
        diagnostic: None,
    }
}

fn to_deg_per_100m(rad_per_m: f64) -> f64 {
    rad_per_m.to_degrees() * 100.0
}

/// `(yaw, pitch, roll)` with `R = Rz(yaw) Ry(pitch) Rx(roll)`, or `None`
/// within 1e-6 rad of gimbal lock.
pub fn euler_zyx(r: &Rotation3) -> Option<(f64, f64, f64)> {
    let m = r.matrix();
    let pitch = libm::asin((-m[(2, 0)]).clamp(-1.0, 1.0));
    if (core::f64::consts::FRAC_PI_2 - pitch.abs()) < 1e-6 {
        return None;
    }
    let yaw = libm::atan2(m[(1, 0)], m[(0, 0)]);
    let roll = libm::atan2(m[(2, 1)], m[(2, 2)]);
    Some((yaw, pitch, roll))
}

/// Drop the vertical translation and the roll and pitch of every pose.
pub fn project_se2(traj: &Trajectory) -> Result<Trajectory> {
    let mut poses = Vec::with_capacity(traj.len());
    for p in traj.poses() {
        let (yaw, _, _) = euler_zyx(&p.pose.rotation).ok_or(Error::GimbalLock { timestamp: p.timestamp })?;
        let t = p.pose.translation;
        poses.push(StampedPose {
            timestamp: p.timestamp,
            pose: Pose3::new(Rotation3::about_z(yaw), Vec3::new(t.x, t.y, 0.0)),
        });
    }
    Trajectory::from_poses(poses)
}
