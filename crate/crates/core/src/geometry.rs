//! Rotation and rigid-motion primitives in 2D and 3D, plus the gyroscope
//! integration rules used by the motion model.
//!
//! Rotations are kept as matrices. Planar motion within one radar sweep is
//! integrated with the trapezoidal rule on the yaw rate; the translation is
//! accumulated per gyro subinterval using the rotation at the midpoint angle.

use alloc::vec::Vec;
use core::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3};

use crate::error::{invalid, Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle `exp_so3` switches to the second-order Taylor series.
const SMALL_ANGLE: f64 = 1e-8;

/// Planar rotation stored as its cosine/sine pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation2 {
    cos: f64,
    sin: f64,
}

impl Rotation2 {
    pub const IDENTITY: Rotation2 = Rotation2 { cos: 1.0, sin: 0.0 };

    /// Rotation by `theta` radians. No finiteness check; see [`exp_so2`].
    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        let (sin, cos) = libm::sincos(theta);
        Rotation2 { cos, sin }
    }

    #[inline]
    pub fn cos(&self) -> f64 {
        self.cos
    }

    #[inline]
    pub fn sin(&self) -> f64 {
        self.sin
    }

    pub fn angle(&self) -> f64 {
        libm::atan2(self.sin, self.cos)
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.cos, -self.sin, self.sin, self.cos)
    }

    #[inline]
    pub fn rotate(&self, v: &Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }

    pub fn inverse(&self) -> Self {
        Rotation2 { cos: self.cos, sin: -self.sin }
    }
}

impl Mul for Rotation2 {
    type Output = Rotation2;
    fn mul(self, rhs: Rotation2) -> Rotation2 {
        Rotation2 { cos: self.cos * rhs.cos - self.sin * rhs.sin, sin: self.sin * rhs.cos + self.cos * rhs.sin }
    }
}

/// Exponential map from so(2) to SO(2).
pub fn exp_so2(theta: f64) -> Result<Rotation2> {
    if !theta.is_finite() {
        return Err(invalid("exp_so2: non-finite angle"));
    }
    Ok(Rotation2::from_angle(theta))
}

/// A 3D rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3 {
    m: Mat3,
}

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3 { m: Mat3::identity() }
    }

    /// Wrap a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation3 { m }
    }

    /// Wrap a matrix, rejecting anything further than `tol` from SO(3).
    pub fn from_matrix(m: Mat3, tol: f64) -> Result<Self> {
        let r = Rotation3 { m };
        if !m.iter().all(|x| x.is_finite()) || r.orthonormality_error() > tol {
            return Err(invalid("rotation matrix is not orthonormal"));
        }
        if (m.determinant() - 1.0).abs() > tol {
            return Err(invalid("rotation matrix has determinant != 1"));
        }
        Ok(r)
    }

    pub fn about_z(theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Rotation3 { m: Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0) }
    }

    pub fn about_y(theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Rotation3 { m: Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c) }
    }

    pub fn about_x(theta: f64) -> Self {
        let (s, c) = libm::sincos(theta);
        Rotation3 { m: Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c) }
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Self {
        Rotation3::about_z(yaw) * Rotation3::about_y(pitch) * Rotation3::about_x(roll)
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    #[inline]
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.m * v
    }

    pub fn inverse(&self) -> Self {
        Rotation3 { m: self.m.transpose() }
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        // atan2 of (sin, cos) stays accurate near 0 and pi, where acos of
        // the trace alone loses half the digits.
        let m = &self.m;
        let s = 0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
        libm::atan2(s, (m.trace() - 1.0) * 0.5)
    }

    /// Max-abs entry of `R Rᵀ - I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.m * self.m.transpose() - Mat3::identity()).abs().max()
    }

    /// Nearest rotation in the Frobenius sense, via Newton iteration on the
    /// polar factor. Intended for matrices already close to SO(3).
    pub fn orthonormalized(&self) -> Self {
        let mut m = self.m;
        for _ in 0..4 {
            let Some(inv) = m.try_inverse() else { break };
            m = (m + inv.transpose()) * 0.5;
        }
        Rotation3 { m }
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3 { m: self.m * rhs.m }
    }
}

#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map from so(3) to SO(3) (Rodrigues' formula).
pub fn exp_so3(omega: &Vec3) -> Result<Rotation3> {
    if !omega.iter().all(|x| x.is_finite()) {
        return Err(invalid("exp_so3: non-finite rotation vector"));
    }
    Ok(exp_so3_unchecked(omega))
}

pub(crate) fn exp_so3_unchecked(omega: &Vec3) -> Rotation3 {
    let theta2 = omega.norm_squared();
    let theta = libm::sqrt(theta2);
    let k = skew(omega);
    let k2 = k * k;
    let m = if theta < SMALL_ANGLE {
        Mat3::identity() + k + k2 * 0.5
    } else {
        let (s, c) = libm::sincos(theta);
        Mat3::identity() + k * (s / theta) + k2 * ((1.0 - c) / theta2)
    };
    Rotation3 { m }
}

/// Logarithm map SO(3) -> so(3); returns the rotation vector.
pub fn log_so3(r: &Rotation3) -> Vec3 {
    let m = r.matrix();
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = libm::acos(cos_theta);
    let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    if theta < 1e-6 {
        return w * 0.5;
    }
    if core::f64::consts::PI - theta > 1e-4 {
        return w * (theta / (2.0 * libm::sin(theta)));
    }
    // Near pi: axis from the symmetric part, sign from the skew part.
    let b = (m + m.transpose()) * 0.5 - Mat3::identity() * cos_theta;
    let mut best = 0;
    for i in 1..3 {
        if b[(i, i)] > b[(best, best)] {
            best = i;
        }
    }
    let mut axis: Vec3 = b.column(best).into();
    let n = axis.norm();
    if n == 0.0 {
        return Vec3::zeros();
    }
    axis /= n;
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// SE(2) pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub rotation: Rotation2,
    pub translation: Vec2,
}

impl Pose2 {
    pub fn identity() -> Self {
        Pose2 { rotation: Rotation2::IDENTITY, translation: Vec2::zeros() }
    }

    pub fn new(theta: f64, translation: Vec2) -> Self {
        Pose2 { rotation: Rotation2::from_angle(theta), translation }
    }

    pub fn compose(&self, rhs: &Pose2) -> Pose2 {
        Pose2 {
            rotation: self.rotation * rhs.rotation,
            translation: self.translation + self.rotation.rotate(&rhs.translation),
        }
    }

    pub fn inverse(&self) -> Pose2 {
        let r = self.rotation.inverse();
        Pose2 { rotation: r, translation: -r.rotate(&self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec2) -> Vec2 {
        self.rotation.rotate(p) + self.translation
    }
}

/// SE(3) pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose3 {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl Pose3 {
    pub fn identity() -> Self {
        Pose3 { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Pose3 { rotation, translation }
    }

    pub fn compose(&self, rhs: &Pose3) -> Pose3 {
        Pose3 {
            rotation: self.rotation * rhs.rotation,
            translation: self.translation + self.rotation.rotate(&rhs.translation),
        }
    }

    pub fn inverse(&self) -> Pose3 {
        let r = self.rotation.inverse();
        Pose3 { rotation: r, translation: -r.rotate(&self.translation) }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }

    /// Interpolate between two poses: linear on translation, shortest arc on
    /// rotation.
    pub fn interpolate(&self, other: &Pose3, s: f64) -> Pose3 {
        let delta = self.rotation.inverse() * other.rotation;
        let w = log_so3(&delta);
        Pose3 {
            rotation: self.rotation * exp_so3_unchecked(&(w * s)),
            translation: self.translation + (other.translation - self.translation) * s,
        }
    }
}

/// One gyroscope measurement, already expressed in the radar frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroSample {
    pub timestamp: f64,
    pub rate: Vec3,
}

impl GyroSample {
    pub fn new(timestamp: f64, rate: Vec3) -> Self {
        GyroSample { timestamp, rate }
    }
}

/// Index of the last sample with `timestamp <= t`, if the stream brackets
/// `[t0, t1]`.
fn bracket(samples: &[GyroSample], t0: f64, t1: f64) -> Result<usize> {
    let missing = Error::MissingData { from: t0, to: t1 };
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(missing);
    };
    if first.timestamp > t0 {
        return Err(Error::MissingData { from: t0, to: first.timestamp.min(t1) });
    }
    if last.timestamp < t1 {
        return Err(Error::MissingData { from: last.timestamp.max(t0), to: t1 });
    }
    let i = samples.partition_point(|s| s.timestamp <= t0);
    Ok(i.saturating_sub(1))
}

/// Linearly interpolated yaw rate at `t`, where `samples[i].timestamp <= t`.
#[inline]
fn yaw_rate_at(samples: &[GyroSample], i: usize, t: f64) -> f64 {
    let a = &samples[i];
    match samples.get(i + 1) {
        Some(b) if b.timestamp > a.timestamp => {
            let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
            a.rate.z + (b.rate.z - a.rate.z) * s
        }
        _ => a.rate.z,
    }
}

/// Trapezoidal integral of the yaw (z) rate over `[t0, t1]`.
pub fn integrate_yaw(samples: &[GyroSample], t0: f64, t1: f64) -> Result<f64> {
    if !(t0 <= t1) {
        return Err(invalid("integrate_yaw: t0 > t1"));
    }
    let i = bracket(samples, t0, t1)?;
    if t0 == t1 {
        return Ok(0.0);
    }
    let mut theta = 0.0;
    let mut t_a = t0;
    let mut w_a = yaw_rate_at(samples, i, t0);
    let mut j = i + 1;
    while j < samples.len() && samples[j].timestamp < t1 {
        let s = &samples[j];
        theta += 0.5 * (w_a + s.rate.z) * (s.timestamp - t_a);
        t_a = s.timestamp;
        w_a = s.rate.z;
        j += 1;
    }
    let w_b = yaw_rate_at(samples, j - 1, t1);
    theta += 0.5 * (w_a + w_b) * (t1 - t_a);
    Ok(theta)
}

/// Knot of [`PlanarMotion`]: yaw and the translation basis at one instant.
#[derive(Clone, Copy, Debug)]
struct Knot {
    t: f64,
    rate: f64,
    theta: f64,
    /// Translation for velocity `v` is `[[a, -b], [b, a]] * v`.
    a: f64,
    b: f64,
}

/// Planar motion over one sweep under the constant-body-velocity model.
///
/// Yaw comes from trapezoidal integration of the gyro z rate; translation is
/// linear in the body velocity, so the profile stores the 2x2 basis that maps
/// velocity to displacement at every gyro knot. Poses at arbitrary instants
/// are completed from the preceding knot.
#[derive(Clone, Debug)]
pub struct PlanarMotion {
    knots: Vec<Knot>,
    samples_tail: Vec<GyroSample>,
}

impl PlanarMotion {
    /// Profile anchored at `t0` (identity) and valid up to `t1`.
    pub fn new(samples: &[GyroSample], t0: f64, t1: f64) -> Result<Self> {
        if !(t0 <= t1) {
            return Err(invalid("PlanarMotion: t0 > t1"));
        }
        let i = bracket(samples, t0, t1)?;
        let mut knots = Vec::new();
        let mut k = Knot { t: t0, rate: yaw_rate_at(samples, i, t0), theta: 0.0, a: 0.0, b: 0.0 };
        knots.push(k);
        let mut j = i + 1;
        while j < samples.len() && samples[j].timestamp < t1 {
            k = advance(&k, samples[j].timestamp, samples[j].rate.z);
            knots.push(k);
            j += 1;
        }
        // Keep the samples needed to interpolate rates after each knot.
        let hi = (j + 1).min(samples.len());
        let samples_tail = samples[i..hi].to_vec();
        Ok(PlanarMotion { knots, samples_tail })
    }

    pub fn start_time(&self) -> f64 {
        self.knots[0].t
    }

    /// Yaw angle and translation basis `(theta, a, b)` at `t`.
    pub fn basis_at(&self, t: f64) -> (f64, f64, f64) {
        let idx = self.knots.partition_point(|k| k.t <= t).saturating_sub(1);
        let k = &self.knots[idx];
        if t == k.t {
            return (k.theta, k.a, k.b);
        }
        // Knot `idx` corresponds to tail sample `idx` except for the anchor,
        // which lies between tail samples 0 and 1.
        let si = self.samples_tail.partition_point(|s| s.timestamp <= t).saturating_sub(1);
        let rate = yaw_rate_at(&self.samples_tail, si, t);
        let end = advance(k, t, rate);
        (end.theta, end.a, end.b)
    }

    /// Relative pose at `t` for body velocity `v`.
    pub fn pose_at(&self, t: f64, v: &Vec2) -> Pose2 {
        let (theta, a, b) = self.basis_at(t);
        Pose2 { rotation: Rotation2::from_angle(theta), translation: Vec2::new(a * v.x - b * v.y, b * v.x + a * v.y) }
    }
}

#[inline]
fn advance(k: &Knot, t: f64, rate: f64) -> Knot {
    let dt = t - k.t;
    let theta = k.theta + 0.5 * (k.rate + rate) * dt;
    let mid = 0.5 * (k.theta + theta);
    let (s, c) = libm::sincos(mid);
    Knot { t, rate, theta, a: k.a + c * dt, b: k.b + s * dt }
}

/// Pose at `t` relative to the pose at `t_prev` for a constant planar body
/// velocity, with rotation from the gyro yaw rate.
pub fn se2_pose_at(v: &Vec2, samples: &[GyroSample], t_prev: f64, t: f64) -> Result<Pose2> {
    if !(v.x.is_finite() && v.y.is_finite()) {
        return Err(invalid("se2_pose_at: non-finite velocity"));
    }
    let motion = PlanarMotion::new(samples, t_prev, t)?;
    Ok(motion.pose_at(t, v))
}

/// One step of SE(3) dead reckoning: midpoint gyro rate for the rotation
/// increment, body-frame velocity times `dt` for the translation increment,
/// right-composed onto `prev`.
pub fn integrate_pose3(prev: &Pose3, omega_prev: &Vec3, omega_cur: &Vec3, v3: &Vec3, dt: f64) -> Result<Pose3> {
    if !(dt > 0.0) {
        return Err(invalid("integrate_pose3: dt must be positive"));
    }
    let increment = Pose3 { rotation: exp_so3(&((omega_prev + omega_cur) * (0.5 * dt)))?, translation: v3 * dt };
    Ok(prev.compose(&increment))
}

/// A pose with its timestamp in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose3,
}

/// Time-ordered sequence of SE(3) poses with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    poses: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory::default()
    }

    pub fn from_poses(poses: Vec<StampedPose>) -> Result<Self> {
        let mut t = Trajectory::new();
        for p in poses {
            t.push(p.timestamp, p.pose)?;
        }
        Ok(t)
    }

    /// Append a pose later than every pose already present.
    pub fn push(&mut self, timestamp: f64, pose: Pose3) -> Result<()> {
        if !timestamp.is_finite() {
            return Err(invalid("trajectory: non-finite timestamp"));
        }
        if let Some(last) = self.poses.last() {
            if !(timestamp > last.timestamp) {
                return Err(invalid("trajectory: timestamps must increase strictly"));
            }
        }
        self.poses.push(StampedPose { timestamp, pose });
        Ok(())
    }

    pub fn poses(&self) -> &[StampedPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Pose at `t` interpolated between the neighbouring samples, or `None`
    /// outside the covered interval.
    pub fn pose_at(&self, t: f64) -> Option<Pose3> {
        let first = self.poses.first()?;
        let last = self.poses.last()?;
        if !(t >= first.timestamp && t <= last.timestamp) {
            return None;
        }
        let i = self.poses.partition_point(|p| p.timestamp < t);
        let b = &self.poses[i];
        if b.timestamp == t || i == 0 {
            return Some(b.pose);
        }
        let a = &self.poses[i - 1];
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        Some(a.pose.interpolate(&b.pose, s))
    }

    /// Poses expressed relative to the first pose.
    pub fn relative_to_start(&self) -> Trajectory {
        let Some(first) = self.poses.first() else {
            return Trajectory::new();
        };
        let inv = first.pose.inverse();
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| StampedPose { timestamp: p.timestamp, pose: inv.compose(&p.pose) })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn stream(rate: impl Fn(f64) -> Vec3, t_end: f64, hz: f64) -> Vec<GyroSample> {
        let n = libm::round(t_end * hz) as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 / hz;
                GyroSample::new(t, rate(t))
            })
            .collect()
    }

    #[test]
    fn exp_so2_cases() {
        let r = exp_so2(0.0).unwrap();
        assert_eq!(r, Rotation2::IDENTITY);
        let q = exp_so2(FRAC_PI_2).unwrap().matrix();
        let expected = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        assert!((q - expected).abs().max() < 1e-15);
        let r = exp_so2(1.234).unwrap();
        assert!((r.cos() - 1.234f64.cos()).abs() < 1e-15);
        assert!((r.sin() - 1.234f64.sin()).abs() < 1e-15);
        assert!(exp_so2(f64::NAN).is_err());
        assert!(exp_so2(f64::INFINITY).is_err());
    }

    #[test]
    fn exp_so3_cases() {
        assert_eq!(exp_so3(&Vec3::zeros()).unwrap().matrix(), &Mat3::identity());
        let r = exp_so3(&Vec3::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r.matrix() - expected).abs().max() < 1e-15);
        assert!(exp_so3(&Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        let tiny = exp_so3(&Vec3::new(1e-10, -2e-10, 3e-10)).unwrap();
        assert!(tiny.orthonormality_error() < 1e-15);
    }

    #[test]
    fn exp_log_round_trip() {
        for w in [
            Vec3::new(0.3, -0.2, 0.1),
            Vec3::new(0.0, 0.0, PI - 1e-6),
            Vec3::new(1e-9, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0).normalize() * 3.0,
        ] {
            let back = log_so3(&exp_so3(&w).unwrap());
            assert!((back - w).norm() < 1e-7, "{w:?} -> {back:?}");
        }
    }

    #[test]
    fn integrate_yaw_constant_and_empty() {
        let g = stream(|_| Vec3::new(0.0, 0.0, 0.5), 2.0, 100.0);
        assert!((integrate_yaw(&g, 0.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(integrate_yaw(&g, 0.7, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn integrate_yaw_ramp() {
        let g = stream(|t| Vec3::new(0.0, 0.0, t), 1.0, 100.0);
        assert!((integrate_yaw(&g, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-6);
        // Off-knot endpoints use interpolated rates; exact for a linear rate.
        let v = integrate_yaw(&g, 0.123, 0.789).unwrap();
        let exact = 0.5 * (0.789f64.powi(2) - 0.123f64.powi(2));
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn integrate_yaw_missing_data() {
        let g = stream(|_| Vec3::zeros(), 1.0, 10.0);
        match integrate_yaw(&g, 0.5, 1.5) {
            Err(Error::MissingData { from, to }) => {
                assert_eq!(from, 1.0);
                assert_eq!(to, 1.5);
            }
            other => panic!("{other:?}"),
        }
        assert!(integrate_yaw(&g, -0.1, 0.5).is_err());
        assert!(integrate_yaw(&[], 0.0, 0.0).is_err());
    }

    #[test]
    fn se2_straight_stationary_identity() {
        let g = stream(|_| Vec3::zeros(), 1.0, 100.0);
        let p = se2_pose_at(&Vec2::new(1.0, 0.0), &g, 0.0, 1.0).unwrap();
        assert!((p.translation - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(p.rotation.angle(), 0.0);

        let g = stream(|_| Vec3::new(0.0, 0.0, 0.7), 1.0, 100.0);
        let p = se2_pose_at(&Vec2::zeros(), &g, 0.0, 1.0).unwrap();
        assert_eq!(p.translation, Vec2::zeros());

        let p = se2_pose_at(&Vec2::new(3.0, -1.0), &g, 0.37, 0.37).unwrap();
        assert_eq!(p, Pose2::identity());
    }

    #[test]
    fn se2_constant_arc() {
        let w = 0.8;
        let g = stream(|_| Vec3::new(0.0, 0.0, w), 2.0, 100.0);
        for t in [0.25, 1.0, 1.503] {
            let p = se2_pose_at(&Vec2::new(1.0, 0.0), &g, 0.0, t).unwrap();
            let exact = Vec2::new((w * t).sin() / w, (1.0 - (w * t).cos()) / w);
            assert!((p.translation - exact).norm() < 1e-4);
            assert!((p.rotation.angle() - w * t).abs() < 1e-12);
        }
    }

    #[test]
    fn planar_motion_matches_pointwise_calls() {
        let g = stream(|t| Vec3::new(0.0, 0.0, 0.3 * (3.0 * t).sin()), 1.0, 100.0);
        let v = Vec2::new(7.0, -0.4);
        let profile = PlanarMotion::new(&g, 0.0123, 0.9).unwrap();
        for &t in &[0.0123, 0.02, 0.5, 0.555, 0.9] {
            let a = profile.pose_at(t, &v);
            let b = se2_pose_at(&v, &g, 0.0123, t).unwrap();
            assert!((a.translation - b.translation).norm() < 1e-14);
            assert!((a.rotation.angle() - b.rotation.angle()).abs() < 1e-14);
            let yaw = integrate_yaw(&g, 0.0123, t).unwrap();
            assert!((a.rotation.angle() - yaw).abs() < 1e-14);
        }
    }

    #[test]
    fn integrate_pose3_cases() {
        let p = integrate_pose3(&Pose3::identity(), &Vec3::zeros(), &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), 0.25)
            .unwrap();
        assert!((p.translation - Vec3::new(0.25, 0.0, 0.0)).norm() < 1e-15);

        let prev = Pose3::new(Rotation3::about_z(FRAC_PI_2), Vec3::new(1.0, 2.0, 3.0));
        let p = integrate_pose3(&prev, &Vec3::zeros(), &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0), 0.25).unwrap();
        assert!((p.translation - Vec3::new(1.0, 2.25, 3.0)).norm() < 1e-15);

        let mut pose = Pose3::identity();
        let w = Vec3::new(0.0, 0.0, 1.0);
        for _ in 0..100 {
            pose = integrate_pose3(&pose, &w, &w, &Vec3::zeros(), 0.01).unwrap();
        }
        let yaw = libm::atan2(pose.rotation.matrix()[(1, 0)], pose.rotation.matrix()[(0, 0)]);
        assert!((yaw - 1.0).abs() < 1e-8);

        assert!(integrate_pose3(&pose, &w, &w, &Vec3::zeros(), 0.0).is_err());
        assert!(integrate_pose3(&pose, &w, &w, &Vec3::zeros(), -1.0).is_err());
    }

    #[test]
    fn integrate_pose3_uses_mean_rate() {
        let w0 = Vec3::new(0.1, -0.3, 0.2);
        let w1 = Vec3::new(0.5, 0.2, -0.1);
        let v = Vec3::new(2.0, 0.5, 0.1);
        let prev = Pose3::new(Rotation3::from_euler_zyx(0.3, 0.1, -0.2), Vec3::new(4.0, 5.0, 6.0));
        let dt = 0.01;
        let got = integrate_pose3(&prev, &w0, &w1, &v, dt).unwrap();
        // Hand-composed homogeneous product.
        let phi = (w0 + w1) / 2.0 * dt;
        let th = phi.norm();
        let k = skew(&(phi / th));
        let r = Mat3::identity() + k * th.sin() + k * k * (1.0 - th.cos());
        let mut inc = Matrix4::identity();
        inc.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        inc.fixed_view_mut::<3, 1>(0, 3).copy_from(&(v * dt));
        let expected = prev.to_homogeneous() * inc;
        assert!((got.to_homogeneous() - expected).abs().max() < 1e-13);
    }

    #[test]
    fn trapezoidal_rotation_is_second_order() {
        // Time-varying, non-commuting rate: rotation error shrinks as dt^2.
        let rate = |t: f64| Vec3::new(0.4 * (2.0 * t).sin(), 0.3 * (1.0 + t * t), 0.8 * (3.0 * t).cos());
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut pose = Pose3::identity();
            for k in 0..n {
                let t0 = k as f64 * dt;
                pose = integrate_pose3(&pose, &rate(t0), &rate(t0 + dt), &Vec3::new(1.0, 0.0, 0.0), dt).unwrap();
            }
            pose.rotation
        };
        let (a, b, c) = (run(25), run(50), run(100));
        let d1 = (a.inverse() * b).angle();
        let d2 = (b.inverse() * c).angle();
        let ratio = d1 / d2;
        assert!((ratio - 4.0).abs() < 0.8, "halving ratio {ratio}");
    }

    #[test]
    fn pure_yaw_chain_matches_closed_form() {
        let w = 0.6;
        let v = Vec3::new(3.0, 0.2, 0.0);
        let dt = 0.01;
        let n = 100;
        let mut pose = Pose3::identity();
        let omega = Vec3::new(0.0, 0.0, w);
        for _ in 0..n {
            pose = integrate_pose3(&pose, &omega, &omega, &v, dt).unwrap();
        }
        let single = exp_so3(&(omega * (n as f64 * dt))).unwrap();
        assert!((pose.rotation.matrix() - single.matrix()).abs().max() < 1e-10);
        // Translation is the geometric sum of rotated increments.
        let mut expected = Vec3::zeros();
        for k in 0..n {
            expected += Rotation3::about_z(w * k as f64 * dt).rotate(&(v * dt));
        }
        assert!((pose.translation - expected).norm() < 1e-10);
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut m = *Rotation3::from_euler_zyx(0.4, -0.2, 0.9).matrix();
        m[(0, 1)] += 1e-6;
        m[(2, 2)] -= 2e-6;
        let r = Rotation3::from_matrix_unchecked(m).orthonormalized();
        assert!(r.orthonormality_error() < 1e-14);
        assert!((r.matrix() - m).abs().max() < 1e-5);
    }

    #[test]
    fn pose_interpolation_endpoints() {
        let a = Pose3::new(Rotation3::from_euler_zyx(0.1, 0.2, 0.3), Vec3::new(1.0, 2.0, 3.0));
        let b = Pose3::new(Rotation3::from_euler_zyx(0.5, -0.2, 0.1), Vec3::new(2.0, 0.0, 1.0));
        let s0 = a.interpolate(&b, 0.0);
        let s1 = a.interpolate(&b, 1.0);
        assert!((s0.to_homogeneous() - a.to_homogeneous()).abs().max() < 1e-12);
        assert!((s1.to_homogeneous() - b.to_homogeneous()).abs().max() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pose3() -> impl Strategy<Value = Pose3> {
            (prop::array::uniform3(-3.0..3.0f64), prop::array::uniform3(-10.0..10.0f64))
                .prop_map(|(w, t)| Pose3::new(exp_so3_unchecked(&Vec3::from(w)), Vec3::from(t)))
        }

        proptest! {
            #[test]
            fn exp_inverse_is_identity(w in prop::array::uniform3(-1.8..1.8f64)) {
                let w = Vec3::from(w);
                prop_assume!(w.norm() <= PI);
                let r = exp_so3(&w).unwrap() * exp_so3(&-w).unwrap();
                prop_assert!((r.matrix() - Mat3::identity()).abs().max() < 1e-12);
            }

            #[test]
            fn rotations_orthonormal(theta in -10.0..10.0f64, w in prop::array::uniform3(-4.0..4.0f64)) {
                let r2 = exp_so2(theta).unwrap().matrix();
                prop_assert!((r2 * r2.transpose() - Matrix2::identity()).abs().max() < 1e-9);
                prop_assert!((r2.determinant() - 1.0).abs() < 1e-9);
                let r3 = exp_so3(&Vec3::from(w)).unwrap();
                prop_assert!(r3.orthonormality_error() < 1e-9);
                prop_assert!((r3.matrix().determinant() - 1.0).abs() < 1e-9);
            }

            #[test]
            fn pose3_composition_associative(a in pose3(), b in pose3(), c in pose3()) {
                let l = a.compose(&b).compose(&c).to_homogeneous();
                let r = a.compose(&b.compose(&c)).to_homogeneous();
                prop_assert!((l - r).abs().max() < 1e-12);
                let h = a.to_homogeneous();
                prop_assert_eq!(h.row(3).clone_owned(), nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
            }

            #[test]
            fn pose2_composition_associative(
                p in prop::array::uniform3(-5.0..5.0f64),
                q in prop::array::uniform3(-5.0..5.0f64),
                r in prop::array::uniform3(-5.0..5.0f64),
            ) {
                let mk = |x: [f64; 3]| Pose2::new(x[0], Vec2::new(x[1], x[2]));
                let (a, b, c) = (mk(p), mk(q), mk(r));
                let l = a.compose(&b).compose(&c);
                let r = a.compose(&b.compose(&c));
                prop_assert!((l.translation - r.translation).norm() < 1e-12);
                prop_assert!((l.rotation.cos() - r.rotation.cos()).abs() < 1e-12);
                prop_assert!((l.rotation.sin() - r.rotation.sin()).abs() < 1e-12);
            }
        }
    }
}
