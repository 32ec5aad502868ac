//! Per-scan odometry loop: registration, vertical lift, map maintenance and
//! SE(3) dead reckoning between gyro samples.
//!
//! Two frames are tracked. The planar pose of the radar at each scan time
//! anchors registration and places scans in the local map. The SE(3) pose is
//! integrated at every gyro timestamp from the lifted body velocity and the
//! full 3-axis rate. Both start at identity at the first gyro sample of the
//! first scan.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    integrate_pose3, se2_pose_at, GyroSample, Pose2, Pose3, Rotation2, StampedPose, Trajectory, Vec3,
};
use crate::lift::{lift, BodyVelocity3, KappaCalibration, TimedVelocity};
use crate::map::{LocalMap, MapConfig};
use crate::radar::{undistort_interpolated, PolarScan, RadarIntrinsics};
use crate::registration::{
    estimate_velocity, search_velocity, PlanarVelocity, RegistrationOptions, RegistrationResult, ScanAnchor,
};

/// Rotations are re-orthonormalised after this many compositions.
const REORTHONORMALIZE_EVERY: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub registration: RegistrationOptions,
    pub map: MapConfig,
    /// Scan bins farther than this (m) are not deposited into the map.
    pub map_max_range: f64,
    /// Largest tolerated spacing (s) between gyro samples inside a scan.
    pub max_gyro_gap: f64,
    /// Seed each registration with the previous velocity rotated by the
    /// inter-scan yaw instead of the raw previous velocity.
    pub rotate_seed: bool,
    /// Estimate the gyro bias from stationary windows before the main pass.
    pub estimate_bias: bool,
    /// Consecutive scans whose zero-shift correlation exceeds this are
    /// treated as stationary.
    pub stationary_ncc: f64,
    /// Minimum length (s) of a stationary window.
    pub stationary_duration: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            registration: RegistrationOptions::default(),
            map: MapConfig::default(),
            map_max_range: 100.0,
            max_gyro_gap: 0.05,
            rotate_seed: false,
            estimate_bias: true,
            stationary_ncc: 0.995,
            stationary_duration: 1.0,
        }
    }
}

/// How a scan's velocity was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanStatus {
    /// First scan: fixes the origin; no velocity of its own.
    Initialized,
    Registered,
    /// Registration was unusable; the previous velocity was reused and the
    /// map left untouched.
    Coasted(CoastReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoastReason {
    /// Too few usable returns.
    Degenerate,
    NotConverged,
}

/// Everything the loop carries from one scan to the next.
#[derive(Clone, Debug)]
pub struct OdometryState {
    pose: Pose3,
    pose_time: f64,
    planar_pose: Pose2,
    map: LocalMap,
    last_velocity: PlanarVelocity,
    last_yaw_increment: f64,
    gyro_bias: Vec3,
    last_scan_time: Option<f64>,
    compositions: usize,
    /// First scan, held until the second arrives.
    pending: Option<PolarScan>,
}

impl OdometryState {
    pub fn new(map: &MapConfig, gyro_bias: Vec3) -> Result<Self> {
        if !(gyro_bias.x.is_finite() && gyro_bias.y.is_finite() && gyro_bias.z.is_finite()) {
            return Err(invalid("non-finite gyro bias"));
        }
        Ok(OdometryState {
            pose: Pose3::identity(),
            pose_time: f64::NAN,
            planar_pose: Pose2::identity(),
            map: LocalMap::new(map, nalgebra::Vector2::zeros())?,
            last_velocity: PlanarVelocity::zero(),
            last_yaw_increment: 0.0,
            gyro_bias,
            last_scan_time: None,
            compositions: 0,
            pending: None,
        })
    }

    /// SE(3) pose at [`Self::pose_time`].
    pub fn pose(&self) -> &Pose3 {
        &self.pose
    }

    /// Timestamp of the latest integrated gyro sample (NaN before the first scan).
    pub fn pose_time(&self) -> f64 {
        self.pose_time
    }

    /// Planar pose at the last scan time.
    pub fn planar_pose(&self) -> &Pose2 {
        &self.planar_pose
    }

    pub fn map(&self) -> &LocalMap {
        &self.map
    }

    pub fn last_velocity(&self) -> &PlanarVelocity {
        &self.last_velocity
    }

    pub fn gyro_bias(&self) -> &Vec3 {
        &self.gyro_bias
    }

    pub fn last_scan_time(&self) -> Option<f64> {
        self.last_scan_time
    }
}

/// Result of one [`process_scan`] call.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanOutput {
    /// The scan timestamp (last azimuth).
    pub timestamp: f64,
    pub velocity: BodyVelocity3,
    pub status: ScanStatus,
    pub score: f64,
    pub iterations: usize,
    /// SE(3) poses at the gyro timestamps integrated for this scan.
    pub poses: Vec<StampedPose>,
}

/// Bias-corrected gyro samples covering `[t0, t1]`, with one extra sample on
/// each side when available. Gaps longer than `max_gap` are rejected.
fn gyro_window(gyro: &[GyroSample], bias: &Vec3, t0: f64, t1: f64, max_gap: f64) -> Result<Vec<GyroSample>> {
    let lo = gyro.partition_point(|s| s.timestamp <= t0).saturating_sub(1);
    let hi = (gyro.partition_point(|s| s.timestamp < t1) + 1).min(gyro.len());
    let window = &gyro[lo..hi.max(lo)];
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return Err(Error::MissingData { from: t0, to: t1 });
    };
    if first.timestamp > t0 {
        return Err(Error::MissingData { from: t0, to: first.timestamp.min(t1) });
    }
    if last.timestamp < t1 {
        return Err(Error::MissingData { from: last.timestamp.max(t0), to: t1 });
    }
    for pair in window.windows(2) {
        if pair[1].timestamp - pair[0].timestamp > max_gap {
            return Err(Error::MissingData { from: pair[0].timestamp, to: pair[1].timestamp });
        }
    }
    Ok(window.iter().map(|s| GyroSample::new(s.timestamp, s.rate - bias)).collect())
}

/// Integrate `pose`, valid at `samples[k].timestamp == t_from`, across every
/// later sample up to `t_to` with body velocity `v3`. Returns the final pose,
/// its timestamp and the intermediate stamped poses.
///
/// `compositions` counts steps; every [`REORTHONORMALIZE_EVERY`] of them the
/// rotation is projected back onto SO(3).
pub fn integrate_interval(
    pose: &Pose3,
    samples: &[GyroSample],
    t_from: f64,
    t_to: f64,
    v3: &Vec3,
    compositions: &mut usize,
) -> Result<(Pose3, f64, Vec<StampedPose>)> {
    let k0 = samples.partition_point(|s| s.timestamp < t_from);
    if samples.get(k0).is_none_or(|s| s.timestamp != t_from) {
        return Err(invalid("integrate_interval: no gyro sample at the start time"));
    }
    let mut pose = *pose;
    let mut t = t_from;
    let mut out = Vec::new();
    for pair in samples[k0..].windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.timestamp > t_to {
            break;
        }
        pose = integrate_pose3(&pose, &a.rate, &b.rate, v3, b.timestamp - a.timestamp)?;
        *compositions += 1;
        if compositions.is_multiple_of(REORTHONORMALIZE_EVERY) {
            pose.rotation = pose.rotation.orthonormalized();
        }
        t = b.timestamp;
        out.push(StampedPose { timestamp: t, pose });
    }
    Ok((pose, t, out))
}

/// Process one scan: register it against the map (seeded with the previous
/// velocity), lift the velocity, integrate the SE(3) pose over the gyro
/// samples up to the scan timestamp, then deposit the undistorted scan and
/// recenter the map.
///
/// The first scan only fixes the origin; it is held back until the second
/// scan, whose velocity comes from a global search against the first scan
/// and is then refined by re-depositing the first scan at that velocity.
/// Both intervals are integrated with the bootstrapped velocity.
///
/// `gyro` is the raw stream; the state's bias is subtracted here. Scans must
/// arrive in time order.
pub fn process_scan(
    state: &mut OdometryState,
    scan: &PolarScan,
    gyro: &[GyroSample],
    cal: &KappaCalibration,
    intrinsics: &RadarIntrinsics,
    opts: &PipelineOptions,
) -> Result<ScanOutput> {
    let t_end = scan.scan_timestamp();
    let Some(t_prev) = state.last_scan_time else {
        return initialize(state, scan, gyro);
    };
    if !(t_end > t_prev) {
        return Err(invalid(alloc::format!("scan at {t_end:.6} s does not follow the previous scan at {t_prev:.6} s")));
    }
    let samples = gyro_window(gyro, &state.gyro_bias, state.pose_time.min(t_prev), t_end, opts.max_gyro_gap)?;
    if let Some(first) = state.pending.take() {
        return bootstrap(state, &first, scan, &samples, cal, intrinsics, opts);
    }
    let anchor = ScanAnchor::new(t_prev, state.planar_pose);
    let seed = if opts.rotate_seed {
        PlanarVelocity(Rotation2::from_angle(-state.last_yaw_increment).rotate(state.last_velocity.vector()))
    } else {
        state.last_velocity
    };
    let reg = estimate_velocity(&state.map, scan, &samples, &anchor, &seed, intrinsics, &opts.registration, None);
    let (velocity, status, score, iterations) = judge(reg, &state.last_velocity, t_end, opts)?;
    if !matches!(status, ScanStatus::Coasted(_)) {
        deposit(&mut state.map, scan, &samples, t_prev, &state.planar_pose, &velocity, intrinsics, opts)?;
    }
    let poses = step(state, &samples, t_prev, t_end, &velocity, cal)?;
    Ok(ScanOutput { timestamp: t_end, velocity: lift(&velocity, cal), status, score, iterations, poses })
}

/// Accept a registration result or fall back to `fallback`.
fn judge(
    reg: Result<RegistrationResult>,
    fallback: &PlanarVelocity,
    t: f64,
    opts: &PipelineOptions,
) -> Result<(PlanarVelocity, ScanStatus, f64, usize)> {
    match reg {
        Ok(r) if r.converged && r.velocity.is_finite() && r.velocity.speed() <= opts.registration.max_speed => {
            Ok((r.velocity, ScanStatus::Registered, r.score, r.iterations))
        }
        Ok(r) => {
            log::warn!("scan at {t:.6} s: registration did not converge, coasting");
            Ok((*fallback, ScanStatus::Coasted(CoastReason::NotConverged), r.score, r.iterations))
        }
        Err(Error::DegenerateInput(msg)) => {
            log::warn!("scan at {t:.6} s: {msg}, coasting");
            Ok((*fallback, ScanStatus::Coasted(CoastReason::Degenerate), 0.0, 0))
        }
        Err(e) => Err(e),
    }
}

fn initialize(state: &mut OdometryState, scan: &PolarScan, gyro: &[GyroSample]) -> Result<ScanOutput> {
    let (t_start, t_end) = (scan.start_time(), scan.scan_timestamp());
    let first = gyro.partition_point(|s| s.timestamp < t_start);
    let Some(origin) = gyro.get(first).filter(|s| s.timestamp <= t_end) else {
        return Err(Error::MissingData { from: t_start, to: t_end });
    };
    let t0 = origin.timestamp;
    state.pose = Pose3::identity();
    state.pose_time = t0;
    state.planar_pose = Pose2::identity();
    state.pending = Some(scan.clone());
    state.last_scan_time = Some(t_end);
    Ok(ScanOutput {
        timestamp: t_end,
        velocity: BodyVelocity3 { v_xy: nalgebra::Vector2::zeros(), v_z: 0.0 },
        status: ScanStatus::Initialized,
        score: 0.0,
        iterations: 0,
        poses: alloc::vec![StampedPose { timestamp: t0, pose: Pose3::identity() }],
    })
}

/// Rounds of re-depositing the first scan at the refined velocity.
const BOOTSTRAP_ROUNDS: usize = 4;

fn bootstrap(
    state: &mut OdometryState,
    first: &PolarScan,
    scan: &PolarScan,
    samples: &[GyroSample],
    cal: &KappaCalibration,
    intrinsics: &RadarIntrinsics,
    opts: &PipelineOptions,
) -> Result<ScanOutput> {
    let (t0, t1, t_end) = (state.pose_time, first.scan_timestamp(), scan.scan_timestamp());
    // Map of the first scan and the anchor of the second, for a velocity
    // shared by both sweeps.
    let setup = |v: &PlanarVelocity| -> Result<(LocalMap, Pose2)> {
        let mut map = LocalMap::new(&opts.map, nalgebra::Vector2::zeros())?;
        deposit(&mut map, first, samples, t0, &Pose2::identity(), v, intrinsics, opts)?;
        Ok((map, se2_pose_at(v.vector(), samples, t0, t1)?))
    };
    let (map, p1) = setup(&PlanarVelocity::zero())?;
    let mut reg = search_velocity(&map, scan, samples, &ScanAnchor::new(t1, p1), intrinsics, &opts.registration);
    for _ in 0..BOOTSTRAP_ROUNDS {
        let Ok(v) = reg.as_ref().map(|r| r.velocity) else { break };
        let (map, p1) = setup(&v)?;
        reg =
            estimate_velocity(&map, scan, samples, &ScanAnchor::new(t1, p1), &v, intrinsics, &opts.registration, None);
    }
    let (velocity, status, score, iterations) = judge(reg, &PlanarVelocity::zero(), t_end, opts)?;
    let (map, p1) = setup(&velocity)?;
    state.map = map;
    let mut poses = step(state, samples, t0, t1, &velocity, cal)?;
    debug_assert_eq!(state.planar_pose, p1);
    if !matches!(status, ScanStatus::Coasted(_)) {
        deposit(&mut state.map, scan, samples, t1, &state.planar_pose, &velocity, intrinsics, opts)?;
    }
    poses.extend(step(state, samples, t1, t_end, &velocity, cal)?);
    Ok(ScanOutput { timestamp: t_end, velocity: lift(&velocity, cal), status, score, iterations, poses })
}

/// Deposit `scan`, undistorted at `velocity` from `t_anchor` where the
/// sensor sat at `pose`, into `map`.
#[allow(clippy::too_many_arguments)]
fn deposit(
    map: &mut LocalMap,
    scan: &PolarScan,
    samples: &[GyroSample],
    t_anchor: f64,
    pose: &Pose2,
    velocity: &PlanarVelocity,
    intrinsics: &RadarIntrinsics,
    opts: &PipelineOptions,
) -> Result<()> {
    let mut points = undistort_interpolated(
        scan,
        samples,
        t_anchor,
        velocity.vector(),
        intrinsics,
        opts.registration.intensity_floor,
        opts.map.cell_size,
        opts.map_max_range,
    )?;
    for p in points.coordinates.iter_mut() {
        *p = pose.transform_point(p);
    }
    map.update(&points);
    Ok(())
}

/// Advance both poses from `t_anchor` to the scan time `t_end` at `velocity`.
fn step(
    state: &mut OdometryState,
    samples: &[GyroSample],
    t_anchor: f64,
    t_end: f64,
    velocity: &PlanarVelocity,
    cal: &KappaCalibration,
) -> Result<Vec<StampedPose>> {
    let v3 = lift(velocity, cal).as_vector();
    let (pose, pose_time, poses) =
        integrate_interval(&state.pose, samples, state.pose_time, t_end, &v3, &mut state.compositions)?;
    let increment = se2_pose_at(velocity.vector(), samples, t_anchor, t_end)?;
    state.planar_pose = state.planar_pose.compose(&increment);
    state.map.recenter(&state.planar_pose.translation);
    state.pose = pose;
    state.pose_time = pose_time;
    state.last_velocity = *velocity;
    state.last_yaw_increment = increment.rotation.angle();
    state.last_scan_time = Some(t_end);
    Ok(poses)
}

/// Gyro bias from stationary periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasEstimate {
    pub bias: Vec3,
    pub windows: usize,
    pub samples: usize,
    /// No stationary window was found; the bias is zero.
    pub fallback: bool,
}

impl BiasEstimate {
    fn zero() -> Self {
        BiasEstimate { bias: Vec3::zeros(), windows: 0, samples: 0, fallback: true }
    }
}

/// Component-wise mean of the gyro samples inside `windows` (closed
/// intervals, in seconds). Windows should not overlap.
pub fn bias_from_windows(gyro: &[GyroSample], windows: &[(f64, f64)]) -> BiasEstimate {
    let mut sum = Vec3::zeros();
    let mut count = 0usize;
    for &(a, b) in windows {
        let lo = gyro.partition_point(|s| s.timestamp < a);
        let hi = gyro.partition_point(|s| s.timestamp <= b);
        for s in &gyro[lo..hi.max(lo)] {
            sum += s.rate;
            count += 1;
        }
    }
    if count == 0 {
        log::warn!("no gyro samples in a stationary window; assuming zero bias");
        return BiasEstimate::zero();
    }
    BiasEstimate { bias: sum / count as f64, windows: windows.len(), samples: count, fallback: false }
}

/// Merge consecutive flagged intervals and keep those lasting at least
/// `min_duration`. Input intervals are in time order.
pub fn merge_windows(flagged: impl IntoIterator<Item = (f64, f64, bool)>, min_duration: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    let close = |w: Option<(f64, f64)>, out: &mut Vec<(f64, f64)>| {
        if let Some((a, b)) = w {
            if b - a >= min_duration {
                out.push((a, b));
            }
        }
    };
    for (a, b, still) in flagged {
        if still {
            open = Some(match open {
                Some((s, e)) if a <= e => (s, e.max(b)),
                prev => {
                    close(prev, &mut out);
                    (a, b)
                }
            });
        } else {
            close(open.take(), &mut out);
        }
    }
    close(open, &mut out);
    out
}

/// Bias from the gyro samples recorded while the estimated speed stayed
/// below `stationary_speed` for at least `min_duration` seconds. Falls back
/// to zero (flagged) when there is no such window.
pub fn estimate_bias(
    gyro: &[GyroSample],
    velocities: &[TimedVelocity],
    stationary_speed: f64,
    min_duration: f64,
) -> BiasEstimate {
    let flagged = velocities.windows(2).map(|w| {
        let still = w[0].velocity.speed() < stationary_speed && w[1].velocity.speed() < stationary_speed;
        (w[0].timestamp, w[1].timestamp, still)
    });
    let windows = merge_windows(flagged, min_duration);
    if windows.is_empty() {
        log::warn!("no stationary window; assuming zero gyro bias");
        return BiasEstimate::zero();
    }
    bias_from_windows(gyro, &windows)
}

/// Normalised cross-correlation of two scans' intensities at zero shift.
/// Returns 0 for mismatched shapes or constant images.
pub fn scan_ncc(a: &PolarScan, b: &PolarScan) -> f64 {
    if a.azimuths() != b.azimuths() || a.bins() != b.bins() {
        return 0.0;
    }
    let (x, y) = (a.intensities(), b.intensities());
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&p, &q) in x.iter().zip(y) {
        let (p, q) = (p as f64 - mx, q as f64 - my);
        sxy += p * q;
        sxx += p * p;
        syy += q * q;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / libm::sqrt(sxx * syy)
}

/// Random-access scan stream.
pub trait ScanSource {
    type Error: From<Error>;
    fn len(&self) -> usize;
    fn scan(&mut self, index: usize) -> core::result::Result<PolarScan, Self::Error>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ScanSource for [PolarScan] {
    type Error = Error;
    fn len(&self) -> usize {
        <[PolarScan]>::len(self)
    }
    fn scan(&mut self, index: usize) -> Result<PolarScan> {
        self.get(index).cloned().ok_or_else(|| invalid("scan index out of range"))
    }
}

impl ScanSource for Vec<PolarScan> {
    type Error = Error;
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn scan(&mut self, index: usize) -> Result<PolarScan> {
        self.as_mut_slice().scan(index)
    }
}

/// Stationary windows found by correlating consecutive raw scans.
pub fn detect_stationary<S: ScanSource + ?Sized>(
    source: &mut S,
    ncc_threshold: f64,
    min_duration: f64,
) -> core::result::Result<Vec<(f64, f64)>, S::Error> {
    let mut flagged = Vec::new();
    let mut prev: Option<PolarScan> = None;
    for i in 0..source.len() {
        let scan = source.scan(i)?;
        if let Some(p) = &prev {
            flagged.push((p.start_time(), scan.scan_timestamp(), scan_ncc(p, &scan) > ncc_threshold));
        }
        prev = Some(scan);
    }
    Ok(merge_windows(flagged, min_duration))
}

/// Per-scan velocity record of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityRecord {
    pub timestamp: f64,
    pub velocity: BodyVelocity3,
    pub status: ScanStatus,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub velocities: Vec<VelocityRecord>,
    pub bias: BiasEstimate,
}

impl RunOutput {
    pub fn coasted(&self) -> usize {
        self.velocities.iter().filter(|r| matches!(r.status, ScanStatus::Coasted(_))).count()
    }
}

/// Run the full odometry over a scan stream and its gyro stream.
///
/// With `opts.estimate_bias`, a first pass finds stationary windows from scan
/// correlation and estimates the gyro bias there; `fixed_bias` overrides
/// both.
pub fn run<S: ScanSource + ?Sized>(
    source: &mut S,
    gyro: &[GyroSample],
    cal: &KappaCalibration,
    intrinsics: &RadarIntrinsics,
    opts: &PipelineOptions,
    fixed_bias: Option<Vec3>,
) -> core::result::Result<RunOutput, S::Error> {
    if let Some(k) = gyro.windows(2).position(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(invalid(alloc::format!("gyro timestamps not increasing at sample {}", k + 1)).into());
    }
    let bias = match fixed_bias {
        Some(b) => BiasEstimate { bias: b, windows: 0, samples: 0, fallback: false },
        None if opts.estimate_bias && !source.is_empty() => {
            let windows = detect_stationary(source, opts.stationary_ncc, opts.stationary_duration)?;
            if windows.is_empty() {
                log::warn!("no stationary window; assuming zero gyro bias");
                BiasEstimate::zero()
            } else {
                bias_from_windows(gyro, &windows)
            }
        }
        None => BiasEstimate::zero(),
    };
    let mut state = OdometryState::new(&opts.map, bias.bias)?;
    let mut trajectory = Trajectory::new();
    let mut velocities = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let scan = source.scan(i)?;
        let out = process_scan(&mut state, &scan, gyro, cal, intrinsics, opts)?;
        for p in &out.poses {
            trajectory.push(p.timestamp, p.pose)?;
        }
        velocities.push(VelocityRecord { timestamp: out.timestamp, velocity: out.velocity, status: out.status });
    }
    Ok(RunOutput { trajectory, velocities, bias })
}
