//! Synthetic spinning radar and gyroscope data with exact ground truth.
//!
//! The world is a set of planar point scatterers. The vehicle follows a
//! piecewise-analytic planar trajectory; the radar sensing plane may be tilted
//! by a constant pitch `alpha` relative to the plane of motion, in which case
//! the radar observes the planar trajectory while the true sensor motion is
//! the tilted one.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::geometry::{GyroSample, Pose3, Rotation3, Trajectory, Vec2, Vec3};
use crate::radar::{PolarScan, RadarIntrinsics};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scatterer {
    pub position: Vec2,
    pub reflectivity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScattererWorld {
    pub scatterers: Vec<Scatterer>,
    /// Constant pitch of the sensing plane relative to the plane of motion.
    pub tilt: f64,
}

impl ScattererWorld {
    pub fn new(scatterers: Vec<Scatterer>, tilt: f64) -> Result<Self> {
        if !tilt.is_finite() {
            return Err(invalid("world: non-finite tilt"));
        }
        for s in &scatterers {
            if !(s.reflectivity.is_finite() && s.reflectivity >= 0.0) {
                return Err(invalid("world: reflectivity must be finite and non-negative"));
            }
            if !(s.position.x.is_finite() && s.position.y.is_finite()) {
                return Err(invalid("world: non-finite scatterer position"));
            }
        }
        Ok(ScattererWorld { scatterers, tilt })
    }

    /// `count` scatterers uniform in the box `[min, max]` with reflectivity
    /// uniform in `reflectivity`.
    pub fn random(seed: u64, count: usize, min: Vec2, max: Vec2, reflectivity: (f64, f64)) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y && reflectivity.0 <= reflectivity.1 && reflectivity.0 >= 0.0) {
            return Err(invalid("world: empty box or reflectivity range"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scatterers = (0..count)
            .map(|_| Scatterer {
                position: Vec2::new(rng.random_range(min.x..max.x), rng.random_range(min.y..max.y)),
                reflectivity: if reflectivity.0 == reflectivity.1 {
                    reflectivity.0
                } else {
                    rng.random_range(reflectivity.0..reflectivity.1)
                },
            })
            .collect();
        ScattererWorld::new(scatterers, 0.0)
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }
}

/// One piece of a trajectory: constant longitudinal acceleration or constant
/// yaw rate (not both, which keeps the position analytic).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

impl Segment {
    pub fn straight(duration: f64, accel: f64) -> Self {
        Segment { duration, accel, yaw_rate: 0.0 }
    }

    pub fn arc(duration: f64, yaw_rate: f64) -> Self {
        Segment { duration, accel: 0.0, yaw_rate }
    }
}

/// Planar vehicle state at an instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrajectory {
    segments: Vec<Segment>,
    /// State and absolute time at the start of every segment.
    starts: Vec<(f64, PlanarState)>,
    end_time: f64,
}

impl SimTrajectory {
    /// Trajectory starting at time `t0` in `initial`; segments run back to back.
    pub fn new(t0: f64, initial: PlanarState, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("trajectory: no segments"));
        }
        if !(t0.is_finite() && initial.speed >= 0.0 && initial.speed.is_finite()) {
            return Err(invalid("trajectory: bad initial state"));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = t0;
        let mut state = initial;
        for seg in &segments {
            if !(seg.duration > 0.0 && seg.duration.is_finite() && seg.accel.is_finite() && seg.yaw_rate.is_finite()) {
                return Err(invalid("trajectory: segment needs finite values and positive duration"));
            }
            if seg.accel != 0.0 && seg.yaw_rate != 0.0 {
                return Err(invalid("trajectory: a segment cannot both accelerate and turn"));
            }
            state.yaw_rate = seg.yaw_rate;
            starts.push((t, state));
            state = advance(&state, seg, seg.duration);
            if state.speed < -1e-9 {
                return Err(invalid("trajectory: speed would become negative"));
            }
            state.speed = state.speed.max(0.0);
            t += seg.duration;
        }
        Ok(SimTrajectory { segments, starts, end_time: t })
    }

    /// Two tangent circles of `radius` driven at constant `speed`, turning
    /// left then right; starts at the origin heading along +x at `t0 = 0`.
    pub fn figure_eight(speed: f64, radius: f64) -> Result<Self> {
        if !(speed > 0.0 && radius > 0.0) {
            return Err(invalid("figure_eight: speed and radius must be positive"));
        }
        let lap = TAU * radius / speed;
        let w = speed / radius;
        SimTrajectory::new(
            0.0,
            PlanarState { position: Vec2::zeros(), heading: 0.0, speed, yaw_rate: 0.0 },
            alloc::vec![Segment::arc(lap, w), Segment::arc(lap, -w)],
        )
    }

    pub fn start_time(&self) -> f64 {
        self.starts[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time()
    }

    /// State at `t`, clamped to the trajectory's time span.
    pub fn state_at(&self, t: f64) -> PlanarState {
        let t = t.clamp(self.start_time(), self.end_time);
        let i = self.starts.partition_point(|(ts, _)| *ts <= t).saturating_sub(1);
        let (ts, s) = &self.starts[i];
        advance(s, &self.segments[i], t - ts)
    }
}

fn advance(s: &PlanarState, seg: &Segment, dt: f64) -> PlanarState {
    let heading = s.heading + seg.yaw_rate * dt;
    let (position, speed) = if seg.yaw_rate == 0.0 {
        let dist = s.speed * dt + 0.5 * seg.accel * dt * dt;
        let (sn, cs) = libm::sincos(s.heading);
        (s.position + Vec2::new(cs, sn) * dist, s.speed + seg.accel * dt)
    } else {
        let r = s.speed / seg.yaw_rate;
        let (s0, c0) = libm::sincos(s.heading);
        let (s1, c1) = libm::sincos(heading);
        (s.position + Vec2::new(s1 - s0, c0 - c1) * r, s.speed)
    };
    PlanarState { position, heading, speed, yaw_rate: seg.yaw_rate }
}

/// Sweep and beam parameters of the simulated radar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarConfig {
    pub azimuths: usize,
    pub bins: usize,
    pub rpm: f64,
    /// Range spread of a point return, in bins.
    pub beam_sigma: f64,
    /// Azimuth spread of a point return, in azimuth steps.
    pub azimuth_sigma: f64,
    pub noise_sigma: f64,
    /// Round intensities to integers in `[0, 65535]`, as a 16-bit sensor does.
    pub quantize: bool,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            azimuths: 400,
            bins: 1000,
            rpm: 240.0,
            beam_sigma: 2.0,
            azimuth_sigma: 1.0,
            noise_sigma: 0.0,
            quantize: true,
        }
    }
}

impl RadarConfig {
    /// Sweep period in seconds.
    pub fn period(&self) -> f64 {
        60.0 / self.rpm
    }
}

/// Render the sweep starting at `t_start`.
///
/// Azimuth `a` is acquired at `t_start + a * period / A` pointing at
/// `2 pi a / A`. Each scatterer contributes a Gaussian profile centred on its
/// instantaneous range, shifted by `doppler_gain` times its radial velocity
/// relative to the sensor.
pub fn render_scan(
    world: &ScattererWorld,
    traj: &SimTrajectory,
    t_start: f64,
    intrinsics: &RadarIntrinsics,
    radar: &RadarConfig,
    noise_seed: u64,
) -> Result<PolarScan> {
    if !(radar.rpm > 0.0 && radar.rpm.is_finite()) {
        return Err(invalid("render_scan: rpm must be positive"));
    }
    if radar.azimuths == 0 || radar.bins == 0 {
        return Err(invalid("render_scan: empty scan"));
    }
    if !(radar.beam_sigma > 0.0 && radar.azimuth_sigma > 0.0 && radar.noise_sigma >= 0.0) {
        return Err(invalid("render_scan: beam widths must be positive and noise non-negative"));
    }
    let (na, nb) = (radar.azimuths, radar.bins);
    let period = radar.period();
    let res = intrinsics.range_resolution;
    let max_range = intrinsics.min_range + (nb as f64 + 4.0 * radar.beam_sigma) * res;
    let sigma_az = radar.azimuth_sigma * TAU / na as f64;
    let az_cut = 4.0 * sigma_az;
    let inv_az = 0.5 / (sigma_az * sigma_az);
    let inv_r = 0.5 / (radar.beam_sigma * radar.beam_sigma);
    let half = libm::ceil(4.0 * radar.beam_sigma) as i64;

    let mut timestamps = Vec::with_capacity(na);
    let mut angles = Vec::with_capacity(na);
    let mut values = alloc::vec![0.0f64; na * nb];
    for a in 0..na {
        let t = t_start + a as f64 * period / na as f64;
        let theta = TAU * a as f64 / na as f64;
        timestamps.push(t);
        angles.push(theta);
        let st = traj.state_at(t);
        let (sh, ch) = libm::sincos(st.heading);
        // The sensor moves at [speed, 0] in its own frame, so a static scene
        // along the beam approaches at speed * cos(theta).
        let radial_rate = -st.speed * libm::cos(theta);
        let shift = intrinsics.doppler_gain * radial_rate;
        let row = &mut values[a * nb..(a + 1) * nb];
        for s in &world.scatterers {
            if s.reflectivity == 0.0 {
                continue;
            }
            let d = s.position - st.position;
            // Into the sensor frame.
            let x = ch * d.x + sh * d.y;
            let y = -sh * d.x + ch * d.y;
            let range = libm::sqrt(x * x + y * y);
            if range > max_range {
                continue;
            }
            let mut dphi = libm::atan2(y, x) - theta;
            if dphi > PI {
                dphi -= TAU;
            } else if dphi < -PI {
                dphi += TAU;
            }
            if dphi.abs() > az_cut {
                continue;
            }
            let amp = s.reflectivity * libm::exp(-dphi * dphi * inv_az);
            let centre = (range - intrinsics.min_range) / res + shift;
            let c = libm::round(centre) as i64;
            for r in (c - half).max(0)..(c + half + 1).min(nb as i64) {
                let e = r as f64 - centre;
                row[r as usize] += amp * libm::exp(-e * e * inv_r);
            }
        }
    }
    if radar.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let normal = Normal::new(0.0, radar.noise_sigma).map_err(|_| invalid("render_scan: bad noise sigma"))?;
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let intensities = values
        .into_iter()
        .map(|v| {
            let v = v.max(0.0);
            if radar.quantize {
                libm::round(v.min(65535.0)) as f32
            } else {
                v as f32
            }
        })
        .collect();
    PolarScan::new(na, nb, intensities, timestamps, angles, res, intrinsics.min_range)
}

/// Gyro stream at `rate_hz` over the trajectory, in the (tilted) sensor frame.
pub fn sample_gyro(
    traj: &SimTrajectory,
    rate_hz: f64,
    bias: &Vec3,
    noise_sigma: f64,
    tilt: f64,
    seed: u64,
) -> Result<Vec<GyroSample>> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(invalid("sample_gyro: rate must be positive"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(invalid("sample_gyro: negative noise"));
    }
    let normal = Normal::new(0.0, noise_sigma).map_err(|_| invalid("sample_gyro: bad noise sigma"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (st, ct) = libm::sincos(tilt);
    let n = libm::floor(traj.duration() * rate_hz + 1e-9) as usize;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = traj.start_time() + k as f64 / rate_hz;
        let w = traj.state_at(t).yaw_rate;
        let mut rate = Vec3::new(-st * w, 0.0, ct * w) + bias;
        if noise_sigma > 0.0 {
            rate += Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
        out.push(GyroSample::new(t, rate));
    }
    Ok(out)
}

/// Exact sensor velocities at an instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityTruth {
    pub timestamp: f64,
    /// Planar velocity norm the radar observes.
    pub planar_speed: f64,
    /// In-plane component of the true sensor-frame velocity.
    pub v_xy: Vec2,
    /// Out-of-plane component of the true sensor-frame velocity.
    pub v_z: f64,
}

/// Sensor pose of the tilted frame in world coordinates at `t`.
fn sensor_pose(traj: &SimTrajectory, tilt: f64, t: f64) -> Pose3 {
    let s = traj.state_at(t);
    let c = libm::cos(tilt);
    Pose3::new(
        Rotation3::about_z(s.heading) * Rotation3::about_y(tilt),
        Vec3::new(c * s.position.x, c * s.position.y, 0.0),
    )
}

/// Ground-truth trajectory (relative to the pose at `timestamps[0]`) and
/// velocity traces at `timestamps`, which must increase strictly.
pub fn ground_truth(traj: &SimTrajectory, tilt: f64, timestamps: &[f64]) -> Result<(Trajectory, Vec<VelocityTruth>)> {
    let Some(&t_first) = timestamps.first() else {
        return Ok((Trajectory::new(), Vec::new()));
    };
    let span = traj.start_time() - 1e-9..=traj.end_time() + 1e-9;
    if !timestamps.iter().all(|t| span.contains(t)) {
        return Err(invalid("ground_truth: timestamp outside the trajectory"));
    }
    let origin_inv = sensor_pose(traj, tilt, t_first).inverse();
    let (st, ct) = libm::sincos(tilt);
    let mut out = Trajectory::new();
    let mut vel = Vec::with_capacity(timestamps.len());
    for &t in timestamps {
        out.push(t, origin_inv.compose(&sensor_pose(traj, tilt, t)))?;
        let speed = traj.state_at(t).speed;
        vel.push(VelocityTruth {
            timestamp: t,
            planar_speed: speed,
            v_xy: Vec2::new(ct * ct * speed, 0.0),
            v_z: st * ct * speed,
        });
    }
    Ok((out, vel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::doppler_correct;
    use alloc::vec;

    fn straight(speed: f64, duration: f64) -> SimTrajectory {
        SimTrajectory::new(
            0.0,
            PlanarState { position: Vec2::zeros(), heading: 0.0, speed, yaw_rate: 0.0 },
            vec![Segment::straight(duration, 0.0)],
        )
        .unwrap()
    }

    fn one_scatterer(x: f64, refl: f64) -> ScattererWorld {
        ScattererWorld::new(vec![Scatterer { position: Vec2::new(x, 0.0), reflectivity: refl }], 0.0).unwrap()
    }

    fn radar() -> RadarConfig {
        RadarConfig { azimuths: 64, bins: 400, quantize: false, ..RadarConfig::default() }
    }

    fn centroid(row: &[f32]) -> f64 {
        let (mut m, mut s) = (0.0, 0.0);
        for (i, &v) in row.iter().enumerate() {
            m += i as f64 * v as f64;
            s += v as f64;
        }
        m / s
    }

    #[test]
    fn static_peak_at_true_range() {
        let intr = RadarIntrinsics::default();
        let scan = render_scan(&one_scatterer(50.0, 1000.0), &straight(0.0, 1.0), 0.0, &intr, &radar(), 0).unwrap();
        assert!((centroid(scan.row(0)) - 200.0).abs() < 0.01);
    }

    #[test]
    fn receding_sensor_shifts_by_gain() {
        let intr = RadarIntrinsics::default();
        let radar = radar();
        // Scatterer behind the sensor along azimuth A/2 (pointing -x).
        let world = one_scatterer(-50.0, 1000.0);
        let moving = render_scan(&world, &straight(5.0, 1.0), 0.0, &intr, &radar, 0).unwrap();
        let a = radar.azimuths / 2;
        // The static render at the same sensor position.
        let t = moving.azimuth_timestamps()[a];
        let at = SimTrajectory::new(
            0.0,
            PlanarState { position: Vec2::new(5.0 * t, 0.0), heading: 0.0, speed: 0.0, yaw_rate: 0.0 },
            vec![Segment::straight(1.0, 0.0)],
        )
        .unwrap();
        let fixed = render_scan(&world, &at, 0.0, &intr, &radar, 0).unwrap();
        let d = centroid(moving.row(a)) - centroid(fixed.row(a));
        assert!((d - intr.doppler_gain * 5.0).abs() < 0.01, "{d}");
    }

    #[test]
    fn empty_world_renders_zero() {
        let intr = RadarIntrinsics::default();
        let world = ScattererWorld::random(3, 50, Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0), (0.0, 0.0)).unwrap();
        let scan = render_scan(&world, &straight(3.0, 1.0), 0.0, &intr, &radar(), 0).unwrap();
        assert!(scan.intensities().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_rpm_rejected() {
        let r = RadarConfig { rpm: 0.0, ..radar() };
        assert!(render_scan(&one_scatterer(5.0, 1.0), &straight(0.0, 1.0), 0.0, &RadarIntrinsics::default(), &r, 0)
            .is_err());
    }

    #[test]
    fn zero_velocity_matches_static_pose_bitwise() {
        let intr = RadarIntrinsics::default();
        let world =
            ScattererWorld::random(9, 300, Vec2::new(-80.0, -80.0), Vec2::new(80.0, 80.0), (100.0, 900.0)).unwrap();
        let held = PlanarState { position: Vec2::new(3.0, -2.0), heading: 0.4, speed: 0.0, yaw_rate: 0.0 };
        let stopped =
            SimTrajectory::new(0.0, held, vec![Segment::straight(2.0, 0.0), Segment::straight(5.0, 0.0)]).unwrap();
        let single = SimTrajectory::new(0.0, held, vec![Segment::straight(10.0, 0.0)]).unwrap();
        let a = render_scan(&world, &stopped, 1.9, &intr, &radar(), 0).unwrap();
        let b = render_scan(&world, &single, 1.9, &intr, &radar(), 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doppler_correction_restores_zero_doppler_render() {
        let world =
            ScattererWorld::random(5, 400, Vec2::new(-90.0, -90.0), Vec2::new(90.0, 90.0), (200.0, 1000.0)).unwrap();
        let traj = straight(12.0, 2.0);
        let radar = RadarConfig { azimuths: 128, bins: 400, quantize: false, ..RadarConfig::default() };
        let with = RadarIntrinsics::default();
        let without = RadarIntrinsics { doppler_gain: 0.0, ..with };
        let distorted = render_scan(&world, &traj, 0.5, &with, &radar, 0).unwrap();
        let clean = render_scan(&world, &traj, 0.5, &without, &radar, 0).unwrap();
        let corrected = doppler_correct(&distorted, &Vec2::new(12.0, 0.0), &with);
        let peak = clean.max_intensity() as f64;
        let mae = |s: &PolarScan| {
            s.intensities().iter().zip(clean.intensities()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>()
                / clean.intensities().len() as f64
        };
        assert!(mae(&corrected) < 0.02 * peak);
        assert!(mae(&corrected) < 0.5 * mae(&distorted));
    }

    #[test]
    fn noise_is_seeded_and_non_negative() {
        let intr = RadarIntrinsics::default();
        let r = RadarConfig { noise_sigma: 20.0, quantize: true, ..radar() };
        let w = one_scatterer(30.0, 500.0);
        let a = render_scan(&w, &straight(1.0, 1.0), 0.0, &intr, &r, 7).unwrap();
        let b = render_scan(&w, &straight(1.0, 1.0), 0.0, &intr, &r, 7).unwrap();
        let c = render_scan(&w, &straight(1.0, 1.0), 0.0, &intr, &r, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.intensities().iter().all(|&v| v >= 0.0 && v == v.round()));
    }

    #[test]
    fn gyro_cases() {
        let s = sample_gyro(&straight(10.0, 2.0), 100.0, &Vec3::zeros(), 0.0, 0.0, 0).unwrap();
        assert_eq!(s.len(), 201);
        assert!(s.iter().all(|g| g.rate == Vec3::zeros()));

        let arc = SimTrajectory::new(
            0.0,
            PlanarState { position: Vec2::zeros(), heading: 0.0, speed: 5.0, yaw_rate: 0.0 },
            vec![Segment::arc(3.0, 0.2)],
        )
        .unwrap();
        let s = sample_gyro(&arc, 100.0, &Vec3::zeros(), 0.0, 0.0, 0).unwrap();
        assert!(s.iter().all(|g| g.rate.z == 0.2));

        let s = sample_gyro(&straight(10.0, 20.0), 100.0, &Vec3::new(0.01, 0.0, 0.0), 1e-3, 0.0, 4).unwrap();
        let mean = s.iter().map(|g| g.rate.x).sum::<f64>() / s.len() as f64;
        assert!((mean - 0.01).abs() < 4.0 * 1e-3 / (s.len() as f64).sqrt());
        assert!(sample_gyro(&arc, 0.0, &Vec3::zeros(), 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn tilted_gyro_maps_yaw_rate() {
        let arc = SimTrajectory::figure_eight(10.0, 50.0).unwrap();
        let alpha = 0.1;
        let s = sample_gyro(&arc, 50.0, &Vec3::zeros(), 0.0, alpha, 0).unwrap();
        let g = s[3].rate;
        assert!((g.norm() - 0.2).abs() < 1e-12);
        assert!((g.x + 0.2 * alpha.sin()).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_cases() {
        let (_, v) = ground_truth(&straight(10.0, 2.0), 0.0, &[0.0, 1.0]).unwrap();
        assert!(v.iter().all(|s| s.v_z == 0.0));

        let alpha = 0.34f64.to_radians();
        let (_, v) = ground_truth(&straight(10.0, 2.0), alpha, &[0.5]).unwrap();
        assert!((v[0].v_z - 0.059).abs() < 5e-4);

        let eight = SimTrajectory::figure_eight(10.0, 47.0).unwrap();
        let end = eight.end_time();
        assert!(eight.state_at(end).position.norm() < 1e-9);
        let (t, _) = ground_truth(&eight, 0.0, &[0.0, end / 2.0, end]).unwrap();
        assert!(t.poses()[2].pose.translation.norm() < 1e-9);
        assert!((t.poses()[1].pose.translation.norm()).abs() < 1e-9);
        assert!(ground_truth(&eight, 0.0, &[end + 1.0]).is_err());
    }

    #[test]
    fn tilted_pose_matches_body_velocity() {
        // Finite difference of the ground-truth pose, expressed in the sensor
        // frame, equals the reported (v_xy, v_z).
        let alpha = 0.2;
        let traj = straight(8.0, 3.0);
        let h = 1e-4;
        let (t, v) = ground_truth(&traj, alpha, &[1.0, 1.0 + h]).unwrap();
        let a = t.poses()[0].pose;
        let b = t.poses()[1].pose;
        let body = a.rotation.inverse().rotate(&(b.translation - a.translation)) / h;
        assert!((body.x - v[0].v_xy.x).abs() < 1e-6);
        assert!((body.z - v[0].v_z).abs() < 1e-6);
    }

    #[test]
    fn trajectory_validation() {
        let init = PlanarState { position: Vec2::zeros(), heading: 0.0, speed: 1.0, yaw_rate: 0.0 };
        assert!(SimTrajectory::new(0.0, init, vec![]).is_err());
        assert!(SimTrajectory::new(0.0, init, vec![Segment { duration: 1.0, accel: 1.0, yaw_rate: 0.1 }]).is_err());
        assert!(SimTrajectory::new(0.0, init, vec![Segment::straight(2.0, -1.0)]).is_err());
        let stop =
            SimTrajectory::new(0.0, init, vec![Segment::straight(1.0, -1.0), Segment::straight(1.0, 0.0)]).unwrap();
        assert_eq!(stop.state_at(1.5).speed, 0.0);
        assert!((stop.state_at(2.0).position.x - 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pythagorean_identity(alpha in -1.0..1.0f64, speed in 0.0..40.0f64, t in 0.0..2.0f64) {
                let (_, v) = ground_truth(&straight(speed, 2.0), alpha, &[t]).unwrap();
                let lhs = v[0].v_xy.norm_squared() + v[0].v_z * v[0].v_z;
                let c = alpha.cos();
                prop_assert!((lhs - c * c * speed * speed).abs() < 1e-12 * (1.0 + speed * speed));
            }

            #[test]
            fn position_is_continuous(w in -0.5..0.5f64, a in -1.0..1.0f64, d in 0.5..5.0f64) {
                let init = PlanarState { position: Vec2::new(1.0, 2.0), heading: 0.3, speed: 6.0, yaw_rate: 0.0 };
                let traj = SimTrajectory::new(0.0, init, vec![Segment::straight(d, a), Segment::arc(d, w), Segment::straight(d, 0.0)]).unwrap();
                for k in 1..3 {
                    let tb = k as f64 * d;
                    let l = traj.state_at(tb - 1e-9).position;
                    let r = traj.state_at(tb).position;
                    prop_assert!((l - r).norm() < 1e-7);
                }
            }
        }
    }
}
