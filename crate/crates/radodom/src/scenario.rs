//! Simulated figure-eight drive: standstill, acceleration, then two opposite
//! full circles. Defaults describe a 60 s, roughly 600 m sequence.

use std::f64::consts::TAU;

use radodom_core::geometry::{GyroSample, Trajectory, Vec2, Vec3};
use radodom_core::radar::{PolarScan, RadarIntrinsics};
use radodom_core::sim::{
    ground_truth, render_scan, sample_gyro, PlanarState, RadarConfig, ScattererWorld, Segment, SimTrajectory,
    VelocityTruth,
};
use radodom_core::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub scatterers: usize,
    /// Scatterers fill `[-extent, extent]^2` (m).
    pub extent: f64,
    pub reflectivity: (f64, f64),
    pub standstill: f64,
    pub accel_time: f64,
    pub speed: f64,
    /// Duration of each of the two circles (s).
    pub lap: f64,
    pub tilt_deg: f64,
    pub radar: RadarConfig,
    pub intrinsics: RadarIntrinsics,
    pub gyro_rate: f64,
    pub gyro_noise: f64,
    pub gyro_bias: Vec3,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 7,
            scatterers: 4000,
            extent: 200.0,
            reflectivity: (300.0, 3000.0),
            standstill: 4.0,
            accel_time: 1.0,
            speed: 11.0,
            lap: 27.5,
            tilt_deg: 0.34,
            radar: RadarConfig { azimuths: 200, bins: 500, noise_sigma: 20.0, ..RadarConfig::default() },
            intrinsics: RadarIntrinsics::default(),
            gyro_rate: 100.0,
            gyro_noise: 0.001,
            gyro_bias: Vec3::new(0.001, -0.002, 0.002),
        }
    }
}

/// Everything a simulated run produces.
#[derive(Clone, Debug)]
pub struct SimDataset {
    pub scans: Vec<PolarScan>,
    pub gyro: Vec<GyroSample>,
    /// Sensor poses at the gyro timestamps covered by the scans, relative to
    /// the first.
    pub ground_truth: Trajectory,
    pub velocities: Vec<VelocityTruth>,
    pub intrinsics: RadarIntrinsics,
    pub trajectory: SimTrajectory,
}

impl Scenario {
    pub fn tilt(&self) -> f64 {
        self.tilt_deg.to_radians()
    }

    pub fn trajectory(&self) -> Result<SimTrajectory> {
        let w = TAU / self.lap;
        let start = PlanarState { position: Vec2::zeros(), heading: 0.0, speed: 0.0, yaw_rate: 0.0 };
        let accel = if self.accel_time > 0.0 { self.speed / self.accel_time } else { 0.0 };
        SimTrajectory::new(
            0.0,
            start,
            vec![
                Segment::straight(self.standstill, 0.0),
                Segment::straight(self.accel_time, accel),
                Segment::arc(self.lap, w),
                Segment::arc(self.lap, -w),
            ],
        )
    }

    pub fn generate(&self) -> Result<SimDataset> {
        let trajectory = self.trajectory()?;
        let world = ScattererWorld::random(
            self.seed,
            self.scatterers,
            Vec2::new(-self.extent, -self.extent),
            Vec2::new(self.extent, self.extent),
            self.reflectivity,
        )?
        .with_tilt(self.tilt());
        let period = self.radar.period();
        // Leave one gyro period after the last sweep so the stream brackets it.
        let usable = trajectory.duration() - 1.0 / self.gyro_rate;
        let count = ((usable / period) + 1e-9).floor() as usize;
        let scans = (0..count)
            .map(|k| {
                let noise_seed = self.seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
                render_scan(&world, &trajectory, k as f64 * period, &self.intrinsics, &self.radar, noise_seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let gyro = sample_gyro(
            &trajectory,
            self.gyro_rate,
            &self.gyro_bias,
            self.gyro_noise,
            self.tilt(),
            self.seed ^ 0x9e37_79b9_7f4a_7c15,
        )?;
        let end = scans.last().map_or(0.0, |s| s.scan_timestamp());
        let stamps: Vec<f64> = gyro.iter().map(|g| g.timestamp).filter(|&t| t <= end).collect();
        let (ground_truth, velocities) = ground_truth(&trajectory, self.tilt(), &stamps)?;
        Ok(SimDataset { scans, gyro, ground_truth, velocities, intrinsics: self.intrinsics, trajectory })
    }
}
