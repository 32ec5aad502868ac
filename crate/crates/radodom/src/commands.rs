//! The work behind each CLI subcommand.

use std::path::{Path, PathBuf};

use radodom_core::evaluation::{kitti_error, project_se2, OdometryErrorReport};
use radodom_core::geometry::{Trajectory, Vec3};
use radodom_core::lift::{calibrate_kappa, KappaCalibration, TimedVelocity, TimedVz, DEFAULT_SPEED_THRESHOLD};
use radodom_core::pipeline::{run, RunOutput, ScanStatus};
use radodom_core::registration::PlanarVelocity;

use crate::config::Config;
use crate::dataset::DatasetLayout;
use crate::error::{IoError, Result};
use crate::format::{save_kappa, save_trajectory, save_velocities};

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const VELOCITY_FILE: &str = "velocities.csv";

/// Largest time offset between a velocity estimate and the ground-truth
/// sample it is paired with during calibration.
pub const CALIBRATION_MAX_OFFSET: f64 = 0.05;

pub fn odometry(layout: &DatasetLayout, config: &Config, kappa: &KappaCalibration) -> Result<RunOutput> {
    let gyro = layout.load_gyro()?;
    let mut scans = layout.scan_source();
    let out = run(&mut scans, &gyro, kappa, &layout.intrinsics, &config.pipeline, None)?;
    log::info!(
        "{} scans, {} poses, {} coasted, gyro bias [{:.5}, {:.5}, {:.5}] from {} window(s)",
        out.velocities.len(),
        out.trajectory.len(),
        out.coasted(),
        out.bias.bias.x,
        out.bias.bias.y,
        out.bias.bias.z,
        out.bias.windows
    );
    Ok(out)
}

/// Write `trajectory.txt` and `velocities.csv` into `dir`.
pub fn write_odometry(out: &RunOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let traj = dir.join(TRAJECTORY_FILE);
    let vel = dir.join(VELOCITY_FILE);
    save_trajectory(&out.trajectory, &traj)?;
    save_velocities(&out.velocities, &vel)?;
    Ok((traj, vel))
}

/// Sensor-frame vertical velocity along a trajectory, by central differences
/// (one-sided at the ends).
pub fn body_vertical_velocity(traj: &Trajectory) -> Vec<TimedVz> {
    let p = traj.poses();
    if p.len() < 2 {
        return Vec::new();
    }
    (0..p.len())
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(p.len() - 1));
            let dt = p[b].timestamp - p[a].timestamp;
            let world: Vec3 = (p[b].pose.translation - p[a].pose.translation) / dt;
            let body = p[i].pose.rotation.inverse().rotate(&world);
            TimedVz { timestamp: p[i].timestamp, v_z: body.z }
        })
        .collect()
}

/// Calibrate κ on one sequence: odometry with κ = 0, then the plain mean of
/// `v_z / |v|` over estimates above the speed threshold.
pub fn calibrate(layout: &DatasetLayout, config: &Config) -> Result<(KappaCalibration, RunOutput)> {
    let Some(gt) = layout.load_ground_truth()? else {
        return Err(IoError::Missing { path: layout.root.join("manifest.txt"), what: "ground_truth entry" });
    };
    let out = odometry(layout, config, &KappaCalibration::fixed(0.0))?;
    let cal = kappa_from_run(&out, &gt)?;
    Ok((cal, out))
}

pub fn kappa_from_run(out: &RunOutput, gt: &Trajectory) -> Result<KappaCalibration> {
    let estimates: Vec<TimedVelocity> = out
        .velocities
        .iter()
        .filter(|r| r.status == ScanStatus::Registered)
        .map(|r| TimedVelocity { timestamp: r.timestamp, velocity: PlanarVelocity(r.velocity.v_xy) })
        .collect();
    let vz = body_vertical_velocity(gt);
    Ok(calibrate_kappa(&estimates, &vz, DEFAULT_SPEED_THRESHOLD, CALIBRATION_MAX_OFFSET)?)
}

pub fn write_kappa(cal: &KappaCalibration, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    save_kappa(cal, path)
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub se3: OdometryErrorReport,
    pub se2: Option<OdometryErrorReport>,
}

pub fn evaluate(gt: &Trajectory, est: &Trajectory, lengths: &[f64], se2: bool) -> Result<Evaluation> {
    let se3 = kitti_error(gt, est, lengths);
    let se2 = if se2 { Some(kitti_error(&project_se2(gt)?, &project_se2(est)?, lengths)) } else { None };
    Ok(Evaluation { se3, se2 })
}
