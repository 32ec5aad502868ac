//! Dataset directory:
//!
//! ```text
//! manifest.txt        key = value: scans, gyro, ground_truth (optional),
//!                     doppler_gain, range_resolution, min_range
//! scans/000000.pgm    one sweep per file, names sort in time order
//! scans/000000.txt    sidecar
//! gyro.csv
//! groundtruth.txt     trajectory text
//! ```

use std::path::{Path, PathBuf};

use radodom_core::geometry::{GyroSample, Trajectory};
use radodom_core::pipeline::ScanSource;
use radodom_core::radar::{PolarScan, RadarIntrinsics};

use crate::error::{write_file, IoError, Location, Result};
use crate::format::keyvalue::Table;
use crate::format::{load_gyro, load_scan, load_trajectory, save_gyro, save_scan, save_trajectory};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub scan_dir: PathBuf,
    pub gyro: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub intrinsics: RadarIntrinsics,
    /// Scan images in time order.
    pub scans: Vec<PathBuf>,
}

impl DatasetLayout {
    /// Read the manifest under `root` and check that everything it names
    /// exists.
    pub fn open(root: &Path) -> Result<Self> {
        let manifest = root.join(MANIFEST);
        if !manifest.is_file() {
            return Err(IoError::Missing { path: manifest, what: "dataset manifest" });
        }
        let mut t = Table::load(&manifest)?;
        let scan_dir = root.join(t.require::<String>("scans")?);
        let gyro = root.join(t.require::<String>("gyro")?);
        let ground_truth = t.get::<String>("ground_truth")?.map(|g| root.join(g));
        let intrinsics =
            RadarIntrinsics::new(t.require("doppler_gain")?, t.require("range_resolution")?, t.require("min_range")?)
                .map_err(|e| IoError::format(&manifest, Location::Field("intrinsics".into()), e.to_string()))?;
        t.finish()?;

        if !scan_dir.is_dir() {
            return Err(IoError::Missing { path: scan_dir, what: "scan directory" });
        }
        if !gyro.is_file() {
            return Err(IoError::Missing { path: gyro, what: "gyro file" });
        }
        if let Some(g) = &ground_truth {
            if !g.is_file() {
                return Err(IoError::Missing { path: g.clone(), what: "ground-truth file" });
            }
        }
        let mut scans: Vec<PathBuf> = std::fs::read_dir(&scan_dir)
            .map_err(|e| IoError::io(&scan_dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
            .collect();
        scans.sort();
        Ok(DatasetLayout { root: root.to_path_buf(), scan_dir, gyro, ground_truth, intrinsics, scans })
    }

    /// Write a complete dataset under `root`, creating directories as needed.
    pub fn create(
        root: &Path,
        scans: &[PolarScan],
        gyro: &[GyroSample],
        ground_truth: Option<&Trajectory>,
        intrinsics: &RadarIntrinsics,
    ) -> Result<Self> {
        let scan_dir = root.join("scans");
        std::fs::create_dir_all(&scan_dir).map_err(|e| IoError::io(&scan_dir, e))?;
        for (k, s) in scans.iter().enumerate() {
            save_scan(s, &scan_dir.join(format!("{k:06}.pgm")))?;
        }
        save_gyro(gyro, &root.join("gyro.csv"))?;
        let mut manifest = String::from("scans = scans\ngyro = gyro.csv\n");
        if let Some(gt) = ground_truth {
            save_trajectory(gt, &root.join("groundtruth.txt"))?;
            manifest.push_str("ground_truth = groundtruth.txt\n");
        }
        manifest.push_str(&format!(
            "doppler_gain = {}\nrange_resolution = {}\nmin_range = {}\n",
            intrinsics.doppler_gain, intrinsics.range_resolution, intrinsics.min_range
        ));
        write_file(&root.join(MANIFEST), manifest.as_bytes())?;
        Self::open(root)
    }

    pub fn load_gyro(&self) -> Result<Vec<GyroSample>> {
        load_gyro(&self.gyro)
    }

    pub fn load_ground_truth(&self) -> Result<Option<Trajectory>> {
        self.ground_truth.as_deref().map(load_trajectory).transpose()
    }

    pub fn scan_source(&self) -> FileScans<'_> {
        FileScans { layout: self, previous: None }
    }
}

/// Scans read from disk on demand. Sequential reads also check that the
/// files really are in time order.
pub struct FileScans<'a> {
    layout: &'a DatasetLayout,
    previous: Option<(usize, f64)>,
}

impl ScanSource for FileScans<'_> {
    type Error = IoError;

    fn len(&self) -> usize {
        self.layout.scans.len()
    }

    fn scan(&mut self, index: usize) -> Result<PolarScan> {
        let path = self
            .layout
            .scans
            .get(index)
            .ok_or_else(|| IoError::Core(radodom_core::Error::InvalidArgument(format!("no scan {index}"))))?;
        let scan = load_scan(path)?;
        let res = self.layout.intrinsics.range_resolution;
        if (scan.range_resolution() - res).abs() > 1e-9 * res {
            return Err(IoError::format(
                &crate::format::scan::sidecar_path(path),
                Location::Field("range_resolution".into()),
                format!("{} disagrees with the manifest ({res})", scan.range_resolution()),
            ));
        }
        if let Some((i, end)) = self.previous {
            if index == i + 1 && scan.start_time() <= end {
                return Err(IoError::format(path, Location::Row(0), "scan starts before the previous scan ends"));
            }
        }
        self.previous = Some((index, scan.scan_timestamp()));
        Ok(scan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use radodom_core::geometry::Vec3;

    fn scan(t0: f64) -> PolarScan {
        let ts = (0..4).map(|a| t0 + 0.01 * a as f64).collect();
        let angles = (0..4).map(|a| a as f64 * 1.5).collect();
        PolarScan::new(4, 3, vec![1.0; 12], ts, angles, 0.25, 0.0).unwrap()
    }

    #[test]
    fn create_open_and_missing_pieces() {
        let dir = tempfile::tempdir().unwrap();
        let gyro = vec![GyroSample::new(0.0, Vec3::zeros()), GyroSample::new(1.0, Vec3::zeros())];
        let intr = RadarIntrinsics::default();
        let d = DatasetLayout::create(dir.path(), &[scan(0.0), scan(0.1)], &gyro, None, &intr).unwrap();
        assert_eq!(d.scans.len(), 2);
        assert_eq!(d.ground_truth, None);
        assert_eq!(d.intrinsics, intr);
        let mut src = d.scan_source();
        let back = src.scan(1).unwrap();
        assert_eq!(back.intensities(), scan(0.1).intensities());
        for (a, b) in back.azimuth_timestamps().iter().zip(scan(0.1).azimuth_timestamps()) {
            assert!((a - b).abs() < 1e-9);
        }

        std::fs::remove_file(&d.gyro).unwrap();
        assert!(matches!(DatasetLayout::open(dir.path()), Err(IoError::Missing { what: "gyro file", .. })));
        assert!(matches!(DatasetLayout::open(&dir.path().join("nope")), Err(IoError::Missing { .. })));
    }

    #[test]
    fn out_of_order_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gyro = vec![GyroSample::new(0.0, Vec3::zeros())];
        let d = DatasetLayout::create(dir.path(), &[scan(0.5), scan(0.0)], &gyro, None, &RadarIntrinsics::default())
            .unwrap();
        let mut src = d.scan_source();
        src.scan(0).unwrap();
        assert!(matches!(src.scan(1), Err(IoError::Format { .. })));
    }
}
