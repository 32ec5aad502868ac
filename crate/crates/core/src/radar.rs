//! Polar radar scans, Doppler range correction and motion undistortion.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::geometry::{GyroSample, PlanarMotion, Vec2};

/// One radar sweep: azimuth-major intensity matrix with per-azimuth timing.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarScan {
    azimuths: usize,
    bins: usize,
    intensities: Vec<f32>,
    azimuth_timestamps: Vec<f64>,
    azimuth_angles: Vec<f64>,
    range_resolution: f64,
    min_range: f64,
}

impl PolarScan {
    pub fn new(
        azimuths: usize,
        bins: usize,
        intensities: Vec<f32>,
        azimuth_timestamps: Vec<f64>,
        azimuth_angles: Vec<f64>,
        range_resolution: f64,
        min_range: f64,
    ) -> Result<Self> {
        if azimuths < 2 || bins < 2 {
            return Err(invalid("scan needs at least 2 azimuths and 2 range bins"));
        }
        if intensities.len() != azimuths * bins {
            return Err(invalid("intensity matrix size does not match dimensions"));
        }
        if azimuth_timestamps.len() != azimuths || azimuth_angles.len() != azimuths {
            return Err(invalid("azimuth metadata length does not match azimuth count"));
        }
        if !intensities.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(invalid("intensities must be finite and non-negative"));
        }
        if !azimuth_timestamps.windows(2).all(|w| w[0] < w[1]) || !azimuth_timestamps.iter().all(|t| t.is_finite()) {
            return Err(invalid("azimuth timestamps must be strictly increasing"));
        }
        let two_pi = 2.0 * core::f64::consts::PI;
        if !azimuth_angles.windows(2).all(|w| w[0] < w[1]) || !azimuth_angles.iter().all(|a| (0.0..two_pi).contains(a))
        {
            return Err(invalid("azimuth angles must increase within [0, 2pi)"));
        }
        if !(range_resolution > 0.0) || !min_range.is_finite() {
            return Err(invalid("range resolution must be positive"));
        }
        Ok(PolarScan { azimuths, bins, intensities, azimuth_timestamps, azimuth_angles, range_resolution, min_range })
    }

    pub fn azimuths(&self) -> usize {
        self.azimuths
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn intensities(&self) -> &[f32] {
        &self.intensities
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f32] {
        &self.intensities[a * self.bins..(a + 1) * self.bins]
    }

    pub fn azimuth_timestamps(&self) -> &[f64] {
        &self.azimuth_timestamps
    }

    pub fn azimuth_angles(&self) -> &[f64] {
        &self.azimuth_angles
    }

    pub fn range_resolution(&self) -> f64 {
        self.range_resolution
    }

    pub fn min_range(&self) -> f64 {
        self.min_range
    }

    /// Range in meters of the centre of bin `r`.
    #[inline]
    pub fn range_of_bin(&self, r: usize) -> f64 {
        self.min_range + r as f64 * self.range_resolution
    }

    pub fn start_time(&self) -> f64 {
        self.azimuth_timestamps[0]
    }

    /// The scan timestamp, defined as the last azimuth timestamp.
    pub fn scan_timestamp(&self) -> f64 {
        self.azimuth_timestamps[self.azimuths - 1]
    }

    pub fn max_intensity(&self) -> f32 {
        self.intensities.iter().copied().fold(0.0, f32::max)
    }

    /// Same geometry and timing with replaced intensities.
    pub fn with_intensities(&self, intensities: Vec<f32>) -> Result<Self> {
        if intensities.len() != self.intensities.len() {
            return Err(invalid("intensity matrix size does not match dimensions"));
        }
        if !intensities.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(invalid("intensities must be finite and non-negative"));
        }
        Ok(PolarScan { intensities, ..self.clone() })
    }
}

/// Sensor constants needed by the Doppler model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarIntrinsics {
    /// Range-bin shift per m/s of radial velocity (signed).
    pub doppler_gain: f64,
    pub range_resolution: f64,
    pub min_range: f64,
}

impl RadarIntrinsics {
    pub fn new(doppler_gain: f64, range_resolution: f64, min_range: f64) -> Result<Self> {
        if !(range_resolution > 0.0) || !doppler_gain.is_finite() || !min_range.is_finite() {
            return Err(invalid("invalid radar intrinsics"));
        }
        Ok(RadarIntrinsics { doppler_gain, range_resolution, min_range })
    }
}

impl Default for RadarIntrinsics {
    fn default() -> Self {
        RadarIntrinsics { doppler_gain: 0.2, range_resolution: 0.25, min_range: 0.0 }
    }
}

/// Map-frame points with their intensities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CartesianPoints {
    pub coordinates: Vec<Vec2>,
    pub intensities: Vec<f64>,
}

impl CartesianPoints {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn push(&mut self, p: Vec2, intensity: f64) {
        self.coordinates.push(p);
        self.intensities.push(intensity);
    }
}

/// Per-row resampling parameters for a range shift of `delta` bins: output
/// bin `r` reads the source at `r - delta = r + offset + frac`.
#[inline]
pub(crate) fn shift_split(delta: f64) -> (i64, f64) {
    let src = -delta;
    let offset = libm::floor(src);
    (offset as i64, src - offset)
}

/// Range shift (bins) that the correction applies to a row for velocity `v`.
#[inline]
pub(crate) fn doppler_shift(gain: f64, angle: f64, v: &Vec2) -> f64 {
    let (s, c) = libm::sincos(angle);
    gain * (v.x * c + v.y * s)
}

/// Undo the Doppler range shift of a scan taken at body velocity `v`.
///
/// Each row is moved outward by `doppler_gain * (v . u(theta))` bins using
/// linear interpolation; bins sourced from outside the row read as zero.
pub fn doppler_correct(scan: &PolarScan, v: &Vec2, intrinsics: &RadarIntrinsics) -> PolarScan {
    let bins = scan.bins;
    let mut out = Vec::with_capacity(scan.intensities.len());
    for a in 0..scan.azimuths {
        let row = scan.row(a);
        let delta = doppler_shift(intrinsics.doppler_gain, scan.azimuth_angles[a], v);
        if delta == 0.0 {
            out.extend_from_slice(row);
            continue;
        }
        let (offset, frac) = shift_split(delta);
        let at = |k: i64| -> f64 {
            if k >= 0 && (k as usize) < bins {
                row[k as usize] as f64
            } else {
                0.0
            }
        };
        for r in 0..bins as i64 {
            let k = r + offset;
            out.push(((1.0 - frac) * at(k) + frac * at(k + 1)) as f32);
        }
    }
    PolarScan { intensities: out, ..scan.clone() }
}

/// Convert a scan into Cartesian points in the sensor frame at `anchor_time`,
/// moving every azimuth by the constant-velocity motion model.
///
/// Bins below `intensity_floor` are dropped.
pub fn undistort_to_cartesian(
    scan: &PolarScan,
    yaw_samples: &[GyroSample],
    anchor_time: f64,
    v: &Vec2,
    intensity_floor: f64,
) -> Result<CartesianPoints> {
    if !(v.x.is_finite() && v.y.is_finite()) {
        return Err(invalid("undistort_to_cartesian: non-finite velocity"));
    }
    let motion = PlanarMotion::new(yaw_samples, anchor_time, scan.scan_timestamp())?;
    let mut points = CartesianPoints::default();
    for a in 0..scan.azimuths {
        let pose = motion.pose_at(scan.azimuth_timestamps[a], v);
        let (s, c) = libm::sincos(scan.azimuth_angles[a]);
        for (r, &value) in scan.row(a).iter().enumerate() {
            let value = value as f64;
            if value < intensity_floor {
                continue;
            }
            let range = scan.range_of_bin(r);
            let p = Vec2::new(range * c, range * s);
            points.push(pose.transform_point(&p), value);
        }
    }
    Ok(points)
}

/// Doppler correction and undistortion in one pass: every return keeps its
/// intensity and moves to its corrected range, `doppler_gain * (v . u)` bins
/// further out, before the motion model maps it into the anchor frame.
///
/// This is [`doppler_correct`] followed by [`undistort_to_cartesian`] without
/// the resampling of rows onto the bin lattice.
pub fn undistort_with_doppler(
    scan: &PolarScan,
    yaw_samples: &[GyroSample],
    anchor_time: f64,
    v: &Vec2,
    intrinsics: &RadarIntrinsics,
    intensity_floor: f64,
) -> Result<CartesianPoints> {
    if !(v.x.is_finite() && v.y.is_finite()) {
        return Err(invalid("undistort_with_doppler: non-finite velocity"));
    }
    let motion = PlanarMotion::new(yaw_samples, anchor_time, scan.scan_timestamp())?;
    let mut points = CartesianPoints::default();
    for a in 0..scan.azimuths {
        let pose = motion.pose_at(scan.azimuth_timestamps[a], v);
        let theta = scan.azimuth_angles[a];
        let shift = doppler_shift(intrinsics.doppler_gain, theta, v) * scan.range_resolution;
        let (s, c) = libm::sincos(theta);
        for (r, &value) in scan.row(a).iter().enumerate() {
            let value = value as f64;
            if value < intensity_floor {
                continue;
            }
            let range = scan.range_of_bin(r) + shift;
            points.push(pose.transform_point(&Vec2::new(range * c, range * s)), value);
        }
    }
    Ok(points)
}

/// Like [`undistort_to_cartesian`], with extra points interpolated between
/// neighbouring azimuths wherever they are more than `spacing` meters apart.
///
/// Bin `r` of each row is paired with bin `r` of the next row (the last row
/// pairs with the first); points along the chord between the two undistorted
/// positions carry intensities from a Catmull-Rom spline across the four
/// surrounding azimuths, so the deposited points
/// cover the space between beams at long range. Bins beyond `max_range` are
/// skipped. Returns move to their Doppler-corrected ranges as in
/// [`undistort_with_doppler`].
#[allow(clippy::too_many_arguments)]
pub fn undistort_interpolated(
    scan: &PolarScan,
    yaw_samples: &[GyroSample],
    anchor_time: f64,
    v: &Vec2,
    intrinsics: &RadarIntrinsics,
    intensity_floor: f64,
    spacing: f64,
    max_range: f64,
) -> Result<CartesianPoints> {
    if !(v.x.is_finite() && v.y.is_finite()) {
        return Err(invalid("undistort_interpolated: non-finite velocity"));
    }
    if !(spacing > 0.0) {
        return Err(invalid("undistort_interpolated: spacing must be positive"));
    }
    const MAX_SPLIT: usize = 64;
    let motion = PlanarMotion::new(yaw_samples, anchor_time, scan.scan_timestamp())?;
    let bins = if max_range >= scan.min_range {
        scan.bins.min(libm::floor((max_range - scan.min_range) / scan.range_resolution) as usize + 1)
    } else {
        0
    };
    let ray = |a: usize| {
        let pose = motion.pose_at(scan.azimuth_timestamps[a], v);
        let theta = scan.azimuth_angles[a];
        let shift = doppler_shift(intrinsics.doppler_gain, theta, v) * scan.range_resolution;
        let (s, c) = libm::sincos(theta);
        (pose, c, s, shift)
    };
    let mut points = CartesianPoints::default();
    let n = scan.azimuths;
    let first = ray(0);
    let mut cur = first;
    for a in 0..n {
        let next = if a + 1 < n { ray(a + 1) } else { first };
        let (back, row) = (scan.row((a + n - 1) % n), scan.row(a));
        let (up, ahead) = (scan.row((a + 1) % n), scan.row((a + 2) % n));
        for r in 0..bins {
            let range = scan.range_of_bin(r);
            let (r0, r1) = (range + cur.3, range + next.3);
            let p0 = cur.0.transform_point(&Vec2::new(r0 * cur.1, r0 * cur.2));
            let p1 = next.0.transform_point(&Vec2::new(r1 * next.1, r1 * next.2));
            let v = [back[r] as f64, row[r] as f64, up[r] as f64, ahead[r] as f64];
            let k = if n > 1 { (libm::ceil((p1 - p0).norm() / spacing) as usize).clamp(1, MAX_SPLIT) } else { 1 };
            for j in 0..k {
                let f = j as f64 / k as f64;
                let value = catmull_rom(&v, f);
                if value < intensity_floor {
                    continue;
                }
                points.push(p0 + (p1 - p0) * f, value);
            }
        }
        cur = next;
    }
    Ok(points)
}

/// Catmull-Rom spline through `v[1]` (at 0) and `v[2]` (at 1), clamped at
/// zero since intensities cannot be negative.
#[inline]
fn catmull_rom(v: &[f64; 4], f: f64) -> f64 {
    let [p0, p1, p2, p3] = *v;
    let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    let c = 0.5 * (p2 - p0);
    (((a * f + b) * f + c) * f + p1).max(0.0)
}
