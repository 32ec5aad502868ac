//! Direct scan-to-map registration for the planar body velocity.
//!
//! The objective is the intensity-weighted sum of map values at the
//! Doppler-corrected, motion-undistorted scan points, normalised by the total
//! point intensity. Doppler correction moves every return to its corrected
//! range instead of resampling the row, which keeps intensities (and the
//! normaliser) independent of the velocity. It is maximised over the velocity by gradient ascent with
//! Armijo backtracking, first against a block-averaged copy of the map and
//! then at full resolution.
//!
//! Every azimuth's pose is linear in the velocity, so the per-row motion
//! (beam direction in the world and the 2x2 velocity-to-offset Jacobian) is
//! computed once per scan and each objective evaluation is a single pass over
//! the non-zero bins.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::{GyroSample, PlanarMotion, Pose2, Rotation2, Vec2};
use crate::map::LocalMap;
use crate::radar::{undistort_with_doppler, CartesianPoints, PolarScan, RadarIntrinsics};

/// Planar body velocity (m/s) in the radar frame at scan start.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PlanarVelocity(pub Vec2);

impl PlanarVelocity {
    pub fn new(vx: f64, vy: f64) -> Self {
        PlanarVelocity(Vec2::new(vx, vy))
    }

    pub fn zero() -> Self {
        PlanarVelocity(Vec2::zeros())
    }

    #[inline]
    pub fn vector(&self) -> &Vec2 {
        &self.0
    }

    pub fn speed(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.x.is_finite() && self.0.y.is_finite()
    }
}

impl From<Vec2> for PlanarVelocity {
    fn from(v: Vec2) -> Self {
        PlanarVelocity(v)
    }
}

/// Where the scan is anchored: the previous scan time and the world pose of
/// the sensor at that time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanAnchor {
    pub time: f64,
    pub pose: Pose2,
}

impl ScanAnchor {
    pub fn new(time: f64, pose: Pose2) -> Self {
        ScanAnchor { time, pose }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistrationOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the objective gradient norm (score per m/s).
    pub gradient_tolerance: f64,
    /// Convergence threshold on the accepted step length (m/s).
    pub step_tolerance: f64,
    pub armijo_c: f64,
    pub backtrack_shrink: f64,
    pub max_backtracks: usize,
    /// Length of the first trial step at each level (m/s).
    pub initial_step: f64,
    /// Upper bound on any trial step length (m/s).
    pub max_step: f64,
    pub pyramid_levels: usize,
    pub pyramid_factor: usize,
    pub max_speed: f64,
    /// Minimum number of non-zero bins for a scan to be registrable.
    pub min_points: usize,
    pub intensity_floor: f64,
    /// Weight of the Doppler shift prior; 0 disables it.
    pub doppler_weight: f64,
    pub doppler_window: usize,
    pub doppler_confidence: f64,
    pub huber_width: f64,
    /// Grid spacing (m/s) of the global search used when no velocity guess
    /// is available.
    pub search_step: f64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            max_iterations: 50,
            gradient_tolerance: 1e-3,
            step_tolerance: 1e-4,
            armijo_c: 1e-4,
            backtrack_shrink: 0.5,
            max_backtracks: 30,
            initial_step: 0.5,
            max_step: 5.0,
            pyramid_levels: 2,
            pyramid_factor: 4,
            max_speed: 50.0,
            min_points: 100,
            intensity_floor: 0.0,
            doppler_weight: 0.0,
            doppler_window: 40,
            doppler_confidence: 0.5,
            huber_width: 0.5,
            search_step: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    pub velocity: PlanarVelocity,
    pub score: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Scan points at the optimum, in the sensor frame at the anchor time.
    pub undistorted_points: CartesianPoints,
}

#[derive(Clone, Copy, Debug)]
struct RowGeometry {
    /// Beam direction in the world frame.
    dir: Vec2,
    /// World offset of the row is `anchor + [[p, -q], [q, p]] * v`.
    p: f64,
    q: f64,
    /// Doppler range shift of the row per unit velocity, in meters:
    /// `gain * resolution * u(theta)`.
    doppler: Vec2,
    /// Range of every return in the row before the Doppler shift, paired
    /// with its intensity.
    start: usize,
    end: usize,
}

/// A scan prepared for repeated objective evaluations.
pub struct ScanObjective {
    rows: Vec<RowGeometry>,
    returns: Vec<(f64, f64)>,
    anchor: Vec2,
    total_intensity: f64,
}

impl ScanObjective {
    /// Bins below `intensity_floor` and zero bins are dropped; neither adds
    /// to the score nor to its normaliser.
    pub fn new(
        scan: &PolarScan,
        gyro: &[GyroSample],
        anchor: &ScanAnchor,
        intrinsics: &RadarIntrinsics,
        intensity_floor: f64,
    ) -> Result<Self> {
        let motion = PlanarMotion::new(gyro, anchor.time, scan.scan_timestamp())?;
        let mut rows = Vec::with_capacity(scan.azimuths());
        let mut returns = Vec::new();
        let mut total_intensity = 0.0;
        let (ca, sa) = (anchor.pose.rotation.cos(), anchor.pose.rotation.sin());
        let shift_scale = intrinsics.doppler_gain * scan.range_resolution();
        for a in 0..scan.azimuths() {
            let (theta, ba, bb) = motion.basis_at(scan.azimuth_timestamps()[a]);
            let beam = Rotation2::from_angle(scan.azimuth_angles()[a]);
            let world = anchor.pose.rotation * Rotation2::from_angle(theta) * beam;
            let start = returns.len();
            for (r, &x) in scan.row(a).iter().enumerate() {
                let x = x as f64;
                if x > 0.0 && x >= intensity_floor {
                    returns.push((scan.range_of_bin(r), x));
                    total_intensity += x;
                }
            }
            rows.push(RowGeometry {
                dir: Vec2::new(world.cos(), world.sin()),
                p: ca * ba - sa * bb,
                q: sa * ba + ca * bb,
                doppler: Vec2::new(beam.cos(), beam.sin()) * shift_scale,
                start,
                end: returns.len(),
            });
        }
        Ok(ScanObjective { rows, returns, anchor: anchor.pose.translation, total_intensity })
    }

    /// Normalised score and its gradient with respect to the velocity.
    pub fn evaluate(&self, map: &LocalMap, v: &Vec2) -> (f64, Vec2) {
        if !(self.total_intensity > 0.0) {
            return (0.0, Vec2::zeros());
        }
        let mut num = 0.0;
        let mut grad = Vec2::zeros();
        for row in &self.rows {
            let shift = row.doppler.dot(v);
            let ox = self.anchor.x + row.p * v.x - row.q * v.y;
            let oy = self.anchor.y + row.q * v.x + row.p * v.y;
            let (mut n, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for &(range, iota) in &self.returns[row.start..row.end] {
                let range = range + shift;
                let point = Vec2::new(ox + range * row.dir.x, oy + range * row.dir.y);
                let (beta, g) = map.sample_with_gradient(&point);
                n += iota * beta;
                gx += iota * g.x;
                gy += iota * g.y;
            }
            // Chain rule: the row offset moves with [[p, -q], [q, p]] and the
            // range of every return with the Doppler shift.
            let gr = gx * row.dir.x + gy * row.dir.y;
            num += n;
            grad += Vec2::new(row.p * gx + row.q * gy, -row.q * gx + row.p * gy) + row.doppler * gr;
        }
        (num / self.total_intensity, grad / self.total_intensity)
    }

    /// Number of returns that contribute to the score.
    pub fn contributing_bins(&self) -> usize {
        self.returns.len()
    }
}

/// Normalised cross-correlation score of a scan against the map for a
/// candidate body velocity.
pub fn score(
    map: &LocalMap,
    scan: &PolarScan,
    gyro: &[GyroSample],
    anchor: &ScanAnchor,
    v: &PlanarVelocity,
    intrinsics: &RadarIntrinsics,
) -> Result<f64> {
    if !v.is_finite() {
        return Err(invalid("score: non-finite velocity"));
    }
    let objective = ScanObjective::new(scan, gyro, anchor, intrinsics, 0.0)?;
    Ok(objective.evaluate(map, v.vector()).0)
}

/// Per-row radial velocities measured from the range shift between two
/// consecutive scans.
#[derive(Clone, Debug, PartialEq)]
pub struct DopplerPrior {
    beams: Vec<Vec2>,
    radial: Vec<f64>,
    huber_width: f64,
}

/// Value of the Doppler prior residual for one hypothesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorResidual {
    pub residual: f64,
    pub rows_used: usize,
    /// No row passed the confidence floor; the residual is 0.
    pub degraded: bool,
}

impl DopplerPrior {
    /// Measure per-azimuth shifts between `prev` and `scan`.
    ///
    /// Each row's shift maximises the normalised cross-correlation over
    /// integer lags within `window` bins, refined by a parabola through the
    /// peak. The shift converts to radial velocity through the range
    /// resolution and the time between the scans; the Doppler offset
    /// cancels between scans taken at the same velocity.
    pub fn measure(prev: &PolarScan, scan: &PolarScan, opts: &RegistrationOptions) -> Result<Self> {
        if prev.azimuths() != scan.azimuths() || prev.bins() != scan.bins() {
            return Err(invalid("doppler prior: scans differ in shape"));
        }
        let dt = scan.scan_timestamp() - prev.scan_timestamp();
        if !(dt > 0.0) {
            return Err(invalid("doppler prior: scans are not in time order"));
        }
        let scale = scan.range_resolution() / dt;
        let mut beams = Vec::new();
        let mut radial = Vec::new();
        for a in 0..scan.azimuths() {
            if let Some((shift, peak)) = best_shift(prev.row(a), scan.row(a), opts.doppler_window) {
                if peak >= opts.doppler_confidence {
                    let (s, c) = libm::sincos(scan.azimuth_angles()[a]);
                    beams.push(Vec2::new(c, s));
                    radial.push(shift * scale);
                }
            }
        }
        Ok(DopplerPrior { beams, radial, huber_width: opts.huber_width })
    }

    pub fn rows(&self) -> usize {
        self.radial.len()
    }

    /// Robust mean-squared residual and its gradient in the velocity.
    pub fn evaluate(&self, v: &Vec2) -> (PriorResidual, Vec2) {
        if self.radial.is_empty() {
            return (PriorResidual { residual: 0.0, rows_used: 0, degraded: true }, Vec2::zeros());
        }
        let w = self.huber_width;
        let mut total = 0.0;
        let mut grad = Vec2::zeros();
        for (u, &m) in self.beams.iter().zip(&self.radial) {
            let e = m - u.dot(v);
            let (rho, drho) =
                if e.abs() <= w { (e * e, 2.0 * e) } else { (2.0 * w * e.abs() - w * w, 2.0 * w * e.signum()) };
            total += rho;
            grad -= u * drho;
        }
        let n = self.radial.len() as f64;
        (PriorResidual { residual: total / n, rows_used: self.radial.len(), degraded: false }, grad / n)
    }
}

/// Integer lag (refined) with the best normalised cross-correlation, where a
/// positive lag means features moved to lower range bins in `cur`.
fn best_shift(prev: &[f32], cur: &[f32], window: usize) -> Option<(f64, f64)> {
    let n = cur.len() as i64;
    let w = window as i64;
    let mut scores = Vec::with_capacity(2 * window + 1);
    for lag in -w..=w {
        // Overlap: cur[r] against prev[r + lag].
        let lo = 0.max(-lag);
        let hi = n.min(n - lag);
        if hi - lo < 4 {
            scores.push(f64::NEG_INFINITY);
            continue;
        }
        let m = (hi - lo) as f64;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in lo..hi {
            let a = cur[r as usize] as f64;
            let b = prev[(r + lag) as usize] as f64;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        let va = saa - sa * sa / m;
        let vb = sbb - sb * sb / m;
        if !(va > 0.0 && vb > 0.0) {
            scores.push(f64::NEG_INFINITY);
            continue;
        }
        scores.push((sab - sa * sb / m) / libm::sqrt(va * vb));
    }
    let (best, &peak) = scores.iter().enumerate().filter(|(_, s)| s.is_finite()).max_by(|a, b| a.1.total_cmp(b.1))?;
    let mut lag = best as f64 - w as f64;
    if best > 0 && best + 1 < scores.len() {
        let (l, r) = (scores[best - 1], scores[best + 1]);
        let denom = l - 2.0 * peak + r;
        if l.is_finite() && r.is_finite() && denom < 0.0 {
            lag += 0.5 * (l - r) / denom;
        }
    }
    Some((lag, peak))
}

/// Doppler prior residual between two consecutive scans for a velocity
/// hypothesis. The intrinsics fix the range scale of both scans.
pub fn doppler_prior_residual(
    scan_prev: &PolarScan,
    scan: &PolarScan,
    v: &PlanarVelocity,
    intrinsics: &RadarIntrinsics,
    opts: &RegistrationOptions,
) -> Result<PriorResidual> {
    let _ = intrinsics;
    let prior = DopplerPrior::measure(scan_prev, scan, opts)?;
    Ok(prior.evaluate(v.vector()).0)
}

struct Ascent {
    v: Vec2,
    score: f64,
    gradient: Vec2,
    iterations: usize,
    converged: bool,
}

fn project(v: Vec2, max_speed: f64) -> Vec2 {
    let n = v.norm();
    if n > max_speed {
        v * (max_speed / n)
    } else {
        v
    }
}

/// Gradient ascent with Armijo backtracking. Trial steps after the first use
/// the Barzilai-Borwein length.
fn ascend(mut eval: impl FnMut(&Vec2) -> (f64, Vec2), v0: Vec2, opts: &RegistrationOptions) -> Ascent {
    let mut v = project(v0, opts.max_speed);
    let (mut f, mut g) = eval(&v);
    let mut last: Option<(Vec2, Vec2)> = None;
    let mut iterations = 0;
    loop {
        let gnorm = g.norm();
        if gnorm < opts.gradient_tolerance {
            return Ascent { v, score: f, gradient: g, iterations, converged: true };
        }
        if iterations >= opts.max_iterations {
            return Ascent { v, score: f, gradient: g, iterations, converged: false };
        }
        let mut alpha = match last {
            Some((s, y)) => {
                let sy = s.dot(&y).abs();
                if sy > 0.0 {
                    s.norm_squared() / sy
                } else {
                    opts.initial_step / gnorm
                }
            }
            None => opts.initial_step / gnorm,
        };
        alpha = alpha.min(opts.max_step / gnorm);
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            if alpha * gnorm < opts.step_tolerance {
                break;
            }
            let cand = project(v + g * alpha, opts.max_speed);
            let (fc, gc) = eval(&cand);
            if fc >= f + opts.armijo_c * alpha * gnorm * gnorm {
                accepted = Some((cand, fc, gc));
                break;
            }
            alpha *= opts.backtrack_shrink;
        }
        iterations += 1;
        let Some((cand, fc, gc)) = accepted else {
            // No ascent at the smallest admissible step.
            return Ascent { v, score: f, gradient: g, iterations, converged: true };
        };
        let step = (cand - v).norm();
        last = Some((cand - v, gc - g));
        v = cand;
        f = fc;
        g = gc;
        if step < opts.step_tolerance {
            return Ascent { v, score: f, gradient: g, iterations, converged: true };
        }
    }
}

/// Estimate the planar body velocity of `scan` by maximising its
/// correlation with `map`, starting from `v_init`.
///
/// `prior` is used only when `opts.doppler_weight` is non-zero.
#[allow(clippy::too_many_arguments)]
pub fn estimate_velocity(
    map: &LocalMap,
    scan: &PolarScan,
    gyro: &[GyroSample],
    anchor: &ScanAnchor,
    v_init: &PlanarVelocity,
    intrinsics: &RadarIntrinsics,
    opts: &RegistrationOptions,
    prior: Option<&DopplerPrior>,
) -> Result<RegistrationResult> {
    if !v_init.is_finite() {
        return Err(invalid("estimate_velocity: non-finite initial velocity"));
    }
    let objective = ScanObjective::new(scan, gyro, anchor, intrinsics, opts.intensity_floor)?;
    let count = objective.contributing_bins();
    if count < opts.min_points {
        return Err(Error::DegenerateInput(alloc::format!("{count} contributing bins, need {}", opts.min_points)));
    }
    let prior = prior.filter(|_| opts.doppler_weight != 0.0);
    let lambda = opts.doppler_weight;

    let levels = opts.pyramid_levels.max(1);
    let mut v = *v_init.vector();
    let mut iterations = 0;
    let mut outcome = None;
    for level in 0..levels {
        let factor = opts.pyramid_factor.max(1).pow((levels - 1 - level) as u32);
        let coarse;
        let level_map = if factor > 1 {
            coarse = map.downsample(factor);
            &coarse
        } else {
            map
        };
        let eval = |x: &Vec2| {
            let (s, g) = objective.evaluate(level_map, x);
            match prior {
                Some(p) => {
                    let (r, gr) = p.evaluate(x);
                    (s - lambda * r.residual, g - gr * lambda)
                }
                None => (s, g),
            }
        };
        let a = ascend(eval, v, opts);
        v = a.v;
        iterations += a.iterations;
        outcome = Some(a);
    }
    let a = outcome.expect("at least one level");
    let undistorted = undistort_with_doppler(scan, gyro, anchor.time, &a.v, intrinsics, opts.intensity_floor)?;
    Ok(RegistrationResult {
        velocity: PlanarVelocity(a.v),
        score: a.score,
        gradient_norm: a.gradient.norm(),
        iterations,
        converged: a.converged,
        undistorted_points: undistorted,
    })
}

/// Velocity search without an initial guess: the best point of a square
/// grid (`opts.search_step` apart, within `opts.max_speed`) scored against
/// the coarsest pyramid level seeds [`estimate_velocity`].
#[allow(clippy::too_many_arguments)]
pub fn search_velocity(
    map: &LocalMap,
    scan: &PolarScan,
    gyro: &[GyroSample],
    anchor: &ScanAnchor,
    intrinsics: &RadarIntrinsics,
    opts: &RegistrationOptions,
) -> Result<RegistrationResult> {
    if !(opts.search_step > 0.0) {
        return Err(invalid("search_velocity: search step must be positive"));
    }
    let objective = ScanObjective::new(scan, gyro, anchor, intrinsics, opts.intensity_floor)?;
    let count = objective.contributing_bins();
    if count < opts.min_points {
        return Err(Error::DegenerateInput(alloc::format!("{count} contributing bins, need {}", opts.min_points)));
    }
    let levels = opts.pyramid_levels.max(1);
    let coarse = map.downsample(opts.pyramid_factor.max(1).pow((levels - 1) as u32));
    let n = libm::floor(opts.max_speed / opts.search_step) as i64;
    let mut best = (f64::NEG_INFINITY, Vec2::zeros());
    for i in -n..=n {
        for j in -n..=n {
            let v = Vec2::new(i as f64, j as f64) * opts.search_step;
            if v.norm() > opts.max_speed {
                continue;
            }
            let (f, _) = objective.evaluate(&coarse, &v);
            if f > best.0 {
                best = (f, v);
            }
        }
    }
    estimate_velocity(map, scan, gyro, anchor, &PlanarVelocity(best.1), intrinsics, opts, None)
}
