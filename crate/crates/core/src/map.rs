//! Rolling Cartesian intensity map: a grid of per-cell low-pass filters.
//!
//! Cells that were never written (weight 0) hold value 0, which is also the
//! value read outside the grid, so bilinear sampling needs only the value
//! plane.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::geometry::Vec2;
use crate::radar::CartesianPoints;

/// Grid geometry and filter constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size: f64,
    /// Low-pass coefficient in (0, 1]; 1 keeps no memory.
    pub decay: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { width_m: 200.0, height_m: 200.0, cell_size: 0.5, decay: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
    /// World position of the centre of cell (0, 0).
    origin: Vec2,
    cell_size: f64,
    inv_cell: f64,
    decay: f64,
}

impl LocalMap {
    /// Empty map whose grid centre sits at `center`.
    pub fn new(config: &MapConfig, center: Vec2) -> Result<Self> {
        if !(config.cell_size > 0.0) || !config.cell_size.is_finite() {
            return Err(invalid("map cell size must be positive"));
        }
        if !(config.decay > 0.0 && config.decay <= 1.0) {
            return Err(invalid("map decay must be in (0, 1]"));
        }
        let width = libm::ceil(config.width_m / config.cell_size) as usize;
        let height = libm::ceil(config.height_m / config.cell_size) as usize;
        if width < 2 || height < 2 {
            return Err(invalid("map must span at least 2x2 cells"));
        }
        let half = Vec2::new((width - 1) as f64, (height - 1) as f64) * (0.5 * config.cell_size);
        Ok(LocalMap {
            width,
            height,
            values: vec![0.0; width * height],
            weights: vec![0.0; width * height],
            origin: center - half,
            cell_size: config.cell_size,
            inv_cell: 1.0 / config.cell_size,
            decay: config.decay,
        })
    }

    /// Build a map from explicit value and weight planes (row-major, x fastest).
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<f64>,
        weights: Vec<f64>,
        origin: Vec2,
        cell_size: f64,
        decay: f64,
    ) -> Result<Self> {
        if values.len() != width * height || weights.len() != width * height {
            return Err(invalid("map planes do not match dimensions"));
        }
        if !(cell_size > 0.0) || !(decay > 0.0 && decay <= 1.0) {
            return Err(invalid("invalid map cell size or decay"));
        }
        if !values.iter().all(|v| v.is_finite()) || !weights.iter().all(|w| (0.0..=1.0).contains(w)) {
            return Err(invalid("map values must be finite and weights in [0, 1]"));
        }
        // Unobserved cells read as empty.
        let values = values.iter().zip(&weights).map(|(&v, &w)| if w > 0.0 { v } else { 0.0 }).collect();
        Ok(LocalMap { width, height, values, weights, origin, cell_size, inv_cell: 1.0 / cell_size, decay })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.width + i]
    }

    /// World position of the grid centre.
    pub fn center(&self) -> Vec2 {
        self.origin + Vec2::new((self.width - 1) as f64, (self.height - 1) as f64) * (0.5 * self.cell_size)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    #[inline]
    fn grid_coords(&self, p: &Vec2) -> (f64, f64) {
        ((p.x - self.origin.x) * self.inv_cell, (p.y - self.origin.y) * self.inv_cell)
    }

    #[inline]
    fn at(&self, i: i64, j: i64) -> f64 {
        if i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height {
            self.values[j as usize * self.width + i as usize]
        } else {
            0.0
        }
    }

    /// The four cell values around a point plus its cell fractions.
    #[inline]
    fn corners(&self, p: &Vec2) -> Option<([f64; 4], f64, f64)> {
        let (gx, gy) = self.grid_coords(p);
        // Shifted by one so truncation acts as floor; a point more than a
        // cell outside touches no grid cell.
        let (sx, sy) = (gx + 1.0, gy + 1.0);
        if !(sx >= 0.0 && sy >= 0.0 && sx < (self.width + 1) as f64 && sy < (self.height + 1) as f64) {
            return None;
        }
        let (i, j) = (sx as i64 - 1, sy as i64 - 1);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let c = if i >= 0 && j >= 0 && (i as usize) + 1 < self.width && (j as usize) + 1 < self.height {
            let idx = j as usize * self.width + i as usize;
            [self.values[idx], self.values[idx + 1], self.values[idx + self.width], self.values[idx + self.width + 1]]
        } else {
            [self.at(i, j), self.at(i + 1, j), self.at(i, j + 1), self.at(i + 1, j + 1)]
        };
        Some((c, fx, fy))
    }

    /// Bilinear interpolation of the map at a world point.
    #[inline]
    pub fn sample(&self, p: &Vec2) -> f64 {
        match self.corners(p) {
            Some(([v00, v10, v01, v11], fx, fy)) => {
                let bottom = v00 + (v10 - v00) * fx;
                let top = v01 + (v11 - v01) * fx;
                bottom + (top - bottom) * fy
            }
            None => 0.0,
        }
    }

    /// Exact spatial gradient of the bilinear surface (per meter).
    pub fn sample_gradient(&self, p: &Vec2) -> Vec2 {
        self.sample_with_gradient(p).1
    }

    /// Value and gradient in one lookup.
    #[inline]
    pub fn sample_with_gradient(&self, p: &Vec2) -> (f64, Vec2) {
        match self.corners(p) {
            Some(([v00, v10, v01, v11], fx, fy)) => {
                let dx_bottom = v10 - v00;
                let dx_top = v11 - v01;
                let bottom = v00 + dx_bottom * fx;
                let top = v01 + dx_top * fx;
                let value = bottom + (top - bottom) * fy;
                let inv = self.inv_cell;
                let gx = (dx_bottom + (dx_top - dx_bottom) * fy) * inv;
                let gy = (top - bottom) * inv;
                (value, Vec2::new(gx, gy))
            }
            None => (0.0, Vec2::zeros()),
        }
    }

    /// Deposit world-frame points with bilinear splatting into the per-cell
    /// low-pass filters.
    ///
    /// The splats of one call are pooled per cell first: a cell receiving
    /// total splat weight `W` and weighted intensity sum `S` takes one filter
    /// step towards `S / W` with gain `a * min(1, W)`. A single point gives
    /// exactly the per-point law, and the result does not depend on the order
    /// of the points.
    pub fn update(&mut self, points: &CartesianPoints) {
        let a = self.decay;
        if points.is_empty() {
            return;
        }
        let mut acc_w = vec![0.0; self.values.len()];
        let mut acc_s = vec![0.0; self.values.len()];
        for (p, &intensity) in points.coordinates.iter().zip(&points.intensities) {
            let (gx, gy) = self.grid_coords(p);
            let fx0 = libm::floor(gx);
            let fy0 = libm::floor(gy);
            if !(fx0 >= -1.0 && fy0 >= -1.0 && fx0 < self.width as f64 && fy0 < self.height as f64) {
                continue;
            }
            let (i, j) = (fx0 as i64, fy0 as i64);
            let (fx, fy) = (gx - fx0, gy - fy0);
            let splat = [
                (i, j, (1.0 - fx) * (1.0 - fy)),
                (i + 1, j, fx * (1.0 - fy)),
                (i, j + 1, (1.0 - fx) * fy),
                (i + 1, j + 1, fx * fy),
            ];
            for (ci, cj, w) in splat {
                if w <= 0.0 || ci < 0 || cj < 0 || ci as usize >= self.width || cj as usize >= self.height {
                    continue;
                }
                let idx = cj as usize * self.width + ci as usize;
                acc_w[idx] += w;
                acc_s[idx] += w * intensity;
            }
        }
        for (idx, (&w, &s)) in acc_w.iter().zip(&acc_s).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let old = self.values[idx];
            let target = s / w;
            let gain = a * w.min(1.0);
            // The clamp keeps the step a convex combination under rounding.
            self.values[idx] = ((1.0 - gain) * old + gain * target).clamp(old.min(target), old.max(target));
            self.weights[idx] = (self.weights[idx] + a * w).min(1.0);
        }
    }

    /// Shift the grid by whole cells so its centre is within one cell of
    /// `new_center`. Cells entering the grid start empty.
    pub fn recenter(&mut self, new_center: &Vec2) {
        let d = (new_center - self.center()) / self.cell_size;
        let (kx, ky) = (libm::round(d.x), libm::round(d.y));
        if !(kx.is_finite() && ky.is_finite()) || (kx == 0.0 && ky == 0.0) {
            return;
        }
        let (kx, ky) = (kx as i64, ky as i64);
        let (w, h) = (self.width as i64, self.height as i64);
        let mut values = vec![0.0; self.values.len()];
        let mut weights = vec![0.0; self.weights.len()];
        if kx.abs() < w && ky.abs() < h {
            for j in 0..h {
                let sj = j + ky;
                if sj < 0 || sj >= h {
                    continue;
                }
                let i0 = 0.max(-kx);
                let i1 = w.min(w - kx);
                let dst = (j * w) as usize;
                let src = (sj * w) as usize;
                let (a, b) = ((i0) as usize, (i1) as usize);
                let shift = kx as isize;
                let sa = (a as isize + shift) as usize;
                let sb = (b as isize + shift) as usize;
                values[dst + a..dst + b].copy_from_slice(&self.values[src + sa..src + sb]);
                weights[dst + a..dst + b].copy_from_slice(&self.weights[src + sa..src + sb]);
            }
        }
        self.values = values;
        self.weights = weights;
        self.origin += Vec2::new(kx as f64, ky as f64) * self.cell_size;
    }

    /// Coarser map averaging `factor x factor` blocks of cells.
    pub fn downsample(&self, factor: usize) -> LocalMap {
        if factor <= 1 {
            return self.clone();
        }
        let w = self.width.div_ceil(factor);
        let h = self.height.div_ceil(factor);
        let mut values = vec![0.0; w * h];
        let mut weights = vec![0.0; w * h];
        let block = (factor * factor) as f64;
        for j in 0..self.height {
            let row = (j / factor) * w;
            for i in 0..self.width {
                let idx = j * self.width + i;
                values[row + i / factor] += self.values[idx];
                weights[row + i / factor] += self.weights[idx];
            }
        }
        for (v, wt) in values.iter_mut().zip(weights.iter_mut()) {
            *v /= block;
            *wt /= block;
        }
        let offset = (factor as f64 - 1.0) * 0.5 * self.cell_size;
        LocalMap {
            width: w,
            height: h,
            values,
            weights,
            origin: self.origin + Vec2::new(offset, offset),
            cell_size: self.cell_size * factor as f64,
            inv_cell: 1.0 / (self.cell_size * factor as f64),
            decay: self.decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_map() -> LocalMap {
        let (w, h) = (10, 8);
        let values = (0..w * h).map(|k| (k % w) as f64).collect();
        LocalMap::from_parts(w, h, values, vec![1.0; w * h], Vec2::new(-2.0, 1.0), 0.5, 0.9).unwrap()
    }

    fn cell_center(m: &LocalMap, i: usize, j: usize) -> Vec2 {
        m.origin() + Vec2::new(i as f64, j as f64) * m.cell_size()
    }

    #[test]
    fn sample_lattice_and_center() {
        let m = ramp_map();
        assert_eq!(m.sample(&cell_center(&m, 3, 4)), 3.0);
        let q = LocalMap::from_parts(2, 2, vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], Vec2::zeros(), 1.0, 1.0).unwrap();
        assert_eq!(q.sample(&Vec2::new(0.5, 0.5)), 1.5);
        let far = m.origin() + Vec2::new(-10.0 * m.width() as f64 * m.cell_size(), 0.0);
        assert_eq!(m.sample(&far), 0.0);
        assert_eq!(m.sample_gradient(&far), Vec2::zeros());
    }

    #[test]
    fn gradient_of_uniform_and_ramp() {
        let u = LocalMap::from_parts(6, 6, vec![4.2; 36], vec![1.0; 36], Vec2::zeros(), 0.5, 0.9).unwrap();
        for p in [Vec2::new(0.3, 0.7), Vec2::new(1.26, 2.2), Vec2::new(2.0, 1.0)] {
            assert_eq!(u.sample_gradient(&p), Vec2::zeros());
        }
        let m = ramp_map();
        let g = m.sample_gradient(&(cell_center(&m, 4, 3) + Vec2::new(0.17, 0.09)));
        assert!((g - Vec2::new(1.0 / 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (w, h) = (12, 12);
        let values = (0..w * h)
            .map(|k| {
                let (i, j) = ((k % w) as f64, (k / w) as f64);
                (0.7 * i).sin() * 10.0 + (0.4 * j).cos() * 5.0 + i * j * 0.1
            })
            .collect();
        let m = LocalMap::from_parts(w, h, values, vec![1.0; w * h], Vec2::new(0.0, 0.0), 0.5, 0.9).unwrap();
        let hstep = 1e-4 * m.cell_size();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 1000 {
            let p = Vec2::new(0.6 + next() * 4.2, 0.6 + next() * 4.2);
            let (gx, gy) = ((p.x / 0.5).fract(), (p.y / 0.5).fract());
            // Stay clear of cell seams where the gradient is discontinuous.
            if gx.min(1.0 - gx) < 1e-3 || gy.min(1.0 - gy) < 1e-3 {
                continue;
            }
            let g = m.sample_gradient(&p);
            let fd = Vec2::new(
                (m.sample(&(p + Vec2::new(hstep, 0.0))) - m.sample(&(p - Vec2::new(hstep, 0.0)))) / (2.0 * hstep),
                (m.sample(&(p + Vec2::new(0.0, hstep))) - m.sample(&(p - Vec2::new(0.0, hstep)))) / (2.0 * hstep),
            );
            let rel = (g - fd).norm() / g.norm().max(1e-12);
            assert!(rel < 1e-5, "p={p:?} g={g:?} fd={fd:?}");
            checked += 1;
        }
    }

    #[test]
    fn gradient_half_open_cells() {
        // On a seam the gradient comes from the cell to the upper right.
        let m = LocalMap::from_parts(3, 2, vec![0.0, 1.0, 5.0, 0.0, 1.0, 5.0], vec![1.0; 6], Vec2::zeros(), 1.0, 1.0)
            .unwrap();
        assert_eq!(m.sample_gradient(&Vec2::new(1.0, 0.5)).x, 4.0);
        assert_eq!(m.sample_gradient(&Vec2::new(0.999, 0.5)).x, 1.0);
    }

    #[test]
    fn sample_is_lipschitz() {
        let m = ramp_map();
        // Values span [0, 9] and the out-of-map value is 0.
        let max_diff = m.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let l = core::f64::consts::SQRT_2 * max_diff / m.cell_size();
        for k in 0..200 {
            let p = Vec2::new(-1.9 + k as f64 * 0.023, 1.1 + k as f64 * 0.017);
            let e = Vec2::new(1e-6 * (k as f64).cos(), 1e-6 * (k as f64).sin());
            assert!((m.sample(&p) - m.sample(&(p + e))).abs() <= l * e.norm() * (1.0 + 1e-6) + 1e-15);
        }
    }

    #[test]
    fn update_empty_is_noop_and_memoryless_at_one() {
        let cfg = MapConfig { width_m: 5.0, height_m: 5.0, cell_size: 0.5, decay: 1.0 };
        let mut m = LocalMap::new(&cfg, Vec2::zeros()).unwrap();
        let before = m.clone();
        m.update(&CartesianPoints::default());
        assert_eq!(m, before);
        let p = cell_center(&m, 3, 4);
        let mut pts = CartesianPoints::default();
        pts.push(p, 7.5);
        m.update(&pts);
        assert_eq!(m.value(3, 4), 7.5);
        assert_eq!(m.weight(3, 4), 1.0);
        assert_eq!(m.weight(4, 4), 0.0);
    }

    #[test]
    fn update_converges_geometrically() {
        let cfg = MapConfig { width_m: 5.0, height_m: 5.0, cell_size: 0.5, decay: 0.3 };
        let mut m = LocalMap::new(&cfg, Vec2::zeros()).unwrap();
        let p = cell_center(&m, 2, 2);
        let mut pts = CartesianPoints::default();
        pts.push(p, 4.0);
        let mut err_prev = 4.0;
        for _ in 0..40 {
            m.update(&pts);
            let err = 4.0 - m.value(2, 2);
            assert!((err - err_prev * 0.7).abs() < 1e-12);
            err_prev = err;
        }
        assert!((m.value(2, 2) - 4.0).abs() < 4.0 * 0.7f64.powi(40) + 1e-12);
    }

    #[test]
    fn update_is_convex_combination() {
        let mut m = ramp_map();
        let old = m.clone();
        let mut pts = CartesianPoints::default();
        for k in 0..50 {
            let p = old.origin() + Vec2::new(0.07 * k as f64, 0.05 * k as f64);
            pts.push(p, 2.0 + (k % 5) as f64);
        }
        m.update(&pts);
        let (lo, hi) = (2.0, 6.0);
        for (idx, (&v, &o)) in m.values().iter().zip(old.values()).enumerate() {
            let _ = idx;
            assert!(v >= o.min(lo) - 1e-12 && v <= o.max(hi) + 1e-12);
        }
        assert!(m.weights().iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn recenter_cases() {
        let mut m = ramp_map();
        let old = m.clone();
        m.recenter(&(old.center() + Vec2::new(0.2, -0.24)));
        assert_eq!(m, old);

        m.recenter(&(old.center() + Vec2::new(3.0 * old.cell_size(), 0.0)));
        for j in 0..m.height() {
            for i in 0..m.width() {
                let expected = if i + 3 < old.width() { old.value(i + 3, j) } else { 0.0 };
                assert_eq!(m.value(i, j), expected);
            }
        }
        assert!((m.center() - (old.center() + Vec2::new(1.5, 0.0))).norm() < 1e-12);

        let mut far = old.clone();
        far.recenter(&(old.center() + Vec2::new(100.0, 0.0)));
        assert!(far.is_empty());
        assert!(far.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recenter_round_trip_restores_cells() {
        let m = ramp_map();
        for (dx, dy) in [(2i32, 1i32), (-3, 2), (0, -4), (5, 5)] {
            let mut r = m.clone();
            let d = Vec2::new(dx as f64, dy as f64) * m.cell_size();
            r.recenter(&(m.center() + d));
            r.recenter(&m.center());
            for j in 0..m.height() as i32 {
                for i in 0..m.width() as i32 {
                    let si = i - dx;
                    let sj = j - dy;
                    if si >= 0 && sj >= 0 && (si as usize) < m.width() && (sj as usize) < m.height() {
                        assert_eq!(
                            r.value(i as usize, j as usize).to_bits(),
                            m.value(i as usize, j as usize).to_bits()
                        );
                        assert_eq!(
                            r.weight(i as usize, j as usize).to_bits(),
                            m.weight(i as usize, j as usize).to_bits()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn downsample_block_average() {
        let m = ramp_map();
        let c = m.downsample(2);
        assert_eq!((c.width(), c.height()), (5, 4));
        assert_eq!(c.value(1, 0), 2.5);
        assert_eq!(c.cell_size(), 1.0);
        // Coarse cell centres sit at the centre of their fine block.
        assert!((c.origin() - (m.origin() + Vec2::new(0.25, 0.25))).norm() < 1e-12);
        assert!((c.sample(&(c.origin() + Vec2::new(1.0, 0.0))) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let bad = MapConfig { cell_size: 0.0, ..MapConfig::default() };
        assert!(LocalMap::new(&bad, Vec2::zeros()).is_err());
        let bad = MapConfig { decay: 1.5, ..MapConfig::default() };
        assert!(LocalMap::new(&bad, Vec2::zeros()).is_err());
    }
}
