//! Run configuration: `key = value` overrides of pipeline and simulator
//! defaults. Unknown keys are rejected.

use std::path::Path;

use radodom_core::pipeline::PipelineOptions;

use crate::error::Result;
use crate::format::keyvalue::Table;
use crate::scenario::Scenario;

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub pipeline: PipelineOptions,
    pub scenario: Scenario,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let mut t = Table::load(path)?;
        let c = Self::from_table(&mut t)?;
        t.finish()?;
        Ok(c)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut t = Table::new(path, text)?;
        let c = Self::from_table(&mut t)?;
        t.finish()?;
        Ok(c)
    }

    fn from_table(t: &mut Table) -> Result<Self> {
        let mut c = Config::default();
        macro_rules! keys {
            ($prefix:literal, $base:expr, [$($field:ident),* $(,)?]) => {
                $( t.set(concat!($prefix, ".", stringify!($field)), &mut $base.$field)?; )*
            };
        }
        let r = &mut c.pipeline.registration;
        keys!(
            "registration",
            r,
            [
                max_iterations,
                gradient_tolerance,
                step_tolerance,
                armijo_c,
                backtrack_shrink,
                max_backtracks,
                initial_step,
                max_step,
                pyramid_levels,
                pyramid_factor,
                max_speed,
                min_points,
                intensity_floor,
                doppler_weight,
                doppler_window,
                doppler_confidence,
                huber_width,
                search_step,
            ]
        );
        keys!("map", c.pipeline.map, [width_m, height_m, cell_size, decay]);
        keys!(
            "pipeline",
            c.pipeline,
            [map_max_range, max_gyro_gap, rotate_seed, estimate_bias, stationary_ncc, stationary_duration,]
        );
        let s = &mut c.scenario;
        keys!(
            "sim",
            s,
            [seed, scatterers, extent, standstill, accel_time, speed, lap, tilt_deg, gyro_rate, gyro_noise]
        );
        t.set("sim.reflectivity_min", &mut s.reflectivity.0)?;
        t.set("sim.reflectivity_max", &mut s.reflectivity.1)?;
        t.set("sim.gyro_bias_x", &mut s.gyro_bias.x)?;
        t.set("sim.gyro_bias_y", &mut s.gyro_bias.y)?;
        t.set("sim.gyro_bias_z", &mut s.gyro_bias.z)?;
        keys!("sim", s.radar, [azimuths, bins, rpm, beam_sigma, azimuth_sigma]);
        t.set("sim.radar_noise", &mut s.radar.noise_sigma)?;
        keys!("sim", s.intrinsics, [doppler_gain, range_resolution]);
        // Intrinsics are validated by the core constructor.
        s.intrinsics = radodom_core::radar::RadarIntrinsics::new(
            s.intrinsics.doppler_gain,
            s.intrinsics.range_resolution,
            s.intrinsics.min_range,
        )?;
        Ok(c)
    }
}
