//! Exact cell-averaged rasterization of presentations.
//!
//! Deposits are accumulated in `f64` and converted to the raster scalar at
//! the end, so `f32` rasters carry only the final rounding.

use crate::error::{Error, Result};
use crate::params::RunConfig;
use crate::scalar::Real;

use super::events::{presentation_events, Presentation, PresentationSet, TemporalShape};
use super::grid::{plan_grid, RasterGrid};
use super::kernel::SpatialKernel;
use super::{FrameOfReference, SpaceTimeRaster};

/// Antiderivative of the unit ramp `max(y, 0)`.
fn q(y: f64) -> f64 {
    if y > 0.0 {
        0.5 * y * y
    } else {
        0.0
    }
}

/// Integral over shifts `sigma` in `[s0, s1]` of the overlap length between
/// `[a + sigma, b + sigma]` and `[c0, c1]`.
fn swept_overlap(s0: f64, s1: f64, a: f64, b: f64, c0: f64, c1: f64) -> f64 {
    let anti = |s: f64| q(s - (c0 - b)) - q(s - (c0 - a)) - q(s - (c1 - b)) + q(s - (c1 - a));
    anti(s1) - anti(s0)
}

struct Plane<'a> {
    data: &'a mut [f64],
    grid: &'a RasterGrid,
}

impl Plane<'_> {
    fn cell_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let g = self.grid;
        let first = ((lo - g.x_origin) / g.dx).floor().max(0.0) as usize;
        let last = (((hi - g.x_origin) / g.dx).ceil().max(0.0) as usize).min(g.nx);
        (first, last)
    }

    /// Adds `amount * ker(x - s)` averaged over each cell of row `k`.
    fn deposit_static(&mut self, k: usize, kernel: &SpatialKernel<f64>, s: f64, amount: f64) {
        let h = kernel.height();
        let g = self.grid;
        for &(a, b) in &kernel.bands {
            let (lo, hi) = (s + a, s + b);
            let (first, last) = self.cell_range(lo, hi);
            for i in first..last {
                let c0 = g.x_origin + i as f64 * g.dx;
                let overlap = hi.min(c0 + g.dx) - lo.max(c0);
                if overlap > 0.0 {
                    self.data[k * g.nx + i] += amount * h * overlap / g.dx;
                }
            }
        }
    }

    /// Adds the time integral of `rate * ker(x - s0 - v t)` for `t` in `[0, len]`,
    /// divided by the cell duration.
    fn deposit_moving(&mut self, k: usize, kernel: &SpatialKernel<f64>, s0: f64, v: f64, len: f64, rate: f64) {
        let g = self.grid;
        let sweep = v * len;
        if sweep.abs() < 1e-9 * g.dx {
            self.deposit_static(k, kernel, s0 + 0.5 * sweep, rate * len / g.dt);
            return;
        }
        let s1 = s0 + sweep;
        let (smin, smax) = if s0 < s1 { (s0, s1) } else { (s1, s0) };
        let h = kernel.height();
        let scale = rate * h / (v.abs() * g.dt * g.dx);
        for &(a, b) in &kernel.bands {
            let (first, last) = self.cell_range(smin + a, smax + b);
            for i in first..last {
                let c0 = g.x_origin + i as f64 * g.dx;
                let area = swept_overlap(smin, smax, a, b, c0, c0 + g.dx);
                if area > 0.0 {
                    self.data[k * g.nx + i] += scale * area;
                }
            }
        }
    }
}

fn render_one(plane: &mut Plane<'_>, p: &Presentation, kernel: &SpatialKernel<f64>) {
    let g = *plane.grid;
    let end = g.duration();
    let v = p.motion.drift_deg_s;
    let left_at = |t: f64| p.motion.left_deg + v * (t - p.onset_s);
    match p.shape {
        TemporalShape::Always => {
            for k in 0..g.nt {
                let t0 = k as f64 * g.dt;
                plane.deposit_moving(k, kernel, left_at(t0), v, g.dt, p.weight);
            }
        }
        TemporalShape::Emission(profile) => {
            if profile.is_impulse() {
                if p.onset_s >= 0.0 && p.onset_s < end {
                    let k = ((p.onset_s / g.dt).floor() as usize).min(g.nt - 1);
                    plane.deposit_static(k, kernel, p.motion.left_deg, p.weight / g.dt);
                }
                return;
            }
            let (a, b) = p.active(end);
            if a >= b {
                return;
            }
            let e = profile.edge_width_s;
            let base = profile.base_width_s;
            let mut cuts = vec![p.onset_s, p.onset_s + e, p.onset_s + base - e, p.onset_s + base];
            let k0 = (a / g.dt).floor() as usize;
            let k1 = ((b / g.dt).ceil() as usize).min(g.nt);
            for k in k0..k1 {
                cuts.push(k as f64 * g.dt);
            }
            cuts.push(k1 as f64 * g.dt);
            cuts.retain(|&t| t >= a && t <= b);
            cuts.push(a);
            cuts.push(b);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
            let plateau = profile.plateau_level();
            for w in cuts.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                if t1 - t0 <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (t0 + t1);
                let k = ((mid / g.dt).floor() as usize).min(g.nt - 1);
                let rel0 = t0 - p.onset_s;
                let rel1 = t1 - p.onset_s;
                let on_plateau = e == 0.0 || (rel0 >= e - 1e-15 && rel1 <= base - e + 1e-15);
                if v == 0.0 {
                    let z = profile.integral(rel0, rel1);
                    plane.deposit_static(k, kernel, p.motion.left_deg, p.weight * z / g.dt);
                } else if on_plateau {
                    plane.deposit_moving(k, kernel, left_at(t0), v, t1 - t0, p.weight * plateau);
                } else {
                    let steps = ((v.abs() * (t1 - t0)) / (0.25 * g.dx)).ceil().max(1.0) as usize;
                    let h = (t1 - t0) / steps as f64;
                    for m in 0..steps {
                        let s0 = t0 + m as f64 * h;
                        let z = profile.integral(s0 - p.onset_s, s0 + h - p.onset_s);
                        plane.deposit_static(k, kernel, left_at(s0 + 0.5 * h), p.weight * z / g.dt);
                    }
                }
            }
        }
    }
}

/// Rasterizes `events` on `grid` over the channel backgrounds.
pub fn render_events<T: Real>(
    set: &PresentationSet,
    events: &[Presentation],
    grid: &RasterGrid,
) -> Result<SpaceTimeRaster<T>> {
    let channels = set.background.len();
    let mut planes = vec![0.0f64; channels * grid.cells()];
    for (c, chunk) in planes.chunks_mut(grid.cells()).enumerate() {
        let mut plane = Plane { data: chunk, grid };
        for p in events.iter().filter(|p| p.channel == c) {
            render_one(&mut plane, p, &set.kernels[c]);
        }
    }
    let levels: Vec<T> = set.background.iter().map(|&l| T::lit(l)).collect();
    let mut raster = SpaceTimeRaster::filled(
        channels,
        grid.nt,
        grid.nx,
        &levels,
        T::lit(grid.dx),
        T::lit(grid.dt),
        T::lit(grid.x_origin),
        set.frame,
    )?;
    for (c, chunk) in planes.chunks(grid.cells()).enumerate() {
        let bg = set.background[c];
        for (dst, &v) in raster.plane_mut(c).iter_mut().zip(chunk) {
            *dst = T::lit(bg + v.max(0.0));
        }
    }
    Ok(raster)
}

/// Continuous and sampled rasters of one run on a shared grid.
pub fn render_pair<T: Real>(config: &RunConfig) -> Result<(SpaceTimeRaster<T>, SpaceTimeRaster<T>, RasterGrid)> {
    let set = presentation_events(config)?;
    let grid = plan_grid(config, &set)?;
    let continuous = render_events(&set, &set.continuous, &grid)?;
    let sampled = render_events(&set, &set.sampled, &grid)?;
    Ok((continuous, sampled, grid))
}

/// Continuous reference motion (stationary on the retina when tracking).
pub fn render_continuous<T: Real>(config: &RunConfig) -> Result<SpaceTimeRaster<T>> {
    let set = presentation_events(config)?;
    let grid = plan_grid(config, &set)?;
    render_events(&set, &set.continuous, &grid)
}

/// Display-sampled stimulus in the frame selected by `viewing.tracking`.
pub fn render_sampled<T: Real>(config: &RunConfig) -> Result<SpaceTimeRaster<T>> {
    let set = presentation_events(config)?;
    let grid = plan_grid(config, &set)?;
    render_events(&set, &set.sampled, &grid)
}

/// Display-sampled stimulus seen by an eye tracking the motion.
pub fn render_sampled_tracking<T: Real>(config: &RunConfig) -> Result<SpaceTimeRaster<T>> {
    if !config.viewing.tracking {
        return Err(Error::validation("viewing.tracking", "must be true for the retinal rendering"));
    }
    let raster = render_sampled::<T>(config)?;
    debug_assert_eq!(raster.frame, FrameOfReference::Retina);
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn swept_overlap_total() {
        // sweeping a band fully across a cell integrates to band * cell
        let total = swept_overlap(-10.0, 10.0, 0.0, 0.3, 1.0, 1.2);
        assert_relative_eq!(total, 0.3 * 0.2, epsilon = 1e-12);
    }

    fn base_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.stimulus.recording_length_s = 0.1;
        cfg
    }

    #[test]
    fn static_stimulus_rows_identical() {
        let mut cfg = base_config();
        cfg.stimulus.velocity_cm_per_s = 0.0;
        let r = render_continuous::<f64>(&cfg).unwrap();
        for k in 1..r.nt {
            assert_eq!(r.row(0, k), r.row(0, 0));
        }
    }

    #[test]
    fn background_and_peak_levels() {
        let cfg = base_config();
        let r = render_continuous::<f64>(&cfg).unwrap();
        let bg = 100.0 / 1.1;
        let min = r.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = r.data.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(min, bg, epsilon = 1e-9);
        assert!(max <= 100.0 + 1e-9);
        assert!(max > 99.0);
    }

    #[test]
    fn stroboscopic_columns_at_capture_instants() {
        let mut cfg = base_config();
        cfg.display.hold_interval = 0.0;
        cfg.stimulus.velocity_cm_per_s = 5.0;
        let r = render_sampled::<f64>(&cfg).unwrap();
        let bg = r.at(0, 1, 0);
        for k in 0..r.nt {
            let lit = r.row(0, k).iter().any(|&v| v > bg + 1e-9);
            assert_eq!(lit, k % 16 == 0, "row {k}");
        }
        let v = cfg.derive().unwrap().velocity_deg_s;
        for n in 0..12 {
            let c = r.row_centroid(0, n * 16, bg).unwrap();
            assert!((c - v * n as f64 / 120.0).abs() < r.x_pitch_deg, "frame {n}");
        }
    }

    #[test]
    fn time_average_matches_continuous() {
        let mut cfg = base_config();
        cfg.stimulus.velocity_cm_per_s = 0.0;
        cfg.display.hold_interval = 0.3;
        cfg.display.pixel_response_s = 4e-4;
        let (c, s, g) = render_pair::<f64>(&cfg).unwrap();
        let spf = g.samples_per_frame;
        for i in 0..c.nx {
            let avg: f64 = (0..spf).map(|k| s.at(0, k, i)).sum::<f64>() / spf as f64;
            assert_relative_eq!(avg, c.at(0, 0, i), epsilon = 1e-9);
        }
    }

    #[test]
    fn tracking_continuous_centroid_at_origin() {
        let mut cfg = base_config();
        cfg.viewing.tracking = true;
        cfg.stimulus.velocity_cm_per_s = 3.0;
        let r = render_continuous::<f64>(&cfg).unwrap();
        assert_eq!(r.frame, FrameOfReference::Retina);
        let bg = r.at(0, 0, 0);
        let c0 = r.row_centroid(0, 0, bg).unwrap();
        assert!(c0.abs() < r.x_pitch_deg);
        for k in 1..r.nt {
            assert_eq!(r.row_centroid(0, k, bg).unwrap(), c0);
        }
    }

    #[test]
    fn tracking_requires_flag() {
        assert!(render_sampled_tracking::<f64>(&base_config()).is_err());
    }

    #[test]
    fn f32_and_f64_agree() {
        let cfg = base_config();
        let a = render_sampled::<f64>(&cfg).unwrap();
        let b = render_sampled::<f32>(&cfg).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - *y as f64).abs() < 1e-4 * x.abs().max(1.0));
        }
    }
}
