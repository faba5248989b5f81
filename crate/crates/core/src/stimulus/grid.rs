use crate::error::{Error, Result};
use crate::params::RunConfig;

use super::events::{frame_count, PresentationSet, TemporalShape};

/// Sampling lattice shared by the continuous and sampled rasters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterGrid {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub x_origin: f64,
    pub samples_per_frame: usize,
}

impl RasterGrid {
    pub fn duration(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn cells(&self) -> usize {
        self.nt * self.nx
    }
}

/// Time samples per captured frame after the pixel-response and field-alignment adjustments.
pub fn effective_samples_per_frame(config: &RunConfig) -> usize {
    let d = &config.display;
    let mut n = config.grid.temporal_samples_per_frame as usize;
    if d.pixel_response_s > 0.0 {
        let frame = 1.0 / d.capture_rate_hz;
        n = n.max((2.0 * frame / d.pixel_response_s - 1e-9).ceil() as usize);
    }
    let fields = d.flash_count as usize * d.rgb_mode.fields();
    n.div_ceil(fields) * fields
}

/// Smallest 5-smooth integer not below `n`, keeping FFT sizes cheap.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Bytes needed per grid cell and channel across the rasters and spectra of a run.
pub(crate) fn bytes_per_cell(scalar_bytes: usize) -> usize {
    16 * scalar_bytes
}

pub fn plan_grid(config: &RunConfig, set: &PresentationSet) -> Result<RasterGrid> {
    let derived = &set.derived;
    let g = &config.grid;
    let t_rec = set.recording_s;

    let samples_per_frame = effective_samples_per_frame(config);
    let (nt, dt) = match g.time_bins {
        Some(n) => (n, t_rec / n as f64),
        None => {
            let dt = derived.frame_s / samples_per_frame as f64;
            let frames = frame_count(t_rec, derived.frame_s);
            let nt = ((t_rec / dt) - 1e-6).ceil().max(1.0) as usize;
            (nt.min(frames * samples_per_frame).max(1), dt)
        }
    };
    let end = nt as f64 * dt;

    let width = derived.width_deg;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in set.continuous.iter().chain(&set.sampled) {
        let (a, b) = match p.shape {
            TemporalShape::Always => (0.0, end),
            TemporalShape::Emission(_) => p.active(end),
        };
        if a > b {
            continue;
        }
        for t in [a, b] {
            let left = p.motion.left_deg + p.motion.drift_deg_s * (t - p.onset_s);
            lo = lo.min(left);
            hi = hi.max(left + width);
        }
    }

    let dx0 = derived.pixel_deg / g.spatial_samples_per_pixel as f64;
    let margin = width.max(4.0 * dx0);
    let total = (hi - lo + 2.0 * margin) * g.padding_factor;
    let centre = 0.5 * (lo + hi);
    let (nx, dx, x_origin) = match g.space_bins {
        Some(n) => {
            let dx = total / n as f64;
            (n, dx, centre - 0.5 * total)
        }
        None => {
            let n = smooth_size((total / dx0).ceil() as usize);
            let origin0 = centre - 0.5 * n as f64 * dx0;
            let anchor = -width / 2.0;
            let steps = ((anchor - origin0) / dx0).ceil();
            (n, dx0, anchor - steps * dx0)
        }
    };

    let bytes = (nt as f64) * (nx as f64) * derived.channel_count() as f64 * bytes_per_cell(8) as f64;
    let budget = g.memory_budget_mb * 1024.0 * 1024.0;
    if bytes > budget {
        return Err(Error::Resource {
            message: format!(
                "grid of {nt} x {nx} cells needs about {:.0} MB, above the {:.0} MB budget; decrease the recording length or the grid density",
                bytes / 1048576.0,
                g.memory_budget_mb
            ),
        });
    }
    Ok(RasterGrid {
        nt,
        nx,
        dt,
        dx,
        x_origin,
        samples_per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RgbMode;
    use crate::stimulus::presentation_events;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(121), 125);
        assert_eq!(smooth_size(960), 960);
    }

    #[test]
    fn samples_raised_for_response_and_fields() {
        let mut cfg = RunConfig::default();
        cfg.display.pixel_response_s = 1e-3;
        assert_eq!(effective_samples_per_frame(&cfg), 17);
        cfg.display.rgb_mode = RgbMode::RgbSeq;
        cfg.display.hold_interval = 1.0;
        assert_eq!(effective_samples_per_frame(&cfg), 18);
        cfg.display.flash_count = 2;
        cfg.display.pixel_response_s = 0.0;
        assert_eq!(effective_samples_per_frame(&cfg), 18);
    }

    #[test]
    fn grid_covers_trajectory() {
        let cfg = RunConfig::default();
        let set = presentation_events(&cfg).unwrap();
        let g = plan_grid(&cfg, &set).unwrap();
        assert_eq!(g.nt, 60 * 16);
        let r = set.derived.velocity_deg_s;
        assert!(g.x_origin < -set.derived.width_deg / 2.0);
        assert!(g.x_origin + g.nx as f64 * g.dx > r * 0.5 + set.derived.width_deg / 2.0);
        let k = (-set.derived.width_deg / 2.0 - g.x_origin) / g.dx;
        assert!((k - k.round()).abs() < 1e-6);
    }

    #[test]
    fn bin_overrides() {
        let mut cfg = RunConfig::default();
        cfg.grid.time_bins = Some(256);
        cfg.grid.space_bins = Some(512);
        let set = presentation_events(&cfg).unwrap();
        let g = plan_grid(&cfg, &set).unwrap();
        assert_eq!((g.nt, g.nx), (256, 512));
        assert!((g.duration() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_enforced() {
        let mut cfg = RunConfig::default();
        cfg.grid.memory_budget_mb = 0.01;
        let set = presentation_events(&cfg).unwrap();
        assert!(matches!(plan_grid(&cfg, &set), Err(Error::Resource { .. })));
    }
}
