use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{Derived, RgbMode, RunConfig};
use crate::scalar::Real;
use crate::spectrum::Spectrum;
use crate::stimulus::SpaceTimeRaster;

/// Replicate line seen on the temporal-frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerLine {
    pub n: i64,
    pub w_hz: f64,
    /// Surviving energy on the line relative to the surviving baseband.
    pub energy_fraction: f64,
}

/// Surviving energy of the replicate pair `+n`/`-n` away from `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEnergy {
    pub n: i64,
    pub energy_fraction: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactReport {
    pub flicker: bool,
    pub flicker_lines: Vec<FlickerLine>,
    pub judder: bool,
    /// Number of distinct `|n| >= 1` replicates above the visibility fraction.
    pub visible_replicates: usize,
    pub replicate_energy: Vec<ReplicateEnergy>,
    pub edge_banding: bool,
    pub motion_blur: bool,
    pub blur_ratio: Option<f64>,
    pub color_breakup: bool,
    pub color_separation_deg: Option<f64>,
}

impl ArtifactReport {
    pub fn all_clear(&self) -> bool {
        !(self.flicker || self.judder || self.edge_banding || self.motion_blur || self.color_breakup)
    }
}

/// Spectral energy of the surviving bins sorted by replicate line.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RidgeEnergy {
    /// Energy of the `n = 0` line.
    pub baseband: f64,
    /// Energy per `|n|` at `|u| >=` the guard band.
    pub replicates: BTreeMap<i64, f64>,
    /// Energy per `n != 0` in the `u = 0` column at `|w| >= c/2`.
    pub axis: BTreeMap<i64, f64>,
}

/// Assigns every bin to the nearest replicate line `w = n c - u q` when it
/// lies within the leakage tolerance of that line.
pub(crate) fn ridge_energy<T: Real>(spec: &Spectrum<T>, config: &RunConfig, derived: &Derived) -> RidgeEnergy {
    let c = config.display.capture_rate_hz;
    let q = if config.viewing.tracking { 0.0 } else { derived.velocity_deg_s };
    let du = spec.du().as_f64();
    let dw = spec.dw().as_f64();
    let tol = 1.5 * dw + 0.5 * q.abs() * du;
    let guard = config.thresholds.frequency_guard_bins * du;
    let (_, u0) = spec.dc_index();

    let mut out = RidgeEnergy {
        baseband: 0.0,
        replicates: BTreeMap::new(),
        axis: BTreeMap::new(),
    };
    for iw in 0..spec.nw {
        let w = spec.w_axis[iw].as_f64();
        for iu in 0..spec.nu {
            let u = spec.u_axis[iu].as_f64();
            let e: f64 = (0..spec.channels).map(|ch| spec.at(ch, iw, iu).norm_sqr().as_f64()).sum();
            if e == 0.0 {
                continue;
            }
            let s = w + q * u;
            let n = (s / c).round();
            if (s - n * c).abs() > tol {
                continue;
            }
            let n = n as i64;
            if n == 0 {
                out.baseband += e;
                continue;
            }
            if u.abs() >= guard - 1e-12 * du {
                *out.replicates.entry(n.abs()).or_default() += e;
            }
            if iu == u0 && w.abs() >= c / 2.0 {
                *out.axis.entry(n).or_default() += e;
            }
        }
    }
    out
}

/// Background-subtracted spatial profile averaged over one captured frame
/// centred on the middle of the recording; `channel = None` sums channels.
pub(crate) fn mid_profile<T: Real>(raster: &SpaceTimeRaster<T>, derived: &Derived, channel: Option<usize>) -> Vec<f64> {
    let dt = raster.t_pitch_s.as_f64();
    let span = ((derived.frame_s / dt).round() as usize).clamp(1, raster.nt);
    let start = (raster.nt - span) / 2;
    let mut out = vec![0.0; raster.nx];
    for c in 0..raster.channels {
        if channel.is_some_and(|k| k != c) {
            continue;
        }
        let bg = derived.channels[c].l_min;
        for k in start..start + span {
            for (o, v) in out.iter_mut().zip(raster.row(c, k)) {
                *o += (v.as_f64() - bg) / span as f64;
            }
        }
    }
    out
}

/// Width of the region around the maximum where the profile stays at or
/// above half the maximum, with linear interpolation at both crossings.
pub fn half_peak_width(profile: &[f64], dx: f64) -> Option<f64> {
    let (imax, &peak) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let left;
    let mut i = imax;
    loop {
        if i == 0 {
            left = 0.0;
            break;
        }
        if profile[i - 1] < half {
            let (a, b) = (profile[i - 1], profile[i]);
            left = (i - 1) as f64 + (half - a) / (b - a);
            break;
        }
        i -= 1;
    }
    let mut right = (profile.len() - 1) as f64;
    let mut j = imax;
    while j + 1 < profile.len() {
        if profile[j + 1] < half {
            let (a, b) = (profile[j], profile[j + 1]);
            right = j as f64 + (a - half) / (a - b);
            break;
        }
        j += 1;
    }
    Some((right - left) * dx)
}

fn centroid(profile: &[f64], x0: f64, dx: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &v) in profile.iter().enumerate() {
        if v > 0.0 {
            num += v * (x0 + i as f64 * dx);
            den += v;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Channel centroids of the reconstruction, in presentation order.
pub(crate) fn channel_centroids<T: Real>(raster: &SpaceTimeRaster<T>, derived: &Derived) -> Vec<Option<f64>> {
    let x0 = raster.x_at(0).as_f64();
    let dx = raster.x_pitch_deg.as_f64();
    (0..raster.channels)
        .map(|c| centroid(&mid_profile(raster, derived, Some(c)), x0, dx))
        .collect()
}

/// Flags artifacts from the filtered sampled spectrum and both reconstructions.
///
/// A replicate is visible when its surviving energy away from `u = 0` is at
/// least `replicate_energy_fraction` of the surviving baseband; flicker uses
/// the same fraction on the `u = 0` column at `|w| >= c/2`. Blur compares
/// half-peak widths of the two percepts, breakup the spread of channel
/// centroids of the sampled percept.
pub fn classify_artifacts<T: Real>(
    filtered: &Spectrum<T>,
    config: &RunConfig,
    continuous: &SpaceTimeRaster<T>,
    sampled: &SpaceTimeRaster<T>,
) -> Result<ArtifactReport> {
    let derived = config.derive()?;
    let th = &config.thresholds;
    let ridges = ridge_energy(filtered, config, &derived);
    let fraction = |e: f64| if ridges.baseband > 0.0 { e / ridges.baseband } else { 0.0 };

    let replicate_energy: Vec<ReplicateEnergy> = ridges
        .replicates
        .iter()
        .map(|(&n, &e)| {
            let f = fraction(e);
            ReplicateEnergy {
                n,
                energy_fraction: f,
                visible: ridges.baseband > 0.0 && f >= th.replicate_energy_fraction,
            }
        })
        .collect();
    let visible_replicates = replicate_energy.iter().filter(|r| r.visible).count();
    let judder = !config.viewing.tracking && visible_replicates > 0;

    let c = config.display.capture_rate_hz;
    let flicker_lines: Vec<FlickerLine> = ridges
        .axis
        .iter()
        .map(|(&n, &e)| FlickerLine {
            n,
            w_hz: n as f64 * c,
            energy_fraction: fraction(e),
        })
        .filter(|l| ridges.baseband > 0.0 && l.energy_fraction >= th.replicate_energy_fraction)
        .collect();

    let dx = continuous.x_pitch_deg.as_f64();
    let wc = half_peak_width(&mid_profile(continuous, &derived, None), dx);
    let ws = half_peak_width(&mid_profile(sampled, &derived, None), sampled.x_pitch_deg.as_f64());
    let blur_ratio = match (ws, wc) {
        (Some(s), Some(c)) if c > 0.0 => Some(s / c),
        _ => None,
    };
    let motion_blur = config.viewing.tracking && blur_ratio.is_some_and(|r| r > th.blur_ratio);

    let color_separation_deg = if config.display.rgb_mode == RgbMode::RgbSeq {
        let cents = channel_centroids(sampled, &derived);
        cents
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) => Some((b - a).abs()),
                _ => None,
            })
            .try_fold(0.0f64, |m, s| s.map(|s| m.max(s)))
    } else {
        None
    };
    let color_breakup = color_separation_deg.is_some_and(|s| s > th.breakup_pixels * derived.pixel_deg);

    Ok(ArtifactReport {
        flicker: !flicker_lines.is_empty(),
        flicker_lines,
        judder,
        visible_replicates,
        replicate_energy,
        edge_banding: judder && config.display.flash_count > 1,
        motion_blur,
        blur_ratio,
        color_breakup,
        color_separation_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_peak_of_triangle() {
        let p: Vec<f64> = (0..11).map(|i| 5.0 - (i as f64 - 5.0).abs()).collect();
        assert_relative_eq!(half_peak_width(&p, 0.1).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn half_peak_of_box() {
        let mut p = vec![0.0; 20];
        p[5..9].iter_mut().for_each(|v| *v = 2.0);
        // crossings interpolate halfway into the neighbouring cells
        assert_relative_eq!(half_peak_width(&p, 1.0).unwrap(), 4.0, epsilon = 1e-12);
        assert!(half_peak_width(&[0.0, -1.0], 1.0).is_none());
    }

    #[test]
    fn centroid_of_pair() {
        assert_eq!(centroid(&[0.0, 1.0, 0.0, 1.0], 10.0, 0.5), Some(11.0));
        assert_eq!(centroid(&[-1.0, 0.0], 0.0, 1.0), None);
    }
}
