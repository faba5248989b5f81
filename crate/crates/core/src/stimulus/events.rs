use crate::error::Result;
use crate::params::{Derived, RgbMode, RunConfig};

use super::kernel::{channel_kernel, SpatialKernel};
use super::profile::{temporal_profile, TemporalProfile};
use super::FrameOfReference;

/// Time course of one presentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalShape {
    /// Emits continuously for the whole recording (the continuous reference).
    Always,
    Emission(TemporalProfile<f64>),
}

/// Position of the kernel's left edge at the onset, and its drift afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub left_deg: f64,
    pub drift_deg_s: f64,
}

/// One illumination of one colour channel.
///
/// Contributes `weight * z(t - onset) * ker(x - left - drift * (t - onset))`
/// to the channel luminance, where `z` is the unit-area temporal profile
/// (or 1 for [`TemporalShape::Always`]) and `ker` the unit-area kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Presentation {
    pub channel: usize,
    pub frame_index: usize,
    pub flash_index: usize,
    pub onset_s: f64,
    pub motion: Motion,
    pub weight: f64,
    pub shape: TemporalShape,
}

impl Presentation {
    /// Time interval during which the presentation emits, clipped to `[0, end]`.
    pub fn active(&self, end: f64) -> (f64, f64) {
        match self.shape {
            TemporalShape::Always => (0.0, end),
            TemporalShape::Emission(p) => (self.onset_s.max(0.0), (self.onset_s + p.base_width_s).min(end)),
        }
    }
}

/// All presentations of one run together with what is needed to rasterize them.
#[derive(Debug, Clone)]
pub struct PresentationSet {
    pub continuous: Vec<Presentation>,
    pub sampled: Vec<Presentation>,
    pub kernels: Vec<SpatialKernel<f64>>,
    pub background: Vec<f64>,
    pub frame: FrameOfReference,
    pub recording_s: f64,
    pub derived: Derived,
}

/// Number of captured frames whose first flash starts inside the recording.
pub(crate) fn frame_count(recording_s: f64, frame_s: f64) -> usize {
    ((recording_s / frame_s) - 1e-9).ceil().max(1.0) as usize
}

/// Extra display shift of colour field `channel` that cancels the eye's travel
/// between fields, zero unless correction is enabled in sequential mode.
pub(crate) fn correction_shift(config: &RunConfig, derived: &Derived, channel: usize) -> f64 {
    if config.display.rgb_mode == RgbMode::RgbSeq && config.display.color_offset_correction {
        channel as f64 * derived.velocity_deg_s * derived.field_s
    } else {
        0.0
    }
}

pub fn presentation_events(config: &RunConfig) -> Result<PresentationSet> {
    let derived = config.derive()?;
    let d = &config.display;
    let tracking = config.viewing.tracking;
    let r = derived.velocity_deg_s;
    let x = derived.width_deg;
    let t_rec = config.stimulus.recording_length_s;
    let profile = temporal_profile(d.hold_interval, derived.field_s, d.pixel_response_s)?;
    let flashes = d.flash_count as usize;
    let sequential = d.rgb_mode == RgbMode::RgbSeq;
    let frames = frame_count(t_rec, derived.frame_s);

    let kernels = (0..derived.channel_count())
        .map(|c| channel_kernel::<f64>(&derived, d.rgb_mode, c))
        .collect::<Result<Vec<_>>>()?;

    let mut continuous = Vec::new();
    let mut sampled = Vec::new();
    for (c, lum) in derived.channels.iter().enumerate() {
        let amplitude = lum.increment() * x;
        continuous.push(Presentation {
            channel: c,
            frame_index: 0,
            flash_index: 0,
            onset_s: 0.0,
            motion: Motion {
                left_deg: -x / 2.0,
                drift_deg_s: if tracking { 0.0 } else { r },
            },
            weight: amplitude,
            shape: TemporalShape::Always,
        });
        let shift = correction_shift(config, &derived, c);
        for n in 0..frames {
            let capture = n as f64 * derived.frame_s;
            let display_left = r * capture - x / 2.0 + shift;
            for j in 0..flashes {
                let mut onset = capture + j as f64 * derived.flash_s;
                if sequential {
                    onset += c as f64 * derived.field_s;
                }
                if onset >= t_rec {
                    continue;
                }
                let motion = if tracking {
                    Motion {
                        left_deg: display_left - r * onset,
                        drift_deg_s: -r,
                    }
                } else {
                    Motion {
                        left_deg: display_left,
                        drift_deg_s: 0.0,
                    }
                };
                sampled.push(Presentation {
                    channel: c,
                    frame_index: n,
                    flash_index: j,
                    onset_s: onset,
                    motion,
                    weight: amplitude * derived.flash_s,
                    shape: TemporalShape::Emission(profile),
                });
            }
        }
    }
    sampled.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.channel.cmp(&b.channel)));
    Ok(PresentationSet {
        continuous,
        sampled,
        kernels,
        background: derived.channels.iter().map(|c| c.l_min).collect(),
        frame: if tracking {
            FrameOfReference::Retina
        } else {
            FrameOfReference::Display
        },
        recording_s: t_rec,
        derived,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triple_flash_repeats_positions() {
        let mut cfg = RunConfig::default();
        cfg.display.capture_rate_hz = 60.0;
        cfg.display.flash_count = 3;
        cfg.stimulus.velocity_cm_per_s = 5.0;
        let set = presentation_events(&cfg).unwrap();
        let per_second = set.sampled.iter().filter(|p| p.onset_s < 0.5).count() as f64 / 0.5;
        assert_relative_eq!(per_second, 180.0);
        let first: Vec<_> = set.sampled.iter().filter(|p| p.frame_index == 4).collect();
        assert_eq!(first.len(), 3);
        assert!(first.iter().all(|p| p.motion.left_deg == first[0].motion.left_deg));
        assert_relative_eq!(first[1].onset_s - first[0].onset_s, 1.0 / 180.0, epsilon = 1e-12);
    }

    #[test]
    fn sequential_fields_are_staggered() {
        let mut cfg = RunConfig::default();
        cfg.display.rgb_mode = RgbMode::RgbSeq;
        let set = presentation_events(&cfg).unwrap();
        let frame0: Vec<_> = set.sampled.iter().filter(|p| p.frame_index == 0).collect();
        assert_eq!(frame0.len(), 3);
        for (c, p) in frame0.iter().enumerate() {
            assert_eq!(p.channel, c);
            assert_relative_eq!(p.onset_s, c as f64 / 360.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tracking_lands_at_origin_each_frame() {
        let mut cfg = RunConfig::default();
        cfg.viewing.tracking = true;
        cfg.stimulus.velocity_cm_per_s = 20.0;
        let set = presentation_events(&cfg).unwrap();
        let x = set.derived.width_deg;
        for p in &set.sampled {
            assert_relative_eq!(p.motion.left_deg, -x / 2.0, epsilon = 1e-9);
            assert_relative_eq!(p.motion.drift_deg_s, -set.derived.velocity_deg_s);
        }
        assert_eq!(set.frame, FrameOfReference::Retina);
    }

    #[test]
    fn presentation_weights_match_continuous_average() {
        let cfg = RunConfig::default();
        let set = presentation_events(&cfg).unwrap();
        let per_frame: f64 = set.sampled.iter().filter(|p| p.frame_index == 0).map(|p| p.weight).sum();
        assert_relative_eq!(per_frame, set.continuous[0].weight * set.derived.frame_s, epsilon = 1e-12);
    }
}
