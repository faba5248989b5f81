//! Disparity estimates for time-interlaced stereoscopic presentation.
//!
//! Event times are kept as exact fractions of the capture period and
//! positions as exact multiples of the per-frame displacement, so the
//! invariances of the pairing model hold exactly rather than to rounding.

use std::fmt::Write as _;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EyeOrder, RunConfig, RunMode, StereoTiming};
use crate::stimulus::frame_count;

type Q = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Eye {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeEvent {
    pub eye: Eye,
    pub onset_s: f64,
    pub position_deg: f64,
    pub frame_index: usize,
    pub flash_index: usize,
    /// Onset in capture periods.
    #[serde(skip)]
    pub onset_frames: Q,
    /// Position without the nominal disparity, in per-frame displacements.
    #[serde(skip)]
    pub position_steps: Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pairing {
    RightLeads,
    RightLags,
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub time_s: f64,
    pub disparity_deg: f64,
    pub pairing: Pairing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparitySeries {
    pub pair_samples: Vec<PairSample>,
    pub estimate_deg: f64,
    pub error_deg: f64,
    pub nominal_deg: f64,
    /// Change of the estimate when one sample moves by a full per-frame displacement.
    pub quantum_deg: f64,
    /// Left events dropped with boundary frames.
    pub excluded_left_events: usize,
}

impl DisparitySeries {
    /// `time,disparity,pairing` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,disparity_deg,pairing\n");
        for s in &self.pair_samples {
            let tag = match s.pairing {
                Pairing::RightLeads => "RIGHT_LEADS",
                Pairing::RightLags => "RIGHT_LAGS",
                Pairing::Simultaneous => "SIMULTANEOUS",
            };
            let _ = writeln!(out, "{},{},{}", s.time_s, s.disparity_deg, tag);
        }
        out
    }
}

/// Schedule of both eyes' presentations plus what is needed to convert units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<EyeEvent>,
    pub frame_s: f64,
    /// Per-frame displacement in degrees.
    pub step_deg: f64,
    pub nominal_deg: f64,
}

fn q(n: i64, d: i64) -> Q {
    Ratio::new(n, d)
}

pub fn presentation_schedule(config: &RunConfig) -> Result<Schedule> {
    let st = match (&config.mode, &config.stereo) {
        (RunMode::Stereo, Some(st)) => st,
        _ => return Err(Error::validation("stereo", "stereo parameters are required for a stereo schedule")),
    };
    let derived = config.derive()?;
    let flashes = config.display.flash_count as i64;
    let frames = frame_count(config.stimulus.recording_length_s, derived.frame_s);
    let frame_s = derived.frame_s;
    let step_deg = derived.velocity_deg_s * frame_s;
    let tracking = config.viewing.tracking;
    let (first, second) = match st.eye_order {
        EyeOrder::LeftFirst => (Eye::Left, Eye::Right),
        EyeOrder::RightFirst => (Eye::Right, Eye::Left),
    };
    let capture_offset = |eye: Eye| match st.capture_mode {
        StereoTiming::Alternating if eye == second => q(1, 2),
        _ => Q::zero(),
    };
    let present_offset = |eye: Eye| match st.presentation_mode {
        StereoTiming::Alternating if eye == second => q(1, 2 * flashes),
        _ => Q::zero(),
    };
    let mut events = Vec::with_capacity(frames * flashes as usize * 2);
    for n in 0..frames {
        for j in 0..flashes {
            for eye in [first, second] {
                let capture = Q::from_integer(n as i64) + capture_offset(eye);
                let onset = Q::from_integer(n as i64) + q(j, flashes) + present_offset(eye);
                let steps = if tracking { capture - onset } else { capture };
                let nominal = if eye == Eye::Right { st.nominal_disparity_deg } else { 0.0 };
                events.push(EyeEvent {
                    eye,
                    onset_s: onset.to_f64().unwrap_or(f64::NAN) * frame_s,
                    position_deg: steps.to_f64().unwrap_or(f64::NAN) * step_deg + nominal,
                    frame_index: n,
                    flash_index: j as usize,
                    onset_frames: onset,
                    position_steps: steps,
                });
            }
        }
    }
    events.sort_by(|a, b| a.onset_frames.cmp(&b.onset_frames).then((a.eye as u8).cmp(&(b.eye as u8))));
    Ok(Schedule {
        events,
        frame_s,
        step_deg,
        nominal_deg: st.nominal_disparity_deg,
    })
}

/// Pairs every left event with the coincident right event or, failing that,
/// the nearest preceding and nearest following right events, and averages
/// `x_r - x_l` over all pairings.
///
/// Captured frames in which some left event lacks a partner on one side (the
/// recording boundaries) are left out entirely.
pub fn estimate_disparity(schedule: &Schedule) -> Result<DisparitySeries> {
    let lefts: Vec<&EyeEvent> = schedule.events.iter().filter(|e| e.eye == Eye::Left).collect();
    let rights: Vec<&EyeEvent> = schedule.events.iter().filter(|e| e.eye == Eye::Right).collect();
    if lefts.is_empty() || rights.is_empty() {
        return Err(Error::validation("schedule", "both eyes need at least one presentation"));
    }
    let mut samples = Vec::new();
    let mut sum = Q::zero();
    let mut count = 0i64;
    let mut excluded = 0usize;
    let mut push = |left: &EyeEvent, right: &EyeEvent, pairing: Pairing, samples: &mut Vec<PairSample>| {
        let steps = right.position_steps - left.position_steps;
        sum += steps;
        count += 1;
        let time = (left.onset_frames + right.onset_frames) / Q::from_integer(2);
        samples.push(PairSample {
            time_s: time.to_f64().unwrap_or(f64::NAN) * schedule.frame_s,
            disparity_deg: steps.to_f64().unwrap_or(f64::NAN) * schedule.step_deg + schedule.nominal_deg,
            pairing,
        });
    };
    // a left event is usable when it has a coincident right event or right
    // events on both sides; frames are kept or dropped as a whole so every
    // retained frame contributes the same pairing pattern
    let neighbours = |left: &EyeEvent| {
        let idx = rights.partition_point(|r| r.onset_frames < left.onset_frames);
        let same = rights.get(idx).filter(|r| r.onset_frames == left.onset_frames).copied();
        let before = idx.checked_sub(1).map(|i| rights[i]);
        (same, before, rights.get(idx).copied())
    };
    let usable = |left: &EyeEvent| {
        let (same, before, after) = neighbours(left);
        same.is_some() || (before.is_some() && after.is_some())
    };
    let mut incomplete = std::collections::BTreeSet::new();
    for left in &lefts {
        if !usable(left) {
            incomplete.insert(left.frame_index);
        }
    }
    for left in &lefts {
        if incomplete.contains(&left.frame_index) {
            excluded += 1;
            continue;
        }
        match neighbours(left) {
            (Some(r), _, _) => push(left, r, Pairing::Simultaneous, &mut samples),
            (None, Some(before), Some(after)) => {
                push(left, before, Pairing::RightLeads, &mut samples);
                push(left, after, Pairing::RightLags, &mut samples);
            }
            _ => unreachable!("frame marked complete"),
        }
    }
    if count == 0 {
        return Err(Error::validation("schedule", "no left event has right events on both sides"));
    }
    let mean = sum / Q::from_integer(count);
    let error_deg = mean.to_f64().unwrap_or(f64::NAN) * schedule.step_deg;
    Ok(DisparitySeries {
        pair_samples: samples,
        estimate_deg: schedule.nominal_deg + error_deg,
        error_deg,
        nominal_deg: schedule.nominal_deg,
        quantum_deg: schedule.step_deg.abs() / count as f64,
        excluded_left_events: excluded,
    })
}

/// Magnitude-and-sign of the depth error `v / (2 c f)` in degrees.
///
/// The pairing simulation with left-first presentation reports the negated
/// value for the same velocity (a crossed, nearer error for rightward motion).
pub fn disparity_error_closed_form(v_deg_s: f64, capture_hz: f64, flashes: u32) -> Result<f64> {
    if !(capture_hz > 0.0) {
        return Err(Error::validation("capture_rate_hz", format!("must be positive, got {capture_hz}")));
    }
    if flashes < 1 {
        return Err(Error::validation("flash_count", "must be at least 1"));
    }
    Ok(v_deg_s / capture_hz / (2.0 * flashes as f64))
}

/// Everything a stereo run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoResult {
    pub schedule: Schedule,
    pub series: DisparitySeries,
    pub closed_form_deg: f64,
    pub velocity_deg_s: f64,
}

pub fn run_stereo(config: &RunConfig) -> Result<StereoResult> {
    let schedule = presentation_schedule(config)?;
    let series = estimate_disparity(&schedule)?;
    let derived = config.derive()?;
    let closed_form_deg =
        disparity_error_closed_form(derived.velocity_deg_s, config.display.capture_rate_hz, config.display.flash_count)?;
    Ok(StereoResult {
        schedule,
        series,
        closed_form_deg,
        velocity_deg_s: derived.velocity_deg_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::StereoParams;
    use approx::assert_relative_eq;

    fn fig_config(flashes: u32) -> RunConfig {
        let mut cfg = RunConfig::stereo_default();
        cfg.stimulus.velocity_cm_per_s = 10.0;
        cfg.display.capture_rate_hz = 60.0;
        cfg.display.flash_count = flashes;
        cfg
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(disparity_error_closed_form(11.31, 60.0, 1).unwrap(), 0.09425, epsilon = 1e-12);
        assert_relative_eq!(
            disparity_error_closed_form(5.0, 30.0, 2).unwrap(),
            disparity_error_closed_form(10.0, 60.0, 2).unwrap()
        );
        assert_relative_eq!(
            disparity_error_closed_form(-7.0, 60.0, 1).unwrap(),
            -disparity_error_closed_form(7.0, 60.0, 1).unwrap()
        );
        assert!(disparity_error_closed_form(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn single_flash_error() {
        let res = run_stereo(&fig_config(1)).unwrap();
        assert_relative_eq!(res.series.error_deg * 60.0, -5.6554, epsilon = 1e-3);
        assert_relative_eq!(res.series.error_deg, -res.closed_form_deg, epsilon = 1e-12);
        assert_eq!(res.series.excluded_left_events, 1);
        assert_eq!(run_stereo(&fig_config(3)).unwrap().series.excluded_left_events, 3);
    }

    #[test]
    fn triple_flash_is_a_third() {
        let one = run_stereo(&fig_config(1)).unwrap().series.error_deg;
        let three = run_stereo(&fig_config(3)).unwrap().series.error_deg;
        assert_relative_eq!(three * 3.0, one, max_relative = 1e-12);
    }

    #[test]
    fn alternating_schedule_layout() {
        let s = presentation_schedule(&fig_config(1)).unwrap();
        for e in &s.events {
            let half_frames = e.onset_frames * Q::from_integer(2);
            assert!(half_frames.is_integer());
            let odd = half_frames.to_integer() % 2 == 1;
            assert_eq!(odd, e.eye == Eye::Right);
        }
    }

    #[test]
    fn triple_flash_repeats_positions() {
        let s = presentation_schedule(&fig_config(3)).unwrap();
        let left0: Vec<_> = s.events.iter().filter(|e| e.eye == Eye::Left && e.frame_index == 2).collect();
        assert_eq!(left0.len(), 3);
        assert!(left0.iter().all(|e| e.position_deg == left0[0].position_deg));
    }

    #[test]
    fn simultaneous_presentation_exact() {
        let mut cfg = fig_config(1);
        cfg.stereo.as_mut().unwrap().presentation_mode = StereoTiming::Simultaneous;
        cfg.stereo.as_mut().unwrap().nominal_disparity_deg = 0.25;
        let s = presentation_schedule(&cfg).unwrap();
        let series = estimate_disparity(&s).unwrap();
        assert_eq!(series.error_deg, 0.0);
        assert_eq!(series.estimate_deg, 0.25);
        assert!(series.pair_samples.iter().all(|p| p.pairing == Pairing::Simultaneous));
    }

    #[test]
    fn matched_alternation_exact() {
        let mut cfg = fig_config(1);
        cfg.stereo.as_mut().unwrap().capture_mode = StereoTiming::Alternating;
        let series = run_stereo(&cfg).unwrap().series;
        assert_eq!(series.error_deg, 0.0);
    }

    #[test]
    fn tracking_invariant() {
        for flashes in 1..=3 {
            let mut cfg = fig_config(flashes);
            let a = run_stereo(&cfg).unwrap().series.error_deg;
            cfg.viewing.tracking = true;
            let b = run_stereo(&cfg).unwrap().series.error_deg;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn right_first_flips_sign() {
        let mut cfg = fig_config(1);
        let a = run_stereo(&cfg).unwrap().series.error_deg;
        cfg.stereo.as_mut().unwrap().eye_order = EyeOrder::RightFirst;
        let b = run_stereo(&cfg).unwrap().series.error_deg;
        assert_relative_eq!(a, -b, epsilon = 1e-15);
    }

    #[test]
    fn single_eye_rejected() {
        let sched = Schedule {
            events: presentation_schedule(&fig_config(1))
                .unwrap()
                .events
                .into_iter()
                .filter(|e| e.eye == Eye::Left)
                .collect(),
            frame_s: 1.0 / 60.0,
            step_deg: 0.1,
            nominal_deg: 0.0,
        };
        assert!(estimate_disparity(&sched).is_err());
    }

    #[test]
    fn requires_stereo_mode() {
        assert!(presentation_schedule(&RunConfig::default()).is_err());
        let cfg = RunConfig {
            stereo: Some(StereoParams::default()),
            ..RunConfig::default()
        };
        assert!(presentation_schedule(&cfg).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let series = run_stereo(&fig_config(1)).unwrap().series;
        let csv = series.to_csv();
        assert!(csv.starts_with("time_s,disparity_deg,pairing\n"));
        assert_eq!(csv.lines().count(), series.pair_samples.len() + 1);
    }
}
