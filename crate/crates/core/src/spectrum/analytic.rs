//! Closed-form spectra of the rendered stimuli.
//!
//! Every presentation is a shifted, possibly drifting copy of the spatial
//! kernel modulated by the emission trapezoid, so its transform is
//! `K(u) Z(w + u v) exp(-2 pi i (u x0 + w t0))`. Summing over captured frames
//! gives a Dirichlet kernel in `w + u q`, where `q` is the per-frame
//! displacement; as the recording grows this becomes the replicate comb at
//! `w = n c - u q`.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::error::Result;
use crate::params::{Derived, RgbMode, RunConfig};
use crate::scalar::sinc;
use crate::stimulus::{channel_kernel, temporal_profile, SpatialKernel, TemporalProfile};

use crate::stimulus::{correction_shift, frame_count};

/// `sum_{n=0}^{count-1} exp(-2 pi i theta n)`.
pub fn dirichlet(theta: f64, count: usize) -> Complex<f64> {
    let n = count as f64;
    let s = (PI * theta).sin();
    if s.abs() < 1e-12 {
        // theta is an integer: every term is one (up to the residual phase)
        let frac = theta - theta.round();
        return Complex::from_polar(n, -PI * frac * (n - 1.0));
    }
    Complex::from_polar((PI * n * theta).sin() / s, -PI * theta * (n - 1.0))
}

/// Transform of the unit-area kernel with its left edge at the origin.
pub fn kernel_transform(kernel: &SpatialKernel<f64>, u: f64) -> Complex<f64> {
    let h = kernel.height();
    kernel.bands.iter().fold(Complex::new(0.0, 0.0), |acc, &(a, b)| {
        acc + Complex::from_polar(h * (b - a) * sinc(u * (b - a)), -PI * u * (a + b))
    })
}

struct ChannelTerms {
    kernel: SpatialKernel<f64>,
    amplitude: f64,
}

struct Layout {
    derived: Derived,
    profile: TemporalProfile<f64>,
    channels: Vec<ChannelTerms>,
    tracking: bool,
    sequential: bool,
    flashes: usize,
    frames: usize,
    recording_s: f64,
}

fn layout(config: &RunConfig) -> Result<Layout> {
    let derived = config.derive()?;
    let d = &config.display;
    let profile = temporal_profile(d.hold_interval, derived.field_s, d.pixel_response_s)?;
    let channels = (0..derived.channel_count())
        .map(|c| {
            Ok(ChannelTerms {
                kernel: channel_kernel(&derived, d.rgb_mode, c)?,
                amplitude: derived.channels[c].increment() * derived.width_deg,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Layout {
        frames: frame_count(config.stimulus.recording_length_s, derived.frame_s),
        derived,
        profile,
        channels,
        tracking: config.viewing.tracking,
        sequential: d.rgb_mode == RgbMode::RgbSeq,
        flashes: d.flash_count as usize,
        recording_s: config.stimulus.recording_length_s,
    })
}

/// Frame-independent part of one channel's sampled spectrum: everything but
/// the sum over captured frames. Returns the term and the per-frame
/// displacement `q` that enters the frame sum.
fn frame_term(config: &RunConfig, lay: &Layout, c: usize, u: f64, w: f64) -> (Complex<f64>, f64) {
    let d = &lay.derived;
    let r = d.velocity_deg_s;
    let ch = &lay.channels[c];
    let left0 = -d.width_deg / 2.0 + correction_shift(config, d, c);
    let (q, drift) = if lay.tracking { (0.0, -r) } else { (r, 0.0) };
    let k = kernel_transform(&ch.kernel, u);
    let z = lay.profile.transform(w + u * drift);
    let mut flashes = Complex::new(0.0, 0.0);
    for j in 0..lay.flashes {
        let mut s = j as f64 * d.flash_s;
        if lay.sequential {
            s += c as f64 * d.field_s;
        }
        // onset position: on the display it is the captured position; on the
        // retina the eye has moved on by r * s since capture
        let x0 = if lay.tracking { left0 - r * s } else { left0 };
        flashes += Complex::from_polar(1.0, -2.0 * PI * (u * x0 + w * s));
    }
    (k * z * flashes * (ch.amplitude * d.flash_s), q)
}

/// Spectrum of colour channel `channel` (all channels summed when `None`)
/// of the sampled stimulus over the recording, at `(u cpd, w Hz)`.
///
/// Assumes every flash of the last captured frame starts inside the
/// recording, which holds whenever the recording is a whole number of frames.
pub fn analytic_sampled_spectrum(config: &RunConfig, channel: Option<usize>, u: f64, w: f64) -> Result<Complex<f64>> {
    let lay = layout(config)?;
    let dt = lay.derived.frame_s;
    let mut total = Complex::new(0.0, 0.0);
    for c in 0..lay.channels.len() {
        if channel.is_some_and(|k| k != c) {
            continue;
        }
        let (term, q) = frame_term(config, &lay, c, u, w);
        total += term * dirichlet((w + u * q) * dt, lay.frames);
    }
    Ok(total)
}

/// Spectrum of the continuous reference over the recording at `(u, w)`.
pub fn analytic_continuous_spectrum(
    config: &RunConfig,
    channel: Option<usize>,
    u: f64,
    w: f64,
) -> Result<Complex<f64>> {
    let lay = layout(config)?;
    let d = &lay.derived;
    let v = if lay.tracking { 0.0 } else { d.velocity_deg_s };
    let t = lay.recording_s;
    let nu = w + u * v;
    let window = Complex::from_polar(t * sinc(nu * t), -PI * nu * t);
    let left0 = -d.width_deg / 2.0;
    let mut total = Complex::new(0.0, 0.0);
    for (c, ch) in lay.channels.iter().enumerate() {
        if channel.is_some_and(|k| k != c) {
            continue;
        }
        let shift = Complex::from_polar(1.0, -2.0 * PI * u * left0);
        total += kernel_transform(&ch.kernel, u) * shift * window * ch.amplitude;
    }
    Ok(total)
}

/// One line of the replicate comb at spatial frequency `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replicate {
    pub n: i64,
    /// Temporal frequency where the line crosses `u`.
    pub w: f64,
    /// Coefficient of `delta(w - w_n)` for an unbounded recording.
    pub weight: Complex<f64>,
}

/// Coefficient of the `n`-th replicate line at `u` for an unbounded recording.
pub fn replicate_weight(config: &RunConfig, channel: Option<usize>, u: f64, n: i64) -> Result<Replicate> {
    let lay = layout(config)?;
    let c_rate = config.display.capture_rate_hz;
    let q = if lay.tracking { 0.0 } else { lay.derived.velocity_deg_s };
    let w = n as f64 * c_rate - u * q;
    let mut weight = Complex::new(0.0, 0.0);
    for c in 0..lay.channels.len() {
        if channel.is_some_and(|k| k != c) {
            continue;
        }
        // sum_n exp(-2 pi i (w + u q) n dt) -> (1/dt) sum_m delta(w + u q - m / dt)
        weight += frame_term(config, &lay, c, u, w).0 * c_rate;
    }
    Ok(Replicate { n, w, weight })
}

/// Replicates whose line falls inside `|w| <= w_nyquist`, truncated at
/// `|n| <= ceil(w_nyquist / c) + 1`.
pub fn replicate_series(config: &RunConfig, channel: Option<usize>, u: f64, w_nyquist: f64) -> Result<Vec<Replicate>> {
    let c_rate = config.display.capture_rate_hz;
    let limit = (w_nyquist / c_rate).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in -limit..=limit {
        let rep = replicate_weight(config, channel, u, n)?;
        if rep.w.abs() <= w_nyquist {
            out.push(rep);
        }
    }
    Ok(out)
}
