//! Space-time luminance rasters for the continuous reference and every
//! display-sampled variant.

mod events;
mod grid;
mod kernel;
mod profile;
mod render;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) use events::{correction_shift, frame_count};
pub use events::{presentation_events, Motion, Presentation, PresentationSet, TemporalShape};
pub use grid::{effective_samples_per_frame, plan_grid, RasterGrid};
pub use kernel::{channel_kernel, spatial_kernel, SpatialKernel};
pub use profile::{temporal_profile, TemporalProfile};
pub use render::{render_continuous, render_events, render_pair, render_sampled, render_sampled_tracking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameOfReference {
    Display,
    Retina,
}

/// Luminance sampled on a uniform (x, t) grid, one plane per colour channel.
///
/// Sample `(c, k, i)` is the average luminance over the cell
/// `[x_origin + i*dx, x_origin + (i+1)*dx) x [t_origin + k*dt, t_origin + (k+1)*dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeRaster<T> {
    /// Row-major `[channel][time][space]`.
    pub data: Vec<T>,
    pub channels: usize,
    pub nt: usize,
    pub nx: usize,
    pub x_pitch_deg: T,
    pub t_pitch_s: T,
    pub x_origin_deg: T,
    pub t_origin_s: T,
    pub frame: FrameOfReference,
}

impl<T: Real> SpaceTimeRaster<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn filled(
        channels: usize,
        nt: usize,
        nx: usize,
        levels: &[T],
        x_pitch_deg: T,
        t_pitch_s: T,
        x_origin_deg: T,
        frame: FrameOfReference,
    ) -> Result<Self> {
        if levels.len() != channels {
            return Err(Error::AxisMismatch(format!(
                "{} background levels for {channels} channels",
                levels.len()
            )));
        }
        let plane = nt * nx;
        let mut data = Vec::with_capacity(channels * plane);
        for &level in levels {
            data.extend(std::iter::repeat_n(level, plane));
        }
        Ok(Self {
            data,
            channels,
            nt,
            nx,
            x_pitch_deg,
            t_pitch_s,
            x_origin_deg,
            t_origin_s: T::zero(),
            frame,
        })
    }

    pub fn plane(&self, channel: usize) -> &[T] {
        let n = self.nt * self.nx;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [T] {
        let n = self.nt * self.nx;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn row(&self, channel: usize, k: usize) -> &[T] {
        let start = (channel * self.nt + k) * self.nx;
        &self.data[start..start + self.nx]
    }

    pub fn at(&self, channel: usize, k: usize, i: usize) -> T {
        self.data[(channel * self.nt + k) * self.nx + i]
    }

    /// Centre of spatial cell `i`.
    pub fn x_at(&self, i: usize) -> T {
        self.x_origin_deg + (T::from_usize_lossy(i) + T::lit(0.5)) * self.x_pitch_deg
    }

    /// Centre of time cell `k`.
    pub fn t_at(&self, k: usize) -> T {
        self.t_origin_s + (T::from_usize_lossy(k) + T::lit(0.5)) * self.t_pitch_s
    }

    pub fn x_axis(&self) -> Vec<T> {
        (0..self.nx).map(|i| self.x_at(i)).collect()
    }

    pub fn t_axis(&self) -> Vec<T> {
        (0..self.nt).map(|k| self.t_at(k)).collect()
    }

    /// Sum over channels.
    pub fn luminance(&self) -> Vec<T> {
        let n = self.nt * self.nx;
        let mut out = vec![T::zero(); n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.plane(c)) {
                *o += *v;
            }
        }
        out
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.nt == other.nt
            && self.nx == other.nx
            && self.x_pitch_deg == other.x_pitch_deg
            && self.t_pitch_s == other.t_pitch_s
            && self.x_origin_deg == other.x_origin_deg
            && self.t_origin_s == other.t_origin_s
    }

    /// Luminance-weighted centroid of row `k` of `channel` above `floor`.
    pub fn row_centroid(&self, channel: usize, k: usize, floor: T) -> Option<T> {
        let mut num = T::zero();
        let mut den = T::zero();
        for (i, &v) in self.row(channel, k).iter().enumerate() {
            let w = v - floor;
            if w > T::zero() {
                num += w * self.x_at(i);
                den += w;
            }
        }
        (den > T::zero()).then(|| num / den)
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> SpaceTimeRaster<U> {
        SpaceTimeRaster {
            data: self.data.iter().map(|&v| f(v)).collect(),
            channels: self.channels,
            nt: self.nt,
            nx: self.nx,
            x_pitch_deg: U::lit(self.x_pitch_deg.as_f64()),
            t_pitch_s: U::lit(self.t_pitch_s.as_f64()),
            x_origin_deg: U::lit(self.x_origin_deg.as_f64()),
            t_origin_s: U::lit(self.t_origin_s.as_f64()),
            frame: self.frame,
        }
    }
}
