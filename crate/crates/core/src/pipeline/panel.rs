use serde::{Deserialize, Serialize};

use crate::params::RgbMode;
use crate::scalar::Real;
use crate::spectrum::Spectrum;
use crate::stimulus::SpaceTimeRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelKind {
    Stimulus,
    InputSpectrum,
    FilteredSpectrum,
    Reconstruction,
    Difference,
}

impl PanelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PanelKind::Stimulus => "stimulus",
            PanelKind::InputSpectrum => "input_spectrum",
            PanelKind::FilteredSpectrum => "filtered_spectrum",
            PanelKind::Reconstruction => "reconstruction",
            PanelKind::Difference => "difference",
        }
    }

    pub fn is_spectrum(self) -> bool {
        matches!(self, PanelKind::InputSpectrum | PanelKind::FilteredSpectrum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelPath {
    Continuous,
    Sampled,
}

impl PanelPath {
    pub fn as_str(self) -> &'static str {
        match self {
            PanelPath::Continuous => "continuous",
            PanelPath::Sampled => "sampled",
        }
    }
}

/// Uniform axis given by the coordinate of its first sample and the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(name: &str, unit: &str, start: f64, step: f64, len: usize) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            start,
            step,
            len,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }
}

/// Everything about a panel except its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub name: String,
    pub kind: PanelKind,
    /// `[channels, rows, cols]`.
    pub shape: [usize; 3],
    pub rows: Axis,
    pub cols: Axis,
    pub unit: String,
    pub channel_names: Vec<String>,
}

/// One displayable array, `[channel][row][col]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<T> {
    pub meta: PanelMeta,
    pub data: Vec<T>,
}

pub fn channel_names(mode: RgbMode) -> Vec<String> {
    match mode {
        RgbMode::Bw => vec!["luminance".into()],
        _ => ["red", "green", "blue"].iter().map(|s| s.to_string()).collect(),
    }
}

impl<T: Real> Panel<T> {
    pub fn from_raster(name: String, kind: PanelKind, raster: &SpaceTimeRaster<T>, names: Vec<String>) -> Self {
        let meta = PanelMeta {
            name,
            kind,
            shape: [raster.channels, raster.nt, raster.nx],
            rows: Axis::new("t", "s", raster.t_at(0).as_f64(), raster.t_pitch_s.as_f64(), raster.nt),
            cols: Axis::new("x", "deg", raster.x_at(0).as_f64(), raster.x_pitch_deg.as_f64(), raster.nx),
            unit: "cd/m^2".into(),
            channel_names: names,
        };
        Self {
            meta,
            data: raster.data.clone(),
        }
    }

    /// Per-channel magnitude of a spectrum.
    pub fn from_spectrum(name: String, kind: PanelKind, spec: &Spectrum<T>, names: Vec<String>) -> Self {
        let meta = PanelMeta {
            name,
            kind,
            shape: [spec.channels, spec.nw, spec.nu],
            rows: Axis::new("w", "Hz", spec.w_axis[0].as_f64(), spec.dw().as_f64(), spec.nw),
            cols: Axis::new("u", "cpd", spec.u_axis[0].as_f64(), spec.du().as_f64(), spec.nu),
            unit: "cd/m^2 deg s".into(),
            channel_names: names,
        };
        let scale = (spec.x_pitch_deg * spec.t_pitch_s * T::from_usize_lossy(spec.nw * spec.nu).sqrt()).as_f64();
        // rescale the unitary DFT to the continuous transform so panels from
        // different grids are comparable
        let data = spec.data.iter().map(|z| T::lit(z.norm().as_f64() * scale)).collect();
        Self { meta, data }
    }

    pub fn plane(&self, channel: usize) -> &[T] {
        let n = self.meta.shape[1] * self.meta.shape[2];
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Sum over channels, `[row][col]`.
    pub fn summed(&self) -> Vec<T> {
        let n = self.meta.shape[1] * self.meta.shape[2];
        let mut out = vec![T::zero(); n];
        for c in 0..self.meta.shape[0] {
            for (o, &v) in out.iter_mut().zip(self.plane(c)) {
                *o += v;
            }
        }
        out
    }

    /// Little-endian `f32` bytes in storage order.
    pub fn to_le_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out
    }
}
