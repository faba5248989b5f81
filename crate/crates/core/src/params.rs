//! User-facing parameters, validation and derived physical quantities.
//!
//! Everything a run needs lives in [`RunConfig`]. Lengths are entered in
//! centimetres and converted to visual angle here; the rest of the engine
//! works in degrees, seconds and cd/m².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular diameter of the fovea used for the mean-luminance estimate.
pub const FOVEA_DIAMETER_DEG: f64 = 5.0;

/// Current version of the JSON config layout.
pub const SCHEMA_VERSION: u32 = 1;

const CM_PER_INCH: f64 = 2.54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RgbMode {
    #[default]
    #[serde(rename = "BW")]
    Bw,
    RgbSeq,
    RgbSimul,
}

impl RgbMode {
    pub fn channels(self) -> usize {
        match self {
            RgbMode::Bw => 1,
            _ => 3,
        }
    }

    /// Number of sequential colour fields per flash.
    pub fn fields(self) -> usize {
        match self {
            RgbMode::RgbSeq => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StereoTiming {
    Simultaneous,
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunMode {
    #[default]
    NonStereo,
    Stereo,
}

/// Which eye is shown first within an alternating presentation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EyeOrder {
    #[default]
    LeftFirst,
    RightFirst,
}

/// How a length on the screen maps to visual angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AngleConvention {
    /// Length centred on the line of sight: `2 atan(w / 2D)`.
    Centered,
    /// Length measured from the line of sight: `atan(w / D)`.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Auto,
    Cpu,
    Accelerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusParams {
    /// Horizontal speed on the screen; negative is leftward.
    pub velocity_cm_per_s: f64,
    /// Extent along the motion axis.
    pub width_cm: f64,
    pub recording_length_s: f64,
    /// Total stimulus luminance (summed over channels in RGB modes).
    pub l_max: f64,
}

impl Default for StimulusParams {
    fn default() -> Self {
        Self {
            velocity_cm_per_s: 1.0,
            width_cm: 0.05,
            recording_length_s: 0.5,
            l_max: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayParams {
    pub flash_count: u32,
    pub rgb_mode: RgbMode,
    pub capture_rate_hz: f64,
    /// Fraction of each presentation slot the pixels emit (0 strobe, 1 hold).
    pub hold_interval: f64,
    /// Duration of each linear edge of the pixel response.
    pub pixel_response_s: f64,
    pub dpi: f64,
    pub fill_factor: f64,
    /// Weber contrast: one shared value, or one per channel in RGB modes.
    pub contrast: Vec<f64>,
    /// Shift the later colour fields along the motion to cancel breakup.
    pub color_offset_correction: bool,
}

impl Default for DisplayParams {
    fn default() -> Self {
        Self {
            flash_count: 1,
            rgb_mode: RgbMode::Bw,
            capture_rate_hz: 120.0,
            hold_interval: 0.5,
            pixel_response_s: 0.0,
            dpi: 300.0,
            fill_factor: 1.0,
            contrast: vec![0.1],
            color_offset_correction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewingParams {
    pub distance_cm: f64,
    pub tracking: bool,
    /// Overrides the mode default (centred for motion runs, tangent for stereo).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_convention: Option<AngleConvention>,
}

impl Default for ViewingParams {
    fn default() -> Self {
        Self {
            distance_cm: 50.0,
            tracking: false,
            angle_convention: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoParams {
    pub capture_mode: StereoTiming,
    pub presentation_mode: StereoTiming,
    pub nominal_disparity_deg: f64,
    pub eye_order: EyeOrder,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            capture_mode: StereoTiming::Simultaneous,
            presentation_mode: StereoTiming::Alternating,
            nominal_disparity_deg: 0.0,
            eye_order: EyeOrder::LeftFirst,
        }
    }
}

/// Discretization controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub spatial_samples_per_pixel: u32,
    pub temporal_samples_per_frame: u32,
    /// Multiplier on the spatial extent needed to hold the trajectory.
    pub padding_factor: f64,
    /// Fixes the number of time samples, overriding `temporal_samples_per_frame`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_bins: Option<usize>,
    /// Fixes the number of space samples, overriding `spatial_samples_per_pixel`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_bins: Option<usize>,
    pub memory_budget_mb: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            spatial_samples_per_pixel: 4,
            temporal_samples_per_frame: 16,
            padding_factor: 1.0,
            time_bins: None,
            space_bins: None,
            memory_budget_mb: 4096.0,
        }
    }
}

/// Decision constants for artifact flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactThresholds {
    /// Sampled/continuous half-peak width ratio above which tracking blur is flagged.
    pub blur_ratio: f64,
    /// Channel centroid separation, in pixels, above which colour breakup is flagged.
    pub breakup_pixels: f64,
    /// Spatial-frequency guard band around u = 0, in bins.
    pub frequency_guard_bins: f64,
    /// Surviving replicate energy, relative to the surviving baseband, that counts as visible.
    pub replicate_energy_fraction: f64,
}

impl Default for ArtifactThresholds {
    fn default() -> Self {
        Self {
            blur_ratio: 1.5,
            breakup_pixels: 0.5,
            frequency_guard_bins: 1.0,
            replicate_energy_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub mode: RunMode,
    pub stimulus: StimulusParams,
    pub display: DisplayParams,
    pub viewing: ViewingParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stereo: Option<StereoParams>,
    pub grid: GridSpec,
    pub thresholds: ArtifactThresholds,
    pub backend: Backend,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id: None,
            mode: RunMode::NonStereo,
            stimulus: StimulusParams::default(),
            display: DisplayParams::default(),
            viewing: ViewingParams::default(),
            stereo: None,
            grid: GridSpec::default(),
            thresholds: ArtifactThresholds::default(),
            backend: Backend::Auto,
        }
    }
}

/// Per-channel luminance levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLuminance {
    pub l_max: f64,
    pub l_min: f64,
    pub contrast: f64,
}

impl ChannelLuminance {
    pub fn increment(&self) -> f64 {
        self.l_max - self.l_min
    }
}

/// Quantities computed once from a validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub velocity_deg_s: f64,
    pub width_deg: f64,
    pub pixel_deg: f64,
    /// Capture period.
    pub frame_s: f64,
    /// Period of one flash (capture period / flash count).
    pub flash_s: f64,
    /// Period of one emitted field (flash period / colour fields).
    pub field_s: f64,
    /// Fill factor seen by one channel.
    pub channel_fill: f64,
    pub channels: Vec<ChannelLuminance>,
    pub l_mean: f64,
    pub convention: AngleConvention,
}

impl Derived {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn l_max_total(&self) -> f64 {
        self.channels.iter().map(|c| c.l_max).sum()
    }

    pub fn l_min_total(&self) -> f64 {
        self.channels.iter().map(|c| c.l_min).sum()
    }
}

/// Full-angle conversion of a centred screen length to degrees.
pub fn cm_to_deg(length_cm: f64, distance_cm: f64) -> Result<f64> {
    cm_to_deg_with(length_cm, distance_cm, AngleConvention::Centered)
}

pub fn cm_to_deg_with(length_cm: f64, distance_cm: f64, convention: AngleConvention) -> Result<f64> {
    if !(distance_cm > 0.0) || !distance_cm.is_finite() {
        return Err(Error::validation(
            "viewing.distance_cm",
            format!("must be positive, got {distance_cm}"),
        ));
    }
    let rad = match convention {
        AngleConvention::Centered => 2.0 * (length_cm / (2.0 * distance_cm)).atan(),
        AngleConvention::Tangent => (length_cm / distance_cm).atan(),
    };
    Ok(rad.to_degrees())
}

/// Inverse of [`cm_to_deg_with`].
pub fn deg_to_cm_with(angle_deg: f64, distance_cm: f64, convention: AngleConvention) -> f64 {
    let rad = angle_deg.to_radians();
    match convention {
        AngleConvention::Centered => 2.0 * distance_cm * (rad / 2.0).tan(),
        AngleConvention::Tangent => distance_cm * rad.tan(),
    }
}

/// Background luminance from stimulus luminance and Weber contrast.
pub fn background_luminance(l_max: f64, contrast: f64) -> Result<f64> {
    if !(contrast >= 0.0) {
        return Err(Error::validation(
            "display.contrast",
            format!("must be non-negative, got {contrast}"),
        ));
    }
    if !(l_max > 0.0) {
        return Err(Error::validation(
            "stimulus.l_max",
            format!("must be positive, got {l_max}"),
        ));
    }
    Ok(l_max / (1.0 + contrast))
}

/// Luminance averaged over the fovea for a vertical band of angular width `width_deg`.
///
/// The band is clamped so it never covers more than the foveal area.
pub fn mean_foveal_luminance(l_max: f64, l_min: f64, width_deg: f64) -> Result<f64> {
    if !(l_min >= 0.0) || !(l_max >= l_min) {
        return Err(Error::validation(
            "luminance",
            format!("need l_max >= l_min >= 0, got l_max={l_max}, l_min={l_min}"),
        ));
    }
    if !(width_deg >= 0.0) {
        return Err(Error::validation(
            "stimulus.width",
            format!("must be non-negative, got {width_deg}"),
        ));
    }
    let d = FOVEA_DIAMETER_DEG;
    let area = std::f64::consts::PI * d * d / 4.0;
    let band = (width_deg * d).min(area);
    Ok((l_max * band + l_min * (area - band)) / area)
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive and finite, got {value}")))
    }
}

impl RunConfig {
    pub fn stereo_default() -> Self {
        Self {
            mode: RunMode::Stereo,
            stereo: Some(StereoParams::default()),
            display: DisplayParams {
                capture_rate_hz: 60.0,
                ..DisplayParams::default()
            },
            stimulus: StimulusParams {
                velocity_cm_per_s: 10.0,
                ..StimulusParams::default()
            },
            ..Self::default()
        }
    }

    pub fn angle_convention(&self) -> AngleConvention {
        self.viewing.angle_convention.unwrap_or(match self.mode {
            RunMode::NonStereo => AngleConvention::Centered,
            RunMode::Stereo => AngleConvention::Tangent,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.stimulus;
        let d = &self.display;
        if !s.velocity_cm_per_s.is_finite() {
            return Err(Error::validation("stimulus.velocity_cm_per_s", "must be finite"));
        }
        positive("stimulus.width_cm", s.width_cm)?;
        positive("stimulus.recording_length_s", s.recording_length_s)?;
        positive("stimulus.l_max", s.l_max)?;
        if d.flash_count < 1 {
            return Err(Error::validation("display.flash_count", "must be at least 1"));
        }
        positive("display.capture_rate_hz", d.capture_rate_hz)?;
        if !(0.0..=1.0).contains(&d.hold_interval) {
            return Err(Error::validation(
                "display.hold_interval",
                format!("must lie in [0, 1], got {}", d.hold_interval),
            ));
        }
        if !(d.pixel_response_s >= 0.0) || !d.pixel_response_s.is_finite() {
            return Err(Error::validation(
                "display.pixel_response_s",
                format!("must be non-negative, got {}", d.pixel_response_s),
            ));
        }
        positive("display.dpi", d.dpi)?;
        if !(d.fill_factor > 0.0 && d.fill_factor <= 1.0) {
            return Err(Error::validation(
                "display.fill_factor",
                format!("must lie in (0, 1], got {}", d.fill_factor),
            ));
        }
        match (d.rgb_mode, d.contrast.len()) {
            (_, 1) | (RgbMode::RgbSeq | RgbMode::RgbSimul, 3) => {}
            (mode, n) => {
                return Err(Error::validation(
                    "display.contrast",
                    format!("{n} values given for {mode:?}; expected 1 (or 3 in RGB modes)"),
                ))
            }
        }
        for (i, c) in d.contrast.iter().enumerate() {
            positive(&format!("display.contrast[{i}]"), *c)?;
        }
        let field_s = 1.0 / (d.capture_rate_hz * d.flash_count as f64 * d.rgb_mode.fields() as f64);
        let base = d.hold_interval * field_s;
        // tiny slack so tau == h*dt/2 typed from decimal input still fits
        if base + 1e-15 < 2.0 * d.pixel_response_s {
            return Err(Error::validation(
                "display.pixel_response_s",
                format!(
                    "hold_interval * field_period >= 2 * pixel_response_s violated: {} * {:.6e} s = {:.6e} s < 2 * {:.6e} s",
                    d.hold_interval, field_s, base, d.pixel_response_s
                ),
            ));
        }
        positive("viewing.distance_cm", self.viewing.distance_cm)?;
        match (self.mode, &self.stereo) {
            (RunMode::Stereo, None) => {
                return Err(Error::validation("stereo", "required when mode is STEREO"))
            }
            (RunMode::NonStereo, Some(_)) => {
                return Err(Error::validation("stereo", "only allowed when mode is STEREO"))
            }
            (_, Some(st)) if !st.nominal_disparity_deg.is_finite() => {
                return Err(Error::validation("stereo.nominal_disparity_deg", "must be finite"))
            }
            _ => {}
        }
        let g = &self.grid;
        if g.spatial_samples_per_pixel < 2 {
            return Err(Error::validation("grid.spatial_samples_per_pixel", "must be at least 2"));
        }
        if g.temporal_samples_per_frame < 4 {
            return Err(Error::validation("grid.temporal_samples_per_frame", "must be at least 4"));
        }
        if !(g.padding_factor >= 1.0) || !g.padding_factor.is_finite() {
            return Err(Error::validation("grid.padding_factor", "must be >= 1"));
        }
        for (name, bins) in [("grid.time_bins", g.time_bins), ("grid.space_bins", g.space_bins)] {
            if matches!(bins, Some(n) if n < 8) {
                return Err(Error::validation(name, "must be at least 8 when set"));
            }
        }
        positive("grid.memory_budget_mb", g.memory_budget_mb)?;
        let t = &self.thresholds;
        positive("thresholds.blur_ratio", t.blur_ratio)?;
        positive("thresholds.breakup_pixels", t.breakup_pixels)?;
        positive("thresholds.frequency_guard_bins", t.frequency_guard_bins)?;
        positive("thresholds.replicate_energy_fraction", t.replicate_energy_fraction)?;

        let derived = self.derive_unchecked()?;
        let sub_pixel = derived.channel_fill * derived.pixel_deg;
        if derived.width_deg < sub_pixel {
            return Err(Error::validation(
                "stimulus.width_cm",
                format!(
                    "stimulus ({:.4e} deg) is narrower than one illuminated sub-pixel ({:.4e} deg)",
                    derived.width_deg, sub_pixel
                ),
            ));
        }
        Ok(())
    }

    /// Validates and computes angular sizes, timing and luminance levels.
    pub fn derive(&self) -> Result<Derived> {
        self.validate()?;
        self.derive_unchecked()
    }

    fn derive_unchecked(&self) -> Result<Derived> {
        let s = &self.stimulus;
        let d = &self.display;
        let dist = self.viewing.distance_cm;
        let convention = self.angle_convention();
        let velocity_deg_s = cm_to_deg_with(s.velocity_cm_per_s, dist, convention)?;
        let width_deg = cm_to_deg_with(s.width_cm, dist, convention)?;
        let pixel_deg = cm_to_deg_with(CM_PER_INCH / d.dpi, dist, convention)?;
        let frame_s = 1.0 / d.capture_rate_hz;
        let flash_s = frame_s / d.flash_count as f64;
        let field_s = flash_s / d.rgb_mode.fields() as f64;
        let n = d.rgb_mode.channels();
        let per_channel = s.l_max / n as f64;
        let channels = (0..n)
            .map(|i| {
                let contrast = if d.contrast.len() == 1 { d.contrast[0] } else { d.contrast[i] };
                Ok(ChannelLuminance {
                    l_max: per_channel,
                    l_min: background_luminance(per_channel, contrast)?,
                    contrast,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let l_max_total: f64 = channels.iter().map(|c| c.l_max).sum();
        let l_min_total: f64 = channels.iter().map(|c| c.l_min).sum();
        let l_mean = mean_foveal_luminance(l_max_total, l_min_total, width_deg)?;
        Ok(Derived {
            velocity_deg_s,
            width_deg,
            pixel_deg,
            frame_s,
            flash_s,
            field_s,
            channel_fill: d.fill_factor / n as f64,
            channels,
            l_mean,
            convention,
        })
    }
}
