//! The four-step prediction: render, transform, filter by the visibility
//! window, transform back; followed by artifact classification.

mod artifacts;
mod compare;
mod panel;

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use crate::csf::{build_filter, CsfModel, ModelCard};
use crate::error::{Error, Result};
use crate::params::{Backend, Derived, RunConfig, RunMode, FOVEA_DIAMETER_DEG};
use crate::scalar::Real;
use crate::spectrum::{centred_axis, forward, inverse_with_residue, Spectrum};
use crate::stimulus::{render_pair, RasterGrid, SpaceTimeRaster};

pub use artifacts::{classify_artifacts, half_peak_width, ArtifactReport, FlickerLine, ReplicateEnergy};
pub use compare::{compare_runs, resample_panel, ComparisonEntry, ComparisonResult, Reference};
pub use panel::{channel_names, Axis, Panel, PanelKind, PanelMeta, PanelPath};

/// Spatial offsets (deg) that realign the three colour fields of a
/// sequential display for an eye tracking at `v_deg_s`.
pub fn color_breakup_offsets(v_deg_s: f64, capture_hz: f64) -> [f64; 3] {
    let step = v_deg_s / (3.0 * capture_hz);
    [0.0, step, 2.0 * step]
}

/// Intermediate arrays of one path (continuous or sampled).
#[derive(Debug, Clone)]
pub struct PathStages<T> {
    pub stimulus: SpaceTimeRaster<T>,
    pub input: Spectrum<T>,
    pub filtered: Spectrum<T>,
    pub reconstruction: SpaceTimeRaster<T>,
    pub imaginary_residue: T,
}

/// Everything computed for one run before it is packaged as a [`RunResult`].
#[derive(Debug, Clone)]
pub struct Stages<T> {
    pub derived: Derived,
    pub grid: RasterGrid,
    pub model: CsfModel<T>,
    /// One gain plane per channel, laid out like a spectrum plane.
    pub gains: Vec<Vec<T>>,
    pub continuous: PathStages<T>,
    pub sampled: PathStages<T>,
}

/// Multiplies channel `c` of `spec` by `gains[c]`.
pub fn filter_spectrum<T: Real>(spec: &Spectrum<T>, gains: &[Vec<T>]) -> Result<Spectrum<T>> {
    let n = spec.nw * spec.nu;
    if gains.len() != spec.channels || gains.iter().any(|g| g.len() != n) {
        return Err(Error::AxisMismatch(format!(
            "{} gain planes for a {}-channel {} x {} spectrum",
            gains.len(),
            spec.channels,
            spec.nw,
            spec.nu
        )));
    }
    let mut out = spec.clone();
    for (c, g) in gains.iter().enumerate() {
        for (z, &k) in out.data[c * n..(c + 1) * n].iter_mut().zip(g) {
            *z *= k;
        }
    }
    Ok(out)
}

/// Sensitivity model conditioned on the foveal mean luminance of the stimulus.
pub fn csf_model_for<T: Real>(derived: &Derived) -> Result<CsfModel<T>> {
    let size = derived.width_deg.max(FOVEA_DIAMETER_DEG);
    CsfModel::new(T::lit(derived.l_mean), T::lit(size))
}

fn path<T: Real>(stimulus: SpaceTimeRaster<T>, gains: &[Vec<T>]) -> Result<PathStages<T>> {
    let input = forward(&stimulus)?;
    let filtered = filter_spectrum(&input, gains)?;
    let (reconstruction, imaginary_residue) = inverse_with_residue(&filtered)?;
    Ok(PathStages {
        stimulus,
        input,
        filtered,
        reconstruction,
        imaginary_residue,
    })
}

pub fn run_stages<T: Real>(config: &RunConfig) -> Result<Stages<T>> {
    if config.mode != RunMode::NonStereo {
        return Err(Error::validation("mode", "the prediction pipeline runs in NON_STEREO mode"));
    }
    let derived = config.derive()?;
    let (continuous, sampled, grid) = render_pair::<T>(config)?;
    let model = csf_model_for::<T>(&derived)?;
    let u_axis = centred_axis(grid.nx, T::lit(grid.dx));
    let w_axis = centred_axis(grid.nt, T::lit(grid.dt));
    let gains = derived
        .channels
        .iter()
        .map(|ch| build_filter(&u_axis, &w_axis, &model, T::lit(ch.contrast)))
        .collect::<Result<Vec<_>>>()?;
    let continuous = path(continuous, &gains)?;
    let sampled = path(sampled, &gains)?;
    Ok(Stages {
        derived,
        grid,
        model,
        gains,
        continuous,
        sampled,
    })
}

/// Result of one prediction run.
#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub run_id: String,
    pub config: RunConfig,
    pub backend: Backend,
    pub csf: ModelCard,
    /// Continuous then sampled, each as stimulus, input spectrum, filtered
    /// spectrum, reconstruction.
    pub panels: Vec<Panel<T>>,
    pub report: ArtifactReport,
    pub metrics: BTreeMap<String, f64>,
}

impl<T: Real> RunResult<T> {
    pub fn panel(&self, path: PanelPath, kind: PanelKind) -> &Panel<T> {
        let i = match path {
            PanelPath::Continuous => 0,
            PanelPath::Sampled => 4,
        } + match kind {
            PanelKind::Stimulus | PanelKind::Difference => 0,
            PanelKind::InputSpectrum => 1,
            PanelKind::FilteredSpectrum => 2,
            PanelKind::Reconstruction => 3,
        };
        &self.panels[i]
    }

    pub fn panel_by_name(&self, name: &str) -> Option<&Panel<T>> {
        self.panels.iter().find(|p| p.meta.name == name)
    }
}

pub fn panel_name(path: PanelPath, kind: PanelKind) -> String {
    format!("{}_{}", path.as_str(), kind.as_str())
}

/// The compute backend actually used for a requested one.
pub fn resolve_backend(requested: Backend) -> Backend {
    match requested {
        Backend::Accelerator => {
            log::warn!("no accelerator backend is available; running on the cpu");
            Backend::Cpu
        }
        _ => Backend::Cpu,
    }
}

/// Stable identifier derived from the configuration when none is given.
pub fn default_run_id(config: &RunConfig) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    format!("{config:?}").hash(&mut h);
    format!("run-{:016x}", h.finish())
}

fn panels_of<T: Real>(stages: &Stages<T>, names: &[String]) -> Vec<Panel<T>> {
    let mut out = Vec::with_capacity(8);
    for (p, s) in [(PanelPath::Continuous, &stages.continuous), (PanelPath::Sampled, &stages.sampled)] {
        let n = |k| panel_name(p, k);
        out.push(Panel::from_raster(n(PanelKind::Stimulus), PanelKind::Stimulus, &s.stimulus, names.to_vec()));
        out.push(Panel::from_spectrum(n(PanelKind::InputSpectrum), PanelKind::InputSpectrum, &s.input, names.to_vec()));
        out.push(Panel::from_spectrum(
            n(PanelKind::FilteredSpectrum),
            PanelKind::FilteredSpectrum,
            &s.filtered,
            names.to_vec(),
        ));
        out.push(Panel::from_raster(
            n(PanelKind::Reconstruction),
            PanelKind::Reconstruction,
            &s.reconstruction,
            names.to_vec(),
        ));
    }
    out
}

fn rms_difference<T: Real>(a: &SpaceTimeRaster<T>, b: &SpaceTimeRaster<T>) -> f64 {
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    (sum / a.data.len().max(1) as f64).sqrt()
}

fn min_value<T: Real>(r: &SpaceTimeRaster<T>) -> f64 {
    r.data.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()))
}

/// Renders, filters and reconstructs both paths, then classifies artifacts.
pub fn run_prediction<T: Real>(config: &RunConfig) -> Result<RunResult<T>> {
    let backend = resolve_backend(config.backend);
    let stages = run_stages::<T>(config)?;
    let report = classify_artifacts(
        &stages.sampled.filtered,
        config,
        &stages.continuous.reconstruction,
        &stages.sampled.reconstruction,
    )?;
    let d = &stages.derived;
    let g = &stages.grid;
    let mut metrics = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        metrics.insert(k.to_string(), v);
    };
    put("velocity_deg_s", d.velocity_deg_s);
    put("width_deg", d.width_deg);
    put("pixel_deg", d.pixel_deg);
    put("l_mean_cdm2", d.l_mean);
    put("csf_peak", stages.model.peak().as_f64());
    put("grid_nt", g.nt as f64);
    put("grid_nx", g.nx as f64);
    put("grid_dt_s", g.dt);
    put("grid_dx_deg", g.dx);
    put("continuous_filtered_energy", stages.continuous.filtered.energy().as_f64());
    put("sampled_filtered_energy", stages.sampled.filtered.energy().as_f64());
    put(
        "reconstruction_rms_difference",
        rms_difference(&stages.sampled.reconstruction, &stages.continuous.reconstruction),
    );
    put(
        "reconstruction_min",
        min_value(&stages.sampled.reconstruction).min(min_value(&stages.continuous.reconstruction)),
    );
    put(
        "imaginary_residue",
        stages
            .continuous
            .imaginary_residue
            .as_f64()
            .max(stages.sampled.imaginary_residue.as_f64()),
    );
    put("visible_replicates", report.visible_replicates as f64);
    if let Some(r) = report.blur_ratio {
        put("blur_ratio", r);
    }
    if let Some(s) = report.color_separation_deg {
        put("color_separation_deg", s);
    }
    let names = channel_names(config.display.rgb_mode);
    Ok(RunResult {
        run_id: config.id.clone().unwrap_or_else(|| default_run_id(config)),
        config: config.clone(),
        backend,
        csf: stages.model.card(),
        panels: panels_of(&stages, &names),
        report,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn offsets_step_by_a_third_frame() {
        let o = color_breakup_offsets(22.62, 120.0);
        assert_eq!(o[0], 0.0);
        assert_relative_eq!(o[1], 0.0628, epsilon = 1e-4);
        assert_relative_eq!(o[2], 0.1257, epsilon = 1e-4);
        assert_eq!(color_breakup_offsets(5.0, 30.0)[0], 0.0);
    }

    #[test]
    fn stereo_config_rejected() {
        let err = run_prediction::<f64>(&RunConfig::stereo_default()).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn panel_lookup_by_position() {
        let mut c = RunConfig::default();
        c.stimulus.recording_length_s = 0.05;
        let r = run_prediction::<f64>(&c).unwrap();
        for p in [PanelPath::Continuous, PanelPath::Sampled] {
            for k in [
                PanelKind::Stimulus,
                PanelKind::InputSpectrum,
                PanelKind::FilteredSpectrum,
                PanelKind::Reconstruction,
            ] {
                assert_eq!(r.panel(p, k).meta.name, panel_name(p, k));
            }
        }
    }
}
