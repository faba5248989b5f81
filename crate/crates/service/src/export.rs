//! Files written for runs, stereo runs, CSF tables and comparisons.
//!
//! A panel `name` is stored as `name.f32` (little-endian `f32`, row-major
//! `[channel][row][col]`), `name.json` (its [`Sidecar`]) and `name.png`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use percept_core::csf::{combined_cs, CsfModel, ModelCard};
use percept_core::pipeline::{ArtifactReport, Axis, ComparisonResult, Panel, PanelKind, PanelMeta, Reference};
use percept_core::stereo::{Eye, StereoResult};
use percept_core::{Real, RunResult};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::image::{heatmap, Canvas, Scale, PALETTE};

/// Decades shown below the maximum in spectrum images.
pub const SPECTRUM_DECADES: f64 = 5.0;

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CSF_FILE: &str = "csf.json";
pub const PANEL_DIR: &str = "panels";

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes through a sibling temporary file and a rename, so readers see
/// either nothing or the whole file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{n}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ServiceError::Internal(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarAxes {
    pub rows: Axis,
    pub cols: Axis,
}

/// Description of a stored panel binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub kind: PanelKind,
    /// `[channels, rows, cols]`.
    pub shape: [usize; 3],
    pub axes: SidecarAxes,
    pub unit: String,
    pub channel_names: Vec<String>,
    pub dtype: String,
    pub byte_order: String,
}

impl Sidecar {
    pub fn of(meta: &PanelMeta) -> Self {
        Self {
            name: meta.name.clone(),
            kind: meta.kind,
            shape: meta.shape,
            axes: SidecarAxes {
                rows: meta.rows.clone(),
                cols: meta.cols.clone(),
            },
            unit: meta.unit.clone(),
            channel_names: meta.channel_names.clone(),
            dtype: "float32".into(),
            byte_order: "little".into(),
        }
    }

    pub fn meta(&self) -> PanelMeta {
        PanelMeta {
            name: self.name.clone(),
            kind: self.kind,
            shape: self.shape,
            rows: self.axes.rows.clone(),
            cols: self.axes.cols.clone(),
            unit: self.unit.clone(),
            channel_names: self.channel_names.clone(),
        }
    }
}

/// Heatmap of a panel: log-magnitude for spectra, linear otherwise. Three
/// channels become an RGB image.
pub fn panel_png<T: Real>(panel: &Panel<T>) -> Result<Vec<u8>> {
    let [channels, rows, cols] = panel.meta.shape;
    let planes: Vec<Vec<f64>> = if channels == 3 {
        (0..3).map(|c| panel.plane(c).iter().map(|v| v.as_f64()).collect()).collect()
    } else {
        vec![panel.summed().iter().map(|v| v.as_f64()).collect()]
    };
    let decades = panel.meta.kind.is_spectrum().then_some(SPECTRUM_DECADES);
    heatmap(&planes, rows, cols, decades)
}

pub fn write_panel<T: Real>(dir: &Path, panel: &Panel<T>) -> Result<()> {
    let name = &panel.meta.name;
    write_atomic(&dir.join(format!("{name}.f32")), &panel.to_le_f32_bytes())?;
    write_json(&dir.join(format!("{name}.json")), &Sidecar::of(&panel.meta))?;
    write_atomic(&dir.join(format!("{name}.png")), &panel_png(panel)?)
}

/// Reads a stored panel back; values are the stored `f32` widened.
pub fn read_panel(dir: &Path, name: &str) -> Result<Panel<f64>> {
    let sidecar: Sidecar = read_json(&dir.join(format!("{name}.json")))?;
    let bytes = fs::read(dir.join(format!("{name}.f32")))?;
    let [c, r, k] = sidecar.shape;
    if bytes.len() != c * r * k * 4 {
        return Err(ServiceError::Internal(format!(
            "panel {name}: {} bytes for shape {:?}",
            bytes.len(),
            sidecar.shape
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(Panel {
        meta: sidecar.meta(),
        data,
    })
}

/// Panels, flags, metrics and the CSF model card of a prediction run.
pub fn write_prediction<T: Real>(dir: &Path, result: &percept_core::pipeline::RunResult<T>) -> Result<()> {
    let panels = dir.join(PANEL_DIR);
    for p in &result.panels {
        write_panel(&panels, p)?;
    }
    write_json(&dir.join(REPORT_FILE), &result.report)?;
    write_json(&dir.join(METRICS_FILE), &result.metrics)?;
    write_json(&dir.join(CSF_FILE), &result.csf)
}

/// Rebuilds a run from [`write_prediction`] output and its effective config.
pub fn read_prediction(dir: &Path, run_id: &str, config: percept_core::RunConfig) -> Result<RunResult> {
    let report: ArtifactReport = read_json(&dir.join(REPORT_FILE))?;
    let metrics: BTreeMap<String, f64> = read_json(&dir.join(METRICS_FILE))?;
    let csf: ModelCard = read_json(&dir.join(CSF_FILE))?;
    let names: Vec<String> = [percept_core::pipeline::PanelPath::Continuous, percept_core::pipeline::PanelPath::Sampled]
        .iter()
        .flat_map(|&p| {
            [
                PanelKind::Stimulus,
                PanelKind::InputSpectrum,
                PanelKind::FilteredSpectrum,
                PanelKind::Reconstruction,
            ]
            .map(|k| percept_core::pipeline::panel_name(p, k))
        })
        .collect();
    let panels = names
        .iter()
        .map(|n| read_panel(&dir.join(PANEL_DIR), n))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        run_id: run_id.to_string(),
        backend: percept_core::pipeline::resolve_backend(config.backend),
        config,
        csf,
        panels,
        report,
        metrics,
    })
}

pub const STEREO_FILE: &str = "stereo.json";
pub const STEREO_PNG: &str = "stereo.png";
pub const DISPARITY_CSV: &str = "disparity.csv";

/// Two stacked plots: eye positions against time, then paired disparity
/// (arcmin) against time with the nominal and estimated levels.
pub fn stereo_png(result: &StereoResult) -> Result<Vec<u8>> {
    let (w, h) = (640usize, 480usize);
    let mut canvas = Canvas::new(w, h);
    let (l, r) = (40.0, (w - 20) as f64);
    let events = &result.schedule.events;
    let times = events.iter().map(|e| e.onset_s);
    let tx = Scale::fit(times, false, l, r);

    let (top0, top1) = (20.0, 220.0);
    canvas.rect(l as usize, top0 as usize, r as usize, top1 as usize, [0, 0, 0]);
    let py = Scale::fit(events.iter().map(|e| e.position_deg), false, top1 - 5.0, top0 + 5.0);
    for e in events {
        let colour = if e.eye == Eye::Left { PALETTE[0] } else { PALETTE[1] };
        canvas.dot((tx.px(e.onset_s), py.px(e.position_deg)), colour);
    }

    let (bot0, bot1) = (260.0, 460.0);
    canvas.rect(l as usize, bot0 as usize, r as usize, bot1 as usize, [0, 0, 0]);
    let s = &result.series;
    let arcmin: Vec<f64> = s.pair_samples.iter().map(|p| p.disparity_deg * 60.0).collect();
    let levels = [s.nominal_deg * 60.0, s.estimate_deg * 60.0];
    let dy = Scale::fit(arcmin.iter().copied().chain(levels), false, bot1 - 5.0, bot0 + 5.0);
    canvas.line((l, dy.px(levels[0])), (r, dy.px(levels[0])), [160, 160, 160]);
    canvas.line((l, dy.px(levels[1])), (r, dy.px(levels[1])), PALETTE[3]);
    for (p, &v) in s.pair_samples.iter().zip(&arcmin) {
        canvas.dot((tx.px(p.time_s), dy.px(v)), PALETTE[2]);
    }
    canvas.encode()
}

pub fn write_stereo(dir: &Path, result: &StereoResult) -> Result<()> {
    write_atomic(&dir.join(DISPARITY_CSV), result.series.to_csv().as_bytes())?;
    write_json(&dir.join(STEREO_FILE), result)?;
    write_atomic(&dir.join(STEREO_PNG), &stereo_png(result)?)
}

/// Sampling of the CSF tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsfTables {
    pub luminances_cdm2: Vec<f64>,
    pub object_size_deg: f64,
    pub u_range_cpd: (f64, f64),
    pub w_range_hz: (f64, f64),
    pub points: usize,
}

impl Default for CsfTables {
    fn default() -> Self {
        Self {
            luminances_cdm2: vec![0.5, 5.0, 50.0, 160.0, 500.0],
            object_size_deg: 5.0,
            u_range_cpd: (0.1, 60.0),
            w_range_hz: (0.5, 100.0),
            points: 64,
        }
    }
}

fn log_space((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

fn family_png(curves: &[(f64, Vec<(f64, f64)>)]) -> Result<Vec<u8>> {
    let (w, h) = (480usize, 360usize);
    let mut canvas = Canvas::new(w, h);
    canvas.rect(40, 10, w - 10, h - 30, [0, 0, 0]);
    let all = curves.iter().flat_map(|c| c.1.iter());
    let xs = Scale::fit(all.clone().map(|p| p.0), true, 40.0, (w - 10) as f64);
    let ys = Scale::fit(all.map(|p| p.1), true, (h - 30) as f64, 10.0);
    for (i, (_, pts)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for pair in pts.windows(2) {
            if pair[0].1 > 0.0 && pair[1].1 > 0.0 {
                canvas.line((xs.px(pair[0].0), ys.px(pair[0].1)), (xs.px(pair[1].0), ys.px(pair[1].1)), colour);
            }
        }
    }
    canvas.encode()
}

/// Writes, for each luminance, the spatial and temporal sensitivity curves,
/// the combined surface on log-spaced axes and the model card.
///
/// Files: `csf_spatial.csv`, `csf_temporal.csv`, `csf_surface.csv`,
/// `csf_spatial.png`, `csf_temporal.png`, `csf_surface_{i}.png`, `csf_models.json`.
pub fn write_csf(dir: &Path, tables: &CsfTables) -> Result<Vec<PathBuf>> {
    if tables.points < 2 || tables.luminances_cdm2.is_empty() {
        return Err(ServiceError::Schema("need at least two points and one luminance".into()));
    }
    let us = log_space(tables.u_range_cpd, tables.points);
    let ws = log_space(tables.w_range_hz, tables.points);
    let (mut spatial, mut temporal, mut surface) = (
        String::from("luminance_cdm2,u_cpd,cs\n"),
        String::from("luminance_cdm2,w_hz,cs\n"),
        String::from("luminance_cdm2,u_cpd,w_hz,cs\n"),
    );
    let (mut s_curves, mut t_curves, mut cards) = (Vec::new(), Vec::new(), Vec::new());
    let mut written = Vec::new();
    for (i, &l) in tables.luminances_cdm2.iter().enumerate() {
        let m = CsfModel::<f64>::new(l, tables.object_size_deg)?;
        let mut sc = Vec::new();
        for &u in &us {
            let v = m.spatial(u)?;
            let _ = writeln!(spatial, "{l},{u},{v}");
            sc.push((u, v));
        }
        let mut tc = Vec::new();
        for &w in &ws {
            let v = m.temporal(w)?;
            let _ = writeln!(temporal, "{l},{w},{v}");
            tc.push((w, v));
        }
        let mut grid = Vec::with_capacity(us.len() * ws.len());
        for &w in &ws {
            for &u in &us {
                let v = combined_cs(u, w, &m)?;
                let _ = writeln!(surface, "{l},{u},{w},{v}");
                grid.push(v);
            }
        }
        let png_path = dir.join(format!("csf_surface_{i}.png"));
        write_atomic(&png_path, &heatmap(&[grid], ws.len(), us.len(), Some(3.0))?)?;
        written.push(png_path);
        s_curves.push((l, sc));
        t_curves.push((l, tc));
        cards.push(m.card());
    }
    let files = [
        ("csf_spatial.csv", spatial.into_bytes()),
        ("csf_temporal.csv", temporal.into_bytes()),
        ("csf_surface.csv", surface.into_bytes()),
        ("csf_spatial.png", family_png(&s_curves)?),
        ("csf_temporal.png", family_png(&t_curves)?),
    ];
    for (name, bytes) in files {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
    }
    let p = dir.join("csf_models.json");
    write_json(&p, &serde_json::json!({ "tables": tables, "models": cards }))?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntrySummary {
    pub run_id: String,
    /// Name of the difference panel under `panels/`.
    pub panel: String,
    pub l2: f64,
    pub max_abs: f64,
    pub metric_deltas: BTreeMap<String, f64>,
    pub flags: ArtifactReport,
    pub resampled: bool,
}

/// `comparison.json` of a comparison bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub comparison_id: String,
    pub reference: Reference,
    pub master_flags: Option<ArtifactReport>,
    pub entries: Vec<ComparisonEntrySummary>,
}

pub const COMPARISON_FILE: &str = "comparison.json";

pub fn write_comparison<T: Real>(dir: &Path, id: &str, cmp: &ComparisonResult<T>) -> Result<ComparisonSummary> {
    let panels = dir.join(PANEL_DIR);
    let mut entries = Vec::new();
    for e in &cmp.entries {
        write_panel(&panels, &e.difference)?;
        entries.push(ComparisonEntrySummary {
            run_id: e.run_id.clone(),
            panel: e.difference.meta.name.clone(),
            l2: e.l2,
            max_abs: e.max_abs,
            metric_deltas: e.metric_deltas.clone(),
            flags: e.flags.clone(),
            resampled: e.resampled,
        });
    }
    let summary = ComparisonSummary {
        comparison_id: id.to_string(),
        reference: cmp.reference.clone(),
        master_flags: cmp.master_flags.clone(),
        entries,
    };
    write_json(&dir.join(COMPARISON_FILE), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let panel = Panel {
            meta: PanelMeta {
                name: "p".into(),
                kind: PanelKind::Stimulus,
                shape: [1, 2, 3],
                rows: Axis::new("t", "s", 0.0, 0.5, 2),
                cols: Axis::new("x", "deg", -1.0, 1.0, 3),
                unit: "cd/m^2".into(),
                channel_names: vec!["luminance".into()],
            },
            data: vec![0.0f64, 1.5, -2.0, 3.25, 4.0, 1e-3],
        };
        write_panel(dir.path(), &panel).unwrap();
        let back = read_panel(dir.path(), "p").unwrap();
        assert_eq!(back.meta, panel.meta);
        let expected: Vec<f64> = panel.data.iter().map(|&v| v as f32 as f64).collect();
        assert_eq!(back.data, expected);
        let raw = fs::read(dir.path().join("p.f32")).unwrap();
        assert_eq!(&raw[4..8], &1.5f32.to_le_bytes());
        let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
    }

    #[test]
    fn csf_tables_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let tables = CsfTables {
            points: 8,
            ..CsfTables::default()
        };
        let files = write_csf(dir.path(), &tables).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let surface = fs::read_to_string(dir.path().join("csf_surface.csv")).unwrap();
        assert_eq!(surface.lines().count(), 1 + 5 * 8 * 8);
    }
}
