use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{ArtifactReport, Axis, Panel, PanelKind, PanelMeta, PanelPath, RunResult};

/// What a comparison subtracts from each run's sampled percept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Each run's own continuous-motion percept.
    Continuous,
    /// The sampled percept of a chosen master run.
    Run { run_id: String },
}

#[derive(Debug, Clone)]
pub struct ComparisonEntry<T> {
    pub run_id: String,
    /// Sampled reconstruction minus the reference, on the reference axes.
    pub difference: Panel<T>,
    /// Root-mean-square of the difference panel.
    pub l2: f64,
    pub max_abs: f64,
    /// Run metric minus master metric for metrics both carry.
    pub metric_deltas: BTreeMap<String, f64>,
    pub flags: ArtifactReport,
    pub resampled: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult<T> {
    pub reference: Reference,
    pub master_flags: Option<ArtifactReport>,
    pub entries: Vec<ComparisonEntry<T>>,
}

fn axis_pos(axis: &Axis, v: f64) -> f64 {
    ((v - axis.start) / axis.step).clamp(0.0, (axis.len.max(1) - 1) as f64)
}

fn same_axis(a: &Axis, b: &Axis) -> bool {
    a.len == b.len && a.start == b.start && a.step == b.step
}

/// Bilinear resampling of `src` onto the row and column axes of `target`,
/// holding edge values beyond the source extent.
pub fn resample_panel<T: Real>(src: &Panel<T>, target: &PanelMeta) -> Result<Panel<T>> {
    let [channels, rows, cols] = src.meta.shape;
    if channels != target.shape[0] {
        return Err(Error::Incompatible(format!(
            "cannot resample {channels} channels onto {}",
            target.shape[0]
        )));
    }
    let rpos: Vec<f64> = (0..target.rows.len).map(|k| axis_pos(&src.meta.rows, target.rows.value(k))).collect();
    let cpos: Vec<f64> = (0..target.cols.len).map(|i| axis_pos(&src.meta.cols, target.cols.value(i))).collect();
    let mut data = Vec::with_capacity(channels * target.rows.len * target.cols.len);
    for c in 0..channels {
        let plane = src.plane(c);
        for &r in &rpos {
            let (r0, fr) = (r.floor() as usize, r - r.floor());
            let r1 = (r0 + 1).min(rows - 1);
            for &x in &cpos {
                let (c0, fc) = (x.floor() as usize, x - x.floor());
                let c1 = (c0 + 1).min(cols - 1);
                let v = |k: usize, i: usize| plane[k * cols + i].as_f64();
                let top = v(r0, c0) * (1.0 - fc) + v(r0, c1) * fc;
                let bottom = v(r1, c0) * (1.0 - fc) + v(r1, c1) * fc;
                data.push(T::lit(top * (1.0 - fr) + bottom * fr));
            }
        }
    }
    let mut meta = target.clone();
    meta.name = src.meta.name.clone();
    meta.kind = src.meta.kind;
    Ok(Panel { meta, data })
}

fn check_compatible<T: Real>(a: &RunResult<T>, b: &RunResult<T>) -> Result<()> {
    if a.config.mode != b.config.mode {
        return Err(Error::Incompatible(format!(
            "run {} is {:?} but {} is {:?}",
            a.run_id, a.config.mode, b.run_id, b.config.mode
        )));
    }
    if a.config.viewing.tracking != b.config.viewing.tracking {
        return Err(Error::Incompatible(format!(
            "runs {} and {} are in different frames of reference (tracking differs)",
            a.run_id, b.run_id
        )));
    }
    if a.config.display.rgb_mode.channels() != b.config.display.rgb_mode.channels() {
        return Err(Error::Incompatible(format!(
            "runs {} and {} have different colour channels",
            a.run_id, b.run_id
        )));
    }
    Ok(())
}

/// Difference of every run's sampled percept from a reference.
///
/// With a master the reference is the master's sampled percept and other
/// runs are resampled onto its axes when they differ; without one each run
/// is compared with its own continuous percept.
pub fn compare_runs<T: Real>(master: Option<&RunResult<T>>, others: &[&RunResult<T>]) -> Result<ComparisonResult<T>> {
    if let Some(m) = master {
        for o in others {
            check_compatible(m, o)?;
        }
    } else if let Some((first, rest)) = others.split_first() {
        for o in rest {
            check_compatible(first, o)?;
        }
    }
    let mut entries = Vec::with_capacity(others.len());
    for run in others {
        let own = run.panel(PanelPath::Sampled, PanelKind::Reconstruction);
        let reference = match master {
            Some(m) => m.panel(PanelPath::Sampled, PanelKind::Reconstruction),
            None => run.panel(PanelPath::Continuous, PanelKind::Reconstruction),
        };
        let aligned = same_axis(&own.meta.rows, &reference.meta.rows) && same_axis(&own.meta.cols, &reference.meta.cols);
        let resampled;
        let own = if aligned {
            resampled = false;
            own.clone()
        } else {
            resampled = true;
            resample_panel(own, &reference.meta)?
        };
        let data: Vec<T> = own.data.iter().zip(&reference.data).map(|(&a, &b)| a - b).collect();
        let sq: f64 = data.iter().map(|v| v.as_f64().powi(2)).sum();
        let l2 = (sq / data.len().max(1) as f64).sqrt();
        let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        let mut meta = reference.meta.clone();
        meta.name = format!("{}_difference", run.run_id);
        meta.kind = PanelKind::Difference;
        let metric_deltas = match master {
            Some(m) => run
                .metrics
                .iter()
                .filter_map(|(k, v)| m.metrics.get(k).map(|mv| (k.clone(), v - mv)))
                .collect(),
            None => BTreeMap::new(),
        };
        entries.push(ComparisonEntry {
            run_id: run.run_id.clone(),
            difference: Panel { meta, data },
            l2,
            max_abs,
            metric_deltas,
            flags: run.report.clone(),
            resampled,
        });
    }
    Ok(ComparisonResult {
        reference: match master {
            Some(m) => Reference::Run { run_id: m.run_id.clone() },
            None => Reference::Continuous,
        },
        master_flags: master.map(|m| m.report.clone()),
        entries,
    })
}
