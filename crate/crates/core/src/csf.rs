//! Luminance-dependent spatiotemporal contrast sensitivity and the
//! window-of-visibility filter built from it.
//!
//! The spatial factor is Barten's formula in cd/m² with an object-size term;
//! the temporal factor is an empirical fit evaluated in trolands. The two are
//! combined as a geometric mean. Formulas are evaluated in `f64` and returned
//! in the caller's scalar type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const TEMPORAL_A: f64 = 2.1e9;
pub const TEMPORAL_B: f64 = 9e-4;
pub const TEMPORAL_C: f64 = 1.2e-7;
pub const TEMPORAL_D: f64 = -2.7e-4;
/// Coefficient of `w^3.8` in the high-frequency exponential, fitted so the
/// combined peak sensitivity grows fourfold from 0.5 to 160 cd/m².
pub const TEMPORAL_F: f64 = 3.645_145_764_7e-4;

/// Luminance range over which the temporal fit is evaluated; inputs outside are clamped.
pub const LUMINANCE_RANGE: (f64, f64) = (0.1, 1000.0);

/// Pupil diameter in mm for a field of luminance `l` cd/m².
pub fn pupil_diameter_mm(l: f64) -> f64 {
    5.0 - 3.0 * (0.4 * l.log10()).tanh()
}

/// Retinal illuminance in trolands.
pub fn luminance_to_trolands<T: Real>(l: T) -> Result<T> {
    let l = l.as_f64();
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain("luminance", format!("must be positive, got {l}")));
    }
    let d = pupil_diameter_mm(l);
    Ok(T::lit(l * std::f64::consts::PI * d * d / 4.0))
}

fn spatial_f64(u: f64, l: f64, x_o: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain("spatial frequency", format!("must be positive, got {u}")));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain("luminance", format!("must be positive, got {l}")));
    }
    if !(x_o > 0.0) || !x_o.is_finite() {
        return Err(Error::domain("object size", format!("must be positive, got {x_o}")));
    }
    let u2 = u * u;
    let num = 5200.0 * (-0.0016 * u2 * (1.0 + 100.0 / l).powf(0.08)).exp();
    let size = 1.0 + 144.0 / (x_o * x_o) + 0.64 * u2;
    let lum = 63.0 / l.powf(0.83) + 1.0 / (1.0 - (-0.02 * u2).exp());
    let v = num / (size * lum).sqrt();
    if !v.is_finite() {
        return Err(Error::NonFinite {
            term: "spatial sensitivity".into(),
            value: v,
        });
    }
    Ok(v)
}

/// Spatial contrast sensitivity at `u` cpd for luminance `l` and object size `x_o` degrees.
pub fn spatial_cs<T: Real>(u: T, l: T, x_o: T) -> Result<T> {
    spatial_f64(u.as_f64(), l.as_f64(), x_o.as_f64()).map(T::lit)
}

/// The temporal fit exactly as written, at `w` Hz and retinal illuminance `e` Td.
///
/// Fails below a few hertz, where the expression under the root turns negative.
pub fn temporal_cs_formula(w: f64, e: f64, f: f64) -> Result<f64> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::domain("temporal frequency", format!("must be positive, got {w}")));
    }
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::domain("retinal illuminance", format!("must be positive, got {e}")));
    }
    let growth = (f * w.powf(3.8)).exp();
    // 1.007 - e^{f w^3.8} runs to -inf at high w, sending the quotient to zero
    let tail = if growth.is_finite() {
        TEMPORAL_D / (1.007 - growth)
    } else {
        0.0
    };
    let gain = TEMPORAL_A * w.powf(TEMPORAL_B * e) * e.powf(4.98) + 1.0;
    let radicand = gain * (TEMPORAL_C / e + tail) - e.powi(5);
    if !(radicand > 0.0) || !radicand.is_finite() {
        return Err(Error::NonFinite {
            term: "temporal radicand".into(),
            value: radicand,
        });
    }
    let num = 5360.0 * e.powf(2.51) * (-0.16 * w.powf(e.powf(-0.017))).exp();
    let v = num / radicand.sqrt();
    if !v.is_finite() {
        return Err(Error::NonFinite {
            term: "temporal sensitivity".into(),
            value: v,
        });
    }
    Ok(v)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-9 * b.abs().max(1.0) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Frequency and value of the temporal peak at illuminance `e`.
fn temporal_peak(e: f64, f: f64) -> Result<(f64, f64)> {
    let eval = |w: f64| temporal_cs_formula(w, e, f).unwrap_or(f64::NEG_INFINITY);
    let step = 0.25;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut w = step;
    while w <= 60.0 {
        let v = eval(w);
        if v > best.0 {
            best = (v, w);
        }
        w += step;
    }
    if !best.0.is_finite() {
        return Err(Error::NonFinite {
            term: "temporal peak".into(),
            value: best.0,
        });
    }
    let w_peak = golden_max(eval, (best.1 - step).max(1e-3), best.1 + step);
    Ok((w_peak, eval(w_peak)))
}

fn clamp_luminance(l: f64) -> f64 {
    let (lo, hi) = LUMINANCE_RANGE;
    if l < lo || l > hi {
        log::warn!("luminance {l} cd/m^2 outside [{lo}, {hi}]; clamped for the temporal model");
    }
    l.clamp(lo, hi)
}

/// Temporal contrast sensitivity at `w` Hz for luminance `l` cd/m².
///
/// Below the frequency of peak sensitivity the peak value is held, giving a
/// low-pass shape; above it the fitted expression is used unchanged.
pub fn temporal_cs<T: Real>(w: T, l: T) -> Result<T> {
    let w = w.as_f64();
    if !(w > 0.0) {
        return Err(Error::domain("temporal frequency", format!("must be positive, got {w}")));
    }
    let e = luminance_to_trolands(clamp_luminance(l.as_f64()))?;
    let (w_peak, peak) = temporal_peak(e, TEMPORAL_F)?;
    if w <= w_peak {
        Ok(T::lit(peak))
    } else {
        temporal_cs_formula(w, e, TEMPORAL_F).map(T::lit)
    }
}

/// Constants and derived peaks of a model instance, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub luminance_cdm2: f64,
    pub trolands: f64,
    pub object_size_deg: f64,
    pub temporal_a: f64,
    pub temporal_b: f64,
    pub temporal_c: f64,
    pub temporal_d: f64,
    pub temporal_f_fitted: f64,
    pub spatial_peak_cpd: f64,
    pub spatial_peak: f64,
    pub temporal_peak_hz: f64,
    pub temporal_peak: f64,
    pub combined_peak: f64,
}

/// Sensitivity surface for one adapting luminance and object size.
#[derive(Debug, Clone, PartialEq)]
pub struct CsfModel<T> {
    pub luminance_cdm2: T,
    pub object_size_deg: T,
    pub trolands: T,
    pub spatial_peak_cpd: T,
    pub spatial_peak: T,
    pub temporal_peak_hz: T,
    pub temporal_peak: T,
}

impl<T: Real> CsfModel<T> {
    pub fn new(luminance_cdm2: T, object_size_deg: T) -> Result<Self> {
        let l = clamp_luminance(luminance_cdm2.as_f64());
        let x_o = object_size_deg.as_f64();
        if !(x_o > 0.0) {
            return Err(Error::domain("object size", format!("must be positive, got {x_o}")));
        }
        let e = luminance_to_trolands(l)?;
        let (w_peak, t_peak) = temporal_peak(e, TEMPORAL_F)?;
        let s = |u: f64| spatial_f64(u, l, x_o).unwrap_or(0.0);
        let mut best = (0.0, 0.05);
        let mut u = 0.05;
        while u <= 30.0 {
            let v = s(u);
            if v > best.0 {
                best = (v, u);
            }
            u += 0.05;
        }
        let u_peak = golden_max(s, (best.1 - 0.05).max(1e-3), best.1 + 0.05);
        Ok(Self {
            luminance_cdm2: T::lit(l),
            object_size_deg: T::lit(x_o),
            trolands: T::lit(e),
            spatial_peak_cpd: T::lit(u_peak),
            spatial_peak: T::lit(s(u_peak)),
            temporal_peak_hz: T::lit(w_peak),
            temporal_peak: T::lit(t_peak),
        })
    }

    pub fn spatial(&self, u: T) -> Result<T> {
        spatial_cs(u, self.luminance_cdm2, self.object_size_deg)
    }

    pub fn temporal(&self, w: T) -> Result<T> {
        if !(w > T::zero()) {
            return Err(Error::domain("temporal frequency", format!("must be positive, got {w}")));
        }
        if w <= self.temporal_peak_hz {
            Ok(self.temporal_peak)
        } else {
            temporal_cs_formula(w.as_f64(), self.trolands.as_f64(), TEMPORAL_F).map(T::lit)
        }
    }

    pub fn peak(&self) -> T {
        (self.spatial_peak * self.temporal_peak).sqrt()
    }

    pub fn card(&self) -> ModelCard {
        ModelCard {
            luminance_cdm2: self.luminance_cdm2.as_f64(),
            trolands: self.trolands.as_f64(),
            object_size_deg: self.object_size_deg.as_f64(),
            temporal_a: TEMPORAL_A,
            temporal_b: TEMPORAL_B,
            temporal_c: TEMPORAL_C,
            temporal_d: TEMPORAL_D,
            temporal_f_fitted: TEMPORAL_F,
            spatial_peak_cpd: self.spatial_peak_cpd.as_f64(),
            spatial_peak: self.spatial_peak.as_f64(),
            temporal_peak_hz: self.temporal_peak_hz.as_f64(),
            temporal_peak: self.temporal_peak.as_f64(),
            combined_peak: self.peak().as_f64(),
        }
    }
}

/// Geometric mean of the spatial and temporal sensitivities.
pub fn combined_cs<T: Real>(u: T, w: T, model: &CsfModel<T>) -> Result<T> {
    Ok((model.spatial(u)? * model.temporal(w)?).sqrt())
}

/// Per-bin gain over a centred `(w, u)` grid: `CS / CS_peak` where the
/// component at the stimulus contrast is above threshold (`contrast * CS >= 1`),
/// zero elsewhere, and one at the zero-frequency bin.
///
/// Axis values are taken in magnitude and floored at half a bin.
pub fn build_filter<T: Real>(u_axis: &[T], w_axis: &[T], model: &CsfModel<T>, contrast: T) -> Result<Vec<T>> {
    if !(contrast > T::zero()) {
        return Err(Error::validation("contrast", format!("must be positive, got {contrast}")));
    }
    let half_bin = |axis: &[T]| -> T {
        if axis.len() > 1 {
            (axis[1] - axis[0]).abs() / T::lit(2.0)
        } else {
            T::lit(1e-3)
        }
    };
    let (hu, hw) = (half_bin(u_axis), half_bin(w_axis));
    let cs_u = u_axis
        .iter()
        .map(|&u| model.spatial(u.abs().max(hu)))
        .collect::<Result<Vec<_>>>()?;
    let cs_w = w_axis
        .iter()
        .map(|&w| model.temporal(w.abs().max(hw)))
        .collect::<Result<Vec<_>>>()?;
    let peak = model.peak();
    let mut gain = Vec::with_capacity(u_axis.len() * w_axis.len());
    for (iw, &tw) in cs_w.iter().enumerate() {
        for (iu, &su) in cs_u.iter().enumerate() {
            let cs = (su * tw).sqrt();
            let dc = u_axis[iu] == T::zero() && w_axis[iw] == T::zero();
            gain.push(if dc {
                T::one()
            } else if contrast * cs >= T::one() {
                (cs / peak).min(T::one())
            } else {
                T::zero()
            });
        }
    }
    Ok(gain)
}
