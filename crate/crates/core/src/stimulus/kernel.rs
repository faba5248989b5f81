use crate::error::{Error, Result};
use crate::params::{Derived, RgbMode};
use crate::scalar::Real;

/// Spatial footprint of the stimulus: the illuminated sub-pixel bands inside
/// a rect of width `width`, measured from the rect's left edge.
///
/// The profile integrates to one; luminance is obtained by scaling with
/// `increment * width`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialKernel<T> {
    pub width: T,
    pub bands: Vec<(T, T)>,
    /// Total illuminated length.
    pub lit: T,
}

impl<T: Real> SpatialKernel<T> {
    /// Density inside an illuminated band.
    pub fn height(&self) -> T {
        T::one() / self.lit
    }

    pub fn value(&self, x: T) -> T {
        if self.bands.iter().any(|&(a, b)| x >= a && x < b) {
            self.height()
        } else {
            T::zero()
        }
    }

    /// Cell averages on `n` cells of pitch `dx` starting at `origin`, with the
    /// kernel's left edge placed at `left`.
    pub fn sample(&self, left: T, origin: T, dx: T, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        let h = self.height();
        for &(a, b) in &self.bands {
            let (a, b) = (left + a, left + b);
            let first = ((a - origin) / dx).floor().max(T::zero());
            let mut i = first.to_usize().unwrap_or(0);
            while i < n {
                let c0 = origin + T::from_usize_lossy(i) * dx;
                if c0 >= b {
                    break;
                }
                let c1 = c0 + dx;
                let overlap = b.min(c1) - a.max(c0);
                if overlap > T::zero() {
                    out[i] += h * overlap / dx;
                }
                i += 1;
            }
        }
        out
    }
}

/// Builds the masked rect for sub-pixel fill `fill` (already divided by 3 in
/// RGB modes) with the band pattern shifted right by `phase` pixel fractions.
pub fn spatial_kernel<T: Real>(width_deg: T, pixel_deg: T, fill: T, phase: T) -> Result<SpatialKernel<T>> {
    if !(fill > T::zero() && fill <= T::one()) {
        return Err(Error::validation("fill_factor", format!("must lie in (0, 1], got {fill}")));
    }
    if !(pixel_deg > T::zero()) {
        return Err(Error::validation("pixel_deg", format!("must be positive, got {pixel_deg}")));
    }
    let band = fill * pixel_deg;
    if !(width_deg >= band * (T::one() - T::lit(1e-9))) {
        return Err(Error::validation(
            "width_deg",
            format!("stimulus ({width_deg} deg) is narrower than one illuminated sub-pixel ({band} deg)"),
        ));
    }
    let mut bands = Vec::new();
    if fill == T::one() && phase == T::zero() {
        bands.push((T::zero(), width_deg));
    } else {
        let shift = phase * pixel_deg;
        let mut k = if shift > T::zero() { -T::one() } else { T::zero() };
        loop {
            let a = k * pixel_deg + shift;
            if a >= width_deg {
                break;
            }
            let lo = a.max(T::zero());
            let hi = (a + band).min(width_deg);
            if hi > lo {
                bands.push((lo, hi));
            }
            k += T::one();
        }
    }
    let lit = bands.iter().fold(T::zero(), |s, &(a, b)| s + (b - a));
    if !(lit > T::zero()) {
        return Err(Error::validation("width_deg", "no illuminated sub-pixel inside the stimulus"));
    }
    Ok(SpatialKernel {
        width: width_deg,
        bands,
        lit,
    })
}

/// Kernel of colour channel `channel` under the config's layout.
pub fn channel_kernel<T: Real>(derived: &Derived, mode: RgbMode, channel: usize) -> Result<SpatialKernel<T>> {
    let phase = match mode {
        RgbMode::Bw => 0.0,
        _ => channel as f64 / 3.0,
    };
    spatial_kernel(
        T::lit(derived.width_deg),
        T::lit(derived.pixel_deg),
        T::lit(derived.channel_fill),
        T::lit(phase),
    )
}
