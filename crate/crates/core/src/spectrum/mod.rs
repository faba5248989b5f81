//! Unitary 2-D Fourier transforms of rasters with physical frequency axes,
//! and closed-form spectra of the same stimuli.

mod analytic;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stimulus::{FrameOfReference, SpaceTimeRaster};

pub use analytic::{
    analytic_continuous_spectrum, analytic_sampled_spectrum, dirichlet, kernel_transform, replicate_series,
    replicate_weight, Replicate,
};

/// Complex spectrum `[channel][w][u]`, zero frequency centred.
///
/// Rows run over temporal frequency, columns over spatial frequency. The
/// per-channel mean is removed before the transform and kept in `means`, so
/// the DC bin is zero and the array describes modulation about the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub data: Vec<Complex<T>>,
    pub channels: usize,
    pub nw: usize,
    pub nu: usize,
    /// Cycles per degree.
    pub u_axis: Vec<T>,
    /// Hz.
    pub w_axis: Vec<T>,
    pub means: Vec<T>,
    pub x_pitch_deg: T,
    pub t_pitch_s: T,
    pub x_origin_deg: T,
    pub t_origin_s: T,
    pub frame: FrameOfReference,
}

/// Frequencies of a centred `n`-point DFT with sample pitch `d`.
pub fn centred_axis<T: Real>(n: usize, d: T) -> Vec<T> {
    let half = (n / 2) as isize;
    let span = T::from_usize_lossy(n) * d;
    (0..n as isize)
        .map(|k| T::lit((k - half) as f64) / span)
        .collect()
}

fn shift_index(s: usize, n: usize) -> usize {
    (s + n - n / 2) % n
}

fn unshift_index(r: usize, n: usize) -> usize {
    (r + n / 2) % n
}

/// In-place 2-D transform of a row-major `nt x nx` block, unitary scaling.
fn fft2<T: Real>(planner: &mut FftPlanner<T>, block: &mut [Complex<T>], nt: usize, nx: usize, inverse: bool) {
    let rows = if inverse {
        planner.plan_fft_inverse(nx)
    } else {
        planner.plan_fft_forward(nx)
    };
    rows.process(block);
    let mut cols = vec![Complex::new(T::zero(), T::zero()); nt * nx];
    for k in 0..nt {
        for i in 0..nx {
            cols[i * nt + k] = block[k * nx + i];
        }
    }
    let plan = if inverse {
        planner.plan_fft_inverse(nt)
    } else {
        planner.plan_fft_forward(nt)
    };
    plan.process(&mut cols);
    let scale = T::one() / T::from_usize_lossy(nt * nx).sqrt();
    for k in 0..nt {
        for i in 0..nx {
            block[k * nx + i] = cols[i * nt + k] * scale;
        }
    }
}

fn check_raster<T: Real>(r: &SpaceTimeRaster<T>) -> Result<()> {
    let pitches_ok = r.x_pitch_deg > T::zero()
        && r.t_pitch_s > T::zero()
        && r.x_pitch_deg.is_finite()
        && r.t_pitch_s.is_finite();
    if !pitches_ok {
        return Err(Error::AxisMismatch(format!(
            "raster axes are not uniform: pitches {} deg, {} s",
            r.x_pitch_deg, r.t_pitch_s
        )));
    }
    if r.nt == 0 || r.nx == 0 || r.data.len() != r.channels * r.nt * r.nx {
        return Err(Error::AxisMismatch(format!(
            "raster holds {} values for {} x {} x {}",
            r.data.len(),
            r.channels,
            r.nt,
            r.nx
        )));
    }
    Ok(())
}

/// Forward transform of each channel after removing its mean.
pub fn forward<T: Real>(raster: &SpaceTimeRaster<T>) -> Result<Spectrum<T>> {
    check_raster(raster)?;
    let (nt, nx) = (raster.nt, raster.nx);
    let n = nt * nx;
    let mut planner = FftPlanner::new();
    let mut data = vec![Complex::new(T::zero(), T::zero()); raster.channels * n];
    let mut means = Vec::with_capacity(raster.channels);
    let mut block = vec![Complex::new(T::zero(), T::zero()); n];
    for c in 0..raster.channels {
        let plane = raster.plane(c);
        let sum = plane.iter().fold(0.0f64, |s, v| s + v.as_f64());
        let mean = T::lit(sum / n as f64);
        means.push(mean);
        for (b, &v) in block.iter_mut().zip(plane) {
            *b = Complex::new(v - mean, T::zero());
        }
        fft2(&mut planner, &mut block, nt, nx, false);
        let out = &mut data[c * n..(c + 1) * n];
        for sw in 0..nt {
            let rw = shift_index(sw, nt);
            for su in 0..nx {
                out[sw * nx + su] = block[rw * nx + shift_index(su, nx)];
            }
        }
    }
    Ok(Spectrum {
        data,
        channels: raster.channels,
        nw: nt,
        nu: nx,
        u_axis: centred_axis(nx, raster.x_pitch_deg),
        w_axis: centred_axis(nt, raster.t_pitch_s),
        means,
        x_pitch_deg: raster.x_pitch_deg,
        t_pitch_s: raster.t_pitch_s,
        x_origin_deg: raster.x_origin_deg,
        t_origin_s: raster.t_origin_s,
        frame: raster.frame,
    })
}

/// Inverse transform plus restored means, and the largest imaginary residue
/// relative to the largest real modulation.
pub fn inverse_with_residue<T: Real>(spec: &Spectrum<T>) -> Result<(SpaceTimeRaster<T>, T)> {
    spec.check()?;
    let (nt, nx) = (spec.nw, spec.nu);
    let n = nt * nx;
    let mut planner = FftPlanner::new();
    let mut raster = SpaceTimeRaster::filled(
        spec.channels,
        nt,
        nx,
        &spec.means,
        spec.x_pitch_deg,
        spec.t_pitch_s,
        spec.x_origin_deg,
        spec.frame,
    )?;
    raster.t_origin_s = spec.t_origin_s;
    let mut block = vec![Complex::new(T::zero(), T::zero()); n];
    let mut max_im = T::zero();
    let mut max_re = T::zero();
    for c in 0..spec.channels {
        let src = &spec.data[c * n..(c + 1) * n];
        for rw in 0..nt {
            let sw = unshift_index(rw, nt);
            for ru in 0..nx {
                block[rw * nx + ru] = src[sw * nx + unshift_index(ru, nx)];
            }
        }
        fft2(&mut planner, &mut block, nt, nx, true);
        let mean = spec.means[c];
        for (dst, z) in raster.plane_mut(c).iter_mut().zip(&block) {
            *dst = z.re + mean;
            max_im = max_im.max(z.im.abs());
            max_re = max_re.max(z.re.abs());
        }
    }
    let residue = if max_re > T::zero() { max_im / max_re } else { max_im };
    Ok((raster, residue))
}

pub fn inverse<T: Real>(spec: &Spectrum<T>) -> Result<SpaceTimeRaster<T>> {
    inverse_with_residue(spec).map(|(r, _)| r)
}

impl<T: Real> Spectrum<T> {
    fn check(&self) -> Result<()> {
        if self.data.len() != self.channels * self.nw * self.nu
            || self.u_axis.len() != self.nu
            || self.w_axis.len() != self.nw
            || self.means.len() != self.channels
        {
            return Err(Error::AxisMismatch(format!(
                "spectrum of {} values with axes {} x {} and {} means for {} channels",
                self.data.len(),
                self.w_axis.len(),
                self.u_axis.len(),
                self.means.len(),
                self.channels
            )));
        }
        Ok(())
    }

    /// Index of the zero-frequency bin as `(w row, u column)`.
    pub fn dc_index(&self) -> (usize, usize) {
        (self.nw / 2, self.nu / 2)
    }

    pub fn du(&self) -> T {
        T::one() / (T::from_usize_lossy(self.nu) * self.x_pitch_deg)
    }

    pub fn dw(&self) -> T {
        T::one() / (T::from_usize_lossy(self.nw) * self.t_pitch_s)
    }

    pub fn plane(&self, channel: usize) -> &[Complex<T>] {
        let n = self.nw * self.nu;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn at(&self, channel: usize, w: usize, u: usize) -> Complex<T> {
        self.data[(channel * self.nw + w) * self.nu + u]
    }

    /// Magnitude summed in quadrature over channels.
    pub fn magnitude(&self) -> Vec<T> {
        let n = self.nw * self.nu;
        let mut out = vec![T::zero(); n];
        for c in 0..self.channels {
            for (o, z) in out.iter_mut().zip(self.plane(c)) {
                *o += z.norm_sqr();
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    pub fn energy(&self) -> T {
        self.data.iter().fold(T::zero(), |s, z| s + z.norm_sqr())
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.nw == other.nw
            && self.nu == other.nu
            && self.x_pitch_deg == other.x_pitch_deg
            && self.t_pitch_s == other.t_pitch_s
    }

    /// Multiplies every channel by a real gain laid out like one plane.
    pub fn apply_gain(&self, gain: &[T]) -> Result<Self> {
        let n = self.nw * self.nu;
        if gain.len() != n {
            return Err(Error::AxisMismatch(format!("gain of {} bins for {} x {}", gain.len(), self.nw, self.nu)));
        }
        let mut out = self.clone();
        for c in 0..self.channels {
            for (z, &g) in out.data[c * n..(c + 1) * n].iter_mut().zip(gain) {
                *z *= g;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_raster(nt: usize, nx: usize) -> SpaceTimeRaster<f64> {
        let mut r = SpaceTimeRaster::filled(1, nt, nx, &[3.0], 0.01, 0.002, -0.2, FrameOfReference::Display).unwrap();
        for (j, v) in r.plane_mut(0).iter_mut().enumerate() {
            *v += ((j * 7919) % 13) as f64 * 0.1;
        }
        r
    }

    #[test]
    fn axes_are_centred() {
        let u = centred_axis::<f64>(8, 0.5);
        assert_eq!(u[4], 0.0);
        assert_relative_eq!(u[0], -1.0);
        let odd = centred_axis::<f64>(5, 1.0);
        assert_eq!(odd[2], 0.0);
        assert_relative_eq!(odd[4], 0.4);
    }

    #[test]
    fn constant_raster_has_empty_spectrum() {
        let r = SpaceTimeRaster::filled(1, 6, 10, &[5.0], 0.1, 0.1, 0.0, FrameOfReference::Display).unwrap();
        let s = forward(&r).unwrap();
        assert!(s.energy() < 1e-20);
        assert_eq!(s.means, vec![5.0]);
    }

    #[test]
    fn parseval_and_round_trip() {
        for &(nt, nx) in &[(8, 12), (9, 15), (16, 5)] {
            let r = test_raster(nt, nx);
            let s = forward(&r).unwrap();
            let mean = s.means[0];
            let e_raster: f64 = r.data.iter().map(|v| (v - mean).powi(2)).sum();
            assert_relative_eq!(s.energy(), e_raster, max_relative = 1e-10);
            let (back, residue) = inverse_with_residue(&s).unwrap();
            assert!(residue < 1e-10);
            for (a, b) in back.data.iter().zip(&r.data) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn single_frequency_lands_on_its_bin() {
        let (nt, nx) = (16, 32);
        let mut r = SpaceTimeRaster::filled(1, nt, nx, &[0.0], 0.1, 0.01, 0.0, FrameOfReference::Display).unwrap();
        for k in 0..nt {
            for i in 0..nx {
                let phase = 2.0 * std::f64::consts::PI * (3.0 * i as f64 / nx as f64 - 2.0 * k as f64 / nt as f64);
                r.plane_mut(0)[k * nx + i] = phase.cos();
            }
        }
        let s = forward(&r).unwrap();
        let mag = s.magnitude();
        let (w0, u0) = s.dc_index();
        let peak = mag[(w0 - 2) * nx + u0 + 3];
        assert_relative_eq!(peak, ((nt * nx) as f64).sqrt() / 2.0, epsilon = 1e-9);
        assert_relative_eq!(s.u_axis[u0 + 3], 3.0 / 3.2, epsilon = 1e-12);
        assert_relative_eq!(s.w_axis[w0 - 2], -2.0 / 0.16, epsilon = 1e-9);
    }

    #[test]
    fn bad_axes_rejected() {
        let mut r = test_raster(4, 4);
        r.x_pitch_deg = 0.0;
        assert!(forward(&r).is_err());
        let mut s = forward(&test_raster(4, 4)).unwrap();
        s.u_axis.pop();
        assert!(inverse(&s).is_err());
    }

    #[test]
    fn f32_round_trip() {
        let r = test_raster(8, 8).map(|v| v as f32);
        let s = forward(&r).unwrap();
        let back = inverse(&s).unwrap();
        for (a, b) in back.data.iter().zip(&r.data) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
