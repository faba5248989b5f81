use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unit-area trapezoid describing one pixel emission: linear rise over
/// `edge_width_s`, plateau, linear fall, total base `base_width_s`.
/// A zero base is an impulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalProfile<T> {
    pub base_width_s: T,
    pub edge_width_s: T,
}

fn ramp_integral<T: Real>(y: T) -> T {
    if y > T::zero() {
        y * y / T::lit(2.0)
    } else {
        T::zero()
    }
}

impl<T: Real> TemporalProfile<T> {
    pub fn is_impulse(&self) -> bool {
        self.base_width_s == T::zero()
    }

    pub fn plateau_width_s(&self) -> T {
        self.base_width_s - T::lit(2.0) * self.edge_width_s
    }

    pub fn plateau_level(&self) -> T {
        if self.is_impulse() {
            T::infinity()
        } else {
            T::one() / (self.base_width_s - self.edge_width_s)
        }
    }

    /// Density at time `t` after onset.
    pub fn value(&self, t: T) -> T {
        let b = self.base_width_s;
        let e = self.edge_width_s;
        if t < T::zero() || t >= b {
            return T::zero();
        }
        let top = self.plateau_level();
        if e == T::zero() {
            top
        } else if t < e {
            top * t / e
        } else if t > b - e {
            top * (b - t) / e
        } else {
            top
        }
    }

    /// Antiderivative from `-inf` to `t` (0 before onset, 1 after the fall).
    pub fn cumulative(&self, t: T) -> T {
        let b = self.base_width_s;
        let e = self.edge_width_s;
        if t <= T::zero() {
            return if self.is_impulse() && t == T::zero() { T::one() } else { T::zero() };
        }
        if t >= b {
            return T::one();
        }
        if e == T::zero() {
            return t / b;
        }
        let q = ramp_integral(t) - ramp_integral(t - e) - ramp_integral(t - (b - e)) + ramp_integral(t - b);
        q / (e * (b - e))
    }

    /// Integral over `[t0, t1]`, times relative to onset.
    pub fn integral(&self, t0: T, t1: T) -> T {
        self.cumulative(t1) - self.cumulative(t0)
    }

    /// Cell-averaged samples over one period starting at onset.
    pub fn samples(&self, period: T, n: usize) -> Vec<T> {
        let dt = period / T::from_usize_lossy(n);
        (0..n)
            .map(|k| {
                let t0 = T::from_usize_lossy(k) * dt;
                if self.is_impulse() {
                    if k == 0 {
                        T::one() / dt
                    } else {
                        T::zero()
                    }
                } else {
                    self.integral(t0, t0 + dt) / dt
                }
            })
            .collect()
    }

    /// Fourier transform at `w` Hz, onset at `t = 0`.
    pub fn transform(&self, w: T) -> num_complex::Complex<T> {
        let b = self.base_width_s;
        let e = self.edge_width_s;
        let mag = crate::scalar::sinc((b - e) * w) * crate::scalar::sinc(e * w);
        num_complex::Complex::from_polar(mag, -T::PI() * w * b)
    }
}

/// Emission profile for hold fraction `h` of a period `frame_s` with edges `tau_s`.
pub fn temporal_profile<T: Real>(h: T, frame_s: T, tau_s: T) -> Result<TemporalProfile<T>> {
    if !(h >= T::zero() && h <= T::one()) {
        return Err(Error::validation("hold_interval", format!("must lie in [0, 1], got {h}")));
    }
    if !(frame_s > T::zero()) {
        return Err(Error::validation("frame_s", format!("must be positive, got {frame_s}")));
    }
    if !(tau_s >= T::zero()) {
        return Err(Error::validation("pixel_response_s", format!("must be non-negative, got {tau_s}")));
    }
    let base = h * frame_s;
    if base * (T::one() + T::lit(1e-9)) < T::lit(2.0) * tau_s {
        return Err(Error::validation(
            "pixel_response_s",
            format!(
                "hold_interval * frame_s >= 2 * pixel_response_s violated: {h} * {frame_s} < 2 * {tau_s}"
            ),
        ));
    }
    Ok(TemporalProfile {
        base_width_s: base,
        edge_width_s: tau_s.min(base / T::lit(2.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sample_and_hold_rect() {
        let p = temporal_profile(1.0f64, 1.0 / 60.0, 0.0).unwrap();
        assert_relative_eq!(p.base_width_s, 1.0 / 60.0);
        assert_relative_eq!(p.plateau_width_s(), 1.0 / 60.0);
        assert_relative_eq!(p.plateau_level(), 60.0);
        assert_relative_eq!(p.value(0.01), 60.0);
    }

    #[test]
    fn trapezoid_geometry() {
        let p = temporal_profile(0.5f64, 1.0 / 120.0, 1.0 / 1200.0).unwrap();
        assert_relative_eq!(p.base_width_s * 1e3, 4.1667, epsilon = 1e-4);
        assert_relative_eq!(p.plateau_width_s() * 1e3, 2.5, epsilon = 1e-9);
        assert_relative_eq!(p.integral(-1.0, 1.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.value(p.edge_width_s / 2.0), p.plateau_level() / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn impulse_at_zero_hold() {
        let p = temporal_profile(0.0f64, 1.0 / 60.0, 0.0).unwrap();
        assert!(p.is_impulse());
        let s = p.samples(1.0 / 60.0, 8);
        assert_relative_eq!(s[0] * (1.0 / 480.0), 1.0, epsilon = 1e-12);
        assert!(s[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_hold_concentrates() {
        let p = temporal_profile(1e-3f64, 1.0 / 60.0, 0.0).unwrap();
        let s = p.samples(1.0 / 60.0, 16);
        assert_relative_eq!(s[0] / 960.0, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn inequality_named_in_error() {
        let err = temporal_profile(0.1f64, 1.0 / 120.0, 1e-3).unwrap_err();
        assert!(err.to_string().contains("hold_interval * frame_s >= 2 * pixel_response_s"));
    }

    #[test]
    fn samples_preserve_area() {
        let p = temporal_profile(0.7f64, 0.01, 0.0013).unwrap();
        let s = p.samples(0.01, 37);
        assert_relative_eq!(s.iter().sum::<f64>() * 0.01 / 37.0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_matches_quadrature() {
        let p = temporal_profile(0.8f64, 0.01, 0.002).unwrap();
        for &w in &[0.0, 37.0, 120.0, 400.0] {
            let n = 20000;
            let dt = p.base_width_s / n as f64;
            let mut acc = num_complex::Complex::new(0.0, 0.0);
            for k in 0..n {
                let t = (k as f64 + 0.5) * dt;
                acc += num_complex::Complex::from_polar(p.value(t) * dt, -2.0 * std::f64::consts::PI * w * t);
            }
            let z = p.transform(w);
            assert!((acc - z).norm() < 1e-6, "w={w}: {acc} vs {z}");
        }
    }
}
