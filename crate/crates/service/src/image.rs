//! PNG heatmaps and small line plots.

use crate::error::{Result, ServiceError};

/// 8-bit RGB canvas.
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width * height * 3],
        }
    }

    pub fn set(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), rgb: [u8; 3]) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.set((x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64, rgb);
        }
    }

    pub fn dot(&mut self, (x, y): (f64, f64), rgb: [u8; 3]) {
        let (x, y) = (x.round() as i64, y.round() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                self.set(x + dx, y + dy, rgb);
            }
        }
    }

    pub fn rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, rgb: [u8; 3]) {
        let (a, b) = ((x0 as f64, y0 as f64), (x1 as f64, y1 as f64));
        self.line(a, (b.0, a.1), rgb);
        self.line((b.0, a.1), b, rgb);
        self.line(b, (a.0, b.1), rgb);
        self.line((a.0, b.1), a, rgb);
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        encode_png(self.width, self.height, png::ColorType::Rgb, &self.pixels)
    }
}

pub fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| ServiceError::Internal(format!("png encoding: {e}"));
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(data).map_err(png_err)?;
    }
    Ok(out)
}

/// Maps `planes` (one or three, each `rows * cols`) to an 8-bit image.
///
/// With `log_decades` the values are shown as `log10` over that many decades
/// below the maximum; otherwise linearly between the joint minimum and maximum.
/// The first row is drawn at the bottom.
pub fn heatmap(planes: &[Vec<f64>], rows: usize, cols: usize, log_decades: Option<f64>) -> Result<Vec<u8>> {
    let map = |v: f64| match log_decades {
        Some(_) => v.abs().max(f64::MIN_POSITIVE).log10(),
        None => v,
    };
    let mapped: Vec<Vec<f64>> = planes.iter().map(|p| p.iter().map(|&v| map(v)).collect()).collect();
    let hi = mapped.iter().flatten().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lo = match log_decades {
        Some(d) => hi - d,
        None => mapped.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v)),
    };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let byte = |v: f64| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8;
    let channels = mapped.len();
    let mut data = Vec::with_capacity(rows * cols * channels);
    for r in (0..rows).rev() {
        for c in 0..cols {
            for p in &mapped {
                data.push(byte(p[r * cols + c]));
            }
        }
    }
    let color = match channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        n => return Err(ServiceError::Internal(format!("cannot draw {n} channels"))),
    };
    encode_png(cols, rows, color, &data)
}

/// Linear or logarithmic mapping of data coordinates onto a pixel range.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
    pub px0: f64,
    pub px1: f64,
}

impl Scale {
    pub fn fit(values: impl IntoIterator<Item = f64>, log: bool, px0: f64, px1: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if v.is_finite() && (!log || v > 0.0) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(lo < hi) {
            let base = if lo.is_finite() { lo } else { 1.0 };
            (lo, hi) = if log { (base / 2.0, base * 2.0) } else { (base - 1.0, base + 1.0) };
        }
        Self { lo, hi, log, px0, px1 }
    }

    pub fn px(&self, v: f64) -> f64 {
        let f = |x: f64| if self.log { x.max(f64::MIN_POSITIVE).log10() } else { x };
        self.px0 + (f(v) - f(self.lo)) / (f(self.hi) - f(self.lo)) * (self.px1 - self.px0)
    }
}

pub const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [140, 86, 75],
];
