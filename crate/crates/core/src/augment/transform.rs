//! Geometric transforms. Coordinates are continuous with pixel `i` covering
//! `[i, i + 1)`; resampling maps each output pixel center back into the
//! source and samples it bilinearly.

use std::fmt;
use std::str::FromStr;

use super::image::Image;
use crate::error::{Error, Result};

/// The five label-preserving transforms applied to every core image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transform {
    /// 30° clockwise.
    RotMinus30,
    /// 30° counterclockwise.
    RotPlus30,
    /// 90° counterclockwise, lossless.
    RotPlus90,
    /// Mirror about the vertical axis.
    FlipH,
    /// Horizontal shear `(x, y) -> (x + k·y, y)`.
    Shear,
}

impl Transform {
    pub const ALL: [Transform; 5] = [
        Transform::RotMinus30,
        Transform::RotPlus30,
        Transform::RotPlus90,
        Transform::FlipH,
        Transform::Shear,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Transform::RotMinus30 => "rot_minus30",
            Transform::RotPlus30 => "rot_plus30",
            Transform::RotPlus90 => "rot_plus90",
            Transform::FlipH => "flip_h",
            Transform::Shear => "shear",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    #[default]
    Bilinear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    pub transform: Transform,
    pub shear_factor: f64,
    pub fill: [u8; 3],
    pub interpolation: Interpolation,
}

pub const DEFAULT_SHEAR_FACTOR: f64 = 0.2;

impl AugmentSpec {
    pub fn new(transform: Transform) -> Self {
        AugmentSpec {
            transform,
            shear_factor: DEFAULT_SHEAR_FACTOR,
            fill: [0, 0, 0],
            interpolation: Interpolation::Bilinear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.shear_factor.is_finite() || self.shear_factor.abs() >= 2.0 {
            return Err(Error::Config(format!(
                "shear_factor must be finite with |k| < 2, got {}",
                self.shear_factor
            )));
        }
        Ok(())
    }
}

pub fn apply_transform(img: &Image, spec: &AugmentSpec) -> Result<Image> {
    spec.validate()?;
    Ok(match spec.transform {
        Transform::FlipH => flip_h(img),
        Transform::RotPlus90 => rot_plus90(img),
        Transform::RotPlus30 => rotate(img, 30.0, spec.fill),
        Transform::RotMinus30 => rotate(img, -30.0, spec.fill),
        Transform::Shear => shear(img, spec.shear_factor, spec.fill),
    })
}

pub fn flip_h(img: &Image) -> Image {
    let row = img.width() as usize * 3;
    let mut out = Vec::with_capacity(img.pixels().len());
    for line in img.pixels().chunks_exact(row) {
        out.extend(line.chunks_exact(3).rev().flatten());
    }
    Image::new(img.width(), img.height(), out).expect("same dimensions")
}

/// Quarter turn counterclockwise; width and height swap.
pub fn rot_plus90(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut out = Image::filled(h, w, [0, 0, 0]).expect("nonzero dimensions");
    for oy in 0..w {
        for ox in 0..h {
            out.put(ox, oy, img.get(w - 1 - oy, ox));
        }
    }
    out
}

/// Rotation by `degrees` (positive = counterclockwise) onto the full rotated
/// bounding box; uncovered pixels take `fill`.
pub fn rotate(img: &Image, degrees: f64, fill: [u8; 3]) -> Image {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let out_w = extent(w * cos.abs() + h * sin.abs());
    let out_h = extent(w * sin.abs() + h * cos.abs());
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ocx, ocy) = (out_w as f64 / 2.0, out_h as f64 / 2.0);

    let mut out = Image::filled(out_w, out_h, fill).expect("nonzero dimensions");
    for oy in 0..out_h {
        let dy_out = oy as f64 + 0.5 - ocy;
        for ox in 0..out_w {
            let dx_out = ox as f64 + 0.5 - ocx;
            let dx = dx_out * cos - dy_out * sin;
            let dy = dx_out * sin + dy_out * cos;
            let px = sample_bilinear(img, cx + dx - 0.5, cy + dy - 0.5, fill);
            out.put(ox, oy, px);
        }
    }
    out
}

/// Horizontal shear onto a canvas wide enough to hold the whole result.
pub fn shear(img: &Image, k: f64, fill: [u8; 3]) -> Image {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let out_w = extent(w + k.abs() * h);
    let out_h = img.height();
    let offset = if k < 0.0 { -k * h } else { 0.0 };

    let mut out = Image::filled(out_w, out_h, fill).expect("nonzero dimensions");
    for oy in 0..out_h {
        let y = oy as f64 + 0.5;
        for ox in 0..out_w {
            let x = ox as f64 + 0.5 - offset - k * y;
            let px = sample_bilinear(img, x - 0.5, oy as f64, fill);
            out.put(ox, oy, px);
        }
    }
    out
}

fn extent(len: f64) -> u32 {
    ((len - 1e-9).ceil() as u32).max(1)
}

const EDGE_EPS: f64 = 1e-9;

/// Bilinear sample at pixel-index coordinates `(sx, sy)`. Points outside the
/// hull of source pixel centers return `fill`.
pub(crate) fn sample_bilinear(img: &Image, sx: f64, sy: f64, fill: [u8; 3]) -> [u8; 3] {
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    if sx < -EDGE_EPS || sy < -EDGE_EPS || sx > max_x + EDGE_EPS || sy > max_y + EDGE_EPS {
        return fill;
    }
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    interpolate(img, sx, sy)
}

/// Bilinear interpolation at an in-range coordinate.
#[inline]
pub(crate) fn interpolate(img: &Image, sx: f64, sy: f64) -> [u8; 3] {
    let x0 = sx.floor() as u32;
    let y0 = sy.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut px = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
        let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        px[ch] = v.round().clamp(0.0, 255.0) as u8;
    }
    px
}
