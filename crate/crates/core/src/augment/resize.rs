use super::image::Image;
use super::transform::interpolate;
use crate::error::{Error, Result};

/// Bilinear stretch to exactly `target_w`×`target_h` using half-pixel
/// centers; aspect ratio is not preserved.
pub fn resize(img: &Image, target_w: u32, target_h: u32) -> Result<Image> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidImage(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    if (img.width(), img.height()) == (target_w, target_h) {
        return Ok(img.clone());
    }
    let scale_x = img.width() as f64 / target_w as f64;
    let scale_y = img.height() as f64 / target_h as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;

    let mut out = Vec::with_capacity(target_w as usize * target_h as usize * 3);
    for y in 0..target_h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, max_y);
        for x in 0..target_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, max_x);
            out.extend_from_slice(&interpolate(img, sx, sy));
        }
    }
    Image::new(target_w, target_h, out)
}
