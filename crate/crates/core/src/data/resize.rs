use crate::error::{usage, Result};
use crate::synth::RasterImage;

/// Bilinear resample to `side`×`side`.
pub fn resize_bilinear(image: &RasterImage, side: u32) -> Result<RasterImage> {
    if side < 8 {
        return Err(usage!("resize side must be at least 8, got {side}"));
    }
    resize_bilinear_to(image, side, side)
}

/// Bilinear resample with half-pixel centers (no corner alignment) and edge clamping.
pub fn resize_bilinear_to(image: &RasterImage, width: u32, height: u32) -> Result<RasterImage> {
    if image.width == 0 || image.height == 0 || width == 0 || height == 0 {
        return Err(usage!(
            "cannot resize {}x{} to {width}x{height}",
            image.width,
            image.height
        ));
    }
    if image.width == width && image.height == height {
        return Ok(image.clone());
    }
    let sx = image.width as f64 / width as f64;
    let sy = image.height as f64 / height as f64;
    let axis = |d: u32, scale: f64, len: u32| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as u32;
        (i0, (i0 + 1).min(len - 1), s - i0 as f64)
    };
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, sy, image.height);
        for x in 0..width {
            let (x0, x1, fx) = axis(x, sx, image.width);
            let (p00, p10) = (image.pixel(x0, y0), image.pixel(x1, y0));
            let (p01, p11) = (image.pixel(x0, y1), image.pixel(x1, y1));
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                data.push((top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(width, height, data, image.color_space)
}
