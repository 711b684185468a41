use super::raster::{ObjectMask, RasterImage, CHANNELS};
use crate::error::{usage, Result};

/// Fills masked pixels by Jacobi iteration of the 4-neighbour average,
/// starting from the mean of the pixels bordering the hole. Unmasked pixels
/// are never modified.
pub fn simple_inpaint(image: &RasterImage, mask: &ObjectMask, iterations: u32) -> Result<RasterImage> {
    if !image.same_dims(mask.width, mask.height) {
        return Err(usage!("inpaint mask does not match image dimensions"));
    }
    let n = image.pixel_count();
    if mask.area >= n {
        return Err(usage!("inpaint mask covers the entire image"));
    }
    if mask.area * 2 >= n {
        return Err(usage!(
            "inpaint mask covers {} of {n} pixels; must be under half",
            mask.area
        ));
    }
    if mask.area == 0 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width as i64, image.height as i64);
    let neighbours = |p: usize| {
        let (x, y) = ((p as i64) % w, (p as i64) / w);
        [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
            .into_iter()
            .filter(move |&(nx, ny)| nx >= 0 && ny >= 0 && nx < w && ny < h)
            .map(move |(nx, ny)| (ny * w + nx) as usize)
    };

    let mut seed = [0.0f64; CHANNELS];
    let mut seed_count = 0usize;
    for p in 0..n {
        if !mask.bits[p] && neighbours(p).any(|q| mask.bits[q]) {
            for (c, s) in seed.iter_mut().enumerate() {
                *s += image.data[p * CHANNELS + c] as f64;
            }
            seed_count += 1;
        }
    }
    for s in &mut seed {
        *s /= seed_count.max(1) as f64;
    }

    let holes: Vec<usize> = (0..n).filter(|&p| mask.bits[p]).collect();
    let mut cur: Vec<f64> = image.data.iter().map(|&v| v as f64).collect();
    for &p in &holes {
        cur[p * CHANNELS..(p + 1) * CHANNELS].copy_from_slice(&seed);
    }
    let mut next = cur.clone();
    for _ in 0..iterations {
        for &p in &holes {
            let mut acc = [0.0f64; CHANNELS];
            let mut k = 0.0;
            for q in neighbours(p) {
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += cur[q * CHANNELS + c];
                }
                k += 1.0;
            }
            for c in 0..CHANNELS {
                next[p * CHANNELS + c] = acc[c] / k;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let mut out = image.clone();
    for &p in &holes {
        for c in 0..CHANNELS {
            out.data[p * CHANNELS + c] = cur[p * CHANNELS + c].round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
