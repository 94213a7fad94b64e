//! Minimal scatter-plot rasterizer for per-point error maps: points colored
//! by magnitude on a blue-to-red ramp, written as PNG.

use std::path::Path;

use crate::error::CliError;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;

fn ramp(t: f64) -> [u8; 3] {
    // blue (low) -> white (mid) -> red (high)
    let t = t.clamp(0.0, 1.0);
    if t < 0.5 {
        let s = t * 2.0;
        [
            (s * 255.0) as u8,
            (s * 255.0) as u8,
            255,
        ]
    } else {
        let s = (t - 0.5) * 2.0;
        [
            255,
            ((1.0 - s) * 255.0) as u8,
            ((1.0 - s) * 255.0) as u8,
        ]
    }
}

pub fn scatter_png(path: &Path, coords: &[[f64; 2]], values: &[f64]) -> Result<(), CliError> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in coords {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = [
        (hi[0] - lo[0]).max(f64::MIN_POSITIVE),
        (hi[1] - lo[1]).max(f64::MIN_POSITIVE),
    ];
    let vmax = values.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);

    let mut img = image::RgbImage::from_pixel(WIDTH, HEIGHT, image::Rgb([20, 20, 24]));
    let margin = 10.0;
    for (p, &v) in coords.iter().zip(values) {
        let x = margin + (p[0] - lo[0]) / span[0] * (WIDTH as f64 - 2.0 * margin);
        let y = margin + (1.0 - (p[1] - lo[1]) / span[1]) * (HEIGHT as f64 - 2.0 * margin);
        let color = image::Rgb(ramp(v.abs() / vmax));
        for dx in 0..2i32 {
            for dy in 0..2i32 {
                let px = (x as i32 + dx).clamp(0, WIDTH as i32 - 1) as u32;
                let py = (y as i32 + dy).clamp(0, HEIGHT as i32 - 1) as u32;
                img.put_pixel(px, py, color);
            }
        }
    }
    img.save(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
