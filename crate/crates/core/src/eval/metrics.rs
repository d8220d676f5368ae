use crate::data::ImageY;
use crate::error::{Error, Result};

/// Value returned by [`psnr`] for identical images.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Pixels of `img` inside a frame of width `shave`, row-major.
fn shaved(img: &ImageY, shave: usize) -> (usize, usize, Vec<f64>) {
    let (h, w) = img.dims();
    let (ch, cw) = (h - 2 * shave, w - 2 * shave);
    let mut out = Vec::with_capacity(ch * cw);
    for y in shave..h - shave {
        out.extend_from_slice(&img.values()[y * w + shave..y * w + w - shave]);
    }
    (ch, cw, out)
}

fn check_pair(op: &'static str, y: &ImageY, y_hat: &ImageY, shave: usize) -> Result<()> {
    if y.dims() != y_hat.dims() {
        return Err(Error::shape(op, y.dims(), y_hat.dims()));
    }
    let (h, w) = y.dims();
    if 2 * shave >= h.min(w) {
        return Err(Error::Data(format!(
            "{op}: shave {shave} leaves nothing of a {h}x{w} image"
        )));
    }
    Ok(())
}

/// Mean squared error after removing `shave` pixels from every border, with
/// `y_hat` clamped to `[0, 1]`.
pub fn shaved_mse(y: &ImageY, y_hat: &ImageY, shave: usize) -> Result<f64> {
    check_pair("mse", y, y_hat, shave)?;
    let (_, _, a) = shaved(y, shave);
    let (_, _, b) = shaved(y_hat, shave);
    let sum: f64 = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - q.clamp(0.0, 1.0)).powi(2))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB for peak value 1, capped at
/// [`PSNR_CAP`] when the shaved images are identical.
pub fn psnr(y: &ImageY, y_hat: &ImageY, shave: usize) -> Result<f64> {
    let mse = shaved_mse(y, y_hat, shave)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.map(|v| v / total)
}

/// Gaussian-weighted mean of every valid `11 × 11` window position.
fn filter_valid(
    h: usize,
    w: usize,
    values: &[f64],
    g: &[f64; SSIM_WINDOW],
) -> (usize, usize, Vec<f64>) {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; oh * w];
    for oy in 0..oh {
        for (k, gk) in g.iter().enumerate() {
            let src = &values[(oy + k) * w..(oy + k + 1) * w];
            for (d, s) in rows[oy * w..(oy + 1) * w].iter_mut().zip(src) {
                *d += gk * s;
            }
        }
    }
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        let row = &rows[oy * w..(oy + 1) * w];
        for ox in 0..ow {
            out[oy * ow + ox] = g
                .iter()
                .zip(&row[ox..ox + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    (oh, ow, out)
}

/// Single-scale structural similarity on the shaved images: `11 × 11`
/// Gaussian window (σ = 1.5), `K₁ = 0.01`, `K₂ = 0.03`, dynamic range 1,
/// averaged over valid window positions only (no padding).
pub fn ssim(y: &ImageY, y_hat: &ImageY, shave: usize) -> Result<f64> {
    check_pair("ssim", y, y_hat, shave)?;
    let (h, w, a) = shaved(y, shave);
    let (_, _, b) = shaved(y_hat, shave);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Data(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels after shaving, got {h}x{w}"
        )));
    }
    let b: Vec<f64> = b.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let g = gaussian_window();
    let product = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let (_, _, mu_a) = filter_valid(h, w, &a, &g);
    let (_, _, mu_b) = filter_valid(h, w, &b, &g);
    let (_, _, aa) = filter_valid(h, w, &product(&a, &a), &g);
    let (_, _, bb) = filter_valid(h, w, &product(&b, &b), &g);
    let (_, _, ab) = filter_valid(h, w, &product(&a, &b), &g);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
