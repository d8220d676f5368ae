//! Separable bicubic resampling.
//!
//! Keys cubic convolution with `a = -0.5`, pixel-center alignment
//! (`src = (dst + 0.5) / scale - 0.5`) and edge-clamped sampling. When
//! shrinking, the kernel is stretched by `1 / scale` so that it also acts as
//! an anti-aliasing filter, and weights are renormalized to sum to one. This
//! is the resampler conventionally used to synthesize super-resolution
//! benchmarks.

use crate::data::ImageY;
use crate::error::{Error, Result};

pub const CUBIC_A: f64 = -0.5;

pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Contribution of every input index to one output index along one axis.
struct Taps {
    /// `(first input index before clamping, weights)` per output index.
    rows: Vec<(isize, Vec<f64>)>,
}

fn taps(in_len: usize, out_len: usize) -> Taps {
    let scale = out_len as f64 / in_len as f64;
    let (stretch, support) = if scale < 1.0 {
        (scale, 2.0 / scale)
    } else {
        (1.0, 2.0)
    };
    let span = (2.0 * support).ceil() as usize + 2;
    let rows = (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let first = (center - support).floor() as isize;
            let mut weights: Vec<f64> = (0..span)
                .map(|k| stretch * cubic_kernel(stretch * (center - (first + k as isize) as f64)))
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            (first, weights)
        })
        .collect();
    Taps { rows }
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Resamples to exactly `height × width`; output is clamped to `[0, 1]`.
pub fn bicubic_resize_to(img: &ImageY, height: usize, width: usize) -> Result<ImageY> {
    if height == 0 || width == 0 {
        return Err(Error::Data(format!(
            "degenerate resize target {height}x{width}"
        )));
    }
    let (h, w) = img.dims();
    if (h, w) == (height, width) {
        return Ok(img.clone());
    }

    // vertical pass: h × w → height × w
    let vt = taps(h, height);
    let mut mid = vec![0.0; height * w];
    for (oy, (first, weights)) in vt.rows.iter().enumerate() {
        let dst = &mut mid[oy * w..(oy + 1) * w];
        for (k, &wt) in weights.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let sy = clamp_index(first + k as isize, h);
            let src = &img.values()[sy * w..(sy + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wt * s;
            }
        }
    }

    // horizontal pass: height × w → height × width
    let ht = taps(w, width);
    let mut out = Vec::with_capacity(height * width);
    for oy in 0..height {
        let row = &mid[oy * w..(oy + 1) * w];
        for (first, weights) in &ht.rows {
            let mut acc = 0.0;
            for (k, &wt) in weights.iter().enumerate() {
                if wt != 0.0 {
                    acc += wt * row[clamp_index(first + k as isize, w)];
                }
            }
            out.push(acc);
        }
    }
    ImageY::from_clamped(height, width, out)
}

/// Resamples by `factor`; each output dimension is `round(dim * factor)`.
pub fn bicubic_resize(img: &ImageY, factor: f64) -> Result<ImageY> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Data(format!(
            "resize factor {factor} must be positive"
        )));
    }
    let height = (img.height() as f64 * factor).round() as usize;
    let width = (img.width() as f64 * factor).round() as usize;
    bicubic_resize_to(img, height, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Non-separable direct evaluation of the same resampler: every output
    /// pixel is the normalized 2-D kernel sum over a generous input window.
    fn direct_resize(img: &ImageY, height: usize, width: usize) -> Vec<f64> {
        let (h, w) = img.dims();
        let axis = |in_len: usize, out_len: usize, i: usize| {
            let s = out_len as f64 / in_len as f64;
            let stretch = s.min(1.0);
            let c = (i as f64 + 0.5) / s - 0.5;
            let lo = (c - 3.0 / stretch).floor() as i64;
            let hi = (c + 3.0 / stretch).ceil() as i64;
            (lo..=hi)
                .map(|j| (j, stretch * cubic_kernel(stretch * (c - j as f64))))
                .collect::<Vec<_>>()
        };
        let mut out = Vec::new();
        for oy in 0..height {
            let ry = axis(h, height, oy);
            for ox in 0..width {
                let rx = axis(w, width, ox);
                let mut num = 0.0;
                let mut den = 0.0;
                for &(j, wy) in &ry {
                    for &(k, wx) in &rx {
                        let sy = j.clamp(0, h as i64 - 1) as usize;
                        let sx = k.clamp(0, w as i64 - 1) as usize;
                        num += wy * wx * img.get(sy, sx);
                        den += wy * wx;
                    }
                }
                out.push((num / den).clamp(0.0, 1.0));
            }
        }
        out
    }

    #[test]
    fn kernel_values() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(-2.0), 0.0);
        assert!((cubic_kernel(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic_kernel(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn constant_stays_constant() {
        let img = ImageY::constant(9, 7, 0.3).unwrap();
        for (h, w) in [(18, 14), (4, 3), (13, 5)] {
            let r = bicubic_resize_to(&img, h, w).unwrap();
            assert!(r.values().iter().all(|v| (v - 0.3).abs() < 1e-12));
            let back = bicubic_resize_to(&r, 9, 7).unwrap();
            assert!(back.values().iter().all(|v| (v - 0.3).abs() < 1e-12));
        }
    }

    #[test]
    fn ramp_downscale_matches_direct_oracle() {
        let img = ImageY::from_fn(8, 8, |y, x| (y * 8 + x) as f64 / 63.0).unwrap();
        let fast = bicubic_resize(&img, 0.5).unwrap();
        assert_eq!(fast.dims(), (4, 4));
        let slow = direct_resize(&img, 4, 4);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn upscale_matches_direct_oracle() {
        let img = ImageY::from_fn(5, 6, |y, x| ((y * 7 + x * 3) % 5) as f64 / 4.0).unwrap();
        let fast = bicubic_resize_to(&img, 10, 12).unwrap();
        let slow = direct_resize(&img, 10, 12);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_target() {
        let img = ImageY::constant(3, 3, 0.5).unwrap();
        assert!(bicubic_resize(&img, 0.1).is_err());
        assert!(bicubic_resize(&img, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn unit_factor_is_identity(seed in 0u64..500, h in 1usize..12, w in 1usize..12) {
            let img = ImageY::from_fn(h, w, |y, x| ((seed as usize * 31 + y * 17 + x * 5) % 97) as f64 / 96.0).unwrap();
            let same = bicubic_resize(&img, 1.0).unwrap();
            for (a, b) in img.values().iter().zip(same.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn output_stays_in_unit_range(seed in 0u64..500, f in 0.3f64..3.0) {
            let img = ImageY::from_fn(9, 9, |y, x| if (y + x + seed as usize) % 2 == 0 { 1.0 } else { 0.0 }).unwrap();
            if let Ok(r) = bicubic_resize(&img, f) {
                prop_assert!(r.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
