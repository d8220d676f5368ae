//! Procedural test images.
//!
//! Eight families (discs, boxes, stripes, rings, triangles, smooth noise,
//! glyph blocks, bricks) selected by `index % 8`, each drawn from a seeded
//! stream so the same `(index, seed)` always yields the same pixels. They
//! carry the sharp edges and textures that make bicubic upscaling lose detail.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FAMILIES: usize = 8;

type Color = [f64; 3];

fn random_color(rng: &mut ChaCha8Rng) -> Color {
    [rng.random(), rng.random(), rng.random()]
}

fn mix(a: Color, b: Color, t: f64) -> Color {
    [0, 1, 2].map(|i| a[i] * (1.0 - t) + b[i] * t)
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Lattice value noise with bilinear smoothstep interpolation.
struct ValueNoise {
    cells: usize,
    grid: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, cells: usize) -> Self {
        let n = cells + 2;
        ValueNoise {
            cells,
            grid: (0..n * n).map(|_| rng.random()).collect(),
        }
    }

    fn sample(&self, u: f64, v: f64) -> f64 {
        let n = self.cells + 2;
        let (x, y) = (u * self.cells as f64, v * self.cells as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (tx, ty) = (smoothstep(x - x0 as f64), smoothstep(y - y0 as f64));
        let g = |i: usize, j: usize| self.grid[j.min(n - 1) * n + i.min(n - 1)];
        let top = g(x0, y0) * (1.0 - tx) + g(x0 + 1, y0) * tx;
        let bottom = g(x0, y0 + 1) * (1.0 - tx) + g(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn edge(t: f64) -> f64 {
    // one-pixel-wide antialiased step
    (t + 0.5).clamp(0.0, 1.0)
}

pub fn generate(index: usize, height: u32, width: u32, seed: u64) -> RgbImage {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let (h, w) = (height as f64, width as f64);
    let bg_a = random_color(&mut rng);
    let bg_b = random_color(&mut rng);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let background = move |x: f64, y: f64| -> Color {
        let t = ((x / w - 0.5) * ca + (y / h - 0.5) * sa + 0.5).clamp(0.0, 1.0);
        mix(bg_a, bg_b, t)
    };

    let shade: Box<dyn Fn(f64, f64) -> Color> = match index % FAMILIES {
        0 => {
            let discs: Vec<(f64, f64, f64, Color)> = (0..rng.random_range(4..9))
                .map(|_| {
                    (
                        rng.random_range(0.0..w),
                        rng.random_range(0.0..h),
                        rng.random_range(0.08..0.3) * w.min(h),
                        random_color(&mut rng),
                    )
                })
                .collect();
            Box::new(move |x, y| {
                let mut c = background(x, y);
                for &(cx, cy, r, col) in &discs {
                    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    c = mix(c, col, edge(r - d));
                }
                c
            })
        }
        1 => {
            let boxes: Vec<(f64, f64, f64, f64, Color)> = (0..rng.random_range(4..10))
                .map(|_| {
                    let (x0, y0) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                    (
                        x0,
                        y0,
                        x0 + rng.random_range(0.1..0.5) * w,
                        y0 + rng.random_range(0.1..0.5) * h,
                        random_color(&mut rng),
                    )
                })
                .collect();
            Box::new(move |x, y| {
                let mut c = background(x, y);
                for &(x0, y0, x1, y1, col) in &boxes {
                    let inside = edge(x - x0)
                        .min(edge(x1 - x))
                        .min(edge(y - y0))
                        .min(edge(y1 - y));
                    c = mix(c, col, inside);
                }
                c
            })
        }
        2 => {
            let period = rng.random_range(3.5..7.0);
            let chirp = rng.random_range(0.0..0.04);
            let (a, b) = (random_color(&mut rng), random_color(&mut rng));
            Box::new(move |x, y| {
                let s = x * ca + y * sa;
                let phase = s / period + chirp * s * s / w;
                let t = 0.5 + 0.5 * (std::f64::consts::TAU * phase).sin();
                mix(mix(a, b, t), background(x, y), 0.25)
            })
        }
        3 => {
            let (cx, cy) = (
                rng.random_range(0.3..0.7) * w,
                rng.random_range(0.3..0.7) * h,
            );
            let spacing = rng.random_range(4.0..8.0);
            let (a, b) = (random_color(&mut rng), random_color(&mut rng));
            Box::new(move |x, y| {
                let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                let p = r % (2.0 * spacing);
                let t = if p < spacing {
                    edge(p.min(spacing - p))
                } else {
                    1.0 - edge((p - spacing).min(2.0 * spacing - p))
                };
                mix(mix(a, b, t), background(x, y), 0.2)
            })
        }
        4 => {
            let tris: Vec<([(f64, f64); 3], Color)> = (0..rng.random_range(3..7))
                .map(|_| {
                    let pts = [0; 3].map(|_| {
                        (
                            rng.random_range(-0.1..1.1) * w,
                            rng.random_range(-0.1..1.1) * h,
                        )
                    });
                    (pts, random_color(&mut rng))
                })
                .collect();
            Box::new(move |x, y| {
                let mut c = background(x, y);
                for (p, col) in &tris {
                    let side = |a: (f64, f64), b: (f64, f64)| {
                        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                        ((x - a.0) * dy - (y - a.1) * dx) / (dx * dx + dy * dy).sqrt().max(1e-9)
                    };
                    let s = [side(p[0], p[1]), side(p[1], p[2]), side(p[2], p[0])];
                    let inside = if s.iter().all(|&v| v >= -0.5) || s.iter().all(|&v| v <= 0.5) {
                        let m = if s[0] >= 0.0 {
                            s.iter().cloned().fold(f64::MAX, f64::min)
                        } else {
                            -s.iter().cloned().fold(f64::MIN, f64::max)
                        };
                        edge(m)
                    } else {
                        0.0
                    };
                    c = mix(c, *col, inside);
                }
                c
            })
        }
        5 => {
            let octaves: Vec<ValueNoise> = [4usize, 8, 16, 32]
                .iter()
                .map(|&n| ValueNoise::new(&mut rng, n))
                .collect();
            let (a, b) = (random_color(&mut rng), random_color(&mut rng));
            Box::new(move |x, y| {
                let (u, v) = (x / w, y / h);
                let t: f64 = octaves
                    .iter()
                    .zip([0.35, 0.3, 0.2, 0.15])
                    .map(|(o, amp)| amp * o.sample(u, v))
                    .sum();
                mix(a, b, t)
            })
        }
        6 => {
            let cell = rng.random_range(16..24) as f64;
            let ink = random_color(&mut rng);
            let pattern: Vec<u32> = (0..4096).map(|_| rng.random()).collect();
            Box::new(move |x, y| {
                let (cx, cy) = ((x / cell).floor() as usize, (y / cell).floor() as usize);
                let bits = pattern[(cy * 64 + cx) % pattern.len()];
                let sub = cell / 4.0;
                let (fx, fy) = ((x % cell / sub) as u32, (y % cell / sub) as u32);
                let on = bits >> ((fy * 4 + fx) % 32) & 1 == 1 && fx < 3 && fy < 3;
                if on {
                    let (lx, ly) = (x % sub, y % sub);
                    mix(
                        background(x, y),
                        ink,
                        edge(lx.min(sub - lx).min(ly).min(sub - ly)),
                    )
                } else {
                    background(x, y)
                }
            })
        }
        _ => {
            let (bw, bh) = (rng.random_range(8.0..16.0), rng.random_range(4.0..8.0));
            let (brick, mortar) = (random_color(&mut rng), random_color(&mut rng));
            let noise = ValueNoise::new(&mut rng, 9);
            Box::new(move |x, y| {
                let row = (y / bh).floor();
                let shift = if row as i64 % 2 == 0 { 0.0 } else { bw / 2.0 };
                let (mx, my) = ((x + shift) % bw, y % bh);
                let base = mix(brick, mortar, edge(1.5 - mx.min(my)));
                mix(base, background(x, y), 0.3 * noise.sample(x / w, y / h))
            })
        }
    };

    RgbImage::from_fn(width, height, |x, y| {
        let c = shade(x as f64 + 0.5, y as f64 + 0.5);
        Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
    })
}
