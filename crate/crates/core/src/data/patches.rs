use crate::data::{bicubic_resize_to, ImageY, TrainingPair};
use crate::error::{Error, Result};

/// Builds the pre-upsampled pair for `hr`: the image is center-cropped to a
/// multiple of `scale`, shrunk by `scale` and enlarged back.
pub fn make_pair(id: impl Into<String>, hr: &ImageY, scale: u32) -> Result<TrainingPair> {
    let s = scale as usize;
    let (h, w) = hr.dims();
    if s == 0 || h < s || w < s {
        return Err(Error::Data(format!(
            "{h}x{w} image is too small for scale {scale}"
        )));
    }
    let (ch, cw) = (h - h % s, w - w % s);
    let y = hr.crop((h % s) / 2, (w % s) / 2, ch, cw)?;
    let lr = bicubic_resize_to(&y, ch / s, cw / s)?;
    let x = bicubic_resize_to(&lr, ch, cw)?;
    Ok(TrainingPair {
        id: id.into(),
        x,
        y,
        scale,
    })
}

/// Aligned `size × size` crops on a `stride` grid, row-major. Patch ids
/// append `|row_col` to the pair id.
pub fn extract_patches(
    pair: &TrainingPair,
    size: usize,
    stride: usize,
) -> Result<Vec<TrainingPair>> {
    let (h, w) = pair.y.dims();
    if size == 0 || stride == 0 {
        return Err(Error::Data("patch size and stride must be positive".into()));
    }
    if size > h || size > w {
        return Err(Error::Data(format!(
            "patch size {size} exceeds {h}x{w} image {}",
            pair.id
        )));
    }
    let mut out = Vec::new();
    for top in (0..=h - size).step_by(stride) {
        for left in (0..=w - size).step_by(stride) {
            out.push(TrainingPair {
                id: format!("{}|{top}_{left}", pair.id),
                x: pair.x.crop(top, left, size, size)?,
                y: pair.y.crop(top, left, size, size)?,
                scale: pair.scale,
            });
        }
    }
    Ok(out)
}

/// Number of patches [`extract_patches`] yields for an `h × w` pair.
pub fn patch_grid_count(h: usize, w: usize, size: usize, stride: usize) -> usize {
    if size > h || size > w {
        return 0;
    }
    ((h - size) / stride + 1) * ((w - size) / stride + 1)
}

/// Components of a patch id `source|transform|row_col`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchId {
    pub source: String,
    pub transform: String,
    pub row: usize,
    pub col: usize,
}

impl std::fmt::Display for PatchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}|{}|{}_{}",
            self.source, self.transform, self.row, self.col
        )
    }
}

pub fn parse_patch_id(id: &str) -> Option<PatchId> {
    let mut parts = id.rsplitn(3, '|');
    let coords = parts.next()?;
    let transform = parts.next()?;
    let source = parts.next()?;
    let (row, col) = coords.split_once('_')?;
    Some(PatchId {
        source: source.to_string(),
        transform: transform.to_string(),
        row: row.parse().ok()?,
        col: col.parse().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bicubic_resize_to;

    fn checker(h: usize, w: usize) -> ImageY {
        ImageY::from_fn(h, w, |y, x| if (y + x) % 2 == 0 { 0.9 } else { 0.1 }).unwrap()
    }

    #[test]
    fn constant_image_pair_is_exact() {
        let img = ImageY::constant(12, 10, 0.42).unwrap();
        let p = make_pair("c", &img, 3).unwrap();
        assert_eq!(p.y.dims(), (12, 9));
        for (a, b) in p.x.values().iter().zip(p.y.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_one_is_identity() {
        let img = checker(7, 5);
        let p = make_pair("c", &img, 1).unwrap();
        assert_eq!(p.x, p.y);
        assert_eq!(p.y, img);
    }

    #[test]
    fn checkerboard_is_smoothed_like_composed_resizes() {
        let img = checker(8, 8);
        let p = make_pair("c", &img, 2).unwrap();
        let oracle = bicubic_resize_to(&bicubic_resize_to(&img, 4, 4).unwrap(), 8, 8).unwrap();
        assert_eq!(p.x, oracle);
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        assert!(spread(p.x.values()) < spread(p.y.values()));
    }

    #[test]
    fn too_small_for_scale() {
        assert!(make_pair("c", &checker(1, 5), 2).is_err());
    }

    #[test]
    fn grid_arithmetic() {
        let img = checker(84, 84);
        let pair = TrainingPair {
            id: "a|s1_r0".into(),
            x: img.clone(),
            y: img.clone(),
            scale: 1,
        };
        assert_eq!(extract_patches(&pair, 41, 41).unwrap().len(), 4);
        assert_eq!(patch_grid_count(84, 84, 41, 41), 4);
        assert_eq!(extract_patches(&pair, 84, 10).unwrap().len(), 1);
        assert!(extract_patches(&pair, 85, 10).is_err());
    }

    #[test]
    fn patch_matches_manual_slice() {
        let img = ImageY::from_fn(10, 12, |y, x| (y * 12 + x) as f64 / 119.0).unwrap();
        let pair = TrainingPair {
            id: "src|s1_r0".into(),
            x: img.clone(),
            y: img.clone(),
            scale: 1,
        };
        let patches = extract_patches(&pair, 4, 3).unwrap();
        assert_eq!(patches.len(), patch_grid_count(10, 12, 4, 3));
        let p = patches.iter().find(|p| p.id.ends_with("|3_6")).unwrap();
        for dy in 0..4 {
            for dx in 0..4 {
                assert_eq!(p.y.get(dy, dx), img.get(3 + dy, 6 + dx));
            }
        }
    }

    #[test]
    fn ids_parse_back() {
        let id = PatchId {
            source: "butterfly.png".into(),
            transform: "s0.7_r90_f".into(),
            row: 41,
            col: 0,
        };
        assert_eq!(parse_patch_id(&id.to_string()), Some(id));
        assert_eq!(parse_patch_id("nope"), None);
    }
}
