use serde::{Deserialize, Serialize};

use crate::data::{bicubic_resize, ImageY};
use crate::error::{Error, Result};

/// Which geometric variants [`augment`] produces per source image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    /// Clockwise rotations in degrees, each one of 90, 180 or 270.
    pub rotations: Vec<u16>,
    pub flip: bool,
    /// Downsampling ratios applied to the source before anything else.
    pub scales: Vec<f64>,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec::none()
    }
}

impl AugmentSpec {
    pub fn none() -> Self {
        AugmentSpec {
            rotations: vec![],
            flip: false,
            scales: vec![1.0],
        }
    }

    /// Rotations by 90/180/270 degrees, horizontal flips, and rescaling by 0.5, 0.7 and 1.0.
    pub fn full() -> Self {
        AugmentSpec {
            rotations: vec![90, 180, 270],
            flip: true,
            scales: vec![0.5, 0.7, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidConfig(
                "augmentation needs at least one scale".into(),
            ));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "augmentation scale {s} must be positive"
            )));
        }
        for (i, r) in self.rotations.iter().enumerate() {
            if ![90, 180, 270].contains(r) {
                return Err(Error::InvalidConfig(format!(
                    "rotation {r} is not one of 90, 180, 270"
                )));
            }
            if self.rotations[..i].contains(r) {
                return Err(Error::InvalidConfig(format!("rotation {r} listed twice")));
            }
        }
        for (i, s) in self.scales.iter().enumerate() {
            if self.scales[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("scale {s} listed twice")));
            }
        }
        Ok(())
    }

    /// `|scales| × (1 + |rotations|) × (2 if flip else 1)`.
    pub fn variant_count(&self) -> usize {
        self.scales.len() * (1 + self.rotations.len()) * if self.flip { 2 } else { 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedImage {
    /// e.g. `s0.7_r90_f`.
    pub tag: String,
    pub image: ImageY,
}

/// Rotates 90 degrees clockwise.
pub fn rotate90(img: &ImageY) -> ImageY {
    let (h, w) = img.dims();
    // output is w × h; out(y, x) = in(h - 1 - x, y)
    ImageY::from_fn(w, h, |y, x| img.get(h - 1 - x, y)).expect("rotation keeps values in range")
}

pub fn flip_horizontal(img: &ImageY) -> ImageY {
    let (h, w) = img.dims();
    ImageY::from_fn(h, w, |y, x| img.get(y, w - 1 - x)).expect("flip keeps values in range")
}

fn rotate(img: &ImageY, degrees: u16) -> ImageY {
    let mut out = img.clone();
    for _ in 0..degrees / 90 {
        out = rotate90(&out);
    }
    out
}

/// Deterministic list of variants: for each scale in order, the identity
/// followed by the listed rotations, and then (if `flip`) the horizontally
/// flipped version of each of those.
pub fn augment(hr: &ImageY, spec: &AugmentSpec) -> Result<Vec<AugmentedImage>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.variant_count());
    for &scale in &spec.scales {
        let base = if scale == 1.0 {
            hr.clone()
        } else {
            bicubic_resize(hr, scale)?
        };
        let mut rotated = vec![(0u16, base.clone())];
        rotated.extend(spec.rotations.iter().map(|&r| (r, rotate(&base, r))));
        for &(deg, ref img) in &rotated {
            out.push(AugmentedImage {
                tag: format!("s{scale}_r{deg}"),
                image: img.clone(),
            });
        }
        if spec.flip {
            for (deg, img) in &rotated {
                out.push(AugmentedImage {
                    tag: format!("s{scale}_r{deg}_f"),
                    image: flip_horizontal(img),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ImageY {
        ImageY::from_fn(6, 9, |y, x| ((y * 9 + x) % 11) as f64 / 10.0).unwrap()
    }

    #[test]
    fn full_spec_gives_twenty_four() {
        let v = augment(&sample(), &AugmentSpec::full()).unwrap();
        assert_eq!(v.len(), 24);
        let mut tags: Vec<_> = v.iter().map(|a| a.tag.clone()).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 24);
    }

    #[test]
    fn empty_spec_is_identity() {
        let img = sample();
        let v = augment(&img, &AugmentSpec::none()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].image, img);
        assert_eq!(v[0].tag, "s1_r0");
    }

    #[test]
    fn rotation_group() {
        let img = sample();
        let r = rotate90(&img);
        assert_eq!(r.dims(), (9, 6));
        assert_eq!(rotate90(&rotate90(&rotate90(&r))), img);
        let half = rotate(&img, 180);
        assert_eq!(rotate(&half, 180), img);
        assert_eq!(flip_horizontal(&flip_horizontal(&img)), img);
        // top-left corner moves to top-right under a clockwise turn
        assert_eq!(r.get(0, r.width() - 1), img.get(0, 0));
    }

    #[test]
    fn rejects_bad_specs() {
        let img = sample();
        let mut s = AugmentSpec::none();
        s.scales.clear();
        assert!(augment(&img, &s).is_err());
        s = AugmentSpec::none();
        s.rotations = vec![45];
        assert!(augment(&img, &s).is_err());
        s.rotations = vec![90, 90];
        assert!(augment(&img, &s).is_err());
    }

    proptest! {
        #[test]
        fn count_matches_formula(mask in 0u8..8, flip: bool, smask in 1u8..8) {
            let rotations: Vec<u16> = [90u16, 180, 270].iter().enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0).map(|(_, r)| *r).collect();
            let scales: Vec<f64> = [0.5, 0.7, 1.0].iter().enumerate()
                .filter(|(i, _)| smask & (1 << i) != 0).map(|(_, s)| *s).collect();
            let spec = AugmentSpec { rotations, flip, scales };
            let n = augment(&sample(), &spec).unwrap().len();
            prop_assert_eq!(n, spec.scales.len() * (1 + spec.rotations.len()) * if flip { 2 } else { 1 });
            prop_assert_eq!(n, spec.variant_count());
        }
    }
}
