//! Training and evaluation data: luminance images, bicubic degradation,
//! augmentation, patch extraction and the packed patch archive.

mod augment;
mod manifest;
mod patches;
mod resize;
pub mod synthetic;

pub use augment::{augment, flip_horizontal, rotate90, AugmentSpec, AugmentedImage};
pub use manifest::{
    build_manifest, list_images, load_dataset, load_images, DatasetManifest, PatchEntry,
    PrepareOptions, ARCHIVE_FILE, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use patches::{extract_patches, make_pair, parse_patch_id, patch_grid_count, PatchId};
pub use resize::{bicubic_resize, bicubic_resize_to, cubic_kernel, CUBIC_A};

use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// A single luminance plane with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageY {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageY {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Data(format!(
                "image dimensions {height}x{width} must be positive"
            )));
        }
        if values.len() != height * width {
            return Err(Error::shape("ImageY::new", (height, width), values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("luminance {v} outside [0, 1]")));
        }
        Ok(ImageY {
            height,
            width,
            values,
        })
    }

    /// Clamps every value into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        ImageY::new(height, width, values)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        ImageY::from_clamped(height, width, values)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        ImageY::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageY> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Data(format!(
                "crop {height}x{width} at ({top}, {left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(height * width);
        for y in top..top + height {
            values.extend_from_slice(
                &self.values[y * self.width + left..y * self.width + left + width],
            );
        }
        Ok(ImageY {
            height,
            width,
            values,
        })
    }

    /// `1 × 1 × h × w` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec([1, 1, self.height, self.width], self.values.clone())
            .expect("matching length")
    }

    /// Reads plane `(0, 0)` of `t`, clamping into `[0, 1]`.
    pub fn from_tensor_clamped(t: &Tensor) -> Result<ImageY> {
        ImageY::from_clamped(t.h(), t.w(), t.plane(0, 0).to_vec())
    }
}

/// Stable-id LR/HR pair in the pre-upsampled convention: `x` has already
/// been brought back to the size of `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub id: String,
    pub x: ImageY,
    pub y: ImageY,
    pub scale: u32,
}

/// BT.601 studio-range luma from 8-bit samples, normalized to `[0, 1]`:
/// `Y = (16 + 65.481 R + 128.553 G + 24.966 B) / 255` with `R, G, B ∈ [0, 1]`.
///
/// One channel is taken as luminance already. With four channels the alpha
/// channel is ignored.
pub fn rgb_to_y(width: usize, height: usize, channels: usize, data: &[u8]) -> Result<ImageY> {
    if data.len() != width * height * channels {
        return Err(Error::shape(
            "rgb_to_y",
            (height, width, channels),
            data.len(),
        ));
    }
    let values = match channels {
        1 => data.iter().map(|&v| v as f64 / 255.0).collect(),
        3 | 4 => data
            .chunks_exact(channels)
            .map(|px| {
                let [r, g, b] = [px[0], px[1], px[2]].map(|c| c as f64 / 255.0);
                (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0
            })
            .collect(),
        other => return Err(Error::Data(format!("unsupported channel count {other}"))),
    };
    ImageY::new(height, width, values)
}

/// Decodes a PNG or binary PNM file into its luminance plane.
pub fn load_image_y(path: impl AsRef<Path>) -> Result<ImageY> {
    use image::DynamicImage;
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => rgb_to_y(w, h, 1, buf.as_raw()),
        DynamicImage::ImageRgb8(buf) => rgb_to_y(w, h, 3, buf.as_raw()),
        DynamicImage::ImageRgba8(buf) => rgb_to_y(w, h, 4, buf.as_raw()),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => rgb_to_y(w, h, 1, img.to_luma8().as_raw()),
        other => rgb_to_y(w, h, 3, other.to_rgb8().as_raw()),
    }
    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Writes `img` as an 8-bit grayscale PNG (`round(255 v)`).
pub fn save_image_y(img: &ImageY, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .values
        .iter()
        .map(|&v| (v * 255.0 + 0.5).floor() as u8)
        .collect();
    image::GrayImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer matches dimensions")
        .save(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
