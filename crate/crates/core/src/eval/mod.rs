//! Full-image evaluation on the luminance channel.
//!
//! Each evaluation image is degraded exactly like the training data
//! (bicubic down, bicubic back up), passed through the network, clamped to
//! `[0, 1]`, and scored with PSNR and SSIM after shaving `scale` pixels off
//! every border.

mod metrics;
mod report;

pub use metrics::{
    gaussian_window, psnr, shaved_mse, ssim, PSNR_CAP, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{compare_reports, Comparison, ComparisonRow, EvalReport, SHAVE_CONVENTION};

use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_images, make_pair, ImageY, TrainingPair};
use crate::error::{Error, Result};
use crate::importance::ImportanceMap;
use crate::model::Network;

/// Degraded/clean pairs of whole images at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSet {
    pub name: String,
    pub scale: u32,
    pub pairs: Vec<TrainingPair>,
}

impl ValidationSet {
    pub fn from_images(
        name: impl Into<String>,
        images: Vec<(String, ImageY)>,
        scale: u32,
    ) -> Result<Self> {
        let pairs = images
            .into_par_iter()
            .map(|(id, img)| make_pair(id, &img, scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(ValidationSet {
            name: name.into(),
            scale,
            pairs,
        })
    }

    /// Every image in `dir`, named after the directory.
    pub fn load(dir: impl AsRef<Path>, scale: u32) -> Result<Self> {
        let dir = dir.as_ref();
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        ValidationSet::from_images(name, load_images(dir)?, scale)
    }

    pub fn shave(&self) -> usize {
        self.scale as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset: String,
    pub scale: u32,
    pub shave: usize,
    /// One entry per image, in set order.
    pub images: Vec<ImageScore>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

fn score(
    set: &ValidationSet,
    predict: impl Fn(&TrainingPair) -> Result<ImageY> + Sync,
) -> Result<EvalResult> {
    if set.pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shave = set.shave();
    let images = set
        .pairs
        .par_iter()
        .map(|pair| {
            let out = predict(pair)?;
            Ok(ImageScore {
                id: pair.id.clone(),
                psnr: psnr(&pair.y, &out, shave)?,
                ssim: ssim(&pair.y, &out, shave)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = images.len() as f64;
    Ok(EvalResult {
        dataset: set.name.clone(),
        scale: set.scale,
        shave,
        mean_psnr: images.iter().map(|s| s.psnr).sum::<f64>() / n,
        mean_ssim: images.iter().map(|s| s.ssim).sum::<f64>() / n,
        images,
    })
}

/// Scores `net` on every image of `set`. The network is only read.
pub fn evaluate(net: &Network, set: &ValidationSet) -> Result<EvalResult> {
    score(set, |pair| {
        ImageY::from_tensor_clamped(&net.forward(&pair.x.to_tensor())?)
    })
}

/// Scores the bicubic input itself, i.e. the no-network baseline.
pub fn evaluate_bicubic(set: &ValidationSet) -> Result<EvalResult> {
    score(set, |pair| Ok(pair.x.clone()))
}

/// 8-bit grayscale rendering of a map: weight `w` becomes `⌊255·w + 0.5⌋`.
pub fn importance_to_gray(map: &ImportanceMap) -> Result<GrayImage> {
    map.validate()?;
    let pixels = map
        .weights
        .iter()
        .map(|w| (w * 255.0 + 0.5).floor() as u8)
        .collect();
    GrayImage::from_raw(map.width as u32, map.height as u32, pixels).ok_or_else(|| {
        Error::shape(
            "importance_to_gray",
            (map.height, map.width),
            map.weights.len(),
        )
    })
}

/// Writes [`importance_to_gray`] as a PNG.
pub fn export_importance_png(map: &ImportanceMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    importance_to_gray(map)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
