//! Packed patch archive plus its JSON manifest.
//!
//! `patches.bin` stores every patch as `size²` little-endian f64 values of
//! the pre-upsampled input followed by `size²` values of the target, in
//! manifest order. `manifest.json` records the geometry, augmentation, patch
//! ids with byte offsets and the SHA-256 of the archive.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    augment, extract_patches, load_image_y, make_pair, AugmentSpec, ImageY, TrainingPair,
};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ARCHIVE_FILE: &str = "patches.bin";

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pnm"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareOptions {
    pub scale: u32,
    pub augment: AugmentSpec,
    pub patch_size: usize,
    pub stride: usize,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            scale: 2,
            augment: AugmentSpec::none(),
            patch_size: 41,
            stride: 41,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub id: String,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub scale: u32,
    pub patch_size: usize,
    pub stride: usize,
    pub augment: AugmentSpec,
    pub seed: u64,
    pub sources: Vec<String>,
    pub patch_count: usize,
    /// Bytes per patch record (input and target).
    pub record_bytes: u64,
    pub archive: String,
    pub archive_sha256: String,
    pub patches: Vec<PatchEntry>,
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && has_image_extension(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Decodes every image in `dir` as `(file name, luminance)`.
pub fn load_images(dir: impl AsRef<Path>) -> Result<Vec<(String, ImageY)>> {
    let dir = dir.as_ref();
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no usable images in {}",
            dir.display()
        )));
    }
    files
        .par_iter()
        .map(|p| Ok((file_name(p), load_image_y(p)?)))
        .collect()
}

fn patches_for_image(name: &str, hr: &ImageY, opts: &PrepareOptions) -> Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for variant in augment(hr, &opts.augment)? {
        let (h, w) = variant.image.dims();
        let s = opts.scale as usize;
        if h < s || w < s || h - h % s < opts.patch_size || w - w % s < opts.patch_size {
            continue;
        }
        let pair = make_pair(
            format!("{name}|{}", variant.tag),
            &variant.image,
            opts.scale,
        )?;
        out.extend(extract_patches(&pair, opts.patch_size, opts.stride)?);
    }
    Ok(out)
}

fn validate_options(opts: &PrepareOptions) -> Result<()> {
    if opts.scale == 0 {
        return Err(Error::InvalidConfig("scale must be positive".into()));
    }
    if opts.patch_size == 0 || opts.stride == 0 {
        return Err(Error::InvalidConfig(
            "patch size and stride must be positive".into(),
        ));
    }
    opts.augment.validate()
}

/// Writes `manifest.json` and `patches.bin` into `out_dir`.
///
/// Images are processed in file-name order and the output bytes depend only
/// on the image contents and `opts`.
pub fn build_manifest(
    image_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    opts: &PrepareOptions,
) -> Result<DatasetManifest> {
    validate_options(opts)?;
    let image_dir = image_dir.as_ref();
    let out_dir = out_dir.as_ref();
    let files = list_images(image_dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no usable images in {}",
            image_dir.display()
        )));
    }

    let per_image: Vec<Vec<TrainingPair>> = files
        .par_iter()
        .map(|path| {
            let img = load_image_y(path)?;
            patches_for_image(&file_name(path), &img, opts)
        })
        .collect::<Result<_>>()?;

    let record_bytes = (2 * opts.patch_size * opts.patch_size * 8) as u64;
    let mut archive = Vec::new();
    let mut patches = Vec::new();
    for pair in per_image.iter().flatten() {
        patches.push(PatchEntry {
            id: pair.id.clone(),
            offset: archive.len() as u64,
        });
        for v in pair.x.values().iter().chain(pair.y.values()) {
            archive.extend_from_slice(&v.to_le_bytes());
        }
    }
    if patches.is_empty() {
        return Err(Error::Data(format!(
            "no {}x{} patches could be cut from the images in {}",
            opts.patch_size,
            opts.patch_size,
            image_dir.display()
        )));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let archive_path = out_dir.join(ARCHIVE_FILE);
    fs::write(&archive_path, &archive).map_err(|e| Error::io(&archive_path, e))?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        scale: opts.scale,
        patch_size: opts.patch_size,
        stride: opts.stride,
        augment: opts.augment.clone(),
        seed: opts.seed,
        sources: files.iter().map(|p| file_name(p)).collect(),
        patch_count: patches.len(),
        record_bytes,
        archive: ARCHIVE_FILE.to_string(),
        archive_sha256: hex::encode(Sha256::digest(&archive)),
        patches,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads a prepared dataset back, verifying the archive checksum and offsets.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<TrainingPair>)> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::CorruptArchive(format!("{}: {e}", manifest_path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::CorruptArchive(format!(
            "manifest version {}",
            manifest.version
        )));
    }
    let archive_path = dir.join(&manifest.archive);
    let archive = fs::read(&archive_path).map_err(|e| Error::io(&archive_path, e))?;
    if hex::encode(Sha256::digest(&archive)) != manifest.archive_sha256 {
        return Err(Error::CorruptArchive(format!(
            "{}: checksum mismatch",
            archive_path.display()
        )));
    }
    let size = manifest.patch_size;
    if manifest.record_bytes != (2 * size * size * 8) as u64
        || manifest.patch_count != manifest.patches.len()
    {
        return Err(Error::CorruptArchive(
            "inconsistent manifest geometry".into(),
        ));
    }

    let decode = |raw: &[u8]| -> Vec<f64> {
        raw.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    let mut pairs = Vec::with_capacity(manifest.patches.len());
    for entry in &manifest.patches {
        let start = entry.offset as usize;
        let end = start + manifest.record_bytes as usize;
        if end > archive.len() {
            return Err(Error::CorruptArchive(format!(
                "patch {} points past the archive",
                entry.id
            )));
        }
        let half = start + size * size * 8;
        let x = ImageY::new(size, size, decode(&archive[start..half]))
            .map_err(|e| Error::CorruptArchive(format!("{}: {e}", entry.id)))?;
        let y = ImageY::new(size, size, decode(&archive[half..end]))
            .map_err(|e| Error::CorruptArchive(format!("{}: {e}", entry.id)))?;
        pairs.push(TrainingPair {
            id: entry.id.clone(),
            x,
            y,
            scale: manifest.scale,
        });
    }
    Ok((manifest, pairs))
}
