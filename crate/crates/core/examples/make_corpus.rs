//! Regenerates the procedural image corpus shipped under `assets/corpus`.
//!
//! ```text
//! cargo run --release -p ail-sr --example make_corpus -- assets/corpus
//! ```
//!
//! Writes 20 training images and 8 held-out images, 64 × 64 each. Every
//! fifth training image is stored as binary PPM to exercise that decoder.

use std::path::PathBuf;

use ail_sr::data::synthetic;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

const SEED: u64 = 2024;
const SIZE: u32 = 64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "assets/corpus".into()),
    );
    for (split, range) in [("train", 0..20), ("val", 100..108)] {
        let dir = root.join(split);
        std::fs::create_dir_all(&dir)?;
        for index in range {
            let img = synthetic::generate(index, SIZE, SIZE, SEED);
            if split == "train" && index % 5 == 4 {
                let path = dir.join(format!("{split}_{index:03}.ppm"));
                let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                PnmEncoder::new(file)
                    .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
                    .write_image(img.as_raw(), SIZE, SIZE, ExtendedColorType::Rgb8)?;
                println!("{}", path.display());
                continue;
            }
            let path = dir.join(format!("{split}_{index:03}.png"));
            img.save(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
