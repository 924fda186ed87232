//! Toy dataset with ground-truth factors, its on-disk cache, and the PCA
//! latent codec.

mod codec;
mod scene;

use std::io::{Read, Write};

pub use codec::{ImageMatrix, ImageSource, LatentCodec, LatentLayout};
pub use scene::*;

use crate::binio::{self, FileKind, FormatError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("factor {factor} = {value} out of range (cardinality {cardinality})")]
    FactorOutOfRange {
        factor: &'static str,
        value: usize,
        cardinality: usize,
    },
    #[error("scene index {0} out of range")]
    SceneOutOfRange(usize),
    #[error("latent dimensionality {dims} exceeds what {pixels}-pixel images support")]
    LatentTooLarge { dims: usize, pixels: usize },
    #[error("principal component {0} has zero variance")]
    DegenerateComponent(usize),
    #[error("expected images of {expected} values, got {got}")]
    ImageSize { expected: usize, got: usize },
    #[error("expected a latent of {expected} values, got {got}")]
    LatentSize { expected: usize, got: usize },
    #[error("no latent codec has been fitted")]
    CodecMissing,
}

/// Serialises every scene in lexicographic order as little-endian f32.
pub fn write_dataset_cache<W: Write>(w: &mut W) -> std::io::Result<()> {
    binio::write_header(w, FileKind::Dataset)?;
    let ds = ToyDataset;
    for start in (0..NUM_SCENES).step_by(1024) {
        let count = 1024.min(NUM_SCENES - start);
        binio::write_f32s(w, &ds.image_block(start, count))?;
    }
    Ok(())
}

pub fn dataset_cache_bytes() -> Vec<u8> {
    let mut buf = Vec::with_capacity(NUM_SCENES * PIXELS * 4 + 64);
    write_dataset_cache(&mut buf).expect("writing to memory");
    buf
}

/// Reads a dataset cache back into `NUM_SCENES × PIXELS` values.
pub fn read_dataset_cache<R: Read>(r: &mut R) -> Result<Vec<f64>, FormatError> {
    binio::read_header(r, FileKind::Dataset)?;
    let images = binio::read_f32s(r, NUM_SCENES * PIXELS)?;
    binio::expect_eof(r)?;
    Ok(images)
}
