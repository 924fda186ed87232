//! Whitened PCA latent codec: the fixed image ⇄ latent map that supplies
//! the flow's data endpoint.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};

use super::DataError;
use crate::binio::{self, FileKind, FormatError};
use crate::tensor::gemm;

/// Anything that can hand out contiguous blocks of flattened images.
pub trait ImageSource {
    fn len(&self) -> usize;
    fn pixels(&self) -> usize;
    /// Row-major `count × pixels` block starting at image `start`.
    fn block(&self, start: usize, count: usize) -> Vec<f64>;
}

impl ImageSource for super::ToyDataset {
    fn len(&self) -> usize {
        super::NUM_SCENES
    }
    fn pixels(&self) -> usize {
        super::PIXELS
    }
    fn block(&self, start: usize, count: usize) -> Vec<f64> {
        self.image_block(start, count)
    }
}

/// In-memory images, mostly for tests.
pub struct ImageMatrix {
    pub pixels: usize,
    pub data: Vec<f64>,
}

impl ImageSource for ImageMatrix {
    fn len(&self) -> usize {
        self.data.len() / self.pixels
    }
    fn pixels(&self) -> usize {
        self.pixels
    }
    fn block(&self, start: usize, count: usize) -> Vec<f64> {
        self.data[start * self.pixels..(start + count) * self.pixels].to_vec()
    }
}

/// Latent grid shape: `tokens × channels` whitened coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentLayout {
    pub tokens: usize,
    pub channels: usize,
}

impl LatentLayout {
    pub fn dims(&self) -> usize {
        self.tokens * self.channels
    }
}

impl Default for LatentLayout {
    fn default() -> Self {
        Self {
            tokens: 16,
            channels: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentCodec {
    pub layout: LatentLayout,
    pub pixels: usize,
    /// Number of images the codec was fitted on.
    pub samples: u64,
    pub mean: Vec<f64>,
    /// `pixels × dims`, row-major, orthonormal columns.
    pub basis: Vec<f64>,
    /// Singular values of the centred data matrix, descending.
    pub singular_values: Vec<f64>,
}

const BLOCK: usize = 1024;

impl LatentCodec {
    /// Fits the top principal directions of `source`.
    ///
    /// Each basis vector is signed so that its largest-magnitude coordinate
    /// is positive, and encoded coordinates are whitened to unit sample
    /// variance.
    pub fn fit(source: &dyn ImageSource, layout: LatentLayout) -> Result<Self, DataError> {
        let (n, p, d) = (source.len(), source.pixels(), layout.dims());
        if d == 0 || d > p || d >= n {
            return Err(DataError::LatentTooLarge { dims: d, pixels: p });
        }

        let mut mean = vec![0.0; p];
        for start in (0..n).step_by(BLOCK) {
            let count = BLOCK.min(n - start);
            for row in source.block(start, count).chunks_exact(p) {
                mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut scatter = vec![0.0; p * p];
        for start in (0..n).step_by(BLOCK) {
            let count = BLOCK.min(n - start);
            let mut block = source.block(start, count);
            for row in block.chunks_exact_mut(p) {
                row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
            }
            gemm(p, count, p, &block, true, &block, false, 1.0, &mut scatter);
        }
        for i in 0..p {
            for j in 0..i {
                let s = 0.5 * (scatter[i * p + j] + scatter[j * p + i]);
                scatter[i * p + j] = s;
                scatter[j * p + i] = s;
            }
        }

        let eig = SymmetricEigen::new(DMatrix::from_row_slice(p, p, &scatter));
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
                .then(a.cmp(&b))
        });

        let mut basis = vec![0.0; p * d];
        let mut singular_values = Vec::with_capacity(d);
        for (j, &col) in order.iter().take(d).enumerate() {
            let lambda = eig.eigenvalues[col].max(0.0);
            if lambda <= 0.0 {
                return Err(DataError::DegenerateComponent(j));
            }
            singular_values.push(lambda.sqrt());
            let v = eig.eigenvectors.column(col);
            let pivot = (0..p).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..p {
                basis[i * d + j] = sign * v[i];
            }
        }

        Ok(Self {
            layout,
            pixels: p,
            samples: n as u64,
            mean,
            basis,
            singular_values,
        })
    }

    pub fn dims(&self) -> usize {
        self.layout.dims()
    }

    /// Per-coordinate standard deviation of the raw projections.
    fn whitening_scale(&self, j: usize) -> f64 {
        self.singular_values[j] / ((self.samples - 1) as f64).sqrt()
    }

    /// Whitened latent of one image, flattened row-major as tokens × channels.
    pub fn encode(&self, image: &[f64]) -> Result<Vec<f64>, DataError> {
        Ok(self.encode_batch(image)?)
    }

    /// Encodes a row-major block of images into a block of latents.
    pub fn encode_batch(&self, images: &[f64]) -> Result<Vec<f64>, DataError> {
        let (p, d) = (self.pixels, self.dims());
        if images.is_empty() || images.len() % p != 0 {
            return Err(DataError::ImageSize {
                expected: p,
                got: images.len(),
            });
        }
        let n = images.len() / p;
        let mut centered = images.to_vec();
        for row in centered.chunks_exact_mut(p) {
            row.iter_mut().zip(&self.mean).for_each(|(x, m)| *x -= m);
        }
        let mut z = vec![0.0; n * d];
        gemm(n, p, d, &centered, false, &self.basis, false, 0.0, &mut z);
        for row in z.chunks_exact_mut(d) {
            for (j, v) in row.iter_mut().enumerate() {
                *v /= self.whitening_scale(j);
            }
        }
        Ok(z)
    }

    /// Inverse whitening and basis expansion, without clamping.
    pub fn reconstruct_raw(&self, z: &[f64]) -> Result<Vec<f64>, DataError> {
        let d = self.dims();
        if z.len() != d {
            return Err(DataError::LatentSize {
                expected: d,
                got: z.len(),
            });
        }
        let coeffs: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.whitening_scale(j))
            .collect();
        let mut image = self.mean.clone();
        gemm(self.pixels, d, 1, &self.basis, false, &coeffs, false, 1.0, &mut image);
        Ok(image)
    }

    /// Image for a latent, clamped to `[0, 1]`.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>, DataError> {
        let mut image = self.reconstruct_raw(z)?;
        image.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        Ok(image)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        binio::write_header(w, FileKind::Codec)?;
        binio::write_u32(w, self.pixels as u32)?;
        binio::write_u32(w, self.layout.tokens as u32)?;
        binio::write_u32(w, self.layout.channels as u32)?;
        binio::write_u64(w, self.samples)?;
        binio::write_f64s(w, &self.mean)?;
        binio::write_f64s(w, &self.basis)?;
        binio::write_f64s(w, &self.singular_values)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        binio::read_header(r, FileKind::Codec)?;
        let pixels = binio::read_u32(r)? as usize;
        let tokens = binio::read_u32(r)? as usize;
        let channels = binio::read_u32(r)? as usize;
        let samples = binio::read_u64(r)?;
        let d = tokens * channels;
        if pixels == 0 || pixels > 1 << 24 || d == 0 || d > pixels || samples < 2 {
            return Err(FormatError::Malformed("codec dimensions".into()));
        }
        let mean = binio::read_f64s(r, pixels)?;
        let basis = binio::read_f64s(r, pixels * d)?;
        let singular_values = binio::read_f64s(r, d)?;
        binio::expect_eof(r)?;
        Ok(Self {
            layout: LatentLayout { tokens, channels },
            pixels,
            samples,
            mean,
            basis,
            singular_values,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }
}
