//! Binary PPM (P6) output for image grids.

use std::io::{self, Write};

use crate::data::{CHANNELS, IMAGE_SIZE};

/// Rows of equally sized RGB images laid out with a `pad`-pixel white gutter.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB in `[0, 1]`.
    pub pixels: Vec<f64>,
}

impl ImageGrid {
    /// Each inner slice is one grid row of `IMAGE_SIZE × IMAGE_SIZE` images.
    pub fn from_rows(rows: &[Vec<Vec<f64>>], pad: usize) -> Self {
        let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
        let cell = IMAGE_SIZE + pad;
        let width = pad + cols * cell;
        let height = pad + rows.len() * cell;
        let mut pixels = vec![1.0; width * height * CHANNELS];
        for (r, row) in rows.iter().enumerate() {
            for (c, img) in row.iter().enumerate() {
                assert_eq!(img.len(), IMAGE_SIZE * IMAGE_SIZE * CHANNELS);
                let (x0, y0) = (pad + c * cell, pad + r * cell);
                for y in 0..IMAGE_SIZE {
                    let src = &img[y * IMAGE_SIZE * CHANNELS..(y + 1) * IMAGE_SIZE * CHANNELS];
                    let dst = ((y0 + y) * width + x0) * CHANNELS;
                    pixels[dst..dst + src.len()].copy_from_slice(src);
                }
            }
        }
        Self { width, height, pixels }
    }

    /// Images filled left to right, `columns` per row.
    pub fn tiled(images: &[Vec<f64>], columns: usize, pad: usize) -> Self {
        let rows: Vec<Vec<Vec<f64>>> = images.chunks(columns.max(1)).map(|c| c.to_vec()).collect();
        Self::from_rows(&rows, pad)
    }

    pub fn write_ppm<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_ppm(&mut out).expect("writing to memory");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{render, Factors, PIXELS};

    #[test]
    fn header_and_size() {
        let img = render(&Factors([0, 0, 0, 0, 0, 0]));
        let grid = ImageGrid::tiled(&[img.clone(), img.clone(), img], 2, 1);
        assert_eq!((grid.width, grid.height), (1 + 2 * 33, 1 + 2 * 33));
        let bytes = grid.to_ppm();
        let header = format!("P6\n{} {}\n255\n", grid.width, grid.height);
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + grid.width * grid.height * 3);
    }

    #[test]
    fn single_image_without_padding_is_verbatim() {
        let img = vec![0.5; PIXELS];
        let grid = ImageGrid::from_rows(&[vec![img]], 0);
        assert_eq!(grid.to_ppm()[13..].iter().filter(|&&b| b == 128).count(), PIXELS);
    }
}
