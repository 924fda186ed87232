//! Little-endian binary framing shared by the dataset cache, codec and
//! checkpoint files.
//!
//! Every file opens with the magic `FDIS`, a `u32` format version and a
//! `u32` kind tag, followed by the factor-cardinality list (`u32` count,
//! then one `u32` per factor).

use std::io::{self, Read, Write};

use crate::data::CARDINALITIES;

pub const MAGIC: &[u8; 4] = b"FDIS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum FileKind {
    Dataset = 1,
    Codec = 2,
    Checkpoint = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"FDIS\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("expected a {expected:?} file, found kind tag {found}")]
    WrongKind { expected: FileKind, found: u32 },
    #[error("factor cardinalities {0:?} do not match this build")]
    Cardinalities(Vec<u32>),
    #[error("malformed file: {0}")]
    Malformed(String),
}

pub fn write_header<W: Write>(w: &mut W, kind: FileKind) -> io::Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, kind as u32)?;
    write_u32(w, CARDINALITIES.len() as u32)?;
    for &c in &CARDINALITIES {
        write_u32(w, c as u32)?;
    }
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R, expected: FileKind) -> Result<(), FormatError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    let kind = read_u32(r)?;
    if kind != expected as u32 {
        return Err(FormatError::WrongKind {
            expected,
            found: kind,
        });
    }
    let n = read_u32(r)? as usize;
    if n > 64 {
        return Err(FormatError::Malformed(format!("{n} factors")));
    }
    let cards = (0..n).map(|_| read_u32(r)).collect::<io::Result<Vec<_>>>()?;
    if cards.iter().map(|&c| c as usize).ne(CARDINALITIES.iter().copied()) {
        return Err(FormatError::Cardinalities(cards));
    }
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn write_f32s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for &x in xs {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_f32s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect())
}

/// Fails unless the reader is exhausted.
pub fn expect_eof<R: Read>(r: &mut R) -> Result<(), FormatError> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FormatError::Malformed("trailing bytes".into())),
    }
}

/// Offset of the first differing byte, or `None` when identical.
pub fn first_difference(a: &[u8], b: &[u8]) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .or_else(|| (a.len() != b.len()).then(|| a.len().min(b.len())))
}
