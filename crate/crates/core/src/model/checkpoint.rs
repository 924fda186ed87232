//! Checkpoint file: common header, a hyperparameter block (`u32` count then
//! one `u32` per field), a `u32` parameter count, then per parameter its
//! `u32` name length, UTF-8 name, `u32` rank, `u32` dims and f64 data.

use std::io::{Read, Write};

use super::{slots, ModelConfig, ModelError, ModelParams, Result};
use crate::binio::{self, FileKind, FormatError};
use crate::tensor::Tensor;

impl ModelParams {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        binio::write_header(w, FileKind::Checkpoint)?;
        let words = self.config.as_words();
        binio::write_u32(w, words.len() as u32)?;
        for v in words {
            binio::write_u32(w, v as u32)?;
        }
        binio::write_u32(w, self.names.len() as u32)?;
        for (name, t) in self.names.iter().zip(&self.values) {
            binio::write_u32(w, name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            binio::write_u32(w, t.ndim() as u32)?;
            for &d in t.shape() {
                binio::write_u32(w, d as u32)?;
            }
            binio::write_f64s(w, t.data())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        binio::read_header(r, FileKind::Checkpoint)?;
        let n = binio::read_u32(r).map_err(FormatError::from)? as usize;
        if n != 9 {
            return Err(FormatError::Malformed(format!("{n} hyperparameters")).into());
        }
        let mut words = [0usize; 9];
        for w in &mut words {
            *w = binio::read_u32(r).map_err(FormatError::from)? as usize;
        }
        let config = ModelConfig::from_words(words);
        config.validate()?;

        let expected = slots(&config);
        let count = binio::read_u32(r).map_err(FormatError::from)? as usize;
        if count != expected.len() {
            return Err(FormatError::Malformed(format!(
                "{count} parameters, expected {}",
                expected.len()
            ))
            .into());
        }
        let mut names = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for slot in expected {
            let len = binio::read_u32(r).map_err(FormatError::from)? as usize;
            if len > 256 {
                return Err(FormatError::Malformed(format!("name of {len} bytes")).into());
            }
            let mut raw = vec![0u8; len];
            r.read_exact(&mut raw).map_err(FormatError::from)?;
            let name = String::from_utf8(raw)
                .map_err(|_| FormatError::Malformed("parameter name is not UTF-8".into()))?;
            let rank = binio::read_u32(r).map_err(FormatError::from)? as usize;
            if rank > 8 {
                return Err(FormatError::Malformed(format!("rank {rank}")).into());
            }
            let shape = (0..rank)
                .map(|_| binio::read_u32(r).map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(FormatError::from)?;
            if name != slot.name || shape != slot.shape {
                return Err(ModelError::ParamMismatch {
                    expected: format!("{} {:?}", slot.name, slot.shape),
                    found: format!("{name} {shape:?}"),
                });
            }
            let data = binio::read_f64s(r, shape.iter().product()).map_err(FormatError::from)?;
            names.push(name);
            values.push(Tensor::new(shape, data)?);
        }
        binio::expect_eof(r)?;
        Ok(Self::assemble(config, names, values))
    }
}
