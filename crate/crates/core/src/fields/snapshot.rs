//! Binary snapshot format: magic `CONEW001`, an eight-word little-endian header
//! `(n, frame, points, half_extent, ρ, ν, time, components)`, then `f64` samples
//! row-major and component-major.

use std::fs;
use std::path::Path;

use super::{FieldMeta, Frame, GridSpec, VectorField};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub const MAGIC: &[u8; 8] = b"CONEW001";
const HEADER_WORDS: usize = 8;

pub fn encode<T: Real>(field: &VectorField<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 * (1 + HEADER_WORDS + field.ncomp() * field.spec.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(field.spec.n as u64).to_le_bytes());
    buf.extend_from_slice(&field.meta.frame.tag().to_le_bytes());
    buf.extend_from_slice(&(field.spec.points as u64).to_le_bytes());
    for v in [field.spec.half_extent, field.meta.rho, field.meta.nu, field.meta.time] {
        buf.extend_from_slice(&to_f64(v).to_le_bytes());
    }
    buf.extend_from_slice(&(field.ncomp() as u64).to_le_bytes());
    for c in &field.comps {
        for &v in c {
            buf.extend_from_slice(&to_f64(v).to_le_bytes());
        }
    }
    buf
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<VectorField<T>> {
    if bytes.len() < 8 * (1 + HEADER_WORDS) || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing CONEW001 header".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * (k + 1)..8 * (k + 2)].try_into().expect("8-byte word") };
    let u = |k: usize| u64::from_le_bytes(word(k));
    let f = |k: usize| f64::from_le_bytes(word(k));
    let (n, frame, points) = (u(0) as usize, Frame::from_tag(u(1))?, u(2) as usize);
    let (half, rho, nu, time, ncomp) = (f(3), f(4), f(5), f(6), u(7) as usize);
    let spec = GridSpec::new(n, points, lit::<T>(half)).map_err(|e| Error::Format(e.to_string()))?;
    let len = spec.len();
    let expected = 8 * (1 + HEADER_WORDS + ncomp * len);
    if bytes.len() != expected {
        return Err(Error::Format(format!("snapshot has {} bytes, header implies {expected}", bytes.len())));
    }
    let base = 8 * (1 + HEADER_WORDS);
    let comps = (0..ncomp)
        .map(|c| {
            (0..len)
                .map(|k| {
                    let off = base + 8 * (c * len + k);
                    lit::<T>(f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8-byte word")))
                })
                .collect()
        })
        .collect();
    let meta = FieldMeta::new(frame, lit(time), lit(rho), lit(nu));
    VectorField::new(spec, meta, comps).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_snapshot<T: Real>(path: &Path, field: &VectorField<T>) -> Result<()> {
    fs::write(path, encode(field)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot<T: Real>(path: &Path) -> Result<VectorField<T>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
