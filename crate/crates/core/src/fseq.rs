//! FSEQ: the on-disk frame-feature format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! bytes 0..4    magic "FSEQ"
//! bytes 4..8    version (u32, currently 1)
//! bytes 8..12   L, frame count (u32)
//! bytes 12..16  D, feature dimension (u32)
//! bytes 16..    L * D f32 values, row-major (frame-major)
//! ```

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::FeatureSequence;

pub const FSEQ_MAGIC: [u8; 4] = *b"FSEQ";
pub const FSEQ_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;

pub fn write_fseq(seq: &FeatureSequence, path: &Path) -> Result<()> {
    let (frames, dim) = (seq.len(), seq.dim());
    if frames == 0 || dim == 0 {
        return Err(Error::Config(format!(
            "refusing to write degenerate sequence ({frames}x{dim})"
        )));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * frames * dim);
    buf.extend_from_slice(&FSEQ_MAGIC);
    buf.extend_from_slice(&FSEQ_VERSION.to_le_bytes());
    buf.extend_from_slice(&(frames as u32).to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for row in seq.view().rows() {
        for &x in row {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_fseq(path: &Path) -> Result<FeatureSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_fseq(&bytes, path)
}

fn parse_fseq(bytes: &[u8], origin: &Path) -> Result<FeatureSequence> {
    let bad = |reason: String| Error::bad_format(origin, reason);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "not an FSEQ file: {} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[0..4] != FSEQ_MAGIC {
        return Err(bad("not an FSEQ file: bad magic".to_string()));
    }
    let le_u32 = |offset: usize| u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
    let version = le_u32(4);
    if version != FSEQ_VERSION {
        return Err(bad(format!(
            "unsupported FSEQ version {version} (expected {FSEQ_VERSION})"
        )));
    }
    let frames = le_u32(8) as usize;
    let dim = le_u32(12) as usize;
    if frames == 0 || dim == 0 {
        return Err(bad(format!("degenerate shape {frames}x{dim}")));
    }
    let expected = 4usize
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(dim))
        .ok_or_else(|| bad(format!("shape {frames}x{dim} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(bad(format!(
            "payload length mismatch: expected {expected} bytes for {frames}x{dim}, got {}",
            payload.len()
        )));
    }
    let mut values = Vec::with_capacity(frames * dim);
    for chunk in payload.chunks_exact(4) {
        let x = f32::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return Err(bad(format!("non-finite value at element {}", values.len())));
        }
        values.push(x);
    }
    let data = Array2::from_shape_vec((frames, dim), values).expect("length checked above");
    Ok(FeatureSequence::new(data))
}
