//! Versioned binary checkpoints: architecture dims, parameter tensors,
//! Adam state, epoch counter, and the running-AP table. Tensors are stored
//! as little-endian f64 so a resumed run is bit-identical to an unbroken
//! one (the whole compute path is f64).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::metrics::RapTable;
use crate::model::{AdamHyper, AdamState, Arch, Model};

use super::TrainState;

const MAGIC: [u8; 4] = *b"FSCK";
const VERSION: u32 = 1;

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_blocks(buf: &mut Vec<u8>, blocks: &[&Array2<f64>]) {
    push_u32(buf, blocks.len() as u32);
    for block in blocks {
        let (rows, cols) = block.dim();
        push_u32(buf, rows as u32);
        push_u32(buf, cols as u32);
        for &x in block.iter() {
            push_f64(buf, x);
        }
    }
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    push_u32(&mut buf, VERSION);
    let (tag, hidden, clusters) = match state.model.arch() {
        Arch::Nonlinear { hidden } => (0u8, hidden, 0),
        Arch::Netvlad { clusters, hidden } => (1u8, hidden, clusters),
    };
    buf.push(tag);
    push_u32(&mut buf, state.model.feature_dim() as u32);
    push_u32(&mut buf, state.model.classes() as u32);
    push_u32(&mut buf, hidden as u32);
    push_u32(&mut buf, clusters as u32);
    push_u64(&mut buf, state.epoch as u64);
    push_f64(&mut buf, state.adam.hyper.beta1);
    push_f64(&mut buf, state.adam.hyper.beta2);
    push_f64(&mut buf, state.adam.hyper.eps);
    push_u64(&mut buf, state.adam.step);
    push_u64(&mut buf, state.rap.epoch() as u64);
    push_u32(&mut buf, state.rap.classes() as u32);
    for &v in state.rap.values() {
        push_f64(&mut buf, v);
    }
    push_blocks(&mut buf, &state.model.blocks());
    push_blocks(&mut buf, &state.adam.m.iter().collect::<Vec<_>>());
    push_blocks(&mut buf, &state.adam.v.iter().collect::<Vec<_>>());
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::bad_format(
                self.path,
                "unexpected end of file (truncated checkpoint?)",
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn blocks(&mut self) -> Result<Vec<Array2<f64>>> {
        let count = self.u32()? as usize;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = self.u32()? as usize;
            let cols = self.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(self.f64()?);
            }
            out.push(
                Array2::from_shape_vec((rows, cols), data)
                    .map_err(|e| Error::bad_format(self.path, format!("bad block shape: {e}")))?,
            );
        }
        Ok(out)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::bad_format(path, "not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::bad_format(
            path,
            format!("unsupported checkpoint version {version} (expected {VERSION})"),
        ));
    }
    let tag = r.u8()?;
    let feature_dim = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let clusters = r.u32()? as usize;
    let arch = match tag {
        0 => Arch::Nonlinear { hidden },
        1 => Arch::Netvlad { clusters, hidden },
        other => {
            return Err(Error::bad_format(
                path,
                format!("unknown architecture tag {other}"),
            ))
        }
    };
    let epoch = r.u64()? as usize;
    let hyper = AdamHyper {
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
    };
    let adam_step = r.u64()?;
    let rap_epoch = r.u64()? as usize;
    let rap_len = r.u32()? as usize;
    let mut rap_values = Vec::with_capacity(rap_len);
    for _ in 0..rap_len {
        rap_values.push(r.f64()?);
    }
    let params = r.blocks()?;
    let m = r.blocks()?;
    let v = r.blocks()?;
    if r.pos != bytes.len() {
        return Err(Error::bad_format(path, "trailing bytes after checkpoint"));
    }

    let mut model = Model::init(arch, feature_dim, classes, 0, None);
    {
        let mut blocks = model.blocks_mut();
        if blocks.len() != params.len() {
            return Err(Error::bad_format(path, "parameter block count mismatch"));
        }
        for (dst, src) in blocks.iter_mut().zip(params) {
            if dst.dim() != src.dim() {
                return Err(Error::bad_format(path, "parameter block shape mismatch"));
            }
            **dst = src;
        }
    }
    let expected_shapes: Vec<_> = model.blocks().iter().map(|b| b.dim()).collect();
    for moments in [&m, &v] {
        if moments.len() != expected_shapes.len()
            || moments
                .iter()
                .zip(&expected_shapes)
                .any(|(a, &d)| a.dim() != d)
        {
            return Err(Error::bad_format(path, "optimizer state shape mismatch"));
        }
    }
    Ok(TrainState {
        model,
        adam: AdamState {
            hyper,
            step: adam_step,
            m,
            v,
        },
        epoch,
        rap: RapTable::from_values(rap_values, rap_epoch),
    })
}
