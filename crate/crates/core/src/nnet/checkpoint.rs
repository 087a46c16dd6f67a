//! Binary model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! b"TRN1"
//! u32 in_channels, u32 stem_channels, u32 block_count
//! block_count x (u32 out_channels, u32 stride)
//! u32 input_width, u32 input_height          (0, 0 when unknown)
//! u32 tensor_count
//! tensor_count x (u32 rank, rank x u32 extent, product(extents) x f64)
//! ```
//!
//! Tensors appear in [`TinyResNet::params`] order. Weight tensors carry
//! their layer shape (`[out, in, k, k]` or `[classes, features]`), biases
//! are rank 1. The loader rebuilds the architecture from the header and
//! rejects any tensor whose shape differs from it.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::label::NUM_CLASSES;
use crate::nnet::block::Shortcut;
use crate::nnet::model::{ArchConfig, BlockSpec, TinyResNet};

pub const MAGIC: &[u8; 4] = b"TRN1";

/// A trained network plus the input size it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TinyResNet,
    pub input_size: Option<(usize, usize)>,
}

fn shapes(model: &TinyResNet) -> Vec<Vec<usize>> {
    let conv = |c: &crate::nnet::conv::ConvLayer| {
        vec![
            vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
            vec![c.out_channels],
        ]
    };
    let mut out = conv(&model.stem);
    for b in &model.blocks {
        out.extend(conv(&b.conv1));
        out.extend(conv(&b.conv2));
        if let Shortcut::Projection(p) = &b.shortcut {
            out.extend(conv(p));
        }
    }
    out.push(vec![NUM_CLASSES, model.arch().feature_channels()]);
    out.push(vec![NUM_CLASSES]);
    out
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    let model = &checkpoint.model;
    let arch = model.arch();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, arch.in_channels)?;
    put_u32(&mut buf, arch.stem_channels)?;
    put_u32(&mut buf, arch.blocks.len())?;
    for b in &arch.blocks {
        put_u32(&mut buf, b.out_channels)?;
        put_u32(&mut buf, b.stride)?;
    }
    let (iw, ih) = checkpoint.input_size.unwrap_or((0, 0));
    put_u32(&mut buf, iw)?;
    put_u32(&mut buf, ih)?;
    let params = model.params();
    let shapes = shapes(model);
    put_u32(&mut buf, params.len())?;
    for (values, shape) in params.iter().zip(&shapes) {
        put_u32(&mut buf, shape.len())?;
        for &d in shape {
            put_u32(&mut buf, d)?;
        }
        for v in values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("eight bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, expected TRN1".into()));
    }
    let in_channels = r.u32()?;
    let stem_channels = r.u32()?;
    let block_count = r.u32()?;
    if block_count > 1024 {
        return Err(Error::Checkpoint(format!("implausible block count {block_count}")));
    }
    let mut blocks = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        blocks.push(BlockSpec {
            out_channels: r.u32()?,
            stride: r.u32()?,
        });
    }
    let arch = ArchConfig {
        in_channels,
        stem_channels,
        blocks,
    };
    let iw = r.u32()?;
    let ih = r.u32()?;
    let input_size = (iw > 0 && ih > 0).then_some((iw, ih));
    let mut model = TinyResNet::zeros(&arch).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let expected = shapes(&model);
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, architecture needs {}",
            expected.len()
        )));
    }
    for (param, shape) in model.params_mut().into_iter().zip(&expected) {
        let rank = r.u32()?;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("implausible rank {rank}")));
        }
        let stored: Vec<usize> = (0..rank).map(|_| r.u32()).collect::<Result<_>>()?;
        if &stored != shape {
            return Err(Error::Checkpoint(format!(
                "tensor shape {stored:?} does not match expected {shape:?}"
            )));
        }
        for v in param.iter_mut() {
            *v = r.f64()?;
            if !v.is_finite() {
                return Err(Error::Checkpoint("non-finite weight".into()));
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { model, input_size })
}

pub fn save(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode(checkpoint)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes)
}
