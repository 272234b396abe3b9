//! Binary checkpoint format.
//!
//! ```text
//! "FNET"  version:u32  layer_count:u32
//! layer_count × { kind:u8  rank:u8  dims:rank×u32  params:f32… }
//! ```
//!
//! All integers and floats are little-endian with no padding. The first
//! record is the model input (`kind 0`, dims `[H, W, C]`). Parameterised
//! layers record the weight shape (`3×3×C×F` or `N×M`) and are followed by
//! the weights, then the bias, each row-major.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{FallNetModel, InputSize, Layer};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FNET";
pub const CHECKPOINT_VERSION: u32 = 1;

const TAG_INPUT: u8 = 0;
const TAG_CONV2D: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_MAXPOOL2D: u8 = 3;
const TAG_FLATTEN: u8 = 4;
const TAG_DENSE: u8 = 5;
const TAG_SIGMOID: u8 = 6;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("bad checkpoint at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

fn format_err(offset: usize, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Format {
        offset,
        reason: reason.into(),
    }
}

pub fn to_bytes(model: &FallNetModel<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.param_count() * 4);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32 + 1).to_le_bytes());

    let put_dims = |out: &mut Vec<u8>, tag: u8, dims: &[usize]| {
        out.push(tag);
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    };
    let put_params = |out: &mut Vec<u8>, w: &Tensor<f32>, b: &Tensor<f32>| {
        for v in w.data().iter().chain(b.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };

    put_dims(&mut out, TAG_INPUT, &model.input_size().shape());
    for layer in model.layers() {
        match layer {
            Layer::Conv2d { kernels, bias } => {
                put_dims(&mut out, TAG_CONV2D, kernels.shape());
                put_params(&mut out, kernels, bias);
            }
            Layer::Dense { weights, bias } => {
                put_dims(&mut out, TAG_DENSE, weights.shape());
                put_params(&mut out, weights, bias);
            }
            Layer::Relu => put_dims(&mut out, TAG_RELU, &[]),
            Layer::MaxPool2d => put_dims(&mut out, TAG_MAXPOOL2D, &[]),
            Layer::Flatten => put_dims(&mut out, TAG_FLATTEN, &[]),
            Layer::Sigmoid => put_dims(&mut out, TAG_SIGMOID, &[]),
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format_err(
                self.pos,
                format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn floats(&mut self, shape: &[usize], what: &str) -> Result<Tensor<f32>, CheckpointError> {
        let at = self.pos;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err(at, format!("{what} shape {shape:?} overflows")))?;
        let bytes = self.take(n.saturating_mul(4), what)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::from_vec(shape, data).map_err(|e| format_err(at, e.to_string()))
    }
}

/// Parses a checkpoint, returning no model on any defect.
pub fn from_bytes(bytes: &[u8]) -> Result<FallNetModel<f32>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(format_err(0, "magic is not \"FNET\""));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let count = r.u32("layer count")? as usize;

    let mut input = None;
    let mut layers = Vec::new();
    for index in 0..count {
        let record_at = r.pos;
        let tag = r.u8("layer kind")?;
        let rank = r.u8("layer rank")? as usize;
        let dims = (0..rank)
            .map(|_| r.u32("layer dims").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let expect_rank = |want: usize| {
            if rank == want {
                Ok(())
            } else {
                Err(format_err(
                    record_at,
                    format!("layer {index}: rank {rank}, expected {want}"),
                ))
            }
        };
        match tag {
            TAG_INPUT if index == 0 => {
                expect_rank(3)?;
                input = Some(InputSize::new(dims[0], dims[1], dims[2]));
            }
            TAG_CONV2D => {
                expect_rank(4)?;
                let kernels = r.floats(&dims, "conv kernels")?;
                let bias = r.floats(&dims[3..], "conv bias")?;
                layers.push(Layer::Conv2d { kernels, bias });
            }
            TAG_DENSE => {
                expect_rank(2)?;
                let weights = r.floats(&dims, "dense weights")?;
                let bias = r.floats(&dims[1..], "dense bias")?;
                layers.push(Layer::Dense { weights, bias });
            }
            TAG_RELU | TAG_MAXPOOL2D | TAG_FLATTEN | TAG_SIGMOID => {
                expect_rank(0)?;
                layers.push(match tag {
                    TAG_RELU => Layer::Relu,
                    TAG_MAXPOOL2D => Layer::MaxPool2d,
                    TAG_FLATTEN => Layer::Flatten,
                    _ => Layer::Sigmoid,
                });
            }
            other => {
                return Err(format_err(
                    record_at,
                    format!("layer {index}: unexpected kind tag {other}"),
                ))
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(format_err(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let input = input.ok_or_else(|| format_err(12, "missing input record"))?;
    FallNetModel::from_layers(input, layers).map_err(|e| format_err(12, e.to_string()))
}

pub fn save_checkpoint(model: &FallNetModel<f32>, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FallNetModel<f32>, CheckpointError> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> FallNetModel<f32> {
        FallNetModel::build(InputSize::default(), 11).unwrap()
    }

    #[test]
    fn size_is_header_table_and_payload() {
        let m = model();
        let bytes = to_bytes(&m);
        // 12-byte preamble; input record 2+3·4; conv records 2+4·4; dense 2+2·4;
        // 6 relu/pool pairs + relu + flatten + sigmoid at 2 bytes each.
        let table = 14 + 6 * 18 + 2 * 10 + (12 + 3) * 2;
        assert_eq!(bytes.len(), 8 + 4 + table + 74_193 * 4);
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back.layers(), m.layers());
        assert_eq!(back.input_size(), m.input_size());
    }

    #[test]
    fn header_defects_are_located() {
        let good = to_bytes(&model());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            from_bytes(&bad),
            Err(CheckpointError::Format { offset: 0, .. })
        ));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            from_bytes(&bad),
            Err(CheckpointError::Format { offset: 4, .. })
        ));
        let cut = &good[..good.len() - 3];
        match from_bytes(cut) {
            Err(CheckpointError::Format { offset, reason }) => {
                assert!(offset > 12 && reason.contains("truncated"), "{offset} {reason}");
            }
            other => panic!("{other:?}"),
        }
        let mut long = good;
        long.push(0);
        assert!(from_bytes(&long).is_err());
        assert!(from_bytes(&[]).is_err());
    }

    #[test]
    fn unknown_kind_tag_is_rejected() {
        let mut bytes = to_bytes(&model());
        // First layer record follows the 12-byte preamble and 14-byte input record.
        bytes[26] = 42;
        match from_bytes(&bytes) {
            Err(CheckpointError::Format { offset, .. }) => assert_eq!(offset, 26),
            other => panic!("{other:?}"),
        }
    }
}
