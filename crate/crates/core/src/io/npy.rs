//! NPY v1.0 reader/writer for rank-3 float tensors.
//!
//! Layout: magic `\x93NUMPY`, version bytes `1 0`, little-endian `u16`
//! header length, an ASCII Python dict literal padded with spaces and a
//! trailing newline so the payload starts on a 64-byte boundary, then the
//! C-order little-endian payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::latent::{LatentDims, LatentTensor};
use crate::scalar::Scalar;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            other => Err(Error::Npy(format!(
                "unsupported dtype {other:?}; expected '<f4' or '<f8'"
            ))),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Serialize `tensor` to NPY bytes with the dtype of `T`.
pub fn encode_tensor<T: Scalar>(tensor: &LatentTensor<T>) -> Vec<u8> {
    let [c, h, w] = tensor.dims().as_array();
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({c}, {h}, {w}), }}",
        T::NPY_DESCR
    );
    // magic(6) + version(2) + len(2) + dict + padding + '\n'
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + pad + 1;

    let _elem = std::mem::size_of::<T>();
    let mut out = Vec::with_capacity(unpadded + pad + std::mem::size_of_val(tensor.data()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', pad));
    out.push(b'\n');
    for &v in tensor.data() {
        v.to_le_bytes_vec(&mut out);
    }
    out
}

/// Parse NPY bytes into a tensor, converting `<f4`/`<f8` into `T`.
pub fn decode_tensor<T: Scalar>(bytes: &[u8]) -> Result<LatentTensor<T>> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Npy("bad magic: not an NPY file".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::Npy("truncated header".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        _ => {
            return Err(Error::Npy(format!("unsupported format version {major}.{minor}")));
        }
    };
    let end = start + header_len;
    if bytes.len() < end {
        return Err(Error::Npy("truncated header".into()));
    }
    let header = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::Npy("header is not valid text".into()))?;

    let dtype = Dtype::parse(&dict_string(header, "descr")?)?;
    if dict_raw(header, "fortran_order")?.trim() != "False" {
        return Err(Error::Npy("Fortran-ordered arrays are not supported".into()));
    }
    let shape = parse_shape(dict_raw(header, "shape")?)?;
    let [c, h, w]: [usize; 3] = shape.as_slice().try_into().map_err(|_| {
        Error::Npy(format!("expected a rank-3 (c, h, w) array, got shape {shape:?}"))
    })?;
    let dims = LatentDims::new(c, h, w);

    let payload = &bytes[end..];
    let expected = dims.volume() * dtype.size();
    if payload.len() != expected {
        return Err(Error::Npy(format!(
            "payload is {} bytes, shape {dims} needs {expected}",
            payload.len()
        )));
    }
    let data = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|b| T::of(f32::from_le_slice(b) as f64))
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|b| T::of(f64::from_le_slice(b)))
            .collect(),
    };
    LatentTensor::new(dims, data)
}

pub fn read_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<LatentTensor<T>> {
    decode_tensor(&fs::read(path)?)
}

/// Write `tensor`; fails if `path` exists and `force` is false.
pub fn write_tensor<T: Scalar>(
    tensor: &LatentTensor<T>,
    path: impl AsRef<Path>,
    force: bool,
) -> Result<()> {
    let path = path.as_ref();
    super::guard_overwrite(path, force)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_tensor(tensor))?;
    Ok(())
}

/// Raw text of a dict entry's value, up to the next top-level comma.
fn dict_raw<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let needle_sq = format!("'{key}'");
    let needle_dq = format!("\"{key}\"");
    let pos = header
        .find(&needle_sq)
        .map(|p| p + needle_sq.len())
        .or_else(|| header.find(&needle_dq).map(|p| p + needle_dq.len()))
        .ok_or_else(|| Error::Npy(format!("header has no '{key}' entry")))?;
    let rest = header[pos..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| Error::Npy(format!("malformed '{key}' entry")))?
        .trim_start();
    let mut depth = 0i32;
    for (i, ch) in rest.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' | '}' if depth == 0 => return Ok(rest[..i].trim()),
            _ => {}
        }
    }
    Err(Error::Npy(format!("unterminated '{key}' entry")))
}

fn dict_string(header: &str, key: &str) -> Result<String> {
    let raw = dict_raw(header, key)?;
    let unquoted = raw
        .strip_prefix('\'')
        .and_then(|r| r.strip_suffix('\''))
        .or_else(|| raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')))
        .ok_or_else(|| Error::Npy(format!("'{key}' is not a string")))?;
    Ok(unquoted.to_string())
}

fn parse_shape(raw: &str) -> Result<Vec<usize>> {
    let inner = raw
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Npy(format!("shape {raw:?} is not a tuple")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Npy(format!("bad shape entry {s:?}")))
        })
        .collect()
}
