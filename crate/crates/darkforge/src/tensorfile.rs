//! Raw tensor files: one ASCII line `f64 <ndim> <d0> <d1> ...` then little-endian f64 values, row-major.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode(dims: &[usize], data: &[f64]) -> Vec<u8> {
    assert_eq!(dims.iter().product::<usize>(), data.len(), "dims do not match data length");
    let mut header = format!("f64 {}", dims.len());
    for d in dims {
        header.push_str(&format!(" {d}"));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<RawTensor, String> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not ASCII")?;
    let mut fields = header.split_ascii_whitespace();
    if fields.next() != Some("f64") {
        return Err("header must start with `f64`".into());
    }
    let parse = |s: Option<&str>| -> std::result::Result<usize, String> {
        s.ok_or("truncated header")?.parse().map_err(|e| format!("bad header field: {e}"))
    };
    let ndim = parse(fields.next())?;
    let dims = (0..ndim).map(|_| parse(fields.next())).collect::<std::result::Result<Vec<_>, _>>()?;
    if fields.next().is_some() {
        return Err("extra header fields".into());
    }
    let body = &bytes[nl + 1..];
    let count: usize = dims.iter().product();
    if body.len() != count * 8 {
        return Err(format!("expected {} data bytes, found {}", count * 8, body.len()));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(RawTensor { dims, data })
}

pub fn read(path: &Path) -> Result<RawTensor> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|message| Error::Format { path: path.to_path_buf(), message })
}

pub fn write(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    crate::imageio::write_file(path, &encode(dims, data))
}
