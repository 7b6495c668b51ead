//! Flat binary parameter format.
//!
//! Layout: magic `CRBM1`, then `|v|`, `|u|`, `|h|` as little-endian `u32`,
//! then one flag byte each for `has_uv` and `has_uh`, then the row-major
//! little-endian `f64` blocks `w_vh`, `w_uv`, `w_uh`, `b_v`, `b_h`.
//! Absent blocks are written as zeros.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::CrbmParams;
use crate::error::{CrbmError, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 5] = b"CRBM1";

pub fn write_params<W: Write>(params: &CrbmParams, mut out: W) -> Result<()> {
    params.validate()?;
    out.write_all(MAGIC)?;
    for dim in [params.n_visible(), params.n_input(), params.n_hidden()] {
        let dim = u32::try_from(dim).map_err(|_| CrbmError::invalid("dimension exceeds u32"))?;
        out.write_all(&dim.to_le_bytes())?;
    }
    out.write_all(&[u8::from(params.has_uv), u8::from(params.has_uh)])?;

    let write_block = |out: &mut W, values: &[f64], present: bool| -> Result<()> {
        for &x in values {
            let x = if present { x } else { 0.0 };
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    write_block(&mut out, params.w_vh.as_slice(), true)?;
    write_block(&mut out, params.w_uv.as_slice(), params.has_uv)?;
    write_block(&mut out, params.w_uh.as_slice(), params.has_uh)?;
    write_block(&mut out, &params.b_v, true)?;
    write_block(&mut out, &params.b_h, true)?;
    out.flush()?;
    Ok(())
}

pub fn read_params<R: Read>(mut input: R) -> Result<CrbmParams> {
    let mut magic = [0u8; 5];
    read_exact(&mut input, &mut magic)?;
    if &magic != MAGIC {
        return Err(CrbmError::format("parameter", "bad magic"));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        let mut buf = [0u8; 4];
        read_exact(&mut input, &mut buf)?;
        *d = u32::from_le_bytes(buf) as usize;
    }
    let [nv, nu, nh] = dims;
    let mut flags = [0u8; 2];
    read_exact(&mut input, &mut flags)?;
    let flag = |b: u8| match b {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(CrbmError::format("parameter", format!("flag byte {other}"))),
    };
    let (has_uv, has_uh) = (flag(flags[0])?, flag(flags[1])?);

    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        read_exact(&mut input, &mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(CrbmError::format("parameter", "non-finite value"));
        }
        Ok(values)
    };
    let w_vh = Matrix::from_vec(nv, nh, read_block(nv * nh)?);
    let w_uv = Matrix::from_vec(nu, nv, read_block(nu * nv)?);
    let w_uh = Matrix::from_vec(nu, nh, read_block(nu * nh)?);
    let b_v = read_block(nv)?;
    let b_h = read_block(nh)?;

    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(CrbmError::format("parameter", "trailing bytes"));
    }

    Ok(CrbmParams {
        w_vh,
        w_uv,
        w_uh,
        b_v,
        b_h,
        has_uv,
        has_uh,
    })
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CrbmError::format("parameter", "truncated file")
        } else {
            CrbmError::Io(e)
        }
    })
}

pub fn save_params(params: &CrbmParams, path: impl AsRef<Path>) -> Result<()> {
    write_params(params, BufWriter::new(File::create(path)?))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<CrbmParams> {
    read_params(BufReader::new(File::open(path)?))
}
