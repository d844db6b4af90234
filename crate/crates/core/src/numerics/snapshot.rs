//! Binary parameter snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   b"CCEPNET\x01"
//! n_sizes      u32       number of layer widths (input, hidden..., output)
//! sizes        u64 × n_sizes
//! head         u8        0 = linear, 1 = bounded
//! scale        f64       bounded-head scale (0.0 for linear)
//! per layer l: weight    f64 × (out × in), row-major
//!              bias      f64 × out
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a snapshot round-trips exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::net::{Layer, NetConfig, NetworkParams, OutputHead};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CCEPNET\x01";

pub fn write_params<W: Write>(params: &NetworkParams, mut w: W) -> std::io::Result<()> {
    let cfg = params.config();
    w.write_all(MAGIC)?;
    w.write_all(&(cfg.layer_sizes.len() as u32).to_le_bytes())?;
    for &n in &cfg.layer_sizes {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let (tag, scale) = match cfg.head {
        OutputHead::Linear => (0u8, 0.0f64),
        OutputHead::Bounded { scale } => (1u8, scale),
    };
    w.write_all(&[tag])?;
    w.write_all(&scale.to_le_bytes())?;
    for v in params.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Malformed {
        what: "parameter snapshot".into(),
        reason: reason.into(),
    }
}

pub fn read_params<R: Read>(mut r: R) -> Result<NetworkParams> {
    let mut buf8 = [0u8; 8];
    let mut read8 = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut buf8).map_err(|e| malformed(e.to_string()))?;
        Ok(buf8)
    };
    if &read8(&mut r)? != MAGIC {
        return Err(malformed("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|e| malformed(e.to_string()))?;
    let n_sizes = u32::from_le_bytes(b4) as usize;
    if n_sizes > 1024 {
        return Err(malformed(format!("implausible layer count {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(u64::from_le_bytes(read8(&mut r)?) as usize);
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(|e| malformed(e.to_string()))?;
    let scale = f64::from_le_bytes(read8(&mut r)?);
    let head = match tag[0] {
        0 => OutputHead::Linear,
        1 => OutputHead::Bounded { scale },
        t => return Err(malformed(format!("unknown head tag {t}"))),
    };
    let config = NetConfig::new(sizes, head)?;
    let mut layers = Vec::with_capacity(config.num_layers());
    for w in config.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let mut weight = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            weight.push(f64::from_le_bytes(read8(&mut r)?));
        }
        let mut bias = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            bias.push(f64::from_le_bytes(read8(&mut r)?));
        }
        layers.push(Layer {
            weight: Matrix::from_vec(fan_out, fan_in, weight)?,
            bias,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| malformed(e.to_string()))? != 0 {
        return Err(malformed("trailing bytes"));
    }
    NetworkParams::from_layers(config, layers)
}

pub fn save(params: &NetworkParams, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_params(params, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_params(std::io::BufReader::new(file))
}
