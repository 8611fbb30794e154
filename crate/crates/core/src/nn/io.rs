//! Flat little-endian parameter files.
//!
//! Layout: magic `NNPI`, `u32` format version, `u32` layer count, then per layer
//! `u32` input width, `u32` output width, `u32` activation tag, the row-major
//! `out × in` weights and the `out` biases as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, DenseLayer, Network, NnError};

pub const MAGIC: &[u8; 4] = b"NNPI";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for layer in net.layers() {
        w.write_all(&(layer.input_width() as u32).to_le_bytes())?;
        w.write_all(&(layer.output_width() as u32).to_le_bytes())?;
        w.write_all(&layer.activation.tag().to_le_bytes())?;
        for v in layer.weights.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.biases.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| NnError::Format("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>, NnError> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| NnError::Format("unexpected end of file".into()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_network<R: Read>(mut r: R) -> Result<Network, NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| NnError::Format("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(NnError::Format("bad magic bytes".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(NnError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let input = read_u32(&mut r)? as usize;
        let output = read_u32(&mut r)? as usize;
        let tag = read_u32(&mut r)?;
        let activation = Activation::from_tag(tag)
            .ok_or_else(|| NnError::Format(format!("layer {i}: unknown activation tag {tag}")))?;
        let weights = Array2::from_shape_vec((output, input), read_f64s(&mut r, input * output)?)
            .map_err(|e| NnError::Format(format!("layer {i}: {e}")))?;
        let biases = Array1::from(read_f64s(&mut r, output)?);
        layers.push(DenseLayer::new(weights, biases, activation)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(NnError::Format("trailing bytes after last layer".into()));
    }
    Network::new(layers)
}

pub fn save_network(net: &Network, path: &Path) -> Result<(), NnError> {
    write_network(net, BufWriter::new(File::create(path)?))
}

pub fn load_network(path: &Path) -> Result<Network, NnError> {
    read_network(BufReader::new(File::open(path)?))
}
