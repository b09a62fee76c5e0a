//! Weight checkpoints: a JSON shape header followed by the raw values as
//! 64-bit little-endian floats.

use std::io::{Error, ErrorKind, Read, Result, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

const MAGIC: &[u8; 4] = b"L2PW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<HeaderEntry>,
}

pub fn save_checkpoint(path: &Path, tensors: &[NamedTensor]) -> Result<()> {
    let header = Header {
        tensors: tensors
            .iter()
            .map(|t| HeaderEntry { name: t.name.clone(), shape: t.shape.clone() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for t in tensors {
        let expected: usize = t.shape.iter().product();
        if expected != t.data.len() {
            return Err(Error::new(
                ErrorKind::InvalidInput,
                format!("tensor {} shape does not match data length", t.name),
            ));
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<NamedTensor>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::new(ErrorKind::InvalidData, "not a weight checkpoint"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::new(
            ErrorKind::InvalidData,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut header_bytes = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut buf = [0u8; 8];
    for e in header.tensors {
        let count: usize = e.shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push(NamedTensor { name: e.name, shape: e.shape, data });
    }
    Ok(tensors)
}
