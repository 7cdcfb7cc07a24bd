//! One self-describing binary file format shared by checkpoints and
//! the dataset/feature caches: a magic tag, a JSON metadata document,
//! then length-prefixed raw blocks.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SZCAST01";

pub fn write_container(path: &Path, metadata: &serde_json::Value, blocks: &[&[u8]]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    let meta = serde_json::to_vec(metadata)?;
    f.write_all(&(meta.len() as u64).to_le_bytes())?;
    f.write_all(&meta)?;
    f.write_all(&(blocks.len() as u64).to_le_bytes())?;
    for b in blocks {
        f.write_all(&(b.len() as u64).to_le_bytes())?;
        f.write_all(b)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<(serde_json::Value, Vec<Vec<u8>>)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::checkpoint(format!(
            "{} is not a recognized container file",
            path.display()
        )));
    }
    let mut len8 = [0u8; 8];
    f.read_exact(&mut len8)?;
    let meta_len = u64::from_le_bytes(len8) as usize;
    let mut meta = vec![0u8; meta_len];
    f.read_exact(&mut meta)?;
    let metadata: serde_json::Value = serde_json::from_slice(&meta)?;
    f.read_exact(&mut len8)?;
    let n_blocks = u64::from_le_bytes(len8) as usize;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        f.read_exact(&mut len8)?;
        let len = u64::from_le_bytes(len8) as usize;
        let mut b = vec![0u8; len];
        f.read_exact(&mut b)?;
        blocks.push(b);
    }
    Ok((metadata, blocks))
}

pub fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn bytes_to_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::checkpoint(format!(
            "block of {} bytes is not a whole number of f64s",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
