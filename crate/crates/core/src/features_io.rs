//! Binary container for spectral feature tensors.
//!
//! A file is a sequence of blocks, one per recording, each little-endian:
//!
//! ```text
//! magic       4 bytes "NSFT"
//! frames      u32     T
//! n_channels  u32
//! n_bins      u32
//! fs          f64     Hz
//! data        T × n_channels × n_bins f64, frame-major, then channel, then bin
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NSFT";

/// Shape and values of one block as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub frames: usize,
    pub n_channels: usize,
    pub n_bins: usize,
    pub fs: f64,
    pub data: Vec<f64>,
}

impl From<&crate::spectral::SpectralTensor> for FeatureBlock {
    fn from(t: &crate::spectral::SpectralTensor) -> Self {
        Self { frames: t.frames, n_channels: t.channels.len(), n_bins: t.bins.len(), fs: t.fs, data: t.data.clone() }
    }
}

pub fn write_blocks(w: &mut impl Write, blocks: &[FeatureBlock]) -> Result<()> {
    for b in blocks {
        if b.data.len() != b.frames * b.n_channels * b.n_bins {
            return Err(Error::Shape("feature block data length does not match its header".into()));
        }
        w.write_all(MAGIC)?;
        for d in [b.frames, b.n_channels, b.n_bins] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&b.fs.to_le_bytes())?;
        for v in &b.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_blocks(r: &mut impl Read) -> Result<Vec<FeatureBlock>> {
    let mut out = Vec::new();
    loop {
        let mut magic = [0u8; 4];
        match r.read_exact(&mut magic) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        if &magic != MAGIC {
            return Err(Error::Schema("feature file block has bad magic".into()));
        }
        let mut u = [0u8; 4];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            r.read_exact(&mut u)?;
            *d = u32::from_le_bytes(u) as usize;
        }
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let fs = f64::from_le_bytes(f);
        let n = dims[0] * dims[1] * dims[2];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f)?;
            data.push(f64::from_le_bytes(f));
        }
        out.push(FeatureBlock { frames: dims[0], n_channels: dims[1], n_bins: dims[2], fs, data });
    }
    Ok(out)
}

pub fn save(path: &Path, blocks: &[FeatureBlock]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_blocks(&mut w, blocks)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<FeatureBlock>> {
    read_blocks(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block_layout() {
        let b = FeatureBlock { frames: 2, n_channels: 1, n_bins: 2, fs: 300.0, data: vec![1.0, 2.0, 3.0, 4.0] };
        let mut buf = Vec::new();
        write_blocks(&mut buf, &[b.clone()]).unwrap();
        assert_eq!(buf.len(), 4 + 12 + 8 + 32);
        assert_eq!(&buf[..4], b"NSFT");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[16..24], &300.0f64.to_le_bytes());
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
        assert_eq!(read_blocks(&mut buf.as_slice()).unwrap(), vec![b]);
    }

    #[test]
    fn truncated_block_errors() {
        let b = FeatureBlock { frames: 1, n_channels: 1, n_bins: 1, fs: 1.0, data: vec![1.0] };
        let mut buf = Vec::new();
        write_blocks(&mut buf, &[b]).unwrap();
        buf.pop();
        assert!(read_blocks(&mut buf.as_slice()).is_err());
    }
}
