//! Weight snapshot files.
//!
//! Layout: magic `DQTS`, format version (u16 LE), architecture descriptor
//! (word count then words, u32 LE), every parameter tensor's values as f32 LE
//! in declaration order, the matching RMSprop accumulators in the same order,
//! and finally an FNV-1a 64-bit checksum (u64 LE) of all preceding bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::QModel;

pub const MAGIC: [u8; 4] = *b"DQTS";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("architecture mismatch between file and model")]
    ArchMismatch,
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch (file corrupted)")]
    ChecksumMismatch,
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Fnv1a {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

struct HashedWriter<W: Write> {
    inner: W,
    hash: Fnv1a,
}

impl<W: Write> HashedWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hash.update(bytes);
        self.inner.write_all(bytes)
    }
}

struct HashedReader<R: Read> {
    inner: R,
    hash: Fnv1a,
}

impl<R: Read> HashedReader<R> {
    fn take(&mut self, buf: &mut [u8]) -> Result<(), CheckpointError> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.hash.update(buf);
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(CheckpointError::Truncated)
            }
            Err(e) => Err(CheckpointError::Io(e)),
        }
    }

    fn take_u32(&mut self) -> Result<u32, CheckpointError> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn take_f32(&mut self) -> Result<f32, CheckpointError> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }
}

/// Writes the model's weights and optimizer state to `path`.
pub fn save<M: QModel>(model: &M, path: &Path) -> Result<(), CheckpointError> {
    let file = File::create(path)?;
    let mut w = HashedWriter {
        inner: BufWriter::new(file),
        hash: Fnv1a::new(),
    };
    w.put(&MAGIC)?;
    w.put(&FORMAT_VERSION.to_le_bytes())?;
    let arch = model.arch();
    w.put(&(arch.len() as u32).to_le_bytes())?;
    for word in &arch {
        w.put(&word.to_le_bytes())?;
    }
    for p in model.params() {
        for v in p.value.data() {
            w.put(&v.to_le_bytes())?;
        }
    }
    for p in model.params() {
        for v in p.acc.data() {
            w.put(&v.to_le_bytes())?;
        }
    }
    let digest = w.hash.0;
    w.inner.write_all(&digest.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

/// Loads weights and optimizer state from `path` into `model`, which must
/// have the identical architecture. Gradients are zeroed.
pub fn load<M: QModel>(model: &mut M, path: &Path) -> Result<(), CheckpointError> {
    let file = File::open(path)?;
    let mut r = HashedReader {
        inner: BufReader::new(file),
        hash: Fnv1a::new(),
    };
    let mut magic = [0u8; 4];
    r.take(&mut magic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut ver = [0u8; 2];
    r.take(&mut ver)?;
    let version = u16::from_le_bytes(ver);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let arch_len = r.take_u32()? as usize;
    let expected = model.arch();
    if arch_len != expected.len() {
        return Err(CheckpointError::ArchMismatch);
    }
    for want in &expected {
        if r.take_u32()? != *want {
            return Err(CheckpointError::ArchMismatch);
        }
    }
    let mut values: Vec<Vec<f32>> = Vec::new();
    for p in model.params() {
        let mut buf = Vec::with_capacity(p.len());
        for _ in 0..p.len() {
            buf.push(r.take_f32()?);
        }
        values.push(buf);
    }
    let mut accs: Vec<Vec<f32>> = Vec::new();
    for p in model.params() {
        let mut buf = Vec::with_capacity(p.len());
        for _ in 0..p.len() {
            buf.push(r.take_f32()?);
        }
        accs.push(buf);
    }
    let digest = r.hash.0;
    let mut sum = [0u8; 8];
    match r.inner.read_exact(&mut sum) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return Err(CheckpointError::Truncated)
        }
        Err(e) => return Err(CheckpointError::Io(e)),
    }
    if u64::from_le_bytes(sum) != digest {
        return Err(CheckpointError::ChecksumMismatch);
    }
    for ((p, v), a) in model.params_mut().into_iter().zip(values).zip(accs) {
        p.value.data_mut().copy_from_slice(&v);
        p.acc.data_mut().copy_from_slice(&a);
        p.grad.fill(0.0);
    }
    Ok(())
}
