//! On-disk cache of sensing operators.
//!
//! File layout, all integers little endian:
//!
//! ```text
//! magic      8 bytes  "MCRISXI\0"
//! version    u32      1
//! kind       u32      0 = dense, 1 = Kronecker pair
//! count      u32      number of matrices that follow (1 or 2)
//! per matrix:
//!   rows     u64
//!   cols     u64
//!   elem     u32      bytes per element, 16 (complex128)
//!   data     rows·cols elements, row-major, re then im as f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::SensingOperator;
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

const MAGIC: &[u8; 8] = b"MCRISXI\0";
const VERSION: u32 = 1;
const ELEM: u32 = 16;

fn write_matrix<W: Write>(w: &mut W, m: &CMat) -> std::io::Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    w.write_all(&ELEM.to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_matrix<R: Read>(r: &mut R, path: &Path) -> Result<CMat> {
    let io = |e| Error::io(path, e);
    let rows = read_u64(r).map_err(io)? as usize;
    let cols = read_u64(r).map_err(io)? as usize;
    let elem = read_u32(r).map_err(io)?;
    if elem != ELEM {
        return Err(Error::Config(format!("{}: unsupported element size {elem}", path.display())));
    }
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = read_f64(r).map_err(io)?;
            let im = read_f64(r).map_err(io)?;
            m[(i, j)] = c64(re, im);
        }
    }
    Ok(m)
}

pub fn save_operator(path: &Path, op: &SensingOperator) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mats: Vec<&CMat> = match op {
        SensingOperator::Dense(m) => vec![m],
        SensingOperator::Kron { left, right } => vec![left, right],
    };
    let kind: u32 = matches!(op, SensingOperator::Kron { .. }).into();
    (|| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&kind.to_le_bytes())?;
        w.write_all(&(mats.len() as u32).to_le_bytes())?;
        for m in mats {
            write_matrix(&mut w, m)?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn load_operator(path: &Path) -> Result<SensingOperator> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{}: not a sensing cache file", path.display())));
    }
    let version = read_u32(&mut r).map_err(io)?;
    if version != VERSION {
        return Err(Error::Config(format!("{}: unsupported cache version {version}", path.display())));
    }
    let kind = read_u32(&mut r).map_err(io)?;
    let count = read_u32(&mut r).map_err(io)?;
    match (kind, count) {
        (0, 1) => Ok(SensingOperator::Dense(read_matrix(&mut r, path)?)),
        (1, 2) => {
            let left = read_matrix(&mut r, path)?;
            let right = read_matrix(&mut r, path)?;
            Ok(SensingOperator::Kron { left, right })
        }
        _ => Err(Error::Config(format!("{}: bad cache layout ({kind}, {count})", path.display()))),
    }
}

/// Directory-backed cache keyed by configuration hash.
#[derive(Debug, Clone)]
pub struct SensingCache {
    dir: PathBuf,
}

impl SensingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.xi"))
    }

    /// Loads the operator stored under `key`, building and storing it on a miss.
    pub fn get_or_build<F>(&self, key: &str, build: F) -> Result<SensingOperator>
    where
        F: FnOnce() -> Result<SensingOperator>,
    {
        let path = self.path_for(key);
        if path.exists() {
            return load_operator(&path);
        }
        let op = build()?;
        save_operator(&path, &op)?;
        Ok(op)
    }
}
