//! Matrix files and the on-disk cache.
//!
//! A matrix file is one JSON header line followed by little-endian,
//! row-major, interleaved `(re, im)` f64 pairs. Index labels live in a
//! `<path>.json` sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PbtError, Result};
use crate::la::{CMat, C64};

const DTYPE: &str = "complex-f64";
const LAYOUT: &str = "row-major";
const ENDIAN: &str = "little";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub layout: String,
    pub endianness: String,
}

impl Header {
    pub fn for_matrix(m: &CMat) -> Self {
        Header {
            rows: m.nrows(),
            cols: m.ncols(),
            dtype: DTYPE.into(),
            layout: LAYOUT.into(),
            endianness: ENDIAN.into(),
        }
    }

    pub fn payload_len(&self) -> usize {
        self.rows * self.cols * 16
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct MatrixFile {
    pub header: Header,
    pub matrix: CMat,
    pub labels: Labels,
}

fn format_err(msg: impl Into<String>) -> PbtError {
    PbtError::Format(msg.into())
}

fn push_data(out: &mut Vec<u8>, m: &CMat) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
}

fn read_data(bytes: &[u8], rows: usize, cols: usize) -> CMat {
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    CMat::from_fn(rows, cols, |r, c| {
        let k = 2 * (r * cols + c);
        C64::new(f(k), f(k + 1))
    })
}

/// Splits off the first line and parses it as JSON.
fn split_header<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<(T, &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err("missing header line"))?;
    let header = serde_json::from_slice(&bytes[..nl]).map_err(|e| format_err(format!("bad header: {e}")))?;
    Ok((header, &bytes[nl + 1..]))
}

pub fn encode_matrix(m: &CMat) -> Vec<u8> {
    let header = Header::for_matrix(m);
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    push_data(&mut out, m);
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(Header, CMat)> {
    let (header, data): (Header, _) = split_header(bytes)?;
    if header.dtype != DTYPE || header.layout != LAYOUT || header.endianness != ENDIAN {
        return Err(format_err(format!(
            "unsupported encoding {}/{}/{}",
            header.dtype, header.layout, header.endianness
        )));
    }
    if data.len() != header.payload_len() {
        return Err(format_err(format!(
            "payload is {} bytes, header promises {}x{}x16 = {}",
            data.len(),
            header.rows,
            header.cols,
            header.payload_len()
        )));
    }
    let m = read_data(data, header.rows, header.cols);
    Ok((header, m))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_matrix(path: &Path, m: &CMat, labels: &Labels) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    let side = serde_json::to_vec_pretty(labels).map_err(|e| format_err(e.to_string()))?;
    fs::write(sidecar_path(path), side)?;
    Ok(())
}

/// Reads a matrix file; a missing sidecar gives empty labels.
pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let (header, matrix) = decode_matrix(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let labels = if side.exists() {
        serde_json::from_slice(&fs::read(side)?).map_err(|e| format_err(format!("bad sidecar: {e}")))?
    } else {
        Labels::default()
    };
    Ok(MatrixFile { header, matrix, labels })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a construction tag; bump the tag whenever a construction changes.
pub fn version_hash(construction: &str) -> String {
    sha256_hex(construction.as_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub module: String,
    pub n: usize,
    pub d: usize,
    pub version: String,
}

impl CacheKey {
    pub fn new(module: &str, n: usize, d: usize, construction: &str) -> Self {
        CacheKey {
            module: module.into(),
            n,
            d,
            version: version_hash(construction),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EntryHeader {
    key: CacheKey,
    shapes: Vec<(usize, usize)>,
    checksum: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lookup {
    Hit(Vec<CMat>),
    Missing,
    /// Stored under another construction version.
    Stale,
    /// Checksum or size mismatch.
    Corrupt,
}

#[derive(Clone, Debug)]
pub struct Cache {
    pub dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// `$PBT_CACHE_DIR`, or `./.cache`.
    pub fn from_env() -> Self {
        Cache::new(std::env::var_os("PBT_CACHE_DIR").map(PathBuf::from).unwrap_or_else(|| ".cache".into()))
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}_n{}_d{}.pbtc", key.module, key.n, key.d))
    }

    pub fn save(&self, key: &CacheKey, mats: &[CMat]) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let mut data = Vec::new();
        for m in mats {
            push_data(&mut data, m);
        }
        let header = EntryHeader {
            key: key.clone(),
            shapes: mats.iter().map(|m| m.shape()).collect(),
            checksum: sha256_hex(&data),
        };
        let path = self.path(key);
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&serde_json::to_vec(&header).map_err(|e| format_err(e.to_string()))?)?;
        f.write_all(b"\n")?;
        f.write_all(&data)?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(&self, key: &CacheKey) -> Result<Lookup> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(Lookup::Missing);
        }
        let bytes = fs::read(&path)?;
        let Ok((header, data)) = split_header::<EntryHeader>(&bytes) else {
            return Ok(Lookup::Corrupt);
        };
        if header.key != *key {
            return Ok(Lookup::Stale);
        }
        let want: usize = header.shapes.iter().map(|(r, c)| r * c * 16).sum();
        if data.len() != want || sha256_hex(data) != header.checksum {
            return Ok(Lookup::Corrupt);
        }
        let mut mats = Vec::with_capacity(header.shapes.len());
        let mut off = 0;
        for &(r, c) in &header.shapes {
            mats.push(read_data(&data[off..off + r * c * 16], r, c));
            off += r * c * 16;
        }
        Ok(Lookup::Hit(mats))
    }

    /// Loads `key`, rebuilding and saving on anything but a clean hit.
    pub fn get_or_build(&self, key: &CacheKey, build: impl FnOnce() -> Result<Vec<CMat>>) -> Result<Vec<CMat>> {
        if let Lookup::Hit(m) = self.load(key)? {
            return Ok(m);
        }
        let mats = build()?;
        self.save(key, &mats)?;
        Ok(mats)
    }
}
