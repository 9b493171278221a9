//! Dataset archive persistence.
//!
//! An archive is a directory holding a text manifest (format version, case
//! description, seed, realization count) and one binary file per
//! realization. Binary layout, all little-endian: header `n_t: u64`,
//! `n_x: u64`, grid bounds as four f64 (x_min, x_max, t_min, t_max),
//! `param_count: u64`, then per parameter a length-prefixed utf-8 name and
//! an f64 value; body is the row-major f64 field. Round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{FieldSnapshot, Grid1D, Matrix};
use crate::simulate::CaseSpec;

pub const FORMAT_VERSION: u32 = 1;

fn realization_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("r{index:05}.bin"))
}

/// Writes the archive; `case` is echoed into the manifest for provenance.
pub fn save_dataset(dir: &Path, case: &CaseSpec, snapshots: &[FieldSnapshot]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.txt");
    let mut m = BufWriter::new(File::create(manifest)?);
    writeln!(m, "format_version = {FORMAT_VERSION}")?;
    writeln!(m, "equation = {}", case.equation.name())?;
    writeln!(m, "x_min = {}", case.x_min)?;
    writeln!(m, "x_max = {}", case.x_max)?;
    writeln!(m, "t_max = {}", case.t_max)?;
    writeln!(m, "n_x = {}", case.n_x)?;
    writeln!(m, "n_t = {}", case.n_t)?;
    writeln!(m, "seed = {}", case.seed)?;
    writeln!(m, "realizations = {}", snapshots.len())?;
    m.flush()?;
    for (i, snap) in snapshots.iter().enumerate() {
        let mut w = BufWriter::new(File::create(realization_path(dir, i))?);
        let g = &snap.grid;
        w.write_all(&(g.n_t as u64).to_le_bytes())?;
        w.write_all(&(g.n_x as u64).to_le_bytes())?;
        for v in [g.x_min, g.x_max, g.t_min, g.t_max] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(snap.params.len() as u64).to_le_bytes())?;
        for (name, value) in &snap.params {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&value.to_le_bytes())?;
        }
        for v in snap.u.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Minimal manifest contents needed for integrity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub equation: String,
    pub seed: u64,
    pub realizations: usize,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Archive(format!("cannot read {}: {e}", path.display())))?;
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| -> Result<String> {
        kv.get(k)
            .cloned()
            .ok_or_else(|| Error::Archive(format!("manifest missing `{k}`")))
    };
    let format_version: u32 = get("format_version")?
        .parse()
        .map_err(|_| Error::Archive("bad format_version".into()))?;
    if format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(Manifest {
        format_version,
        equation: get("equation")?,
        seed: get("seed")?
            .parse()
            .map_err(|_| Error::Archive("bad seed".into()))?,
        realizations: get("realizations")?
            .parse()
            .map_err(|_| Error::Archive("bad realization count".into()))?,
    })
}

struct Reader<R> {
    inner: R,
    offset: u64,
    path: String,
}

impl<R: Read> Reader<R> {
    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|_| Error::Truncated {
            path: self.path.clone(),
            offset: self.offset,
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

pub fn load_realization(dir: &Path, index: usize) -> Result<FieldSnapshot> {
    let path = realization_path(dir, index);
    let file = File::open(&path)
        .map_err(|e| Error::Archive(format!("cannot open {}: {e}", path.display())))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        offset: 0,
        path: path.display().to_string(),
    };
    let n_t = r.u64()? as usize;
    let n_x = r.u64()? as usize;
    let x_min = r.f64()?;
    let x_max = r.f64()?;
    let t_min = r.f64()?;
    let t_max = r.f64()?;
    let grid = Grid1D::new(x_min, x_max, n_x, t_min, t_max, n_t)?;
    let param_count = r.u64()? as usize;
    let mut params = BTreeMap::new();
    for _ in 0..param_count {
        let len = r.u64()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let name = String::from_utf8(buf)
            .map_err(|_| Error::Archive("non-utf8 parameter name".into()))?;
        params.insert(name, r.f64()?);
    }
    let mut data = vec![0.0f64; n_t * n_x];
    for v in &mut data {
        *v = r.f64()?;
    }
    let mut rows = Vec::with_capacity(n_t);
    for chunk in data.chunks_exact(n_x) {
        rows.push(chunk.to_vec());
    }
    FieldSnapshot::new(grid, Matrix::from_rows(rows), params)
}

/// Loads the whole archive, verifying the manifest count against the files
/// present.
pub fn load_dataset(dir: &Path) -> Result<Vec<FieldSnapshot>> {
    let manifest = read_manifest(dir)?;
    let present = (0..)
        .take_while(|i| realization_path(dir, *i).exists())
        .count();
    if present != manifest.realizations {
        return Err(Error::Archive(format!(
            "manifest declares {} realizations, found {present} files",
            manifest.realizations
        )));
    }
    (0..present).map(|i| load_realization(dir, i)).collect()
}
