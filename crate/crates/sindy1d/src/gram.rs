//! Memory-efficient normal-equation accumulation.
//!
//! The Gram pair `G = Theta^T Theta`, `b = Theta^T y` is summed over batches
//! so the full design matrix is never materialized; the footprint stays
//! O(p^2) regardless of sample count. Accumulation is associative and
//! commutative, so parallel workers may build private pairs and merge.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureBatch;

/// Accumulated normal-equation pair with column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    columns: Vec<String>,
    /// Row-major dense p x p, kept exactly symmetric.
    g: Vec<f64>,
    b: Vec<f64>,
    n_rows: u64,
    y_ss: f64,
}

impl GramSystem {
    pub fn new(columns: Vec<String>) -> Self {
        let p = columns.len();
        Self {
            columns,
            g: vec![0.0; p * p],
            b: vec![0.0; p],
            n_rows: 0,
            y_ss: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> u64 {
        self.n_rows
    }

    pub fn y_ss(&self) -> f64 {
        self.y_ss
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.p() + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Bytes held by the pair (G, b); the memory proxy for reports.
    pub fn bytes(&self) -> usize {
        (self.g.len() + self.b.len()) * std::mem::size_of::<f64>()
    }

    /// Adds a feature batch: G += Theta^T Theta, b += Theta^T y.
    pub fn accumulate(&mut self, batch: &FeatureBatch) -> Result<()> {
        if batch.names != self.columns {
            return Err(Error::ColumnMismatch(format!(
                "batch has {} columns, gram has {}",
                batch.names.len(),
                self.columns.len()
            )));
        }
        let p = self.p();
        for (j, col_j) in batch.columns.iter().enumerate() {
            if col_j.len() != batch.y.len() {
                return Err(Error::ShapeMismatch("ragged feature batch".into()));
            }
            for k in j..p {
                let dot = dot(col_j, &batch.columns[k]);
                self.g[j * p + k] += dot;
                if k != j {
                    self.g[k * p + j] += dot;
                }
            }
            self.b[j] += dot(col_j, &batch.y);
        }
        self.y_ss += dot(&batch.y, &batch.y);
        self.n_rows += batch.y.len() as u64;
        Ok(())
    }

    /// Merges another pair accumulated over the same columns.
    pub fn merge(&mut self, other: &GramSystem) -> Result<()> {
        if other.columns != self.columns {
            return Err(Error::ColumnMismatch(
                "merge requires identical column sets".into(),
            ));
        }
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
        self.n_rows += other.n_rows;
        self.y_ss += other.y_ss;
        Ok(())
    }

    /// Restriction of the pair to a column subset; equals the pair that
    /// accumulating only those columns would have produced.
    pub fn submatrix(&self, indices: &[usize]) -> GramSystem {
        let p = self.p();
        let q = indices.len();
        let mut g = vec![0.0; q * q];
        let mut b = vec![0.0; q];
        for (a, &i) in indices.iter().enumerate() {
            for (c, &j) in indices.iter().enumerate() {
                g[a * q + c] = self.g[i * p + j];
            }
            b[a] = self.b[i];
        }
        GramSystem {
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
            g,
            b,
            n_rows: self.n_rows,
            y_ss: self.y_ss,
        }
    }

    /// Root-mean-square of column j, from the diagonal.
    pub fn rms(&self, j: usize) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        (self.g(j, j) / self.n_rows as f64).max(0.0).sqrt()
    }

    /// Residual sum of squares of a coefficient vector, computable without
    /// raw rows: y_ss - 2 b^T xi + xi^T G xi.
    pub fn sse(&self, xi: &[f64]) -> f64 {
        let p = self.p();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..p {
            lin += self.b[i] * xi[i];
            let mut gx = 0.0;
            for j in 0..p {
                gx += self.g[i * p + j] * xi[j];
            }
            quad += xi[i] * gx;
        }
        self.y_ss - 2.0 * lin + quad
    }

    /// Coefficient of determination of a solution against the accumulated
    /// target (no intercept; SS_tot = y_ss).
    pub fn r_squared(&self, xi: &[f64]) -> f64 {
        if self.y_ss == 0.0 {
            return 0.0;
        }
        1.0 - self.sse(xi) / self.y_ss
    }

    /// Pairs of columns whose correlation exceeds `1 - tol`; exact duplicates
    /// make the pair singular for unregularized solves.
    pub fn near_collinear_pairs(&self, tol: f64) -> Vec<(usize, usize)> {
        let p = self.p();
        let mut out = Vec::new();
        for i in 0..p {
            let di = self.g(i, i);
            if di <= 0.0 {
                continue;
            }
            for j in i + 1..p {
                let dj = self.g(j, j);
                if dj <= 0.0 {
                    continue;
                }
                let corr = self.g(i, j).abs() / (di * dj).sqrt();
                if corr >= 1.0 - tol {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Binary checkpoint: column names, row count, packed symmetric G, b and
    /// y_ss; round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.p() as u64).to_le_bytes())?;
        w.write_all(&self.n_rows.to_le_bytes())?;
        w.write_all(&self.y_ss.to_le_bytes())?;
        for name in &self.columns {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u64).to_le_bytes())?;
            w.write_all(bytes)?;
        }
        let p = self.p();
        for i in 0..p {
            for j in i..p {
                w.write_all(&self.g[i * p + j].to_le_bytes())?;
            }
        }
        for v in &self.b {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<GramSystem> {
        let mut r = CountingReader::new(BufReader::new(File::open(path)?), path);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Archive(format!(
                "{path:?} is not a gram checkpoint"
            )));
        }
        let version = r.read_u32()?;
        if version != VERSION_NUM {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION_NUM,
            });
        }
        let p = r.read_u64()? as usize;
        let n_rows = r.read_u64()?;
        let y_ss = r.read_f64()?;
        let mut columns = Vec::with_capacity(p);
        for _ in 0..p {
            let len = r.read_u64()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            columns.push(String::from_utf8(buf).map_err(|_| {
                Error::Archive("non-utf8 column name in checkpoint".into())
            })?);
        }
        let mut g = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let v = r.read_f64()?;
                g[i * p + j] = v;
                g[j * p + i] = v;
            }
        }
        let mut b = vec![0.0; p];
        for v in &mut b {
            *v = r.read_f64()?;
        }
        Ok(GramSystem {
            columns,
            g,
            b,
            n_rows,
            y_ss,
        })
    }
}

const MAGIC: &[u8; 4] = b"SGRM";
const VERSION_NUM: u32 = 1;
const VERSION: u32 = VERSION_NUM;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reader that tracks the byte offset for truncation diagnostics.
struct CountingReader<R> {
    inner: R,
    offset: u64,
    path: String,
}

impl<R: Read> CountingReader<R> {
    fn new(inner: R, path: &Path) -> Self {
        Self {
            inner,
            offset: 0,
            path: path.display().to_string(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|_| Error::Truncated {
            path: self.path.clone(),
            offset: self.offset,
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(rng: &mut impl Rng, rows: usize, p: usize) -> FeatureBatch {
        FeatureBatch {
            names: (0..p).map(|j| format!("c{j}")).collect(),
            columns: (0..p)
                .map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            y: (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    fn dense_gram(batch: &FeatureBatch) -> (Vec<Vec<f64>>, Vec<f64>) {
        let p = batch.p();
        let mut g = vec![vec![0.0; p]; p];
        let mut b = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                g[i][j] = dot(&batch.columns[i], &batch.columns[j]);
            }
            b[i] = dot(&batch.columns[i], &batch.y);
        }
        (g, b)
    }

    fn split(batch: &FeatureBatch, at: usize) -> (FeatureBatch, FeatureBatch) {
        let take = |lo: usize, hi: usize| FeatureBatch {
            names: batch.names.clone(),
            columns: batch.columns.iter().map(|c| c[lo..hi].to_vec()).collect(),
            y: batch.y[lo..hi].to_vec(),
        };
        (take(0, at), take(at, batch.rows()))
    }

    #[test]
    fn single_batch_matches_dense_products() {
        let mut rng = crate::rng::stream(1, 50, 0);
        let batch = random_batch(&mut rng, 40, 5);
        let mut gram = GramSystem::new(batch.names.clone());
        gram.accumulate(&batch).unwrap();
        let (g, b) = dense_gram(&batch);
        for i in 0..5 {
            for j in 0..5 {
                assert!((gram.g(i, j) - g[i][j]).abs() <= 1e-12 * g[i][j].abs().max(1.0));
            }
            assert!((gram.b()[i] - b[i]).abs() <= 1e-12);
        }
        assert_eq!(gram.n_rows(), 40);
    }

    #[test]
    fn two_batches_reproduce_unsplit_products() {
        let mut rng = crate::rng::stream(2, 50, 0);
        let batch = random_batch(&mut rng, 60, 4);
        let (a, b2) = split(&batch, 23);
        let mut whole = GramSystem::new(batch.names.clone());
        whole.accumulate(&batch).unwrap();
        let mut parts = GramSystem::new(batch.names.clone());
        parts.accumulate(&a).unwrap();
        parts.accumulate(&b2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let rel = (whole.g(i, j) - parts.g(i, j)).abs()
                    / whole.g(i, j).abs().max(1e-30);
                assert!(rel <= 1e-12, "G[{i}][{j}]");
            }
        }
        assert_eq!(whole.n_rows(), parts.n_rows());
    }

    #[test]
    fn empty_batch_leaves_gram_unchanged() {
        let names = vec!["a".to_string(), "b".to_string()];
        let mut gram = GramSystem::new(names.clone());
        let empty = FeatureBatch {
            names,
            columns: vec![vec![], vec![]],
            y: vec![],
        };
        let before = gram.clone();
        gram.accumulate(&empty).unwrap();
        assert_eq!(gram, before);
    }

    #[test]
    fn column_mismatch_is_an_error() {
        let mut gram = GramSystem::new(vec!["a".into()]);
        let batch = FeatureBatch {
            names: vec!["b".into()],
            columns: vec![vec![1.0]],
            y: vec![1.0],
        };
        assert!(matches!(
            gram.accumulate(&batch),
            Err(Error::ColumnMismatch(_))
        ));
    }

    #[test]
    fn gram_is_exactly_symmetric_and_psd() {
        let mut rng = crate::rng::stream(3, 50, 0);
        let batch = random_batch(&mut rng, 100, 8);
        let mut gram = GramSystem::new(batch.names.clone());
        gram.accumulate(&batch).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(gram.g(i, j), gram.g(j, i));
            }
        }
        // Monte-Carlo PSD check: z^T G z >= -tol for random z.
        for _ in 0..50 {
            let z: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut quad = 0.0;
            for i in 0..8 {
                for j in 0..8 {
                    quad += z[i] * gram.g(i, j) * z[j];
                }
            }
            assert!(quad >= -1e-10 * gram.g(0, 0).abs().max(1.0));
        }
    }

    #[test]
    fn submatrix_matches_restricted_accumulation() {
        let mut rng = crate::rng::stream(4, 50, 0);
        let batch = random_batch(&mut rng, 30, 6);
        let mut full = GramSystem::new(batch.names.clone());
        full.accumulate(&batch).unwrap();
        let idx = [1usize, 3, 4];
        let sub = full.submatrix(&idx);
        let restricted = FeatureBatch {
            names: idx.iter().map(|&i| batch.names[i].clone()).collect(),
            columns: idx.iter().map(|&i| batch.columns[i].clone()).collect(),
            y: batch.y.clone(),
        };
        let mut direct = GramSystem::new(restricted.names.clone());
        direct.accumulate(&restricted).unwrap();
        assert_eq!(sub, direct);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let mut rng = crate::rng::stream(5, 50, 0);
        let batch = random_batch(&mut rng, 25, 3);
        let mut gram = GramSystem::new(batch.names.clone());
        gram.accumulate(&batch).unwrap();
        let dir = std::env::temp_dir().join("sindy1d_gram_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ck.bin");
        gram.save(&path).unwrap();
        let loaded = GramSystem::load(&path).unwrap();
        assert_eq!(gram, loaded);

        // Truncated file reports the byte offset.
        let bytes = std::fs::read(&path).unwrap();
        let cut = path.with_extension("cut");
        std::fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
        match GramSystem::load(&cut) {
            Err(Error::Truncated { offset, .. }) => assert!(offset > 0),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn collinear_columns_are_detected() {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let col: Vec<f64> = (0..50).map(|i| (i as f64 * 0.1).sin()).collect();
        let scaled: Vec<f64> = col.iter().map(|v| 3.0 * v).collect();
        let other: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).cos()).collect();
        let batch = FeatureBatch {
            names: names.clone(),
            columns: vec![col, scaled, other],
            y: vec![0.0; 50],
        };
        let mut gram = GramSystem::new(names);
        gram.accumulate(&batch).unwrap();
        let pairs = gram.near_collinear_pairs(1e-10);
        assert_eq!(pairs, vec![(0, 1)]);
    }
}
