//! Compressed sparse row matrices and their on-disk formats.
//!
//! Two interchangeable file formats are supported:
//!
//! * text coordinate: header `n_rows n_cols nnz`, then one `i j value` line
//!   per stored entry in row-major order;
//! * binary: magic `PPMI`, three little-endian `u64` (`n_rows`, `n_cols`,
//!   `nnz`), then `row_offsets` (`n_rows + 1` x `u64`), `col_indices`
//!   (`nnz` x `u64`) and `values` (`nnz` x `f64`).
//!
//! [`SparseMatrix::load`] picks the format from the leading magic bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"PPMI";

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::Consistency(format!(
                "row_offsets must have {} entries starting at 0",
                n_rows + 1
            )));
        }
        let nnz = *row_offsets.last().unwrap();
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::Consistency(format!(
                "nnz {nnz} disagrees with {} indices / {} values",
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..n_rows {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(Error::Consistency(format!("row_offsets decrease at row {i}")));
            }
            let cols = &col_indices[a..b];
            if cols.iter().any(|&j| j >= n_cols) {
                return Err(Error::Consistency(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Consistency(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("non-finite value at entry {k}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros are not stored.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(i, j, _)) = t.iter().find(|&&(i, j, _)| i >= n_rows || j >= n_cols) {
            return Err(Error::Argument(format!(
                "entry ({i}, {j}) outside {n_rows}x{n_cols}"
            )));
        }
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (i, j) => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        let mut row_offsets = vec![0usize; n_rows + 1];
        for &(i, _, _) in &merged {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let (col_indices, values) = merged.into_iter().map(|(_, j, v)| (j, v)).unzip();
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    /// Stores every non-zero entry of a dense matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_dense_with(m, |v| v != 0.0)
    }

    /// Stores every entry of a dense matrix, zeros included.
    pub fn from_dense_full(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_dense_with(m, |_| true)
    }

    fn from_dense_with(m: &DMatrix<f64>, keep: impl Fn(f64) -> bool) -> Result<Self> {
        let (r, c) = m.shape();
        let mut row_offsets = Vec::with_capacity(r + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..r {
            for j in 0..c {
                let v = m[(i, j)];
                if keep(v) {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::new(r, c, row_offsets, col_indices, values)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        match self.col_indices[a..b].binary_search(&j) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Sum of stored values divided by `n_rows * n_cols`.
    pub fn mean(&self) -> f64 {
        let cells = (self.n_rows * self.n_cols) as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.values.iter().sum::<f64>() / cells
        }
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let k = next[j];
            col_indices[k] = i;
            values[k] = v;
            next[j] += 1;
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.iter().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// `A * x` for a vector `x` of length `n_cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "mul_vec: dimension mismatch");
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `A * x` for a dense matrix `x` with `n_cols` rows.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n_cols, "mul_dense: inner dimension mismatch");
        let k = x.ncols();
        // columns of xt are rows of x, contiguous in memory
        let xt = x.transpose();
        let mut out_t = DMatrix::<f64>::zeros(k, self.n_rows);
        if k > 0 {
            out_t
                .as_mut_slice()
                .par_chunks_mut(k)
                .enumerate()
                .for_each(|(i, out)| {
                    for (j, v) in self.row(i) {
                        let src = &xt.as_slice()[j * k..(j + 1) * k];
                        for (o, s) in out.iter_mut().zip(src) {
                            *o += v * s;
                        }
                    }
                });
        }
        out_t.transpose()
    }

    /// `y * A` for a dense matrix `y` with `n_rows` columns.
    pub fn left_mul_dense(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(y.ncols(), self.n_rows, "left_mul_dense: inner dimension mismatch");
        self.transpose().mul_dense(&y.transpose()).transpose()
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut buf = String::new();
        writeln!(buf, "{} {} {}", self.n_rows, self.n_cols, self.nnz()).unwrap();
        for (i, j, v) in self.iter() {
            // `{:?}` prints the shortest representation that round-trips
            writeln!(buf, "{i} {j} {v:?}").unwrap();
            if buf.len() > 1 << 16 {
                w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
                buf.clear();
            }
        }
        w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(28 + 8 * (self.n_rows + 1 + 2 * self.nnz()));
        bytes.extend_from_slice(BINARY_MAGIC);
        for h in [self.n_rows, self.n_cols, self.nnz()] {
            bytes.extend_from_slice(&(h as u64).to_le_bytes());
        }
        for &o in &self.row_offsets {
            bytes.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &j in &self.col_indices {
            bytes.extend_from_slice(&(j as u64).to_le_bytes());
        }
        for &v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads either format, detected by the `PPMI` magic.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let what = path.display().to_string();
        if bytes.starts_with(BINARY_MAGIC) {
            Self::decode_binary(&bytes, &what)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::parse(&what, 1, "neither binary magic nor UTF-8 text"))?;
            Self::parse_text(&text, &what)
        }
    }

    fn decode_binary(bytes: &[u8], what: &str) -> Result<Self> {
        let mut pos = 4;
        let mut next_u64 = |field: &str| -> Result<u64> {
            let chunk = bytes
                .get(pos..pos + 8)
                .ok_or_else(|| Error::parse(what, 0, format!("truncated while reading {field}")))?;
            pos += 8;
            Ok(u64::from_le_bytes(chunk.try_into().unwrap()))
        };
        let n_rows = next_u64("header")? as usize;
        let n_cols = next_u64("header")? as usize;
        let nnz = next_u64("header")? as usize;
        let expected = 28 + 8 * (n_rows + 1 + 2 * nnz);
        if bytes.len() != expected {
            return Err(Error::parse(
                what,
                0,
                format!("binary size {} but header implies {expected}", bytes.len()),
            ));
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        for _ in 0..=n_rows {
            row_offsets.push(next_u64("row_offsets")? as usize);
        }
        let mut col_indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            col_indices.push(next_u64("col_indices")? as usize);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            values.push(f64::from_bits(next_u64("values")?));
        }
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    fn parse_text(text: &str, what: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(what, 1, "missing header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(what, 1, "header must be `n_rows n_cols nnz`"))?;
        let [n_rows, n_cols, nnz] = h[..] else {
            return Err(Error::parse(what, 1, "header must be `n_rows n_cols nnz`"));
        };
        let mut triplets = Vec::with_capacity(nnz);
        for (k, line) in lines {
            let mut it = line.split_whitespace();
            let bad = || Error::parse(what, k + 1, "expected `i j value`");
            let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let j: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            if i >= n_rows || j >= n_cols {
                return Err(Error::parse(what, k + 1, format!("entry ({i}, {j}) out of range")));
            }
            triplets.push((i, j, v));
        }
        if triplets.len() != nnz {
            return Err(Error::parse(
                what,
                1,
                format!("header declares {nnz} entries but {} found", triplets.len()),
            ));
        }
        // explicit zeros are legal in the file format; keep them
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        if triplets.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::parse(what, 1, "duplicate entries"));
        }
        let mut row_offsets = vec![0usize; n_rows + 1];
        for &(i, _, _) in &triplets {
            row_offsets[i + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let (col_indices, values) = triplets.into_iter().map(|(_, j, v)| (j, v)).unzip();
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }
}
