//! Compressed-row sparse matrices with the handful of operations the
//! assembly and time stepping need.
//!
//! Matrices are built from coordinate triplets through [`TripletBuilder`];
//! duplicates are summed and exact zeros dropped when the builder is
//! finalized, so a finished [`SparseMatrix`] never holds repeated
//! coordinates.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Adds `value` at `(row, col)`. Panics on out-of-range coordinates,
    /// which always indicate an assembly bug.
    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.rows && col < self.cols,
            "triplet ({row},{col}) outside {}x{}",
            self.rows,
            self.cols
        );
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Adds every stored entry of `m`, shifted by the given offsets.
    pub fn push_block(&mut self, row0: usize, col0: usize, m: &SparseMatrix) {
        for (r, c, v) in m.iter() {
            self.push(row0 + r, col0 + c, v);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        // Stable sort keeps the summation order of duplicates fixed.
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        let m = SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        };
        m.pruned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }

    pub fn from_dense_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut b = TripletBuilder::new(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b.push(i, j, v);
            }
        }
        b.build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn pruned(mut self) -> Self {
        if self.values.iter().all(|v| *v != 0.0) {
            return self;
        }
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
        self
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match span.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.values[self.indptr[r]..self.indptr[r + 1]].iter().sum()
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        self.indptr[r] == self.indptr[r + 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    /// `y += alpha * A x`
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr += alpha * acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.cols, self.rows, self.nnz());
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.build()
    }

    /// `diag(d) * A`
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.rows);
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out.pruned()
    }

    /// `A * diag(d)`
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= d[out.indices[k]];
        }
        out.pruned()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out.pruned()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz() + other.nnz());
        for (r, c, v) in self.iter().chain(other.iter()) {
            b.push(r, c, v);
        }
        Ok(b.build())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut b = TripletBuilder::new(self.rows, other.cols);
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, v) in other.row(k) {
                    b.push(r, c, a * v);
                }
            }
        }
        Ok(b.build())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut b = TripletBuilder::with_capacity(
            self.rows * other.rows,
            self.cols * other.cols,
            self.nnz() * other.nnz(),
        );
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                b.push(r1 * other.rows + r2, c1 * other.cols + c2, v1 * v2);
            }
        }
        b.build()
    }

    /// Keeps only the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut b = TripletBuilder::new(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                b.push(i, c, v);
            }
        }
        b.build()
    }

    /// Zeroes every row whose flag is false.
    pub fn mask_rows(&self, keep: &[bool]) -> Self {
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (r, c, v) in self.iter() {
            if keep[r] {
                b.push(r, c, v);
            }
        }
        b.build()
    }

    /// Zeroes every column whose flag is false.
    pub fn mask_cols(&self, keep: &[bool]) -> Self {
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (r, c, v) in self.iter() {
            if keep[c] {
                b.push(r, c, v);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Max-abs entrywise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.add(&other.scaled(-1.0)).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    /// Writes `row col value` lines with 17 significant digits. The first
    /// line is a `# rows cols nnz` header.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty triplet file".into()))??;
        let dims: Vec<usize> = header
            .trim_start_matches('#')
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad triplet header `{header}`: {e}")))?;
        if dims.len() != 3 {
            return Err(Error::Parse(format!("bad triplet header `{header}`")));
        }
        let mut b = TripletBuilder::with_capacity(dims[0], dims[1], dims[2]);
        for line in lines {
            let line = line?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("bad triplet line `{line}`")));
            }
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("bad triplet line `{line}`: {e}"));
            let r: usize = parts[0].parse().map_err(|e| bad(&e))?;
            let c: usize = parts[1].parse().map_err(|e| bad(&e))?;
            let v: f64 = parts[2].parse().map_err(|e| bad(&e))?;
            b.push(r, c, v);
        }
        Ok(b.build())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `aᵀ diag(w) b`
pub fn weighted_dot(a: &[f64], w: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(w).zip(b).map(|((x, p), y)| x * p * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 1.5);
        b.push(0, 1, -1.5);
        b.push(1, 0, 2.0);
        b.push(1, 0, 1.0);
        let m = b.build();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn kron_matches_dense() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]], 2);
        let b = SparseMatrix::from_dense_rows(&[vec![0.0, 1.0, -1.0]], 3);
        let k = a.kron(&b).to_dense();
        assert_eq!(k.shape(), (2, 6));
        assert_eq!(k[(0, 1)], 1.0);
        assert_eq!(k[(0, 5)], -2.0);
        assert_eq!(k[(1, 4)], 3.0);
        assert_eq!(k[(1, 1)], 0.0);
    }

    #[test]
    fn triplet_text_round_trip_is_exact() {
        let m = SparseMatrix::from_dense_rows(
            &[vec![1.0 / 3.0, 0.0], vec![-2.0e-17, std::f64::consts::PI]],
            2,
        );
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let back = SparseMatrix::read_triplets(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn transpose_and_matmul_agree_with_dense() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 4.0]], 3);
        let at = a.transpose();
        let p = a.matmul(&at).unwrap().to_dense();
        let dense = a.to_dense() * a.to_dense().transpose();
        assert_eq!(p, dense);
    }
}
