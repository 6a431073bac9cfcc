//! Compressed sparse column storage for complex matrices, a minimum-degree
//! ordering and a threshold-pivoting LU factorization.

mod lu;
mod ordering;

pub use lu::{LuFactors, LuOptions};
pub use ordering::minimum_degree;

use num_complex::Complex64;
use std::io::Write;

/// Sparse complex matrix in compressed column form.
///
/// Row indices are sorted within each column and no explicit zeros are
/// stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut bucket: Vec<(usize, Complex64)> = vec![(0, Complex64::new(0.0, 0.0)); triplets.len()];
        for &(i, j, v) in triplets {
            bucket[next[j]] = (i, v);
            next[j] += 1;
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        for j in 0..ncols {
            let col = &mut bucket[counts[j]..counts[j + 1]];
            col.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < col.len() {
                let row = col[k].0;
                let mut sum = col[k].1;
                k += 1;
                while k < col.len() && col[k].0 == row {
                    sum += col[k].1;
                    k += 1;
                }
                if sum.re != 0.0 || sum.im != 0.0 {
                    row_idx.push(row);
                    values.push(sum);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseMatrix { nrows, ncols, col_ptr, row_idx, values }
    }

    /// Dense row-major input; zeros are skipped.
    pub fn from_dense(rows: &[Vec<Complex64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let trips: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .filter(|&(_, _, v)| v.re != 0.0 || v.im != 0.0)
            .collect();
        Self::from_triplets(nrows, ncols, &trips)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[Complex64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// All stored entries as `(row, col, value)`, column by column.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let trips: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trips)
    }

    pub fn conj(&self) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparseMatrix {
        self.transpose().conj()
    }

    pub fn scale(&self, alpha: Complex64) -> SparseMatrix {
        let trips: Vec<_> = self.iter().map(|(i, j, v)| (i, j, v * alpha)).collect();
        Self::from_triplets(self.nrows, self.ncols, &trips)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`, over the union pattern.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trips: Vec<_> = self
            .iter()
            .chain(other.iter().map(|(i, j, v)| (i, j, -v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trips).max_abs()
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && self.iter().all(|(i, j, _)| {
                let (rows, _) = self.col(i);
                rows.binary_search(&j).is_ok()
            })
    }

    /// Sorted adjacency lists of the symmetrized pattern `A + Aᵀ`,
    /// diagonal excluded.
    pub fn symmetric_pattern(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.nrows, self.ncols);
        let mut adj = vec![Vec::new(); self.ncols];
        for (i, j, _) in self.iter() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Upper-triangular nonzero count of the symmetrized pattern, diagonal
    /// included.
    pub fn upper_nnz(&self) -> usize {
        let off: usize = self.symmetric_pattern().iter().map(|a| a.len()).sum::<usize>() / 2;
        off + self.ncols
    }

    /// Rows of `self` followed by rows of `below`.
    pub fn vstack(&self, below: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, below.ncols, "vstack column mismatch");
        let mut t: Vec<_> = self.iter().collect();
        t.extend(below.iter().map(|(i, j, v)| (i + self.nrows, j, v)));
        SparseMatrix::from_triplets(self.nrows + below.nrows, self.ncols, &t)
    }

    /// Writes `row col re im` lines, 0-based, with a `%` header carrying
    /// the dimensions.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(out, "{} {} {:.17e} {:.17e}", i, j, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Accumulates `(row, col, value)` entries before compression.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries.push((i, j, v));
    }

    /// Adds every entry of `m` shifted by `(row_off, col_off)`, mapped through `f`.
    pub fn push_block(
        &mut self,
        m: &SparseMatrix,
        row_off: usize,
        col_off: usize,
        f: impl Fn(Complex64) -> Complex64,
    ) {
        for (i, j, v) in m.iter() {
            self.entries.push((i + row_off, j + col_off, f(v)));
        }
    }

    /// Same as [`push_block`](Self::push_block) but transposed.
    pub fn push_block_transposed(
        &mut self,
        m: &SparseMatrix,
        row_off: usize,
        col_off: usize,
        f: impl Fn(Complex64) -> Complex64,
    ) {
        for (i, j, v) in m.iter() {
            self.entries.push((j + row_off, i + col_off, f(v)));
        }
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}
