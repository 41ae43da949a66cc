use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LelaError, Result};
use crate::linalg::{DenseMatrix, LinearOperator};

/// One observed entry with its inverse-probability weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub weight: f64,
}

impl Sample {
    /// Entry of R_Ω(M): `weight * value`.
    #[inline]
    pub fn reweighted(&self) -> f64 {
        self.weight * self.value
    }
}

/// The observed set Ω sorted by `(i, j)`, with row and column
/// adjacency for per-row/per-column least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    d: usize,
    entries: Vec<Sample>,
    row_ptr: Vec<usize>,
    col_ptr: Vec<usize>,
    col_perm: Vec<usize>,
}

impl SampleSet {
    /// Validates indices, weights and uniqueness, then sorts and indexes.
    pub fn from_entries(n: usize, d: usize, mut entries: Vec<Sample>) -> Result<Self> {
        for e in &entries {
            if e.i >= n || e.j >= d {
                return Err(LelaError::param(format!("sample ({}, {}) outside {n}x{d}", e.i, e.j)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) || !e.value.is_finite() {
                return Err(LelaError::param(format!("sample ({}, {}) has invalid value/weight", e.i, e.j)));
            }
        }
        entries.sort_unstable_by_key(|e| (e.i, e.j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(LelaError::param(format!("duplicate sample ({}, {})", w[0].i, w[0].j)));
        }
        Ok(Self::from_sorted_unchecked(n, d, entries))
    }

    /// `entries` must already be sorted by `(i, j)` and duplicate free.
    pub(crate) fn from_sorted_unchecked(n: usize, d: usize, entries: Vec<Sample>) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].i, w[0].j) < (w[1].i, w[1].j)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_count = vec![0usize; d + 1];
        for e in &entries {
            row_ptr[e.i + 1] += 1;
            col_count[e.j + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..d {
            col_count[j + 1] += col_count[j];
        }
        let col_ptr = col_count.clone();
        let mut fill = col_count;
        let mut col_perm = vec![0usize; entries.len()];
        for (pos, e) in entries.iter().enumerate() {
            col_perm[fill[e.j]] = pos;
            fill[e.j] += 1;
        }
        Self { n, d, entries, row_ptr, col_ptr, col_perm }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    /// Entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[Sample] {
        &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Positions into [`entries`](Self::entries) of the samples in column `j`,
    /// sorted by row.
    pub fn col_positions(&self, j: usize) -> &[usize] {
        &self.col_perm[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = &Sample> + '_ {
        self.col_positions(j).iter().map(move |&p| &self.entries[p])
    }

    /// Rows without any sample.
    pub fn unobserved_rows(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.row_ptr[i] == self.row_ptr[i + 1]).collect()
    }

    pub fn unobserved_cols(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| self.col_ptr[j] == self.col_ptr[j + 1]).collect()
    }

    /// Distinct columns touched, ascending.
    pub fn touched_cols(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| self.col_ptr[j] < self.col_ptr[j + 1]).collect()
    }

    /// Subset of the entries selected by `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Sample) -> bool) -> Self {
        let entries = self.entries.iter().enumerate().filter(|(p, e)| keep(*p, e)).map(|(_, e)| *e).collect();
        Self::from_sorted_unchecked(self.n, self.d, entries)
    }

    /// Same pattern and weights with values mapped by `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let entries = self.entries.iter().map(|e| Sample { value: f(e.value), ..*e }).collect();
        Self::from_sorted_unchecked(self.n, self.d, entries)
    }

    /// Transposed sample set (rows and columns swapped).
    pub fn transpose(&self) -> Self {
        let mut entries: Vec<Sample> = self.entries.iter().map(|e| Sample { i: e.j, j: e.i, ..*e }).collect();
        entries.sort_unstable_by_key(|e| (e.i, e.j));
        Self::from_sorted_unchecked(self.d, self.n, entries)
    }

    /// Dense R_Ω(M); tests and small instances only.
    pub fn reweighted_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.d);
        for e in &self.entries {
            m.set(e.i, e.j, e.reweighted());
        }
        m
    }

    /// Text form: header `%lela-samples n d count`, then `i j value weight`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * self.entries.len() + 32);
        let _ = writeln!(s, "%lela-samples {} {} {}", self.n, self.d, self.entries.len());
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {:e} {:e}", e.i, e.j, e.value, e.weight);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| LelaError::Parse("empty sample file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "%lela-samples" {
            return Err(LelaError::Parse(format!("bad sample header: {header}")));
        }
        let p = |t: &str| t.parse::<usize>().map_err(|_| LelaError::Parse(format!("bad header field {t}")));
        let (n, d, count) = (p(h[1])?, p(h[2])?, p(h[3])?);
        let mut entries = Vec::with_capacity(count);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(LelaError::Parse(format!("bad sample line: {line}")));
            }
            let bad = |t: &str| LelaError::Parse(format!("bad sample field {t}"));
            entries.push(Sample {
                i: f[0].parse().map_err(|_| bad(f[0]))?,
                j: f[1].parse().map_err(|_| bad(f[1]))?,
                value: f[2].parse().map_err(|_| bad(f[2]))?,
                weight: f[3].parse().map_err(|_| bad(f[3]))?,
            });
        }
        if entries.len() != count {
            return Err(LelaError::Parse(format!("header says {count} samples, found {}", entries.len())));
        }
        Self::from_entries(n, d, entries)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// The sample set acts as the sparse operator R_Ω(M).
impl LinearOperator for SampleSet {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.d
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.entries {
            y[e.i] += e.reweighted() * x[e.j];
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.entries {
            y[e.j] += e.reweighted() * x[e.i];
        }
    }

    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix {
        let k = x.ncols();
        let xt = x.transpose();
        let mut out = vec![0.0; self.n * k];
        for e in &self.entries {
            let a = e.reweighted();
            let src = xt.col(e.j);
            let dst = &mut out[e.i * k..(e.i + 1) * k];
            dst.iter_mut().zip(src).for_each(|(o, s)| *o += a * s);
        }
        DenseMatrix::from_col_major_unchecked(k, self.n, out).transpose()
    }

    fn apply_t_block(&self, x: &DenseMatrix) -> DenseMatrix {
        let k = x.ncols();
        let xt = x.transpose();
        let mut out = vec![0.0; self.d * k];
        for e in &self.entries {
            let a = e.reweighted();
            let src = xt.col(e.i);
            let dst = &mut out[e.j * k..(e.j + 1) * k];
            dst.iter_mut().zip(src).for_each(|(o, s)| *o += a * s);
        }
        DenseMatrix::from_col_major_unchecked(k, self.d, out).transpose()
    }
}
