//! Compressed sparse row storage and the vector primitives built on it.

mod market;

pub use market::{parse_matrix_market, read_matrix_market};

use crate::error::{Error, Result};

/// One `(row, col, value)` entry used to assemble a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

impl From<(usize, usize, f64)> for Triplet {
    fn from((row, col, value): (usize, usize, f64)) -> Self {
        Self { row, col, value }
    }
}

/// Square sparse matrix in row-major compressed form.
///
/// Column indices are strictly increasing within each row. Explicit zeros are
/// part of the pattern and are never dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if row_ptr.len() != n + 1 {
            return Err(Error::LengthMismatch {
                expected: n + 1,
                found: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: col_idx.len(),
                found: values.len(),
            });
        }
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(Error::InvalidConfig(format!(
                "row_ptr must start at 0 and end at nnz ({})",
                col_idx.len()
            )));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidConfig(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n {
                    return Err(Error::IndexOutOfRange { row: i, col: c, n });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidConfig(format!(
                        "columns of row {i} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles a matrix from triplets: entries are sorted by column within
    /// each row and duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[Triplet]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut counts = vec![0usize; n + 1];
        for t in triplets {
            if t.row >= n || t.col >= n {
                return Err(Error::IndexOutOfRange {
                    row: t.row,
                    col: t.col,
                    n,
                });
            }
            counts[t.row + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for t in triplets {
            let p = next[t.row];
            cols[p] = t.col;
            vals[p] = t.value;
            next[t.row] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            // stable sort keeps duplicate summation in input order
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let t: Vec<Triplet> = (0..n).map(|i| Triplet::new(i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    /// Builds a matrix from a dense row-major array, keeping only nonzeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn to_triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| Triplet::new(i, c, v)));
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i][c] = v;
            }
        }
        d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Value at `(i, j)`, zero when the position is outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Returns a copy with the same pattern and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(Error::LengthMismatch {
                expected: self.nnz(),
                found: values.len(),
            });
        }
        Ok(Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        })
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                col_idx[p] = i;
                values[p] = v;
                next[c] += 1;
            }
        }
        Self {
            n,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
        Ok(())
    }

    /// Residual `b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let ax = self.spmv(x)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    }

    /// Componentwise backward error `max_i |b - Ax|_i / (|A||x| + |b|)_i`,
    /// taking `0/0` as zero.
    pub fn backward_error(&self, x: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        self.check_len(b.len())?;
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut ax = 0.0;
            let mut scale = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                ax += v * x[c];
                scale += (v * x[c]).abs();
            }
            let num = (b[i] - ax).abs();
            let den = scale + b[i].abs();
            let e = if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            };
            worst = worst.max(e);
        }
        Ok(worst)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(r: usize, c: usize, v: f64) -> Triplet {
        Triplet::new(r, c, v)
    }

    #[test]
    fn identity_from_triplets() {
        let a = CsrMatrix::from_triplets(2, &[t(0, 0, 1.0), t(1, 1, 1.0)]).unwrap();
        assert_eq!(a.row_ptr(), &[0, 1, 2]);
        assert_eq!(a.col_idx(), &[0, 1]);
        assert_eq!(a.values(), &[1.0, 1.0]);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(1, &[t(0, 0, 1.0), t(0, 0, 2.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.values(), &[3.0]);
    }

    #[test]
    fn columns_are_sorted() {
        let a = CsrMatrix::from_triplets(2, &[t(0, 1, 5.0), t(0, 0, 4.0)]).unwrap();
        assert_eq!(a.row(0), (&[0usize, 1][..], &[4.0, 5.0][..]));
    }

    #[test]
    fn assembly_errors() {
        assert!(matches!(
            CsrMatrix::from_triplets(2, &[t(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(CsrMatrix::from_triplets(0, &[]), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn explicit_zeros_stay_in_pattern() {
        let a = CsrMatrix::from_triplets(2, &[t(0, 0, 1.0), t(0, 1, 0.0), t(1, 1, 1.0)]).unwrap();
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn spmv_examples() {
        let i = CsrMatrix::identity(2).unwrap();
        assert_eq!(i.spmv(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let d = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        assert_eq!(d.spmv(&[1.0, 1.0]).unwrap(), vec![2.0, 4.0]);
        let a = CsrMatrix::from_dense(&[vec![4.0, 3.0], vec![6.0, 3.0]]).unwrap();
        assert_eq!(a.spmv(&[1.0, 2.0]).unwrap(), vec![10.0, 12.0]);
        assert!(matches!(a.spmv(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn backward_error_examples() {
        let i = CsrMatrix::identity(2).unwrap();
        assert_eq!(i.backward_error(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        let i1 = CsrMatrix::identity(1).unwrap();
        let e = i1.backward_error(&[1.0], &[2.0]).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-16);
        assert!(i.backward_error(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn transpose_twice_is_identity() {
        let a = CsrMatrix::from_dense(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 3.0, 0.0],
            vec![4.0, 5.0, 6.0],
        ])
        .unwrap();
        assert_eq!(a.transpose().get(2, 0), 2.0);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn new_rejects_unsorted_rows() {
        assert!(CsrMatrix::new(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(2, vec![0, 1, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }
}
