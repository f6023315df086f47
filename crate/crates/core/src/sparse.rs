//! Compressed sparse row storage for the symmetric finite element matrices.

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored in CSR form with both triangles present.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds the matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in insertion order, so mirrored contributions
    /// produce bitwise identical `(i, j)` and `(j, i)` entries.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < dim && j < dim);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Row sums `A * 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// True if every stored entry equals its transposed entry bitwise.
    pub fn is_exactly_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| self.get(j, i).to_bits() == v.to_bits()))
    }

    /// Principal submatrix on `indices` (which must be strictly increasing).
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<SparseSymMatrix> {
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&i| i >= self.dim) {
            return Err(Error::InvalidArgument(
                "submatrix indices must be increasing and in range".into(),
            ));
        }
        let mut map = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            map[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &i) in indices.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    triplets.push((k, map[j], v));
                }
            }
        }
        Ok(SparseSymMatrix::from_triplets(indices.len(), triplets))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = SparseSymMatrix::from_triplets(
            3,
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (0, 0, 3.0), (2, 2, 5.0)],
        );
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![6.0, 2.0, 5.0]);
        assert!(a.is_exactly_symmetric());
    }

    #[test]
    fn submatrix_keeps_entries() {
        let a = SparseSymMatrix::from_triplets(
            3,
            vec![(0, 0, 2.0), (0, 2, -1.0), (2, 0, -1.0), (1, 1, 3.0), (2, 2, 4.0)],
        );
        let s = a.principal_submatrix(&[0, 2]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(s.get(1, 1), 4.0);
        assert!(a.principal_submatrix(&[2, 0]).is_err());
    }
}
