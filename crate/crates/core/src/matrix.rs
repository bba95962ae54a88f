//! Column-major numeric matrix.
//!
//! Missing values are stored as `f64::NAN`; every consumer in this crate
//! treats NaN as "missing", never as a comparable number.

use serde::{Deserialize, Serialize};

/// Dense column-major matrix of `f64`.
///
/// Column-major storage keeps split search (which scans one feature at a
/// time) cache-friendly; row access is strided but cheap at the sizes this
/// crate works with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    /// Length `n_rows * n_cols`, column `c` occupying `data[c*n_rows..(c+1)*n_rows]`.
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    /// Build from row slices. All rows must share one width.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == n_cols));
        let mut m = Matrix::zeros(n_rows, n_cols);
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n_rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.n_rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols).map(|c| self.get(row, c)).collect()
    }

    /// Append a column; its length must equal `n_rows`.
    pub fn push_column(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.n_rows);
        self.data.extend_from_slice(col);
        self.n_cols += 1;
    }

    /// New matrix containing the given rows (in the order listed).
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.n_cols);
        for c in 0..self.n_cols {
            let src = self.column(c);
            for (r, &i) in rows.iter().enumerate() {
                out.data[c * rows.len() + r] = src[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_round_trips() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 3);
        assert_eq!(m.row(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(m.column(1), &[2.0, 5.0]);
    }

    #[test]
    fn push_column_and_select_rows() {
        let mut m = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        m.push_column(&[7.0, 8.0, 9.0]);
        assert_eq!(m.n_cols(), 2);
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), vec![3.0, 9.0]);
        assert_eq!(s.row(1), vec![1.0, 7.0]);
    }

    #[test]
    fn nan_markers_survive_storage() {
        let m = Matrix::from_rows(&[vec![f64::NAN, 1.0]]);
        assert!(m.get(0, 0).is_nan());
        assert_eq!(m.get(0, 1), 1.0);
    }
}
