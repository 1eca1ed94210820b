use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, UpliftError};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return invalid(format!(
                "matrix data has {} values, expected {}x{}",
                data.len(),
                n_rows,
                n_cols
            ));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, data: vec![0.0; n_rows * n_cols] }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(UpliftError::Row {
                    row: i,
                    message: format!("expected {} columns, got {}", n_cols, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n_rows: rows.len(), n_cols, data })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self { n_rows: values.len(), n_cols: 1, data: values.to_vec() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { n_rows: idx.len(), n_cols: self.n_cols, data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Self { n_rows: self.n_rows, n_cols: cols.len(), data }
    }

    /// Copy with `values` appended as a new last column.
    pub fn with_column(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_rows {
            return invalid(format!(
                "appended column has {} values, matrix has {} rows",
                values.len(),
                self.n_rows
            ));
        }
        let mut data = Vec::with_capacity(self.n_rows * (self.n_cols + 1));
        for (i, v) in values.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(*v);
        }
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols + 1, data })
    }

    /// Copy with every row extended by the constant `value`.
    pub fn with_constant_column(&self, value: f64) -> Self {
        let mut data = Vec::with_capacity(self.n_rows * (self.n_cols + 1));
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.push(value);
        }
        Self { n_rows: self.n_rows, n_cols: self.n_cols + 1, data }
    }

    pub(crate) fn check_cols(&self, expected: usize) -> Result<()> {
        if self.n_cols != expected {
            return Err(UpliftError::DimensionMismatch { expected, got: self.n_cols });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_ops() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.column(1), vec![2.0, 4.0]);
        let m2 = m.with_column(&[5.0, 6.0]).unwrap();
        assert_eq!(m2.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(m.with_constant_column(1.0).row(0), &[1.0, 2.0, 1.0]);
        assert_eq!(m.select_rows(&[1]).row(0), &[3.0, 4.0]);
        assert_eq!(m.select_columns(&[1]).as_slice(), &[2.0, 4.0]);
        assert_eq!(m.rows().count(), 2);
        assert!(m.with_column(&[1.0]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
