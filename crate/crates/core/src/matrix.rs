//! Row-major sample matrices: one sample per row.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Slack allowed on the unit-ball check so that samples sitting exactly on
/// the boundary after rescaling still pass.
const BALL_SLACK: f64 = 1e-9;

/// An `n x d` matrix of samples, one row per sample.
///
/// Rows of the toy pipeline are expected to satisfy `‖x‖₂ ≤ 1`; construct
/// with [`SampleMatrix::new_in_ball`] to enforce that, or with
/// [`SampleMatrix::new`] to skip the check (ingested external embeddings may
/// violate it, in which case discrepancy values are reported unnormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Build from row-major data, checking only finiteness and shape.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptySample);
        }
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(data.len(), rows * cols));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(SampleMatrix { rows, cols, data })
    }

    /// Build from row-major data, additionally enforcing `‖x‖₂ ≤ 1` per row.
    pub fn new_in_ball(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let m = SampleMatrix::new(rows, cols, data)?;
        for i in 0..m.rows {
            let norm = m.row_norm(i);
            if norm > 1.0 + BALL_SLACK {
                return Err(Error::OutsideUnitBall { row: i, norm });
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimMismatch(r.len(), cols));
            }
            data.extend_from_slice(r);
        }
        SampleMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        libm::sqrt(self.row(i).iter().map(|x| x * x).sum::<f64>())
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows).map(|i| self.row_norm(i)).fold(0.0, f64::max)
    }

    /// Every entry multiplied by `c`; a fixed global scale, so second-moment
    /// structure is preserved up to `c²`.
    pub fn scaled(&self, c: f64) -> SampleMatrix {
        SampleMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Row-wise product with a column vector: `X v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimMismatch(v.len(), self.cols));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(x, w)| x * w).sum())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty() {
        assert_eq!(SampleMatrix::new(0, 2, Vec::new()), Err(Error::EmptySample));
        assert_eq!(SampleMatrix::new(2, 0, Vec::new()), Err(Error::EmptySample));
    }

    #[test]
    fn rejects_non_finite() {
        let r = SampleMatrix::new(1, 2, alloc::vec![0.0, f64::NAN]);
        assert_eq!(r, Err(Error::NonFinite));
    }

    #[test]
    fn ball_check_flags_long_rows() {
        let ok = SampleMatrix::new_in_ball(1, 2, alloc::vec![0.6, 0.8]);
        assert!(ok.is_ok());
        let bad = SampleMatrix::new_in_ball(1, 2, alloc::vec![1.0, 0.1]);
        assert!(matches!(bad, Err(Error::OutsideUnitBall { row: 0, .. })));
        // the plain constructor accepts the same row
        assert!(SampleMatrix::new(1, 2, alloc::vec![1.0, 0.1]).is_ok());
    }

    #[test]
    fn scaling_is_global() {
        let x = SampleMatrix::new(2, 2, alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = x.scaled(0.5);
        assert_eq!(y.data(), &[0.5, 1.0, 1.5, 2.0]);
    }
}
