use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
///
/// Everything in this crate is two-dimensional: batches are `N x d`, weight
/// matrices are `fan_in x fan_out`, biases and single points are `1 x d`,
/// scalars are `1 x 1`. All probability and loss arithmetic stays in `f64`;
/// the gradient-check tolerances in the test suite depend on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from user-supplied data, rejecting NaN/Inf entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Tensor> {
        if values.len() != rows * cols {
            return Err(Error::data(format!(
                "tensor shape {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value {} at flat index {pos} in {rows}x{cols} tensor",
                values[pos]
            )));
        }
        Ok(Tensor { rows, cols, values })
    }

    /// Internal constructor for values produced by the engine itself.
    /// Skips the finiteness scan; shape consistency is still enforced.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>) -> Tensor {
        debug_assert_eq!(values.len(), rows * cols);
        Tensor { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { rows: 1, cols: 1, values: vec![v] }
    }

    /// Single row `1 x n`.
    pub fn row(values: Vec<f64>) -> Tensor {
        Tensor { rows: 1, cols: values.len(), values }
    }

    /// Stack equal-length rows into an `N x d` tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Tensor> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::data(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Tensor::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    /// Value of a `1 x 1` tensor.
    pub fn scalar_value(&self) -> f64 {
        assert!(self.is_scalar(), "scalar_value on a {}x{} tensor", self.rows, self.cols);
        self.values[0]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of row `r` as a `1 x d` tensor.
    pub fn extract_row(&self, r: usize) -> Tensor {
        Tensor::from_raw(1, self.cols, self.row_slice(r).to_vec())
    }

    pub fn transposed(&self) -> Tensor {
        let mut out = vec![0.0; self.values.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        Tensor::from_raw(self.cols, self.rows, out)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_shape_mismatch() {
        assert!(Tensor::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn new_rejects_non_finite() {
        let err = Tensor::new(1, 3, vec![1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(Tensor::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn from_rows_requires_equal_lengths() {
        assert!(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let t = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.shape(), (2, 2));
        assert_eq!(t.get(1, 0), 3.0);
    }

    #[test]
    fn transpose_round_trip() {
        let t = Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let tt = t.transposed();
        assert_eq!(tt.shape(), (3, 2));
        assert_eq!(tt.get(2, 1), 6.0);
        assert_eq!(tt.transposed(), t);
    }
}
