//! Dense n x n linear algebra: LU with partial pivoting, used for the
//! multiplier solves and for determinants of flow Jacobians.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("singular linear system (pivot ratio {pivot_ratio:e} below threshold {threshold:e} at column {col})")]
    Singular {
        pivot_ratio: f64,
        threshold: f64,
        col: usize,
    },
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat<S> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<S>,
}

impl<S: Real> DenseMat<S> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![S::zero(); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch in mul");
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.n_cols {
                    let add = a * other[(k, j)];
                    out[(i, j)] += add;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.n_cols, v.len(), "dimension mismatch in mul_vec");
        let mut out = vec![S::zero(); self.n_rows];
        for i in 0..self.n_rows {
            let mut acc = S::zero();
            for (j, vj) in v.iter().enumerate() {
                acc += self[(i, j)] * *vj;
            }
            out[i] = acc;
        }
        out
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, x| acc.max(x.abs()))
    }

    /// LU factorization with partial pivoting. A pivot whose magnitude falls
    /// below `threshold * max_abs(A)` is treated as singular.
    pub fn lu(&self) -> Result<LuFactors<S>, LinalgError> {
        assert_eq!(self.n_rows, self.n_cols, "LU requires a square matrix");
        let n = self.n_rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = S::one();
        let scale = self.max_abs().max(S::min_positive_value());
        let threshold = S::from_f64(1e-12).unwrap();

        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu[(col, col)].abs();
            for row in col + 1..n {
                let v = lu[(row, col)].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = row;
                }
            }
            let ratio = pivot_val / scale;
            if ratio < threshold {
                return Err(LinalgError::Singular {
                    pivot_ratio: ratio.to_f64().unwrap_or(0.0),
                    threshold: threshold.to_f64().unwrap_or(0.0),
                    col,
                });
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            let inv_pivot = S::one() / lu[(col, col)];
            for row in col + 1..n {
                let factor = lu[(row, col)] * inv_pivot;
                lu[(row, col)] = factor;
                for j in col + 1..n {
                    let sub = factor * lu[(col, j)];
                    lu[(row, j)] -= sub;
                }
            }
        }
        Ok(LuFactors { lu, perm, sign })
    }

    pub fn det(&self) -> Result<S, LinalgError> {
        match self.lu() {
            Ok(f) => Ok(f.det()),
            // A pivot below threshold means det is zero to working precision.
            Err(LinalgError::Singular { .. }) => Ok(S::zero()),
            Err(e) => Err(e),
        }
    }
}

impl<S> core::ops::Index<(usize, usize)> for DenseMat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.n_cols + j]
    }
}

impl<S> core::ops::IndexMut<(usize, usize)> for DenseMat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.n_cols + j]
    }
}

/// Result of LU factorization.
#[derive(Debug, Clone)]
pub struct LuFactors<S> {
    lu: DenseMat<S>,
    perm: Vec<usize>,
    sign: S,
}

impl<S: Real> LuFactors<S> {
    pub fn solve(&self, b: &[S]) -> Result<Vec<S>, LinalgError> {
        let n = self.lu.n_rows;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                rows: n,
                cols: n,
                len: b.len(),
            });
        }
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward substitution with unit lower triangle.
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn det(&self) -> S {
        let mut d = self.sign;
        for i in 0..self.lu.n_rows {
            d *= self.lu[(i, i)];
        }
        d
    }
}
