//! Dense column-major matrices and LU factorization with partial pivoting.
//!
//! Sized for desk-scale networks (tens to a few hundred buses). Both the
//! Newton-Raphson power flow and the interior-point QP assemble their
//! systems densely and solve through [`LuFactors`].

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular at pivot column {0}")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense column-major square-or-rectangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] += v;
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for c in 0..self.cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            let col = &self.data[c * self.rows..(c + 1) * self.rows];
            for (yi, aij) in y.iter_mut().zip(col) {
                *yi += aij * xc;
            }
        }
        y
    }

    /// y = A' x
    pub fn mul_vec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for c in 0..self.cols {
            let col = &self.data[c * self.rows..(c + 1) * self.rows];
            y[c] = col.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }
}

/// LU factors of a square matrix, PA = LU with row pivoting.
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,   // column-major, L below diagonal (unit), U on and above
    piv: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &DMatrix) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Dimension(format!("{}x{} not square", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // pivot search in column k
            let mut p = k;
            let mut pmax = lu[k * n + k].abs();
            for r in k + 1..n {
                let v = lu[k * n + r].abs();
                if v > pmax {
                    pmax = v;
                    p = r;
                }
            }
            if pmax == 0.0 {
                return Err(LinalgError::Singular(k));
            }
            if p != k {
                piv.swap(k, p);
                for c in 0..n {
                    lu.swap(c * n + k, c * n + p);
                }
            }
            let pivot = lu[k * n + k];
            for r in k + 1..n {
                lu[k * n + r] /= pivot;
            }
            for c in k + 1..n {
                let ukc = lu[c * n + k];
                if ukc == 0.0 {
                    continue;
                }
                for r in k + 1..n {
                    lu[c * n + r] -= lu[k * n + r] * ukc;
                }
            }
        }
        Ok(LuFactors { n, lu, piv })
    }

    /// Solve A x = b in place of a copy of b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        // forward: L y = Pb
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..n {
                    x[r] -= self.lu[k * n + r] * xk;
                }
            }
        }
        // backward: U x = y
        for k in (0..n).rev() {
            x[k] /= self.lu[k * n + k];
            let xk = x[k];
            if xk != 0.0 {
                for r in 0..k {
                    x[r] -= self.lu[k * n + r] * xk;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let mut a = DMatrix::zeros(3, 3);
        let vals = [[2.0, 1.0, 1.0], [4.0, -6.0, 0.0], [-2.0, 7.0, 2.0]];
        for r in 0..3 {
            for c in 0..3 {
                a.set(r, c, vals[r][c]);
            }
        }
        let lu = LuFactors::factor(&a).unwrap();
        let x = lu.solve(&[5.0, -2.0, 9.0]);
        let ax = a.mul_vec(&x);
        for (got, want) in ax.iter().zip([5.0, -2.0, 9.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = DMatrix::zeros(2, 2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 4.0);
        assert!(matches!(LuFactors::factor(&a), Err(LinalgError::Singular(_))));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut a = DMatrix::zeros(2, 2);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 0.0);
        let lu = LuFactors::factor(&a).unwrap();
        let x = lu.solve(&[3.0, 7.0]);
        assert!((x[0] - 7.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }
}
