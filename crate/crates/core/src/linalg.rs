//! Dense symmetric positive-definite solves for the small information
//! matrices of the binary-choice fits. Matrices are row-major `p × p`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Lower-triangular Cholesky factor.
pub(crate) struct Cholesky {
    p: usize,
    l: Vec<f64>,
}

/// Pivots below this fraction of the original diagonal mark a column as
/// linearly dependent on the columns before it.
const RELATIVE_PIVOT_TOL: f64 = 1e-11;

impl Cholesky {
    /// Factorises `a`; on failure returns the indices of the dependent columns.
    pub(crate) fn new(a: &[f64], p: usize) -> Result<Self, Vec<usize>> {
        debug_assert_eq!(a.len(), p * p);
        let mut l = vec![0.0; p * p];
        let mut dependent = Vec::new();
        for j in 0..p {
            let mut d = a[j * p + j];
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            let scale = a[j * p + j].abs();
            if !(d > RELATIVE_PIVOT_TOL * scale) || !(scale > 0.0) || !d.is_finite() {
                dependent.push(j);
                // keep factorising to report every offending column
                l[j * p + j] = 1.0;
                continue;
            }
            let djj = sqrt(d);
            l[j * p + j] = djj;
            for i in (j + 1)..p {
                let mut s = a[i * p + j];
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / djj;
            }
        }
        if dependent.is_empty() {
            Ok(Cholesky { p, l })
        } else {
            Err(dependent)
        }
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut y = b.to_vec();
        for i in 0..p {
            let s = y[i] - (0..i).map(|k| self.l[i * p + k] * y[k]).sum::<f64>();
            y[i] = s / self.l[i * p + i];
        }
        for i in (0..p).rev() {
            let s = y[i] - ((i + 1)..p).map(|k| self.l[k * p + i] * y[k]).sum::<f64>();
            y[i] = s / self.l[i * p + i];
        }
        y
    }

    pub(crate) fn inverse(&self) -> Vec<f64> {
        let p = self.p;
        let mut inv = vec![0.0; p * p];
        let mut e = vec![0.0; p];
        for j in 0..p {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..p {
                inv[i * p + j] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let c = Cholesky::new(&a, 3).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|k| a[i * 3 + k] * x[k]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((r - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reports_dependent_columns() {
        // third column = first + second
        let x = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0], [2.0, 1.0, 3.0]];
        let mut a = [0.0; 9];
        for row in &x {
            for i in 0..3 {
                for j in 0..3 {
                    a[i * 3 + j] += row[i] * row[j];
                }
            }
        }
        assert_eq!(Cholesky::new(&a, 3).err(), Some(vec![2]));
    }
}
