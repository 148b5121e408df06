//! Eigenvalues of small dense symmetric matrices by cyclic Jacobi rotations.

use crate::scalar::Scalar;

/// Dense symmetric matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    /// Build from a full row-major buffer; the lower triangle is mirrored
    /// from the upper one.
    pub fn from_upper(n: usize, mut data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "expected an {n}x{n} buffer");
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Eigenvalues in ascending order.
    ///
    /// Sweeps until the off-diagonal mass is below `eps²` of the diagonal,
    /// which for symmetric input bounds every eigenvalue's relative error
    /// by roughly `eps` (Jacobi is relatively accurate).
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.data.clone();
        let eps = T::epsilon();
        let tol = eps * eps;
        for _sweep in 0..100 {
            let (off, diag) = split_mass(n, &a);
            if off <= tol * diag || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (apq + apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        eig
    }
}

/// Squared Frobenius mass above the diagonal and on it.
fn split_mass<T: Scalar>(n: usize, a: &[T]) -> (T, T) {
    let mut off = T::zero();
    let mut diag = T::zero();
    for i in 0..n {
        diag = diag + a[i * n + i] * a[i * n + i];
        for j in (i + 1)..n {
            off = off + a[i * n + j] * a[i * n + j];
        }
    }
    (off, diag)
}
