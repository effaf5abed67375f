use crate::linalg::ComplexMatrix;
use crate::scalar::{Real, C};
use num_traits::Zero;

/// Coordinate-list operator used for the ladder/projector products in the
/// Fock-space integrators, where every operator has O(dim) nonzeros.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T: Real> {
    dim: usize,
    entries: Vec<(usize, usize, C<T>)>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn from_dense(m: &ComplexMatrix<T>) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                if !z.is_zero() {
                    entries.push((i, j, z));
                }
            }
        }
        Self { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> ComplexMatrix<T> {
        let mut m = ComplexMatrix::zeros(self.dim);
        for &(i, j, z) in &self.entries {
            m[(i, j)] += z;
        }
        m
    }

    pub fn dagger(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, z)| (j, i, z.conj())).collect(),
        }
    }

    /// `S · M`
    pub fn mul_dense(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for &(i, k, z) in &self.entries {
            let (row_out, row_in) = (i * n, k * n);
            for j in 0..n {
                dst[row_out + j] += z * src[row_in + j];
            }
        }
        out
    }

    /// `out += s · S · M`
    pub fn mul_dense_acc(&self, s: C<T>, m: &ComplexMatrix<T>, out: &mut ComplexMatrix<T>) {
        let n = self.dim;
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for &(i, k, z) in &self.entries {
            let w = z * s;
            let (row_out, row_in) = (i * n, k * n);
            for j in 0..n {
                dst[row_out + j] += w * src[row_in + j];
            }
        }
    }

    /// Weighted sum of operators.
    pub fn combine(terms: &[(C<T>, &SparseMatrix<T>)]) -> Self {
        let dim = terms.first().map_or(0, |t| t.1.dim);
        let mut acc = ComplexMatrix::zeros(dim);
        for &(w, m) in terms {
            for &(i, j, z) in &m.entries {
                acc[(i, j)] += w * z;
            }
        }
        Self::from_dense(&acc)
    }

    /// `M · S`
    pub fn dense_mul(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for &(k, j, z) in &self.entries {
            for i in 0..n {
                dst[i * n + j] += src[i * n + k] * z;
            }
        }
        out
    }

    /// `S ρ S†`
    pub fn sandwich(&self, rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.dagger().dense_mul(&self.mul_dense(rho))
    }

    /// `S ρ S†` for Hermitian `ρ`, using only row-oriented products.
    pub fn sandwich_hermitian(&self, rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.mul_dense(&self.mul_dense(rho).dagger()).dagger()
    }

    /// `tr(S ρ)`
    pub fn expectation(&self, rho: &ComplexMatrix<T>) -> C<T> {
        self.entries
            .iter()
            .fold(C::zero(), |acc, &(i, k, z)| acc + z * rho[(k, i)])
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, z)| (i, j, z * s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    #[test]
    fn products_match_dense() {
        let a = ComplexMatrix::from_fn(4, |i, j| {
            if j == i + 1 {
                cplx((j as f64).sqrt(), 0.3)
            } else {
                cplx(0.0, 0.0)
            }
        });
        let rho = ComplexMatrix::from_fn(4, |i, j| cplx(1.0 + i as f64, j as f64 - 0.5));
        let s = SparseMatrix::from_dense(&a);
        assert!((s.mul_dense(&rho) - a.matmul(&rho)).max_abs() < 1e-14);
        assert!((s.dense_mul(&rho) - rho.matmul(&a)).max_abs() < 1e-14);
        let sand = a.matmul(&rho).matmul(&a.dagger());
        assert!((s.sandwich(&rho) - sand).max_abs() < 1e-13);
        assert!((s.expectation(&rho) - a.expectation(&rho)).norm() < 1e-14);

        let herm = &rho + &rho.dagger();
        let sand = a.matmul(&herm).matmul(&a.dagger());
        assert!((s.sandwich_hermitian(&herm) - sand).max_abs() < 1e-13);
        let mut acc = ComplexMatrix::identity(4);
        s.mul_dense_acc(cplx(0.0, 2.0), &rho, &mut acc);
        let expect = ComplexMatrix::identity(4) + a.matmul(&rho).scale(cplx(0.0, 2.0));
        assert!((acc - expect).max_abs() < 1e-13);
        let both = SparseMatrix::combine(&[(cplx(2.0, 0.0), &s), (cplx(-1.0, 0.0), &s)]);
        assert!((both.to_dense() - a).max_abs() < 1e-15);
    }
}
