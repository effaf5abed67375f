use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{re, Real, C};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T: Real> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = re(T::one());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { dim, data })
    }

    pub fn diag(entries: &[C<T>]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// `|i⟩⟨j|`
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = re(T::one());
        m
    }

    /// `|ψ⟩⟨ψ|`
    pub fn outer(psi: &[C<T>]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).map(|i| self[(i, i)]).fold(C::zero(), |a, b| a + b)
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(re(s))
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C<T>, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product; zero entries of `self` are skipped so products with
    /// ladder and projector operators stay cheap.
    pub fn matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let out_row = i * n;
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out.data[out_row..out_row + n].iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        self.check_same_dim(rhs)?;
        Ok(self.matmul(rhs))
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs) - rhs.matmul(self)
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs) + rhs.matmul(self)
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        let (n, m) = (self.dim, rhs.dim);
        Self::from_fn(n * m, |i, j| self[(i / m, j / m)] * rhs[(i % m, j % m)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Largest row sum of moduli (induced ∞-norm).
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replace by `(A + A†)/2`.
    pub fn hermitize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.dim {
            for j in i..self.dim {
                let avg = (self[(i, j)] + self[(j, i)].conj()).scale(half);
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix exponential by scaling and squaring of a degree-18 Taylor
    /// polynomial.
    pub fn expm(&self) -> Self {
        let norm = self.norm_inf();
        let mut squarings = 0u32;
        let mut scaled = norm;
        let half = T::lit(0.5);
        while scaled > half {
            scaled *= half;
            squarings += 1;
        }
        let factor = T::lit(0.5f64.powi(squarings as i32));
        let a = self.scale_real(factor);
        let mut result = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for k in 1..=18 {
            term = term.matmul(&a).scale_real(T::one() / T::from_usize_lossy(k));
            result += &term;
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    /// `⟨A⟩ = tr(Aρ)`
    pub fn expectation(&self, rho: &Self) -> C<T> {
        let n = self.dim;
        let mut acc = C::zero();
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * rho.data[k * n + i];
            }
        }
        acc
    }

    /// Cholesky test of `self + shift·I`; succeeds iff the Hermitian matrix
    /// has no eigenvalue below `−shift` (up to rounding).
    pub fn is_psd_with_shift(&self, shift: T) -> bool {
        let n = self.dim;
        let mut l = vec![C::<T>::zero(); n * n];
        for j in 0..n {
            let mut d = self[(j, j)].re + shift;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= T::zero() {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = re(djj);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s.unscale(djj);
            }
        }
        true
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Real> AddAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn add_assign(&mut self, rhs: &Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl<T: Real> SubAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn sub_assign(&mut self, rhs: &Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl<T: Real> Add for ComplexMatrix<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += &rhs;
        self
    }
}

impl<T: Real> Sub for ComplexMatrix<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= &rhs;
        self
    }
}

impl<T: Real> Add<&ComplexMatrix<T>> for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<T: Real> Sub<&ComplexMatrix<T>> for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<T: Real> Mul<&ComplexMatrix<T>> for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.matmul(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn sample() -> ComplexMatrix<f64> {
        ComplexMatrix::from_fn(3, |i, j| cplx((i * 3 + j) as f64 * 0.1, (i as f64) - (j as f64)))
    }

    #[test]
    fn dagger_twice_is_identity_map() {
        let m = sample();
        assert_eq!(m.dagger().dagger(), m);
    }

    #[test]
    fn expm_of_diagonal() {
        let m = ComplexMatrix::diag(&[cplx(1.0, 0.0), cplx(0.0, std::f64::consts::PI)]);
        let e = m.expm();
        assert!((e[(0, 0)] - cplx(1f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - cplx(-1.0, 0.0)).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        // exp of i·θ·σ_x = cos θ + i sin θ σ_x
        let theta = 7.3f64;
        let m = ComplexMatrix::from_row_major(
            2,
            vec![cplx(0.0, 0.0), cplx(0.0, theta), cplx(0.0, theta), cplx(0.0, 0.0)],
        )
        .unwrap();
        let e = m.expm();
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-12);
        assert!((e[(0, 1)].im - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn kron_dims_and_entries() {
        let a = ComplexMatrix::<f64>::unit(2, 0, 1);
        let b = ComplexMatrix::<f64>::identity(3);
        let k = a.kron(&b);
        assert_eq!(k.dim(), 6);
        assert_eq!(k[(1, 4)], cplx(1.0, 0.0));
        assert_eq!(k[(4, 1)], cplx(0.0, 0.0));
    }

    #[test]
    fn cholesky_detects_negative_eigenvalue() {
        let m = ComplexMatrix::diag(&[cplx(1.0, 0.0), cplx(-1e-3, 0.0)]);
        assert!(!m.is_psd_with_shift(1e-6));
        assert!(m.is_psd_with_shift(1e-2));
    }

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(ComplexMatrix::<f64>::from_row_major(2, vec![cplx(0.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::<f64>::from_row_major(1, vec![cplx(f64::NAN, 0.0)]).is_err());
    }
}
