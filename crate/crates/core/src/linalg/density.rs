use std::ops::Deref;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::{Real, C};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;

/// Validated density matrix: Hermitian, unit trace, no eigenvalue below
/// `−1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real>(ComplexMatrix<T>);

impl<T: Real> DensityMatrix<T> {
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        if m.hermiticity_defect() > T::lit(HERMITIAN_TOL) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr - C::new(T::one(), T::zero())).norm() > T::lit(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        if !m.is_psd_with_shift(T::lit(PSD_TOL)) {
            return Err(Error::InvalidState("negative eigenvalue".into()));
        }
        Ok(Self(m))
    }

    /// Wraps without validation; callers guarantee the invariants.
    pub fn new_unchecked(m: ComplexMatrix<T>) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &[C<T>]) -> Result<Self> {
        let norm: T = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm <= T::zero() {
            return Err(Error::ZeroNorm);
        }
        let scaled: Vec<C<T>> = psi.iter().map(|z| z.unscale(norm.sqrt())).collect();
        Self::new(ComplexMatrix::outer(&scaled))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut m = ComplexMatrix::identity(dim);
        m = m.scale_real(T::one() / T::from_usize_lossy(dim));
        Self(m)
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    pub fn purity(&self) -> T {
        purity(&self.0)
    }
}

impl<T: Real> Deref for DensityMatrix<T> {
    type Target = ComplexMatrix<T>;
    fn deref(&self) -> &ComplexMatrix<T> {
        &self.0
    }
}

/// `tr(ρ²)` for Hermitian `ρ`.
pub fn purity<T: Real>(rho: &ComplexMatrix<T>) -> T {
    rho.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

/// Reduces a qubit ⊗ Fock(`cutoff`) operator to the qubit.
pub fn partial_trace_resonator<T: Real>(joint: &ComplexMatrix<T>, cutoff: usize) -> Result<ComplexMatrix<T>> {
    let levels = cutoff + 1;
    if joint.dim() != 2 * levels {
        return Err(Error::DimMismatch {
            expected: 2 * levels,
            found: joint.dim(),
        });
    }
    partial_trace_keep_qubit(joint, levels)
}

/// Traces out everything but the leading qubit factor of a
/// `2 × env_dim` space.
pub fn partial_trace_keep_qubit<T: Real>(joint: &ComplexMatrix<T>, env_dim: usize) -> Result<ComplexMatrix<T>> {
    if !joint.dim().is_multiple_of(env_dim) || joint.dim() / env_dim != 2 {
        return Err(Error::DimMismatch {
            expected: 2 * env_dim,
            found: joint.dim(),
        });
    }
    let mut out = ComplexMatrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            let mut s = C::zero();
            for n in 0..env_dim {
                s += joint[(i * env_dim + n, j * env_dim + n)];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// `½‖ρ − σ‖₁` for qubit operators.
pub fn trace_distance_qubit<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> T {
    let d = a - b;
    // traceless Hermitian 2×2 has eigenvalues ±sqrt(x² + |y|²)
    let x = (d[(0, 0)].re - d[(1, 1)].re) * T::lit(0.5);
    let y = (d[(0, 1)] + d[(1, 0)].conj()) * C::new(T::lit(0.5), T::zero());
    let tr = (d[(0, 0)].re + d[(1, 1)].re) * T::lit(0.5);
    let r = (x * x + y.norm_sqr()).sqrt();
    ((tr + r).abs() + (tr - r).abs()) * T::lit(0.5)
}
