//! Operator builders. The qubit basis is ordered `(g, e)`, so
//! `σ_z = diag(−1, +1)` and `σ₋ = |g⟩⟨e|`. Joint spaces are ordered
//! qubit ⊗ cavity (⊗ cavity).

use crate::linalg::ComplexMatrix;
use crate::scalar::{re, Real, C};

pub const G: usize = 0;
pub const E: usize = 1;

/// Annihilation operator on Fock levels `0..=cutoff`.
pub fn annihilation<T: Real>(cutoff: usize) -> ComplexMatrix<T> {
    let mut a = ComplexMatrix::zeros(cutoff + 1);
    for n in 1..=cutoff {
        a[(n - 1, n)] = re(T::from_usize_lossy(n).sqrt());
    }
    a
}

pub fn number<T: Real>(cutoff: usize) -> ComplexMatrix<T> {
    let entries: Vec<C<T>> = (0..=cutoff).map(|n| re(T::from_usize_lossy(n))).collect();
    ComplexMatrix::diag(&entries)
}

pub fn sigma_z<T: Real>() -> ComplexMatrix<T> {
    ComplexMatrix::diag(&[re(-T::one()), re(T::one())])
}

pub fn sigma_minus<T: Real>() -> ComplexMatrix<T> {
    ComplexMatrix::unit(2, G, E)
}

pub fn proj_g<T: Real>() -> ComplexMatrix<T> {
    ComplexMatrix::unit(2, G, G)
}

pub fn proj_e<T: Real>() -> ComplexMatrix<T> {
    ComplexMatrix::unit(2, E, E)
}

/// `Π_α = α_g Π_g + α_e Π_e`
pub fn pi_alpha<T: Real>(alpha_g: C<T>, alpha_e: C<T>) -> ComplexMatrix<T> {
    ComplexMatrix::diag(&[alpha_g, alpha_e])
}

/// Fock amplitudes of the coherent state `|α⟩` truncated at `cutoff`.
pub fn coherent_state<T: Real>(alpha: C<T>, cutoff: usize) -> Vec<C<T>> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut amp = re((-alpha.norm_sqr() * T::lit(0.5)).exp());
    for n in 0..=cutoff {
        if n > 0 {
            amp = amp * alpha / re(T::from_usize_lossy(n).sqrt());
        }
        out.push(amp);
    }
    out
}

/// `D(β) = exp(βa† − β*a)` by matrix exponential of the truncated
/// generator; exact on low-lying levels up to truncation error.
pub fn displacement_matrix<T: Real>(beta: C<T>, cutoff: usize) -> ComplexMatrix<T> {
    let a = annihilation::<T>(cutoff);
    let gen = a.dagger().scale(beta) - a.scale(beta.conj());
    gen.expm()
}

/// Fock cutoff heuristic `ceil(4·max|α|²) + 6`.
pub fn fock_cutoff_for<T: Real>(max_abs_alpha: T) -> usize {
    let n = (T::lit(4.0) * max_abs_alpha * max_abs_alpha).ceil();
    n.to_usize().unwrap_or(0) + 6
}
