//! Fock-truncated qubit ⊗ resonator models.
//!
//! Basis ordering is qubit-major: index `q·D + n` for one resonator with
//! `D = N+1`, and `q·D_aD_b + n·D_b + m` for the cascaded pair.

mod model;

pub use model::{FullModel, MonitoredStep};

use crate::error::{Error, Result};
use crate::fields::SystemParams;
use crate::linalg::{operators, partial_trace_keep_qubit, ComplexMatrix};
use crate::qubit::QubitState;
use crate::scalar::{re, Real};

/// Population allowed in the top two Fock levels of any mode.
pub const TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T: Real> {
    cutoffs: Vec<usize>,
    rho: ComplexMatrix<T>,
}

/// Hilbert-space dimension of the resonator factors.
pub fn env_dim(cutoffs: &[usize]) -> usize {
    cutoffs.iter().map(|n| n + 1).product()
}

impl<T: Real> JointState<T> {
    pub fn new(cutoffs: Vec<usize>, rho: ComplexMatrix<T>) -> Result<Self> {
        let d = 2 * env_dim(&cutoffs);
        if rho.dim() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: rho.dim(),
            });
        }
        if cutoffs.iter().any(|&n| n < 1) {
            return Err(Error::InvalidParams("Fock cutoff must be at least 1".into()));
        }
        Ok(Self { cutoffs, rho })
    }

    /// `ρ_qb ⊗ |0…0⟩⟨0…0|`
    pub fn product_vacuum(qubit: &QubitState<T>, cutoffs: &[usize]) -> Result<Self> {
        let env = env_dim(cutoffs);
        let mut vac = ComplexMatrix::zeros(env);
        vac[(0, 0)] = re(T::one());
        Self::new(cutoffs.to_vec(), qubit.to_matrix().kron(&vac))
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.rho
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.rho
    }

    pub fn env_dim(&self) -> usize {
        env_dim(&self.cutoffs)
    }

    pub fn reduced_qubit(&self) -> Result<QubitState<T>> {
        QubitState::from_matrix(&partial_trace_keep_qubit(&self.rho, self.env_dim())?)
    }

    /// Population in the top two Fock levels of each mode.
    pub fn tail_populations(&self) -> Vec<T> {
        let env = self.env_dim();
        let mut out = vec![T::zero(); self.cutoffs.len()];
        for idx in 0..2 * env {
            let p = self.rho[(idx, idx)].re;
            let mut rest = idx % env;
            for (m, &n) in self.cutoffs.iter().enumerate().rev() {
                let level = rest % (n + 1);
                rest /= n + 1;
                if level + 1 >= n {
                    out[m] += p;
                }
            }
        }
        out
    }

    pub fn check_cutoff(&self) -> Result<()> {
        for (m, pop) in self.tail_populations().into_iter().enumerate() {
            if !(pop < T::lit(TAIL_TOLERANCE)) {
                return Err(Error::CutoffViolation {
                    cutoff: self.cutoffs[m],
                    population: pop.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix<T> {
        &mut self.rho
    }
}

/// Operator acting on factor `slot` of the resonator space, embedded into
/// the joint space next to `qubit_op`.
pub fn embed<T: Real>(
    qubit_op: &ComplexMatrix<T>,
    mode_op: &ComplexMatrix<T>,
    slot: usize,
    cutoffs: &[usize],
) -> ComplexMatrix<T> {
    let mut out = qubit_op.clone();
    for (m, &n) in cutoffs.iter().enumerate() {
        let f = if m == slot {
            mode_op.clone()
        } else {
            ComplexMatrix::identity(n + 1)
        };
        out = out.kron(&f);
    }
    out
}

/// `(ω̃_a/2)σ_z + Δ_r a†a + χ a†a σ_z + ε_d(a† + a)` on a single resonator.
pub fn build_heff<T: Real>(p: &SystemParams<T>, cutoff: usize, eps_d: T) -> Result<ComplexMatrix<T>> {
    if cutoff < 1 {
        return Err(Error::InvalidParams("Fock cutoff must be at least 1".into()));
    }
    let cut = [cutoff];
    let id2 = ComplexMatrix::<T>::identity(2);
    let sz = operators::sigma_z::<T>();
    let a = operators::annihilation::<T>(cutoff);
    let n = operators::number::<T>(cutoff);
    let mut h = embed(&sz, &ComplexMatrix::identity(cutoff + 1), 0, &cut).scale_real(p.omega_a * T::lit(0.5));
    h += &embed(&id2, &n, 0, &cut).scale_real(p.delta_r);
    h += &embed(&sz, &n, 0, &cut).scale_real(p.chi);
    h += &embed(&id2, &(&a + &a.dagger()), 0, &cut).scale_real(eps_d);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    #[test]
    fn heff_diagonal_without_drive() {
        let p = SystemParams::<f64> {
            omega_a: 0.4,
            delta_r: 0.25,
            ..Default::default()
        };
        let n = 5;
        let h = build_heff(&p, n, 0.0).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                if i != j {
                    assert_eq!(h[(i, j)], cplx(0.0, 0.0));
                }
            }
        }
        for k in 0..=n {
            let e = h[(n + 1 + k, n + 1 + k)].re;
            assert!((e - (0.2 + (0.25 + 3.0) * k as f64)).abs() < 1e-14);
            let g = h[(k, k)].re;
            assert!((g - (-0.2 + (0.25 - 3.0) * k as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn drive_couples_neighbours_only() {
        let p = SystemParams::<f64>::default();
        let n = 6;
        let h = build_heff(&p, n, 1.0).unwrap();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                let (qi, ni) = (i / (n + 1), i % (n + 1));
                let (qj, nj) = (j / (n + 1), j % (n + 1));
                if h[(i, j)].norm() > 0.0 && i != j {
                    assert_eq!(qi, qj);
                    assert_eq!(ni.abs_diff(nj), 1);
                }
            }
        }
        assert!(h.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn product_state_reduction_and_tails() {
        let q = QubitState::<f64>::plus();
        let s = JointState::product_vacuum(&q, &[4, 3]).unwrap();
        assert_eq!(s.matrix().dim(), 2 * 5 * 4);
        assert!(s.reduced_qubit().unwrap().trace_distance(&q) < 1e-15);
        assert_eq!(s.tail_populations(), vec![0.0, 0.0]);
        s.check_cutoff().unwrap();
        let mut top = ComplexMatrix::zeros(5);
        top[(4, 4)] = cplx(1.0, 0.0);
        let bad = JointState::new(vec![4], QubitState::<f64>::ground().to_matrix().kron(&top)).unwrap();
        assert!(matches!(bad.check_cutoff(), Err(Error::CutoffViolation { .. })));
        assert!(JointState::new(vec![4], ComplexMatrix::<f64>::identity(9)).is_err());
    }
}
