//! Superoperators acting on density matrices.
//!
//! | kind            | action                                  |
//! |-----------------|-----------------------------------------|
//! | `Dissipator`    | `XρX† − ½X†Xρ − ½ρX†X`                  |
//! | `Measure`       | `cρ + ρc† − ⟨c + c†⟩ρ`                  |
//! | `Jump`          | `cρc†/⟨c†c⟩ − ρ`                        |
//! | `MeasureUnnorm` | `cρ + ρc†`                              |
//! | `JumpUnnorm`    | `cρc† − ρ`                              |

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::scalar::{re, Real};

/// `⟨c†c⟩` at or below this is treated as a vanishing jump rate.
pub const JUMP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperopKind {
    Dissipator,
    Measure,
    Jump,
    MeasureUnnorm,
    JumpUnnorm,
}

impl SuperopKind {
    pub fn apply<T: Real>(self, op: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        match self {
            SuperopKind::Dissipator => dissipator_apply(op, rho),
            SuperopKind::Measure => measure_apply(op, rho),
            SuperopKind::Jump => jump_apply(op, rho),
            SuperopKind::MeasureUnnorm => measure_unnorm_apply(op, rho),
            SuperopKind::JumpUnnorm => jump_unnorm_apply(op, rho),
        }
    }
}

pub fn dissipator_apply<T: Real>(x: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    x.check_same_dim(rho)?;
    let xd = x.dagger();
    let xdx = xd.matmul(x);
    let mut out = x.matmul(rho).matmul(&xd);
    let half = re(T::lit(-0.5));
    out.axpy(half, &xdx.matmul(rho));
    out.axpy(half, &rho.matmul(&xdx));
    Ok(out)
}

pub fn measure_unnorm_apply<T: Real>(c: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    c.check_same_dim(rho)?;
    Ok(c.matmul(rho) + rho.matmul(&c.dagger()))
}

pub fn measure_apply<T: Real>(c: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let mut out = measure_unnorm_apply(c, rho)?;
    let mean = (c + &c.dagger()).expectation(rho);
    out.axpy(-mean, rho);
    Ok(out)
}

pub fn jump_unnorm_apply<T: Real>(c: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    c.check_same_dim(rho)?;
    Ok(c.matmul(rho).matmul(&c.dagger()) - rho.clone())
}

pub fn jump_apply<T: Real>(c: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    c.check_same_dim(rho)?;
    let cd = c.dagger();
    let rate = cd.matmul(c).expectation(rho).re;
    if rate <= T::lit(JUMP_TOLERANCE) {
        return Err(Error::UndefinedJump);
    }
    Ok(c.matmul(rho).matmul(&cd).scale_real(T::one() / rate) - rho.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operators::{annihilation, sigma_minus, sigma_z};
    use crate::scalar::cplx;

    fn excited() -> ComplexMatrix<f64> {
        ComplexMatrix::unit(2, 1, 1)
    }

    #[test]
    fn identity_dissipator_vanishes() {
        let rho = ComplexMatrix::from_fn(3, |i, j| cplx(0.1 * (i + j) as f64, 0.05 * i as f64));
        let d = dissipator_apply(&ComplexMatrix::identity(3), &rho).unwrap();
        assert!(d.max_abs() < 1e-15);
    }

    #[test]
    fn decay_moves_excited_population_to_ground() {
        let d = dissipator_apply(&sigma_minus::<f64>(), &excited()).unwrap();
        let expected = ComplexMatrix::diag(&[cplx(1.0, 0.0), cplx(-1.0, 0.0)]);
        assert!((d - expected).max_abs() < 1e-15);
    }

    #[test]
    fn dissipator_sandwich_term_matches_sum() {
        // Only the XρX† term is non-trivial to index; check it on its own.
        let x = ComplexMatrix::from_fn(2, |i, j| cplx(i as f64 + 0.3, j as f64 - 0.7));
        let rho = ComplexMatrix::from_fn(2, |i, j| {
            if i == j {
                cplx(0.5, 0.0)
            } else {
                cplx(0.1, 0.2 * (i as f64 - j as f64))
            }
        });
        let n = 2;
        let sandwich = ComplexMatrix::from_fn(n, |i, j| {
            let mut s = cplx(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    s += x[(i, k)] * rho[(k, l)] * x[(j, l)].conj();
                }
            }
            s
        });
        assert!((sandwich - x.matmul(&rho).matmul(&x.dagger())).max_abs() < 1e-15);
    }

    #[test]
    fn scalar_measurement_operator_vanishes() {
        let rho = ComplexMatrix::from_fn(2, |i, j| {
            if i == j {
                cplx(0.5, 0.0)
            } else {
                cplx(0.2, if i > j { 0.1 } else { -0.1 })
            }
        });
        let c = ComplexMatrix::identity(2).scale(cplx(0.3, -1.2));
        assert!(measure_apply(&c, &rho).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn sigma_z_on_mixed_state() {
        let rho = ComplexMatrix::identity(2).scale_real(0.5);
        let m = measure_apply(&sigma_z::<f64>(), &rho).unwrap();
        // 2σ_zρ − 0 = σ_z
        assert!((m - sigma_z()).max_abs() < 1e-15);
    }

    #[test]
    fn jump_cases() {
        let rho = ComplexMatrix::from_fn(2, |i, j| if i == j { cplx(0.5, 0.0) } else { cplx(0.3, 0.0) });
        assert!(jump_apply(&ComplexMatrix::identity(2), &rho).unwrap().max_abs() < 1e-15);

        let a = annihilation::<f64>(1);
        let one = ComplexMatrix::unit(2, 1, 1);
        let g = jump_apply(&a, &one).unwrap();
        let expected = ComplexMatrix::diag(&[cplx(1.0, 0.0), cplx(-1.0, 0.0)]);
        assert!((g - expected).max_abs() < 1e-15);

        let vacuum = ComplexMatrix::unit(2, 0, 0);
        assert!(matches!(jump_apply(&a, &vacuum), Err(Error::UndefinedJump)));
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let r = dissipator_apply(&ComplexMatrix::<f64>::identity(2), &ComplexMatrix::identity(3));
        assert!(matches!(r, Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn jump_is_not_linear() {
        let a = annihilation::<f64>(2);
        let r1 = ComplexMatrix::unit(3, 1, 1);
        let r2 = ComplexMatrix::unit(3, 2, 2);
        let mix = (&r1 + &r2).scale_real(0.5);
        let lhs = jump_apply(&a, &mix).unwrap();
        let rhs = (jump_apply(&a, &r1).unwrap() + jump_apply(&a, &r2).unwrap()).scale_real(0.5);
        assert!((lhs - rhs).max_abs() > 1e-2);
    }

    #[test]
    fn unnormalized_forms() {
        let a = annihilation::<f64>(2);
        let rho = ComplexMatrix::unit(3, 1, 1);
        let m = measure_unnorm_apply(&a, &rho).unwrap();
        assert!((m - (a.matmul(&rho) + rho.matmul(&a.dagger()))).max_abs() < 1e-15);
        let g = SuperopKind::JumpUnnorm.apply(&a, &rho).unwrap();
        assert!((g[(0, 0)] - cplx(1.0, 0.0)).norm() < 1e-15);
        assert!((g[(1, 1)] - cplx(-1.0, 0.0)).norm() < 1e-15);
    }
}
