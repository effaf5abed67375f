//! Integrators for the full Fock-space master equations.
//!
//! Homodyne steps use the first-order Kraus scheme
//! `M = I − iK dt + √η c dY + ½η c²(dY² − dt)`, `ρ → MρM† + Σ LρL† dt`,
//! which keeps ρ positive. Photodetection integrates the linear no-jump
//! generator with RK4 and applies jumps exactly.

use super::{embed, JointState};
use crate::error::{Error, Result};
use crate::fields::SystemParams;
use crate::linalg::{operators, ComplexMatrix, SparseMatrix};
use crate::qubit::Detection;
use crate::scalar::{cis, cplx, re, Real, C};

/// Result of one monitored step.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredStep<T: Real> {
    pub state: JointState<T>,
    /// `j·dt` for homodyne, `0` or `1` photons for photodetection.
    pub record: T,
}

#[derive(Debug, Clone)]
pub struct FullModel<T: Real> {
    params: SystemParams<T>,
    cutoffs: Vec<usize>,
    /// `H₀ − (i/2)Σ L†L` for all channels including the monitored one.
    k_static: SparseMatrix<T>,
    /// Multiplies `ε_d`.
    k_drive: SparseMatrix<T>,
    unmonitored: Vec<SparseMatrix<T>>,
    monitored: SparseMatrix<T>,
    monitored_sq: SparseMatrix<T>,
    detection: Detection,
}

impl<T: Real> FullModel<T> {
    /// Single resonator with the monitored channel `√κ a` (times `e^{−iφ}`
    /// for homodyne).
    pub fn single(p: &SystemParams<T>, cutoff: usize, detection: Detection) -> Result<Self> {
        p.validate()?;
        let cut = [cutoff];
        let h0 = super::build_heff(p, cutoff, T::zero())?;
        let drive = super::build_heff(&SystemParams::default_zero(), cutoff, T::one())?;
        let a = embed(&ComplexMatrix::identity(2), &operators::annihilation(cutoff), 0, &cut);
        let lo = match detection {
            Detection::Homodyne => cis(-p.phi),
            Detection::Photo => re(T::one()),
        };
        let c = a.scale(lo * re(p.kappa.sqrt()));
        Self::assemble(p, cut.to_vec(), h0, drive, Vec::new(), c, detection)
    }

    /// Readout resonator `a` cascaded into a filter `b` with loss `κ_b` per
    /// side; homodyne on `√κ_b b` at `φ + π`.
    pub fn cascaded(p: &SystemParams<T>, cutoff_a: usize, cutoff_b: usize) -> Result<Self> {
        p.validate()?;
        let cut = [cutoff_a, cutoff_b];
        let id2 = ComplexMatrix::<T>::identity(2);
        let sz = operators::sigma_z::<T>();
        let a = embed(&id2, &operators::annihilation(cutoff_a), 0, &cut);
        let b = embed(&id2, &operators::annihilation(cutoff_b), 1, &cut);
        let na = embed(&id2, &operators::number(cutoff_a), 0, &cut);
        let qz = embed(&sz, &ComplexMatrix::identity(cutoff_a + 1), 0, &cut);
        let half = T::lit(0.5);
        let g_ab = (p.kappa * p.kappa_b).sqrt();
        let mut h0 = qz.scale_real(p.omega_a * half);
        h0 += &na.scale_real(p.delta_r);
        h0 += &(&qz * &na).scale_real(p.chi);
        // (i/2)√(κκ_b)(a†b − b†a)
        let hop = &(&a.dagger() * &b) - &(&b.dagger() * &a);
        h0 += &hop.scale(cplx(T::zero(), half * g_ab));
        let drive = &a + &a.dagger();
        let l1 = &a.scale_real(p.kappa.sqrt()) + &b.scale_real(p.kappa_b.sqrt());
        let c = b.scale(-cis(-p.phi) * re(p.kappa_b.sqrt()));
        Self::assemble(p, cut.to_vec(), h0, drive, vec![l1], c, Detection::Homodyne)
    }

    fn assemble(
        p: &SystemParams<T>,
        cutoffs: Vec<usize>,
        h0: ComplexMatrix<T>,
        drive: ComplexMatrix<T>,
        mut lindblad: Vec<ComplexMatrix<T>>,
        monitored: ComplexMatrix<T>,
        detection: Detection,
    ) -> Result<Self> {
        let id_env = ComplexMatrix::identity(super::env_dim(&cutoffs));
        if p.gamma1 > T::zero() {
            let sm = operators::sigma_minus::<T>().kron(&id_env);
            lindblad.push(sm.scale_real(p.gamma1.sqrt()));
        }
        if p.gamma_phi > T::zero() {
            let sz = operators::sigma_z::<T>().kron(&id_env);
            lindblad.push(sz.scale_real((p.gamma_phi * T::lit(0.5)).sqrt()));
        }
        let mut decay = &monitored.dagger() * &monitored;
        for l in &lindblad {
            decay += &(&l.dagger() * l);
        }
        let k = &h0 - &decay.scale(cplx(T::zero(), T::lit(0.5)));
        Ok(Self {
            params: *p,
            cutoffs,
            k_static: SparseMatrix::from_dense(&k),
            k_drive: SparseMatrix::from_dense(&drive),
            unmonitored: lindblad.iter().map(SparseMatrix::from_dense).collect(),
            monitored_sq: SparseMatrix::from_dense(&(&monitored * &monitored)),
            monitored: SparseMatrix::from_dense(&monitored),
            detection,
        })
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    /// Drive on the step starting at `t`, with the pulse edge snapped to
    /// the `dt` grid.
    pub fn drive_at(&self, t: T, dt: T) -> T {
        let p = &self.params;
        if p.drive_held() {
            return p.epsilon_m;
        }
        let k = (t / dt).round();
        if k >= T::zero() && k < (p.t_meas / dt).round() {
            p.epsilon_m
        } else {
            T::zero()
        }
    }

    fn check(&self, s: &JointState<T>) -> Result<()> {
        if s.cutoffs() != self.cutoffs.as_slice() {
            return Err(Error::DimMismatch {
                expected: 2 * super::env_dim(&self.cutoffs),
                found: s.matrix().dim(),
            });
        }
        Ok(())
    }

    /// `−iKρ + iρK† + Σ LρL† + w·cρc†` for Hermitian `ρ`.
    fn linear_rhs(&self, rho: &ComplexMatrix<T>, eps: T, monitored_weight: T) -> ComplexMatrix<T> {
        let mi = cplx(T::zero(), -T::one());
        let mut x = ComplexMatrix::zeros(rho.dim());
        self.k_static.mul_dense_acc(mi, rho, &mut x);
        self.k_drive.mul_dense_acc(mi * re(eps), rho, &mut x);
        let mut out = &x + &x.dagger();
        for l in &self.unmonitored {
            out += &l.sandwich_hermitian(rho);
        }
        if monitored_weight > T::zero() {
            out += &self.monitored.sandwich_hermitian(rho).scale_real(monitored_weight);
        }
        out
    }

    fn rk4(&self, rho: &ComplexMatrix<T>, eps: T, w: T, dt: T) -> ComplexMatrix<T> {
        let half = T::lit(0.5) * dt;
        let k1 = self.linear_rhs(rho, eps, w);
        let mut y = rho.clone();
        y.axpy(re(half), &k1);
        let k2 = self.linear_rhs(&y, eps, w);
        let mut y = rho.clone();
        y.axpy(re(half), &k2);
        let k3 = self.linear_rhs(&y, eps, w);
        let mut y = rho.clone();
        y.axpy(re(dt), &k3);
        let k4 = self.linear_rhs(&y, eps, w);
        let mut out = rho.clone();
        let sixth = dt / T::lit(6.0);
        out.axpy(re(sixth), &k1);
        out.axpy(re(sixth * T::lit(2.0)), &k2);
        out.axpy(re(sixth * T::lit(2.0)), &k3);
        out.axpy(re(sixth), &k4);
        out
    }

    fn finish(&self, mut rho: ComplexMatrix<T>) -> Result<JointState<T>> {
        rho.hermitize();
        let tr = rho.trace().re;
        if !(tr > T::zero()) || !tr.is_finite() {
            return Err(Error::NonFinite("joint state trace"));
        }
        let rho = rho.scale_real(T::one() / tr);
        if !rho.is_finite() {
            return Err(Error::NonFinite("joint state"));
        }
        let s = JointState {
            cutoffs: self.cutoffs.clone(),
            rho,
        };
        s.check_cutoff()?;
        Ok(s)
    }

    /// `η⟨c†c⟩dt`
    pub fn jump_probability(&self, s: &JointState<T>, dt: T) -> T {
        let c = &self.monitored;
        // ⟨c†c⟩ = tr(c ρ c†)
        self.params.eta * c.sandwich_hermitian(s.matrix()).trace().re * dt
    }

    /// One homodyne step starting at time `t`.
    pub fn step_homodyne(&self, s: &JointState<T>, t: T, dw: T, dt: T) -> Result<MonitoredStep<T>> {
        self.check(s)?;
        if !(dt > T::zero()) {
            return Err(Error::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)));
        }
        if self.detection != Detection::Homodyne {
            return Err(Error::InvalidParams("model was built for photodetection".into()));
        }
        let eta = self.params.eta;
        let se = eta.sqrt();
        let rho = s.matrix();
        let mean = T::lit(2.0) * se * self.monitored.expectation(rho).re;
        let dy = mean * dt + dw;
        let eps = self.drive_at(t, dt);
        let apply_m = |x: &ComplexMatrix<T>| {
            let mut out = x.clone();
            let mi = cplx(T::zero(), -dt);
            self.k_static.mul_dense_acc(mi, x, &mut out);
            self.k_drive.mul_dense_acc(mi * re(eps), x, &mut out);
            self.monitored.mul_dense_acc(re(se * dy), x, &mut out);
            self.monitored_sq
                .mul_dense_acc(re(T::lit(0.5) * eta * (dy * dy - dt)), x, &mut out);
            out
        };
        let x = apply_m(rho);
        let mut next = apply_m(&x.dagger()).dagger();
        for l in &self.unmonitored {
            next.axpy(re(dt), &l.sandwich_hermitian(rho));
        }
        if eta < T::one() {
            next.axpy(re((T::one() - eta) * dt), &self.monitored.sandwich_hermitian(rho));
        }
        Ok(MonitoredStep {
            state: self.finish(next)?,
            record: dy,
        })
    }

    /// One photodetection step starting at time `t`; the jump, if any, is
    /// applied after the no-jump evolution.
    pub fn step_photo(&self, s: &JointState<T>, t: T, jump: bool, dt: T) -> Result<JointState<T>> {
        self.check(s)?;
        if !(dt > T::zero()) {
            return Err(Error::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)));
        }
        let eps = self.drive_at(t, dt);
        let w = T::one() - self.params.eta;
        let mut rho = self.rk4(s.matrix(), eps, w, dt);
        if jump {
            rho.hermitize();
            let after = self.monitored.sandwich_hermitian(&rho);
            if !(after.trace().re > T::lit(crate::linalg::superop::JUMP_TOLERANCE) * rho.trace().re) {
                return Err(Error::UndefinedJump);
            }
            rho = after;
        }
        self.finish(rho)
    }

    /// Unconditional evolution from `t0` over `steps` RK4 steps, calling
    /// `observe(k, state)` after each.
    pub fn evolve_master_with(
        &self,
        s: &JointState<T>,
        t0: T,
        steps: usize,
        dt: T,
        mut observe: impl FnMut(usize, &JointState<T>),
    ) -> Result<JointState<T>> {
        self.check(s)?;
        if !(dt > T::zero()) {
            return Err(Error::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)));
        }
        let mut cur = s.clone();
        for k in 0..steps {
            let t = t0 + dt * T::from_usize_lossy(k);
            let mut rho = self.rk4(cur.matrix(), self.drive_at(t, dt), T::one(), dt);
            rho.hermitize();
            *cur.matrix_mut() = rho;
            cur.check_cutoff()?;
            observe(k + 1, &cur);
        }
        Ok(cur)
    }

    /// Unconditional evolution from `0` to `t_end`.
    pub fn evolve_master(&self, s: &JointState<T>, t_end: T, dt: T) -> Result<JointState<T>> {
        let steps = (t_end / dt).round().to_usize().unwrap_or(0);
        self.evolve_master_with(s, T::zero(), steps, dt, |_, _| {})
    }

    /// `⟨a⟩` of the first resonator.
    pub fn mean_field(&self, s: &JointState<T>) -> C<T> {
        let a = embed(
            &ComplexMatrix::identity(2),
            &operators::annihilation(self.cutoffs[0]),
            0,
            &self.cutoffs,
        );
        a.expectation(s.matrix())
    }
}

impl<T: Real> SystemParams<T> {
    /// All rates and drives zero; used to isolate single Hamiltonian terms.
    fn default_zero() -> Self {
        Self {
            chi: T::zero(),
            kappa: T::one(),
            eta: T::zero(),
            epsilon_m: T::zero(),
            delta_r: T::zero(),
            t_meas: T::zero(),
            t_off: T::zero(),
            phi: T::zero(),
            gamma1: T::zero(),
            gamma_phi: T::zero(),
            omega_a: T::zero(),
            kappa_b: T::one(),
        }
    }
}
