//! Qubit-only effective stochastic master equations.
//!
//! Both unravelings are integrated with an exponential scheme: every
//! measurement operator of the effective model is diagonal in the qubit
//! basis, so each density-matrix element evolves multiplicatively. The
//! unconditional generator is integrated by trapezoid quadrature, the
//! stochastic increments at the left point (Itô). Amplitude damping is
//! split off and applied exactly.

mod homodyne;
mod photo;

pub use homodyne::{
    analytic_offdiag_homodyne, extract_noise, step_effective_homodyne, step_homodyne, stochastic_phase_homodyne,
    stochastic_phase_homodyne_until, zero_dephasing_integral, HomodyneTrajectory,
};
pub use photo::{
    analytic_offdiag_photo, jump_probability, photo_phase_correction, photo_phase_correction_until, sample_jump,
    step_effective_photo, step_photo, PhotoTrajectory, MAX_JUMP_PROBABILITY,
};

use crate::error::{Error, Result};
use crate::fields::{CascadedFields, FieldSample, FieldTrajectory, SystemParams};
use crate::linalg::{trace_distance_qubit, ComplexMatrix};
use crate::scalar::{cis, cplx, re, Real, C};
use num_traits::Zero;

/// Qubit density matrix stored as `ρ_gg` and `ρ_eg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState<T: Real> {
    pub rho_gg: T,
    pub rho_eg: C<T>,
}

impl<T: Real> QubitState<T> {
    pub fn new(rho_gg: T, rho_eg: C<T>) -> Result<Self> {
        let s = Self { rho_gg, rho_eg };
        s.validate()?;
        Ok(s)
    }

    pub fn ground() -> Self {
        Self {
            rho_gg: T::one(),
            rho_eg: C::zero(),
        }
    }

    pub fn excited() -> Self {
        Self {
            rho_gg: T::zero(),
            rho_eg: C::zero(),
        }
    }

    /// `(|g⟩ + |e⟩)/√2`
    pub fn plus() -> Self {
        let h = T::lit(0.5);
        Self {
            rho_gg: h,
            rho_eg: re(h),
        }
    }

    /// `a|g⟩ + b|e⟩` (normalized internally).
    pub fn from_amplitudes(a: C<T>, b: C<T>) -> Result<Self> {
        let n = a.norm_sqr() + b.norm_sqr();
        if !(n > T::zero()) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            rho_gg: a.norm_sqr() / n,
            rho_eg: b * a.conj() / re(n),
        })
    }

    pub fn rho_ee(&self) -> T {
        T::one() - self.rho_gg
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho_gg.is_finite() || !self.rho_eg.re.is_finite() || !self.rho_eg.im.is_finite() {
            return Err(Error::NonFinite("qubit state"));
        }
        let tol = T::lit(1e-9);
        if self.rho_gg < -tol || self.rho_gg > T::one() + tol {
            return Err(Error::InvalidState(format!("rho_gg = {} outside [0, 1]", self.rho_gg)));
        }
        if self.rho_eg.norm_sqr() > self.rho_gg * self.rho_ee() + tol {
            return Err(Error::InvalidState("coherence exceeds positivity bound".into()));
        }
        Ok(())
    }

    /// `tr ρ²`
    pub fn purity(&self) -> T {
        let g = self.rho_gg;
        let e = self.rho_ee();
        g * g + e * e + T::lit(2.0) * self.rho_eg.norm_sqr()
    }

    pub fn to_matrix(&self) -> ComplexMatrix<T> {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 0)] = re(self.rho_gg);
        m[(1, 1)] = re(self.rho_ee());
        m[(1, 0)] = self.rho_eg;
        m[(0, 1)] = self.rho_eg.conj();
        m
    }

    /// Reads a 2×2 matrix, normalizing by its trace.
    pub fn from_matrix(m: &ComplexMatrix<T>) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::DimMismatch {
                expected: 2,
                found: m.dim(),
            });
        }
        let tr = m[(0, 0)].re + m[(1, 1)].re;
        if !(tr.abs() > T::zero()) {
            return Err(Error::ZeroNorm);
        }
        let eg = (m[(1, 0)] + m[(0, 1)].conj()) * re(T::lit(0.5) / tr);
        Ok(Self {
            rho_gg: m[(0, 0)].re / tr,
            rho_eg: eg,
        })
    }

    pub fn trace_distance(&self, other: &Self) -> T {
        trace_distance_qubit(&self.to_matrix(), &other.to_matrix())
    }

    /// `ρ_eg → ρ_eg e^{−iθ}`
    pub fn rotated(&self, theta: T) -> Self {
        Self {
            rho_gg: self.rho_gg,
            rho_eg: self.rho_eg * cis(-theta),
        }
    }

    /// Mixture `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &Self, w: T) -> Self {
        let v = T::one() - w;
        Self {
            rho_gg: w * self.rho_gg + v * other.rho_gg,
            rho_eg: self.rho_eg * re(w) + other.rho_eg * re(v),
        }
    }
}

/// Accumulated phase of a `σ_z` correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticPhase<T: Real> {
    pub theta: T,
}

impl<T: Real> StochasticPhase<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("stochastic phase"));
        }
        Ok(Self { theta })
    }
}

/// `ρ_eg ← ρ_eg e^{−iθ}`.
pub fn apply_phase_correction<T: Real>(rho: &QubitState<T>, theta: StochasticPhase<T>) -> QubitState<T> {
    rho.rotated(theta.theta)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordData<T: Real> {
    /// `j·dt` per step.
    Homodyne(Vec<T>),
    /// Photon arrival times, strictly increasing.
    Photo(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T: Real> {
    pub dt: T,
    pub seed: u64,
    pub data: RecordData<T>,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn homodyne(dt: T, seed: u64, samples: Vec<T>) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("homodyne record"));
        }
        Ok(Self {
            dt,
            seed,
            data: RecordData::Homodyne(samples),
        })
    }

    pub fn photo(dt: T, seed: u64, jump_times: Vec<T>) -> Result<Self> {
        if jump_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("jump times must be strictly increasing".into()));
        }
        Ok(Self {
            dt,
            seed,
            data: RecordData::Photo(jump_times),
        })
    }

    pub fn samples(&self) -> Option<&[T]> {
        match &self.data {
            RecordData::Homodyne(s) => Some(s),
            RecordData::Photo(_) => None,
        }
    }

    pub fn jump_times(&self) -> Option<&[T]> {
        match &self.data {
            RecordData::Photo(j) => Some(j),
            RecordData::Homodyne(_) => None,
        }
    }

    /// Integrated current `Σ j·dt` (zero for photon records is meaningless,
    /// so those return the photon count).
    pub fn integrated(&self) -> T {
        match &self.data {
            RecordData::Homodyne(s) => s.iter().copied().fold(T::zero(), |a, b| a + b),
            RecordData::Photo(j) => T::from_usize_lossy(j.len()),
        }
    }
}

/// Instantaneous rates of the effective model.
///
/// `coherence` is the unconditional logarithmic rate of `ρ_eg` without
/// qubit decay; `monitored[i]` is the eigenvalue of the monitored
/// measurement operator (including `√κ` and the local-oscillator phase) on
/// branch `i` (`0 = g`, `1 = e`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates<T: Real> {
    pub coherence: C<T>,
    pub monitored: [C<T>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveStep<T: Real> {
    pub start: EffectiveRates<T>,
    pub end: EffectiveRates<T>,
}

/// Effective rates tabulated on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<T: Real> {
    pub dt: T,
    pub rates: Vec<EffectiveRates<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    Homodyne,
    Photo,
}

/// Coherent-field branch data entering [`coherent_ansatz_rate`].
#[derive(Debug, Clone, Copy)]
pub struct Branch<'a, T: Real> {
    pub modes: &'a [C<T>],
    pub velocities: &'a [C<T>],
    /// `⟨H_i⟩` in the branch's coherent state.
    pub energy: T,
    /// Eigenvalues of all Lindblad operators acting on the modes.
    pub lindblad: &'a [C<T>],
}

/// Logarithmic rate of `ρ_eg` when each qubit branch carries a multimode
/// coherent state evolving under a quadratic Hamiltonian and linear
/// Lindblad operators.
pub fn coherent_ansatz_rate<T: Real>(omega_a: T, g: Branch<'_, T>, e: Branch<'_, T>) -> C<T> {
    let i = cplx(T::zero(), T::one());
    let half = T::lit(0.5);
    let mut rate = -i * re(omega_a + e.energy - g.energy);
    for (&lg, &le) in g.lindblad.iter().zip(e.lindblad) {
        rate += le * lg.conj() - re(half * (lg.norm_sqr() + le.norm_sqr()));
    }
    for k in 0..g.modes.len() {
        let (xg, vg) = (g.modes[k], g.velocities[k]);
        let (xe, ve) = (e.modes[k], e.velocities[k]);
        rate -= i * re((ve * xe.conj()).im - (vg * xg.conj()).im);
        rate += vg.conj() * xe + xg.conj() * ve - re((vg * xg.conj()).re + (ve * xe.conj()).re);
    }
    rate
}

impl<T: Real> EffectiveRates<T> {
    /// Single-cavity rates: `−i(ω̃_a + B) − Γ_d` and `√κ α_i e^{−iφ}`.
    pub fn single_cavity(f: &FieldSample<T>, p: &SystemParams<T>, detection: Detection) -> Self {
        let coherence = cplx(-f.gamma_d, -(p.omega_a + f.stark_b));
        let lo = match detection {
            Detection::Homodyne => cis(-p.phi),
            Detection::Photo => C::new(T::one(), T::zero()),
        };
        let sk = re(p.kappa.sqrt());
        Self {
            coherence,
            monitored: [sk * f.alpha_g * lo, sk * f.alpha_e * lo],
        }
    }
}

impl<T: Real> RateTable<T> {
    pub fn single_cavity(f: &FieldTrajectory<T>, p: &SystemParams<T>, detection: Detection) -> Self {
        Self {
            dt: f.dt,
            rates: (0..f.len())
                .map(|k| EffectiveRates::single_cavity(&f.sample(k), p, detection))
                .collect(),
        }
    }

    /// Homodyne detection of the filter resonator `b` of a cascaded pair.
    ///
    /// The filter output carries the sign of the cascade coupling, so the
    /// detector phase is `φ + π`: in the wide-band limit the record then
    /// coincides with the single-cavity record.
    pub fn cascaded_homodyne(f: &CascadedFields<T>, p: &SystemParams<T>) -> Self {
        let cav = &f.cavity;
        let kb = f.kappa_b;
        let g_ab = (p.kappa * kb).sqrt();
        let lo = -cis(-p.phi);
        let rates = (0..f.len())
            .map(|k| {
                let eps = cav.drive_on_step(k.min(cav.steps().saturating_sub(1)));
                let branch_data = |a: C<T>, b: C<T>, detuning: T| {
                    let adot = cplx(T::zero(), -eps) - cplx(T::zero(), detuning) * a - a.scale(p.kappa * T::lit(0.5));
                    let bdot = -(a.scale(g_ab) + b.scale(kb));
                    let energy = detuning * a.norm_sqr() + T::lit(2.0) * eps * a.re - g_ab * (a.conj() * b).im;
                    let l1 = a.scale(p.kappa.sqrt()) + b.scale(kb.sqrt());
                    let l2 = b.scale(kb.sqrt());
                    ([a, b], [adot, bdot], energy, [l1, l2])
                };
                let (mg, vg, eg, lg) = branch_data(cav.alpha_g[k], f.beta_g[k], p.delta_r - p.chi);
                let (me, ve, ee, le) = branch_data(cav.alpha_e[k], f.beta_e[k], p.delta_r + p.chi);
                let coherence = coherent_ansatz_rate(
                    p.omega_a,
                    Branch {
                        modes: &mg,
                        velocities: &vg,
                        energy: eg,
                        lindblad: &lg,
                    },
                    Branch {
                        modes: &me,
                        velocities: &ve,
                        energy: ee,
                        lindblad: &le,
                    },
                );
                let sk = re(kb.sqrt());
                EffectiveRates {
                    coherence,
                    monitored: [sk * f.beta_g[k] * lo, sk * f.beta_e[k] * lo],
                }
            })
            .collect();
        Self { dt: cav.dt, rates }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.rates.len().saturating_sub(1)
    }

    pub fn step(&self, k: usize) -> EffectiveStep<T> {
        EffectiveStep {
            start: self.rates[k],
            end: self.rates[k + 1],
        }
    }
}

/// Deterministic rotation angle accumulated over step `k`.
pub(crate) fn rotation_increment<T: Real>(step: &EffectiveStep<T>, dt: T) -> T {
    T::lit(0.5) * (step.start.coherence.im + step.end.coherence.im) * dt
}

/// Exact amplitude damping of `ρ` over `dt` at rate `γ₁`.
pub(crate) fn amplitude_damp<T: Real>(rho: &mut QubitState<T>, gamma1: T, dt: T) {
    if gamma1 > T::zero() {
        let keep = (-gamma1 * dt).exp();
        rho.rho_gg = T::one() - rho.rho_ee() * keep;
        rho.rho_eg = rho.rho_eg.scale(keep.sqrt());
    }
}

pub(crate) fn check_dt<T: Real>(dt: T) -> Result<()> {
    if dt > T::zero() && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{integrate_cascaded_fields, integrate_fields};
    use crate::linalg::purity;

    #[test]
    fn purity_examples() {
        assert!((QubitState::<f64>::ground().purity() - 1.0).abs() < 1e-15);
        assert!((QubitState::<f64>::plus().purity() - 1.0).abs() < 1e-15);
        let m = QubitState::new(0.5f64, cplx(0.0, 0.3)).unwrap();
        assert!((m.purity() - 0.68).abs() < 1e-15);
        assert!((m.purity() - purity(&m.to_matrix())).abs() < 1e-15);
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(QubitState::new(1.2, C::zero()).is_err());
        assert!(QubitState::new(0.5, cplx(0.6, 0.0)).is_err());
        assert!(QubitState::new(f64::NAN, C::zero()).is_err());
    }

    #[test]
    fn phase_correction_examples() {
        let r = QubitState::new(0.5f64, cis(0.3) * 0.5).unwrap();
        let c = apply_phase_correction(&r, StochasticPhase::new(0.3).unwrap());
        assert!((c.rho_eg - cplx(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(apply_phase_correction(&r, StochasticPhase::new(0.0).unwrap()), r);
        assert!((c.purity() - r.purity()).abs() < 1e-14);
    }

    #[test]
    fn matrix_round_trip() {
        let r = QubitState::from_amplitudes(cplx(0.6f64, 0.0), cplx(0.0, 0.8)).unwrap();
        let back = QubitState::from_matrix(&r.to_matrix()).unwrap();
        assert!((back.rho_gg - r.rho_gg).abs() < 1e-15);
        assert!((back.rho_eg - r.rho_eg).norm() < 1e-15);
        assert!((r.rho_eg - cplx(0.0, 0.48)).norm() < 1e-15);
    }

    #[test]
    fn records_validate() {
        assert!(MeasurementRecord::<f64>::photo(1e-3, 0, vec![0.1, 0.1]).is_err());
        assert!(MeasurementRecord::<f64>::photo(1e-3, 0, vec![0.1, 0.2]).is_ok());
        assert!(MeasurementRecord::homodyne(1e-3, 0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn ansatz_rate_reduces_to_single_cavity() {
        let p = SystemParams::<f64> {
            omega_a: 0.7,
            delta_r: 0.4,
            ..Default::default()
        };
        let f = integrate_fields(&p, 8.0, 1e-3).unwrap();
        for &k in &[0usize, 300, 2000, 4999, 5000, 5001, 7000] {
            let s = f.sample(k);
            let eps = f.drive_on_step(k);
            let data = |a: C<f64>, det: f64| {
                let v = cplx(0.0, -eps) - cplx(0.0, det) * a - a * 0.5;
                (v, det * a.norm_sqr() + 2.0 * eps * a.re, a)
            };
            let (vg, eg, lg) = data(s.alpha_g, p.delta_r - p.chi);
            let (ve, ee, le) = data(s.alpha_e, p.delta_r + p.chi);
            let rate = coherent_ansatz_rate(
                p.omega_a,
                Branch {
                    modes: &[s.alpha_g],
                    velocities: &[vg],
                    energy: eg,
                    lindblad: &[lg],
                },
                Branch {
                    modes: &[s.alpha_e],
                    velocities: &[ve],
                    energy: ee,
                    lindblad: &[le],
                },
            );
            let expect = EffectiveRates::single_cavity(&s, &p, Detection::Homodyne).coherence;
            assert!((rate - expect).norm() < 1e-12, "k = {k}: {rate} vs {expect}");
        }
    }

    #[test]
    fn cascaded_rate_tends_to_single_cavity() {
        let p = SystemParams::<f64> {
            kappa_b: 400.0,
            ..Default::default()
        };
        let cf = integrate_cascaded_fields(&p, 10.0, 1e-4).unwrap();
        let casc = RateTable::cascaded_homodyne(&cf, &p);
        let single = RateTable::single_cavity(&cf.cavity, &p, Detection::Homodyne);
        let k = cf.cavity.index_of(3.0);
        let (a, b) = (casc.rates[k], single.rates[k]);
        assert!(
            (a.coherence - b.coherence).norm() < 1e-2,
            "{} {}",
            a.coherence,
            b.coherence
        );
        for i in 0..2 {
            assert!((a.monitored[i] - b.monitored[i]).norm() < 1e-2);
        }
    }
}
