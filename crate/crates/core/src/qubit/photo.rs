//! Photodetection unraveling of the effective qubit model.

use super::{
    amplitude_damp, check_dt, rotation_increment, Detection, EffectiveRates, EffectiveStep, QubitState, RateTable,
    StochasticPhase,
};
use crate::error::{Error, Result};
use crate::fields::{FieldSample, FieldStep, FieldTrajectory, SystemParams};
use crate::scalar::{cis, re, Real, C};

/// Largest per-step jump probability accepted.
pub const MAX_JUMP_PROBABILITY: f64 = 0.01;

/// `η⟨c†c⟩dt` for the monitored operator.
pub fn jump_probability<T: Real>(rho: &QubitState<T>, rates: &EffectiveRates<T>, eta: T, dt: T) -> T {
    eta * (rho.rho_gg * rates.monitored[0].norm_sqr() + rho.rho_ee() * rates.monitored[1].norm_sqr()) * dt
}

/// Bernoulli thinning: a photon is detected iff `u < ηκ⟨Π_α†Π_α⟩dt`.
pub fn sample_jump<T: Real>(rho: &QubitState<T>, f: &FieldSample<T>, p: &SystemParams<T>, dt: T, u: T) -> Result<bool> {
    check_dt(dt)?;
    let rates = EffectiveRates::single_cavity(f, p, Detection::Photo);
    thinning(rho, &rates, p.eta, dt, u)
}

fn thinning<T: Real>(rho: &QubitState<T>, rates: &EffectiveRates<T>, eta: T, dt: T, u: T) -> Result<bool> {
    let prob = jump_probability(rho, rates, eta, dt);
    if !(prob < T::lit(MAX_JUMP_PROBABILITY)) {
        return Err(Error::StepTooLarge {
            probability: prob.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(u < prob)
}

/// One step of the normalized photodetection equation; the optional jump
/// is applied with the end-of-step fields.
pub fn step_effective_photo<T: Real>(
    rho: &QubitState<T>,
    step: &EffectiveStep<T>,
    p: &SystemParams<T>,
    jump: bool,
    dt: T,
) -> Result<QubitState<T>> {
    check_dt(dt)?;
    let half = T::lit(0.5);
    let (a, b) = (&step.start, &step.end);
    let eta = p.eta;
    let lg = -eta * half * (a.monitored[0].norm_sqr() + b.monitored[0].norm_sqr()) * dt;
    let le = -eta * half * (a.monitored[1].norm_sqr() + b.monitored[1].norm_sqr()) * dt;
    let cross0 = a.monitored[1] * a.monitored[0].conj();
    let cross1 = b.monitored[1] * b.monitored[0].conj();
    let leg = (a.coherence + b.coherence - (cross0 + cross1).scale(eta)) * re(half * dt) - re(p.gamma_phi * dt);
    let top = lg.max(le);
    let mut gg = rho.rho_gg * (lg - top).exp();
    let mut ee = rho.rho_ee() * (le - top).exp();
    let mut eg = rho.rho_eg * (leg - re(top)).exp();
    if jump {
        let (mg, me) = (b.monitored[0], b.monitored[1]);
        gg *= mg.norm_sqr();
        ee *= me.norm_sqr();
        eg = eg * me * mg.conj();
    }
    let norm = gg + ee;
    if !(norm > T::lit(1e-300)) {
        return Err(if jump { Error::UndefinedJump } else { Error::ZeroNorm });
    }
    let mut out = QubitState {
        rho_gg: gg / norm,
        rho_eg: eg / re(norm),
    };
    amplitude_damp(&mut out, p.gamma1, dt);
    if !out.rho_gg.is_finite() || !out.rho_eg.re.is_finite() || !out.rho_eg.im.is_finite() {
        return Err(Error::NonFinite("photodetection step"));
    }
    Ok(out)
}

/// One step of the single-cavity effective photodetection model.
pub fn step_photo<T: Real>(
    rho: &QubitState<T>,
    f: &FieldStep<T>,
    p: &SystemParams<T>,
    jump: bool,
    dt: T,
) -> Result<QubitState<T>> {
    let step = EffectiveStep {
        start: EffectiveRates::single_cavity(&f.start, p, Detection::Photo),
        end: EffectiveRates::single_cavity(&f.end, p, Detection::Photo),
    };
    step_effective_photo(rho, &step, p, jump, dt)
}

/// Grid indices of the jump times (a jump recorded at `t_{k+1}` happened
/// on step `k`).
fn jump_indices<T: Real>(jump_times: &[T], f: &FieldTrajectory<T>) -> Result<Vec<usize>> {
    jump_times
        .iter()
        .map(|&t| {
            let k = (t / f.dt).round().to_usize().unwrap_or(0);
            if k == 0 || k > f.steps() {
                Err(Error::GridMismatch {
                    record: k,
                    fields: f.steps(),
                })
            } else {
                Ok(k)
            }
        })
        .collect()
}

/// Cumulative `∫(−Γ_d + ηκ(α_e² + N_α))ds` by trapezoid quadrature.
fn photo_exponent<T: Real>(f: &FieldTrajectory<T>, p: &SystemParams<T>) -> Vec<C<T>> {
    let c = p.eta * p.kappa;
    let g = |k: usize| {
        let ae = f.alpha_e[k];
        re(-f.gamma_d[k]) + (ae * ae + re(f.n_alpha[k])).scale(c)
    };
    let mut acc = C::new(T::zero(), T::zero());
    let mut out = Vec::with_capacity(f.len());
    out.push(acc);
    for k in 0..f.steps() {
        acc += (g(k) + g(k + 1)) * re(T::lit(0.5) * f.dt);
        out.push(acc);
    }
    out
}

/// Product-form `ρ_eg` on the grid for a given photon record:
/// `ρ_eg(0) exp(∫(−Γ_d + ηκ(α_e² + N_α))ds) Π_N (−e^{2iξ(t_N)})`,
/// `ξ = Arg α_e`.
pub fn analytic_offdiag_photo<T: Real>(
    rho_eg0: C<T>,
    f: &FieldTrajectory<T>,
    jump_times: &[T],
    p: &SystemParams<T>,
) -> Result<Vec<C<T>>> {
    let jumps = jump_indices(jump_times, f)?;
    let expo = photo_exponent(f, p);
    let mut kick = C::new(T::one(), T::zero());
    let mut next = jumps.iter().peekable();
    let mut out = Vec::with_capacity(f.len());
    for (k, e) in expo.iter().enumerate() {
        while next.peek() == Some(&&k) {
            let xi = f.alpha_e[k].arg();
            kick = -kick * cis(T::lit(2.0) * xi);
            next.next();
        }
        out.push(rho_eg0 * e.exp() * kick);
    }
    Ok(out)
}

/// `θ = Σ_N (π + 2ξ(t_N)) + ηκ∫Im(α_e²)ds` over the whole grid.
pub fn photo_phase_correction<T: Real>(
    jump_times: &[T],
    f: &FieldTrajectory<T>,
    p: &SystemParams<T>,
) -> Result<StochasticPhase<T>> {
    photo_phase_correction_until(jump_times, f, p, f.steps())
}

/// Phase correction accumulated up to grid index `k_end`.
pub fn photo_phase_correction_until<T: Real>(
    jump_times: &[T],
    f: &FieldTrajectory<T>,
    p: &SystemParams<T>,
    k_end: usize,
) -> Result<StochasticPhase<T>> {
    let jumps = jump_indices(jump_times, f)?;
    let expo = photo_exponent(f, p);
    let k_end = k_end.min(f.steps());
    let kicks = jumps
        .iter()
        .filter(|&&k| k <= k_end)
        .fold(T::zero(), |acc, &k| acc + T::PI() + T::lit(2.0) * f.alpha_e[k].arg());
    StochasticPhase::new(kicks + expo[k_end].im)
}

/// Streaming photodetection trajectory.
#[derive(Debug, Clone)]
pub struct PhotoTrajectory<'a, T: Real> {
    rates: &'a RateTable<T>,
    fields: &'a FieldTrajectory<T>,
    params: SystemParams<T>,
    state: QubitState<T>,
    k: usize,
    rotation: T,
    theta: T,
    theta_truncated: T,
    jumps: Vec<T>,
}

impl<'a, T: Real> PhotoTrajectory<'a, T> {
    pub fn new(
        rates: &'a RateTable<T>,
        fields: &'a FieldTrajectory<T>,
        params: &SystemParams<T>,
        rho0: QubitState<T>,
    ) -> Result<Self> {
        if rates.len() != fields.len() {
            return Err(Error::GridMismatch {
                record: rates.len(),
                fields: fields.len(),
            });
        }
        Ok(Self {
            rates,
            fields,
            params: *params,
            state: rho0,
            k: 0,
            rotation: T::zero(),
            theta: T::zero(),
            theta_truncated: T::zero(),
            jumps: Vec::new(),
        })
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.rates.steps()
    }

    pub fn state(&self) -> QubitState<T> {
        self.state
    }

    pub fn jump_times(&self) -> &[T] {
        &self.jumps
    }

    pub fn rotation(&self) -> T {
        self.rotation
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Phase correction from the photons detected up to pulse turn-off.
    pub fn theta_truncated(&self) -> T {
        self.theta_truncated
    }

    pub fn uncorrected(&self) -> QubitState<T> {
        self.state.rotated(self.rotation)
    }

    pub fn corrected(&self) -> QubitState<T> {
        self.state.rotated(self.rotation + self.theta)
    }

    pub fn corrected_truncated(&self) -> QubitState<T> {
        self.state.rotated(self.rotation + self.theta_truncated)
    }

    /// Samples the jump with uniform `u`, then steps.
    pub fn step(&mut self, u: T) -> Result<bool> {
        let jump = thinning(
            &self.state,
            &self.rates.rates[self.k],
            self.params.eta,
            self.rates.dt,
            u,
        )?;
        self.step_with(jump)?;
        Ok(jump)
    }

    /// Steps with a prescribed jump outcome.
    pub fn step_with(&mut self, jump: bool) -> Result<()> {
        if self.is_done() {
            return Err(Error::GridMismatch {
                record: self.k + 1,
                fields: self.rates.steps(),
            });
        }
        let k = self.k;
        let dt = self.rates.dt;
        let step = self.rates.step(k);
        self.state = step_effective_photo(&self.state, &step, &self.params, jump, dt)?;
        self.rotation += rotation_increment(&step, dt);
        let (a0, a1) = (self.fields.alpha_e[k], self.fields.alpha_e[k + 1]);
        let c = self.params.eta * self.params.kappa;
        let mut kick = T::lit(0.5) * c * ((a0 * a0).im + (a1 * a1).im) * dt;
        if jump {
            kick += T::PI() + T::lit(2.0) * a1.arg();
            self.jumps.push(self.fields.time(k + 1));
        }
        self.theta += kick;
        if k < self.fields.pulse_off_step() {
            self.theta_truncated += kick;
        }
        self.k += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::integrate_fields;
    use crate::linalg::{dissipator_apply, measure_apply, operators};
    use crate::scalar::cplx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference() -> SystemParams<f64> {
        SystemParams::default()
    }

    fn steady() -> FieldSample<f64> {
        let a = cplx(12.0 / 37.0, -2.0 / 37.0);
        FieldSample::new(a, -a.conj(), 3.0)
    }

    #[test]
    fn jump_probability_examples() {
        let p = reference();
        let rho = QubitState::plus();
        let pr = jump_probability(
            &rho,
            &EffectiveRates::single_cavity(&steady(), &p, Detection::Photo),
            1.0,
            0.01,
        );
        assert!((pr - 0.04 / 37.0).abs() < 1e-15);
        let dark = FieldSample::new(C::default(), C::default(), 3.0);
        for u in [0.0, 1e-9, 0.5] {
            assert!(!sample_jump(&rho, &dark, &p, 0.01, u).unwrap());
        }
        assert!(matches!(
            sample_jump(&rho, &steady(), &p, 1.0, 0.5),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn empirical_jump_rate() {
        let p = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let dt = 0.01;
        let rho = QubitState::plus();
        let s = steady();
        let count = (0..n)
            .filter(|_| sample_jump(&rho, &s, &p, dt, rng.gen::<f64>()).unwrap())
            .count() as f64;
        let mean = n as f64 * s.n_alpha() * dt;
        let sigma = (mean * (1.0 - s.n_alpha() * dt)).sqrt();
        assert!((count - mean).abs() < 3.0 * sigma, "{count} vs {mean} ± {sigma}");
    }

    #[test]
    fn equal_branches_make_jumps_invisible() {
        let p = reference();
        let a = cplx(0.3, 0.1);
        let s = FieldSample::new(a, a, 3.0);
        let rho = QubitState::new(0.3, cplx(0.1, -0.2)).unwrap();
        let with = step_photo(&rho, &FieldStep::constant(s), &p, true, 1e-3).unwrap();
        let without = step_photo(&rho, &FieldStep::constant(s), &p, false, 1e-3).unwrap();
        assert!(with.trace_distance(&without) < 1e-15);
        let dark = FieldSample::new(C::default(), C::default(), 3.0);
        assert!(matches!(
            step_photo(&rho, &FieldStep::constant(dark), &p, true, 1e-3),
            Err(Error::UndefinedJump)
        ));
    }

    #[test]
    fn single_kick_examples() {
        let p = reference();
        let dt = 0.5;
        let alpha_e = vec![cplx(-0.3, 0.0); 3];
        let alpha_g = vec![cplx(0.3, 0.0); 3];
        let f = FieldTrajectory::from_samples(dt, alpha_g, alpha_e, 3.0).unwrap();
        let with = analytic_offdiag_photo(cplx(1.0, 0.0), &f, &[0.5], &p).unwrap();
        let without = analytic_offdiag_photo(cplx(1.0, 0.0), &f, &[], &p).unwrap();
        assert!((with[2] / without[2] - cplx(-1.0, 0.0)).norm() < 1e-12);

        let s = steady();
        let f = FieldTrajectory::from_samples(dt, vec![s.alpha_g; 3], vec![s.alpha_e; 3], 3.0).unwrap();
        let with = analytic_offdiag_photo(cplx(1.0, 0.0), &f, &[1.0], &p).unwrap();
        let without = analytic_offdiag_photo(cplx(1.0, 0.0), &f, &[], &p).unwrap();
        let xi = (-0.0541f64).atan2(-0.3243);
        assert!((with[2] / without[2] - (-cis(2.0 * xi))).norm() < 1e-3);
        let th =
            photo_phase_correction(&[1.0], &f, &p).unwrap().theta - photo_phase_correction(&[], &f, &p).unwrap().theta;
        assert!((th - (std::f64::consts::PI + 2.0 * s.alpha_e.arg())).abs() < 1e-14);
    }

    #[test]
    fn no_drive_no_phase() {
        let p = SystemParams {
            epsilon_m: 0.0,
            ..reference()
        };
        let f = integrate_fields(&p, 10.0, 1e-2).unwrap();
        assert_eq!(photo_phase_correction(&[], &f, &p).unwrap().theta, 0.0);
    }

    fn fixed_record(f: &FieldTrajectory<f64>, seed: u64) -> Vec<bool> {
        // jumps drawn once at a boosted rate so every record has several
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..f.steps())
            .map(|k| rng.gen::<f64>() < 30.0 * f.n_alpha[k] * f.dt)
            .collect()
    }

    #[test]
    fn matches_analytic_product_form() {
        let dt = 1e-4;
        let p = reference();
        let f = integrate_fields(&p, 15.0, dt).unwrap();
        let rates = RateTable::single_cavity(&f, &p, Detection::Photo);
        for seed in 0..3 {
            let record = fixed_record(&f, seed);
            let mut tr = PhotoTrajectory::new(&rates, &f, &p, QubitState::plus()).unwrap();
            let mut worst: f64 = 0.0;
            let mut states = vec![tr.uncorrected().rho_eg];
            for &j in &record {
                tr.step_with(j).unwrap();
                states.push(tr.uncorrected().rho_eg);
            }
            assert!(!tr.jump_times().is_empty());
            let analytic = analytic_offdiag_photo(cplx(0.5, 0.0), &f, tr.jump_times(), &p).unwrap();
            for (a, b) in states.iter().zip(&analytic) {
                worst = worst.max((a - b).norm());
            }
            assert!(worst < 1e-5, "seed {seed}: {worst}");
            let c = tr.corrected();
            assert!((c.rho_eg - cplx(0.5, 0.0)).norm() < 2e-3);
            assert!((c.rho_eg.norm() - 0.5).abs() < 1e-4);
            let th = photo_phase_correction(tr.jump_times(), &f, &p).unwrap();
            assert!((th.theta - tr.theta()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_efficiency_is_unconditional() {
        let p = reference().with_eta(0.0);
        let f = integrate_fields(&p, 8.0, 1e-3).unwrap();
        let rates = RateTable::single_cavity(&f, &p, Detection::Photo);
        let mut tr = PhotoTrajectory::new(&rates, &f, &p, QubitState::plus()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        while !tr.is_done() {
            assert!(!tr.step(rng.gen()).unwrap());
        }
        let hrates = RateTable::single_cavity(&f, &p, Detection::Homodyne);
        let mut h = super::super::HomodyneTrajectory::new(&hrates, &f, &p, QubitState::plus()).unwrap();
        h.run(&vec![0.0; f.steps()]).unwrap();
        assert!(tr.state().trace_distance(&h.state()) < 1e-13);
    }

    /// Right-hand side of the normalized no-jump equation
    /// `L_eff ρ − ηκ𝒟[Π_α]ρ − ½ηκℳ[Π_α†Π_α]ρ`.
    fn no_jump_rhs(s: &FieldSample<f64>, p: &SystemParams<f64>, rho: &QubitState<f64>) -> QubitState<f64> {
        let m = rho.to_matrix();
        let sz = operators::sigma_z::<f64>();
        let h = sz.scale_real(0.5 * (p.omega_a + s.stark_b));
        let mut d = (&h * &m - &m * &h).scale(cplx(0.0, -1.0));
        d += &dissipator_apply(&sz, &m).unwrap().scale_real(0.5 * s.gamma_d);
        let pi = operators::pi_alpha(s.alpha_g, s.alpha_e);
        d -= &dissipator_apply(&pi, &m).unwrap().scale_real(p.eta * p.kappa);
        let pp = &pi.dagger() * &pi;
        d -= &measure_apply(&pp, &m).unwrap().scale_real(0.5 * p.eta * p.kappa);
        QubitState {
            rho_gg: d[(0, 0)].re,
            rho_eg: d[(1, 0)],
        }
    }

    #[test]
    fn no_jump_step_matches_normalized_equation() {
        let p = SystemParams {
            eta: 0.6,
            omega_a: 0.2,
            ..reference()
        };
        let s = FieldSample::new(cplx(0.31, -0.12), cplx(-0.25, -0.2), 3.0);
        let rho = QubitState::new(0.4, cplx(0.2, 0.15)).unwrap();
        let dt = 1e-6;
        let next = step_photo(&rho, &FieldStep::constant(s), &p, false, dt).unwrap();
        let rhs = no_jump_rhs(&s, &p, &rho);
        assert!(((next.rho_gg - rho.rho_gg) / dt - rhs.rho_gg).abs() < 1e-5);
        assert!(((next.rho_eg - rho.rho_eg) / dt - rhs.rho_eg).norm() < 1e-5);
    }

    #[test]
    fn jump_average_recovers_dissipator() {
        // E[−½ηκℳ[Π†Π]ρdt + 𝒢[Π]ρdN] = ηκ𝒟[Π]ρdt for Π with general α's
        let p = reference();
        let (ag, ae) = (cplx(0.31, -0.12), cplx(-0.25, -0.2));
        let pi = operators::pi_alpha(ag, ae);
        let rho = QubitState::new(0.4, cplx(0.2, 0.15)).unwrap().to_matrix();
        let dt = 0.05;
        let pp = &pi.dagger() * &pi;
        let rate = p.eta * p.kappa * pp.expectation(&rho).re;
        let drift = measure_apply(&pp, &rho)
            .unwrap()
            .scale_real(-0.5 * p.eta * p.kappa * dt);
        let jump = crate::linalg::jump_apply(&pi, &rho).unwrap();
        let target = dissipator_apply(&pi, &rho).unwrap().scale_real(p.eta * p.kappa * dt);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = crate::linalg::ComplexMatrix::<f64>::zeros(2);
        let mut sum_sq = [0.0f64; 2];
        for _ in 0..n {
            let mut x = drift.clone();
            if rng.gen::<f64>() < rate * dt {
                x += &jump;
            }
            sum += &x;
            sum_sq[0] += x[(0, 0)].re.powi(2);
            sum_sq[1] += x[(1, 0)].norm_sqr();
        }
        let mean = sum.scale_real(1.0 / n as f64);
        for (i, (r, c)) in [(0usize, 0usize), (1, 0)].into_iter().enumerate() {
            let m = mean[(r, c)];
            let var = sum_sq[i] / n as f64 - m.norm_sqr();
            let se = (var / n as f64).sqrt();
            assert!(
                (m - target[(r, c)]).norm() < 3.0 * se + 1e-15,
                "{m} vs {}",
                target[(r, c)]
            );
        }
    }
}
