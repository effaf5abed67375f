//! Homodyne unraveling of the effective qubit model.

use super::{
    amplitude_damp, check_dt, rotation_increment, Detection, EffectiveRates, EffectiveStep, MeasurementRecord,
    QubitState, RateTable, StochasticPhase,
};
use crate::error::{Error, Result};
use crate::fields::{FieldStep, FieldTrajectory, SystemParams};
use crate::scalar::{cplx, re, Real, C};

#[inline]
fn diag_signal<T: Real>(m: C<T>, sqrt_eta: T) -> T {
    T::lit(2.0) * sqrt_eta * m.re
}

/// One homodyne step; returns the new state and the record increment
/// `j·dt = ⟨s⟩dt + dW`.
pub fn step_effective_homodyne<T: Real>(
    rho: &QubitState<T>,
    step: &EffectiveStep<T>,
    p: &SystemParams<T>,
    dw: T,
    dt: T,
) -> Result<(QubitState<T>, T)> {
    check_dt(dt)?;
    if !dw.is_finite() {
        return Err(Error::NonFinite("Wiener increment"));
    }
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let se = p.eta.sqrt();
    let (a, b) = (&step.start, &step.end);
    let sg0 = diag_signal(a.monitored[0], se);
    let se0 = diag_signal(a.monitored[1], se);
    let sg1 = diag_signal(b.monitored[0], se);
    let se1 = diag_signal(b.monitored[1], se);
    let seg0 = (a.monitored[1] + a.monitored[0].conj()).scale(se);
    let seg1 = (b.monitored[1] + b.monitored[0].conj()).scale(se);

    let gg = rho.rho_gg;
    let ee = rho.rho_ee();
    let dy = (gg * sg0 + ee * se0) * dt + dw;

    let lg = sg0 * dy - quarter * (sg0 * sg0 + sg1 * sg1) * dt;
    let le = se0 * dy - quarter * (se0 * se0 + se1 * se1) * dt;
    let leg = (a.coherence + b.coherence - (seg0 * seg0 + seg1 * seg1) * re(half)) * re(half * dt) + seg0 * re(dy)
        - re(p.gamma_phi * dt);
    let top = lg.max(le);
    let ng = gg * (lg - top).exp();
    let ne = ee * (le - top).exp();
    let neg = rho.rho_eg * (leg - re(top)).exp();
    let norm = ng + ne;
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::NonFinite("homodyne step normalization"));
    }
    let mut out = QubitState {
        rho_gg: ng / norm,
        rho_eg: neg / re(norm),
    };
    amplitude_damp(&mut out, p.gamma1, dt);
    if !out.rho_eg.re.is_finite() || !out.rho_eg.im.is_finite() {
        return Err(Error::NonFinite("homodyne step"));
    }
    Ok((out, dy))
}

/// One homodyne step of the single-cavity effective model.
pub fn step_homodyne<T: Real>(
    rho: &QubitState<T>,
    f: &FieldStep<T>,
    p: &SystemParams<T>,
    dw: T,
    dt: T,
) -> Result<(QubitState<T>, T)> {
    let step = EffectiveStep {
        start: EffectiveRates::single_cavity(&f.start, p, Detection::Homodyne),
        end: EffectiveRates::single_cavity(&f.end, p, Detection::Homodyne),
    };
    step_effective_homodyne(rho, &step, p, dw, dt)
}

fn check_grid<T: Real>(n: usize, f: &FieldTrajectory<T>) -> Result<()> {
    if n > f.steps() {
        return Err(Error::GridMismatch {
            record: n,
            fields: f.steps(),
        });
    }
    Ok(())
}

/// `dW[k] = j_k dt − 2√(κη) Im(α_g[k]) dt` (valid at `φ = π/2`, `Δ_r = 0`).
pub fn extract_noise<T: Real>(
    rec: &MeasurementRecord<T>,
    f: &FieldTrajectory<T>,
    p: &SystemParams<T>,
) -> Result<Vec<T>> {
    let samples = rec
        .samples()
        .ok_or_else(|| Error::InvalidParams("noise extraction needs a homodyne record".into()))?;
    check_grid(samples.len(), f)?;
    let c = T::lit(2.0) * (p.kappa * p.eta).sqrt() * f.dt;
    Ok(samples.iter().zip(&f.alpha_g).map(|(&j, a)| j - c * a.im).collect())
}

/// `θ = 2√(κη) Σ_k Re(α_g[k]) dW[k]`
pub fn stochastic_phase_homodyne<T: Real>(
    dws: &[T],
    f: &FieldTrajectory<T>,
    p: &SystemParams<T>,
) -> Result<StochasticPhase<T>> {
    stochastic_phase_homodyne_until(dws, f, p, dws.len())
}

/// Stochastic phase from the first `steps` increments only.
pub fn stochastic_phase_homodyne_until<T: Real>(
    dws: &[T],
    f: &FieldTrajectory<T>,
    p: &SystemParams<T>,
    steps: usize,
) -> Result<StochasticPhase<T>> {
    check_grid(dws.len(), f)?;
    let c = T::lit(2.0) * (p.kappa * p.eta).sqrt();
    let theta = dws
        .iter()
        .zip(&f.alpha_g)
        .take(steps)
        .fold(T::zero(), |acc, (&dw, a)| acc + a.re * dw);
    StochasticPhase::new(c * theta)
}

/// Cumulative `∫₀^{t_k} (−Γ_d + 2κη Re²α_g) ds` by trapezoid quadrature.
pub fn zero_dephasing_integral<T: Real>(f: &FieldTrajectory<T>, p: &SystemParams<T>) -> Vec<T> {
    let c = T::lit(2.0) * p.kappa * p.eta;
    let g = |k: usize| -f.gamma_d[k] + c * f.alpha_g[k].re * f.alpha_g[k].re;
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(f.len());
    out.push(acc);
    for k in 0..f.steps() {
        acc += T::lit(0.5) * (g(k) + g(k + 1)) * f.dt;
        out.push(acc);
    }
    out
}

/// `ρ_eg(t_k) = ρ_eg(0) exp(∫(−Γ_d + 2κη Re²α_g)ds + 2i√(κη)∫Re(α_g)dW)`
/// on the grid, for the first `dws.len()` steps.
pub fn analytic_offdiag_homodyne<T: Real>(
    rho_eg0: C<T>,
    f: &FieldTrajectory<T>,
    dws: &[T],
    p: &SystemParams<T>,
) -> Result<Vec<C<T>>> {
    check_grid(dws.len(), f)?;
    let decay = zero_dephasing_integral(f, p);
    let c = T::lit(2.0) * (p.kappa * p.eta).sqrt();
    let mut phase = T::zero();
    let mut out = Vec::with_capacity(dws.len() + 1);
    out.push(rho_eg0);
    for (k, &dw) in dws.iter().enumerate() {
        phase += c * f.alpha_g[k].re * dw;
        out.push(rho_eg0 * cplx(decay[k + 1], phase).exp());
    }
    Ok(out)
}

/// Streaming homodyne trajectory with the deterministic-rotation register
/// and the from-the-record phase estimates.
///
/// The phase estimate inverts the single-cavity current, so for a
/// bandwidth-limited record it reproduces the misestimated kick.
#[derive(Debug, Clone)]
pub struct HomodyneTrajectory<'a, T: Real> {
    rates: &'a RateTable<T>,
    fields: &'a FieldTrajectory<T>,
    params: SystemParams<T>,
    state: QubitState<T>,
    k: usize,
    rotation: T,
    theta_full: T,
    theta_truncated: T,
}

impl<'a, T: Real> HomodyneTrajectory<'a, T> {
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
            theta_full: T::zero(),
            theta_truncated: T::zero(),
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

    pub fn rotation(&self) -> T {
        self.rotation
    }

    /// Full-record phase estimate so far.
    pub fn theta(&self) -> T {
        self.theta_full
    }

    /// Phase estimate from the record up to pulse turn-off.
    pub fn theta_truncated(&self) -> T {
        self.theta_truncated
    }

    /// State with only the deterministic rotation removed.
    pub fn uncorrected(&self) -> QubitState<T> {
        self.state.rotated(self.rotation)
    }

    pub fn corrected(&self) -> QubitState<T> {
        self.state.rotated(self.rotation + self.theta_full)
    }

    pub fn corrected_truncated(&self) -> QubitState<T> {
        self.state.rotated(self.rotation + self.theta_truncated)
    }

    /// Advances one step with Wiener increment `dw`; returns `j·dt`.
    pub fn step(&mut self, dw: T) -> Result<T> {
        if self.is_done() {
            return Err(Error::GridMismatch {
                record: self.k + 1,
                fields: self.rates.steps(),
            });
        }
        let k = self.k;
        let dt = self.rates.dt;
        let step = self.rates.step(k);
        let (next, jdt) = step_effective_homodyne(&self.state, &step, &self.params, dw, dt)?;
        self.state = next;
        self.rotation += rotation_increment(&step, dt);
        let c = T::lit(2.0) * (self.params.kappa * self.params.eta).sqrt();
        let a = self.fields.alpha_g[k];
        let dw_est = jdt - c * a.im * dt;
        let kick = c * a.re * dw_est;
        self.theta_full += kick;
        if k < self.fields.pulse_off_step() {
            self.theta_truncated += kick;
        }
        self.k += 1;
        Ok(jdt)
    }

    /// Runs through all increments, returning the record samples.
    pub fn run(&mut self, dws: &[T]) -> Result<Vec<T>> {
        dws.iter().map(|&dw| self.step(dw)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{integrate_fields, FieldSample};
    use crate::linalg::{dissipator_apply, measure_apply, operators, ComplexMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn reference() -> SystemParams<f64> {
        SystemParams::default()
    }

    fn wiener(n: usize, dt: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, dt.sqrt()).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn run(p: &SystemParams<f64>, f: &FieldTrajectory<f64>, dws: &[f64]) -> HomodyneTrajectory<'static, f64> {
        let rates = Box::leak(Box::new(RateTable::single_cavity(f, p, Detection::Homodyne)));
        let f = Box::leak(Box::new(f.clone()));
        let mut tr = HomodyneTrajectory::new(rates, f, p, QubitState::plus()).unwrap();
        tr.run(dws).unwrap();
        tr
    }

    #[test]
    fn no_dispersive_shift_leaves_state_alone() {
        let p = reference().with_chi(0.0);
        let f = integrate_fields(&p, 6.0, 1e-3).unwrap();
        let dws = wiener(f.steps(), 1e-3, 1);
        let tr = run(&p, &f, &dws);
        let u = tr.uncorrected();
        assert!((u.rho_gg - 0.5).abs() < 1e-13);
        assert!((u.rho_eg - cplx(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn current_is_noise_plus_signal() {
        let p = reference();
        let s = FieldSample::new(cplx(0.3, -0.05), cplx(-0.3, -0.05), p.chi);
        let (_, j) = step_homodyne(&QubitState::ground(), &FieldStep::constant(s), &p, 0.01, 1e-3).unwrap();
        assert!((j - (0.01 + 2.0 * (-0.05) * 1e-3)).abs() < 1e-15);
        assert!(step_homodyne(&QubitState::ground(), &FieldStep::constant(s), &p, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_efficiency_is_deterministic() {
        let p = reference().with_eta(0.0);
        let f = integrate_fields(&p, 8.0, 1e-3).unwrap();
        let a = run(&p, &f, &wiener(f.steps(), 1e-3, 2));
        let b = run(&p, &f, &wiener(f.steps(), 1e-3, 3));
        assert!(a.state().trace_distance(&b.state()) < 1e-14);
        // |ρ_eg| follows exp(−∫Γ_d)
        let decay = zero_dephasing_integral(&f, &p);
        let expect = 0.5 * decay[f.steps()].exp();
        assert!((a.state().rho_eg.norm() - expect).abs() < 1e-12);
    }

    #[test]
    fn matches_analytic_solution() {
        let dt = 1e-4;
        let p = reference();
        let f = integrate_fields(&p, 15.0, dt).unwrap();
        let dws = wiener(f.steps(), dt, 7);
        let analytic = analytic_offdiag_homodyne(cplx(0.5, 0.0), &f, &dws, &p).unwrap();
        let rates = RateTable::single_cavity(&f, &p, Detection::Homodyne);
        let mut tr = HomodyneTrajectory::new(&rates, &f, &p, QubitState::plus()).unwrap();
        let mut worst: f64 = 0.0;
        for (k, &dw) in dws.iter().enumerate() {
            tr.step(dw).unwrap();
            if k % 97 == 0 {
                worst = worst.max((tr.uncorrected().rho_eg - analytic[k + 1]).norm());
            }
        }
        assert!(worst < 1e-5, "{worst}");
        let last = analytic[f.steps()];
        assert!((last.norm() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn corrected_phase_restored() {
        let dt = 1e-3;
        let p = reference();
        let f = integrate_fields(&p, 15.0, dt).unwrap();
        for seed in 0..5 {
            let tr = run(&p, &f, &wiener(f.steps(), dt, seed));
            let c = tr.corrected();
            assert!(c.rho_eg.arg().abs() < 2e-3);
            assert!((c.purity() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn noise_round_trip() {
        let dt = 1e-3;
        let p = reference();
        let f = integrate_fields(&p, 8.0, dt).unwrap();
        let dws = wiener(f.steps(), dt, 11);
        let rates = RateTable::single_cavity(&f, &p, Detection::Homodyne);
        let mut tr = HomodyneTrajectory::new(&rates, &f, &p, QubitState::plus()).unwrap();
        let rec = MeasurementRecord::homodyne(dt, 11, tr.run(&dws).unwrap()).unwrap();
        let back = extract_noise(&rec, &f, &p).unwrap();
        for (a, b) in back.iter().zip(&dws) {
            assert!((a - b).abs() < 1e-12);
        }
        let theta = stochastic_phase_homodyne(&back, &f, &p).unwrap();
        assert!((theta.theta - tr.theta()).abs() < 1e-12);
        let trunc = stochastic_phase_homodyne_until(&back, &f, &p, f.pulse_off_step()).unwrap();
        assert!((trunc.theta - tr.theta_truncated()).abs() < 1e-12);
    }

    #[test]
    fn noise_extraction_example() {
        let p = reference();
        let f =
            FieldTrajectory::from_samples(0.01, vec![cplx(0.2, -0.054); 2], vec![cplx(-0.2, -0.054); 2], 3.0).unwrap();
        let rec = MeasurementRecord::homodyne(0.01, 0, vec![0.05]).unwrap();
        let dw = extract_noise(&rec, &f, &p).unwrap();
        assert!((dw[0] - 0.05108).abs() < 1e-15);
        let too_long = MeasurementRecord::homodyne(0.01, 0, vec![0.05; 3]).unwrap();
        assert!(extract_noise(&too_long, &f, &p).is_err());
        let none = FieldTrajectory::from_samples(0.01, vec![C::default(); 4], vec![C::default(); 4], 3.0).unwrap();
        let rec = MeasurementRecord::homodyne(0.01, 0, vec![0.1, -0.2, 0.3]).unwrap();
        assert_eq!(extract_noise(&rec, &none, &p).unwrap(), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn single_increment_phase() {
        let p = reference();
        let f = FieldTrajectory::from_samples(0.01, vec![cplx(0.3, 0.0); 2], vec![cplx(-0.3, 0.0); 2], 3.0).unwrap();
        let th = stochastic_phase_homodyne(&[0.1], &f, &p).unwrap();
        assert!((th.theta - 0.06).abs() < 1e-15);
        let f0 = FieldTrajectory::from_samples(0.01, vec![cplx(0.0, 0.3); 3], vec![cplx(0.0, 0.3); 3], 3.0).unwrap();
        assert_eq!(stochastic_phase_homodyne(&[0.1, 0.2], &f0, &p).unwrap().theta, 0.0);
    }

    /// Euler–Maruyama on the matrix form
    /// `dρ = −i[(ω̃+B)σ_z/2, ρ]dt + (Γ_d/2)𝒟[σ_z]ρdt + γ₁𝒟[σ₋]ρdt + (γ_φ/2)𝒟[σ_z]ρdt
    ///       + √(κη)ℳ[Π_α e^{−iφ}]ρ dW`.
    fn em_reference(p: &SystemParams<f64>, f: &FieldTrajectory<f64>, dws: &[f64]) -> QubitState<f64> {
        let sz = operators::sigma_z::<f64>();
        let sm = operators::sigma_minus::<f64>();
        let mut rho = QubitState::<f64>::plus().to_matrix();
        let dt = f.dt;
        for (k, &dw) in dws.iter().enumerate() {
            let s = f.sample(k);
            let h = sz.scale_real(0.5 * (p.omega_a + s.stark_b));
            let mut d = (&h * &rho - &rho * &h).scale(cplx(0.0, -dt));
            d += &dissipator_apply(&sz, &rho)
                .unwrap()
                .scale_real(0.5 * (s.gamma_d + p.gamma_phi) * dt);
            d += &dissipator_apply(&sm, &rho).unwrap().scale_real(p.gamma1 * dt);
            let c = operators::pi_alpha(s.alpha_g, s.alpha_e).scale(crate::scalar::cis(-p.phi));
            d += &measure_apply(&c, &rho)
                .unwrap()
                .scale_real((p.kappa * p.eta).sqrt() * dw);
            rho += &d;
            rho.hermitize();
            let tr = rho.trace().re;
            rho = rho.scale_real(1.0 / tr);
        }
        let _ = ComplexMatrix::<f64>::identity(2);
        QubitState::from_matrix(&rho).unwrap()
    }

    #[test]
    fn agrees_with_matrix_euler_maruyama() {
        let dt = 2e-5;
        let p = SystemParams {
            omega_a: 0.3,
            gamma1: 0.05,
            gamma_phi: 0.02,
            eta: 0.7,
            ..reference()
        };
        let f = integrate_fields(&p, 7.0, dt).unwrap();
        let dws = wiener(f.steps(), dt, 5);
        let reference = em_reference(&p, &f, &dws);
        let rates = RateTable::single_cavity(&f, &p, Detection::Homodyne);
        let mut tr = HomodyneTrajectory::new(&rates, &f, &p, QubitState::plus()).unwrap();
        tr.run(&dws).unwrap();
        let d = tr.state().trace_distance(&reference);
        assert!(d < 5e-3, "{d}");
    }
}
