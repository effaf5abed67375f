//! Coherent pointer-state amplitudes of the readout resonator under a
//! rectangular measurement pulse, and the rates derived from them.
//!
//! The resonator amplitude conditioned on the qubit being in `|g⟩` or
//! `|e⟩` obeys
//!
//! ```text
//! α̇_g = −iε_d(t) − i(Δ_r − χ)α_g − κα_g/2
//! α̇_e = −iε_d(t) − i(Δ_r + χ)α_e − κα_e/2
//! ```
//!
//! with `ε_d(t) = ε_m` for `0 ≤ t < t_meas` and zero otherwise. All times
//! and rates are in units where `κ = 1`.

use crate::error::{Error, Result};
use crate::scalar::{cplx, re, Real, C};
use num_traits::Zero;

/// Physical parameters, in units of `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T: Real> {
    pub chi: T,
    pub kappa: T,
    pub eta: T,
    pub epsilon_m: T,
    pub delta_r: T,
    /// Pulse length; `+∞` holds the drive on.
    pub t_meas: T,
    pub t_off: T,
    /// Local-oscillator phase.
    pub phi: T,
    pub gamma1: T,
    pub gamma_phi: T,
    pub omega_a: T,
    /// Filter-resonator loss rate per side, `BW/2`.
    pub kappa_b: T,
}

impl<T: Real> Default for SystemParams<T> {
    /// `ε_m = κ`, `χ = 3κ`, `t_meas = 5/κ`, `η = 1`, `φ = π/2`.
    fn default() -> Self {
        Self {
            chi: T::lit(3.0),
            kappa: T::one(),
            eta: T::one(),
            epsilon_m: T::one(),
            delta_r: T::zero(),
            t_meas: T::lit(5.0),
            t_off: T::lit(10.0),
            phi: T::FRAC_PI_2(),
            gamma1: T::zero(),
            gamma_phi: T::zero(),
            omega_a: T::zero(),
            kappa_b: T::lit(5.0),
        }
    }
}

impl<T: Real> SystemParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.eta >= T::zero() && self.eta <= T::one()) {
            return bad("eta must lie in [0, 1]");
        }
        if !(self.t_meas >= T::zero()) || !(self.t_off >= T::zero()) {
            return bad("t_meas and t_off must be non-negative");
        }
        if !(self.kappa > T::zero()) {
            return bad("kappa must be positive");
        }
        if !(self.kappa_b > T::zero()) {
            return bad("kappa_b must be positive");
        }
        if self.gamma1 < T::zero() || self.gamma_phi < T::zero() {
            return bad("qubit decay rates must be non-negative");
        }
        let finite = [
            self.chi,
            self.epsilon_m,
            self.delta_r,
            self.phi,
            self.omega_a,
            self.t_off,
            self.gamma1,
            self.gamma_phi,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite");
        }
        Ok(())
    }

    pub fn drive_held(&self) -> bool {
        self.t_meas.is_infinite()
    }

    /// Drive amplitude at time `t`.
    pub fn drive(&self, t: T) -> T {
        if t >= T::zero() && t < self.t_meas {
            self.epsilon_m
        } else {
            T::zero()
        }
    }

    /// Total record length `t_meas + t_off` (just `t_off` for a held drive).
    pub fn record_length(&self) -> T {
        if self.drive_held() {
            self.t_off
        } else {
            self.t_meas + self.t_off
        }
    }

    pub fn with_chi(self, chi: T) -> Self {
        Self { chi, ..self }
    }

    pub fn with_eta(self, eta: T) -> Self {
        Self { eta, ..self }
    }

    fn detuning(&self, branch: Branch) -> T {
        match branch {
            Branch::G => self.delta_r - self.chi,
            Branch::E => self.delta_r + self.chi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    G,
    E,
}

#[inline]
fn field_rhs<T: Real>(alpha: C<T>, eps: T, detuning: T, kappa: T) -> C<T> {
    cplx(T::zero(), -eps) - cplx(T::zero(), detuning) * alpha - alpha.scale(kappa * T::lit(0.5))
}

#[inline]
fn rk4<T: Real>(alpha: C<T>, eps: T, detuning: T, kappa: T, dt: T) -> C<T> {
    let h = re(dt);
    let half = re(dt * T::lit(0.5));
    let k1 = field_rhs(alpha, eps, detuning, kappa);
    let k2 = field_rhs(alpha + half * k1, eps, detuning, kappa);
    let k3 = field_rhs(alpha + half * k2, eps, detuning, kappa);
    let k4 = field_rhs(alpha + h * k3, eps, detuning, kappa);
    alpha + h * (k1 + k2 * re(T::lit(2.0)) + k3 * re(T::lit(2.0)) + k4) / re(T::lit(6.0))
}

/// `Γ_d = 2χ Im(α_g α_e*)`
pub fn dephasing_rate<T: Real>(alpha_g: C<T>, alpha_e: C<T>, chi: T) -> T {
    T::lit(2.0) * chi * (alpha_g * alpha_e.conj()).im
}

/// `B = 2χ Re(α_g α_e*)`
pub fn stark_shift<T: Real>(alpha_g: C<T>, alpha_e: C<T>, chi: T) -> T {
    T::lit(2.0) * chi * (alpha_g * alpha_e.conj()).re
}

/// Field values at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<T: Real> {
    pub alpha_g: C<T>,
    pub alpha_e: C<T>,
    pub gamma_d: T,
    pub stark_b: T,
}

impl<T: Real> FieldSample<T> {
    pub fn new(alpha_g: C<T>, alpha_e: C<T>, chi: T) -> Self {
        Self {
            alpha_g,
            alpha_e,
            gamma_d: dephasing_rate(alpha_g, alpha_e, chi),
            stark_b: stark_shift(alpha_g, alpha_e, chi),
        }
    }

    /// `N_α = |α_g|²`
    pub fn n_alpha(&self) -> T {
        self.alpha_g.norm_sqr()
    }
}

/// Field values at both ends of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStep<T: Real> {
    pub start: FieldSample<T>,
    pub end: FieldSample<T>,
}

impl<T: Real> FieldStep<T> {
    /// Constant fields over the step.
    pub fn constant(sample: FieldSample<T>) -> Self {
        Self {
            start: sample,
            end: sample,
        }
    }
}

/// Pointer amplitudes on a uniform grid `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory<T: Real> {
    pub dt: T,
    pub alpha_g: Vec<C<T>>,
    pub alpha_e: Vec<C<T>>,
    pub gamma_d: Vec<T>,
    pub stark_b: Vec<T>,
    pub n_alpha: Vec<T>,
    chi: T,
    /// `(κ, Δ_r, ε_m)` when the samples come from the field equations.
    dynamics: Option<(T, T, T)>,
    /// First step index with the drive off (`usize::MAX` for a held drive).
    pulse_off_step: usize,
}

impl<T: Real> FieldTrajectory<T> {
    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.alpha_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_g.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn time(&self, k: usize) -> T {
        self.dt * T::from_usize_lossy(k)
    }

    pub fn chi(&self) -> T {
        self.chi
    }

    pub fn pulse_off_step(&self) -> usize {
        self.pulse_off_step
    }

    /// Drive amplitude used on step `k → k+1`.
    pub fn drive_on_step(&self, k: usize) -> T {
        match self.dynamics {
            Some((_, _, eps)) if k < self.pulse_off_step => eps,
            _ => T::zero(),
        }
    }

    pub fn sample(&self, k: usize) -> FieldSample<T> {
        FieldSample {
            alpha_g: self.alpha_g[k],
            alpha_e: self.alpha_e[k],
            gamma_d: self.gamma_d[k],
            stark_b: self.stark_b[k],
        }
    }

    pub fn step(&self, k: usize) -> FieldStep<T> {
        FieldStep {
            start: self.sample(k),
            end: self.sample(k + 1),
        }
    }

    /// Fields half-way through step `k`; tabulated samples are interpolated
    /// linearly.
    pub fn midpoint(&self, k: usize) -> FieldSample<T> {
        let Some((kappa, delta_r, _)) = self.dynamics else {
            let h = re(T::lit(0.5));
            return FieldSample::new(
                (self.alpha_g[k] + self.alpha_g[k + 1]) * h,
                (self.alpha_e[k] + self.alpha_e[k + 1]) * h,
                self.chi,
            );
        };
        let eps = self.drive_on_step(k);
        let h = self.dt * T::lit(0.5);
        let ag = rk4(self.alpha_g[k], eps, delta_r - self.chi, kappa, h);
        let ae = rk4(self.alpha_e[k], eps, delta_r + self.chi, kappa, h);
        FieldSample::new(ag, ae, self.chi)
    }

    /// Wraps tabulated amplitudes (no drive information).
    pub fn from_samples(dt: T, alpha_g: Vec<C<T>>, alpha_e: Vec<C<T>>, chi: T) -> Result<Self> {
        if alpha_g.len() != alpha_e.len() || alpha_g.is_empty() {
            return Err(Error::GridMismatch {
                record: alpha_g.len(),
                fields: alpha_e.len(),
            });
        }
        grid_steps(T::zero(), dt)?;
        Ok(Self::assemble(dt, alpha_g, alpha_e, chi, None, usize::MAX))
    }

    fn assemble(
        dt: T,
        alpha_g: Vec<C<T>>,
        alpha_e: Vec<C<T>>,
        chi: T,
        dynamics: Option<(T, T, T)>,
        pulse_off_step: usize,
    ) -> Self {
        let gamma_d = alpha_g
            .iter()
            .zip(&alpha_e)
            .map(|(&g, &e)| dephasing_rate(g, e, chi))
            .collect();
        let stark_b = alpha_g
            .iter()
            .zip(&alpha_e)
            .map(|(&g, &e)| stark_shift(g, e, chi))
            .collect();
        let n_alpha = alpha_g.iter().map(|z| z.norm_sqr()).collect();
        Self {
            dt,
            alpha_g,
            alpha_e,
            gamma_d,
            stark_b,
            n_alpha,
            chi,
            dynamics,
            pulse_off_step,
        }
    }

    /// Grid index nearest to time `t`.
    pub fn index_of(&self, t: T) -> usize {
        (t / self.dt).round().to_usize().unwrap_or(0).min(self.steps())
    }

    pub fn max_abs_alpha(&self) -> T {
        self.alpha_g
            .iter()
            .chain(&self.alpha_e)
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }
}

fn grid_steps<T: Real>(span: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)));
    }
    if !(span >= T::zero()) || !span.is_finite() {
        return Err(Error::InvalidParams("integration span must be finite and ≥ 0".into()));
    }
    Ok((span / dt).round().to_usize().unwrap_or(0))
}

fn pulse_off_step<T: Real>(p: &SystemParams<T>, dt: T) -> usize {
    if p.drive_held() {
        usize::MAX
    } else {
        // pulse edges are snapped to the grid
        (p.t_meas / dt).round().to_usize().unwrap_or(0)
    }
}

/// Integrates both branch amplitudes from the vacuum with classical RK4.
pub fn integrate_fields<T: Real>(p: &SystemParams<T>, t_end: T, dt: T) -> Result<FieldTrajectory<T>> {
    let steps = grid_steps(t_end, dt)?;
    let off = pulse_off_step(p, dt);
    let mut alpha_g = Vec::with_capacity(steps + 1);
    let mut alpha_e = Vec::with_capacity(steps + 1);
    let (mut ag, mut ae) = (C::zero(), C::zero());
    alpha_g.push(ag);
    alpha_e.push(ae);
    for k in 0..steps {
        let eps = if k < off { p.epsilon_m } else { T::zero() };
        ag = rk4(ag, eps, p.detuning(Branch::G), p.kappa, dt);
        ae = rk4(ae, eps, p.detuning(Branch::E), p.kappa, dt);
        alpha_g.push(ag);
        alpha_e.push(ae);
    }
    Ok(FieldTrajectory::assemble(
        dt,
        alpha_g,
        alpha_e,
        p.chi,
        Some((p.kappa, p.delta_r, p.epsilon_m)),
        off,
    ))
}

/// Closed-form amplitude of `branch` under the rectangular pulse.
pub fn alpha_closed_form<T: Real>(p: &SystemParams<T>, t: T, branch: Branch) -> C<T> {
    if t <= T::zero() {
        return C::zero();
    }
    // α = (−iε_m/s)[(1 − e^{−st})Θ(t) − (1 − e^{−s(t−t_meas)})Θ(t − t_meas)]
    let s = cplx(p.kappa * T::lit(0.5), p.detuning(branch));
    let amp = cplx(T::zero(), -p.epsilon_m) / s;
    let one = re(T::one());
    let mut bracket = one - (-s * re(t)).exp();
    if t > p.t_meas {
        bracket -= one - (-s * re(t - p.t_meas)).exp();
    }
    amp * bracket
}

/// `α_g(t) = 2ε_m/(2χ + iκ)[(1 − e^{−(κ/2 − iχ)t})Θ(t) − (…)Θ(t − t_meas)]`
/// for a resonant drive.
pub fn alpha_g_closed_form<T: Real>(p: &SystemParams<T>, t: T) -> C<T> {
    alpha_closed_form(p, t, Branch::G)
}

/// Amplitudes `α_ge`, `α_eg` of a two-qubit parity readout; they follow the
/// single-qubit equations with `χ → 2χ` and are returned in the `g`/`e`
/// slots respectively.
pub fn parity_fields<T: Real>(p: &SystemParams<T>, t_end: T, dt: T) -> Result<FieldTrajectory<T>> {
    integrate_fields(&p.with_chi(p.chi * T::lit(2.0)), t_end, dt)
}

/// Readout resonator followed by a filter resonator `b` with loss `κ_b` per
/// side:
///
/// ```text
/// β̇_i = −√(κκ_b) α_i − κ_b β_i
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedFields<T: Real> {
    pub cavity: FieldTrajectory<T>,
    pub beta_g: Vec<C<T>>,
    pub beta_e: Vec<C<T>>,
    pub kappa_b: T,
}

#[inline]
fn cascade_rhs<T: Real>(a: C<T>, b: C<T>, eps: T, detuning: T, kappa: T, kappa_b: T) -> (C<T>, C<T>) {
    (
        field_rhs(a, eps, detuning, kappa),
        -(a.scale((kappa * kappa_b).sqrt()) + b.scale(kappa_b)),
    )
}

fn cascade_rk4<T: Real>(a: C<T>, b: C<T>, eps: T, detuning: T, kappa: T, kappa_b: T, dt: T) -> (C<T>, C<T>) {
    let f = |a, b| cascade_rhs(a, b, eps, detuning, kappa, kappa_b);
    let h = re(dt);
    let half = re(dt * T::lit(0.5));
    let two = re(T::lit(2.0));
    let (ka1, kb1) = f(a, b);
    let (ka2, kb2) = f(a + half * ka1, b + half * kb1);
    let (ka3, kb3) = f(a + half * ka2, b + half * kb2);
    let (ka4, kb4) = f(a + h * ka3, b + h * kb3);
    let sixth = re(T::one() / T::lit(6.0));
    (
        a + h * sixth * (ka1 + two * ka2 + two * ka3 + ka4),
        b + h * sixth * (kb1 + two * kb2 + two * kb3 + kb4),
    )
}

pub fn integrate_cascaded_fields<T: Real>(p: &SystemParams<T>, t_end: T, dt: T) -> Result<CascadedFields<T>> {
    p.validate()?;
    let cavity = integrate_fields(p, t_end, dt)?;
    let off = cavity.pulse_off_step;
    let steps = cavity.steps();
    let mut beta_g = Vec::with_capacity(steps + 1);
    let mut beta_e = Vec::with_capacity(steps + 1);
    let (mut ag, mut ae, mut bg, mut be) = (C::zero(), C::zero(), C::zero(), C::zero());
    beta_g.push(bg);
    beta_e.push(be);
    for k in 0..steps {
        let eps = if k < off { p.epsilon_m } else { T::zero() };
        let (ag2, bg2) = cascade_rk4(ag, bg, eps, p.detuning(Branch::G), p.kappa, p.kappa_b, dt);
        let (ae2, be2) = cascade_rk4(ae, be, eps, p.detuning(Branch::E), p.kappa, p.kappa_b, dt);
        ag = ag2;
        ae = ae2;
        bg = bg2;
        be = be2;
        beta_g.push(bg);
        beta_e.push(be);
    }
    Ok(CascadedFields {
        cavity,
        beta_g,
        beta_e,
        kappa_b: p.kappa_b,
    })
}

impl<T: Real> CascadedFields<T> {
    pub fn len(&self) -> usize {
        self.beta_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_g.is_empty()
    }

    pub fn max_abs_beta(&self) -> T {
        self.beta_g
            .iter()
            .chain(&self.beta_e)
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SystemParams<f64> {
        SystemParams::default()
    }

    #[test]
    fn no_drive_no_field() {
        let p = SystemParams {
            epsilon_m: 0.0,
            ..reference()
        };
        let f = integrate_fields(&p, 3.0, 1e-2).unwrap();
        assert!(f.max_abs_alpha() == 0.0);
    }

    #[test]
    fn zero_chi_gives_identical_branches() {
        let p = reference().with_chi(0.0);
        let f = integrate_fields(&p, 8.0, 1e-2).unwrap();
        for k in 0..f.len() {
            assert_eq!(f.alpha_g[k], f.alpha_e[k]);
        }
    }

    #[test]
    fn steady_state_during_pulse() {
        let p = SystemParams {
            t_meas: f64::INFINITY,
            ..reference()
        };
        let f = integrate_fields(&p, 60.0, 1e-3).unwrap();
        let ss = cplx(12.0 / 37.0, -2.0 / 37.0);
        let last = f.sample(f.steps());
        assert!((last.alpha_g - ss).norm() < 1e-10);
        assert!((last.gamma_d - 288.0 / 1369.0).abs() < 1e-9);
        assert!((last.stark_b + 840.0 / 1369.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_rk4() {
        let p = reference();
        let f = integrate_fields(&p, 15.0, 1e-4).unwrap();
        for k in (0..f.len()).step_by(997) {
            let t = f.time(k);
            assert!((alpha_g_closed_form(&p, t) - f.alpha_g[k]).norm() < 1e-8, "t = {t}");
            assert!((alpha_closed_form(&p, t, Branch::E) - f.alpha_e[k]).norm() < 1e-8);
        }
        let a5 = alpha_g_closed_form(&p, 5.0);
        assert!((a5 - cplx(0.342, -0.075)).norm() < 2e-3, "{a5}");
        assert_eq!(alpha_g_closed_form(&p, 0.0), C::zero());
    }

    #[test]
    fn rate_examples() {
        let a = cplx(0.4f64, 0.0);
        assert!((stark_shift(a, a, 3.0) - 2.0 * 3.0 * 0.16).abs() < 1e-15);
        assert_eq!(dephasing_rate(a, a, 3.0), 0.0);
        assert!(dephasing_rate(cplx(0.0f64, 1.0), cplx(0.0, -1.0), 3.0).abs() < 1e-15);
        assert!(stark_shift(cplx(1.0f64, 0.0), cplx(0.0, 1.0), 3.0).abs() < 1e-15);
    }

    #[test]
    fn parity_fields_double_chi() {
        let p = reference();
        let a = parity_fields(&p, 6.0, 1e-3).unwrap();
        let b = integrate_fields(&p.with_chi(6.0), 6.0, 1e-3).unwrap();
        assert_eq!(a, b);
        let z = reference().with_chi(0.0);
        assert_eq!(
            parity_fields(&z, 2.0, 1e-3).unwrap(),
            integrate_fields(&z, 2.0, 1e-3).unwrap()
        );
    }

    #[test]
    fn midpoint_matches_closed_form() {
        let p = reference();
        let f = integrate_fields(&p, 6.0, 1e-3).unwrap();
        for &k in &[0usize, 100, 4999, 5000, 5500] {
            let t = f.time(k) + 5e-4;
            let m = f.midpoint(k);
            assert!((m.alpha_g - alpha_g_closed_form(&p, t)).norm() < 1e-10);
        }
    }

    #[test]
    fn cascaded_filter_follows_adiabatically_at_large_bandwidth() {
        let p = SystemParams {
            kappa_b: 200.0,
            ..reference()
        };
        let f = integrate_cascaded_fields(&p, 10.0, 1e-4).unwrap();
        let k = f.cavity.index_of(4.0);
        let follow = -f.cavity.alpha_g[k] * (p.kappa / p.kappa_b).sqrt();
        assert!((f.beta_g[k] - follow).norm() < 2e-3 * follow.norm() + 1e-4);
    }

    #[test]
    fn invalid_dt_rejected() {
        assert!(integrate_fields(&reference(), 1.0, 0.0).is_err());
        assert!(integrate_fields(&reference(), 1.0, -1.0).is_err());
    }
}
