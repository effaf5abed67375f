//! Toy model, strong quadrature projection and the post-selected
//! benchmark protocol.

use crate::ensemble::{run_indexed, PurityStats};
use crate::error::{Error, Result};
use crate::fields::{integrate_cascaded_fields, integrate_fields, SystemParams};
use crate::qubit::{Detection, HomodyneTrajectory, QubitState, RateTable};
use crate::scalar::{cis, cplx, C};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyOutcome {
    Ground,
    Excited,
    Plus,
    Minus,
}

/// Measures qubit two of `α|gg⟩ + β|ee⟩` along `axis` with uniform draw
/// `u`, returning the outcome and the state of qubit one.
pub fn toy_measure(alpha: C<f64>, beta: C<f64>, axis: Axis, u: f64) -> Result<(ToyOutcome, QubitState<f64>)> {
    let pg = alpha.norm_sqr();
    if ((pg + beta.norm_sqr()) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState("toy state not normalized".into()));
    }
    Ok(match axis {
        Axis::Z if u < pg => (ToyOutcome::Ground, QubitState::ground()),
        Axis::Z => (ToyOutcome::Excited, QubitState::excited()),
        Axis::X if u < 0.5 => (ToyOutcome::Plus, QubitState::from_amplitudes(alpha, beta)?),
        Axis::X => (ToyOutcome::Minus, QubitState::from_amplitudes(alpha, -beta)?),
    })
}

/// `⟨p|β⟩` for the quadrature `P = i(a† − a)/√2`, with `⟨p|n⟩ = (−i)ⁿψₙ(p)`:
/// `π^{−1/4} exp(−(p − √2 Im β)²/2 − i√2 Re β p + i Re β Im β)`.
pub fn quadrature_overlap(beta: C<f64>, p: f64) -> C<f64> {
    let shift = p - SQRT_2 * beta.im;
    let phase = -SQRT_2 * beta.re * p + beta.re * beta.im;
    cis(phase) * (PI.powf(-0.25) * (-0.5 * shift * shift).exp())
}

/// Qubit state after projecting the resonator of
/// `δ|g⟩|α_g⟩ + γ|e⟩|α_e⟩` onto the quadrature eigenstate `|p⟩`, with
/// `α_e = −α_g*`.
pub fn strong_quadrature_project(delta: C<f64>, gamma: C<f64>, alpha_g: C<f64>, p: f64) -> Result<QubitState<f64>> {
    if ((delta.norm_sqr() + gamma.norm_sqr()) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState("amplitudes not normalized".into()));
    }
    let alpha_e = -alpha_g.conj();
    let g = delta * quadrature_overlap(alpha_g, p);
    let e = gamma * quadrature_overlap(alpha_e, p);
    let norm = (g.norm_sqr() + e.norm_sqr()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    QubitState::from_amplitudes(g / norm, e / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub runs: usize,
    /// Post-selection half-window.
    pub delta: f64,
    pub base: SystemParams<f64>,
    pub dt: f64,
    /// Detect through a filter resonator with loss `base.kappa_b`.
    pub use_cascaded: bool,
    /// Apply the random phase pulse and post-select on the record; when
    /// off the pulse is skipped and every run is compared against zero.
    pub feedback: bool,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= PI) {
            return Err(Error::InvalidParams(format!(
                "window δ = {} outside (0, π]",
                self.delta
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParams("at least one run required".into()));
        }
        if !self.base.t_meas.is_finite() {
            return Err(Error::InvalidParams("protocol needs a finite t_meas".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub runs: usize,
    pub accepted: usize,
    pub acceptance_fraction: f64,
    /// `None` when no run was accepted.
    pub stats: Option<PurityStats>,
    /// Fraction of accepted runs read out in `|g⟩` by the final projective
    /// measurement.
    pub ground_fraction: f64,
}

/// Shortest distance between two angles.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

struct Run {
    phi0: f64,
    phi_calc: f64,
    state: QubitState<f64>,
    u: f64,
}

/// Four-step protocol: prepare `|+⟩`, weak homodyne tone for
/// `t_meas + t_off`, random phase pulse `φ₀`, projective readout; keeps the
/// runs with `φ₀` within `δ` of the phase computed from the record.
pub fn run_benchmark(pc: &ProtocolConfig, seed: u64) -> Result<ProtocolOutcome> {
    let mut out = run_benchmark_windows(pc, seed, &[pc.delta])?;
    Ok(out.remove(0))
}

/// [`run_benchmark`] for several windows over the same set of runs.
pub fn run_benchmark_windows(pc: &ProtocolConfig, seed: u64, deltas: &[f64]) -> Result<Vec<ProtocolOutcome>> {
    pc.validate()?;
    for &delta in deltas {
        ProtocolConfig { delta, ..*pc }.validate()?;
    }
    let p = SystemParams {
        phi: PI / 2.0,
        ..pc.base
    };
    let t_end = p.t_meas + p.t_off;
    let fields = integrate_fields(&p, t_end, pc.dt)?;
    let rates = if pc.use_cascaded {
        RateTable::cascaded_homodyne(&integrate_cascaded_fields(&p, t_end, pc.dt)?, &p)
    } else {
        RateTable::single_cavity(&fields, &p, Detection::Homodyne)
    };
    let sq = pc.dt.sqrt();
    let runs = run_indexed(pc.runs, seed, |_, rng| {
        let mut t = HomodyneTrajectory::new(&rates, &fields, &p, QubitState::plus())?;
        while !t.is_done() {
            let z: f64 = StandardNormal.sample(rng);
            t.step(z * sq)?;
        }
        let phi0 = 2.0 * PI * rng.gen::<f64>();
        let u: f64 = rng.gen();
        let (state, phi_calc) = if pc.feedback {
            (t.uncorrected().rotated(phi0), t.theta())
        } else {
            (t.uncorrected(), 0.0)
        };
        Ok(Run {
            phi0,
            phi_calc,
            state,
            u,
        })
    })?;
    deltas
        .iter()
        .map(|&delta| {
            let kept: Vec<_> = runs
                .iter()
                .filter(|r| circular_distance(r.phi0, r.phi_calc) <= delta)
                .collect();
            let states: Vec<_> = kept.iter().map(|r| r.state).collect();
            let accepted = kept.len();
            Ok(ProtocolOutcome {
                runs: pc.runs,
                accepted,
                acceptance_fraction: accepted as f64 / pc.runs as f64,
                stats: if accepted > 0 {
                    Some(PurityStats::from_states(&states)?)
                } else {
                    None
                },
                ground_fraction: if accepted > 0 {
                    kept.iter().filter(|r| r.u < r.state.rho_gg).count() as f64 / accepted as f64
                } else {
                    0.0
                },
            })
        })
        .collect()
}

/// `ψₙ(p)` via the three-term recurrence.
fn hermite_functions(p: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(PI.powf(-0.25) * (-0.5 * p * p).exp());
    if n > 0 {
        out.push(SQRT_2 * p * out[0]);
    }
    for k in 2..=n {
        let kf = k as f64;
        let v = (2.0 / kf).sqrt() * p * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
        out.push(v);
    }
    out
}

/// `⟨p|β⟩` summed over the first `terms` Fock states.
pub fn quadrature_overlap_fock(beta: C<f64>, p: f64, terms: usize) -> C<f64> {
    let psi = hermite_functions(p, terms);
    let mut coeff = cplx((-0.5 * beta.norm_sqr()).exp(), 0.0);
    let step = cplx(0.0, -1.0) * beta;
    let mut sum = C::new(0.0, 0.0);
    for (n, &psi_n) in psi.iter().enumerate() {
        if n > 0 {
            coeff = coeff * step / (n as f64).sqrt();
        }
        sum += coeff * psi_n;
    }
    sum
}
