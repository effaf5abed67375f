//! Displaced-frame hierarchy for photodetection.
//!
//! In the frame `P = Σ_i Π_i D(α_i)` the unnormalized joint state is stored
//! as three resonator blocks `X_gg`, `X_ee`, `X_eg` (with `X_ge = X_eg†`).
//! With `δ_g = Δ_r − χ`, `δ_e = Δ_r + χ` and `β = α_e − α_g`, the no-jump
//! drift is
//!
//! ```text
//! Ẋ_ii = −iδ_i[a†a, X] − ½κ{a†a, X} + (1−η)κ aXa† − ηκ(|α_i|²X + α_i* aX + α_i Xa†)
//!        [+ γ₁ D(β)X_eeD(β)† for ii = gg, − γ₁X_ee for ii = ee]
//! Ẋ_eg = −i(ω̃_a + ε Re β)X − iΔ_r[a†a, X] − iχ{a†a, X} − ½κ{a†a, X} + (1−η)κ aXa†
//!        − (1−η)κ(|β|²/2 − i Im(α_e α_g*))X − (1−η)κ(β* aX − β Xa†)
//!        − ηκ(½(|α_g|² + |α_e|²)X + α_e* aX + α_g Xa†) − (γ₁/2 + γ_φ)X
//! ```
//!
//! and a detected photon maps `X_ij → (a + α_i)X_ij(a† + α_j*)`.

use crate::error::{Error, Result};
use crate::fields::{FieldSample, FieldTrajectory, SystemParams};
use crate::linalg::{displacement_matrix, dissipator_apply, jump_apply, measure_apply, operators, ComplexMatrix};
use crate::qubit::QubitState;
use crate::scalar::{cis, cplx, re, Real, C};
use num_traits::Zero;
use rand::Rng;

/// Extra Fock levels used when evaluating displacement matrix elements.
const D_PADDING: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacedHierarchy<T: Real> {
    cutoff: usize,
    gg: ComplexMatrix<T>,
    ee: ComplexMatrix<T>,
    eg: ComplexMatrix<T>,
    beta_eg: C<T>,
    /// `ln` of the factor removed by [`DisplacedHierarchy::rescale`].
    log_scale: T,
}

/// Resonator blocks of the drift or state.
#[derive(Debug, Clone)]
struct Blocks<T: Real> {
    gg: ComplexMatrix<T>,
    ee: ComplexMatrix<T>,
    eg: ComplexMatrix<T>,
}

impl<T: Real> Blocks<T> {
    fn axpy(&self, s: T, d: &Blocks<T>) -> Blocks<T> {
        let mut out = self.clone();
        out.gg.axpy(re(s), &d.gg);
        out.ee.axpy(re(s), &d.ee);
        out.eg.axpy(re(s), &d.eg);
        out
    }
}

/// `⟨p|D(β)|q⟩`
pub fn d_element<T: Real>(beta: C<T>, p: usize, q: usize) -> C<T> {
    displacement_matrix(beta, p.max(q) + D_PADDING)[(p, q)]
}

/// `⟨p|D(β)|q⟩` for all `p, q ≤ n`.
fn d_block<T: Real>(beta: C<T>, n: usize) -> ComplexMatrix<T> {
    let big = displacement_matrix(beta, n + D_PADDING);
    ComplexMatrix::from_fn(n + 1, |p, q| big[(p, q)])
}

fn sqrt_usize<T: Real>(n: usize) -> T {
    T::from_usize_lossy(n).sqrt()
}

impl<T: Real> DisplacedHierarchy<T> {
    /// Qubit state `ρ` with the displaced resonator in vacuum.
    pub fn vacuum(rho: &QubitState<T>, cutoff: usize, f: &FieldSample<T>) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidParams("hierarchy cutoff must be at least 1".into()));
        }
        let mut gg = ComplexMatrix::zeros(cutoff + 1);
        let mut ee = ComplexMatrix::zeros(cutoff + 1);
        let mut eg = ComplexMatrix::zeros(cutoff + 1);
        gg[(0, 0)] = re(rho.rho_gg);
        ee[(0, 0)] = re(rho.rho_ee());
        // undo the overlap factors so that the reconstruction returns ρ
        let beta = f.alpha_e - f.alpha_g;
        let overlap = cis(-(f.alpha_g * f.alpha_e.conj()).im).scale((-beta.norm_sqr() * T::lit(0.5)).exp());
        eg[(0, 0)] = rho.rho_eg / overlap;
        Ok(Self {
            cutoff,
            gg,
            ee,
            eg,
            beta_eg: beta,
            log_scale: T::zero(),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn beta_eg(&self) -> C<T> {
        self.beta_eg
    }

    /// `ρ̄^P_{nm,ij}` with `i, j ∈ {0 = g, 1 = e}`.
    pub fn element(&self, n: usize, m: usize, i: usize, j: usize) -> C<T> {
        match (i, j) {
            (0, 0) => self.gg[(n, m)],
            (1, 1) => self.ee[(n, m)],
            (1, 0) => self.eg[(n, m)],
            _ => self.eg[(m, n)].conj(),
        }
    }

    /// Largest `|ρ̄^P_{nm,ii}|` over `n + m > 0`.
    pub fn excited_diagonal_blocks(&self) -> T {
        let mut worst = T::zero();
        for n in 0..=self.cutoff {
            for m in 0..=self.cutoff {
                if n + m > 0 {
                    worst = worst.max(self.gg[(n, m)].norm()).max(self.ee[(n, m)].norm());
                }
            }
        }
        worst
    }

    /// Unnormalized trace including the factor removed by rescaling.
    pub fn log_trace(&self) -> T {
        let tr = self.gg.trace().re + self.ee.trace().re;
        tr.ln() + self.log_scale
    }

    fn blocks(&self) -> Blocks<T> {
        Blocks {
            gg: self.gg.clone(),
            ee: self.ee.clone(),
            eg: self.eg.clone(),
        }
    }

    /// Divides out the trace, keeping it in `log_scale`.
    pub fn rescale(&mut self) {
        let tr = self.gg.trace().re + self.ee.trace().re;
        if tr > T::zero() && tr.is_finite() {
            let inv = T::one() / tr;
            self.gg = self.gg.scale_real(inv);
            self.ee = self.ee.scale_real(inv);
            self.eg = self.eg.scale_real(inv);
            self.log_scale += tr.ln();
        }
    }
}

/// `(aX)_{nm} = √(n+1) X_{n+1,m}`
fn a_left<T: Real>(x: &ComplexMatrix<T>, n: usize, m: usize) -> C<T> {
    if n < x.dim() - 1 {
        x[(n + 1, m)].scale(sqrt_usize(n + 1))
    } else {
        C::zero()
    }
}

/// `(Xa†)_{nm} = √(m+1) X_{n,m+1}`
fn adag_right<T: Real>(x: &ComplexMatrix<T>, n: usize, m: usize) -> C<T> {
    if m < x.dim() - 1 {
        x[(n, m + 1)].scale(sqrt_usize(m + 1))
    } else {
        C::zero()
    }
}

/// `(aXa†)_{nm}`
fn sandwich_a<T: Real>(x: &ComplexMatrix<T>, n: usize, m: usize) -> C<T> {
    if n < x.dim() - 1 && m < x.dim() - 1 {
        x[(n + 1, m + 1)].scale(sqrt_usize((n + 1) * (m + 1)))
    } else {
        C::zero()
    }
}

fn diagonal_drift<T: Real>(x: &ComplexMatrix<T>, alpha: C<T>, detuning: T, p: &SystemParams<T>) -> ComplexMatrix<T> {
    let (k, eta) = (p.kappa, p.eta);
    let d = x.dim();
    ComplexMatrix::from_fn(d, |n, m| {
        let (nf, mf) = (T::from_usize_lossy(n), T::from_usize_lossy(m));
        let diag = cplx(
            -T::lit(0.5) * k * (nf + mf) - eta * k * alpha.norm_sqr(),
            -detuning * (nf - mf),
        );
        diag * x[(n, m)] + sandwich_a(x, n, m).scale((T::one() - eta) * k)
            - (alpha.conj() * a_left(x, n, m) + alpha * adag_right(x, n, m)).scale(eta * k)
    })
}

fn drift<T: Real>(
    b: &Blocks<T>,
    f: &FieldSample<T>,
    eps: T,
    p: &SystemParams<T>,
    d_beta: Option<&ComplexMatrix<T>>,
) -> Blocks<T> {
    let (k, eta) = (p.kappa, p.eta);
    let one_m = T::one() - eta;
    let (ag, ae) = (f.alpha_g, f.alpha_e);
    let beta = ae - ag;
    let mut gg = diagonal_drift(&b.gg, ag, p.delta_r - p.chi, p);
    let mut ee = diagonal_drift(&b.ee, ae, p.delta_r + p.chi, p);
    if p.gamma1 > T::zero() {
        let d = d_beta.expect("displacement block required for γ₁ > 0");
        let fed = d.matmul(&b.ee).matmul(&d.dagger());
        gg.axpy(re(p.gamma1), &fed);
        ee.axpy(re(-p.gamma1), &b.ee);
    }
    let x = &b.eg;
    let im_eg = (ae * ag.conj()).im;
    let scalar = cplx(
        -one_m * k * beta.norm_sqr() * T::lit(0.5)
            - eta * k * T::lit(0.5) * (ag.norm_sqr() + ae.norm_sqr())
            - T::lit(0.5) * p.gamma1
            - p.gamma_phi,
        -(p.omega_a + eps * beta.re) + one_m * k * im_eg,
    );
    let eg = ComplexMatrix::from_fn(x.dim(), |n, m| {
        let (nf, mf) = (T::from_usize_lossy(n), T::from_usize_lossy(m));
        let diag = scalar
            + cplx(
                -T::lit(0.5) * k * (nf + mf),
                -(p.delta_r * (nf - mf) + p.chi * (nf + mf)),
            );
        diag * x[(n, m)] + sandwich_a(x, n, m).scale(one_m * k)
            - (beta.conj() * a_left(x, n, m) - beta * adag_right(x, n, m)).scale(one_m * k)
            - (ae.conj() * a_left(x, n, m) + ag * adag_right(x, n, m)).scale(eta * k)
    });
    Blocks { gg, ee, eg }
}

/// `X_ij → (a + α_i)X_ij(a† + α_j*)`
fn jump_block<T: Real>(x: &ComplexMatrix<T>, ai: C<T>, aj: C<T>) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(x.dim(), |n, m| {
        sandwich_a(x, n, m) + aj.conj() * a_left(x, n, m) + ai * adag_right(x, n, m) + ai * aj.conj() * x[(n, m)]
    })
}

/// One RK4 step of the hierarchy over step `k` of `f`, followed by the
/// jump update with the end-of-step fields when `jump` is set.
pub fn step_hierarchy<T: Real>(
    h: &DisplacedHierarchy<T>,
    f: &FieldTrajectory<T>,
    k: usize,
    p: &SystemParams<T>,
    jump: bool,
) -> Result<DisplacedHierarchy<T>> {
    if k >= f.steps() {
        return Err(Error::GridMismatch {
            record: k + 1,
            fields: f.steps(),
        });
    }
    let dt = f.dt;
    let eps = f.drive_on_step(k);
    let (s0, sm, s1) = (f.sample(k), f.midpoint(k), f.sample(k + 1));
    let dmat = |s: &FieldSample<T>| (p.gamma1 > T::zero()).then(|| d_block(s.alpha_e - s.alpha_g, h.cutoff));
    let (d0, dm, d1) = (dmat(&s0), dmat(&sm), dmat(&s1));
    let y = h.blocks();
    let half = T::lit(0.5) * dt;
    let k1 = drift(&y, &s0, eps, p, d0.as_ref());
    let k2 = drift(&y.axpy(half, &k1), &sm, eps, p, dm.as_ref());
    let k3 = drift(&y.axpy(half, &k2), &sm, eps, p, dm.as_ref());
    let k4 = drift(&y.axpy(dt, &k3), &s1, eps, p, d1.as_ref());
    let sixth = dt / T::lit(6.0);
    let mut out = y
        .axpy(sixth, &k1)
        .axpy(sixth * T::lit(2.0), &k2)
        .axpy(sixth * T::lit(2.0), &k3)
        .axpy(sixth, &k4);
    if jump {
        let (ag, ae) = (s1.alpha_g, s1.alpha_e);
        out = Blocks {
            gg: jump_block(&out.gg, ag, ag),
            ee: jump_block(&out.ee, ae, ae),
            eg: jump_block(&out.eg, ae, ag),
        };
    }
    out.gg.hermitize();
    out.ee.hermitize();
    let next = DisplacedHierarchy {
        cutoff: h.cutoff,
        gg: out.gg,
        ee: out.ee,
        eg: out.eg,
        beta_eg: s1.alpha_e - s1.alpha_g,
        log_scale: h.log_scale,
    };
    if !next.gg.is_finite() || !next.ee.is_finite() || !next.eg.is_finite() {
        return Err(Error::NonFinite("displaced hierarchy"));
    }
    let tail = next.tail_weight();
    if !(tail < T::lit(crate::cavity::TAIL_TOLERANCE)) {
        return Err(Error::CutoffViolation {
            cutoff: h.cutoff,
            population: tail.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(next)
}

impl<T: Real> DisplacedHierarchy<T> {
    /// Relative weight of the top two levels in the diagonal blocks.
    fn tail_weight(&self) -> T {
        let n = self.cutoff;
        let tr = self.gg.trace().re + self.ee.trace().re;
        let top = (n - 1..=n).fold(T::zero(), |acc, l| acc + self.gg[(l, l)].re + self.ee[(l, l)].re);
        if tr > T::zero() {
            top / tr
        } else {
            T::zero()
        }
    }

    fn confined(&self) -> bool {
        let x = &self.eg;
        (0..x.dim()).all(|n| (0..x.dim()).all(|m| n + m == 0 || x[(n, m)].is_zero()))
    }
}

/// Normalized qubit state `tr_res(P ρ̄^P P†)` for the fields `f` at the
/// hierarchy's current time.
pub fn reconstruct_qubit<T: Real>(h: &DisplacedHierarchy<T>, f: &FieldSample<T>) -> Result<QubitState<T>> {
    let gg = h.gg.trace().re;
    let ee = h.ee.trace().re;
    let norm = gg + ee;
    if !(norm > T::zero()) {
        return Err(Error::ZeroNorm);
    }
    let beta = f.alpha_e - f.alpha_g;
    let phase = cis(-(f.alpha_g * f.alpha_e.conj()).im);
    let sum = if h.confined() {
        h.eg[(0, 0)].scale((-beta.norm_sqr() * T::lit(0.5)).exp())
    } else {
        let d = d_block(beta, h.cutoff);
        let mut s = C::zero();
        for n in 0..=h.cutoff {
            for m in 0..=h.cutoff {
                s += h.eg[(n, m)] * d[(m, n)];
            }
        }
        s
    };
    Ok(QubitState {
        rho_gg: gg / norm,
        rho_eg: sum * phase / re(norm),
    })
}

/// Max-norm of
/// `(iηκ/2)Im(α_e*α_g)[σ_z, ρ] − (ηκ/4)|β_eg|²𝒟[σ_z]ρ + ηκ𝒟[Π_α]ρ`.
pub fn check_dpia_identity<T: Real>(alpha_g: C<T>, alpha_e: C<T>, rho: &QubitState<T>, kappa: T, eta: T) -> Result<T> {
    let m = rho.to_matrix();
    let sz = operators::sigma_z::<T>();
    let ek = eta * kappa;
    let im = (alpha_e.conj() * alpha_g).im;
    let beta = alpha_e - alpha_g;
    let comm = &sz * &m - &m * &sz;
    let mut lhs = comm.scale(cplx(T::zero(), ek * im * T::lit(0.5)));
    lhs -= &dissipator_apply(&sz, &m)?.scale_real(ek * T::lit(0.25) * beta.norm_sqr());
    let pi = operators::pi_alpha(alpha_g, alpha_e);
    let rhs = dissipator_apply(&pi, &m)?.scale_real(-ek);
    Ok((lhs - rhs).max_abs())
}

/// Largest deviation between a central finite difference of
/// `Im(α_g α_e*)` and
/// `−½(ε_dβ_eg* + ε_d*β_eg) + 2χRe(α_gα_e*) − κIm(α_e*α_g)`,
/// skipping grid points next to the pulse edges.
pub fn check_im_derivative<T: Real>(f: &FieldTrajectory<T>, p: &SystemParams<T>) -> T {
    let im = |k: usize| (f.alpha_g[k] * f.alpha_e[k].conj()).im;
    let edge = f.pulse_off_step();
    let mut worst = T::zero();
    for k in 1..f.steps() {
        if k + 1 >= edge && k <= edge + 1 {
            continue;
        }
        let fd = (im(k + 1) - im(k - 1)) / (T::lit(2.0) * f.dt);
        let (ag, ae) = (f.alpha_g[k], f.alpha_e[k]);
        let eps = f.drive_on_step(k);
        let beta = ae - ag;
        let rhs = -eps * beta.re + T::lit(2.0) * p.chi * (ag * ae.conj()).re - p.kappa * (ae.conj() * ag).im;
        worst = worst.max((fd - rhs).abs());
    }
    worst
}

/// Largest deviation between a central difference of `⟨p|D(β_eg(t))|q⟩`
/// at grid point `k` and
/// `(κ|β|²/2 − 2χIm(α_gα_e*))d_pq + β̇√p d_{p−1,q} − β̇*√q d_{p,q−1}`
/// for `p, q ≤ n`.
pub fn check_d_derivative<T: Real>(f: &FieldTrajectory<T>, p: &SystemParams<T>, k: usize, n: usize) -> Result<T> {
    if k == 0 || k + 1 > f.steps() {
        return Err(Error::GridMismatch {
            record: k,
            fields: f.steps(),
        });
    }
    let beta = |k: usize| f.alpha_e[k] - f.alpha_g[k];
    let dm = d_block(beta(k - 1), n);
    let d0 = d_block(beta(k), n);
    let dp = d_block(beta(k + 1), n);
    let (ag, ae) = (f.alpha_g[k], f.alpha_e[k]);
    let b = beta(k);
    let eps = f.drive_on_step(k);
    let rhs_field = |a: C<T>, det: T| cplx(T::zero(), -eps) - cplx(T::zero(), det) * a - a.scale(p.kappa * T::lit(0.5));
    let bdot = rhs_field(ae, p.delta_r + p.chi) - rhs_field(ag, p.delta_r - p.chi);
    let diag = p.kappa * T::lit(0.5) * b.norm_sqr() - T::lit(2.0) * p.chi * (ag * ae.conj()).im;
    let mut worst = T::zero();
    for i in 0..=n {
        for j in 0..=n {
            let fd = (dp[(i, j)] - dm[(i, j)]) / re(T::lit(2.0) * f.dt);
            let mut rhs = d0[(i, j)].scale(diag);
            if i > 0 {
                rhs += bdot * d0[(i - 1, j)].scale(sqrt_usize(i));
            }
            if j > 0 {
                rhs -= bdot.conj() * d0[(i, j - 1)].scale(sqrt_usize(j));
            }
            worst = worst.max((fd - rhs).norm());
        }
    }
    Ok(worst)
}

/// Largest residual of [`check_dpia_identity`] over `n` random inputs
/// with `|α| ≤ 1` and random mixed states.
pub fn dpia_identity_sweep<R: Rng>(n: usize, rng: &mut R) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let mut amp = || cplx(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
        let (ag, ae) = (amp(), amp());
        let gg: f64 = rng.gen();
        let bound = (gg * (1.0 - gg)).sqrt() * rng.gen::<f64>();
        let rho = QubitState::new(gg, cis(rng.gen_range(0.0..std::f64::consts::TAU)).scale(bound))?;
        let kappa = 1.0;
        let eta = rng.gen();
        worst = worst.max(check_dpia_identity(ag, ae, &rho, kappa, eta)?);
    }
    Ok(worst)
}

/// Monte-Carlo check of
/// `E[−½ηκℳ[Π_α†Π_α]ρdt + 𝒢[Π_α]ρdN] = ηκ𝒟[Π_α]ρdt` over `steps` Bernoulli
/// steps; returns the largest deviation of the populations and coherence
/// in units of their standard errors.
pub fn jump_average_check<R: Rng>(
    alpha_g: C<f64>,
    alpha_e: C<f64>,
    rho: &QubitState<f64>,
    p: &SystemParams<f64>,
    dt: f64,
    steps: usize,
    rng: &mut R,
) -> Result<f64> {
    let pi = operators::pi_alpha(alpha_g, alpha_e);
    let m = rho.to_matrix();
    let pp = &pi.dagger() * &pi;
    let ek = p.eta * p.kappa;
    let prob = ek * pp.expectation(&m).re * dt;
    if prob >= crate::qubit::MAX_JUMP_PROBABILITY {
        return Err(Error::StepTooLarge { probability: prob });
    }
    let drift = measure_apply(&pp, &m)?.scale_real(-0.5 * ek * dt);
    let jump = jump_apply(&pi, &m)?;
    let target = dissipator_apply(&pi, &m)?.scale_real(ek * dt);
    let mut sum = [C::zero(); 2];
    let mut sum_sq = [0.0f64; 2];
    for _ in 0..steps {
        let mut x = [drift[(0, 0)], drift[(1, 0)]];
        if rng.gen::<f64>() < prob {
            x[0] += jump[(0, 0)];
            x[1] += jump[(1, 0)];
        }
        for i in 0..2 {
            sum[i] += x[i];
            sum_sq[i] += x[i].norm_sqr();
        }
    }
    let n = steps as f64;
    let mut worst = 0.0f64;
    for (i, t) in [target[(0, 0)], target[(1, 0)]].into_iter().enumerate() {
        let mean = sum[i] / n;
        let se = ((sum_sq[i] / n - mean.norm_sqr()).max(0.0) / n).sqrt();
        // entries that cancel identically only carry rounding noise
        let dev = ((mean - t).norm() - 1e-15).max(0.0);
        worst = worst.max(if dev == 0.0 { 0.0 } else { dev / se });
    }
    Ok(worst)
}
