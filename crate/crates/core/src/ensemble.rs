//! Trajectory ensembles with order-independent reduction.
//!
//! Trajectory `i` draws from its own ChaCha8 stream `(seed, i)`, workers
//! write results by index and all reductions run sequentially over that
//! buffer, so output does not depend on the number of threads.

use crate::error::{Error, Result};
use crate::fields::{FieldTrajectory, SystemParams};
use crate::qubit::{Detection, HomodyneTrajectory, PhotoTrajectory, QubitState, RateTable};
use crate::scalar::{cplx, CompensatedSum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Phase correction applied before the purity is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    None,
    /// Record up to pulse turn-off only.
    Truncated,
    Full,
}

impl Feedback {
    pub const ALL: [Feedback; 3] = [Feedback::None, Feedback::Truncated, Feedback::Full];

    fn index(self) -> usize {
        self as usize
    }
}

/// RNG stream for trajectory `index` of a run with master `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `n` independent tasks in parallel, collecting results by index.
pub fn run_indexed<R, F>(n: usize, seed: u64, task: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<R> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| task(i, &mut trajectory_rng(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityStats {
    pub count: usize,
    pub mean_state: QubitState<f64>,
    /// `tr(ρ̄²)` for the ensemble-averaged state.
    pub purity_mean_state: f64,
    pub purity_mean_of_purities: f64,
    /// Delta-method standard error of `purity_mean_state`.
    pub stderr_mean_state: f64,
    pub stderr_mean_of_purities: f64,
}

impl PurityStats {
    pub fn from_states(states: &[QubitState<f64>]) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidParams("empty ensemble".into()));
        }
        let nf = n as f64;
        let mean = |f: &dyn Fn(&QubitState<f64>) -> f64| states.iter().map(f).collect::<CompensatedSum>().value() / nf;
        let gg = mean(&|s| s.rho_gg);
        let x = mean(&|s| s.rho_eg.re);
        let y = mean(&|s| s.rho_eg.im);
        let pur = mean(&|s| s.purity());
        let mean_state = QubitState {
            rho_gg: gg,
            rho_eg: cplx(x, y),
        };
        let (stderr_mean_state, stderr_mean_of_purities) = if n > 1 {
            // gradient of gg² + (1−gg)² + 2(x² + y²)
            let g = [4.0 * gg - 2.0, 4.0 * x, 4.0 * y];
            let lin: CompensatedSum = states
                .iter()
                .map(|s| {
                    let d = g[0] * (s.rho_gg - gg) + g[1] * (s.rho_eg.re - x) + g[2] * (s.rho_eg.im - y);
                    d * d
                })
                .collect();
            let var_p: CompensatedSum = states.iter().map(|s| (s.purity() - pur).powi(2)).collect();
            let denom = nf * (nf - 1.0);
            ((lin.value() / denom).sqrt(), (var_p.value() / denom).sqrt())
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            count: n,
            mean_state,
            purity_mean_state: mean_state.purity(),
            purity_mean_of_purities: pur,
            stderr_mean_state,
            stderr_mean_of_purities,
        })
    }
}

/// Statistics at one sampled grid index for each feedback variant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePoint {
    pub step: usize,
    pub time: f64,
    pub stats: [PurityStats; 3],
}

impl EnsemblePoint {
    pub fn get(&self, fb: Feedback) -> &PurityStats {
        &self.stats[fb.index()]
    }
}

/// Effective-SME ensemble over a precomputed rate table.
#[derive(Debug, Clone, Copy)]
pub struct Ensemble<'a> {
    pub rates: &'a RateTable<f64>,
    /// Fields used for the phase estimate.
    pub fields: &'a FieldTrajectory<f64>,
    pub params: SystemParams<f64>,
    pub detection: Detection,
    pub rho0: QubitState<f64>,
}

type Snapshot = [QubitState<f64>; 3];

impl<'a> Ensemble<'a> {
    /// Runs one trajectory and returns the three corrected states at each
    /// of the increasing grid indices `samples`.
    pub fn trajectory(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<Snapshot>> {
        let mut out = Vec::with_capacity(samples.len());
        let mut next = samples.iter().peekable();
        let sq = self.rates.dt.sqrt();
        macro_rules! drive {
            ($traj:expr, $advance:expr) => {{
                let mut t = $traj;
                loop {
                    while next.peek().is_some_and(|&&s| s == t.index()) {
                        out.push([t.uncorrected(), t.corrected_truncated(), t.corrected()]);
                        next.next();
                    }
                    if next.peek().is_none() {
                        break;
                    }
                    $advance(&mut t)?;
                }
            }};
        }
        match self.detection {
            Detection::Homodyne => drive!(
                HomodyneTrajectory::new(self.rates, self.fields, &self.params, self.rho0)?,
                |t: &mut HomodyneTrajectory<f64>| {
                    let z: f64 = StandardNormal.sample(rng);
                    t.step(z * sq).map(|_| ())
                }
            ),
            Detection::Photo => drive!(
                PhotoTrajectory::new(self.rates, self.fields, &self.params, self.rho0)?,
                |t: &mut PhotoTrajectory<f64>| t.step(rng.gen::<f64>()).map(|_| ())
            ),
        }
        if out.len() != samples.len() {
            return Err(Error::GridMismatch {
                record: samples.last().copied().unwrap_or(0),
                fields: self.rates.steps(),
            });
        }
        Ok(out)
    }

    /// Ensemble statistics at the grid indices `samples` (increasing).
    pub fn run(&self, samples: &[usize], trajectories: usize, seed: u64) -> Result<Vec<EnsemblePoint>> {
        if samples.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("sample indices must increase".into()));
        }
        let all = run_indexed(trajectories, seed, |_, rng| self.trajectory(samples, rng))?;
        samples
            .iter()
            .enumerate()
            .map(|(j, &step)| {
                let stats = Feedback::ALL.map(|fb| {
                    let states: Vec<_> = all.iter().map(|t| t[j][fb.index()]).collect();
                    PurityStats::from_states(&states)
                });
                let [a, b, c] = stats;
                Ok(EnsemblePoint {
                    step,
                    time: self.fields.time(step),
                    stats: [a?, b?, c?],
                })
            })
            .collect()
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}
