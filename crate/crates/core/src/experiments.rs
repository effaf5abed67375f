//! Experiment drivers behind the command-line tool.

use crate::appendix::{
    check_d_derivative, check_im_derivative, dpia_identity_sweep, jump_average_check, reconstruct_qubit,
    step_hierarchy, DisplacedHierarchy,
};
use crate::cavity::{FullModel, JointState};
use crate::config::{Experiment, ExperimentConfig};
use crate::csv::CsvTable;
use crate::ensemble::{trajectory_rng, Ensemble, EnsemblePoint, Feedback};
use crate::error::{Error, Result};
use crate::fields::{integrate_cascaded_fields, integrate_fields, FieldTrajectory, SystemParams};
use crate::protocols::{run_benchmark_windows, ProtocolConfig};
use crate::qubit::{Detection, HomodyneTrajectory, PhotoTrajectory, QubitState, RateTable};
use crate::scalar::cplx;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs the configured experiment and returns its table with metadata.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CsvTable> {
    cfg.validate()?;
    let mut table = match cfg.experiment {
        Experiment::Fields => fields_table(cfg),
        Experiment::Trajectory => trajectory_table(cfg),
        Experiment::Ensemble => ensemble_table(cfg),
        Experiment::BandwidthSweep => bandwidth_table(cfg),
        Experiment::EfficiencySweep => efficiency_table(cfg),
        Experiment::Protocol => protocol_table(cfg),
        Experiment::VerifyAppendix => appendix_table(cfg),
    }
    .map_err(|e| e.context(cfg.experiment.name()))?;
    let mut meta = vec![
        format!("cqed-undo {VERSION}"),
        format!("experiment = {}", cfg.experiment),
        format!("seed = {}", cfg.seed),
        "config:".to_string(),
    ];
    meta.extend(cfg.echo().lines().map(|l| format!("  {l}")));
    meta.append(&mut table.metadata);
    table.metadata = meta;
    Ok(table)
}

/// Initial Fock cutoff guess `⌈4·max|α|²⌉ + 6`.
pub fn auto_cutoff(f: &FieldTrajectory<f64>) -> usize {
    let a = f.max_abs_alpha();
    (4.0 * a * a).ceil() as usize + 6
}

fn total_time(cfg: &ExperimentConfig) -> f64 {
    cfg.params.record_length()
}

fn fields_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let t_end = cfg.t_end.unwrap_or_else(|| total_time(cfg));
    let f = integrate_fields(&cfg.params, t_end, cfg.dt)?;
    let mut t = CsvTable::new(&[
        "t",
        "re_alpha_g",
        "im_alpha_g",
        "re_alpha_e",
        "im_alpha_e",
        "gamma_d",
        "stark_b",
    ]);
    for k in (0..f.len())
        .step_by(cfg.stride)
        .chain(last_if_skipped(f.len(), cfg.stride))
    {
        let (g, e) = (f.alpha_g[k], f.alpha_e[k]);
        t.push(vec![f.time(k), g.re, g.im, e.re, e.im, f.gamma_d[k], f.stark_b[k]])?;
    }
    Ok(t)
}

/// Final index when the stride does not land on it.
fn last_if_skipped(len: usize, stride: usize) -> Option<usize> {
    let last = len - 1;
    (!last.is_multiple_of(stride)).then_some(last)
}

/// Full model with the smallest cutoff passing the tail guard, starting
/// from `start`.
fn with_cutoff<R>(start: usize, mut run: impl FnMut(usize) -> Result<R>) -> Result<R> {
    let mut n = start;
    loop {
        match run(n) {
            Err(e) if matches!(e.root(), Error::CutoffViolation { .. }) && n < start + 8 => n += 1,
            other => return other,
        }
    }
}

fn trajectory_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let p = cfg.params;
    let f = integrate_fields(&p, total_time(cfg), cfg.dt)?;
    let rates = RateTable::single_cavity(&f, &p, cfg.detection);
    let rho0 = cfg.initial.state();
    let mut header = vec![
        "t",
        "record",
        "rho_gg",
        "re_rho_eg",
        "im_rho_eg",
        "purity",
        "theta",
        "re_rho_eg_corrected",
        "im_rho_eg_corrected",
    ];
    let full = cfg.fock_cutoff.is_some();
    if full {
        header.push("trace_distance_full");
    }
    let run = |cutoff: Option<usize>| -> Result<CsvTable> {
        let mut table = CsvTable::new(&header);
        let mut rng = trajectory_rng(cfg.seed, 0);
        let model = cutoff.map(|n| FullModel::single(&p, n, cfg.detection)).transpose()?;
        let mut joint = cutoff.map(|n| JointState::product_vacuum(&rho0, &[n])).transpose()?;
        let sq = cfg.dt.sqrt();
        let mut homo = HomodyneTrajectory::new(&rates, &f, &p, rho0)?;
        let mut photo = PhotoTrajectory::new(&rates, &f, &p, rho0)?;
        let mut record = 0.0;
        for k in 0..f.len() {
            let (state, unc, cor, theta) = match cfg.detection {
                Detection::Homodyne => (homo.state(), homo.uncorrected(), homo.corrected(), homo.theta()),
                Detection::Photo => (photo.state(), photo.uncorrected(), photo.corrected(), photo.theta()),
            };
            if k % cfg.stride == 0 || k + 1 == f.len() {
                let mut row = vec![
                    f.time(k),
                    record,
                    unc.rho_gg,
                    unc.rho_eg.re,
                    unc.rho_eg.im,
                    unc.purity(),
                    theta,
                    cor.rho_eg.re,
                    cor.rho_eg.im,
                ];
                if let Some(j) = &joint {
                    row.push(state.trace_distance(&j.reduced_qubit()?));
                }
                table.push(row)?;
            }
            if k + 1 == f.len() {
                break;
            }
            match cfg.detection {
                Detection::Homodyne => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let dw = z * sq;
                    record = homo.step(dw)?;
                    if let (Some(m), Some(j)) = (&model, &mut joint) {
                        *j = m.step_homodyne(j, f.time(k), dw, cfg.dt)?.state;
                    }
                }
                Detection::Photo => {
                    let jump = photo.step(rng.gen())?;
                    record = if jump { 1.0 } else { 0.0 };
                    if let (Some(m), Some(j)) = (&model, &mut joint) {
                        *j = m.step_photo(j, f.time(k), jump, cfg.dt)?;
                    }
                }
            }
        }
        if let Some(n) = cutoff {
            table.metadata.push(format!("fock_cutoff_used = {n}"));
        }
        Ok(table)
    };
    match cfg.fock_cutoff {
        Some(n) => with_cutoff(n, |n| run(Some(n))),
        None => run(None),
    }
}

const STAT_COLUMNS: [&str; 12] = [
    "purity_mean_state_nofb",
    "stderr_mean_state_nofb",
    "purity_mean_of_purities_nofb",
    "stderr_mean_of_purities_nofb",
    "purity_mean_state_fb_truncated",
    "stderr_mean_state_fb_truncated",
    "purity_mean_of_purities_fb_truncated",
    "stderr_mean_of_purities_fb_truncated",
    "purity_mean_state_fb_full",
    "stderr_mean_state_fb_full",
    "purity_mean_of_purities_fb_full",
    "stderr_mean_of_purities_fb_full",
];

fn stat_row(lead: f64, pt: &EnsemblePoint) -> Vec<f64> {
    let mut row = vec![lead];
    for fb in Feedback::ALL {
        let s = pt.get(fb);
        row.extend([
            s.purity_mean_state,
            s.stderr_mean_state,
            s.purity_mean_of_purities,
            s.stderr_mean_of_purities,
        ]);
    }
    row
}

fn stat_table(lead: &str) -> CsvTable {
    let mut h = vec![lead];
    h.extend(STAT_COLUMNS);
    CsvTable::new(&h)
}

/// Ensemble statistics at `samples` for parameters `p`.
fn ensemble_points(
    cfg: &ExperimentConfig,
    p: &SystemParams<f64>,
    samples_at: impl Fn(&FieldTrajectory<f64>) -> Vec<usize>,
) -> Result<Vec<EnsemblePoint>> {
    let t_end = p.record_length();
    if cfg.use_cascaded {
        if cfg.detection == Detection::Photo {
            return Err(Error::InvalidParams(
                "the cascaded model supports homodyne detection only".into(),
            ));
        }
        let cf = integrate_cascaded_fields(p, t_end, cfg.dt)?;
        let rates = RateTable::cascaded_homodyne(&cf, p);
        let ens = Ensemble {
            rates: &rates,
            fields: &cf.cavity,
            params: *p,
            detection: cfg.detection,
            rho0: cfg.initial.state(),
        };
        ens.run(&samples_at(&cf.cavity), cfg.trajectories, cfg.seed)
    } else {
        let f = integrate_fields(p, t_end, cfg.dt)?;
        let rates = RateTable::single_cavity(&f, p, cfg.detection);
        let ens = Ensemble {
            rates: &rates,
            fields: &f,
            params: *p,
            detection: cfg.detection,
            rho0: cfg.initial.state(),
        };
        ens.run(&samples_at(&f), cfg.trajectories, cfg.seed)
    }
}

fn ensemble_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let p = cfg.params;
    let n = cfg.t_off_points;
    let offsets: Vec<f64> = (0..n)
        .map(|j| {
            if n == 1 {
                p.t_off
            } else {
                p.t_off * j as f64 / (n - 1) as f64
            }
        })
        .collect();
    let start = if p.drive_held() { 0.0 } else { p.t_meas };
    let pts = ensemble_points(cfg, &p, |f| {
        let mut idx: Vec<usize> = offsets.iter().map(|&o| f.index_of(start + o)).collect();
        idx.dedup();
        idx
    })?;
    let mut t = stat_table("t_off");
    for pt in &pts {
        t.push(stat_row(pt.time - start, pt))?;
    }
    Ok(t)
}

fn final_point(cfg: &ExperimentConfig, p: &SystemParams<f64>) -> Result<EnsemblePoint> {
    let mut pts = ensemble_points(cfg, p, |f| vec![f.steps()])?;
    Ok(pts.remove(0))
}

fn bandwidth_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let sweep = cfg.sweep.as_ref().expect("validated by the parser").values();
    let cascaded = ExperimentConfig {
        use_cascaded: true,
        ..cfg.clone()
    };
    let mut t = stat_table("bandwidth");
    for bw in sweep {
        if !(bw > 0.0) {
            return Err(Error::InvalidParams(format!("bandwidth must be positive, got {bw}")));
        }
        let p = SystemParams {
            kappa_b: bw / 2.0,
            ..cfg.params
        };
        let pt = final_point(&cascaded, &p).map_err(|e| e.context(format!("bandwidth {bw}")))?;
        t.push(stat_row(bw, &pt))?;
    }
    t.metadata.push(format!(
        "purities at t_meas + t_off = {} from the cascaded model",
        cfg.params.record_length()
    ));
    Ok(t)
}

fn efficiency_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let sweep = cfg.sweep.as_ref().expect("validated by the parser").values();
    let mut t = stat_table("eta");
    for eta in sweep {
        let p = cfg.params.with_eta(eta);
        let pt = final_point(cfg, &p).map_err(|e| e.context(format!("eta {eta}")))?;
        t.push(stat_row(eta, &pt))?;
    }
    Ok(t)
}

fn protocol_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let deltas = cfg.sweep.as_ref().map_or_else(|| vec![cfg.delta], |s| s.values());
    let pc = ProtocolConfig {
        runs: cfg.trajectories,
        delta: deltas[0],
        base: cfg.params,
        dt: cfg.dt,
        use_cascaded: cfg.use_cascaded,
        feedback: cfg.feedback,
    };
    let outs = run_benchmark_windows(&pc, cfg.seed, &deltas)?;
    let mut t = CsvTable::new(&[
        "delta",
        "runs",
        "accepted",
        "acceptance_fraction",
        "purity_mean_state",
        "stderr_mean_state",
        "purity_mean_of_purities",
        "stderr_mean_of_purities",
        "ground_fraction",
    ]);
    for (&delta, o) in deltas.iter().zip(&outs) {
        let (a, b, c, d) = o.stats.map_or((0.0, 0.0, 0.0, 0.0), |s| {
            (
                s.purity_mean_state,
                s.stderr_mean_state,
                s.purity_mean_of_purities,
                s.stderr_mean_of_purities,
            )
        });
        if o.stats.is_none() {
            t.metadata
                .push(format!("no runs accepted at delta = {delta}; purity columns are 0"));
        }
        t.push(vec![
            delta,
            o.runs as f64,
            o.accepted as f64,
            o.acceptance_fraction,
            a,
            b,
            c,
            d,
            o.ground_fraction,
        ])?;
    }
    Ok(t)
}

/// Residual, tolerance and description of one appendix check.
struct Check(f64, f64, &'static str);

fn appendix_table(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let p = SystemParams {
        gamma1: 0.0,
        gamma_phi: 0.0,
        ..cfg.params
    };
    let mut rng = trajectory_rng(cfg.seed, 0);
    let mut checks = Vec::new();

    checks.push(Check(
        dpia_identity_sweep(1000, &mut rng)?,
        1e-12,
        "operator identity, 1000 random inputs",
    ));

    let im_grid = integrate_fields(&p, p.record_length(), cfg.dt.min(1e-4))?;
    checks.push(Check(
        check_im_derivative(&im_grid, &p),
        1e-6,
        "d/dt Im(alpha_g alpha_e*) finite difference at dt <= 1e-4",
    ));
    let f = integrate_fields(&p, p.record_length(), cfg.dt)?;

    let fine_end = if p.t_meas.is_finite() { p.t_meas * 0.6 } else { 3.0 };
    let fine = integrate_fields(&p, fine_end, 1e-5)?;
    let mut d_res = 0.0f64;
    for frac in [0.3, 0.6, 0.9] {
        let k = ((fine.steps() as f64) * frac) as usize;
        d_res = d_res.max(check_d_derivative(&fine, &p, k, 4)?);
    }
    checks.push(Check(d_res, 1e-6, "d-matrix derivative finite difference at dt = 1e-5"));

    let rates = RateTable::single_cavity(&f, &p, Detection::Photo);
    let rho0 = cfg.initial.state();
    let mut eff = PhotoTrajectory::new(&rates, &f, &p, rho0)?;
    let mut h = DisplacedHierarchy::vacuum(&rho0, 4, &f.sample(0))?;
    let (mut worst, mut confined) = (0.0f64, 0.0f64);
    for k in 0..f.steps() {
        let jump = eff.step(rng.gen())?;
        h = step_hierarchy(&h, &f, k, &p, jump)?;
        let q = reconstruct_qubit(&h, &f.sample(k + 1))?;
        worst = worst.max(q.trace_distance(&eff.state()));
        confined = confined.max(h.excited_diagonal_blocks());
    }
    checks.push(Check(
        worst,
        1e-4,
        "hierarchy vs effective photodetection, max trace distance",
    ));
    checks.push(Check(confined, 1e-10, "displaced-frame diagonal blocks outside vacuum"));

    let steady = f.sample(f.index_of(p.t_meas.min(p.record_length()) * 0.9));
    let rho = QubitState::new(0.4, cplx(0.2, 0.15))?;
    let z = jump_average_check(steady.alpha_g, steady.alpha_e, &rho, &p, 0.05, 100_000, &mut rng)?;
    checks.push(Check(
        z,
        3.0,
        "jump average vs dissipator, standard errors over 1e5 steps",
    ));

    let mut t = CsvTable::new(&["check", "residual", "tolerance", "passed"]);
    for (i, Check(r, tol, what)) in checks.into_iter().enumerate() {
        t.metadata.push(format!("check {i}: {what}"));
        t.push(vec![i as f64, r, tol, if r < tol { 1.0 } else { 0.0 }])?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(exp: Experiment, text: &str) -> ExperimentConfig {
        parse_config(text, exp).unwrap()
    }

    #[test]
    fn fields_ring_down() {
        let c = cfg(Experiment::Fields, "t_end = 20\ndt = 1e-3\nstride = 100");
        let t = run_experiment(&c).unwrap();
        let last = t.rows.last().unwrap();
        assert!((last[0] - 20.0).abs() < 1e-12);
        assert!((last[1].powi(2) + last[2].powi(2)).sqrt() < 1e-3);
        assert!(t.metadata.iter().any(|m| m.contains("chi = 3.0")));
    }

    #[test]
    fn deterministic_output() {
        let c = cfg(
            Experiment::Ensemble,
            "trajectories = 50\ndt = 0.01\nt_off_points = 3\nseed = 4",
        );
        let a = run_experiment(&c).unwrap().render().unwrap();
        let b = run_experiment(&c).unwrap().render().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_with_full_model() {
        let c = cfg(
            Experiment::Trajectory,
            "t_off = 1\nt_meas = 1\ndt = 1e-3\nfock_cutoff = 6\nstride = 100",
        );
        let t = run_experiment(&c).unwrap();
        let td = t.column("trace_distance_full").unwrap();
        assert!(td.iter().all(|&x| x < 1e-2), "{td:?}");
        let c = cfg(Experiment::Trajectory, "detection = photo\ndt = 1e-3\nstride = 500");
        assert!(run_experiment(&c).is_ok());
    }

    #[test]
    fn appendix_checks_pass() {
        let c = cfg(Experiment::VerifyAppendix, "t_off = 5\n");
        let t = run_experiment(&c).unwrap();
        let passed = t.column("passed").unwrap();
        assert!(passed.iter().all(|&x| x == 1.0), "{:?}", t.rows);
    }

    #[test]
    fn protocol_flags_empty_windows() {
        let c = cfg(
            Experiment::Protocol,
            "trajectories = 20\ndt = 0.01\nsweep_values = 1e-6, 3.14159",
        );
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows[0][2], 0.0);
        assert!(t.metadata.iter().any(|m| m.contains("no runs accepted")));
        assert_eq!(t.rows[1][2], 20.0);
    }

    #[test]
    fn cascaded_photo_is_rejected() {
        let c = cfg(
            Experiment::Ensemble,
            "use_cascaded = true\ndetection = photo\ntrajectories = 2",
        );
        assert!(run_experiment(&c).is_err());
    }
}
