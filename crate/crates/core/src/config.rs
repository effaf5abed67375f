//! Flat `key = value` experiment configuration.

use crate::error::{Error, Result};
use crate::fields::SystemParams;
use crate::qubit::{Detection, QubitState};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fields,
    Trajectory,
    Ensemble,
    BandwidthSweep,
    EfficiencySweep,
    Protocol,
    VerifyAppendix,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fields,
        Experiment::Trajectory,
        Experiment::Ensemble,
        Experiment::BandwidthSweep,
        Experiment::EfficiencySweep,
        Experiment::Protocol,
        Experiment::VerifyAppendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fields => "fields",
            Experiment::Trajectory => "trajectory",
            Experiment::Ensemble => "ensemble",
            Experiment::BandwidthSweep => "bandwidth-sweep",
            Experiment::EfficiencySweep => "efficiency-sweep",
            Experiment::Protocol => "protocol",
            Experiment::VerifyAppendix => "verify-appendix",
        }
    }

    fn needs_sweep(self) -> bool {
        matches!(self, Experiment::BandwidthSweep | Experiment::EfficiencySweep)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Plus,
    Ground,
    Excited,
}

impl Initial {
    pub fn state(self) -> QubitState<f64> {
        match self {
            Initial::Plus => QubitState::plus(),
            Initial::Ground => QubitState::ground(),
            Initial::Excited => QubitState::excited(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Initial::Plus => "plus",
            Initial::Ground => "ground",
            Initial::Excited => "excited",
        }
    }
}

/// Sweep grid: explicit values or `points` evenly spaced in `[start, stop]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Values(Vec<f64>),
    Linear { start: f64, stop: f64, points: usize },
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Values(v) => v.clone(),
            Sweep::Linear { start, stop, points: 1 } if start == stop => vec![*start],
            Sweep::Linear { start, stop, points } => {
                let n = (*points).max(2);
                (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: SystemParams<f64>,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Fock cutoff of the full model; `None` chooses one from the fields.
    pub fock_cutoff: Option<usize>,
    pub detection: Detection,
    pub initial: Initial,
    /// Length of the `fields` run; defaults to `t_meas + t_off`.
    pub t_end: Option<f64>,
    /// Number of `t_off` samples for `ensemble`.
    pub t_off_points: usize,
    /// Row stride for per-step outputs.
    pub stride: usize,
    pub sweep: Option<Sweep>,
    /// Protocol post-selection half-window.
    pub delta: f64,
    pub use_cascaded: bool,
    pub feedback: bool,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`, physics as in the reference setup.
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            params: SystemParams::default(),
            dt: 1e-3,
            trajectories: 1000,
            seed: 0,
            fock_cutoff: None,
            detection: Detection::Homodyne,
            initial: Initial::Plus,
            t_end: None,
            t_off_points: 21,
            stride: 1,
            sweep: None,
            delta: 0.05,
            use_cascaded: false,
            feedback: true,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.trajectories == 0 {
            return bad("trajectories must be at least 1".into());
        }
        if self.stride == 0 || self.t_off_points == 0 {
            return bad("stride and t_off_points must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta <= std::f64::consts::PI) {
            return bad(format!("delta must lie in (0, π], got {}", self.delta));
        }
        if self.params.kappa != 1.0 {
            return bad("rates are in units of κ; kappa must be 1".into());
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t_end must be positive, got {t}"));
            }
        }
        if let Some(Sweep::Linear { points: 0, .. }) = self.sweep {
            return bad("sweep_points must be at least 1".into());
        }
        if let Some(Sweep::Values(v)) = &self.sweep {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return bad("sweep_values must be a non-empty list of numbers".into());
            }
        }
        self.params.validate()
    }

    /// Effective configuration as `key = value` lines (re-parseable),
    /// without the output path.
    pub fn echo(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        for (k, v) in [
            ("chi", p.chi),
            ("kappa", p.kappa),
            ("eta", p.eta),
            ("epsilon_m", p.epsilon_m),
            ("delta_r", p.delta_r),
            ("t_meas", p.t_meas),
            ("t_off", p.t_off),
            ("phi", p.phi),
            ("gamma1", p.gamma1),
            ("gamma_phi", p.gamma_phi),
            ("omega_a", p.omega_a),
            ("kappa_b", p.kappa_b),
            ("dt", self.dt),
            ("delta", self.delta),
        ] {
            kv(k, format!("{v:?}"));
        }
        kv("trajectories", self.trajectories.to_string());
        kv("seed", self.seed.to_string());
        kv("fock_cutoff", self.fock_cutoff.map_or("auto".into(), |n| n.to_string()));
        kv(
            "detection",
            match self.detection {
                Detection::Homodyne => "homodyne".into(),
                Detection::Photo => "photo".into(),
            },
        );
        kv("initial", self.initial.name().into());
        kv("t_end", self.t_end.map_or("auto".into(), |t| format!("{t:?}")));
        kv("t_off_points", self.t_off_points.to_string());
        kv("stride", self.stride.to_string());
        match &self.sweep {
            None => {}
            Some(Sweep::Values(v)) => kv(
                "sweep_values",
                v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "),
            ),
            Some(Sweep::Linear { start, stop, points }) => {
                kv("sweep_start", format!("{start:?}"));
                kv("sweep_stop", format!("{stop:?}"));
                kv("sweep_points", points.to_string());
            }
        }
        kv("use_cascaded", self.use_cascaded.to_string());
        kv("feedback", self.feedback.to_string());
        // the output location is left out so that the bytes depend only on
        // the physics and run settings
        s
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn num<T: FromStr>(e: &Entry<'_>, key: &str) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| err(e.line, format!("`{key}`: expected a number, got `{}`", e.value)))
}

fn flag(e: &Entry<'_>, key: &str) -> Result<bool> {
    match e.value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => Err(err(e.line, format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

/// Parses `text` for `experiment`. A line `experiment = NAME` in the file
/// must agree with the requested experiment.
pub fn parse_config(text: &str, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&str, Entry<'_>> = BTreeMap::new();
    let lines = text.lines().count();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(err(line, format!("`{key}` has no value")));
        }
        if entries.insert(key, Entry { line, value }).is_some() {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
    }

    let mut cfg = ExperimentConfig::defaults(experiment);
    let p = &mut cfg.params;
    let mut line_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (&key, e) in &entries {
        line_of.insert(key, e.line);
        match key {
            "experiment" => {
                let named: Experiment = e.value.parse().map_err(|m: String| err(e.line, m))?;
                if named != experiment {
                    return Err(err(
                        e.line,
                        format!("config is for `{named}` but `{experiment}` was requested"),
                    ));
                }
            }
            "chi" => p.chi = num(e, key)?,
            "kappa" => p.kappa = num(e, key)?,
            "eta" => p.eta = num(e, key)?,
            "epsilon_m" => p.epsilon_m = num(e, key)?,
            "delta_r" => p.delta_r = num(e, key)?,
            "t_meas" => p.t_meas = num(e, key)?,
            "t_off" => p.t_off = num(e, key)?,
            "phi" => p.phi = num(e, key)?,
            "gamma1" => p.gamma1 = num(e, key)?,
            "gamma_phi" => p.gamma_phi = num(e, key)?,
            "omega_a" => p.omega_a = num(e, key)?,
            "kappa_b" => p.kappa_b = num(e, key)?,
            "dt" => cfg.dt = num(e, key)?,
            "delta" => cfg.delta = num(e, key)?,
            "trajectories" => cfg.trajectories = num(e, key)?,
            "seed" => cfg.seed = num(e, key)?,
            "t_off_points" => cfg.t_off_points = num(e, key)?,
            "stride" => cfg.stride = num(e, key)?,
            "fock_cutoff" => cfg.fock_cutoff = if e.value == "auto" { None } else { Some(num(e, key)?) },
            "t_end" => cfg.t_end = if e.value == "auto" { None } else { Some(num(e, key)?) },
            "detection" => {
                cfg.detection = match e.value {
                    "homodyne" => Detection::Homodyne,
                    "photo" => Detection::Photo,
                    v => {
                        return Err(err(
                            e.line,
                            format!("`detection`: expected homodyne or photo, got `{v}`"),
                        ))
                    }
                }
            }
            "initial" => {
                cfg.initial = match e.value {
                    "plus" => Initial::Plus,
                    "ground" => Initial::Ground,
                    "excited" => Initial::Excited,
                    v => {
                        return Err(err(
                            e.line,
                            format!("`initial`: expected plus, ground or excited, got `{v}`"),
                        ))
                    }
                }
            }
            "use_cascaded" => cfg.use_cascaded = flag(e, key)?,
            "feedback" => cfg.feedback = flag(e, key)?,
            "output" => cfg.output = Some(PathBuf::from(e.value)),
            "sweep_values" => {
                let v = e
                    .value
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| err(e.line, format!("`sweep_values`: bad number `{}`", x.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                cfg.sweep = Some(Sweep::Values(v));
            }
            // read together below
            "sweep_start" | "sweep_stop" | "sweep_points" => {}
            _ => unreachable!("key table and parser out of sync: {key}"),
        }
    }

    let linear: Vec<_> = ["sweep_start", "sweep_stop", "sweep_points"]
        .iter()
        .map(|k| entries.get(k).map(|e| (*k, e)))
        .collect();
    let eof = lines + 1;
    if linear.iter().any(Option::is_some) {
        if let Some(e) = entries.get("sweep_values") {
            return Err(err(e.line, "give either sweep_values or sweep_start/stop/points"));
        }
        let missing: Vec<_> = ["sweep_start", "sweep_stop", "sweep_points"]
            .iter()
            .zip(&linear)
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if let Some(k) = missing.first() {
            return Err(err(eof, format!("missing required key `{k}` (end of input)")));
        }
        let get = |i: usize| linear[i].expect("checked above");
        cfg.sweep = Some(Sweep::Linear {
            start: num(get(0).1, "sweep_start")?,
            stop: num(get(1).1, "sweep_stop")?,
            points: num(get(2).1, "sweep_points")?,
        });
    }
    if experiment.needs_sweep() && cfg.sweep.is_none() {
        return Err(err(
            eof,
            format!(
                "missing required key `sweep_values` (or sweep_start/stop/points) for `{experiment}` (end of input)"
            ),
        ));
    }

    cfg.validate().map_err(|e| {
        // attribute range errors to the offending line when it is obvious
        let msg = e.to_string();
        let line = line_of
            .iter()
            .find(|(k, _)| msg.contains(&format!("{k} ")) || msg.starts_with(&format!("invalid parameters: {k}")))
            .map_or(eof, |(_, &l)| l);
        err(line, msg)
    })?;
    Ok(cfg)
}

const KEYS: &[&str] = &[
    "experiment",
    "chi",
    "kappa",
    "eta",
    "epsilon_m",
    "delta_r",
    "t_meas",
    "t_off",
    "phi",
    "gamma1",
    "gamma_phi",
    "omega_a",
    "kappa_b",
    "dt",
    "delta",
    "trajectories",
    "seed",
    "fock_cutoff",
    "detection",
    "initial",
    "t_end",
    "t_off_points",
    "stride",
    "sweep_values",
    "sweep_start",
    "sweep_stop",
    "sweep_points",
    "use_cascaded",
    "feedback",
    "output",
];
