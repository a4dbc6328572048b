//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Rates are in units of `κ` and times in units of `1/κ`; `kappa` itself
//! only sets the physical scale.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use backaction::analysis::Engine;
use backaction::protocols::{ControlParams, NoiseParams, ProtocolKind};
use backaction::sde::BoundaryMode;

use crate::CliError;

/// Which ensemble engine to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChoice {
    /// SME for the signed circle, reduced equation for interval mode.
    Auto,
    Sme,
    Reduced,
}

impl EngineChoice {
    fn name(self) -> &'static str {
        match self {
            EngineChoice::Auto => "auto",
            EngineChoice::Sme => "sme",
            EngineChoice::Reduced => "reduced",
        }
    }
}

impl FromStr for EngineChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(EngineChoice::Auto),
            "sme" => Ok(EngineChoice::Sme),
            "reduced" => Ok(EngineChoice::Reduced),
            _ => Err(format!("unknown engine '{s}' (auto, sme, reduced)")),
        }
    }
}

pub fn boundary_name(b: BoundaryMode) -> &'static str {
    match b {
        BoundaryMode::SignedCircle => "circle",
        BoundaryMode::IntervalPeriodic => "interval",
    }
}

pub fn parse_boundary(s: &str) -> Result<BoundaryMode, String> {
    match s {
        "circle" => Ok(BoundaryMode::SignedCircle),
        "interval" => Ok(BoundaryMode::IntervalPeriodic),
        _ => Err(format!("unknown boundary '{s}' (circle, interval)")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    pub kappa: f64,
    pub mu: f64,
    pub alpha_max: f64,
    pub k_max: f64,
    pub k_perp: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    pub gamma: f64,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub boundary: BoundaryMode,
    pub out: PathBuf,
    pub engine: EngineChoice,
    pub importance: bool,
    pub delta0: f64,
    pub record_every: usize,
    pub fit_start: f64,
    pub fit_end: f64,
    pub tail_fraction: f64,
    pub passage_min: f64,
    pub passage_points: usize,
    pub passage_horizon: f64,
    pub fp_cells: usize,
    pub fp_depth: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_points: usize,
    pub ss_ensemble: usize,
    pub burn_in: f64,
    pub sample_window: f64,
    pub ss_delta0: f64,
    pub k_min: f64,
    pub k_points: usize,
    pub levels: usize,
    pub nlevel_ensemble: usize,
    pub nlevel_horizon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::DiffusionGradient,
            kappa: 1.0,
            mu: 1.0,
            alpha_max: PI * PI,
            k_max: PI * PI,
            k_perp: 1.0,
            beta_x: 0.0,
            beta_y: 0.0,
            beta_z: 0.0,
            gamma: 0.0,
            dt: 1e-3,
            horizon: 12.0,
            ensemble: 10_000,
            seed: 1,
            boundary: BoundaryMode::SignedCircle,
            out: PathBuf::from("out"),
            engine: EngineChoice::Auto,
            importance: true,
            delta0: PI,
            record_every: 100,
            fit_start: 4.0,
            fit_end: 8.0,
            tail_fraction: 0.3,
            passage_min: 1e-6,
            passage_points: 25,
            passage_horizon: 4.0,
            fp_cells: 1024,
            fp_depth: 40.0,
            gamma_min: 0.005,
            gamma_max: 0.5,
            gamma_points: 8,
            ss_ensemble: 2000,
            burn_in: 10.0,
            sample_window: 10.0,
            ss_delta0: PI / 2.0,
            k_min: 0.01,
            k_points: 16,
            levels: 3,
            nlevel_ensemble: 200,
            nlevel_horizon: 10.0,
        }
    }
}

/// Every key, in file order.
pub const KEYS: &[&str] = &[
    "protocol",
    "kappa",
    "mu",
    "alpha_max",
    "k_max",
    "k_perp",
    "beta_x",
    "beta_y",
    "beta_z",
    "gamma",
    "dt",
    "horizon",
    "ensemble",
    "seed",
    "boundary",
    "out",
    "engine",
    "importance",
    "delta0",
    "record_every",
    "fit_start",
    "fit_end",
    "tail_fraction",
    "passage_min",
    "passage_points",
    "passage_horizon",
    "fp_cells",
    "fp_depth",
    "gamma_min",
    "gamma_max",
    "gamma_points",
    "ss_ensemble",
    "burn_in",
    "sample_window",
    "ss_delta0",
    "k_min",
    "k_points",
    "levels",
    "nlevel_ensemble",
    "nlevel_horizon",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "protocol" => {
                self.protocol = v
                    .parse()
                    .map_err(|e| CliError::Config(format!("protocol: {e}")))?
            }
            "kappa" => self.kappa = num(key, v)?,
            "mu" => self.mu = num(key, v)?,
            "alpha_max" => self.alpha_max = num(key, v)?,
            "k_max" => self.k_max = num(key, v)?,
            "k_perp" => self.k_perp = num(key, v)?,
            "beta_x" => self.beta_x = num(key, v)?,
            "beta_y" => self.beta_y = num(key, v)?,
            "beta_z" => self.beta_z = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "dt" => self.dt = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "ensemble" => self.ensemble = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "boundary" => self.boundary = parse_boundary(v).map_err(CliError::Config)?,
            "out" => self.out = PathBuf::from(v),
            "engine" => self.engine = v.parse().map_err(CliError::Config)?,
            "importance" => self.importance = num(key, v)?,
            "delta0" => self.delta0 = num(key, v)?,
            "record_every" => self.record_every = num(key, v)?,
            "fit_start" => self.fit_start = num(key, v)?,
            "fit_end" => self.fit_end = num(key, v)?,
            "tail_fraction" => self.tail_fraction = num(key, v)?,
            "passage_min" => self.passage_min = num(key, v)?,
            "passage_points" => self.passage_points = num(key, v)?,
            "passage_horizon" => self.passage_horizon = num(key, v)?,
            "fp_cells" => self.fp_cells = num(key, v)?,
            "fp_depth" => self.fp_depth = num(key, v)?,
            "gamma_min" => self.gamma_min = num(key, v)?,
            "gamma_max" => self.gamma_max = num(key, v)?,
            "gamma_points" => self.gamma_points = num(key, v)?,
            "ss_ensemble" => self.ss_ensemble = num(key, v)?,
            "burn_in" => self.burn_in = num(key, v)?,
            "sample_window" => self.sample_window = num(key, v)?,
            "ss_delta0" => self.ss_delta0 = num(key, v)?,
            "k_min" => self.k_min = num(key, v)?,
            "k_points" => self.k_points = num(key, v)?,
            "levels" => self.levels = num(key, v)?,
            "nlevel_ensemble" => self.nlevel_ensemble = num(key, v)?,
            "nlevel_horizon" => self.nlevel_horizon = num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Textual value of a key; floats use the shortest exact representation.
    pub fn get(&self, key: &str) -> Option<String> {
        let f = |v: f64| format!("{v:?}");
        Some(match key {
            "protocol" => self.protocol.name().to_string(),
            "kappa" => f(self.kappa),
            "mu" => f(self.mu),
            "alpha_max" => f(self.alpha_max),
            "k_max" => f(self.k_max),
            "k_perp" => f(self.k_perp),
            "beta_x" => f(self.beta_x),
            "beta_y" => f(self.beta_y),
            "beta_z" => f(self.beta_z),
            "gamma" => f(self.gamma),
            "dt" => f(self.dt),
            "horizon" => f(self.horizon),
            "ensemble" => self.ensemble.to_string(),
            "seed" => self.seed.to_string(),
            "boundary" => boundary_name(self.boundary).to_string(),
            "out" => self.out.display().to_string(),
            "engine" => self.engine.name().to_string(),
            "importance" => self.importance.to_string(),
            "delta0" => f(self.delta0),
            "record_every" => self.record_every.to_string(),
            "fit_start" => f(self.fit_start),
            "fit_end" => f(self.fit_end),
            "tail_fraction" => f(self.tail_fraction),
            "passage_min" => f(self.passage_min),
            "passage_points" => self.passage_points.to_string(),
            "passage_horizon" => f(self.passage_horizon),
            "fp_cells" => self.fp_cells.to_string(),
            "fp_depth" => f(self.fp_depth),
            "gamma_min" => f(self.gamma_min),
            "gamma_max" => f(self.gamma_max),
            "gamma_points" => self.gamma_points.to_string(),
            "ss_ensemble" => self.ss_ensemble.to_string(),
            "burn_in" => f(self.burn_in),
            "sample_window" => f(self.sample_window),
            "ss_delta0" => f(self.ss_delta0),
            "k_min" => f(self.k_min),
            "k_points" => self.k_points.to_string(),
            "levels" => self.levels.to_string(),
            "nlevel_ensemble" => self.nlevel_ensemble.to_string(),
            "nlevel_horizon" => f(self.nlevel_horizon),
            _ => return None,
        })
    }

    /// Parse a config file body on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value'", n + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("known key"));
        }
        s
    }

    /// Apply `BACKACTION_<KEY>` overrides from an environment listing.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            if let Some(rest) = name.strip_prefix("BACKACTION_") {
                let key = rest.to_ascii_lowercase();
                if KEYS.contains(&key.as_str()) {
                    self.set(&key, &value)?;
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let finite = [
            ("kappa", self.kappa),
            ("mu", self.mu),
            ("alpha_max", self.alpha_max),
            ("k_max", self.k_max),
            ("k_perp", self.k_perp),
            ("beta_x", self.beta_x),
            ("beta_y", self.beta_y),
            ("beta_z", self.beta_z),
            ("gamma", self.gamma),
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("gamma_min", self.gamma_min),
            ("gamma_max", self.gamma_max),
        ];
        for (k, v) in finite {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{k} = {v} must be finite and >= 0"));
            }
        }
        if self.kappa <= 0.0 {
            return bad("kappa must be > 0".into());
        }
        if self.dt <= 0.0 {
            return bad(format!("dt = {} must be > 0", self.dt));
        }
        if self.horizon < self.dt {
            return bad(format!(
                "horizon = {} is shorter than dt = {}",
                self.horizon, self.dt
            ));
        }
        if self.passage_horizon < self.dt {
            return bad(format!(
                "passage_horizon = {} is shorter than dt = {}",
                self.passage_horizon, self.dt
            ));
        }
        if self.ensemble < 1 || self.ss_ensemble < 1 || self.nlevel_ensemble < 1 {
            return bad("ensemble sizes must be >= 1".into());
        }
        if self.record_every < 1 {
            return bad("record_every must be >= 1".into());
        }
        if !(self.fit_start < self.fit_end && self.fit_end <= self.horizon) {
            return bad(format!(
                "fit window [{}, {}] must be nonempty and end by the horizon {}",
                self.fit_start, self.fit_end, self.horizon
            ));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return bad(format!("tail_fraction = {} not in (0, 1)", self.tail_fraction));
        }
        if !(self.passage_min > 0.0 && self.passage_min < 1.0) || self.passage_points < 2 {
            return bad("need passage_min in (0, 1) and passage_points >= 2".into());
        }
        if self.fp_cells < backaction::fokker_planck::MIN_CELLS || !(self.fp_depth > 0.0) {
            return bad(format!(
                "fp_cells must be >= {} and fp_depth > 0",
                backaction::fokker_planck::MIN_CELLS
            ));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max) || self.gamma_points < 1 {
            return bad("need 0 < gamma_min <= gamma_max and gamma_points >= 1".into());
        }
        if self.burn_in < 10.0 {
            return bad(format!("burn_in = {} is shorter than 10/κ", self.burn_in));
        }
        if !(self.sample_window > 0.0) {
            return bad("sample_window must be > 0".into());
        }
        if !(self.k_min > 0.0 && self.k_min <= self.k_max) || self.k_points < 1 {
            return bad("need 0 < k_min <= k_max and k_points >= 1".into());
        }
        if !(2..=backaction::sme::MAX_LEVELS).contains(&self.levels) {
            return bad(format!(
                "levels = {} not in [2, {}]",
                self.levels,
                backaction::sme::MAX_LEVELS
            ));
        }
        if !(self.nlevel_horizon >= self.dt) {
            return bad("nlevel_horizon is shorter than dt".into());
        }
        if !(self.delta0.abs() <= PI && self.ss_delta0.abs() <= PI) {
            return bad("initial angles must lie in [-π, π]".into());
        }
        self.engine()?;
        Ok(())
    }

    /// Resolved ensemble engine.
    pub fn engine(&self) -> Result<Engine, CliError> {
        match (self.engine, self.boundary) {
            (EngineChoice::Sme, BoundaryMode::IntervalPeriodic) => Err(CliError::Config(
                "engine = sme needs boundary = circle; interval mode runs on the reduced engine"
                    .into(),
            )),
            (EngineChoice::Sme, _) | (EngineChoice::Auto, BoundaryMode::SignedCircle) => Ok(Engine::Sme),
            _ => Ok(Engine::Reduced),
        }
    }

    /// Physical control parameters.
    pub fn control(&self) -> ControlParams {
        let k = self.kappa;
        ControlParams {
            kappa: k,
            mu: self.mu * k,
            alpha_max: self.alpha_max * k,
            k_max: self.k_max * k,
            k_perp: self.k_perp * k,
        }
    }

    /// Physical noise rates.
    pub fn noise(&self) -> NoiseParams {
        let k = self.kappa;
        NoiseParams {
            beta_x: self.beta_x * k,
            beta_y: self.beta_y * k,
            beta_z: self.beta_z * k,
            gamma: self.gamma * k,
        }
    }

    /// Noise with all four rates equal to `g` (in units of κ).
    pub fn uniform_noise(&self, g: f64) -> NoiseParams {
        NoiseParams::uniform(g * self.kappa)
    }

    /// Physical time for a value in units of 1/κ.
    pub fn time(&self, t: f64) -> f64 {
        t / self.kappa
    }
}
