//! Ensemble reductions, rate fits, first-passage times, steady-state
//! estimates and the perpendicular-protocol strength sweep.

use std::f64::consts::PI;

use crate::numeric::{fit_line, pairwise_sum};
use crate::protocols::{
    ControlParams, GroundStateTilt, NoiseParams, NoiselessModel, ProtocolKind, TiltLayout,
};
use nalgebra::Vector3;

use crate::quantum::{bloch_error_probability, error_probability_unchecked, BlochState};
use crate::sde::{ensemble_map, integrate_observed, BoundaryMode, NoiseStream, Stepper, Tilt, TrajectoryPath};
use crate::sme::{QubitController, SmeScheme};
use crate::{Error, Result};

/// Pointwise mean and standard error over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// `sample std / √count`; `NaN` for a single trajectory.
    pub stderr: Vec<f64>,
    pub count: usize,
    /// Stream indices `first..=last` used, under `seed`.
    pub seed: u64,
    pub streams: (u64, u64),
}

/// Sum that does not depend on the order of `values`.
fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    pairwise_sum(values)
}

fn canonical_mean_stderr(values: &mut [f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = canonical_sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = canonical_sum(&mut sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ensemble mean of `f(state)`; tilted paths are reweighted by their
/// likelihood ratios.
pub fn ensemble_average_by<F>(paths: &[TrajectoryPath], f: F) -> Result<EnsembleSeries>
where
    F: Fn(&[f64]) -> f64,
{
    let first = paths.first().ok_or(Error::EmptyEnsemble)?;
    for p in paths {
        if p.times != first.times {
            return Err(Error::InvalidParameter(
                "trajectories are not time-aligned".into(),
            ));
        }
    }
    let n_t = first.len();
    let mut mean = Vec::with_capacity(n_t);
    let mut stderr = Vec::with_capacity(n_t);
    let mut column = vec![0.0; paths.len()];
    for i in 0..n_t {
        for (c, p) in column.iter_mut().zip(paths) {
            let w = p.log_weights.as_ref().map_or(1.0, |w| w[i].exp());
            *c = w * f(p.state(i));
        }
        let (m, s) = canonical_mean_stderr(&mut column);
        mean.push(m);
        stderr.push(s);
    }
    let lo = paths.iter().map(|p| p.stream_index).min().unwrap_or(0);
    let hi = paths.iter().map(|p| p.stream_index).max().unwrap_or(0);
    Ok(EnsembleSeries {
        times: first.times.clone(),
        mean,
        stderr,
        count: paths.len(),
        seed: first.seed,
        streams: (lo, hi),
    })
}

/// Mean error probability, with `P_e` in state component 0 (the layout of
/// controlled SME runs).
pub fn ensemble_average_error(paths: &[TrajectoryPath]) -> Result<EnsembleSeries> {
    ensemble_average_by(paths, |s| s[0])
}

/// Exponential rate fitted to `ln(mean)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn fit_points(series: &EnsembleSeries, t0: f64, t1: f64) -> Result<RateFit> {
    let mut in_window = 0;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 0..series.times.len() {
        let t = series.times[i];
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            continue;
        }
        in_window += 1;
        let m = series.mean[i];
        let se = series.stderr[i];
        let resolved = m > 0.0 && (se.is_nan() || m > 10.0 * se);
        if resolved {
            x.push(t);
            y.push(m.ln());
        }
    }
    if x.len() < 3 || 2 * x.len() < in_window {
        return Err(Error::InsufficientSignal(format!(
            "{} of {in_window} points in [{t0}, {t1}] exceed ten standard errors",
            x.len()
        )));
    }
    let f = fit_line(&x, &y)
        .ok_or_else(|| Error::InsufficientSignal("degenerate fit window".into()))?;
    Ok(RateFit {
        rate: -f.slope,
        window: (x[0], *x.last().unwrap()),
        residual: f.residual,
        r_squared: f.r_squared,
        points: x.len(),
    })
}

/// Fit over the final `tail_fraction` of the time range.
pub fn fit_asymptotic_rate(series: &EnsembleSeries, tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction {tail_fraction} not in (0, 1)"
        )));
    }
    let (&t_first, &t_last) = match (series.times.first(), series.times.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyEnsemble),
    };
    let t0 = t_last - tail_fraction * (t_last - t_first);
    fit_points(series, t0, t_last)
}

/// Fit over an explicit window `[t0, t1]`.
pub fn fit_rate_in_window(series: &EnsembleSeries, t0: f64, t1: f64) -> Result<RateFit> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!("empty window [{t0}, {t1}]")));
    }
    fit_points(series, t0, t1)
}

/// Which dynamics an ensemble integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Full qubit SME with feedback.
    #[default]
    Sme,
    /// The reduced noiseless angle equation (diffusion-gradient, no noise).
    Reduced,
}

/// Ensemble size, integration grid and initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub trajectories: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Initial signed angle from the target.
    pub delta0: f64,
    /// Initial Bloch length.
    pub a0: f64,
    pub boundary: BoundaryMode,
    pub engine: Engine,
    pub scheme: SmeScheme,
    /// Sample under the ground-state tilt and reweight.
    pub importance: bool,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            trajectories: 10_000,
            dt: 1e-3,
            horizon: 12.0,
            seed: 1,
            record_every: 100,
            delta0: PI,
            a0: 1.0,
            boundary: BoundaryMode::SignedCircle,
            engine: Engine::Sme,
            scheme: SmeScheme::Kraus,
            importance: false,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one trajectory".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "need horizon >= dt > 0 (horizon {}, dt {})",
                self.horizon, self.dt
            )));
        }
        if !(self.a0 >= 0.0 && self.a0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("initial length {} not in [0, 1]", self.a0)));
        }
        Ok(())
    }

    fn initial_bloch(&self) -> BlochState {
        BlochState::from_signed_angle(self.delta0, self.a0)
    }
}

/// A per-trajectory job: stepper, initial state and how to read `P_e`.
struct Job {
    stepper: Box<dyn Stepper + Sync>,
    initial: Vec<f64>,
    tilt: Option<GroundStateTilt>,
    error_of: fn(&[f64]) -> f64,
}

fn wrap_circle_start(x: f64) -> f64 {
    BoundaryMode::SignedCircle.wrap(x)
}

fn pe_from_angle(s: &[f64]) -> f64 {
    error_probability_unchecked(s[0].abs(), 1.0)
}

fn pe_from_bloch(s: &[f64]) -> f64 {
    bloch_error_probability(&Vector3::new(s[0], s[1], s[2]), &Vector3::z())
}

fn build_job(kind: ProtocolKind, params: &ControlParams, noise: &NoiseParams, spec: &EnsembleSpec) -> Result<Job> {
    params.validate()?;
    noise.validate()?;
    spec.validate()?;
    match spec.engine {
        Engine::Reduced => {
            if !matches!(kind, ProtocolKind::DiffusionGradient) || !noise.is_zero() {
                return Err(Error::InvalidParameter(
                    "the reduced engine covers noiseless diffusion-gradient control only".into(),
                ));
            }
            let model = NoiselessModel::new(params).with_boundary(spec.boundary);
            // π and 0 are the same point of the interval chart; start just
            // inside π rather than at the target.
            let x0 = match spec.boundary {
                BoundaryMode::IntervalPeriodic => spec.delta0.abs().min(PI * (1.0 - 1e-12)),
                BoundaryMode::SignedCircle => wrap_circle_start(spec.delta0),
            };
            Ok(Job {
                stepper: Box::new(model),
                initial: vec![x0],
                tilt: spec.importance.then_some(GroundStateTilt {
                    kappa: params.kappa,
                    layout: TiltLayout::SignedAngle,
                }),
                error_of: pe_from_angle,
            })
        }
        Engine::Sme => {
            if spec.boundary != BoundaryMode::SignedCircle {
                return Err(Error::InvalidParameter(
                    "the SME engine lives on the Bloch sphere; interval mode applies to the reduced engine".into(),
                ));
            }
            if spec.importance && (!noise.is_zero() || kind != ProtocolKind::DiffusionGradient) {
                return Err(Error::InvalidParameter(
                    "importance sampling is defined for noiseless diffusion-gradient control".into(),
                ));
            }
            let c = QubitController::new(kind, *params, *noise).with_scheme(spec.scheme);
            Ok(Job {
                stepper: Box::new(c),
                initial: spec.initial_bloch().vector().as_slice().to_vec(),
                tilt: spec.importance.then_some(GroundStateTilt {
                    kappa: params.kappa,
                    layout: TiltLayout::Bloch,
                }),
                error_of: pe_from_bloch,
            })
        }
    }
}

impl Job {
    fn run<F: FnMut(f64, &[f64], f64)>(&self, spec: &EnsembleSpec, index: usize, every: usize, observe: F) -> Result<()> {
        let mut stream = NoiseStream::new(spec.seed, index as u64);
        integrate_observed(
            self.stepper.as_ref(),
            &self.initial,
            spec.horizon,
            spec.dt,
            &mut stream,
            every,
            self.tilt.as_ref().map(|t| t as &dyn Tilt),
            observe,
        )
    }
}

/// Run an ensemble and record `P_e` (component 0) every `record_every` steps.
pub fn error_probability_paths(
    kind: ProtocolKind,
    params: &ControlParams,
    noise: &NoiseParams,
    spec: &EnsembleSpec,
) -> Result<Vec<TrajectoryPath>> {
    let job = build_job(kind, params, noise, spec)?;
    ensemble_map(spec.trajectories, |i| {
        let mut path = TrajectoryPath {
            times: Vec::new(),
            states: Vec::new(),
            dim: 1,
            seed: spec.seed,
            stream_index: i as u64,
            log_weights: job.tilt.map(|_| Vec::new()),
        };
        job.run(spec, i, spec.record_every, |t, x, lw| {
            path.times.push(t);
            path.states.push((job.error_of)(x));
            if let Some(w) = path.log_weights.as_mut() {
                w.push(lw);
            }
        })?;
        Ok(path)
    })
}

/// `⟨P_e⟩(t)` over an ensemble.
pub fn error_series(
    kind: ProtocolKind,
    params: &ControlParams,
    noise: &NoiseParams,
    spec: &EnsembleSpec,
) -> Result<EnsembleSeries> {
    ensemble_average_error(&error_probability_paths(kind, params, noise, spec)?)
}

/// Mean first-passage time per threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageSummary {
    pub thresholds: Vec<f64>,
    /// Mean over trajectories that passed.
    pub mean_time: Vec<f64>,
    pub stderr: Vec<f64>,
    pub passed: Vec<usize>,
    /// Trajectories that never passed within the horizon.
    pub censored: Vec<usize>,
    pub horizon: f64,
}

/// First time `P_e ≤ threshold`, per threshold, for each trajectory.
pub fn first_passage_times(
    kind: ProtocolKind,
    params: &ControlParams,
    noise: &NoiseParams,
    thresholds: &[f64],
    spec: &EnsembleSpec,
) -> Result<PassageSummary> {
    if thresholds.is_empty()
        || thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0))
        || thresholds.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter(
            "thresholds must be strictly descending in (0, 1]".into(),
        ));
    }
    let job = build_job(kind, params, noise, spec)?;
    if job.tilt.is_some() {
        return Err(Error::InvalidParameter(
            "first-passage times are estimated without importance sampling".into(),
        ));
    }
    let per: Vec<Vec<Option<f64>>> = ensemble_map(spec.trajectories, |i| {
        let mut hit = vec![None; thresholds.len()];
        let mut next = 0;
        job.run(spec, i, 1, |t, x, _| {
            let pe = (job.error_of)(x);
            while next < thresholds.len() && pe <= thresholds[next] {
                hit[next] = Some(t);
                next += 1;
            }
        })?;
        Ok(hit)
    })?;
    let total = per.len();
    let mut summary = PassageSummary {
        thresholds: thresholds.to_vec(),
        mean_time: Vec::new(),
        stderr: Vec::new(),
        passed: Vec::new(),
        censored: Vec::new(),
        horizon: spec.horizon,
    };
    for j in 0..thresholds.len() {
        let mut times: Vec<f64> = per.iter().filter_map(|h| h[j]).collect();
        let missed = total - times.len();
        if j == 0 && 2 * missed > total {
            return Err(Error::HorizonExhausted { missed, total });
        }
        let (m, s) = if times.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            canonical_mean_stderr(&mut times)
        };
        summary.mean_time.push(m);
        summary.stderr.push(s);
        summary.passed.push(times.len());
        summary.censored.push(missed);
    }
    Ok(summary)
}

/// Rate of `ln(threshold)` against mean passage time over the thresholds
/// whose mean time lies in the final `tail_fraction` of the covered range.
/// Thresholds with any censored trajectory are excluded.
pub fn passage_rate(summary: &PassageSummary, tail_fraction: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = (0..summary.thresholds.len())
        .filter(|&j| summary.censored[j] == 0 && summary.mean_time[j].is_finite())
        .map(|j| (summary.mean_time[j], summary.thresholds[j].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSignal("fewer than three uncensored thresholds".into()));
    }
    let t_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let t_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t0 = t_max - tail_fraction * (t_max - t_min);
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().filter(|p| p.0 >= t0).unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientSignal("fewer than three thresholds in the tail".into()));
    }
    let f = fit_line(&x, &y).ok_or_else(|| Error::InsufficientSignal("degenerate fit".into()))?;
    Ok(RateFit {
        rate: -f.slope,
        window: (x[0], *x.last().unwrap()),
        residual: f.residual,
        r_squared: f.r_squared,
        points: x.len(),
    })
}

/// Time- and ensemble-averaged error probability after burn-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub value: f64,
    pub stderr: f64,
    /// Larger in magnitude of the mean and sign-count statistics of the
    /// second-half minus first-half differences, in standard errors.
    pub drift_z: f64,
}

/// Stationarity threshold on [`SteadyState::drift_z`].
pub const STATIONARITY_Z: f64 = 4.0;

/// Steady-state `⟨P_e⟩` of a protocol.
///
/// Each trajectory is averaged over `[burn_in, burn_in + sample_window]`;
/// the window is also split in halves and the per-trajectory differences of
/// the half means are tested against zero, both by their mean and by a sign
/// count. `spec.horizon` is ignored.
pub fn steady_state_error(
    kind: ProtocolKind,
    params: &ControlParams,
    noise: &NoiseParams,
    burn_in: f64,
    sample_window: f64,
    spec: &EnsembleSpec,
) -> Result<SteadyState> {
    if burn_in < 10.0 / params.kappa - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} is shorter than 10/κ"
        )));
    }
    if !(sample_window > 0.0) {
        return Err(Error::InvalidParameter("sample window must be positive".into()));
    }
    let mut s = *spec;
    s.horizon = burn_in + sample_window;
    s.importance = false;
    let job = build_job(kind, params, noise, &s)?;
    let every = s.record_every.max(1);
    let mid = burn_in + 0.5 * sample_window;
    let per: Vec<(f64, f64)> = ensemble_map(s.trajectories, |i| {
        let (mut first, mut second) = (Vec::new(), Vec::new());
        job.run(&s, i, every, |t, x, _| {
            if t > burn_in + 1e-12 {
                let pe = (job.error_of)(x);
                if t <= mid + 1e-12 {
                    first.push(pe);
                } else {
                    second.push(pe);
                }
            }
        })?;
        if first.is_empty() || second.is_empty() {
            return Err(Error::InvalidParameter(
                "sample window holds fewer than two records".into(),
            ));
        }
        let a = pairwise_sum(&first) / first.len() as f64;
        let b = pairwise_sum(&second) / second.len() as f64;
        let all = (pairwise_sum(&first) + pairwise_sum(&second)) / (first.len() + second.len()) as f64;
        Ok((all, b - a))
    })?;
    let mut values: Vec<f64> = per.iter().map(|p| p.0).collect();
    let mut diffs: Vec<f64> = per.iter().map(|p| p.1).collect();
    let (value, stderr) = canonical_mean_stderr(&mut values);
    let (dm, dse) = canonical_mean_stderr(&mut diffs);
    let mean_z = if dse > 0.0 {
        dm / dse
    } else if dm == 0.0 {
        0.0
    } else {
        dm.signum() * f64::INFINITY
    };
    // The mean of heavy-tailed decays is carried by a few paths; a sign
    // count sees the systematic trend that the mean misses.
    let n = diffs.len() as f64;
    let up = diffs.iter().filter(|d| **d > 0.0).count() as f64;
    let down = diffs.iter().filter(|d| **d < 0.0).count() as f64;
    let sign_z = if n > 0.0 { (up - down) / n.sqrt() } else { 0.0 };
    let drift_z = if sign_z.abs() > mean_z.abs() { sign_z } else { mean_z };
    if drift_z.abs() > STATIONARITY_Z {
        return Err(Error::NonStationary { value, z: drift_z });
    }
    Ok(SteadyState {
        value,
        stderr,
        drift_z,
    })
}

/// One row of a strength sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub value: f64,
    pub stderr: f64,
    /// The half-window check flagged this strength; it is excluded from the
    /// minimum.
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_k: f64,
    pub best_error: f64,
    pub best_stderr: f64,
    pub table: Vec<SweepRow>,
}

/// `n` log-spaced strengths in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default sweep grid: 16 log-spaced points in `[10⁻²κ, π²κ]`.
pub fn default_k_grid(kappa: f64) -> Vec<f64> {
    log_grid(1e-2 * kappa, PI * PI * kappa, 16)
}

/// Minimise an arbitrary evaluator over `k_grid`; ties go to the smaller `k`.
///
/// Strengths whose evaluation reports [`Error::NonStationary`] are kept in
/// the table but skipped; if every strength is non-stationary the first such
/// error is returned.
pub fn sweep_optimal_k_with<F>(k_grid: &[f64], k_max: f64, eval: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty strength grid".into()));
    }
    if let Some(k) = k_grid.iter().find(|k| !(**k >= 0.0 && **k <= k_max * (1.0 + 1e-12))) {
        return Err(Error::InvalidParameter(format!(
            "strength {k} outside [0, k_max = {k_max}]"
        )));
    }
    let mut table = Vec::with_capacity(k_grid.len());
    let mut first_err = None;
    for &k in k_grid {
        match eval(k) {
            Ok((value, stderr)) => table.push(SweepRow {
                k,
                value,
                stderr,
                stationary: true,
            }),
            Err(Error::NonStationary { value, z }) => {
                first_err.get_or_insert(Error::NonStationary { value, z });
                table.push(SweepRow {
                    k,
                    value,
                    stderr: f64::NAN,
                    stationary: false,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let best = table
        .iter()
        .filter(|r| r.stationary)
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.k.total_cmp(&b.k)))
        .copied();
    match best {
        Some(b) => Ok(SweepResult {
            best_k: b.k,
            best_error: b.value,
            best_stderr: b.stderr,
            table,
        }),
        None => Err(first_err.expect("a row failed")),
    }
}

/// Best constant perpendicular strength for the perpendicular Hamiltonian
/// protocol.
pub fn sweep_optimal_k(
    noise: &NoiseParams,
    params: &ControlParams,
    k_grid: &[f64],
    burn_in: f64,
    sample_window: f64,
    spec: &EnsembleSpec,
) -> Result<SweepResult> {
    sweep_optimal_k_with(k_grid, params.k_max, |k| {
        let mut p = *params;
        p.k_perp = k;
        let s = steady_state_error(
            ProtocolKind::HamiltonianPerpendicular,
            &p,
            noise,
            burn_in,
            sample_window,
            spec,
        )?;
        Ok((s.value, s.stderr))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(times: &[f64], values: &[f64], idx: u64) -> TrajectoryPath {
        TrajectoryPath {
            times: times.to_vec(),
            states: values.to_vec(),
            dim: 1,
            seed: 0,
            stream_index: idx,
            log_weights: None,
        }
    }

    fn series(times: &[f64], f: impl Fn(f64) -> f64) -> EnsembleSeries {
        EnsembleSeries {
            times: times.to_vec(),
            mean: times.iter().map(|t| f(*t)).collect(),
            stderr: vec![0.0; times.len()],
            count: 2,
            seed: 0,
            streams: (0, 1),
        }
    }

    #[test]
    fn identical_paths_have_zero_stderr() {
        let t = [0.0, 1.0, 2.0];
        let p = path(&t, &[0.3, 0.2, 0.1], 0);
        let s = ensemble_average_error(&[p.clone(), p]).unwrap();
        assert_eq!(s.mean, vec![0.3, 0.2, 0.1]);
        assert_eq!(s.stderr, vec![0.0; 3]);
    }

    #[test]
    fn two_constant_paths() {
        let t = [0.0, 1.0];
        let s = ensemble_average_error(&[path(&t, &[0.0, 0.0], 0), path(&t, &[1.0, 1.0], 1)]).unwrap();
        assert_eq!(s.mean, vec![0.5, 0.5]);
        assert!((s.stderr[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.streams, (0, 1));
    }

    #[test]
    fn empty_and_misaligned_ensembles() {
        assert_eq!(ensemble_average_error(&[]).unwrap_err(), Error::EmptyEnsemble);
        let a = path(&[0.0, 1.0], &[0.0, 0.0], 0);
        let b = path(&[0.0, 2.0], &[0.0, 0.0], 1);
        assert!(ensemble_average_error(&[a, b]).is_err());
    }

    #[test]
    fn exact_exponential_rate() {
        let t: Vec<f64> = (0..=120).map(|i| i as f64 * 0.1).collect();
        let f = fit_asymptotic_rate(&series(&t, |x| (-1.23 * x).exp()), 0.3).unwrap();
        assert!((f.rate - 1.23).abs() < 1e-6);
    }

    #[test]
    fn transient_is_ignored() {
        let t: Vec<f64> = (0..=500).map(|i| i as f64 * 0.1).collect();
        let f = fit_asymptotic_rate(&series(&t, |x| 0.5 * (-0.2 * x).exp() + (-2.0 * x).exp()), 0.3)
            .unwrap();
        assert!((f.rate - 0.2).abs() < 1e-6, "{}", f.rate);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t: Vec<f64> = (0..=50).map(|i| i as f64).collect();
        let f = fit_asymptotic_rate(&series(&t, |_| 0.25), 0.3).unwrap();
        assert!(f.rate.abs() < 1e-15);
    }

    #[test]
    fn noisy_tail_is_rejected() {
        let t: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let mut s = series(&t, |x| (-x).exp());
        s.stderr = s.mean.iter().map(|m| m * 0.5).collect();
        assert!(matches!(
            fit_asymptotic_rate(&s, 0.3),
            Err(Error::InsufficientSignal(_))
        ));
    }

    #[test]
    fn window_fit() {
        let t: Vec<f64> = (0..=120).map(|i| i as f64 * 0.1).collect();
        let f = fit_rate_in_window(&series(&t, |x| 3.0 * (-0.9 * x).exp()), 4.0, 8.0).unwrap();
        assert!((f.rate - 0.9).abs() < 1e-9);
        assert!((f.window.0 - 4.0).abs() < 1e-9 && (f.window.1 - 8.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_examples() {
        let r = sweep_optimal_k_with(&[0.7], 10.0, |k| Ok((k, 0.0))).unwrap();
        assert_eq!(r.best_k, 0.7);
        let r = sweep_optimal_k_with(&[0.5, 1.0, 2.0], 10.0, |k| Ok(((k - 1.0) * (k - 1.0) + 0.1, 0.0)))
            .unwrap();
        assert_eq!(r.best_k, 1.0);
        assert!((r.best_error - 0.1).abs() < 1e-15);
        let r = sweep_optimal_k_with(&[0.5, 1.0, 2.0], 10.0, |_| Ok((0.3, 0.0))).unwrap();
        assert_eq!(r.best_k, 0.5);
        assert!(sweep_optimal_k_with(&[], 10.0, |_| Ok((0.0, 0.0))).is_err());
        assert!(sweep_optimal_k_with(&[11.0], 10.0, |_| Ok((0.0, 0.0))).is_err());
    }

    #[test]
    fn sweep_skips_non_stationary_rows() {
        let r = sweep_optimal_k_with(&[0.1, 1.0], 10.0, |k| {
            if k < 0.5 {
                Err(Error::NonStationary { value: 0.0, z: 9.0 })
            } else {
                Ok((0.2, 0.01))
            }
        })
        .unwrap();
        assert_eq!(r.best_k, 1.0);
        assert!(!r.table[0].stationary);
        let e = sweep_optimal_k_with(&[0.1], 10.0, |_| Err(Error::NonStationary { value: 0.0, z: 9.0 }));
        assert!(matches!(e, Err(Error::NonStationary { .. })));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_k_grid(1.0);
        assert_eq!(g.len(), 16);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert!((g[15] - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn passage_at_initial_error_is_immediate() {
        let spec = EnsembleSpec {
            trajectories: 20,
            horizon: 0.5,
            engine: Engine::Reduced,
            ..EnsembleSpec::default()
        };
        let s = first_passage_times(
            ProtocolKind::DiffusionGradient,
            &ControlParams::default(),
            &NoiseParams::NONE,
            &[1.0, 0.5],
            &spec,
        )
        .unwrap();
        assert_eq!(s.mean_time[0], 0.0);
        assert!(s.mean_time[1] >= s.mean_time[0]);
    }

    #[test]
    fn frozen_dynamics_exhaust_horizon() {
        let p = ControlParams { kappa: 1e-300, ..ControlParams::default() };
        let spec = EnsembleSpec {
            trajectories: 10,
            horizon: 0.1,
            engine: Engine::Reduced,
            ..EnsembleSpec::default()
        };
        let r = first_passage_times(ProtocolKind::DiffusionGradient, &p, &NoiseParams::NONE, &[0.5], &spec);
        assert_eq!(r.unwrap_err(), Error::HorizonExhausted { missed: 10, total: 10 });
    }

    #[test]
    fn thresholds_must_descend() {
        let spec = EnsembleSpec {
            trajectories: 2,
            horizon: 0.1,
            engine: Engine::Reduced,
            ..EnsembleSpec::default()
        };
        let r = first_passage_times(
            ProtocolKind::DiffusionGradient,
            &ControlParams::default(),
            &NoiseParams::NONE,
            &[0.1, 0.5],
            &spec,
        );
        assert!(r.is_err());
    }

    #[test]
    fn steady_state_needs_burn_in() {
        let r = steady_state_error(
            ProtocolKind::DiffusionGradient,
            &ControlParams::default(),
            &NoiseParams::uniform(0.1),
            5.0,
            5.0,
            &EnsembleSpec::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    proptest! {
        #[test]
        fn average_is_permutation_invariant(
            vals in proptest::collection::vec(0.0f64..1.0, 2..40),
            seed in 0u64..1000,
        ) {
            let t = [0.0];
            let paths: Vec<TrajectoryPath> = vals.iter().enumerate().map(|(i, v)| path(&t, &[*v], i as u64)).collect();
            let mut shuffled = paths.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = ensemble_average_error(&paths).unwrap();
            let b = ensemble_average_error(&shuffled).unwrap();
            prop_assert_eq!(a.mean[0].to_bits(), b.mean[0].to_bits());
            prop_assert_eq!(a.stderr[0].to_bits(), b.stderr[0].to_bits());
        }

        #[test]
        fn rate_is_scale_invariant(c in 1e-3f64..1e3, r in 0.1f64..3.0) {
            let t: Vec<f64> = (0..=60).map(|i| i as f64 * 0.2).collect();
            let a = fit_asymptotic_rate(&series(&t, |x| (-r * x).exp()), 0.3).unwrap();
            let b = fit_asymptotic_rate(&series(&t, |x| c * (-r * x).exp()), 0.3).unwrap();
            prop_assert!((a.rate - b.rate).abs() < 1e-12);
        }
    }
}
