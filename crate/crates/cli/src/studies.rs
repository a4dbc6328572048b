//! Numerical studies shared by `verify` and the acceptance tests.

use std::f64::consts::PI;

use backaction::analysis::{ensemble_average_by, EnsembleSeries};
use backaction::fokker_planck::{DensityField, FpSolver, Grid1D};
use backaction::numeric::{fit_line, quantile};
use backaction::protocols::{
    select_measurement, BlochReducedModel, ControlParams, NoiseParams, NoiselessModel, NoisyModel,
    ProtocolKind,
};
use backaction::quantum::{bloch_to_density, BlochState, DensityMatrix, C64};
use backaction::sde::{
    coarsen_increments, ensemble_map, run_with_increments, wiener_increments, wrap_circle,
    NoiseStream, SdeModel, TrajectoryPath,
};
use backaction::sme::{
    run_controlled_sme, run_nlevel_control, sme_step_with, LindbladNoise, NLevelController,
    QubitController, SmeScheme, StepOptions,
};
use backaction::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Sample moments of Wiener increments with their z-scores.
#[derive(Debug, Clone, Copy)]
pub struct WienerMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_z: f64,
    pub variance_z: f64,
}

pub fn wiener_moments(seed: u64, dt: f64, count: usize) -> Result<WienerMoments> {
    let x = wiener_increments(&mut NoiseStream::new(seed, 0), dt, count)?;
    let n = count as f64;
    let mean = x.iter().sum::<f64>() / n;
    let variance = x.iter().map(|v| v * v).sum::<f64>() / n;
    Ok(WienerMoments {
        mean,
        variance,
        mean_z: mean / (dt / n).sqrt(),
        variance_z: (variance - dt) / (dt * (2.0 / n).sqrt()),
    })
}

/// Extremes of the SME invariants over an ensemble of steps.
#[derive(Debug, Clone, Copy)]
pub struct SmeInvariants {
    /// Largest `|tr ρ − 1|` of the raw Euler–Maruyama update.
    pub trace_drift: f64,
    /// Largest anti-Hermitian part after each step.
    pub hermiticity: f64,
    /// Smallest eigenvalue seen along positivity-preserving runs.
    pub min_eigenvalue: f64,
    /// Largest `tr ρ² − 1` along noisy runs.
    pub purity_excess: f64,
    /// Largest `1 − tr ρ²` along noiseless runs from a pure state.
    pub purity_loss: f64,
}

fn bloch_of(m: &DMatrix<C64>) -> BlochState {
    BlochState::new_unchecked(2.0 * m[(1, 0)].re, 2.0 * m[(1, 0)].im, (m[(0, 0)] - m[(1, 1)]).re)
}

/// Closed-loop diffusion-gradient runs through the generic SME step.
///
/// The Euler–Maruyama leg starts from a mixed state carrying a `10⁻⁸`
/// anti-Hermitian perturbation and runs `steps/10` steps of `dt/10`;
/// `rehermitize = false` is the fault hook.
pub fn sme_invariants(seed: u64, paths: usize, steps: usize, dt: f64, rehermitize: bool) -> Result<SmeInvariants> {
    let params = ControlParams::default();
    let noise = NoiseParams::uniform(0.1);
    let lind = LindbladNoise::Qubit(noise);
    let em = StepOptions {
        rehermitize,
        ..StepOptions::euler_maruyama()
    };
    let kraus = StepOptions::default();
    let per = ensemble_map(paths, |i| {
        let mut stream = NoiseStream::new(seed, i as u64);
        let mut out = SmeInvariants {
            trace_drift: 0.0,
            hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
            purity_excess: f64::NEG_INFINITY,
            purity_loss: 0.0,
        };
        let x0 = -PI + 2.0 * PI * (i as f64 + 0.5) / paths as f64;
        let mixed = bloch_to_density(&BlochState::from_signed_angle(x0, 0.9))?;
        let pure = bloch_to_density(&BlochState::from_signed_angle(x0, 1.0))?;
        // Euler-Maruyama is not positivity preserving near the sphere, so
        // its leg uses a strongly mixed start and a finer step.
        let mut m = bloch_to_density(&BlochState::from_signed_angle(x0, 0.5))?.into_matrix();
        m[(0, 1)] += C64::new(1e-8, 0.0);
        let mut rho_em = DensityMatrix::from_unchecked(m);
        let dt_em = 0.1 * dt;
        let mut dw = [0.0; 2];
        for _ in 0..steps.div_ceil(10) {
            stream.fill_increments(dt_em, &mut dw);
            let b = bloch_of(rho_em.matrix());
            let set = select_measurement(ProtocolKind::DiffusionGradient, &b, &params, &Default::default())?;
            let (next, d) = sme_step_with(&rho_em, &set, None, &lind, &dw, dt_em, &em)?;
            out.trace_drift = out.trace_drift.max(d.trace_drift);
            out.hermiticity = out.hermiticity.max(next.hermiticity_error());
            rho_em = next;
        }
        let mut rho_k = mixed;
        let mut rho_p = pure;
        for _ in 0..steps {
            stream.fill_increments(dt, &mut dw);
            let b = bloch_of(rho_k.matrix());
            let set = select_measurement(ProtocolKind::DiffusionGradient, &b, &params, &Default::default())?;
            let (next, _) = sme_step_with(&rho_k, &set, None, &lind, &dw, dt, &kraus)?;
            out.min_eigenvalue = out.min_eigenvalue.min(next.min_eigenvalue());
            out.purity_excess = out.purity_excess.max(next.purity() - 1.0);
            rho_k = next;

            let b = bloch_of(rho_p.matrix());
            let set = select_measurement(ProtocolKind::DiffusionGradient, &b, &params, &Default::default())?;
            let (next, _) = sme_step_with(&rho_p, &set, None, &LindbladNoise::none(), &dw, dt, &kraus)?;
            out.min_eigenvalue = out.min_eigenvalue.min(next.min_eigenvalue());
            out.purity_loss = out.purity_loss.max(1.0 - next.purity());
            rho_p = next;
        }
        Ok(out)
    })?;
    Ok(per.into_iter().fold(
        SmeInvariants {
            trace_drift: 0.0,
            hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
            purity_excess: f64::NEG_INFINITY,
            purity_loss: 0.0,
        },
        |a, b| SmeInvariants {
            trace_drift: a.trace_drift.max(b.trace_drift),
            hermiticity: a.hermiticity.max(b.hermiticity),
            min_eigenvalue: a.min_eigenvalue.min(b.min_eigenvalue),
            purity_excess: a.purity_excess.max(b.purity_excess),
            purity_loss: a.purity_loss.max(b.purity_loss),
        },
    ))
}

/// Largest `|a_y|` along noisy closed-loop runs that start in the x–z plane.
pub fn a_y_leakage(seed: u64, paths: usize, horizon: f64, dt: f64) -> Result<f64> {
    let noise = NoiseParams::uniform(0.1);
    let per = ensemble_map(paths * ProtocolKind::ALL.len(), |i| {
        let kind = ProtocolKind::ALL[i % ProtocolKind::ALL.len()];
        let c = QubitController::new(kind, ControlParams::default(), noise);
        let x0 = -PI + 2.0 * PI * (i as f64 + 0.5) / (paths * ProtocolKind::ALL.len()) as f64;
        let rho = bloch_to_density(&BlochState::from_signed_angle(x0, 0.8))?;
        let mut stream = NoiseStream::new(seed, i as u64);
        let mut worst = 0.0f64;
        let steps = (horizon / dt).round() as usize;
        let mut b = bloch_of(rho.matrix());
        let mut dw = vec![0.0; backaction::sde::Stepper::channels(&c)];
        for _ in 0..steps {
            stream.fill_increments(dt, &mut dw);
            b = c.step_bloch(&b, &dw, dt)?;
            worst = worst.max(b.y.abs());
        }
        Ok(worst)
    })?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// Largest pathwise difference between the noiseless angle equation and the
/// noisy reduced model with zero noise at `a = 1`, on shared increments.
pub fn reduced_equivalence(seed: u64, paths: usize, steps: usize, dt: f64) -> Result<f64> {
    let params = ControlParams::default();
    let a = NoiselessModel::new(&params);
    let b = NoisyModel::new(params, NoiseParams::NONE);
    let per = ensemble_map(paths, |i| {
        let mut stream = NoiseStream::new(seed, i as u64);
        let dw = wiener_increments(&mut stream, dt, steps)?;
        let both: Vec<f64> = dw.iter().flat_map(|w| [*w, 0.0]).collect();
        let x0 = -PI + 2.0 * PI * (i as f64 + 0.5) / paths as f64;
        let pa = run_with_increments(&a, &[x0], dt, &dw, 1)?;
        let pb = run_with_increments(&b, &[x0, 1.0], dt, &both, 1)?;
        let mut worst = 0.0f64;
        for j in 0..pa.len() {
            worst = worst.max((pa.state(j)[0] - pb.state(j)[0]).abs());
            worst = worst.max((pb.state(j)[1] - 1.0).abs());
        }
        Ok(worst)
    })?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// Purification under a frozen perpendicular strength.
#[derive(Debug, Clone)]
pub struct Purification {
    pub times: Vec<f64>,
    pub mean_mixedness: Vec<f64>,
    pub predicted: Vec<f64>,
    pub max_relative_error: f64,
}

/// Ensemble-mean `Δ = 1 − a` of the full SME with strength frozen at `k`
/// (no parallel measurement) against `Δ₀ e^{−8kt}` over `[0, 0.2/k]`.
pub fn purification_study(k: f64, mixedness0: f64, dt_k: f64, paths: usize, seed: u64) -> Result<Purification> {
    let params = ControlParams { mu: 0.0, ..ControlParams::default() };
    let c = QubitController::new(ProtocolKind::DiffusionGradient, params, NoiseParams::NONE).with_frozen_strength(k);
    let dt = dt_k / k;
    let horizon = 0.2 / k;
    let every = ((horizon / dt).round() as usize / 100).max(1);
    let rho = bloch_to_density(&BlochState::from_signed_angle(PI / 2.0, 1.0 - mixedness0))?;
    let runs: Vec<TrajectoryPath> = ensemble_map(paths, |i| {
        run_controlled_sme(&c, &rho, horizon, dt, &mut NoiseStream::new(seed, i as u64), every)
    })?;
    let s: EnsembleSeries = ensemble_average_by(&runs, |x| 1.0 - x[2])?;
    let predicted: Vec<f64> = s.times.iter().map(|t| mixedness0 * (-8.0 * k * t).exp()).collect();
    let max_relative_error = s
        .mean
        .iter()
        .zip(&predicted)
        .map(|(m, p)| ((m - p) / p).abs())
        .fold(0.0, f64::max);
    Ok(Purification {
        times: s.times,
        mean_mixedness: s.mean,
        predicted,
        max_relative_error,
    })
}

/// Pathwise discrepancy between the reduced Bloch model and the full SME on
/// one Brownian path sampled at several step sizes.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub dts: Vec<f64>,
    /// Median over paths of the per-path maximum `|δ_reduced − δ_SME|`.
    pub errors: Vec<f64>,
    /// Mean of the same quantity. Paths that pass close to the maximally
    /// mixed state, where δ is ill-conditioned, dominate it.
    pub mean_errors: Vec<f64>,
    /// Slope of `ln errors` against `ln dt`.
    pub slope: f64,
}

fn delta_of(s: &[f64]) -> f64 {
    s[0].hypot(s[1]).atan2(s[2])
}

/// `dts` in decreasing order; each must be an integer multiple of the last.
#[allow(clippy::too_many_arguments)]
pub fn refinement_study(
    params: &ControlParams,
    noise: &NoiseParams,
    delta0: f64,
    a0: f64,
    horizon: f64,
    dts: &[f64],
    paths: usize,
    seed: u64,
) -> Result<Refinement> {
    if dts.len() < 2 || dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("need at least two decreasing step sizes".into()));
    }
    let fine = *dts.last().unwrap();
    let factors: Vec<usize> = dts.iter().map(|d| (d / fine).round() as usize).collect();
    for (d, f) in dts.iter().zip(&factors) {
        if ((*f as f64) * fine - d).abs() > 1e-9 * d {
            return Err(Error::InvalidParameter(format!("{d} is not a multiple of {fine}")));
        }
    }
    let coarse_steps = (horizon / dts[0]).round() as usize;
    let fine_steps = coarse_steps * factors[0];
    let mut reduced = BlochReducedModel::new(*params, *noise);
    reduced.clamp_tolerance = f64::INFINITY;
    let full = QubitController::new(ProtocolKind::DiffusionGradient, *params, *noise);
    let init = BlochState::from_signed_angle(delta0, a0).vector();
    let per: Vec<Vec<f64>> = ensemble_map(paths, |i| {
        let mut stream = NoiseStream::new(seed, i as u64);
        let w = wiener_increments(&mut stream, fine, fine_steps * 2)?;
        factors
            .iter()
            .map(|&f| {
                let inc = coarsen_increments(&w, 2, f);
                let every = factors[0] / f;
                let dt = fine * f as f64;
                let a = run_with_increments(&reduced, init.as_slice(), dt, &inc, every)?;
                let b = run_with_increments(&full, init.as_slice(), dt, &inc, every)?;
                Ok((0..a.len())
                    .map(|j| (delta_of(a.state(j)) - delta_of(b.state(j))).abs())
                    .fold(0.0, f64::max))
            })
            .collect()
    })?;
    let column = |j: usize| per.iter().map(|p| p[j]).collect::<Vec<f64>>();
    let errors: Vec<f64> = (0..dts.len()).map(|j| quantile(&column(j), 0.5).unwrap_or(f64::NAN)).collect();
    let mean_errors: Vec<f64> = (0..dts.len())
        .map(|j| column(j).iter().sum::<f64>() / paths as f64)
        .collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = fit_line(&lx, &ly).map_or(f64::NAN, |f| f.slope);
    Ok(Refinement {
        dts: dts.to_vec(),
        errors,
        mean_errors,
        slope,
    })
}

/// Total-variation distance between the Fokker–Planck density and a Monte
/// Carlo histogram of the noiseless angle equation, at each checkpoint.
pub fn fp_mc_tv(kappa: f64, checkpoints: &[f64], samples: usize, bins: usize, seed: u64) -> Result<Vec<f64>> {
    let (center, width) = (2.0, 0.25);
    let cells = bins * 8;
    let grid = Grid1D::circle(cells)?;
    let params = ControlParams::with_kappa(kappa);
    let model = NoiselessModel::new(&params);
    let v = vec![0.0; cells];
    let d = grid.sample(|x| 8.0 * kappa * x * x);
    let bound = backaction::fokker_planck::stability_bound(&grid, &v, &d);
    let mut field = DensityField::gaussian(grid, center, width)?;
    let mut fp_hist = Vec::new();
    let mut t_fp = 0.0;
    let mut solver: Option<FpSolver> = None;
    for &t in checkpoints {
        let steps = ((t - t_fp) / (0.5 * bound)).ceil().max(1.0) as usize;
        let dt = (t - t_fp) / steps as f64;
        let s = match solver.as_mut() {
            Some(s) if (s.dt() - dt).abs() < 1e-15 => s,
            _ => solver.insert(FpSolver::new(grid, v.clone(), d.clone(), dt)?),
        };
        s.advance(&mut field, steps)?;
        t_fp = t;
        let h = grid.h();
        let hist: Vec<f64> = field
            .values()
            .chunks(cells / bins)
            .map(|c| c.iter().sum::<f64>() * h)
            .collect();
        fp_hist.push(hist);
    }
    let mc_dt = 2e-4 / kappa;
    let ends: Vec<usize> = checkpoints.iter().map(|t| (t / mc_dt).round() as usize).collect();
    let finals: Vec<Vec<f64>> = ensemble_map(samples, |i| {
        let mut stream = NoiseStream::new(seed, i as u64);
        let mut x = wrap_circle(center + width * stream.standard_normal());
        let mut out = Vec::with_capacity(ends.len());
        let mut step = 0;
        let mut drift = [0.0];
        let mut diff = [0.0];
        for &e in &ends {
            while step < e {
                let dw = (mc_dt).sqrt() * stream.standard_normal();
                model.drift(&[x], &mut drift);
                model.diffusion(&[x], &mut diff);
                x = wrap_circle(x + drift[0] * mc_dt + diff[0] * dw);
                step += 1;
            }
            out.push(x);
        }
        Ok(out)
    })?;
    Ok((0..checkpoints.len())
        .map(|c| {
            let mut hist = vec![0.0; bins];
            for f in &finals {
                let b = (((f[c] + PI) / (2.0 * PI)) * bins as f64).floor() as usize;
                hist[b.min(bins - 1)] += 1.0 / samples as f64;
            }
            0.5 * hist.iter().zip(&fp_hist[c]).map(|(a, b)| (a - b).abs()).sum::<f64>()
        })
        .collect())
}

/// Pointwise quartiles of `P_e` over an ensemble.
#[derive(Debug, Clone)]
pub struct QuantileSeries {
    pub times: Vec<f64>,
    pub q25: Vec<f64>,
    pub median: Vec<f64>,
    pub q75: Vec<f64>,
}

pub fn quantiles(paths: &[TrajectoryPath]) -> Result<QuantileSeries> {
    let first = paths.first().ok_or(Error::EmptyEnsemble)?;
    let mut out = QuantileSeries {
        times: first.times.clone(),
        q25: Vec::new(),
        median: Vec::new(),
        q75: Vec::new(),
    };
    for i in 0..first.len() {
        let col: Vec<f64> = paths.iter().map(|p| p.state(i)[0]).collect();
        out.q25.push(quantile(&col, 0.25).unwrap());
        out.median.push(quantile(&col, 0.5).unwrap());
        out.q75.push(quantile(&col, 0.75).unwrap());
    }
    Ok(out)
}

fn basis(n: usize, i: usize) -> DVector<C64> {
    DVector::from_fn(n, |j, _| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
}

/// N-level noiseless diffusion-gradient runs from `|N−1⟩` toward `|0⟩`,
/// recording `P_e`.
pub fn nlevel_paths(
    levels: usize,
    params: &ControlParams,
    paths: usize,
    dt: f64,
    horizon: f64,
    record_every: usize,
    seed: u64,
) -> Result<Vec<TrajectoryPath>> {
    let c = NLevelController::new(basis(levels, 0), *params)?;
    let rho = DensityMatrix::pure(&basis(levels, levels - 1))?;
    ensemble_map(paths, |i| {
        run_nlevel_control(&c, &rho, horizon, dt, &mut NoiseStream::new(seed, i as u64), record_every)
    })
}

/// Qubit SME runs from `δ = π` recording `P_e` only.
pub fn qubit_paths(
    params: &ControlParams,
    paths: usize,
    dt: f64,
    horizon: f64,
    record_every: usize,
    seed: u64,
) -> Result<Vec<TrajectoryPath>> {
    let c = QubitController::new(ProtocolKind::DiffusionGradient, *params, NoiseParams::NONE)
        .with_scheme(SmeScheme::Kraus);
    let rho = bloch_to_density(&BlochState::from_signed_angle(PI, 1.0))?;
    ensemble_map(paths, |i| {
        let p = run_controlled_sme(&c, &rho, horizon, dt, &mut NoiseStream::new(seed, i as u64), record_every)?;
        Ok(TrajectoryPath {
            states: p.component(0),
            dim: 1,
            ..p
        })
    })
}

/// Largest two-sample median discrepancy, in standard errors: at each
/// record, the fraction of `a` below the median of `b` against one half.
/// Records where the median of `b` is below `floor` are skipped: the
/// density-matrix integrator cannot resolve error probabilities much below
/// 1e-15.
pub fn median_agreement(a: &[TrajectoryPath], b: &[TrajectoryPath], floor: f64) -> Result<f64> {
    let qa = a.first().ok_or(Error::EmptyEnsemble)?;
    let qb = b.first().ok_or(Error::EmptyEnsemble)?;
    if qa.times != qb.times {
        return Err(Error::InvalidParameter("ensembles are not time-aligned".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se = (0.25 / na + 0.25 / nb).sqrt();
    let mut worst = 0.0f64;
    for i in 1..qa.len() {
        let cb: Vec<f64> = b.iter().map(|p| p.state(i)[0]).collect();
        let mb = quantile(&cb, 0.5).unwrap();
        if mb < floor {
            continue;
        }
        let below = a.iter().filter(|p| p.state(i)[0] <= mb).count() as f64 / na;
        worst = worst.max((below - 0.5).abs() / se);
    }
    Ok(worst)
}
