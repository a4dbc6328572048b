//! `fig2`, `fig3` and `nlevel` commands.

use std::fmt::Write as _;

use backaction::analysis::{
    error_series, first_passage_times, fit_asymptotic_rate, fit_rate_in_window, log_grid,
    passage_rate, steady_state_error, sweep_optimal_k, EnsembleSeries, EnsembleSpec, RateFit,
    SweepResult,
};
use backaction::fokker_planck::LogChart;
use backaction::protocols::ProtocolKind;
use backaction::sde::BoundaryMode;
use backaction::sme::SmeScheme;

use crate::config::boundary_name;
use crate::output::{fmt_f64, Cell, OutputSet};
use crate::studies::{nlevel_paths, quantiles};
use crate::svg::{render, Panel, Series};
use crate::{CliError, CliResult, RunConfig};

/// CSV schemas, shown in `--help`.
pub const SCHEMAS: &str = "\
fig2a.csv: t, mean_Pe, stderr          (t in 1/κ; stderr NaN for a single trajectory)
fig2b.csv: target_Pe, mean_time, stderr, censored_count
fig3a.csv: gamma_over_kappa, mean_Pe_ss, stderr
fig3b.csv: gamma_over_kappa, dg_Pe_ss, dg_stderr, hperp_Pe_ss, hperp_stderr, hperp_best_k_over_kappa, hpar_Pe_ss, hpar_stderr
sweep_tables/gamma_<i>.csv: k_over_kappa, mean_Pe_ss, stderr, stationary
nlevel.csv: t, median_Pe, q25_Pe, q75_Pe
verify.csv: check, passed, value, bound";

fn fit_line_text(s: &mut String, key: &str, fit: &Result<RateFit, backaction::Error>, kappa: f64) {
    match fit {
        Ok(f) => {
            let _ = writeln!(s, "{key} = {}", fmt_f64(f.rate / kappa));
            let _ = writeln!(
                s,
                "{key}_window = [{}, {}]",
                fmt_f64(f.window.0 * kappa),
                fmt_f64(f.window.1 * kappa)
            );
            let _ = writeln!(s, "{key}_points = {}", f.points);
            let _ = writeln!(s, "{key}_residual = {}", fmt_f64(f.residual));
            let _ = writeln!(s, "{key}_r_squared = {}", fmt_f64(f.r_squared));
        }
        Err(e) => {
            let _ = writeln!(s, "{key} = NaN");
            let _ = writeln!(s, "{key}_error = {e}");
        }
    }
}

fn ensemble_spec(cfg: &RunConfig) -> CliResult<EnsembleSpec> {
    Ok(EnsembleSpec {
        trajectories: cfg.ensemble,
        dt: cfg.time(cfg.dt),
        horizon: cfg.time(cfg.horizon),
        seed: cfg.seed,
        record_every: cfg.record_every,
        delta0: cfg.delta0,
        a0: 1.0,
        boundary: cfg.boundary,
        engine: cfg.engine()?,
        scheme: SmeScheme::Kraus,
        importance: cfg.importance,
    })
}

/// Results of `fig2`, in units of κ.
#[derive(Debug, Clone)]
pub struct Fig2 {
    pub series: EnsembleSeries,
    pub rate_a: Result<RateFit, backaction::Error>,
    pub rate_a_tail: Result<RateFit, backaction::Error>,
    pub rate_a_fp: Result<RateFit, backaction::Error>,
    pub fp_asymptote: f64,
    pub thresholds: Vec<f64>,
    pub passage: backaction::analysis::PassageSummary,
    pub rate_b: Result<RateFit, backaction::Error>,
}

/// Compute the `fig2` data without writing files.
pub fn compute_fig2(cfg: &RunConfig) -> CliResult<Fig2> {
    cfg.validate()?;
    if cfg.protocol != ProtocolKind::DiffusionGradient {
        return Err(CliError::Config("fig2 runs the diffusion-gradient protocol".into()));
    }
    let params = cfg.control();
    let noise = cfg.noise();
    if !noise.is_zero() {
        return Err(CliError::Config("fig2 is the noiseless experiment; set all noise rates to 0".into()));
    }
    let k = cfg.kappa;
    let spec = ensemble_spec(cfg)?;
    let series = error_series(ProtocolKind::DiffusionGradient, &params, &noise, &spec)?;
    let rate_a = fit_rate_in_window(&series, cfg.time(cfg.fit_start), cfg.time(cfg.fit_end));
    let rate_a_tail = fit_asymptotic_rate(&series, cfg.tail_fraction);

    let chart = LogChart::new(k).with_cells(cfg.fp_cells).with_depth(cfg.fp_depth);
    let fp = chart.error_series(cfg.delta0.abs(), &series.times)?;
    let fp_series = EnsembleSeries {
        times: series.times.clone(),
        mean: fp,
        stderr: vec![0.0; series.times.len()],
        count: 0,
        seed: cfg.seed,
        streams: (0, 0),
    };
    let rate_a_fp = fit_rate_in_window(&fp_series, cfg.time(cfg.fit_start), cfg.time(cfg.fit_end));
    let fp_asymptote = chart.asymptotic_rate()?;

    let thresholds = log_grid(1.0, cfg.passage_min, cfg.passage_points);
    let pspec = EnsembleSpec {
        horizon: cfg.time(cfg.passage_horizon),
        importance: false,
        ..spec
    };
    let passage = first_passage_times(ProtocolKind::DiffusionGradient, &params, &noise, &thresholds, &pspec)?;
    let rate_b = passage_rate(&passage, 0.5);
    Ok(Fig2 {
        series,
        rate_a,
        rate_a_tail,
        rate_a_fp,
        fp_asymptote,
        thresholds,
        passage,
        rate_b,
    })
}

pub fn cmd_fig2(cfg: &RunConfig) -> CliResult<Fig2> {
    cfg.validate()?;
    let mut out = OutputSet::new(&cfg.out)?;
    let f = compute_fig2(cfg)?;
    let k = cfg.kappa;
    let rows: Vec<Vec<Cell>> = (0..f.series.times.len())
        .map(|i| {
            vec![
                Cell::F(f.series.times[i] * k),
                Cell::F(f.series.mean[i]),
                Cell::F(f.series.stderr[i]),
            ]
        })
        .collect();
    out.write_csv("fig2a.csv", &["t", "mean_Pe", "stderr"], &rows)?;
    let rows: Vec<Vec<Cell>> = (0..f.thresholds.len())
        .map(|j| {
            vec![
                Cell::F(f.thresholds[j]),
                Cell::F(f.passage.mean_time[j] * k),
                Cell::F(f.passage.stderr[j] * k),
                Cell::U(f.passage.censored[j]),
            ]
        })
        .collect();
    out.write_csv("fig2b.csv", &["target_Pe", "mean_time", "stderr", "censored_count"], &rows)?;

    let mut rates = String::new();
    let _ = writeln!(rates, "# rates in units of kappa, times in units of 1/kappa");
    let _ = writeln!(
        rates,
        "ensemble = {}\nseed = {}\nboundary = {}\nimportance_sampling = {}",
        cfg.ensemble,
        cfg.seed,
        boundary_name(cfg.boundary),
        cfg.importance
    );
    fit_line_text(&mut rates, "rate_a", &f.rate_a, k);
    fit_line_text(&mut rates, "rate_a_tail", &f.rate_a_tail, k);
    fit_line_text(&mut rates, "rate_a_fp", &f.rate_a_fp, k);
    let _ = writeln!(rates, "fp_asymptotic_rate = {}", fmt_f64(f.fp_asymptote / k));
    fit_line_text(&mut rates, "rate_b", &f.rate_b, k);
    let _ = writeln!(
        rates,
        "passage_censored_total = {}\npassage_horizon = {}",
        f.passage.censored.iter().sum::<usize>(),
        fmt_f64(cfg.passage_horizon)
    );
    out.write_text("rates.txt", &rates)?;

    let mut panel_a = Panel {
        title: "mean error probability".into(),
        x_label: "κt".into(),
        y_label: "⟨P_e⟩".into(),
        log_y: true,
        series: vec![Series::new(
            "Monte Carlo",
            f.series.times.iter().zip(&f.series.mean).map(|(t, m)| (t * k, *m)).collect(),
        )],
    };
    if let Ok(fit) = &f.rate_a {
        let i = f.series.times.iter().position(|t| *t >= fit.window.0).unwrap_or(0);
        let (t0, m0) = (f.series.times[i], f.series.mean[i]);
        let line = f
            .series
            .times
            .iter()
            .map(|t| (t * k, m0 * (-fit.rate * (t - t0)).exp()))
            .collect();
        panel_a.series.push(Series::new("asymptotic slope", line).dashed());
    }
    let mut panel_b = Panel {
        title: "first passage".into(),
        x_label: "mean κt".into(),
        y_label: "target P_e".into(),
        log_y: true,
        series: vec![Series::new(
            "mean time",
            f.passage
                .mean_time
                .iter()
                .zip(&f.thresholds)
                .map(|(t, p)| (t * k, *p))
                .collect(),
        )],
    };
    if let Ok(fit) = &f.rate_b {
        let j = f.passage.mean_time.iter().position(|t| *t >= fit.window.0).unwrap_or(0);
        let (t0, p0) = (f.passage.mean_time[j], f.thresholds[j]);
        let line = f
            .passage
            .mean_time
            .iter()
            .filter(|t| t.is_finite())
            .map(|t| (t * k, p0 * (-fit.rate * (t - t0)).exp()))
            .collect();
        panel_b.series.push(Series::new("asymptotic slope", line).dashed());
    }
    out.write_text("fig2.svg", &render(&[panel_a, panel_b]))?;
    out.commit();
    Ok(f)
}

/// One noise point of `fig3`.
#[derive(Debug, Clone)]
pub struct Fig3Point {
    pub gamma_over_kappa: f64,
    pub dg: (f64, f64),
    pub hpar: (f64, f64),
    pub hperp: SweepResult,
}

pub fn gamma_grid(cfg: &RunConfig) -> Vec<f64> {
    log_grid(cfg.gamma_min, cfg.gamma_max, cfg.gamma_points)
}

/// Steady-state values for all three protocols across the noise grid.
pub fn compute_fig3(cfg: &RunConfig) -> CliResult<Vec<Fig3Point>> {
    cfg.validate()?;
    if cfg.boundary != BoundaryMode::SignedCircle {
        return Err(CliError::Config("fig3 runs the full SME and needs boundary = circle".into()));
    }
    let params = cfg.control();
    let spec = EnsembleSpec {
        trajectories: cfg.ss_ensemble,
        dt: cfg.time(cfg.dt),
        horizon: 0.0,
        seed: cfg.seed,
        record_every: 10,
        delta0: cfg.ss_delta0,
        a0: 1.0,
        boundary: BoundaryMode::SignedCircle,
        engine: backaction::analysis::Engine::Sme,
        scheme: SmeScheme::Kraus,
        importance: false,
    };
    let burn = cfg.time(cfg.burn_in);
    let window = cfg.time(cfg.sample_window);
    let k_grid: Vec<f64> = log_grid(cfg.k_min * cfg.kappa, params.k_max, cfg.k_points);
    gamma_grid(cfg)
        .into_iter()
        .map(|g| {
            let noise = cfg.uniform_noise(g);
            let dg = steady_state_error(ProtocolKind::DiffusionGradient, &params, &noise, burn, window, &spec)?;
            let hpar = steady_state_error(ProtocolKind::HamiltonianParallel, &params, &noise, burn, window, &spec)?;
            let hperp = sweep_optimal_k(&noise, &params, &k_grid, burn, window, &spec)?;
            Ok(Fig3Point {
                gamma_over_kappa: g,
                dg: (dg.value, dg.stderr),
                hpar: (hpar.value, hpar.stderr),
                hperp,
            })
        })
        .collect()
}

pub fn cmd_fig3(cfg: &RunConfig) -> CliResult<Vec<Fig3Point>> {
    cfg.validate()?;
    let mut out = OutputSet::new(&cfg.out)?;
    let pts = compute_fig3(cfg)?;
    let k = cfg.kappa;
    let a: Vec<Vec<Cell>> = pts
        .iter()
        .map(|p| vec![Cell::F(p.gamma_over_kappa), Cell::F(p.dg.0), Cell::F(p.dg.1)])
        .collect();
    out.write_csv("fig3a.csv", &["gamma_over_kappa", "mean_Pe_ss", "stderr"], &a)?;
    let b: Vec<Vec<Cell>> = pts
        .iter()
        .map(|p| {
            vec![
                Cell::F(p.gamma_over_kappa),
                Cell::F(p.dg.0),
                Cell::F(p.dg.1),
                Cell::F(p.hperp.best_error),
                Cell::F(p.hperp.best_stderr),
                Cell::F(p.hperp.best_k / k),
                Cell::F(p.hpar.0),
                Cell::F(p.hpar.1),
            ]
        })
        .collect();
    out.write_csv(
        "fig3b.csv",
        &[
            "gamma_over_kappa",
            "dg_Pe_ss",
            "dg_stderr",
            "hperp_Pe_ss",
            "hperp_stderr",
            "hperp_best_k_over_kappa",
            "hpar_Pe_ss",
            "hpar_stderr",
        ],
        &b,
    )?;
    out.subdir("sweep_tables")?;
    for (i, p) in pts.iter().enumerate() {
        let rows: Vec<Vec<Cell>> = p
            .hperp
            .table
            .iter()
            .map(|r| vec![Cell::F(r.k / k), Cell::F(r.value), Cell::F(r.stderr), Cell::B(r.stationary)])
            .collect();
        out.write_csv(
            &format!("sweep_tables/gamma_{i:02}.csv"),
            &["k_over_kappa", "mean_Pe_ss", "stderr", "stationary"],
            &rows,
        )?;
    }
    let curve = |f: &dyn Fn(&Fig3Point) -> f64| pts.iter().map(|p| (p.gamma_over_kappa, f(p))).collect::<Vec<_>>();
    let panel_a = Panel {
        title: "diffusion gradient".into(),
        x_label: "γ/κ".into(),
        y_label: "⟨P_e^ss⟩".into(),
        log_y: true,
        series: vec![Series::new("diffusion gradient", curve(&|p| p.dg.0))],
    };
    let panel_b = Panel {
        title: "protocol comparison".into(),
        x_label: "γ/κ".into(),
        y_label: "⟨P_e^ss⟩".into(),
        log_y: true,
        series: vec![
            Series::new("diffusion gradient", curve(&|p| p.dg.0)),
            Series::new("H perpendicular, best k", curve(&|p| p.hperp.best_error)),
            Series::new("H parallel", curve(&|p| p.hpar.0)),
        ],
    };
    out.write_text("fig3.svg", &render(&[panel_a, panel_b]))?;
    out.commit();
    Ok(pts)
}

pub fn cmd_nlevel(cfg: &RunConfig) -> CliResult<crate::studies::QuantileSeries> {
    cfg.validate()?;
    let mut out = OutputSet::new(&cfg.out)?;
    let params = cfg.control();
    let dt = cfg.time(cfg.dt);
    let paths = nlevel_paths(
        cfg.levels,
        &params,
        cfg.nlevel_ensemble,
        dt,
        cfg.time(cfg.nlevel_horizon),
        cfg.record_every,
        cfg.seed,
    )?;
    let q = quantiles(&paths)?;
    let k = cfg.kappa;
    let rows: Vec<Vec<Cell>> = (0..q.times.len())
        .map(|i| vec![Cell::F(q.times[i] * k), Cell::F(q.median[i]), Cell::F(q.q25[i]), Cell::F(q.q75[i])])
        .collect();
    out.write_csv("nlevel.csv", &["t", "median_Pe", "q25_Pe", "q75_Pe"], &rows)?;
    let pts = |v: &[f64]| q.times.iter().zip(v).map(|(t, y)| (t * k, *y)).collect::<Vec<_>>();
    let panel = Panel {
        title: format!("N = {} diffusion-gradient control", cfg.levels),
        x_label: "κt".into(),
        y_label: "P_e".into(),
        log_y: true,
        series: vec![
            Series::new("median", pts(&q.median)),
            Series::new("25%", pts(&q.q25)).dashed(),
            Series::new("75%", pts(&q.q75)).dashed(),
        ],
    };
    out.write_text("nlevel.svg", &render(&[panel]))?;
    out.commit();
    Ok(q)
}
