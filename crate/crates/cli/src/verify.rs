//! Invariant suite behind `backaction verify`.

use std::fmt::Write as _;

use backaction::fokker_planck::{DensityField, FpSolver, Grid1D};
use backaction::protocols::{ControlParams, NoiseParams};

use crate::output::{fmt_f64, Cell, OutputSet};
use crate::studies;
use crate::{CliError, CliResult, RunConfig};

/// Check names, in run order.
pub const CHECKS: &[&str] = &[
    "wiener-moments",
    "trace",
    "hermiticity",
    "positivity",
    "purity",
    "fp-mass",
    "fp-mc-tv",
    "shared-noise-refinement",
    "purification",
    "reduced-equivalence",
    "a-y-leakage",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Skip re-Hermitisation in the Hermiticity check.
    pub inject_fault: bool,
}

fn row(name: &'static str, passed: bool, value: f64, bound: &str, detail: String) -> CheckRow {
    CheckRow {
        name,
        passed,
        value,
        bound: bound.to_string(),
        detail,
    }
}

fn fp_mass() -> backaction::Result<f64> {
    let grid = Grid1D::circle(256)?;
    let v = grid.sample(|x| 0.3 * x.sin());
    let d = grid.sample(|x| 0.2 + 8.0 * x * x);
    let dt = 0.5 * backaction::fokker_planck::stability_bound(&grid, &v, &d);
    let mut s = FpSolver::new(grid, v, d, dt)?;
    let mut p = DensityField::gaussian(grid, 1.0, 0.3)?;
    s.advance(&mut p, 100_000)?;
    Ok((p.mass() - 1.0).abs())
}

/// Run one named check.
pub fn run_check(name: &str, cfg: &RunConfig, opts: VerifyOptions) -> CliResult<CheckRow> {
    let seed = cfg.seed;
    let r = match name {
        "wiener-moments" => {
            let m = studies::wiener_moments(seed, 1e-3, 200_000)?;
            let z = m.mean_z.abs().max(m.variance_z.abs());
            row(
                "wiener-moments",
                z < 4.0,
                z,
                "< 4 standard errors",
                format!("mean {:.3e}, variance {:.6e} (dt 1e-3)", m.mean, m.variance),
            )
        }
        "trace" | "hermiticity" | "positivity" | "purity" => {
            let inv = studies::sme_invariants(seed, 16, 2000, 1e-3, !opts.inject_fault)?;
            match name {
                "trace" => row(
                    "trace",
                    inv.trace_drift < 1e-12,
                    inv.trace_drift,
                    "< 1e-12",
                    "raw Euler-Maruyama |tr ρ - 1| per step".into(),
                ),
                "hermiticity" => row(
                    "hermiticity",
                    inv.hermiticity < 1e-12,
                    inv.hermiticity,
                    "< 1e-12",
                    if opts.inject_fault {
                        "re-Hermitisation disabled (fault injected)".into()
                    } else {
                        "max |ρ - ρ†| after each step from a perturbed state".into()
                    },
                ),
                "positivity" => row(
                    "positivity",
                    inv.min_eigenvalue > -1e-12,
                    inv.min_eigenvalue,
                    "> -1e-12",
                    "smallest eigenvalue along Kraus-scheme runs".into(),
                ),
                _ => {
                    let worst = inv.purity_excess.max(inv.purity_loss);
                    row(
                        "purity",
                        worst < 1e-9,
                        worst,
                        "< 1e-9",
                        format!(
                            "tr ρ² - 1 <= {:.2e} (noisy), 1 - tr ρ² <= {:.2e} (noiseless, pure)",
                            inv.purity_excess, inv.purity_loss
                        ),
                    )
                }
            }
        }
        "fp-mass" => {
            let e = fp_mass()?;
            row("fp-mass", e < 1e-10, e, "< 1e-10", "|mass - 1| after 1e5 steps on the circle".into())
        }
        "fp-mc-tv" => {
            let tv = studies::fp_mc_tv(1.0, &[0.05, 0.1, 0.2], 50_000, 32, seed)?;
            let worst = tv.iter().cloned().fold(0.0, f64::max);
            row(
                "fp-mc-tv",
                worst < 0.02,
                worst,
                "< 0.02",
                format!("TV at t = 0.05, 0.1, 0.2: {:.4}, {:.4}, {:.4}", tv[0], tv[1], tv[2]),
            )
        }
        "shared-noise-refinement" => {
            let r = studies::refinement_study(
                &ControlParams::default(),
                &NoiseParams::uniform(0.01),
                std::f64::consts::FRAC_PI_2,
                0.95,
                0.5,
                &[1e-3, 1e-4, 1e-5],
                64,
                seed,
            )?;
            row(
                "shared-noise-refinement",
                (0.4..=1.1).contains(&r.slope),
                r.slope,
                "slope in [0.4, 1.1]",
                format!(
                    "median max |Δδ| = {:.3e}, {:.3e}, {:.3e} at dt = 1e-3, 1e-4, 1e-5 (mean {:.3e}, {:.3e}, {:.3e})",
                    r.errors[0], r.errors[1], r.errors[2], r.mean_errors[0], r.mean_errors[1], r.mean_errors[2]
                ),
            )
        }
        "purification" => {
            let p = studies::purification_study(1.0, 1e-2, 1e-5, 16, seed)?;
            row(
                "purification",
                p.max_relative_error < 0.01,
                p.max_relative_error,
                "< 0.01",
                "mean Δ against Δ₀ exp(-8kt) over [0, 0.2/k]".into(),
            )
        }
        "reduced-equivalence" => {
            let e = studies::reduced_equivalence(seed, 16, 5000, 1e-3)?;
            row(
                "reduced-equivalence",
                e < 1e-12,
                e,
                "< 1e-12",
                "noiseless angle equation vs noisy model at zero noise, a = 1".into(),
            )
        }
        "a-y-leakage" => {
            let e = studies::a_y_leakage(seed, 4, 2.0, 1e-3)?;
            row("a-y-leakage", e < 1e-12, e, "< 1e-12", "max |a_y| from x-z plane starts".into())
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown check '{other}' (known: {})",
                CHECKS.join(", ")
            )))
        }
    };
    Ok(r)
}

pub fn run_checks(names: &[&str], cfg: &RunConfig, opts: VerifyOptions) -> CliResult<Vec<CheckRow>> {
    names.iter().map(|n| run_check(n, cfg, opts)).collect()
}

pub fn render_table(rows: &[CheckRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<26} {:<6} {:>24}  {:<22} detail", "check", "status", "value", "bound");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<26} {:<6} {:>24}  {:<22} {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            fmt_f64(r.value),
            r.bound,
            r.detail
        );
    }
    s
}

/// `verify` command: writes `verify.csv` and `verify.txt`, exit 1 on failure.
pub fn cmd_verify(cfg: &RunConfig, only: Option<&str>, opts: VerifyOptions) -> CliResult<Vec<CheckRow>> {
    let names: Vec<&str> = match only {
        Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect(),
        None => CHECKS.to_vec(),
    };
    for n in &names {
        if !CHECKS.contains(n) {
            return Err(CliError::Config(format!(
                "unknown check '{n}' (known: {})",
                CHECKS.join(", ")
            )));
        }
    }
    let mut out = OutputSet::new(&cfg.out)?;
    let rows = run_checks(&names, cfg, opts)?;
    let table = render_table(&rows);
    print!("{table}");
    out.write_text("verify.txt", &table)?;
    let csv_rows: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::S(r.name.to_string()),
                Cell::B(r.passed),
                Cell::F(r.value),
                Cell::S(r.bound.clone()),
            ]
        })
        .collect();
    out.write_csv("verify.csv", &["check", "passed", "value", "bound"], &csv_rows)?;
    out.commit();
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed {
            failed,
            total: rows.len(),
        });
    }
    Ok(rows)
}
