//! WebAssembly bindings for the demo page in `www/`.

use std::f64::consts::{FRAC_PI_2, PI};

use backaction::analysis::{error_series, steady_state_error, Engine, EnsembleSpec};
use backaction::fokker_planck::{fp_evolve, stability_bound, DensityField, Grid1D, LogChart};
use backaction::protocols::{ControlParams, NoiseParams, ProtocolKind};
use backaction::{Error, Result};
use wasm_bindgen::prelude::*;

const MAX_TRAJECTORIES: usize = 20_000;

fn check_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_TRAJECTORIES {
        return Err(Error::InvalidParameter(format!(
            "trajectories must be in 1..={MAX_TRAJECTORIES}, got {n}"
        )));
    }
    Ok(())
}

/// Mean error of noiseless control started at the antipode, as
/// `[t.., Monte Carlo.., Fokker-Planck..]` with κ = 1.
pub fn decay(trajectories: usize, horizon: f64, seed: u64) -> Result<Vec<f64>> {
    check_count(trajectories)?;
    let spec = EnsembleSpec {
        trajectories,
        horizon,
        seed,
        engine: Engine::Reduced,
        importance: true,
        ..EnsembleSpec::default()
    };
    let s = error_series(
        ProtocolKind::DiffusionGradient,
        &ControlParams::default(),
        &NoiseParams::NONE,
        &spec,
    )?;
    let fp = LogChart::new(1.0).with_cells(512).error_series(PI, &s.times)?;
    Ok([s.times, s.mean, fp].concat())
}

/// Density of the signed angle at time `t` for a packet started at `x0`,
/// as `[x.., p..]`.
pub fn density(t: f64, x0: f64, cells: usize) -> Result<Vec<f64>> {
    let grid = Grid1D::circle(cells)?;
    let v = vec![0.0; cells];
    let d = grid.sample(|x| 8.0 * x * x);
    let dt = 0.5 * stability_bound(&grid, &v, &d);
    let p0 = DensityField::gaussian(grid, x0, 0.15)?;
    let p = fp_evolve(&p0, &v, &d, t, dt)?;
    Ok([grid.nodes(), p.values().to_vec()].concat())
}

/// Steady-state error with every noise rate equal to `gamma`, as
/// `[diffusion gradient, stderr, parallel Hamiltonian, stderr]`.
pub fn steady(gamma: f64, trajectories: usize, seed: u64) -> Result<Vec<f64>> {
    check_count(trajectories)?;
    let params = ControlParams::default();
    let noise = NoiseParams::uniform(gamma);
    let spec = EnsembleSpec {
        trajectories,
        seed,
        delta0: FRAC_PI_2,
        record_every: 10,
        ..EnsembleSpec::default()
    };
    let mut out = Vec::with_capacity(4);
    for kind in [ProtocolKind::DiffusionGradient, ProtocolKind::HamiltonianParallel] {
        let s = steady_state_error(kind, &params, &noise, 10.0, 5.0, &spec)?;
        out.push(s.value);
        out.push(s.stderr);
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn decay_curve(trajectories: u32, horizon: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    decay(trajectories as usize, horizon, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn angle_density(t: f64, x0: f64, cells: u32) -> std::result::Result<Vec<f64>, JsError> {
    density(t, x0, cells as usize).map_err(js)
}

#[wasm_bindgen]
pub fn steady_state(gamma: f64, trajectories: u32, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    steady(gamma, trajectories as usize, seed as u64).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_has_three_aligned_columns() {
        let v = decay(50, 2.0, 1).unwrap();
        assert_eq!(v.len() % 3, 0);
        let n = v.len() / 3;
        assert_eq!(v[0], 0.0);
        assert!((v[n] - 1.0).abs() < 1e-12);
        assert!(v[2 * n] > 0.85);
        assert!(v[3 * n - 1] < 0.5);
    }

    #[test]
    fn density_keeps_unit_mass() {
        let v = density(0.1, 2.0, 200).unwrap();
        let h = 2.0 * PI / 200.0;
        let mass: f64 = v[200..].iter().sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn steady_state_is_small_for_weak_noise() {
        let v = steady(0.01, 20, 3).unwrap();
        assert!(v[0] < 0.1 && v[2] < 0.1, "{v:?}");
    }

    #[test]
    fn rejects_empty_ensembles() {
        assert!(decay(0, 1.0, 1).is_err());
        assert!(steady(0.1, 0, 1).is_err());
    }
}
