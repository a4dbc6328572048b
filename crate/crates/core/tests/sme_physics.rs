use std::f64::consts::{FRAC_PI_2, PI};

use backaction::analysis::ensemble_average_by;
use backaction::protocols::{ControlParams, NoiseParams, ProtocolKind};
use backaction::quantum::{bloch_to_density, BlochState, DensityMatrix, C64};
use backaction::sde::{ensemble_map, NoiseStream, Stepper};
use backaction::sme::{random_pure_state, run_controlled_sme, run_nlevel_control, NLevelController, QubitController};
use nalgebra::DVector;

fn ket(n: usize, i: usize) -> DVector<C64> {
    DVector::from_fn(n, |j, _| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
}

#[test]
fn frozen_strength_purifies_at_eight_k() {
    let k = 3.0;
    let d0 = 0.05;
    let p = ControlParams { mu: 0.0, ..ControlParams::default() };
    let c = QubitController::new(ProtocolKind::DiffusionGradient, p, NoiseParams::NONE).with_frozen_strength(k);
    let rho = bloch_to_density(&BlochState::from_signed_angle(FRAC_PI_2, 1.0 - d0)).unwrap();
    let dt = 1e-4 / k;
    let runs = ensemble_map(16, |i| run_controlled_sme(&c, &rho, 0.2 / k, dt, &mut NoiseStream::new(9, i as u64), 40)).unwrap();
    let s = ensemble_average_by(&runs, |x| 1.0 - x[2]).unwrap();
    for (t, m) in s.times.iter().zip(&s.mean) {
        let want = d0 * (-8.0 * k * t).exp();
        assert!(((m - want) / want).abs() < 0.02, "t = {t}: {m} vs {want}");
    }
}

#[test]
fn noisy_feedback_stays_in_the_xz_plane() {
    for kind in ProtocolKind::ALL {
        let c = QubitController::new(kind, ControlParams::default(), NoiseParams::uniform(0.2));
        let mut b = BlochState::new_unchecked(0.5, 0.0, -0.6);
        let mut dw = vec![0.0; c.channels()];
        let mut s = NoiseStream::new(2, 0);
        for _ in 0..3000 {
            s.fill_increments(1e-3, &mut dw);
            b = c.step_bloch(&b, &dw, 1e-3).unwrap();
            assert_eq!(b.y, 0.0, "{kind:?}");
        }
    }
}

#[test]
fn nlevel_runs_stay_physical_and_improve() {
    let p = ControlParams::default();
    for n in [3, 4] {
        let c = NLevelController::new(ket(n, 0), p).unwrap();
        let paths = ensemble_map(12, |i| {
            let mut s = NoiseStream::new(4, i as u64);
            let psi = random_pure_state(n, &mut s);
            let rho = DensityMatrix::pure(&psi)?;
            run_nlevel_control(&c, &rho, 3.0, 1e-3, &mut s, 500)
        })
        .unwrap();
        let mut improved = 0;
        for path in &paths {
            assert!(path.states.iter().all(|v| (0.0..=1.0).contains(v)));
            if path.states.last() < path.states.first() {
                improved += 1;
            }
        }
        assert!(improved >= 10, "N = {n}: {improved} of 12 improved");
    }
}

#[test]
fn antipode_start_leaves_the_antipode() {
    let c = QubitController::new(ProtocolKind::DiffusionGradient, ControlParams::default(), NoiseParams::NONE);
    let rho = bloch_to_density(&BlochState::from_signed_angle(PI, 1.0)).unwrap();
    let path = run_controlled_sme(&c, &rho, 0.5, 1e-3, &mut NoiseStream::new(1, 0), 100).unwrap();
    assert!(path.state(path.len() - 1)[0] < 0.999);
}
