use backaction::analysis::{error_series, fit_rate_in_window, Engine, EnsembleSeries, EnsembleSpec};
use backaction::fokker_planck::LogChart;
use backaction::protocols::{ControlParams, NoiseParams, ProtocolKind};

fn fp_rate(cells: usize, times: &[f64]) -> f64 {
    let chart = LogChart::new(1.0).with_cells(cells);
    let mean = chart.error_series(std::f64::consts::PI, times).unwrap();
    let s = EnsembleSeries {
        times: times.to_vec(),
        mean,
        stderr: vec![0.0; times.len()],
        count: 0,
        seed: 0,
        streams: (0, 0),
    };
    fit_rate_in_window(&s, 4.0, 8.0).unwrap().rate
}

#[test]
fn log_chart_rate_converges_with_cells() {
    let times: Vec<f64> = (0..=90).map(|i| i as f64 * 0.1).collect();
    let r: Vec<f64> = [128, 256, 512].iter().map(|&c| fp_rate(c, &times)).collect();
    let d1 = (r[1] - r[0]).abs();
    let d2 = (r[2] - r[1]).abs();
    assert!(d2 < d1, "rates {r:?}");
    assert!(d2 / r[2] < 0.01, "rates {r:?}");
}

#[test]
fn monte_carlo_rate_matches_fokker_planck() {
    let spec = EnsembleSpec {
        trajectories: 4000,
        horizon: 9.0,
        engine: Engine::Reduced,
        importance: true,
        ..EnsembleSpec::default()
    };
    let series = error_series(
        ProtocolKind::DiffusionGradient,
        &ControlParams::default(),
        &NoiseParams::NONE,
        &spec,
    )
    .unwrap();
    let mc = fit_rate_in_window(&series, 4.0, 8.0).unwrap().rate;
    let fp = fp_rate(512, &series.times);
    assert!((mc - fp).abs() < 0.06 * fp, "mc {mc}, fp {fp}");
}

#[test]
fn fokker_planck_mean_tracks_monte_carlo_early() {
    let spec = EnsembleSpec {
        trajectories: 4000,
        horizon: 2.0,
        engine: Engine::Reduced,
        ..EnsembleSpec::default()
    };
    let series = error_series(
        ProtocolKind::DiffusionGradient,
        &ControlParams::default(),
        &NoiseParams::NONE,
        &spec,
    )
    .unwrap();
    let fp = LogChart::new(1.0)
        .with_cells(512)
        .error_series(std::f64::consts::PI, &series.times)
        .unwrap();
    for (i, f) in fp.iter().enumerate().skip(1) {
        let z = (series.mean[i] - f) / series.stderr[i];
        assert!(z.abs() < 4.5, "t = {}: mc {} fp {f} (z {z})", series.times[i], series.mean[i]);
    }
}
