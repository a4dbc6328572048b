//! Fixed-step Itô integration with reproducible per-trajectory noise streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Largest state dimension supported by [`SdeModel`] steppers.
pub const MAX_DIM: usize = 8;
/// Largest number of noise channels supported by [`SdeModel`] steppers.
pub const MAX_CHANNELS: usize = 4;

/// Gaussian stream keyed by `(seed, stream_index)`.
///
/// Streams with the same key replay bit-identically. Different indices select
/// disjoint ChaCha streams, so trajectory `i` can always use index `i` no
/// matter which thread runs it.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A standard normal sample.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fill `out` with independent N(0, dt) increments.
    pub fn fill_increments(&mut self, dt: f64, out: &mut [f64]) {
        let s = dt.sqrt();
        for v in out {
            *v = s * self.standard_normal();
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// `count` i.i.d. Wiener increments with variance `dt`.
pub fn wiener_increments(stream: &mut NoiseStream, dt: f64, count: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let mut out = vec![0.0; count];
    stream.fill_increments(dt, &mut out);
    Ok(out)
}

/// Sum consecutive blocks of `factor` steps, turning a fine Brownian path into
/// the same path sampled on a coarser grid. Increments are interleaved by
/// channel (`steps × channels`).
pub fn coarsen_increments(fine: &[f64], channels: usize, factor: usize) -> Vec<f64> {
    let steps = fine.len() / channels;
    let coarse_steps = steps / factor;
    let mut out = vec![0.0; coarse_steps * channels];
    for s in 0..coarse_steps {
        for f in 0..factor {
            let base = (s * factor + f) * channels;
            for c in 0..channels {
                out[s * channels + c] += fine[base + c];
            }
        }
    }
    out
}

/// An Itô SDE `dx = v(x) dt + B(x) dW`.
///
/// Both coefficients are evaluated at the pre-step state.
pub trait SdeModel {
    fn dim(&self) -> usize;
    fn channels(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `dim × channels` matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    /// Post-step constraint (wrapping, clamping). Errors describe why the
    /// state is unrecoverable.
    fn project(&self, _x: &mut [f64]) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Anything that advances a state vector by one step given the noise
/// increments of that step.
pub trait Stepper {
    fn dim(&self) -> usize;
    fn channels(&self) -> usize;
    fn step(&self, x: &mut [f64], dw: &[f64], dt: f64) -> Result<()>;
}

impl<M: SdeModel> Stepper for M {
    fn dim(&self) -> usize {
        SdeModel::dim(self)
    }

    fn channels(&self) -> usize {
        SdeModel::channels(self)
    }

    fn step(&self, x: &mut [f64], dw: &[f64], dt: f64) -> Result<()> {
        euler_maruyama_in_place(self, x, dw, dt)
    }
}

/// One Euler–Maruyama step, returning the new state.
pub fn euler_maruyama_step<M: SdeModel + ?Sized>(
    model: &M,
    state: &[f64],
    dw: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut x = state.to_vec();
    euler_maruyama_in_place(model, &mut x, dw, dt)?;
    Ok(x)
}

pub fn euler_maruyama_in_place<M: SdeModel + ?Sized>(
    model: &M,
    x: &mut [f64],
    dw: &[f64],
    dt: f64,
) -> Result<()> {
    let n = model.dim();
    let m = model.channels();
    assert!(n <= MAX_DIM && m <= MAX_CHANNELS, "model exceeds stepper limits");
    assert_eq!(x.len(), n);
    assert_eq!(dw.len(), m);
    let mut v = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM * MAX_CHANNELS];
    model.drift(x, &mut v[..n]);
    model.diffusion(x, &mut b[..n * m]);
    for i in 0..n {
        let mut inc = v[i] * dt;
        for j in 0..m {
            inc += b[i * m + j] * dw[j];
        }
        x[i] += inc;
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(failure("non-finite state"));
    }
    model.project(x).map_err(failure)
}

fn failure(detail: impl Into<String>) -> Error {
    Error::IntegrationFailure {
        step: 0,
        time: 0.0,
        detail: detail.into(),
    }
}

/// Reduce an angle into `(−π, π]`.
pub fn wrap_circle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Reduce a distance into `[0, π)`, identifying `0` with `π`.
pub fn wrap_interval(delta: f64) -> f64 {
    let r = delta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// How the target–antipode great circle is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Signed angle on `(−π, π]`, `δ = |x|`.
    #[default]
    SignedCircle,
    /// `δ` on `[0, π)` with `0` and `π` identified.
    IntervalPeriodic,
}

impl BoundaryMode {
    pub fn wrap(self, x: f64) -> f64 {
        match self {
            BoundaryMode::SignedCircle => wrap_circle(x),
            BoundaryMode::IntervalPeriodic => wrap_interval(x),
        }
    }

    pub fn delta(self, x: f64) -> f64 {
        match self {
            BoundaryMode::SignedCircle => x.abs(),
            BoundaryMode::IntervalPeriodic => x,
        }
    }
}

/// Recorded path of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath {
    pub times: Vec<f64>,
    /// Row-major `times.len() × dim`.
    pub states: Vec<f64>,
    pub dim: usize,
    pub seed: u64,
    pub stream_index: u64,
    /// Log likelihood ratios for tilted runs, one per record.
    pub log_weights: Option<Vec<f64>>,
}

impl TrajectoryPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.state(i)[c]).collect()
    }
}

/// A change of drift on the noise: under the sampling measure the increments
/// are `dW = ε + u(x) dt` with `ε ~ N(0, dt)`.
pub trait Tilt {
    /// Writes one shift per noise channel.
    fn shift(&self, x: &[f64], out: &mut [f64]);
}

fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must be at least dt {dt}"
        )));
    }
    Ok((horizon / dt).round() as usize)
}

fn locate(err: Error, step: usize, dt: f64) -> Error {
    match err {
        Error::IntegrationFailure { detail, .. } => Error::IntegrationFailure {
            step,
            time: step as f64 * dt,
            detail,
        },
        other => other,
    }
}

/// Integrate with increments from `stream` and call `observe(t, x, log_w)`
/// at step 0, every `record_every` steps and at the final step.
#[allow(clippy::too_many_arguments)]
pub fn integrate_observed<S, F>(
    stepper: &S,
    initial: &[f64],
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
    tilt: Option<&dyn Tilt>,
    mut observe: F,
) -> Result<()>
where
    S: Stepper + ?Sized,
    F: FnMut(f64, &[f64], f64),
{
    let steps = step_count(horizon, dt)?;
    let every = record_every.max(1);
    let m = stepper.channels();
    assert!(m <= MAX_CHANNELS);
    let mut x = initial.to_vec();
    let mut dw = [0.0; MAX_CHANNELS];
    let mut u = [0.0; MAX_CHANNELS];
    let mut log_w = 0.0;
    let sq = dt.sqrt();
    observe(0.0, &x, log_w);
    for s in 1..=steps {
        if let Some(t) = tilt {
            t.shift(&x, &mut u[..m]);
            for c in 0..m {
                let eps = sq * stream.standard_normal();
                dw[c] = eps + u[c] * dt;
                log_w -= u[c] * eps + 0.5 * u[c] * u[c] * dt;
            }
        } else {
            stream.fill_increments(dt, &mut dw[..m]);
        }
        stepper
            .step(&mut x, &dw[..m], dt)
            .map_err(|e| locate(e, s, dt))?;
        if s % every == 0 || s == steps {
            observe(s as f64 * dt, &x, log_w);
        }
    }
    Ok(())
}

/// Fixed-step path recorded every `record_every` steps.
pub fn run_trajectory<S: Stepper + ?Sized>(
    stepper: &S,
    initial: &[f64],
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryPath> {
    run_inner(stepper, initial, horizon, dt, stream, record_every, None)
}

/// Like [`run_trajectory`] but sampled under a tilted noise law; the path
/// carries the log likelihood ratio back to the untilted law.
pub fn run_tilted_trajectory<S: Stepper + ?Sized>(
    stepper: &S,
    tilt: &dyn Tilt,
    initial: &[f64],
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryPath> {
    run_inner(stepper, initial, horizon, dt, stream, record_every, Some(tilt))
}

fn run_inner<S: Stepper + ?Sized>(
    stepper: &S,
    initial: &[f64],
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
    tilt: Option<&dyn Tilt>,
) -> Result<TrajectoryPath> {
    let mut path = TrajectoryPath {
        times: Vec::new(),
        states: Vec::new(),
        dim: stepper.dim(),
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        log_weights: tilt.map(|_| Vec::new()),
    };
    integrate_observed(
        stepper,
        initial,
        horizon,
        dt,
        stream,
        record_every,
        tilt,
        |t, x, lw| {
            path.times.push(t);
            path.states.extend_from_slice(x);
            if let Some(w) = path.log_weights.as_mut() {
                w.push(lw);
            }
        },
    )?;
    Ok(path)
}

/// Drive a stepper with a prescribed increment sequence (`steps × channels`).
pub fn run_with_increments<S: Stepper + ?Sized>(
    stepper: &S,
    initial: &[f64],
    dt: f64,
    increments: &[f64],
    record_every: usize,
) -> Result<TrajectoryPath> {
    let m = stepper.channels();
    if m == 0 || !increments.len().is_multiple_of(m) {
        return Err(Error::InvalidParameter(format!(
            "{} increments do not divide into {m} channels",
            increments.len()
        )));
    }
    let steps = increments.len() / m;
    let every = record_every.max(1);
    let mut x = initial.to_vec();
    let mut path = TrajectoryPath {
        times: vec![0.0],
        states: x.clone(),
        dim: stepper.dim(),
        seed: 0,
        stream_index: 0,
        log_weights: None,
    };
    for s in 1..=steps {
        stepper
            .step(&mut x, &increments[(s - 1) * m..s * m], dt)
            .map_err(|e| locate(e, s, dt))?;
        if s % every == 0 || s == steps {
            path.times.push(s as f64 * dt);
            path.states.extend_from_slice(&x);
        }
    }
    Ok(path)
}

/// Run two steppers on the same increments. `map_ab` sends a state of
/// `a` to the corresponding initial state of `b`.
#[allow(clippy::too_many_arguments)]
pub fn run_paired_trajectories<A, B, F>(
    a: &A,
    b: &B,
    map_ab: F,
    initial: &[f64],
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<(TrajectoryPath, TrajectoryPath)>
where
    A: Stepper + ?Sized,
    B: Stepper + ?Sized,
    F: Fn(&[f64]) -> Vec<f64>,
{
    if a.channels() != b.channels() {
        return Err(Error::ChannelMismatch {
            a: a.channels(),
            b: b.channels(),
        });
    }
    let steps = step_count(horizon, dt)?;
    let mut incs = vec![0.0; steps * a.channels()];
    stream.fill_increments(dt, &mut incs);
    let mut pa = run_with_increments(a, initial, dt, &incs, record_every)?;
    let mut pb = run_with_increments(b, &map_ab(initial), dt, &incs, record_every)?;
    for p in [&mut pa, &mut pb] {
        p.seed = stream.seed();
        p.stream_index = stream.stream_index();
    }
    Ok((pa, pb))
}

/// Map `f` over trajectory indices `0..count`, in parallel when the
/// `parallel` feature is on. Results come back in index order and the first
/// failing index wins, so the outcome never depends on scheduling.
pub fn ensemble_map<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let results: Vec<Result<T>> = {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(&f).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<T>> = (0..count).map(&f).collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Linear {
        v: f64,
        b: f64,
    }

    impl SdeModel for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn channels(&self) -> usize {
            1
        }
        fn drift(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = self.v;
        }
        fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = self.b;
        }
    }

    #[test]
    fn stream_is_reproducible() {
        let a = wiener_increments(&mut NoiseStream::new(42, 0), 1e-3, 1000).unwrap();
        let b = wiener_increments(&mut NoiseStream::new(42, 0), 1e-3, 1000).unwrap();
        assert_eq!(a, b);
        let c = wiener_increments(&mut NoiseStream::new(42, 1), 1e-3, 1000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wiener_rejects_bad_arguments() {
        let mut s = NoiseStream::new(1, 0);
        assert!(wiener_increments(&mut s, 0.0, 10).is_err());
        assert!(wiener_increments(&mut s, 1e-3, 0).is_err());
    }

    #[test]
    fn wiener_moments() {
        let dt = 1e-3;
        let n = 1_000_000;
        let w = wiener_increments(&mut NoiseStream::new(7, 3), dt, n).unwrap();
        let (mean, _) = crate::numeric::mean_and_stderr(&w).unwrap();
        assert!(mean.abs() < 4.0 * (dt / n as f64).sqrt());
        let var = w.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var / dt - 1.0).abs() < 0.01);
    }

    #[test]
    fn independent_streams_are_uncorrelated() {
        let n = 200_000;
        let a = wiener_increments(&mut NoiseStream::new(5, 0), 1.0, n).unwrap();
        let b = wiener_increments(&mut NoiseStream::new(5, 1), 1.0, n).unwrap();
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn em_step_examples() {
        let m = Linear { v: 0.0, b: 0.0 };
        assert_eq!(euler_maruyama_step(&m, &[0.3], &[1.7], 0.1).unwrap(), vec![0.3]);
        let m = Linear { v: 2.0, b: 0.0 };
        let x = euler_maruyama_step(&m, &[0.3], &[1.7], 0.1).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn em_step_reports_non_finite() {
        let m = Linear {
            v: f64::INFINITY,
            b: 0.0,
        };
        assert!(matches!(
            euler_maruyama_step(&m, &[0.0], &[0.0], 0.1),
            Err(Error::IntegrationFailure { .. })
        ));
    }

    #[test]
    fn failure_carries_step_context() {
        struct Blowup;
        impl SdeModel for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn channels(&self) -> usize {
                1
            }
            fn drift(&self, x: &[f64], out: &mut [f64]) {
                out[0] = if x[0] > 0.25 { f64::NAN } else { 1.0 };
            }
            fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let err = run_trajectory(&Blowup, &[0.0], 1.0, 0.1, &mut NoiseStream::new(0, 0), 1)
            .unwrap_err();
        match err {
            Error::IntegrationFailure { step, time, .. } => {
                assert_eq!(step, 4);
                assert!((time - 0.4).abs() < 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn wrap_examples() {
        assert!((wrap_circle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-15);
        assert_eq!(wrap_circle(-0.1), -0.1);
        assert_eq!(wrap_circle(0.0), 0.0);
        assert_eq!(wrap_circle(PI), PI);
        assert_eq!(wrap_circle(-PI), PI);
        assert!((wrap_interval(PI + 0.1) - 0.1).abs() < 1e-15);
        assert!((wrap_interval(-0.1) - (PI - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn trajectory_records_and_replays() {
        let m = Linear { v: 0.5, b: 1.0 };
        let a = run_trajectory(&m, &[0.0], 1.0, 0.01, &mut NoiseStream::new(3, 9), 10).unwrap();
        let b = run_trajectory(&m, &[0.0], 1.0, 0.01, &mut NoiseStream::new(3, 9), 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(a.stream_index, 9);
    }

    #[test]
    fn horizon_shorter_than_dt_is_rejected() {
        let m = Linear { v: 0.0, b: 0.0 };
        assert!(run_trajectory(&m, &[0.0], 1e-4, 1e-3, &mut NoiseStream::new(0, 0), 1).is_err());
    }

    #[test]
    fn paired_identical_models_agree() {
        let m = Linear { v: -0.3, b: 0.7 };
        let (a, b) = run_paired_trajectories(
            &m,
            &m,
            |x| x.to_vec(),
            &[1.0],
            1.0,
            0.01,
            &mut NoiseStream::new(1, 2),
            1,
        )
        .unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn paired_linear_rescaling_is_exact() {
        let a = Linear { v: -0.3, b: 0.7 };
        let b = Linear { v: -0.6, b: 1.4 };
        let (pa, pb) = run_paired_trajectories(
            &a,
            &b,
            |x| vec![2.0 * x[0]],
            &[1.0],
            1.0,
            0.01,
            &mut NoiseStream::new(1, 2),
            1,
        )
        .unwrap();
        for (x, y) in pa.states.iter().zip(&pb.states) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_channel_mismatch() {
        struct Two;
        impl SdeModel for Two {
            fn dim(&self) -> usize {
                1
            }
            fn channels(&self) -> usize {
                2
            }
            fn drift(&self, _x: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
                out.fill(0.0);
            }
        }
        let one = Linear { v: 0.0, b: 0.0 };
        let r = run_paired_trajectories(
            &one,
            &Two,
            |x| x.to_vec(),
            &[0.0],
            1.0,
            0.1,
            &mut NoiseStream::new(0, 0),
            1,
        );
        assert_eq!(r.unwrap_err(), Error::ChannelMismatch { a: 1, b: 2 });
    }

    #[test]
    fn coarsening_preserves_total() {
        let fine = wiener_increments(&mut NoiseStream::new(2, 0), 1e-4, 2000).unwrap();
        let coarse = coarsen_increments(&fine, 2, 10);
        assert_eq!(coarse.len(), 200);
        let fs: f64 = fine.iter().step_by(2).sum();
        let cs: f64 = coarse.iter().step_by(2).sum();
        assert!((fs - cs).abs() < 1e-12);
    }

    #[test]
    fn ensemble_map_is_ordered() {
        let v = ensemble_map(100, |i| Ok(i * 2)).unwrap();
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
        let e = ensemble_map(100, |i| {
            if i >= 40 {
                Err(Error::InvalidParameter(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert_eq!(e.unwrap_err(), Error::InvalidParameter("40".into()));
    }

    #[test]
    fn tilted_weights_are_unbiased() {
        // Under a constant tilt u, E_Q[w · f(W_T)] must equal E_P[f(W_T)].
        struct Const;
        impl Tilt for Const {
            fn shift(&self, _x: &[f64], out: &mut [f64]) {
                out[0] = 1.5;
            }
        }
        let m = Linear { v: 0.0, b: 1.0 };
        let n = 20_000;
        let mut acc = Vec::with_capacity(n);
        for i in 0..n {
            let p = run_tilted_trajectory(&m, &Const, &[0.0], 1.0, 0.05, &mut NoiseStream::new(11, i as u64), 20)
                .unwrap();
            let w = p.log_weights.as_ref().unwrap().last().unwrap().exp();
            let x = p.state(p.len() - 1)[0];
            acc.push(w * x * x);
        }
        let (mean, se) = crate::numeric::mean_and_stderr(&acc).unwrap();
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(x in -100.0f64..100.0) {
            let w = wrap_circle(x);
            prop_assert_eq!(wrap_circle(w), w);
            prop_assert!(w > -PI && w <= PI);
            let d = wrap_interval(x);
            prop_assert!((wrap_interval(d) - d).abs() < 1e-15);
            prop_assert!((0.0..PI).contains(&d));
        }

        #[test]
        fn wrap_preserves_angle(x in -100.0f64..100.0) {
            let w = wrap_circle(x);
            prop_assert!((w.sin() - x.sin()).abs() < 1e-12);
            prop_assert!((w.cos() - x.cos()).abs() < 1e-12);
        }
    }
}
