//! Reduced stochastic models and feedback laws.
//!
//! Four protocols are supported. The diffusion-gradient protocol measures
//! perpendicular to the Bloch vector with strength `κδ²` (and optionally
//! parallel to it with strength `μ`). Two comparison protocols instead rotate
//! the state toward the target with a bounded Hamiltonian and measure at a
//! fixed strength.
//!
//! # Bloch-coordinate form
//!
//! Measuring `n·σ` with strength `k` moves the Bloch vector as
//!
//! ```text
//! da = −4k (a − (n·a) n) dt + √(8k) (n − (n·a) a) dW
//! ```
//!
//! For the perpendicular axis `n·a = 0`, giving `−4k a dt + √(8k) n dW`;
//! Itô's rule on `|a|` then yields `d|a| = 4k(1 − a²)/a dt` and, on the angle,
//! `dx = √(8k)/a dW`. For the parallel axis the drift vanishes and the noise
//! is `√(8μ)(1 − a²) â dV`. The noise channels (dephasing `√(2β_j) σ_j`,
//! decay `√(2γ) σ₋`) add the linear drift
//!
//! ```text
//! ȧx = −(γ + 4βy + 4βz) ax
//! ȧy = −(γ + 4βx + 4βz) ay
//! ȧz = −4(βx + βy) az − 2γ(1 + az)
//! ```
//!
//! Changing variables to `(x, a)` recovers [`NoisyModel`]: the angle equation
//! exactly, and the radial drift as `−a[γ + 4βy + 4βz + (γ + 4βx − 4βz)cos²x]
//! − 2γ cos x`. [`RadialDrift::AsPrinted`] keeps the alternative radial form
//! `−a(γ + 4βx + 4βy) − a(γ + 4βx − 4βz)cos x − 2γ cos x`; the two agree at
//! `x = 0` and whenever `βx = βz` to second order in `x`.

use nalgebra::Vector3;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::quantum::{
    reduced_coords_continuous, BlochState, MeasurementSetting, ReducedState, TargetSpec,
};
use crate::sde::{wrap_circle, BoundaryMode, SdeModel, Tilt};
use crate::{Error, Result, EPS_NUM};

/// Control strengths and bounds (rates in units of 1/time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub kappa: f64,
    /// Parallel measurement strength.
    pub mu: f64,
    /// Bound on the Hamiltonian rotation rate.
    pub alpha_max: f64,
    /// Bound on the perpendicular measurement strength.
    pub k_max: f64,
    /// Fixed perpendicular strength for [`ProtocolKind::HamiltonianPerpendicular`].
    pub k_perp: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self::with_kappa(1.0)
    }
}

impl ControlParams {
    /// `μ = κ` and `α_max = k_max = κπ²`.
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            kappa,
            mu: kappa,
            alpha_max: kappa * PI * PI,
            k_max: kappa * PI * PI,
            k_perp: kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0
            && self.mu >= 0.0
            && self.alpha_max >= 0.0
            && self.k_max >= 0.0
            && self.k_perp >= 0.0
            && [self.kappa, self.mu, self.alpha_max, self.k_max, self.k_perp]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "control parameters must be finite with kappa > 0 and the rest >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Dephasing rates `β_j` and decay parameter `γ` (the decay rate out of the
/// target is `2γ`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseParams {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_z: f64,
    pub gamma: f64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        beta_x: 0.0,
        beta_y: 0.0,
        beta_z: 0.0,
        gamma: 0.0,
    };

    /// All four rates equal to `g`.
    pub fn uniform(g: f64) -> Self {
        Self {
            beta_x: g,
            beta_y: g,
            beta_z: g,
            gamma: g,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::NONE
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.beta_x, self.beta_y, self.beta_z, self.gamma];
        if r.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise rates must be finite and >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Drift of the Bloch vector caused by dephasing and decay.
    pub fn bloch_drift(&self, a: &Vector3<f64>) -> Vector3<f64> {
        let (bx, by, bz, g) = (self.beta_x, self.beta_y, self.beta_z, self.gamma);
        Vector3::new(
            -(g + 4.0 * by + 4.0 * bz) * a.x,
            -(g + 4.0 * bx + 4.0 * bz) * a.y,
            -4.0 * (bx + by) * a.z - 2.0 * g * (1.0 + a.z),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    DiffusionGradient,
    DiffusionGradientLinearized,
    HamiltonianPerpendicular,
    HamiltonianParallel,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::DiffusionGradient,
        ProtocolKind::DiffusionGradientLinearized,
        ProtocolKind::HamiltonianPerpendicular,
        ProtocolKind::HamiltonianParallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::DiffusionGradient => "diffusion-gradient",
            ProtocolKind::DiffusionGradientLinearized => "diffusion-gradient-linearized",
            ProtocolKind::HamiltonianPerpendicular => "hamiltonian-perpendicular",
            ProtocolKind::HamiltonianParallel => "hamiltonian-parallel",
        }
    }

    pub fn uses_hamiltonian(self) -> bool {
        matches!(
            self,
            ProtocolKind::HamiltonianPerpendicular | ProtocolKind::HamiltonianParallel
        )
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diffusion-gradient" | "dg" => Ok(ProtocolKind::DiffusionGradient),
            "diffusion-gradient-linearized" | "dg-linearized" => {
                Ok(ProtocolKind::DiffusionGradientLinearized)
            }
            "hamiltonian-perpendicular" | "h-perp" => Ok(ProtocolKind::HamiltonianPerpendicular),
            "hamiltonian-parallel" | "h-par" => Ok(ProtocolKind::HamiltonianParallel),
            other => Err(Error::InvalidParameter(format!("unknown protocol '{other}'"))),
        }
    }
}

/// `k = κδ²`, capped at `k_max`.
pub fn measurement_strength(delta: f64, params: &ControlParams) -> f64 {
    (params.kappa * delta * delta).min(params.k_max)
}

/// `dx = √(8κ) |x| dW` on the great circle through the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiselessModel {
    pub kappa: f64,
    pub boundary: BoundaryMode,
}

impl NoiselessModel {
    pub fn new(params: &ControlParams) -> Self {
        Self {
            kappa: params.kappa,
            boundary: BoundaryMode::SignedCircle,
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }

    /// Diffusion rate `D(δ) = 8κδ²`.
    pub fn diffusion_rate(&self, delta: f64) -> f64 {
        8.0 * self.kappa * delta * delta
    }
}

impl SdeModel for NoiselessModel {
    fn dim(&self) -> usize {
        1
    }
    fn channels(&self) -> usize {
        1
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = (8.0 * self.kappa).sqrt() * self.boundary.delta(x[0]).abs();
    }
    fn project(&self, x: &mut [f64]) -> std::result::Result<(), String> {
        x[0] = self.boundary.wrap(x[0]);
        Ok(())
    }
}

/// Which radial drift to use in the `(x, a)` chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialDrift {
    /// Change of variables from the Bloch-coordinate noise drift.
    #[default]
    Derived,
    AsPrinted,
}

/// Below this Bloch length the `1/a` terms of [`NoisyModel`] are unusable.
pub const SINGULAR_LENGTH: f64 = 1e-3;

/// Diffusion-gradient control with noise, in `(signed angle, a)`.
/// Channel 0 drives the angle (`dW`), channel 1 the length (`dV`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyModel {
    pub params: ControlParams,
    pub noise: NoiseParams,
    pub radial: RadialDrift,
}

impl NoisyModel {
    pub fn new(params: ControlParams, noise: NoiseParams) -> Self {
        Self {
            params,
            noise,
            radial: RadialDrift::Derived,
        }
    }

    pub fn with_radial(mut self, radial: RadialDrift) -> Self {
        self.radial = radial;
        self
    }

    pub fn check_state(x: &[f64]) -> Result<()> {
        if !(x[1] >= SINGULAR_LENGTH) {
            return Err(Error::Degenerate("Bloch length below 1e-3 in the (δ, a) chart"));
        }
        Ok(())
    }

    fn radial_drift(&self, x: f64, a: f64) -> f64 {
        let NoiseParams {
            beta_x: bx,
            beta_y: by,
            beta_z: bz,
            gamma: g,
        } = self.noise;
        let c = x.cos();
        match self.radial {
            RadialDrift::Derived => {
                -a * (g + 4.0 * by + 4.0 * bz + (g + 4.0 * bx - 4.0 * bz) * c * c) - 2.0 * g * c
            }
            RadialDrift::AsPrinted => {
                -a * (g + 4.0 * bx + 4.0 * by) - a * (g + 4.0 * bx - 4.0 * bz) * c - 2.0 * g * c
            }
        }
    }
}

impl SdeModel for NoisyModel {
    fn dim(&self) -> usize {
        2
    }
    fn channels(&self) -> usize {
        2
    }
    fn drift(&self, s: &[f64], out: &mut [f64]) {
        let (x, a) = (s[0], s[1]);
        let n = &self.noise;
        let (sn, c) = x.sin_cos();
        let k = measurement_strength(x.abs(), &self.params);
        out[0] = (2.0 * n.gamma / a + c * (n.gamma + 4.0 * (n.beta_x - n.beta_z))) * sn;
        out[1] = (1.0 - a * a) * 4.0 * k / a + self.radial_drift(x, a);
    }
    fn diffusion(&self, s: &[f64], out: &mut [f64]) {
        let (x, a) = (s[0], s[1]);
        let k = measurement_strength(x.abs(), &self.params);
        out[0] = (8.0 * k).sqrt() / a;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = (1.0 - a * a) * (8.0 * self.params.mu).sqrt();
    }
    fn project(&self, s: &mut [f64]) -> std::result::Result<(), String> {
        s[0] = wrap_circle(s[0]);
        clamp_length(&mut s[1], 1e-6)?;
        if s[1] < SINGULAR_LENGTH {
            return Err(format!("Bloch length {} below {SINGULAR_LENGTH}", s[1]));
        }
        Ok(())
    }
}

fn clamp_length(a: &mut f64, tolerance: f64) -> std::result::Result<(), String> {
    if *a > 1.0 {
        if *a - 1.0 > tolerance {
            return Err(format!("Bloch length overshoot {:.3e}", *a - 1.0));
        }
        *a = 1.0;
    }
    Ok(())
}

/// Leading-order expansion in `(δ, Δ)` near the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedModel {
    pub params: ControlParams,
    pub noise: NoiseParams,
    pub radial: RadialDrift,
}

impl LinearizedModel {
    pub fn new(params: ControlParams, noise: NoiseParams) -> Self {
        Self {
            params,
            noise,
            radial: RadialDrift::Derived,
        }
    }

    pub fn with_radial(mut self, radial: RadialDrift) -> Self {
        self.radial = radial;
        self
    }

    /// Coefficient `c` in `dδ = c δ dt + …`.
    pub fn delta_drift_coefficient(&self) -> f64 {
        3.0 * self.noise.gamma + 4.0 * (self.noise.beta_x - self.noise.beta_z)
    }

    /// Constant drift of `Δ`.
    pub fn mixedness_drift(&self) -> f64 {
        let NoiseParams {
            beta_x: bx,
            beta_y: by,
            beta_z: bz,
            gamma: g,
        } = self.noise;
        match self.radial {
            RadialDrift::Derived => 4.0 * (g + bx + by),
            RadialDrift::AsPrinted => 4.0 * (g + 2.0 * bx + by - bz),
        }
    }
}

impl SdeModel for LinearizedModel {
    fn dim(&self) -> usize {
        2
    }
    fn channels(&self) -> usize {
        2
    }
    fn drift(&self, s: &[f64], out: &mut [f64]) {
        out[0] = self.delta_drift_coefficient() * s[0];
        out[1] = self.mixedness_drift();
    }
    fn diffusion(&self, s: &[f64], out: &mut [f64]) {
        out[0] = (8.0 * self.params.kappa).sqrt() * s[0];
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = 2.0 * (8.0 * self.params.mu).sqrt() * s[1];
    }
}

/// Diffusion-gradient control in Bloch coordinates `(ax, ay, az)` with the
/// default target, channels `(dW, dV)`.
///
/// Plain Euler–Maruyama overshoots the unit sphere by `O(k dt)` per step, so
/// the projection tolerance is configurable; the SME stepper in
/// [`crate::sme`] is the positivity-preserving alternative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochReducedModel {
    pub params: ControlParams,
    pub noise: NoiseParams,
    pub clamp_tolerance: f64,
}

impl BlochReducedModel {
    pub fn new(params: ControlParams, noise: NoiseParams) -> Self {
        Self {
            params,
            noise,
            clamp_tolerance: 1e-6,
        }
    }

    fn axes(&self, s: &[f64]) -> (ReducedState, Vector3<f64>, Vector3<f64>) {
        let t = TargetSpec::default();
        let b = BlochState::new_unchecked(s[0], s[1], s[2]);
        let r = reduced_coords_continuous(&b, &t, 0.0);
        (r, r.perpendicular_axis(&t), r.parallel_axis(&t))
    }
}

impl SdeModel for BlochReducedModel {
    fn dim(&self) -> usize {
        3
    }
    fn channels(&self) -> usize {
        2
    }
    fn drift(&self, s: &[f64], out: &mut [f64]) {
        let a = Vector3::new(s[0], s[1], s[2]);
        let (r, _, _) = self.axes(s);
        let k = measurement_strength(r.delta(), &self.params);
        let d = -4.0 * k * a + self.noise.bloch_drift(&a);
        out.copy_from_slice(d.as_slice());
    }
    fn diffusion(&self, s: &[f64], out: &mut [f64]) {
        let (r, n, u) = self.axes(s);
        let k = measurement_strength(r.delta(), &self.params);
        let len2 = r.length * r.length;
        let w = (8.0 * k).sqrt() * n;
        let v = (8.0 * self.params.mu).sqrt() * (1.0 - len2) * u;
        for i in 0..3 {
            out[2 * i] = w[i];
            out[2 * i + 1] = v[i];
        }
    }
    fn project(&self, s: &mut [f64]) -> std::result::Result<(), String> {
        let len = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        let mut clamped = len;
        clamp_length(&mut clamped, self.clamp_tolerance)?;
        if clamped < len {
            for c in s.iter_mut() {
                *c /= len;
            }
        }
        Ok(())
    }
}

/// Rotation axis `(a × t)/|a × t|` that turns `a` toward `t`; the flag is
/// false when `a` is parallel or antiparallel to `t`.
pub fn control_hamiltonian_axis(state: &BlochState, target: &TargetSpec) -> (Vector3<f64>, bool) {
    let c = state.vector().cross(&target.axis());
    let n = c.norm();
    if n <= EPS_NUM * state.length().max(EPS_NUM) {
        (Vector3::zeros(), false)
    } else {
        (c / n, true)
    }
}

/// Axis used at the antipode, where every perpendicular axis is equivalent.
pub const ANTIPODE_AXIS: Vector3<f64> = Vector3::new(0.0, -1.0, 0.0);

/// Measurement settings as `(axis, strength)` pairs for an already reduced
/// state. Used by the integrators, which must never fail on `a = 0`.
pub fn measurement_axes(
    kind: ProtocolKind,
    reduced: &ReducedState,
    params: &ControlParams,
    target: &TargetSpec,
) -> Vec<(Vector3<f64>, f64)> {
    let perp = reduced.perpendicular_axis(target);
    let par = reduced.parallel_axis(target);
    match kind {
        ProtocolKind::DiffusionGradient | ProtocolKind::DiffusionGradientLinearized => vec![
            (perp, measurement_strength(reduced.delta(), params)),
            (par, params.mu),
        ],
        ProtocolKind::HamiltonianPerpendicular => vec![(perp, params.k_perp.min(params.k_max))],
        ProtocolKind::HamiltonianParallel => vec![(par, params.mu)],
    }
}

/// Adaptive measurement settings for `kind` at `state`.
pub fn select_measurement(
    kind: ProtocolKind,
    state: &BlochState,
    params: &ControlParams,
    target: &TargetSpec,
) -> Result<Vec<MeasurementSetting>> {
    state.validate()?;
    if state.length() < EPS_NUM {
        return Err(Error::Degenerate(
            "measurement axis undefined for a zero Bloch vector",
        ));
    }
    let r = reduced_coords_continuous(state, target, 0.0);
    Ok(measurement_axes(kind, &r, params, target)
        .into_iter()
        .map(|(n, k)| MeasurementSetting::axis(n, k))
        .collect())
}

/// Ground-state tilt for importance sampling of the noiseless dynamics.
///
/// With `z = ln|x| − ln π`, `h(z) = e^{z/2}(1 − z/2)` satisfies `Lh = −κh`
/// and `h′(0) = 0`. Shifting the angle noise by `√(8κ)|x| ∂ₓln h` keeps the
/// sample near the slowest-decaying mode, so the weighted estimator of
/// `⟨P_e⟩` keeps a bounded relative error at late times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateTilt {
    pub kappa: f64,
    pub layout: TiltLayout,
}

/// How to read the signed angle from a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltLayout {
    /// State component 0 is the signed angle.
    SignedAngle,
    /// State is a Bloch vector in the xz-plane with target `+z`.
    Bloch,
}

impl GroundStateTilt {
    pub fn shift_at(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let z = (x.abs() / PI).ln().min(0.0);
        x.signum() * (8.0 * self.kappa).sqrt() * (-z / (4.0 - 2.0 * z))
    }
}

impl Tilt for GroundStateTilt {
    fn shift(&self, s: &[f64], out: &mut [f64]) {
        let x = match self.layout {
            TiltLayout::SignedAngle => s[0],
            TiltLayout::Bloch => s[0].atan2(s[2]),
        };
        out.fill(0.0);
        out[0] = self.shift_at(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn drift_diff<M: SdeModel>(m: &M, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d = vec![0.0; m.dim()];
        let mut b = vec![0.0; m.dim() * m.channels()];
        m.drift(s, &mut d);
        m.diffusion(s, &mut b);
        (d, b)
    }

    #[test]
    fn strength_examples() {
        let p = ControlParams::default();
        assert_eq!(measurement_strength(0.0, &p), 0.0);
        assert_relative_eq!(measurement_strength(PI, &p), PI * PI);
        assert_eq!(measurement_strength(1.0, &ControlParams::with_kappa(2.0)), 2.0);
    }

    #[test]
    fn noiseless_examples() {
        let m = NoiselessModel::new(&ControlParams::default());
        assert_eq!(drift_diff(&m, &[0.0]), (vec![0.0], vec![0.0]));
        let (_, b) = drift_diff(&m, &[1.0]);
        assert_relative_eq!(b[0], 8f64.sqrt());
        assert_relative_eq!(m.diffusion_rate(1.0), 8.0);
        let (_, b) = drift_diff(&m, &[PI / 2.0]);
        assert_relative_eq!(b[0], 4.442882938158366, epsilon = 1e-12);
    }

    #[test]
    fn noisy_model_at_target_with_equal_rates() {
        let m = NoisyModel::new(ControlParams::default(), NoiseParams::uniform(0.1));
        let (d, _) = drift_diff(&m, &[0.0, 1.0]);
        assert_eq!(d[0], 0.0);
        assert_relative_eq!(d[1], -12.0 * 0.1, epsilon = 1e-15);
        let p = m.with_radial(RadialDrift::AsPrinted);
        let (d, _) = drift_diff(&p, &[0.0, 1.0]);
        assert_relative_eq!(d[1], -12.0 * 0.1, epsilon = 1e-15);
    }

    #[test]
    fn noisy_model_equator_noiseless() {
        let m = NoisyModel::new(ControlParams::default(), NoiseParams::NONE);
        let (d, b) = drift_diff(&m, &[PI / 2.0, 1.0]);
        assert_eq!(d, vec![0.0, 0.0]);
        assert_relative_eq!(b[0], 8f64.sqrt() * PI / 2.0, epsilon = 1e-12);
        assert_eq!(b[3], 0.0);
    }

    #[test]
    fn noisy_model_rejects_small_length() {
        let m = NoisyModel::new(ControlParams::default(), NoiseParams::NONE);
        let mut s = [0.3, 5e-4];
        assert!(SdeModel::project(&m, &mut s).is_err());
        assert!(NoisyModel::check_state(&[0.3, 5e-4]).is_err());
    }

    #[test]
    fn noisy_reduces_to_noiseless_on_grid() {
        let p = ControlParams::with_kappa(1.3);
        let noisy = NoisyModel::new(p, NoiseParams::NONE);
        let plain = NoiselessModel::new(&p);
        for i in 0..=1000 {
            let x = PI * i as f64 / 1000.0;
            let (d, b) = drift_diff(&noisy, &[x, 1.0]);
            let (d0, b0) = drift_diff(&plain, &[x]);
            assert!((d[0] - d0[0]).abs() < 1e-12);
            assert!(d[1].abs() < 1e-12);
            assert!((b[0] - b0[0]).abs() < 1e-12);
            assert!(b[3].abs() < 1e-12);
        }
    }

    #[test]
    fn linearized_examples() {
        let g = 0.2;
        let l = LinearizedModel::new(ControlParams::default(), NoiseParams::uniform(g));
        assert_relative_eq!(l.delta_drift_coefficient(), 3.0 * g);
        assert_relative_eq!(l.mixedness_drift(), 12.0 * g);
        assert_relative_eq!(l.with_radial(RadialDrift::AsPrinted).mixedness_drift(), 12.0 * g);

        let z = LinearizedModel::new(ControlParams::default(), NoiseParams::NONE);
        let (d, b) = drift_diff(&z, &[0.01, 0.002]);
        assert_eq!(d, vec![0.0, 0.0]);
        assert_relative_eq!(b[0], 8f64.sqrt() * 0.01);
        assert_relative_eq!(b[3], 2.0 * 8f64.sqrt() * 0.002);

        let sym = NoiseParams {
            beta_x: 0.3,
            beta_y: 0.0,
            beta_z: 0.3,
            gamma: 0.0,
        };
        assert_eq!(
            LinearizedModel::new(ControlParams::default(), sym).delta_drift_coefficient(),
            0.0
        );
    }

    #[test]
    fn linearized_matches_noisy_near_target() {
        // Relative drift error should scale like δ² + Δ.
        let p = ControlParams::default();
        let n = NoiseParams {
            beta_x: 0.05,
            beta_y: 0.02,
            beta_z: 0.01,
            gamma: 0.03,
        };
        let full = NoisyModel::new(p, n);
        let lin = LinearizedModel::new(p, n);
        let mut worst: f64 = 0.0;
        for &(delta, big_delta) in &[(1e-2, 1e-2), (5e-3, 5e-3), (1e-3, 1e-3)] {
            let (d, _) = drift_diff(&full, &[delta, 1.0 - big_delta]);
            let (dl, _) = drift_diff(&lin, &[delta, big_delta]);
            let rel_delta = (d[0] - dl[0]).abs() / dl[0].abs();
            let rel_mix = (-d[1] - dl[1]).abs() / dl[1].abs();
            let scale = delta * delta + big_delta;
            worst = worst.max(rel_delta / scale).max(rel_mix / scale);
        }
        assert!(worst < 20.0, "envelope constant {worst}");
    }

    #[test]
    fn bloch_model_agrees_with_angle_chart() {
        // The Bloch drift, pushed through the change of variables, must give
        // the (x, a) drift of the derived chart.
        let p = ControlParams::default();
        let n = NoiseParams {
            beta_x: 0.05,
            beta_y: 0.02,
            beta_z: 0.01,
            gamma: 0.03,
        };
        let bloch = BlochReducedModel::new(p, n);
        let chart = NoisyModel::new(p, n);
        for &(x, a) in &[(0.3, 0.9), (-1.2, 0.7), (2.8, 0.95)] {
            let s = BlochState::from_signed_angle(x, a).vector();
            let (d, b) = drift_diff(&bloch, s.as_slice());
            let (dc, bc) = drift_diff(&chart, &[x, a]);
            // Itô: dx = (az dax − ax daz)/a² + second-order terms from dW.
            let (ax, az) = (s.x, s.z);
            let a2 = a * a;
            let lin = (az * d[0] - ax * d[2]) / a2;
            // quadratic variation: ∂²x/∂a_i∂a_j with noise covariance
            let (w0, w2) = (b[0], b[4]);
            let (v0, v2) = (b[1], b[5]);
            let hess = |u0: f64, u2: f64| {
                // x = atan2(ax, az)
                let xx = -2.0 * ax * az / (a2 * a2);
                let zz = 2.0 * ax * az / (a2 * a2);
                let xz = (ax * ax - az * az) / (a2 * a2);
                0.5 * (xx * u0 * u0 + zz * u2 * u2 + 2.0 * xz * u0 * u2)
            };
            let drift_x = lin + hess(w0, w2) + hess(v0, v2);
            assert!((drift_x - dc[0]).abs() < 1e-12, "x={x} {drift_x} vs {}", dc[0]);
            let noise_x = (az * w0 - ax * w2) / a2;
            assert!((noise_x.abs() - bc[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_axis_examples() {
        let t = TargetSpec::default();
        let (ax, ok) = control_hamiltonian_axis(&BlochState::new_unchecked(1.0, 0.0, 0.0), &t);
        assert!(ok);
        assert_relative_eq!(ax, Vector3::new(0.0, -1.0, 0.0));
        assert!(!control_hamiltonian_axis(&BlochState::new_unchecked(0.0, 0.0, 0.5), &t).1);
        assert!(!control_hamiltonian_axis(&BlochState::new_unchecked(0.0, 0.0, -1.0), &t).1);
    }

    #[test]
    fn rotation_about_axis_moves_toward_target() {
        let t = TargetSpec::default();
        let a = BlochState::from_signed_angle(0.8, 1.0);
        let (m, _) = control_hamiltonian_axis(&a, &t);
        let da = m.cross(&a.vector());
        assert!(da.dot(&t.axis()) > 0.0);
    }

    #[test]
    fn select_measurement_examples() {
        let t = TargetSpec::default();
        let p = ControlParams::default();
        let s = select_measurement(
            ProtocolKind::DiffusionGradient,
            &BlochState::new_unchecked(1.0, 0.0, 0.0),
            &p,
            &t,
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        match &s[0].observable {
            crate::quantum::Observable::BlochAxis(n) => {
                assert_relative_eq!(*n, Vector3::new(0.0, 0.0, -1.0), epsilon = 1e-15)
            }
            _ => panic!(),
        }
        assert_relative_eq!(s[0].strength, PI * PI / 4.0, epsilon = 1e-12);
        match &s[1].observable {
            crate::quantum::Observable::BlochAxis(n) => {
                assert_relative_eq!(*n, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15)
            }
            _ => panic!(),
        }
        assert_eq!(s[1].strength, 1.0);

        let s = select_measurement(
            ProtocolKind::HamiltonianParallel,
            &BlochState::from_signed_angle(0.4, 0.8),
            &p,
            &t,
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].strength, 1.0);

        let s = select_measurement(
            ProtocolKind::DiffusionGradient,
            &BlochState::new_unchecked(0.0, 0.0, 1.0),
            &p,
            &t,
        )
        .unwrap();
        assert_eq!(s[0].strength, 0.0);
        assert_eq!(s[1].strength, 1.0);

        assert!(select_measurement(
            ProtocolKind::DiffusionGradient,
            &BlochState::new_unchecked(0.0, 0.0, 0.0),
            &p,
            &t
        )
        .is_err());
    }

    #[test]
    fn protocol_names_roundtrip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("bogus".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn ground_state_tilt_solves_eigenproblem() {
        // L h = ½ D h'' with D = 8κx²; check L h = −κ h numerically.
        let kappa = 1.0;
        let h = |x: f64| {
            let z = (x / PI).ln();
            (z / 2.0).exp() * (1.0 - z / 2.0)
        };
        for &x in &[0.01, 0.3, 1.5, 3.0] {
            let e = 1e-4 * x;
            let d2 = (h(x + e) - 2.0 * h(x) + h(x - e)) / (e * e);
            let lh = 0.5 * 8.0 * kappa * x * x * d2;
            assert!((lh + kappa * h(x)).abs() < 1e-5 * h(x).max(1e-3), "x={x}");
            let d1 = (h(x + e) - h(x - e)) / (2.0 * e);
            let tilt = GroundStateTilt {
                kappa,
                layout: TiltLayout::SignedAngle,
            };
            let u = (8.0 * kappa).sqrt() * x * d1 / h(x);
            assert!((tilt.shift_at(x) - u).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn dg_strength_is_bounded(x in -PI..=PI) {
            let p = ControlParams::default();
            prop_assert!(measurement_strength(x.abs(), &p) <= PI * PI * p.kappa);
        }

        #[test]
        fn hamiltonian_axis_is_orthogonal(
            (x, y, z) in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        ) {
            let s = BlochState::new_unchecked(x, y, z);
            let t = TargetSpec::default();
            let (m, ok) = control_hamiltonian_axis(&s, &t);
            if ok {
                prop_assert!(m.dot(&s.vector()).abs() < 1e-12);
                prop_assert!(m.dot(&t.axis()).abs() < 1e-12);
                prop_assert!((m.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn perpendicular_axis_is_perpendicular(x in -PI..PI, a in 0.01..1.0f64) {
            let t = TargetSpec::default();
            let s = BlochState::from_signed_angle(x, a);
            let set = select_measurement(ProtocolKind::DiffusionGradient, &s, &ControlParams::default(), &t).unwrap();
            if let crate::quantum::Observable::BlochAxis(n) = &set[0].observable {
                prop_assert!(n.dot(&s.vector()).abs() < 1e-12);
            }
        }
    }
}
