//! Stochastic master equation for qubits and small N-level systems.
//!
//! Each measurement `(Σ, k)` contributes
//! `−k[Σ,[Σ,ρ]] dt + √(2k)(Σρ + ρΣ − 2⟨Σ⟩ρ) dW`, and open-system noise enters
//! as Lindblad dissipators `r·(LρL† − ½{L†L, ρ})`. Two integrators are
//! available:
//!
//! - [`SmeScheme::EulerMaruyama`] adds the increment above directly.
//! - [`SmeScheme::Kraus`] applies `ρ → MρM† + Σ r LρL† dt` and renormalises,
//!   with `M = I − (iH + ½Σc² + ½Σ r L†L) dt + Σ c dy + ½Σ c²(dy² − dt)`,
//!   `c = √(2k)Σ` and `dy = 2√(2k)⟨Σ⟩ dt + dW`. It agrees with the SME to
//!   first order and keeps `ρ` positive for any step size.

use nalgebra::allocator::Allocator;
use nalgebra::{DMatrix, DVector, DefaultAllocator, Dim, Matrix2, OMatrix, Vector3, U2};

use crate::protocols::{
    control_hamiltonian_axis, measurement_axes, measurement_strength, ControlParams,
    NoiseParams, ProtocolKind,
};
use crate::quantum::{
    bloch_error_probability,
    qubit_bloch, qubit_density, reduced_coords_continuous, sigma_minus, sigma_x, sigma_y,
    sigma_z, spin_along, BlochState, DensityMatrix, MeasurementSetting, TargetSpec, C64,
};
use crate::sde::{integrate_observed, NoiseStream, Stepper, Tilt, TrajectoryPath};
use crate::{Error, Result, EPS_NUM};

/// Smallest eigenvalue tolerated before a step is rejected.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmeScheme {
    EulerMaruyama,
    #[default]
    Kraus,
}

/// Open-system noise as Lindblad channels `(L, r)` contributing `r·D[L]`.
#[derive(Debug, Clone, PartialEq)]
pub enum LindbladNoise {
    /// Dephasing `−β_j[σ_j,[σ_j,ρ]]` and decay `2γ·D[σ₋]` on a qubit.
    Qubit(NoiseParams),
    Operators(Vec<(DMatrix<C64>, f64)>),
}

impl Default for LindbladNoise {
    fn default() -> Self {
        LindbladNoise::Operators(Vec::new())
    }
}

impl LindbladNoise {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            LindbladNoise::Qubit(p) => {
                p.validate()?;
                if dim != 2 {
                    return Err(Error::InvalidParameter(format!(
                        "qubit noise applied to a {dim}-level system"
                    )));
                }
            }
            LindbladNoise::Operators(ops) => {
                for (l, r) in ops {
                    if !(*r >= 0.0) || l.nrows() != dim || l.ncols() != dim {
                        return Err(Error::InvalidParameter(format!(
                            "Lindblad channel must be {dim}x{dim} with rate >= 0 (rate {r})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Channels as dense matrices, skipping zero rates.
    pub fn channels(&self) -> Vec<(DMatrix<C64>, f64)> {
        match self {
            LindbladNoise::Qubit(p) => qubit_channels(p)
                .into_iter()
                .map(|(m, r)| (DMatrix::from_fn(2, 2, |i, j| m[(i, j)]), r))
                .collect(),
            LindbladNoise::Operators(ops) => ops.iter().filter(|(_, r)| *r > 0.0).cloned().collect(),
        }
    }
}

fn qubit_channels(p: &NoiseParams) -> Vec<(Matrix2<C64>, f64)> {
    [
        (sigma_x(), 2.0 * p.beta_x),
        (sigma_y(), 2.0 * p.beta_y),
        (sigma_z(), 2.0 * p.beta_z),
        (sigma_minus(), 2.0 * p.gamma),
    ]
    .into_iter()
    .filter(|(_, r)| *r > 0.0)
    .collect()
}

/// Knobs for [`sme_step_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub scheme: SmeScheme,
    /// Symmetrise `ρ ← (ρ + ρ†)/2` after the update. Turning this off is a
    /// fault-injection hook.
    pub rehermitize: bool,
    pub renormalize: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: SmeScheme::Kraus,
            rehermitize: true,
            renormalize: true,
        }
    }
}

impl StepOptions {
    pub fn euler_maruyama() -> Self {
        Self {
            scheme: SmeScheme::EulerMaruyama,
            ..Self::default()
        }
    }
}

/// What a step did before the stabilising corrections.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// `|tr ρ − 1|` before renormalisation.
    pub trace_drift: f64,
    /// `max |ρ − ρ†|` before symmetrisation.
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
}

fn trace_re<D: Dim>(m: &OMatrix<C64, D, D>) -> f64
where
    DefaultAllocator: Allocator<D, D>,
{
    m.trace().re
}

fn max_antihermitian<D: Dim>(m: &OMatrix<C64, D, D>) -> f64
where
    DefaultAllocator: Allocator<D, D>,
{
    let d = m - m.adjoint();
    d.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// One update of the unnormalised state. `meas` holds `(Σ, k, dW)`.
fn raw_update<D: Dim>(
    rho: &OMatrix<C64, D, D>,
    meas: &[(OMatrix<C64, D, D>, f64, f64)],
    hamiltonian: Option<&OMatrix<C64, D, D>>,
    lindblad: &[(OMatrix<C64, D, D>, f64)],
    dt: f64,
    scheme: SmeScheme,
) -> OMatrix<C64, D, D>
where
    DefaultAllocator: Allocator<D, D>,
{
    let re = |x: f64| C64::new(x, 0.0);
    let i_dt = C64::new(0.0, dt);
    match scheme {
        SmeScheme::EulerMaruyama => {
            let mut out = rho.clone();
            for (s, k, dw) in meas {
                if *k == 0.0 {
                    continue;
                }
                let sr = s * rho;
                let rs = rho * s;
                let mean = sr.trace().re;
                let double = s * &sr - (&sr * s) * re(2.0) + &rs * s;
                out -= double * re(k * dt);
                let kick = (&sr + &rs) - rho * re(2.0 * mean);
                out += kick * re((2.0 * k).sqrt() * dw);
            }
            for (l, r) in lindblad {
                let ld = l.adjoint();
                let ll = &ld * l;
                let term = l * rho * &ld - (&ll * rho + rho * &ll) * re(0.5);
                out += term * re(r * dt);
            }
            if let Some(h) = hamiltonian {
                out -= (h * rho - rho * h) * i_dt;
            }
            out
        }
        SmeScheme::Kraus => {
            let (nr, nc) = rho.shape_generic();
            let mut m = OMatrix::<C64, D, D>::identity_generic(nr, nc);
            for (s, k, dw) in meas {
                if *k == 0.0 {
                    continue;
                }
                let root = (2.0 * k).sqrt();
                let mean = (s * rho).trace().re;
                let dy = 2.0 * root * mean * dt + dw;
                let s2 = s * s;
                m += s * re(root * dy);
                m += &s2 * re(0.5 * 2.0 * k * (dy * dy - dt) - 0.5 * 2.0 * k * dt);
            }
            for (l, r) in lindblad {
                m -= (l.adjoint() * l) * re(0.5 * r * dt);
            }
            if let Some(h) = hamiltonian {
                m -= h * i_dt;
            }
            let mut out = &m * rho * m.adjoint();
            for (l, r) in lindblad {
                out += l * rho * l.adjoint() * re(r * dt);
            }
            out
        }
    }
}

fn finish<D: Dim>(
    mut out: OMatrix<C64, D, D>,
    opts: &StepOptions,
) -> (OMatrix<C64, D, D>, f64, f64)
where
    DefaultAllocator: Allocator<D, D>,
{
    let herm = max_antihermitian(&out);
    if opts.rehermitize {
        out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    }
    let tr = trace_re(&out);
    if opts.renormalize && tr > 0.0 {
        out /= C64::new(tr, 0.0);
    }
    (out, (tr - 1.0).abs(), herm)
}

fn qubit_min_eigenvalue(m: &Matrix2<C64>) -> f64 {
    let tr = (m[(0, 0)] + m[(1, 1)]).re;
    let d = (m[(0, 0)] - m[(1, 1)]).re;
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)].conj()).norm();
    0.5 * (tr - (d * d + 4.0 * off * off).sqrt())
}

/// One Euler–Maruyama SME step, re-Hermitised and trace-normalised.
pub fn sme_step(
    rho: &DensityMatrix,
    measurements: &[MeasurementSetting],
    hamiltonian: Option<&DMatrix<C64>>,
    noise: &LindbladNoise,
    dws: &[f64],
    dt: f64,
) -> Result<DensityMatrix> {
    sme_step_with(
        rho,
        measurements,
        hamiltonian,
        noise,
        dws,
        dt,
        &StepOptions::euler_maruyama(),
    )
    .map(|(r, _)| r)
}

/// [`sme_step`] with a choice of scheme and stabilisation.
pub fn sme_step_with(
    rho: &DensityMatrix,
    measurements: &[MeasurementSetting],
    hamiltonian: Option<&DMatrix<C64>>,
    noise: &LindbladNoise,
    dws: &[f64],
    dt: f64,
    opts: &StepOptions,
) -> Result<(DensityMatrix, StepDiagnostics)> {
    let n = rho.dim();
    if dws.len() != measurements.len() {
        return Err(Error::ChannelMismatch {
            a: measurements.len(),
            b: dws.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    noise.validate(n)?;
    let mut meas = Vec::with_capacity(measurements.len());
    for (m, dw) in measurements.iter().zip(dws) {
        if !(m.strength >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "measurement strength {} < 0",
                m.strength
            )));
        }
        let s = m.observable.to_matrix();
        if s.nrows() != n {
            return Err(Error::InvalidParameter(format!(
                "observable is {}x{}, state is {n}x{n}",
                s.nrows(),
                s.ncols()
            )));
        }
        meas.push((s, m.strength, *dw));
    }
    let lind = noise.channels();
    let raw = raw_update(rho.matrix(), &meas, hamiltonian, &lind, dt, opts.scheme);
    if raw.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::IntegrationFailure {
            step: 0,
            time: 0.0,
            detail: "non-finite density matrix".into(),
        });
    }
    let (out, trace_drift, hermiticity_drift) = finish(raw, opts);
    let rho = DensityMatrix::from_unchecked(out);
    let min_eigenvalue = rho.min_eigenvalue();
    if min_eigenvalue < -POSITIVITY_TOLERANCE {
        return Err(Error::PositivityViolation { min_eigenvalue });
    }
    Ok((
        rho,
        StepDiagnostics {
            trace_drift,
            hermiticity_drift,
            min_eigenvalue,
        },
    ))
}

/// Closed-loop qubit integrator. The state vector is the Bloch vector.
///
/// Every step re-derives the measurement settings (and, for the Hamiltonian
/// protocols, the rotation) from the current state. The rotation rate is
/// `min(α_max, δ/dt)` so the state is not rotated past the target within a
/// step.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitController {
    pub kind: ProtocolKind,
    pub params: ControlParams,
    pub noise: NoiseParams,
    pub target: TargetSpec,
    pub scheme: SmeScheme,
    /// Overrides the adaptive strengths with a fixed perpendicular strength
    /// (used to isolate purification).
    pub frozen_strength: Option<f64>,
    lindblad: Vec<(Matrix2<C64>, f64)>,
}

impl QubitController {
    pub fn new(kind: ProtocolKind, params: ControlParams, noise: NoiseParams) -> Self {
        Self {
            kind,
            params,
            noise,
            target: TargetSpec::default(),
            scheme: SmeScheme::Kraus,
            frozen_strength: None,
            lindblad: qubit_channels(&noise),
        }
    }

    pub fn with_scheme(mut self, scheme: SmeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = target;
        self
    }

    pub fn with_frozen_strength(mut self, k: f64) -> Self {
        self.frozen_strength = Some(k);
        self
    }

    fn settings(&self, b: &BlochState) -> (Vec<(Vector3<f64>, f64)>, f64) {
        let r = reduced_coords_continuous(b, &self.target, 0.0);
        let mut axes = measurement_axes(self.kind, &r, &self.params, &self.target);
        if let Some(k) = self.frozen_strength {
            axes[0].1 = k;
        }
        (axes, r.delta())
    }

    fn rotation(&self, b: &BlochState, delta: f64, dt: f64) -> Option<Matrix2<C64>> {
        if !self.kind.uses_hamiltonian() || self.params.alpha_max == 0.0 {
            return None;
        }
        let (axis, defined) = control_hamiltonian_axis(b, &self.target);
        let axis = if defined {
            axis
        } else if b.vector().dot(&self.target.axis()) < 0.0 {
            -self.target.frame().e2
        } else {
            return None;
        };
        let angle = self.params.alpha_max.min(delta / dt) * dt;
        let (s, c) = (0.5 * angle).sin_cos();
        Some(Matrix2::identity() * C64::new(c, 0.0) - spin_along(&axis) * C64::new(0.0, s))
    }

    /// Advance a Bloch vector by one step.
    pub fn step_bloch(&self, b: &BlochState, dws: &[f64], dt: f64) -> Result<BlochState> {
        let (axes, delta) = self.settings(b);
        let meas: Vec<(Matrix2<C64>, f64, f64)> = axes
            .iter()
            .zip(dws)
            .map(|((n, k), dw)| (spin_along(n), *k, *dw))
            .collect();
        let rho = qubit_density(b);
        let raw = raw_update::<U2>(&rho, &meas, None, &self.lindblad, dt, self.scheme);
        let (mut out, _, _) = finish(raw, &StepOptions::default());
        if let Some(u) = self.rotation(b, delta, dt) {
            out = u * out * u.adjoint();
        }
        let min = qubit_min_eigenvalue(&out);
        if !min.is_finite() {
            return Err(Error::IntegrationFailure {
                step: 0,
                time: 0.0,
                detail: "non-finite density matrix".into(),
            });
        }
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::PositivityViolation {
                min_eigenvalue: min,
            });
        }
        let mut next = qubit_bloch(&out);
        let len = next.length();
        if len > 1.0 {
            next = BlochState::from_vector(&(next.vector() / len));
        }
        Ok(next)
    }

    /// Error probability `(1 − a·t)/2` of a Bloch state.
    pub fn error_probability(&self, b: &BlochState) -> f64 {
        bloch_error_probability(&b.vector(), &self.target.axis())
    }
}

impl Stepper for QubitController {
    fn dim(&self) -> usize {
        3
    }

    fn channels(&self) -> usize {
        match self.kind {
            ProtocolKind::DiffusionGradient | ProtocolKind::DiffusionGradientLinearized => 2,
            ProtocolKind::HamiltonianPerpendicular | ProtocolKind::HamiltonianParallel => 1,
        }
    }

    fn step(&self, x: &mut [f64], dw: &[f64], dt: f64) -> Result<()> {
        let b = BlochState::new_unchecked(x[0], x[1], x[2]);
        let n = self.step_bloch(&b, dw, dt)?;
        x.copy_from_slice(&[n.x, n.y, n.z]);
        Ok(())
    }
}

/// Recorded observables of a controlled qubit run.
pub const SME_RECORD: [&str; 3] = ["p_e", "delta", "a"];

/// Closed-loop qubit trajectory recording `(P_e, δ, a)`.
pub fn run_controlled_sme(
    controller: &QubitController,
    initial: &DensityMatrix,
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryPath> {
    run_controlled_inner(controller, initial, horizon, dt, stream, record_every, None)
}

/// [`run_controlled_sme`] under a tilted noise law, carrying log weights.
pub fn run_controlled_sme_tilted(
    controller: &QubitController,
    tilt: &dyn Tilt,
    initial: &DensityMatrix,
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryPath> {
    run_controlled_inner(controller, initial, horizon, dt, stream, record_every, Some(tilt))
}

fn run_controlled_inner(
    controller: &QubitController,
    initial: &DensityMatrix,
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
    tilt: Option<&dyn Tilt>,
) -> Result<TrajectoryPath> {
    controller.params.validate()?;
    controller.noise.validate()?;
    let b = crate::quantum::density_to_bloch(initial)?;
    let mut path = TrajectoryPath {
        times: Vec::new(),
        states: Vec::new(),
        dim: 3,
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        log_weights: tilt.map(|_| Vec::new()),
    };
    integrate_observed(
        controller,
        b.vector().as_slice(),
        horizon,
        dt,
        stream,
        record_every,
        tilt,
        |t, x, lw| {
            let s = BlochState::new_unchecked(x[0], x[1], x[2]);
            let r = reduced_coords_continuous(&s, &controller.target, 0.0);
            path.times.push(t);
            path.states
                .extend_from_slice(&[controller.error_probability(&s), r.delta(), r.length]);
            if let Some(w) = path.log_weights.as_mut() {
                w.push(lw);
            }
        },
    )?;
    Ok(path)
}

/// How the N-level control observable is oriented in the `(χ, χ⊥)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NLevelConvention {
    /// `Σ = |χ⟩⟨χ⊥| + |χ⊥⟩⟨χ|`: the tangent from `χ` toward `ψ`, which is the
    /// qubit perpendicular measurement for every `θ`.
    #[default]
    TowardTarget,
    /// `n = (sin 2θ, −cos 2θ, 0)`; agrees with the tangent only at `θ = π/4`.
    AsPrinted,
}

/// Frame `(χ', χ⊥, θ)` with `χ' = e^{iφ}χ` chosen so that
/// `ψ = cos θ χ' + sin θ χ⊥`, `θ ∈ [0, π/2]`.
pub fn target_frame(chi: &DVector<C64>, psi: &DVector<C64>) -> Result<(DVector<C64>, DVector<C64>, f64)> {
    let n = chi.len();
    if n < 2 || psi.len() != n {
        return Err(Error::InvalidParameter(format!(
            "state vectors must share a dimension >= 2 ({} vs {})",
            chi.len(),
            psi.len()
        )));
    }
    for v in [chi, psi] {
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "state vector norm {} != 1",
                v.norm()
            )));
        }
    }
    let ov = chi.dotc(psi);
    let mag = ov.norm().min(1.0);
    let chi = if mag > EPS_NUM {
        chi * (ov / mag)
    } else {
        chi.clone()
    };
    let theta = mag.acos();
    let resid = psi - &chi * C64::new(mag, 0.0);
    let rn = resid.norm();
    let perp = if rn > EPS_NUM {
        resid / C64::new(rn, 0.0)
    } else {
        // χ ≈ ψ: any orthogonal direction will do; pick the first basis
        // vector with a usable residual.
        (0..n)
            .map(|i| {
                let e = DVector::from_fn(n, |j, _| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
                &e - &chi * chi.dotc(&e)
            })
            .find(|r| r.norm() > 0.5)
            .map(|r| {
                let nr = r.norm();
                r / C64::new(nr, 0.0)
            })
            .expect("some basis vector has a large orthogonal residual")
    };
    Ok((chi, perp, theta))
}

/// `n·σ` on `span{χ, χ⊥}`, zero on the complement.
fn frame_operator(chi: &DVector<C64>, perp: &DVector<C64>, n: [f64; 3]) -> DMatrix<C64> {
    let cc = chi * chi.adjoint();
    let pp = perp * perp.adjoint();
    let cp = chi * perp.adjoint();
    let pc = perp * chi.adjoint();
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    (&cp + &pc) * re(n[0]) + (&pc * im(n[1]) - &cp * im(n[1])) + (cc - pp) * re(n[2])
}

/// Control observable for the N-level diffusion-gradient protocol.
pub fn nlevel_control_observable(chi: &DVector<C64>, psi: &DVector<C64>) -> Result<DMatrix<C64>> {
    nlevel_control_observable_with(chi, psi, NLevelConvention::default())
}

pub fn nlevel_control_observable_with(
    chi: &DVector<C64>,
    psi: &DVector<C64>,
    convention: NLevelConvention,
) -> Result<DMatrix<C64>> {
    let (chi, perp, theta) = target_frame(chi, psi)?;
    let n = match convention {
        NLevelConvention::TowardTarget => [1.0, 0.0, 0.0],
        NLevelConvention::AsPrinted => [(2.0 * theta).sin(), -(2.0 * theta).cos(), 0.0],
    };
    Ok(frame_operator(&chi, &perp, n))
}

/// `2|χ⟩⟨χ| − I`: `+1` on `χ`, `−1` on its complement.
pub fn purity_observable(chi: &DVector<C64>) -> DMatrix<C64> {
    let n = chi.len();
    let norm2 = chi.norm_squared();
    chi * chi.adjoint() * C64::new(2.0 / norm2, 0.0) - DMatrix::identity(n, n)
}

/// Top eigenvector of a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dominant {
    pub vector: DVector<C64>,
    pub eigenvalue: f64,
    /// The top two eigenvalues differ by less than `1e-10`.
    pub degenerate: bool,
}

/// Eigenvector of the largest eigenvalue, phase-fixed so its first
/// non-negligible component is real and positive.
pub fn dominant_eigenvector(rho: &DensityMatrix) -> Dominant {
    let h = (rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let top = order[0];
    let degenerate = order.len() > 1
        && (eig.eigenvalues[top] - eig.eigenvalues[order[1]]).abs() < 1e-10;
    let mut v: DVector<C64> = eig.eigenvectors.column(top).into_owned();
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-12).copied() {
        v *= c.conj() / c.norm();
    }
    let nv = v.norm();
    v /= C64::new(nv, 0.0);
    Dominant {
        vector: v,
        eigenvalue: eig.eigenvalues[top],
        degenerate,
    }
}

/// Orthonormal basis of the complement of unit vector `t`, by two passes
/// of Gram-Schmidt over the standard basis minus the element most aligned
/// with `t`.
fn orthonormal_complement(t: &DVector<C64>) -> Vec<DVector<C64>> {
    let n = t.len();
    let skip = (0..n)
        .max_by(|&i, &j| t[i].norm().total_cmp(&t[j].norm()))
        .unwrap_or(0);
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != skip) {
        let mut v = DVector::from_fn(n, |i, _| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        for _ in 0..2 {
            for u in std::iter::once(t).chain(basis.iter()) {
                let c = u.dotc(&v);
                v -= u * c;
            }
        }
        let norm = v.norm();
        basis.push(v / C64::new(norm, 0.0));
    }
    basis
}

/// Largest supported N for [`run_nlevel_control`].
pub const MAX_LEVELS: usize = 8;

/// N-level diffusion-gradient control toward `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct NLevelController {
    pub target: DVector<C64>,
    pub params: ControlParams,
    pub convention: NLevelConvention,
    pub scheme: SmeScheme,
}

impl NLevelController {
    pub fn new(target: DVector<C64>, params: ControlParams) -> Result<Self> {
        let n = target.len();
        if !(2..=MAX_LEVELS).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "N = {n} outside [2, {MAX_LEVELS}]"
            )));
        }
        params.validate()?;
        let norm = target.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero target vector".into()));
        }
        Ok(Self {
            target: target / C64::new(norm, 0.0),
            params,
            convention: NLevelConvention::default(),
            scheme: SmeScheme::Kraus,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// Population outside the target, summed over an orthonormal complement
    /// so that small values keep their relative precision.
    pub fn error_probability(&self, rho: &DensityMatrix) -> f64 {
        orthonormal_complement(&self.target)
            .iter()
            .map(|u| rho.overlap(u))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Settings for the current state: the control observable at `κδ²` and
    /// the purity observable at `μ`.
    pub fn settings(&self, rho: &DensityMatrix) -> Result<Vec<MeasurementSetting>> {
        let chi = dominant_eigenvector(rho).vector;
        let (_, _, theta) = target_frame(&chi, &self.target)?;
        let sigma = nlevel_control_observable_with(&chi, &self.target, self.convention)?;
        let k = measurement_strength(2.0 * theta, &self.params);
        Ok(vec![
            MeasurementSetting::matrix(sigma, k),
            MeasurementSetting::matrix(purity_observable(&chi), self.params.mu),
        ])
    }

    pub fn step(&self, rho: &DensityMatrix, dws: &[f64], dt: f64) -> Result<DensityMatrix> {
        let set = self.settings(rho)?;
        let opts = StepOptions {
            scheme: self.scheme,
            ..StepOptions::default()
        };
        sme_step_with(rho, &set, None, &LindbladNoise::none(), dws, dt, &opts).map(|(r, _)| r)
    }
}

/// Closed-loop N-level run recording `P_e = 1 − ⟨ψ|ρ|ψ⟩` (one component).
pub fn run_nlevel_control(
    controller: &NLevelController,
    initial: &DensityMatrix,
    horizon: f64,
    dt: f64,
    stream: &mut NoiseStream,
    record_every: usize,
) -> Result<TrajectoryPath> {
    if initial.dim() != controller.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state is {}-level, target is {}-level",
            initial.dim(),
            controller.dim()
        )));
    }
    if !(dt > 0.0) || !(horizon >= dt) {
        return Err(Error::InvalidParameter(format!(
            "need horizon >= dt > 0 (horizon {horizon}, dt {dt})"
        )));
    }
    let steps = (horizon / dt).round() as usize;
    let every = record_every.max(1);
    let mut rho = initial.clone();
    let mut path = TrajectoryPath {
        times: vec![0.0],
        states: vec![controller.error_probability(&rho)],
        dim: 1,
        seed: stream.seed(),
        stream_index: stream.stream_index(),
        log_weights: None,
    };
    let mut dw = [0.0; 2];
    for s in 1..=steps {
        stream.fill_increments(dt, &mut dw);
        rho = controller.step(&rho, &dw, dt).map_err(|e| match e {
            Error::IntegrationFailure { detail, .. } => Error::IntegrationFailure {
                step: s,
                time: s as f64 * dt,
                detail,
            },
            other => other,
        })?;
        if s % every == 0 || s == steps {
            path.times.push(s as f64 * dt);
            path.states.push(controller.error_probability(&rho));
        }
    }
    Ok(path)
}

/// Haar-random pure state of dimension `n`.
pub fn random_pure_state(n: usize, stream: &mut NoiseStream) -> DVector<C64> {
    let v = DVector::from_fn(n, |_, _| C64::new(stream.standard_normal(), stream.standard_normal()));
    let nv = v.norm();
    v / C64::new(nv, 0.0)
}
