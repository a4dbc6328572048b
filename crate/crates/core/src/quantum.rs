//! Qubit representations: Bloch vectors, density matrices and the reduced
//! `(δ, a)` chart in which the control law is written.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use num_complex::Complex64;

use crate::{Error, Result, EPS_NUM};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// `σ₋ = (σx − iσy)/2`, which maps `|0⟩` (spin up, the target) to `|1⟩`.
pub fn sigma_minus() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, ONE, ZERO)
}

/// `n·σ` for a real 3-vector `n`.
pub fn spin_along(n: &Vector3<f64>) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(n.z, 0.0),
        C64::new(n.x, -n.y),
        C64::new(n.x, n.y),
        C64::new(-n.z, 0.0),
    )
}

/// Bloch vector of a qubit, `ρ = (I + a·σ)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    /// Validated constructor: the vector length may exceed 1 by at most [`EPS_NUM`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        s.validate()?;
        Ok(s)
    }

    pub const fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new_unchecked(v.x, v.y, v.z)
    }

    /// The pure state `cos θ|0⟩ + sin θ|1⟩`, which has Bloch vector `(sin 2θ, 0, cos 2θ)`.
    pub fn from_theta(theta: f64) -> Self {
        let v = bloch_axis_of_theta(theta);
        Self::from_vector(&v)
    }

    /// State at signed angle `x` from the `+z` target with length `a`, in the xz-plane.
    pub fn from_signed_angle(x: f64, a: f64) -> Self {
        Self::new_unchecked(a * x.sin(), 0.0, a * x.cos())
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn length(&self) -> f64 {
        self.vector().norm()
    }

    /// `Δ = 1 − a`, how far the state is from pure.
    pub fn mixedness(&self) -> f64 {
        1.0 - self.length()
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.length();
        if !a.is_finite() || a > 1.0 + EPS_NUM {
            return Err(Error::InvalidState { length: a });
        }
        Ok(())
    }
}

/// Bloch vector of `|θ⟩ = cos θ|0⟩ + sin θ|1⟩`.
pub fn bloch_axis_of_theta(theta: f64) -> Vector3<f64> {
    Vector3::new((2.0 * theta).sin(), 0.0, (2.0 * theta).cos())
}

/// Axis of `σθ = cos(2θ)σx − sin(2θ)σz`.
///
/// It is perpendicular to the Bloch vector of `|θ⟩` and points along the
/// direction of increasing `θ`.
pub fn measured_spin_axis(theta: f64) -> Vector3<f64> {
    Vector3::new((2.0 * theta).cos(), 0.0, -(2.0 * theta).sin())
}

/// Direction of the target state on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    axis: Vector3<f64>,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            axis: Vector3::z(),
        }
    }
}

impl TargetSpec {
    pub fn new(axis: Vector3<f64>) -> Result<Self> {
        if !((axis.norm() - 1.0).abs() <= EPS_NUM) {
            return Err(Error::InvalidParameter(format!(
                "target axis must be a unit vector (norm {})",
                axis.norm()
            )));
        }
        Ok(Self { axis })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    /// Orthonormal frame `(e1, e2, t)` with `t` the target axis.
    ///
    /// For the default target this is the standard basis, so local and global
    /// coordinates coincide.
    pub fn frame(&self) -> Frame {
        let t = self.axis;
        let reference = if t.z.abs() < 0.9 {
            Vector3::z()
        } else {
            Vector3::x()
        };
        let e1 = (reference - t * reference.dot(&t)).normalize();
        let e1 = if t.z.abs() >= 0.9 && t.z < 0.0 { -e1 } else { e1 };
        let e2 = t.cross(&e1);
        Frame { e1, e2, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub t: Vector3<f64>,
}

impl Frame {
    pub fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(v.dot(&self.e1), v.dot(&self.e2), v.dot(&self.t))
    }

    pub fn to_global(&self, l: &Vector3<f64>) -> Vector3<f64> {
        self.e1 * l.x + self.e2 * l.y + self.t * l.z
    }
}

/// Reduced coordinates: signed angle on the great circle through the target,
/// Bloch length, and the azimuth of that circle about the target axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// Angle from the target on `(−π, π]`; `δ = |signed_angle|`.
    pub signed_angle: f64,
    pub length: f64,
    /// Azimuth of the plane containing state and target, on `(−π/2, π/2]`.
    pub azimuth: f64,
}

impl ReducedState {
    pub fn delta(&self) -> f64 {
        self.signed_angle.abs()
    }

    /// `θ = signed_angle / 2`, the state parameter in `cos θ|0⟩ + sin θ|1⟩`.
    pub fn theta(&self) -> f64 {
        self.signed_angle / 2.0
    }

    pub fn mixedness(&self) -> f64 {
        1.0 - self.length
    }

    /// Unit vector in the state's plane, perpendicular to the target.
    pub fn plane_axis(&self, target: &TargetSpec) -> Vector3<f64> {
        let f = target.frame();
        f.e1 * self.azimuth.cos() + f.e2 * self.azimuth.sin()
    }

    /// Unit vector perpendicular to the Bloch vector, in the target plane,
    /// pointing toward increasing signed angle (the `σθ` axis).
    pub fn perpendicular_axis(&self, target: &TargetSpec) -> Vector3<f64> {
        let e = self.plane_axis(target);
        let x = self.signed_angle;
        e * x.cos() - target.axis() * x.sin()
    }

    /// Unit vector along the Bloch vector.
    pub fn parallel_axis(&self, target: &TargetSpec) -> Vector3<f64> {
        let e = self.plane_axis(target);
        let x = self.signed_angle;
        e * x.sin() + target.axis() * x.cos()
    }

    pub fn to_bloch(&self, target: &TargetSpec) -> BlochState {
        BlochState::from_vector(&(self.parallel_axis(target) * self.length))
    }
}

/// Reduced coordinates of a Bloch state relative to `target`.
///
/// Fails with [`Error::Degenerate`] when the Bloch vector is shorter than
/// [`EPS_NUM`]; use [`reduced_coords_continuous`] inside integrators.
pub fn reduced_coords(state: &BlochState, target: &TargetSpec) -> Result<ReducedState> {
    state.validate()?;
    let a = state.length();
    if a < EPS_NUM {
        return Err(Error::Degenerate("Bloch vector has zero length"));
    }
    Ok(reduced_unchecked(state, target, a))
}

/// Like [`reduced_coords`], but a zero Bloch vector keeps `previous_angle`
/// so that the control law stays continuous.
pub fn reduced_coords_continuous(
    state: &BlochState,
    target: &TargetSpec,
    previous_angle: f64,
) -> ReducedState {
    let a = state.length();
    if a < EPS_NUM {
        return ReducedState {
            signed_angle: previous_angle,
            length: a,
            azimuth: 0.0,
        };
    }
    reduced_unchecked(state, target, a)
}

fn reduced_unchecked(state: &BlochState, target: &TargetSpec, a: f64) -> ReducedState {
    let local = target.frame().to_local(&state.vector());
    let perp = local.x.hypot(local.y);
    let delta = perp.atan2(local.z);
    let mut azimuth = if perp > 0.0 {
        local.y.atan2(local.x)
    } else {
        0.0
    };
    let mut sign = 1.0;
    if azimuth > std::f64::consts::FRAC_PI_2 {
        azimuth -= std::f64::consts::PI;
        sign = -1.0;
    } else if azimuth <= -std::f64::consts::FRAC_PI_2 {
        azimuth += std::f64::consts::PI;
        sign = -1.0;
    }
    ReducedState {
        signed_angle: sign * delta,
        length: a,
        azimuth,
    }
}

/// Probability of *not* being in the target state, `(1 − a cos δ)/2`.
pub fn error_probability(delta: f64, a: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    if !(delta >= -EPS_NUM && delta <= pi + EPS_NUM) {
        return Err(Error::Domain(format!("delta = {delta} not in [0, π]")));
    }
    if !(-EPS_NUM..=1.0 + EPS_NUM).contains(&a) {
        return Err(Error::Domain(format!("a = {a} not in [0, 1]")));
    }
    Ok(error_probability_unchecked(delta, a))
}

/// `(1 − a cos δ)/2` written to keep relative precision as `δ → 0`.
pub fn error_probability_unchecked(delta: f64, a: f64) -> f64 {
    let s = (0.5 * delta).sin();
    0.5 * (1.0 - a) + a * s * s
}

/// Error probability of a Bloch vector relative to a unit target axis.
pub fn bloch_error_probability(b: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    let a = b.norm();
    let delta = b.cross(target).norm().atan2(b.dot(target));
    error_probability_unchecked(delta, a.min(1.0)).clamp(0.0, 1.0)
}

/// N×N density matrix: Hermitian, unit trace, positive semidefinite
/// (each within [`EPS_NUM`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return Err(Error::InvalidDensity(format!(
                "expected square matrix of size >= 2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let rho = Self(m);
        let herm = rho.hermiticity_error();
        if herm > EPS_NUM {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (max |ρ − ρ†| = {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > EPS_NUM {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let min = rho.min_eigenvalue();
        if min < -EPS_NUM {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Wrap a matrix without validation (fault injection, intermediate states).
    pub fn from_unchecked(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensity("zero state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Ok(Self(&v * v.adjoint()))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(DMatrix::identity(n, n) / C64::new(n as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.0 - self.0.adjoint();
        d.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalised `ψ`.
    pub fn overlap(&self, psi: &DVector<C64>) -> f64 {
        (psi.adjoint() * &self.0 * psi)[(0, 0)].re
    }

    pub fn as_qubit(&self) -> Option<Matrix2<C64>> {
        (self.dim() == 2).then(|| self.0.fixed_view::<2, 2>(0, 0).into_owned())
    }
}

/// `ρ = (I + a·σ)/2`.
pub fn bloch_to_density(state: &BlochState) -> Result<DensityMatrix> {
    state.validate()?;
    Ok(DensityMatrix::from_unchecked(DMatrix::from_fn(2, 2, |r, c| {
        qubit_density(state)[(r, c)]
    })))
}

pub(crate) fn qubit_density(state: &BlochState) -> Matrix2<C64> {
    let half = C64::new(0.5, 0.0);
    (Matrix2::identity() + spin_along(&state.vector())) * half
}

/// Inverse of [`bloch_to_density`]: `a_i = tr(σ_i ρ)`.
pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochState> {
    if rho.dim() != 2 {
        return Err(Error::InvalidDensity(format!(
            "expected a 2x2 matrix, got {}x{}",
            rho.dim(),
            rho.dim()
        )));
    }
    let herm = rho.hermiticity_error();
    if herm > EPS_NUM {
        return Err(Error::InvalidDensity(format!(
            "not Hermitian (max |ρ − ρ†| = {herm:.3e})"
        )));
    }
    let tr = rho.trace();
    if (tr - 1.0).abs() > EPS_NUM {
        return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
    }
    Ok(qubit_bloch(&rho.as_qubit().expect("checked 2x2")))
}

pub(crate) fn qubit_bloch(m: &Matrix2<C64>) -> BlochState {
    BlochState::new_unchecked(
        2.0 * m[(1, 0)].re,
        2.0 * m[(1, 0)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    )
}

/// What is measured: a qubit spin axis or a general Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    BlochAxis(Vector3<f64>),
    Matrix(DMatrix<C64>),
}

impl Observable {
    pub fn to_matrix(&self) -> DMatrix<C64> {
        match self {
            Observable::BlochAxis(n) => {
                let m = spin_along(n);
                DMatrix::from_fn(2, 2, |r, c| m[(r, c)])
            }
            Observable::Matrix(m) => m.clone(),
        }
    }
}

/// An observable together with its measurement strength (units 1/time).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub observable: Observable,
    pub strength: f64,
}

impl MeasurementSetting {
    pub fn axis(axis: Vector3<f64>, strength: f64) -> Self {
        Self {
            observable: Observable::BlochAxis(axis),
            strength,
        }
    }

    pub fn matrix(observable: DMatrix<C64>, strength: f64) -> Self {
        Self {
            observable: Observable::Matrix(observable),
            strength,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn dm(entries: [[C64; 2]; 2]) -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_fn(2, 2, |r, c| entries[r][c])).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spin_axis_examples() {
        assert_relative_eq!(measured_spin_axis(0.0), Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(
            measured_spin_axis(FRAC_PI_4),
            Vector3::new(0.0, 0.0, -1.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            measured_spin_axis(FRAC_PI_8),
            Vector3::new(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bloch_to_density_examples() {
        let up = bloch_to_density(&BlochState::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(up.matrix()[(0, 0)].re, 1.0);
        assert_relative_eq!(up.matrix()[(1, 1)].re, 0.0);

        let mixed = bloch_to_density(&BlochState::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(mixed.matrix()[(0, 0)].re, 0.5);
        assert_relative_eq!(mixed.matrix()[(0, 1)].norm(), 0.0);

        let plus = bloch_to_density(&BlochState::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                assert_relative_eq!(plus.matrix()[(r, col)].re, 0.5);
            }
        }
    }

    #[test]
    fn bloch_to_density_rejects_long_vectors() {
        let s = BlochState::new_unchecked(0.0, 0.0, 1.0 + 1e-6);
        assert!(matches!(
            bloch_to_density(&s),
            Err(Error::InvalidState { .. })
        ));
    }

    #[test]
    fn density_to_bloch_examples() {
        let b = density_to_bloch(&dm([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]))
            .unwrap();
        assert_eq!(b, BlochState::new_unchecked(0.0, 0.0, 1.0));

        let b = density_to_bloch(&dm([[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.5, 0.0)]]))
            .unwrap();
        assert_relative_eq!(b.vector(), Vector3::new(0.0, 1.0, 0.0));

        let b = density_to_bloch(&dm([
            [c(0.75, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.25, 0.0)],
        ]))
        .unwrap();
        assert_relative_eq!(b.vector(), Vector3::new(0.0, 0.0, 0.5));
    }

    #[test]
    fn density_to_bloch_rejects_bad_trace() {
        let raw = DensityMatrix::from_unchecked(DMatrix::from_diagonal_element(2, 2, c(0.6, 0.0)));
        assert!(matches!(
            density_to_bloch(&raw),
            Err(Error::InvalidDensity(_))
        ));
    }

    #[test]
    fn reduced_coords_examples() {
        let t = TargetSpec::default();
        let r = reduced_coords(&BlochState::new(0.0, 0.0, 1.0).unwrap(), &t).unwrap();
        assert_eq!((r.delta(), r.length), (0.0, 1.0));

        let r = reduced_coords(&BlochState::new(0.0, 0.0, -0.8).unwrap(), &t).unwrap();
        assert_relative_eq!(r.delta(), PI);
        assert_relative_eq!(r.length, 0.8);

        let r = reduced_coords(&BlochState::new(1.0, 0.0, 0.0).unwrap(), &t).unwrap();
        assert_relative_eq!(r.delta(), FRAC_PI_2);
        assert_relative_eq!(r.length, 1.0);
    }

    #[test]
    fn reduced_coords_keeps_circle_orientation() {
        let t = TargetSpec::default();
        let r = reduced_coords(&BlochState::from_signed_angle(-0.3, 0.9), &t).unwrap();
        assert_relative_eq!(r.signed_angle, -0.3, epsilon = 1e-15);
        assert_relative_eq!(r.azimuth, 0.0);
        let back = r.to_bloch(&t);
        assert_relative_eq!(back.vector(), BlochState::from_signed_angle(-0.3, 0.9).vector(), epsilon = 1e-15);
    }

    #[test]
    fn reduced_coords_zero_vector() {
        let t = TargetSpec::default();
        let zero = BlochState::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            reduced_coords(&zero, &t),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(reduced_coords_continuous(&zero, &t, 0.7).signed_angle, 0.7);
    }

    #[test]
    fn reduced_coords_general_target() {
        let t = TargetSpec::new(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let r = reduced_coords(&BlochState::new(0.0, 0.0, 1.0).unwrap(), &t).unwrap();
        assert_relative_eq!(r.delta(), FRAC_PI_2);
        let back = r.to_bloch(&t);
        assert_relative_eq!(back.vector(), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn error_probability_examples() {
        assert_eq!(error_probability(0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(error_probability(PI, 1.0).unwrap(), 1.0);
        assert!((error_probability(0.02, 1.0).unwrap() - 1.0e-4).abs() < 1e-8);
        assert_eq!(error_probability(1.3, 0.0).unwrap(), 0.5);
        assert!(error_probability(-0.1, 1.0).is_err());
        assert!(error_probability(0.1, 1.5).is_err());
    }

    #[test]
    fn steady_state_expansion() {
        // (1 − a cos δ)/2 at a = 1 − Δ, small δ, is Δ/2 + δ²/4 to leading order.
        let (d, delta) = (1e-4, 1e-2);
        let exact = error_probability(delta, 1.0 - d).unwrap();
        let approx = d / 2.0 + delta * delta / 4.0;
        assert!((exact - approx).abs() < 1e-3 * approx);
    }

    #[test]
    fn as_qubit_roundtrip() {
        let s = BlochState::new(0.3, -0.2, 0.5).unwrap();
        let rho = bloch_to_density(&s).unwrap();
        assert_relative_eq!(qubit_bloch(&rho.as_qubit().unwrap()).vector(), s.vector(), epsilon = 1e-15);
        assert!(rho.min_eigenvalue() > 0.0);
    }

    proptest! {
        #[test]
        fn measurement_axis_is_perpendicular_to_state(theta in -10.0f64..10.0) {
            let d = measured_spin_axis(theta).dot(&bloch_axis_of_theta(theta));
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn error_probability_complements(delta in 0.0..PI) {
            let s = error_probability(delta, 1.0).unwrap() + error_probability(PI - delta, 1.0).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn error_probability_monotone(d1 in 0.0..PI, d2 in 0.0..PI, a in 0.0..1.0f64) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(error_probability(lo, a).unwrap() <= error_probability(hi, a).unwrap() + 1e-15);
        }

        #[test]
        fn error_probability_decreases_with_purity(d in 0.0..FRAC_PI_2, a1 in 0.0..1.0f64, a2 in 0.0..1.0f64) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(error_probability(d, hi).unwrap() <= error_probability(d, lo).unwrap() + 1e-15);
        }

        #[test]
        fn density_roundtrip(
            (x, y, z) in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
                .prop_filter("inside ball", |(x, y, z)| x * x + y * y + z * z <= 1.0)
        ) {
            let s = BlochState::new(x, y, z).unwrap();
            let back = density_to_bloch(&bloch_to_density(&s).unwrap()).unwrap();
            prop_assert!((back.vector() - s.vector()).norm() < EPS_NUM);
        }

        #[test]
        fn reduced_roundtrip_in_plane(x in -3.1f64..3.1, a in 0.01..1.0f64) {
            let t = TargetSpec::default();
            let r = reduced_coords(&BlochState::from_signed_angle(x, a), &t).unwrap();
            prop_assert!((r.signed_angle - x).abs() < 1e-12);
            prop_assert!((r.length - a).abs() < 1e-12);
        }
    }
}
