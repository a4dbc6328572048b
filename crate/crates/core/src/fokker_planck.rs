//! One-dimensional Fokker–Planck solver
//! `∂P/∂t = −∂J/∂x`, `J = (v − ½∂D/∂x)P − ½D ∂P/∂x`.
//!
//! The explicit finite-volume scheme writes the flux as `vP − ½∂(DP)/∂x`,
//! with a minmod-limited upwind reconstruction for `vP`, central differences
//! for `DP` and SSP-RK2 in time. Mass is conserved to rounding on periodic
//! and reflecting grids and the scheme keeps `P ≥ 0` under the enforced
//! step bound.
//!
//! [`LogChart`] maps the noiseless control problem `dδ = √(8κ)δ dW` to
//! `y = ln δ`, where it becomes constant drift `−4κ` and constant diffusion
//! `8κ` with a reflecting edge at `ln π`. A uniform grid in `δ` cannot
//! resolve the log-normal collapse onto `δ = 0`, so rates and densities are
//! computed on this chart.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Minimum number of cells.
pub const MIN_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero flux through the edge.
    Reflecting,
    /// Empty ghost cell beyond the edge; mass leaving is lost.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Periodic,
    Open { left: Boundary, right: Boundary },
}

/// Uniform cell-centred grid on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lower: f64,
    pub upper: f64,
    pub cells: usize,
    pub kind: GridKind,
}

impl Grid1D {
    pub fn periodic(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::build(lower, upper, cells, GridKind::Periodic)
    }

    pub fn open(lower: f64, upper: f64, cells: usize, left: Boundary, right: Boundary) -> Result<Self> {
        Self::build(lower, upper, cells, GridKind::Open { left, right })
    }

    fn build(lower: f64, upper: f64, cells: usize, kind: GridKind) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bad grid interval [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            cells,
            kind,
        })
    }

    /// The signed-angle circle `(−π, π]`.
    pub fn circle(cells: usize) -> Result<Self> {
        Self::periodic(-PI, PI, cells)
    }

    pub fn h(&self) -> f64 {
        (self.upper - self.lower) / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lower + (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.node(i)).collect()
    }

    /// Sample a function at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.cells).map(|i| f(self.node(i))).collect()
    }

    fn check(&self, name: &str, field: &[f64]) -> Result<()> {
        if field.len() != self.cells {
            return Err(Error::GridMismatch(format!(
                "{name} has {} values, grid has {} cells",
                field.len(),
                self.cells
            )));
        }
        Ok(())
    }
}

/// Cell averages of a probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl DensityField {
    /// Requires `P ≥ 0` and unit mass within `1e-8`.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        grid.check("density", &values)?;
        if values.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("density must be finite and >= 0".into()));
        }
        let f = Self { grid, values };
        let m = f.mass();
        if (m - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("density has mass {m}, expected 1")));
        }
        Ok(f)
    }

    /// Rescale nonnegative values to unit mass.
    pub fn normalized(grid: Grid1D, mut values: Vec<f64>) -> Result<Self> {
        grid.check("density", &values)?;
        let m: f64 = values.iter().sum::<f64>() * grid.h();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter("density has no mass".into()));
        }
        for v in &mut values {
            *v /= m;
        }
        Self::new(grid, values)
    }

    /// Gaussian bump; periodic grids sum the wrapped images.
    pub fn gaussian(grid: Grid1D, center: f64, width: f64) -> Result<Self> {
        let len = grid.upper - grid.lower;
        let images: &[f64] = match grid.kind {
            GridKind::Periodic => &[-2.0, -1.0, 0.0, 1.0, 2.0],
            GridKind::Open { .. } => &[0.0],
        };
        let v = grid.sample(|x| {
            images
                .iter()
                .map(|k| {
                    let z = (x - center - k * len) / width;
                    (-0.5 * z * z).exp()
                })
                .sum()
        });
        Self::normalized(grid, v)
    }

    /// Point mass regularised as a Gaussian of width `3h`.
    pub fn point_mass(grid: Grid1D, at: f64) -> Result<Self> {
        Self::gaussian(grid, at, 3.0 * grid.h())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        crate::numeric::pairwise_sum(&self.values) * self.grid.h()
    }

    /// `∫ w P dx` by the midpoint rule.
    pub fn expectation(&self, weight: &[f64]) -> f64 {
        let prod: Vec<f64> = self.values.iter().zip(weight).map(|(p, w)| p * w).collect();
        crate::numeric::pairwise_sum(&prod) * self.grid.h()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn neighbours(grid: &Grid1D, i: usize) -> (Option<usize>, Option<usize>) {
    let m = grid.cells;
    match grid.kind {
        GridKind::Periodic => (Some((i + m - 1) % m), Some((i + 1) % m)),
        GridKind::Open { .. } => (i.checked_sub(1), (i + 1 < m).then_some(i + 1)),
    }
}

/// `J = (v − ½∂D/∂x)P − ½D ∂P/∂x` at the cell centres, central differences
/// (one-sided at open edges).
pub fn probability_current(p: &DensityField, v: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let g = p.grid;
    g.check("v", v)?;
    g.check("D", d)?;
    let h = g.h();
    let pv = &p.values;
    let deriv = |f: &[f64], i: usize| match neighbours(&g, i) {
        (Some(l), Some(r)) => (f[r] - f[l]) / (2.0 * h),
        (None, Some(r)) => (f[r] - f[i]) / h,
        (Some(l), None) => (f[i] - f[l]) / h,
        (None, None) => 0.0,
    };
    Ok((0..g.cells)
        .map(|i| (v[i] - 0.5 * deriv(d, i)) * pv[i] - 0.5 * d[i] * deriv(pv, i))
        .collect())
}

/// Largest stable step: `h²/(2 max D)` and `h/(4 max|v|)`.
pub fn stability_bound(grid: &Grid1D, v: &[f64], d: &[f64]) -> f64 {
    let h = grid.h();
    let dmax = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let vmax = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut bound = f64::INFINITY;
    if dmax > 0.0 {
        bound = bound.min(h * h / (2.0 * dmax));
    }
    if vmax > 0.0 {
        bound = bound.min(h / (4.0 * vmax));
    }
    bound
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Explicit solver holding the coefficient fields.
#[derive(Debug, Clone)]
pub struct FpSolver {
    grid: Grid1D,
    v: Vec<f64>,
    d: Vec<f64>,
    dt: f64,
    flux: Vec<f64>,
    stage: Vec<f64>,
    stage2: Vec<f64>,
}

impl FpSolver {
    /// Fails with [`Error::StabilityViolation`] if `dt` exceeds
    /// [`stability_bound`].
    pub fn new(grid: Grid1D, v: Vec<f64>, d: Vec<f64>, dt: f64) -> Result<Self> {
        grid.check("v", &v)?;
        grid.check("D", &d)?;
        if d.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter("diffusion must be >= 0".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let bound = stability_bound(&grid, &v, &d);
        if dt > bound {
            return Err(Error::StabilityViolation { dt, bound });
        }
        Ok(Self {
            flux: vec![0.0; grid.cells + 1],
            stage: vec![0.0; grid.cells],
            stage2: vec![0.0; grid.cells],
            grid,
            v,
            d,
            dt,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Interface fluxes: `flux[j]` sits on the left face of cell `j`
    /// (`flux[m]` is the right face of the last cell on open grids).
    fn fluxes(&mut self, p: &[f64]) {
        let g = self.grid;
        let m = g.cells;
        let h = g.h();
        let (v, d) = (&self.v, &self.d);
        let periodic = matches!(g.kind, GridKind::Periodic);
        let at = |i: isize| -> Option<usize> {
            if periodic {
                Some(i.rem_euclid(m as isize) as usize)
            } else if i >= 0 && (i as usize) < m {
                Some(i as usize)
            } else {
                None
            }
        };
        let val = |i: isize| at(i).map_or(0.0, |k| p[k]);
        let faces = if periodic { m } else { m + 1 };
        for j in 0..faces {
            let ji = j as isize;
            let (l, r) = (at(ji - 1), at(ji));
            let f = match (l, r) {
                (Some(l), Some(r)) => {
                    let vf = 0.5 * (v[l] + v[r]);
                    let pl = p[l] + 0.5 * minmod(p[l] - val(ji - 2), p[r] - p[l]);
                    let pr = p[r] - 0.5 * minmod(p[r] - p[l], val(ji + 1) - p[r]);
                    let adv = vf.max(0.0) * pl + vf.min(0.0) * pr;
                    adv - 0.5 * (d[r] * p[r] - d[l] * p[l]) / h
                }
                (None, Some(r)) => match g.kind {
                    GridKind::Open {
                        left: Boundary::Outflow,
                        ..
                    } => v[r].min(0.0) * p[r] - 0.5 * d[r] * p[r] / h,
                    _ => 0.0,
                },
                (Some(l), None) => match g.kind {
                    GridKind::Open {
                        right: Boundary::Outflow,
                        ..
                    } => v[l].max(0.0) * p[l] + 0.5 * d[l] * p[l] / h,
                    _ => 0.0,
                },
                (None, None) => 0.0,
            };
            self.flux[j] = f;
        }
        if periodic {
            self.flux[m] = self.flux[0];
        }
    }

    fn euler(&mut self, p: &[f64], out: &mut [f64]) {
        self.fluxes(p);
        let r = self.dt / self.grid.h();
        for i in 0..self.grid.cells {
            out[i] = p[i] - r * (self.flux[i + 1] - self.flux[i]);
        }
    }

    /// One SSP-RK2 (Heun) step in place.
    pub fn step(&mut self, p: &mut [f64]) {
        let mut s1 = std::mem::take(&mut self.stage);
        let mut s2 = std::mem::take(&mut self.stage2);
        self.euler(p, &mut s1);
        self.euler(&s1, &mut s2);
        for i in 0..p.len() {
            p[i] = 0.5 * (p[i] + s2[i]);
        }
        self.stage = s1;
        self.stage2 = s2;
    }

    /// Advance `field` by `steps` steps.
    pub fn advance(&mut self, field: &mut DensityField, steps: usize) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch("field and solver grids differ".into()));
        }
        for _ in 0..steps {
            self.step(&mut field.values);
        }
        Ok(())
    }

    /// Weighted integrals `∫ w P` at each of `times` (ascending, from 0).
    /// The step is shrunk so that every requested time is hit exactly.
    pub fn weighted_series(
        &mut self,
        p0: &DensityField,
        weight: &[f64],
        times: &[f64],
    ) -> Result<Vec<f64>> {
        self.grid.check("weight", weight)?;
        let mut field = p0.clone();
        let mut now = 0.0;
        let base_dt = self.dt;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t < now - 1e-12 {
                return Err(Error::InvalidParameter("times must be ascending".into()));
            }
            let span = t - now;
            if span > 0.0 {
                let n = (span / base_dt).ceil().max(1.0) as usize;
                self.dt = span / n as f64;
                self.advance(&mut field, n)?;
                now = t;
            }
            out.push(field.expectation(weight));
        }
        self.dt = base_dt;
        Ok(out)
    }
}

/// Evolve `p0` to `horizon` with steps of at most `dt`.
pub fn fp_evolve(p0: &DensityField, v: &[f64], d: &[f64], horizon: f64, dt: f64) -> Result<DensityField> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative horizon {horizon}")));
    }
    let mut solver = FpSolver::new(p0.grid, v.to_vec(), d.to_vec(), dt)?;
    let mut field = p0.clone();
    if horizon > 0.0 {
        let n = (horizon / dt).ceil() as usize;
        solver.dt = horizon / n as f64;
        solver.advance(&mut field, n)?;
    }
    Ok(field)
}

/// How [`decay_rate_from_fp`] extracts the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    /// Log-slope of successive differences of the weighted integral.
    Evolution,
    /// Smallest nonzero decay eigenvalue of the discrete generator.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    /// Time between slope evaluations (and the unit of the tolerance).
    pub time_unit: f64,
    /// Relative slope change per unit time that counts as converged.
    pub tolerance: f64,
    pub max_horizon: f64,
    pub dt: f64,
}

impl DecayOptions {
    /// Defaults for rates measured in units of `1/time_unit`.
    pub fn new(time_unit: f64, dt: f64) -> Self {
        Self {
            time_unit,
            tolerance: 1e-4,
            max_horizon: 50.0 * time_unit,
            dt,
        }
    }
}

/// Asymptotic decay rate of `∫ w P` (or of its approach to a constant).
pub fn decay_rate_from_fp(
    p0: &DensityField,
    v: &[f64],
    d: &[f64],
    weight: &[f64],
    method: RateMethod,
    opts: &DecayOptions,
) -> Result<f64> {
    match method {
        RateMethod::Spectral => smallest_decay_eigenvalue(&p0.grid, v, d),
        RateMethod::Evolution => {
            let mut solver = FpSolver::new(p0.grid, v.to_vec(), d.to_vec(), opts.dt)?;
            p0.grid.check("weight", weight)?;
            let mut field = p0.clone();
            let steps = (opts.time_unit / opts.dt).ceil() as usize;
            solver.dt = opts.time_unit / steps as f64;
            let mut w_prev = field.expectation(weight);
            let mut diff_prev: Option<f64> = None;
            let mut slope_prev: Option<f64> = None;
            let mut t = 0.0;
            while t < opts.max_horizon - 1e-12 {
                solver.advance(&mut field, steps)?;
                t += opts.time_unit;
                let w = field.expectation(weight);
                let diff = (w - w_prev).abs();
                w_prev = w;
                let scale = w.abs().max(f64::MIN_POSITIVE);
                if diff <= 1e-14 * scale && diff_prev.is_none_or(|p| p <= 1e-14 * scale) {
                    if diff_prev.is_some() {
                        return Ok(0.0);
                    }
                    diff_prev = Some(diff);
                    continue;
                }
                if let Some(dp) = diff_prev.filter(|p| *p > 0.0) {
                    let slope = (dp / diff).ln() / opts.time_unit;
                    if let Some(sp) = slope_prev {
                        if (slope - sp).abs() < opts.tolerance * slope.abs() {
                            return Ok(slope);
                        }
                    }
                    slope_prev = Some(slope);
                }
                diff_prev = Some(diff);
            }
            Err(Error::NoConvergence {
                horizon: opts.max_horizon,
            })
        }
    }
}

/// Dense generator `A` of `dP/dt = A P` with central fluxes.
pub fn generator_matrix(grid: &Grid1D, v: &[f64], d: &[f64]) -> Result<DMatrix<f64>> {
    grid.check("v", v)?;
    grid.check("D", d)?;
    let m = grid.cells;
    let h = grid.h();
    let mut a = DMatrix::zeros(m, m);
    // Face between cells l and r contributes flux F = c_l P_l + c_r P_r.
    let mut add_face = |l: Option<usize>, r: Option<usize>, cl: f64, cr: f64| {
        // dP_l -= F/h, dP_r += F/h
        for (cell, sign) in [(l, -1.0), (r, 1.0)] {
            if let Some(c) = cell {
                if let Some(li) = l {
                    a[(c, li)] += sign * cl / h;
                }
                if let Some(ri) = r {
                    a[(c, ri)] += sign * cr / h;
                }
            }
        }
    };
    let periodic = matches!(grid.kind, GridKind::Periodic);
    let faces = if periodic { m } else { m + 1 };
    for j in 0..faces {
        let l = if j == 0 {
            periodic.then_some(m - 1)
        } else {
            Some(j - 1)
        };
        let r = if j == m { None } else { Some(j) };
        match (l, r) {
            (Some(li), Some(ri)) => {
                let vf = 0.5 * (v[li] + v[ri]);
                add_face(l, r, 0.5 * vf + 0.5 * d[li] / h, 0.5 * vf - 0.5 * d[ri] / h);
            }
            (None, Some(ri)) => {
                if let GridKind::Open {
                    left: Boundary::Outflow,
                    ..
                } = grid.kind
                {
                    add_face(None, r, 0.0, v[ri].min(0.0) - 0.5 * d[ri] / h);
                }
            }
            (Some(li), None) => {
                if let GridKind::Open {
                    right: Boundary::Outflow,
                    ..
                } = grid.kind
                {
                    add_face(l, None, v[li].max(0.0) + 0.5 * d[li] / h, 0.0);
                }
            }
            (None, None) => {}
        }
    }
    Ok(a)
}

/// Smallest nonzero decay rate `−Re λ` of the generator.
///
/// Open grids give a tridiagonal generator; when its off-diagonal products
/// are positive it is symmetrised and solved by Sturm bisection. Otherwise
/// the dense Schur eigenvalues are used.
pub fn smallest_decay_eigenvalue(grid: &Grid1D, v: &[f64], d: &[f64]) -> Result<f64> {
    let a = generator_matrix(grid, v, d)?;
    let m = grid.cells;
    let scale = a.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let zero_tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let tridiagonal = matches!(grid.kind, GridKind::Open { .. })
        && (0..m - 1).all(|i| a[(i, i + 1)] * a[(i + 1, i)] > 0.0);
    let rates: Vec<f64> = if tridiagonal {
        // −A is similar to a symmetric tridiagonal matrix.
        let diag: Vec<f64> = (0..m).map(|i| -a[(i, i)]).collect();
        let off: Vec<f64> = (0..m - 1)
            .map(|i| -(a[(i, i + 1)] * a[(i + 1, i)]).sqrt())
            .collect();
        let lo = sturm_kth(&diag, &off, 0);
        if lo.abs() > zero_tol {
            vec![lo]
        } else {
            vec![lo, sturm_kth(&diag, &off, 1)]
        }
    } else {
        a.complex_eigenvalues().iter().map(|z| -z.re).collect()
    };
    rates
        .into_iter()
        .filter(|r| r.abs() > zero_tol)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoConvergence { horizon: f64::INFINITY })
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let o2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { o2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
fn sturm_kth(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `y = ln δ` chart of the noiseless control problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogChart {
    pub kappa: f64,
    /// Distance in `y` from the reflecting edge `ln π` to the outflow edge.
    pub depth: f64,
    pub cells: usize,
}

impl LogChart {
    pub fn new(kappa: f64) -> Self {
        Self {
            kappa,
            depth: 40.0,
            cells: 1024,
        }
    }

    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells = cells;
        self
    }

    pub fn with_depth(mut self, depth: f64) -> Self {
        self.depth = depth;
        self
    }

    pub fn top(&self) -> f64 {
        PI.ln()
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::open(
            self.top() - self.depth,
            self.top(),
            self.cells,
            Boundary::Outflow,
            Boundary::Reflecting,
        )
    }

    pub fn drift(&self) -> Vec<f64> {
        vec![-4.0 * self.kappa; self.cells]
    }

    pub fn diffusion(&self) -> Vec<f64> {
        vec![8.0 * self.kappa; self.cells]
    }

    /// Error probability `(1 − cos δ)/2` at each cell.
    pub fn error_weight(&self) -> Result<Vec<f64>> {
        Ok(self.grid()?.sample(|y| 0.5 * (1.0 - y.exp().cos())))
    }

    /// Regularised point mass at `δ₀`.
    pub fn initial(&self, delta0: f64) -> Result<DensityField> {
        DensityField::point_mass(self.grid()?, delta0.ln())
    }

    /// Stable default step (half the bound).
    pub fn default_dt(&self) -> Result<f64> {
        Ok(0.5 * stability_bound(&self.grid()?, &self.drift(), &self.diffusion()))
    }

    pub fn solver(&self) -> Result<FpSolver> {
        FpSolver::new(self.grid()?, self.drift(), self.diffusion(), self.default_dt()?)
    }

    /// `⟨P_e⟩(t)` at the requested times, starting from `δ₀`.
    pub fn error_series(&self, delta0: f64, times: &[f64]) -> Result<Vec<f64>> {
        let p0 = self.initial(delta0)?;
        self.solver()?.weighted_series(&p0, &self.error_weight()?, times)
    }

    /// Smallest decay eigenvalue of the truncated chart (tends to `κ` as
    /// the depth grows).
    pub fn asymptotic_rate(&self) -> Result<f64> {
        smallest_decay_eigenvalue(&self.grid()?, &self.drift(), &self.diffusion())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn variance(f: &DensityField) -> (f64, f64) {
        let x = f.grid().nodes();
        let mean = f.expectation(&x);
        let x2: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
        (mean, f.expectation(&x2))
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::circle(32).is_err());
        assert!(Grid1D::periodic(1.0, 0.0, 128).is_err());
        let g = Grid1D::circle(128).unwrap();
        assert_relative_eq!(g.h() * 128.0, 2.0 * PI);
    }

    #[test]
    fn density_validation() {
        let g = Grid1D::circle(64).unwrap();
        assert!(DensityField::new(g, vec![1.0; 64]).is_err());
        assert!(DensityField::normalized(g, vec![1.0; 64]).is_ok());
        assert!(matches!(
            DensityField::normalized(g, vec![1.0; 10]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn current_pure_diffusion() {
        let g = Grid1D::periodic(-10.0, 10.0, 512).unwrap();
        let p = DensityField::gaussian(g, 0.0, 1.0).unwrap();
        let d = vec![2.0; 512];
        let j = probability_current(&p, &vec![0.0; 512], &d).unwrap();
        let h = g.h();
        for (i, ji) in j.iter().enumerate().take(511).skip(1) {
            let dp = (p.values()[i + 1] - p.values()[i - 1]) / (2.0 * h);
            assert!((ji + dp).abs() < 1e-12);
        }
    }

    #[test]
    fn current_noise_induced_drift_cancels() {
        let g = Grid1D::periodic(-PI, PI, 256).unwrap();
        let d = g.sample(|x| 2.0 + x.cos());
        let h = g.h();
        let v: Vec<f64> = (0..256)
            .map(|i| 0.5 * (d[(i + 1) % 256] - d[(i + 255) % 256]) / (2.0 * h))
            .collect();
        let p = DensityField::gaussian(g, 0.3, 0.5).unwrap();
        let j = probability_current(&p, &v, &d).unwrap();
        for i in 0..256 {
            let dp = (p.values()[(i + 1) % 256] - p.values()[(i + 255) % 256]) / (2.0 * h);
            assert!((j[i] + 0.5 * d[i] * dp).abs() < 1e-12);
        }
    }

    #[test]
    fn current_vanishes_for_inverse_diffusion_density() {
        for &m in &[128usize, 256] {
            let g = Grid1D::circle(m).unwrap();
            let d = g.sample(|x| 1.5 + x.cos());
            let p = DensityField::normalized(g, d.iter().map(|x| 1.0 / x).collect()).unwrap();
            let j = probability_current(&p, &vec![0.0; m], &d).unwrap();
            let worst = j.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(worst < 5.0 * g.h() * g.h(), "m={m} worst={worst}");
        }
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let g = Grid1D::circle(64).unwrap();
        let p = DensityField::gaussian(g, 0.0, 0.5).unwrap();
        assert!(matches!(
            probability_current(&p, &[0.0; 63], &[0.0; 64]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn heat_kernel_variance() {
        let g = Grid1D::periodic(-20.0, 20.0, 1024).unwrap();
        let s0 = 1.0;
        let d = 0.8;
        let p0 = DensityField::gaussian(g, 0.0, s0).unwrap();
        let bound = stability_bound(&g, &[0.0], &[d]);
        let p = fp_evolve(&p0, &vec![0.0; 1024], &vec![d; 1024], 3.0, 0.5 * bound).unwrap();
        let (_, var) = variance(&p);
        let want = s0 * s0 + d * 3.0;
        assert!((var / want - 1.0).abs() < 0.005, "{var} vs {want}");
    }

    #[test]
    fn advection_translates() {
        let g = Grid1D::periodic(-10.0, 10.0, 1024).unwrap();
        let p0 = DensityField::gaussian(g, -2.0, 0.7).unwrap();
        let v = 1.3;
        let p = fp_evolve(&p0, &vec![v; 1024], &vec![0.0; 1024], 2.0, 0.5 * g.h() / (4.0 * v)).unwrap();
        let (mean, var) = variance(&p);
        assert!((mean - (-2.0 + v * 2.0)).abs() < 2.0 * g.h());
        assert!((var / 0.49 - 1.0).abs() < 0.05, "{var}");
        assert!(p.min_value() >= -1e-12);
    }

    #[test]
    fn stability_bound_is_enforced() {
        let g = Grid1D::circle(128).unwrap();
        let p0 = DensityField::gaussian(g, 0.0, 0.5).unwrap();
        let d = vec![1.0; 128];
        let bound = g.h() * g.h() / 2.0;
        let r = fp_evolve(&p0, &vec![0.0; 128], &d, 1.0, 1.01 * bound);
        assert!(matches!(r, Err(Error::StabilityViolation { .. })));
    }

    #[test]
    fn mass_and_positivity_over_many_steps() {
        let g = Grid1D::circle(128).unwrap();
        let p0 = DensityField::point_mass(g, 2.0).unwrap();
        let d = g.sample(|x| 8.0 * x * x);
        let v = g.sample(|x| 0.3 * x.sin());
        let dt = 0.5 * stability_bound(&g, &v, &d);
        let mut s = FpSolver::new(g, v, d, dt).unwrap();
        let mut f = p0.clone();
        s.advance(&mut f, 100_000).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-10, "{}", f.mass() - 1.0);
        assert!(f.min_value() >= -1e-12);
    }

    #[test]
    fn fourier_mode_rate_both_methods() {
        let c = 0.7;
        let g = Grid1D::circle(128).unwrap();
        let d = vec![2.0 * c; 128];
        let v = vec![0.0; 128];
        let w = g.sample(|x| 0.5 * (1.0 - x.cos()));
        let p0 = DensityField::gaussian(g, 1.0, 0.3).unwrap();
        let dt = 0.5 * stability_bound(&g, &v, &d);
        let spec = decay_rate_from_fp(&p0, &v, &d, &w, RateMethod::Spectral, &DecayOptions::new(1.0, dt))
            .unwrap();
        let evo = decay_rate_from_fp(&p0, &v, &d, &w, RateMethod::Evolution, &DecayOptions::new(1.0, dt))
            .unwrap();
        // The discrete Laplacian eigenvalue is c·(2 − 2cos h)/h².
        let h = g.h();
        let discrete = c * (2.0 - 2.0 * h.cos()) / (h * h);
        assert!((spec / discrete - 1.0).abs() < 1e-8, "{spec} vs {discrete}");
        assert!((spec / c - 1.0).abs() < 1e-3);
        assert!((evo / spec - 1.0).abs() < 0.01, "{evo} vs {spec}");
    }

    #[test]
    fn frozen_dynamics() {
        let g = Grid1D::circle(64).unwrap();
        let z = vec![0.0; 64];
        let w = g.sample(|x| 0.5 * (1.0 - x.cos()));
        let p0 = DensityField::gaussian(g, 1.0, 0.3).unwrap();
        let o = DecayOptions::new(1.0, 0.01);
        assert_eq!(decay_rate_from_fp(&p0, &z, &z, &w, RateMethod::Evolution, &o).unwrap(), 0.0);
        assert!(matches!(
            decay_rate_from_fp(&p0, &z, &z, &w, RateMethod::Spectral, &o),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn sturm_bisection_matches_dense() {
        let diag = [2.0, 3.0, 1.0, 4.0, 2.5];
        let off = [0.5, -0.7, 0.2, 0.9];
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..5 {
            m[(i, i)] = diag[i];
            if i < 4 {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (k, e) in ev.iter().take(5).enumerate() {
            assert!((sturm_kth(&diag, &off, k) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn log_chart_rate_approaches_kappa() {
        let r = LogChart::new(1.0).with_cells(512).asymptotic_rate().unwrap();
        // Truncation adds about ½·D·(π/L)² = 4(π/40)².
        assert!(r > 1.0 && r < 1.03, "{r}");
    }

    #[test]
    fn open_reflecting_grid_conserves_mass() {
        let g = Grid1D::open(0.0, 1.0, 128, Boundary::Reflecting, Boundary::Reflecting).unwrap();
        let p0 = DensityField::gaussian(g, 0.2, 0.05).unwrap();
        let v = vec![-0.5; 128];
        let d = vec![0.1; 128];
        let p = fp_evolve(&p0, &v, &d, 2.0, 0.5 * stability_bound(&g, &v, &d)).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        assert!(p.min_value() >= -1e-12);
    }
}
