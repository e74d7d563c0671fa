//! Time evolution under the full master equation and the projected 4×4
//! generator, Uhlmann fidelity and the full-versus-reduced validation sweep.

use std::f64::consts::PI;

use faer::Mat;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::catspace::{CatModel, ReducedLiouvillian};
use crate::error::{Error, Result};
use crate::fock::{self, StateVector};
use crate::linalg::{self, c, ComplexMatrix, C64, ZERO};
use crate::liouville::{self, LiouvillianMatrix};
use crate::model::ModelParams;
use crate::ode::{self, Rk45Options};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
/// Eigenvalues in `[-PSD_CLIP, 0)` are roundoff and clipped to zero.
pub const PSD_CLIP: f64 = 1e-8;
/// Eigenvalues below `-PSD_FAIL` signal a broken state.
pub const PSD_FAIL: f64 = 1e-6;

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), trace (1e-8) and positivity (−1e-8).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::Domain(format!("density matrix is {}x{}", n, matrix.ncols())));
        }
        if linalg::max_abs(&matrix).is_nan() || !(0..n).all(|i| (0..n).all(|j| matrix[(i, j)].norm().is_finite())) {
            return Err(Error::Domain("density matrix has non-finite entries".into()));
        }
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > HERMITICITY_TOL {
            return Err(Error::Domain(format!("density matrix is not Hermitian (residual {herm:.3e})")));
        }
        let tr = linalg::trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Domain(format!("density matrix trace is {tr}")));
        }
        let state = Self { matrix };
        let min_eig = state.min_eigenvalue()?;
        if min_eig < -PSD_CLIP {
            return Err(Error::InvalidState { min_eig });
        }
        Ok(state)
    }

    /// Wraps a matrix without validation, for trajectories that report their
    /// own diagnostics.
    pub fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn pure(state: &StateVector) -> Result<Self> {
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("state norm is {norm}")));
        }
        Self::new(state.projector())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.matrix[(i, j)].norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herm = linalg::hermitian_part(&self.matrix);
        Ok(linalg::hermitian_eigenvalues(&herm)?.first().copied().unwrap_or(0.0))
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        linalg::trace(&(op * &self.matrix))
    }
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let diff = linalg::hermitian_part(&(rho.matrix() - sigma.matrix()));
    Ok(0.5 * linalg::hermitian_eigenvalues(&diff)?.iter().map(|v| v.abs()).sum::<f64>())
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²`.
///
/// Eigenvalues in `[-1e-6, 0)` are clipped to zero (with a warning below
/// `-1e-8`); anything lower is an invalid-state error. Eigenvalues of ρ at
/// rounding level are dropped from its support so that rank-deficient states
/// do not pick up `√ε` noise.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let min_sigma = sigma.min_eigenvalue()?;
    let (values, vectors) = linalg::hermitian_eigen(&linalg::hermitian_part(rho.matrix()))?;
    for min in [values.first().copied().unwrap_or(0.0), min_sigma] {
        if min < -PSD_FAIL {
            return Err(Error::InvalidState { min_eig: min });
        }
        if min < -PSD_CLIP {
            warn!("clipping eigenvalue {min:.3e} before fidelity");
        }
    }
    let n = rho.dim();
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = support_cut(n, top);
    let support: Vec<usize> = (0..n).filter(|&i| values[i] > cut).collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    // √ρ σ √ρ restricted to the support of ρ
    let u = Mat::from_fn(n, support.len(), |r, k| vectors[(r, support[k])] * values[support[k]].sqrt());
    let inner = linalg::hermitian_part(&(linalg::adjoint(&u) * linalg::hermitian_part(sigma.matrix()) * &u));
    let mu = linalg::hermitian_eigenvalues(&inner)?;
    let mu_top = mu.iter().fold(0.0f64, |a, &b| a.max(b));
    let mu_cut = support_cut(n, mu_top);
    let root_sum: f64 = mu.iter().filter(|&&v| v > mu_cut).map(|v| v.sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

fn support_cut(n: usize, top: f64) -> f64 {
    64.0 * n as f64 * f64::EPSILON * top
}

/// The cat basis `{|C⁺⟩, |C⁻⟩}` in a truncated Fock space.
#[derive(Debug, Clone)]
pub struct CatBasis {
    pub alpha: f64,
    pub plus: StateVector,
    pub minus: StateVector,
}

impl CatBasis {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        let [plus, minus] = fock::cat_basis(alpha, dim)?;
        Ok(Self { alpha, plus, minus })
    }

    pub fn dim(&self) -> usize {
        self.plus.dim()
    }

    fn vectors(&self) -> [&StateVector; 2] {
        [&self.plus, &self.minus]
    }

    /// `(ρ₊₊, ρ₊₋, ρ₋₊, ρ₋₋)` with `ρ_ij = ⟨C_i|ρ|C_j⟩`.
    pub fn project(&self, rho: &ComplexMatrix) -> Result<[C64; 4]> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rho.nrows(),
            });
        }
        let b = self.vectors();
        let mut out = [ZERO; 4];
        for i in 0..2 {
            for j in 0..2 {
                out[2 * i + j] = b[i].inner(&StateVector::new(linalg::mat_vec(rho, b[j].amplitudes())));
            }
        }
        Ok(out)
    }

    /// `Σ ρ_ij |C_i⟩⟨C_j|`, without validation.
    pub fn embed(&self, v: &[C64; 4]) -> ComplexMatrix {
        let n = self.dim();
        let (p, m) = (self.plus.amplitudes(), self.minus.amplitudes());
        Mat::from_fn(n, n, |r, s| {
            v[0] * p[r] * p[s].conj() + v[1] * p[r] * m[s].conj() + v[2] * m[r] * p[s].conj() + v[3] * m[r] * m[s].conj()
        })
    }

    /// `⟨C⁺|ρ|C⁺⟩ + ⟨C⁻|ρ|C⁻⟩`.
    pub fn population(&self, rho: &ComplexMatrix) -> Result<f64> {
        let v = self.project(rho)?;
        Ok(v[0].re + v[3].re)
    }
}

pub fn project_to_cat(rho: &DensityMatrix, alpha: f64, dim: usize) -> Result<[C64; 4]> {
    CatBasis::new(alpha, dim)?.project(rho.matrix())
}

pub fn embed_from_cat(v: &[C64; 4], alpha: f64, dim: usize) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_matrix_unchecked(CatBasis::new(alpha, dim)?.embed(v)))
}

/// `v(0) = Σ cᵢ Vᵢ` for the projected generator.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub coefficients: Vec<C64>,
    pub eigenvalues: Vec<C64>,
    /// Unit-norm eigenvectors as columns.
    pub modes: ComplexMatrix,
    /// 1-norm condition number of `modes`.
    pub condition: f64,
}

impl ModeDecomposition {
    pub fn new(lr: &ReducedLiouvillian, v0: &[C64; 4]) -> Result<Self> {
        let (eigenvalues, modes) = linalg::eigen(&lr.matrix())?;
        let condition = linalg::condition_number(&modes);
        let coefficients = linalg::solve(&modes, v0);
        Ok(Self {
            coefficients,
            eigenvalues,
            modes,
            condition,
        })
    }

    /// `Σ cᵢ exp(Eᵢ t) Vᵢ`.
    pub fn evaluate(&self, t: f64) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (k, (&ck, &ek)) in self.coefficients.iter().zip(&self.eigenvalues).enumerate() {
            let w = ck * (ek * t).exp();
            for (r, o) in out.iter_mut().enumerate() {
                *o += w * self.modes[(r, k)];
            }
        }
        out
    }
}

/// Mode-wise propagation is used while the eigenvector matrix is better
/// conditioned than this.
pub const MODE_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk45,
    Propagator,
    Eigenmode,
    MatrixExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub photon_number: f64,
    pub parity: f64,
    pub subspace_population: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    pub method: Method,
    /// Largest `|Tr ρ(t) − Tr ρ(0)|` before normalization.
    pub max_trace_drift: f64,
    /// Largest `‖ρ − ρ†‖_max` before re-Hermitization.
    pub max_hermiticity: f64,
    /// Smallest eigenvalue over all output states.
    pub min_eigenvalue: f64,
    /// Condition number of the mode matrix (reduced runs only).
    pub condition: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub observables: Vec<Observables>,
    pub diagnostics: TrajectoryDiagnostics,
}

impl Trajectory {
    /// Trace distance of every state to `target`.
    pub fn distances_to(&self, target: &DensityMatrix) -> Result<Vec<f64>> {
        self.states.iter().map(|s| trace_distance(s, target)).collect()
    }

    /// Whether the distance to `target` never grows (beyond `slack`) after
    /// the first `skip` outputs.
    pub fn relaxes_monotonically(&self, target: &DensityMatrix, skip: usize, slack: f64) -> Result<bool> {
        let d = self.distances_to(target)?;
        Ok(d.iter().skip(skip).collect::<Vec<_>>().windows(2).all(|w| *w[1] <= *w[0] + slack))
    }
}

/// Integrator choice for [`evolve_full`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullMethod {
    /// Runge–Kutta when the step budget `‖L‖₁·T` is small, propagator otherwise.
    #[default]
    Auto,
    Rk45,
    Propagator,
}

/// Largest `‖L‖₁·T` for which `Auto` chooses Runge–Kutta.
pub const RK_BUDGET: f64 = 2.0e4;

fn check_times(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("time grid must be finite and non-decreasing".into()));
    }
    Ok(())
}

/// Snapshots of `exp(L (t_i − t_0)) v0` on a non-decreasing grid.
///
/// Uniform grids reuse a single step propagator; otherwise one matrix
/// exponential is formed per distinct interval.
pub fn propagate(l: &ComplexMatrix, v0: &[C64], t_grid: &[f64]) -> Result<Vec<Vec<C64>>> {
    check_times(t_grid)?;
    let n = t_grid.len();
    let mut out = vec![v0.to_vec()];
    if n == 1 {
        return Ok(out);
    }
    let span = t_grid[n - 1] - t_grid[0];
    let dt = span / (n - 1) as f64;
    let uniform = t_grid
        .iter()
        .enumerate()
        .all(|(i, &t)| (t - t_grid[0] - dt * i as f64).abs() <= 1e-12 * span.max(1e-300));
    let step_op = |h: f64| linalg::expm(&linalg::scale(l, c(h, 0.0)));
    let uniform_u = if uniform { Some(step_op(dt)?) } else { None };
    let mut v = v0.to_vec();
    for i in 1..n {
        let h = t_grid[i] - t_grid[i - 1];
        if h != 0.0 {
            v = match &uniform_u {
                Some(u) => linalg::mat_vec(u, &v),
                None => linalg::mat_vec(&step_op(h)?, &v),
            };
        }
        out.push(v.clone());
    }
    Ok(out)
}

/// Photon number, parity and cat-manifold population of every state.
fn full_observables(states: &[DensityMatrix], basis: Option<&CatBasis>) -> Result<Vec<Observables>> {
    states
        .iter()
        .map(|s| {
            let m = s.matrix();
            let n = m.nrows();
            let photon_number = (0..n).map(|k| k as f64 * m[(k, k)].re).sum();
            let parity = (0..n).map(|k| if k % 2 == 0 { m[(k, k)].re } else { -m[(k, k)].re }).sum();
            let subspace_population = match basis {
                Some(b) => b.population(m)?,
                None => f64::NAN,
            };
            Ok(Observables {
                photon_number,
                parity,
                subspace_population,
            })
        })
        .collect()
}

/// Turns raw vectorized snapshots into re-Hermitized states plus diagnostics.
fn finish(
    method: Method,
    snapshots: Vec<Vec<C64>>,
    dim: usize,
    trace0: f64,
    condition: Option<f64>,
) -> Result<(Vec<DensityMatrix>, TrajectoryDiagnostics)> {
    let mut diag = TrajectoryDiagnostics {
        method,
        max_trace_drift: 0.0,
        max_hermiticity: 0.0,
        min_eigenvalue: f64::INFINITY,
        condition,
    };
    let mut states = Vec::with_capacity(snapshots.len());
    for v in snapshots {
        let raw = liouville::devectorize_slice(&v, dim)?;
        diag.max_hermiticity = diag.max_hermiticity.max(linalg::hermiticity_residual(&raw));
        let rho = linalg::hermitian_part(&raw);
        diag.max_trace_drift = diag.max_trace_drift.max((linalg::trace(&rho).re - trace0).abs());
        let state = DensityMatrix::from_matrix_unchecked(rho);
        diag.min_eigenvalue = diag.min_eigenvalue.min(state.min_eigenvalue()?);
        states.push(state);
    }
    Ok((states, diag))
}

/// Full master-equation evolution in a Fock space of size `dim`.
pub fn evolve_full(
    rho0: &DensityMatrix,
    params: &ModelParams,
    t_grid: &[f64],
    dim: usize,
    method: FullMethod,
) -> Result<Trajectory> {
    let l = liouville::kerr_cat_liouvillian(params, dim)?;
    let basis = CatBasis::new(params.alpha(), dim).ok();
    evolve_with(&l, rho0, t_grid, method, basis.as_ref())
}

/// Evolution under a prebuilt generator.
pub fn evolve_with(
    l: &LiouvillianMatrix,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    method: FullMethod,
    basis: Option<&CatBasis>,
) -> Result<Trajectory> {
    check_times(t_grid)?;
    let dim = l.dim();
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho0.dim(),
        });
    }
    let v0 = liouville::vectorize(rho0.matrix())?.into_entries();
    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    let resolved = match method {
        FullMethod::Auto if linalg::norm_one(l.matrix()) * span <= RK_BUDGET => Method::Rk45,
        FullMethod::Auto | FullMethod::Propagator => Method::Propagator,
        FullMethod::Rk45 => Method::Rk45,
    };
    debug!("evolving dim {dim} over {span} us with {resolved:?}");
    let snapshots = match resolved {
        Method::Rk45 => {
            let m = l.matrix();
            let (ys, stats) = ode::integrate(
                |_, y, dy| {
                    let out = linalg::mat_vec(m, y);
                    dy.copy_from_slice(&out);
                },
                t_grid,
                &v0,
                &Rk45Options::default(),
            )?;
            debug!("rk45: {stats:?}");
            ys
        }
        _ => propagate(l.matrix(), &v0, t_grid)?,
    };
    let (states, diagnostics) = finish(resolved, snapshots, dim, rho0.trace().re, None)?;
    let observables = full_observables(&states, basis)?;
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        observables,
        diagnostics,
    })
}

/// The null vector of the projected generator, trace normalized.
pub fn reduced_steady_state(lr: &ReducedLiouvillian) -> Result<[C64; 4]> {
    let mut m = lr.matrix();
    for j in 0..4 {
        m[(0, j)] = ZERO;
    }
    m[(0, 0)] = c(1.0, 0.0);
    m[(0, 3)] = c(1.0, 0.0);
    let x = linalg::solve(&m, &[c(1.0, 0.0), ZERO, ZERO, ZERO]);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numeric("projected generator has no unique steady state".into()));
    }
    Ok([x[0], x[1], x[2], x[3]])
}

/// Evolution of a cat-basis 4-vector under the projected generator.
pub fn evolve_reduced_vectors(lr: &ReducedLiouvillian, v0: &[C64; 4], t_grid: &[f64]) -> Result<(Vec<[C64; 4]>, Method, f64)> {
    check_times(t_grid)?;
    let modes = ModeDecomposition::new(lr, v0)?;
    let t0 = t_grid[0];
    if modes.condition < MODE_CONDITION_LIMIT {
        let out = t_grid
            .iter()
            .map(|&t| if t == t0 { *v0 } else { modes.evaluate(t - t0) })
            .collect();
        return Ok((out, Method::Eigenmode, modes.condition));
    }
    debug!("mode matrix condition {:.3e}; using matrix exponentials", modes.condition);
    let m = lr.matrix();
    let out = t_grid
        .iter()
        .map(|&t| {
            if t == t0 {
                return Ok(*v0);
            }
            let u = linalg::expm(&linalg::scale(&m, c(t - t0, 0.0)))?;
            let v = linalg::mat_vec(&u, v0);
            Ok([v[0], v[1], v[2], v[3]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, Method::MatrixExponential, modes.condition))
}

fn as_2x2(v: &[C64; 4]) -> ComplexMatrix {
    Mat::from_fn(2, 2, |i, j| v[2 * i + j])
}

/// Reduced evolution reported as 2×2 states in the cat basis.
pub fn evolve_reduced(v0: &[C64; 4], params: &ModelParams, t_grid: &[f64]) -> Result<Trajectory> {
    let model = CatModel::from_params(params);
    let lr = model.reduced(params.drive, params.delta);
    let (vs, method, condition) = evolve_reduced_vectors(&lr, v0, t_grid)?;
    let trace0 = (v0[0] + v0[3]).re;
    let k = &model.constants;
    let a2 = k.alpha_sq();
    let mut diag = TrajectoryDiagnostics {
        method,
        max_trace_drift: 0.0,
        max_hermiticity: 0.0,
        min_eigenvalue: f64::INFINITY,
        condition: Some(condition),
    };
    let mut states = Vec::with_capacity(vs.len());
    let mut observables = Vec::with_capacity(vs.len());
    for v in &vs {
        let raw = as_2x2(v);
        diag.max_hermiticity = diag.max_hermiticity.max(linalg::hermiticity_residual(&raw));
        let rho = DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&raw));
        diag.max_trace_drift = diag.max_trace_drift.max((rho.trace().re - trace0).abs());
        diag.min_eigenvalue = diag.min_eigenvalue.min(rho.min_eigenvalue()?);
        observables.push(Observables {
            photon_number: a2 * k.p_sq() * v[0].re + a2 / k.p_sq() * v[3].re,
            parity: v[0].re - v[3].re,
            subspace_population: v[0].re + v[3].re,
        });
        states.push(rho);
    }
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        observables,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// The even cat `|C⁺⟩`.
    CatPlus,
    /// The coherent state `|α⟩`.
    Coherent,
}

impl InitialState {
    pub fn state(self, alpha: f64, dim: usize) -> Result<StateVector> {
        match self {
            InitialState::CatPlus => fock::cat_state(alpha, fock::Parity::Even, dim),
            InitialState::Coherent => fock::coherent_state(alpha, dim),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitialState::CatPlus => "cat-plus",
            InitialState::Coherent => "coherent",
        }
    }
}

/// Fidelity between full and embedded reduced evolution at one detuning.
#[derive(Debug, Clone)]
pub struct FidelityColumn {
    pub initial: InitialState,
    pub delta: f64,
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// `1 − ⟨C⁺|ρ|C⁺⟩ − ⟨C⁻|ρ|C⁻⟩` of the full state.
    pub leakage: Vec<f64>,
    pub full: TrajectoryDiagnostics,
    pub reduced: TrajectoryDiagnostics,
}

/// Runs every initial state at the detuning and drive in `params`, sharing
/// one generator and propagator.
pub fn fidelity_columns(
    initials: &[InitialState],
    params: &ModelParams,
    t_grid: &[f64],
    dim: usize,
    method: FullMethod,
) -> Result<Vec<FidelityColumn>> {
    check_times(t_grid)?;
    let alpha = params.alpha();
    let basis = CatBasis::new(alpha, dim)?;
    let l = liouville::kerr_cat_liouvillian(params, dim)?;
    let lr = CatModel::from_params(params).reduced(params.drive, params.delta);
    let uses_propagator = match method {
        FullMethod::Propagator => true,
        FullMethod::Rk45 => false,
        FullMethod::Auto => linalg::norm_one(l.matrix()) * (t_grid[t_grid.len() - 1] - t_grid[0]) > RK_BUDGET,
    };
    // One shared step operator for all initial states on uniform grids.
    let mut columns = Vec::with_capacity(initials.len());
    let mut starts = Vec::new();
    for &init in initials {
        let psi = init.state(alpha, dim)?;
        starts.push((init, DensityMatrix::pure(&psi)?));
    }
    let full_runs: Vec<Trajectory> = if uses_propagator && starts.len() > 1 {
        let stacked = stacked_propagate(l.matrix(), &starts, t_grid)?;
        stacked
            .into_iter()
            .zip(&starts)
            .map(|(snaps, (_, rho0))| {
                let (states, diagnostics) = finish(Method::Propagator, snaps, dim, rho0.trace().re, None)?;
                let observables = full_observables(&states, Some(&basis))?;
                Ok(Trajectory {
                    times: t_grid.to_vec(),
                    states,
                    observables,
                    diagnostics,
                })
            })
            .collect::<Result<_>>()?
    } else {
        starts
            .iter()
            .map(|(_, rho0)| evolve_with(&l, rho0, t_grid, method, Some(&basis)))
            .collect::<Result<_>>()?
    };
    for ((init, rho0), full) in starts.iter().zip(full_runs) {
        let v0 = basis.project(rho0.matrix())?;
        let (vs, rmethod, condition) = evolve_reduced_vectors(&lr, &v0, t_grid)?;
        let mut reduced_diag = TrajectoryDiagnostics {
            method: rmethod,
            max_trace_drift: 0.0,
            max_hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
            condition: Some(condition),
        };
        let mut fid = Vec::with_capacity(t_grid.len());
        let mut leak = Vec::with_capacity(t_grid.len());
        for (k, v) in vs.iter().enumerate() {
            let raw = as_2x2(v);
            reduced_diag.max_hermiticity = reduced_diag.max_hermiticity.max(linalg::hermiticity_residual(&raw));
            reduced_diag.max_trace_drift = reduced_diag.max_trace_drift.max(((v[0] + v[3]).re - (v0[0] + v0[3]).re).abs());
            let small = DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&raw));
            reduced_diag.min_eigenvalue = reduced_diag.min_eigenvalue.min(small.min_eigenvalue()?);
            let sigma = DensityMatrix::from_matrix_unchecked(linalg::hermitian_part(&basis.embed(v)));
            fid.push(fidelity(&full.states[k], &sigma)?);
            leak.push(1.0 - full.observables[k].subspace_population);
        }
        columns.push(FidelityColumn {
            initial: *init,
            delta: params.delta,
            times: t_grid.to_vec(),
            fidelity: fid,
            leakage: leak,
            full: full.diagnostics,
            reduced: reduced_diag,
        });
    }
    Ok(columns)
}

/// `propagate` for several initial states sharing one generator.
fn stacked_propagate(l: &ComplexMatrix, starts: &[(InitialState, DensityMatrix)], t_grid: &[f64]) -> Result<Vec<Vec<Vec<C64>>>> {
    let n = t_grid.len();
    let span = t_grid[n - 1] - t_grid[0];
    let uniform = n < 2 || {
        let dt = span / (n - 1) as f64;
        t_grid
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - t_grid[0] - dt * i as f64).abs() <= 1e-12 * span.max(1e-300))
    };
    let v0s: Vec<Vec<C64>> = starts
        .iter()
        .map(|(_, r)| liouville::vectorize(r.matrix()).map(|v| v.into_entries()))
        .collect::<Result<_>>()?;
    if !uniform {
        return v0s.iter().map(|v| propagate(l, v, t_grid)).collect();
    }
    let mut outs: Vec<Vec<Vec<C64>>> = v0s.iter().map(|v| vec![v.clone()]).collect();
    if n == 1 {
        return Ok(outs);
    }
    let u = linalg::expm(&linalg::scale(l, c(span / (n - 1) as f64, 0.0)))?;
    let size = v0s[0].len();
    let mut block = Mat::from_fn(size, v0s.len(), |i, j| v0s[j][i]);
    for _ in 1..n {
        block = &u * &block;
        for (j, out) in outs.iter_mut().enumerate() {
            out.push((0..size).map(|i| block[(i, j)]).collect());
        }
    }
    Ok(outs)
}

/// One (Δ, t) grid point of a fidelity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub delta: f64,
    pub t: f64,
    pub fidelity: f64,
    pub leakage: f64,
}

/// Sweep over `delta_grid` for one initial state. The drive is taken from
/// `params_base` when `eps_on`, and set to zero otherwise.
pub fn fidelity_map(
    initial: InitialState,
    params_base: &ModelParams,
    delta_grid: &[f64],
    t_grid: &[f64],
    eps_on: bool,
    dim: usize,
) -> Result<Vec<FidelityRecord>> {
    let mut out = Vec::with_capacity(delta_grid.len() * t_grid.len());
    for &delta in delta_grid {
        let params = sweep_params(params_base, delta, eps_on);
        let col = fidelity_columns(&[initial], &params, t_grid, dim, FullMethod::Auto)?.remove(0);
        out.extend(col_records(&col));
    }
    Ok(out)
}

pub fn sweep_params(base: &ModelParams, delta: f64, eps_on: bool) -> ModelParams {
    base.with_delta(delta).with_drive(if eps_on { base.drive } else { 0.0 })
}

pub fn col_records(col: &FidelityColumn) -> Vec<FidelityRecord> {
    col.times
        .iter()
        .enumerate()
        .map(|(k, &t)| FidelityRecord {
            delta: col.delta,
            t,
            fidelity: col.fidelity[k],
            leakage: col.leakage[k],
        })
        .collect()
}

/// Detunings `2π·[−0.5, 0.5]` rad/µs in 21 points.
pub fn default_delta_grid() -> Vec<f64> {
    linspace(-0.5, 0.5, 21).into_iter().map(|f| 2.0 * PI * f).collect()
}

/// Times `[0, 60]` µs in 121 points.
pub fn default_time_grid() -> Vec<f64> {
    linspace(0.0, 60.0, 121)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExperimentUnits, KappaConvention};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let a = Mat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &a * linalg::adjoint(&a);
        let tr = linalg::trace(&rho).re;
        DensityMatrix::new(linalg::hermitian_part(&linalg::scale(&rho, c(1.0 / tr, 0.0)))).unwrap()
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(linalg::identity(2)).is_err());
        let mut m = linalg::scale(&linalg::identity(2), c(0.5, 0.0));
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 0)] = c(1.1, 0.0);
        m[(1, 1)] = c(-0.1, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState { .. })));
    }

    #[test]
    fn fidelity_examples() {
        let zero = DensityMatrix::pure(&StateVector::fock(0, 2).unwrap()).unwrap();
        let mixed = DensityMatrix::new(linalg::scale(&linalg::identity(2), c(0.5, 0.0))).unwrap();
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!((fidelity(&mixed, &mixed).unwrap() - 1.0).abs() < 1e-10);

        let a = fock::coherent_state(0.8, 20).unwrap();
        let b = fock::cat_state(1.1, fock::Parity::Even, 20).unwrap();
        let f = fidelity(&DensityMatrix::pure(&a).unwrap(), &DensityMatrix::pure(&b).unwrap()).unwrap();
        assert!((f - a.inner(&b).norm_sqr()).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let r = random_density(&mut rng, 4);
            let s = random_density(&mut rng, 4);
            assert!((fidelity(&r, &s).unwrap() - fidelity(&s, &r).unwrap()).abs() < 1e-10);
            assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_and_embedding() {
        let alpha = 1.521;
        let basis = CatBasis::new(alpha, 40).unwrap();
        let v = basis.project(&basis.plus.projector()).unwrap();
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(v[1].norm() < 1e-12 && v[2].norm() < 1e-12 && v[3].norm() < 1e-12);

        let coherent = fock::coherent_state(alpha, 40).unwrap();
        let v = basis.project(&coherent.projector()).unwrap();
        let e = (-2.0 * alpha * alpha).exp();
        let (np, nm) = ((2.0 * (1.0 + e)).powf(-0.5), (2.0 * (1.0 - e)).powf(-0.5));
        let want = [1.0 / (4.0 * np * np), 1.0 / (4.0 * np * nm), 1.0 / (4.0 * np * nm), 1.0 / (4.0 * nm * nm)];
        for k in 0..4 {
            assert!((v[k] - c(want[k], 0.0)).norm() < 1e-12, "{k}: {} vs {}", v[k], want[k]);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let r = random_density(&mut rng, 2);
            let m = r.matrix();
            let v4 = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
            let back = basis.project(&basis.embed(&v4)).unwrap();
            for k in 0..4 {
                assert!((back[k] - v4[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_paths_agree() {
        let model = CatModel::new(1.521, 1.0 / 15.5).unwrap();
        let lr = model.reduced(0.3, 0.5);
        let v0 = [c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)];
        let times = linspace(0.0, 30.0, 31);
        let (modes, method, _) = evolve_reduced_vectors(&lr, &v0, &times).unwrap();
        assert_eq!(method, Method::Eigenmode);
        assert_eq!(modes[0], v0);
        let m = lr.matrix();
        for (t, v) in times.iter().zip(&modes) {
            let u = linalg::expm(&linalg::scale(&m, c(*t, 0.0))).unwrap();
            let w = linalg::mat_vec(&u, &v0);
            for k in 0..4 {
                assert!((w[k] - v[k]).norm() < 1e-8);
            }
        }
        let late = evolve_reduced_vectors(&lr, &v0, &[0.0, 1e7]).unwrap().0[1];
        let ss = reduced_steady_state(&lr).unwrap();
        for k in 0..4 {
            assert!((late[k] - ss[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn reduced_falls_back_at_third_order_point() {
        let model = CatModel::new(1.521, 1.0 / 15.5).unwrap();
        let (e, d) = crate::exceptional::lep3_magnitudes(&model).unwrap();
        let params = ModelParams::from_alpha(1.521, 1.0 / 15.5, e, d).unwrap();
        let v0 = [c(1.0, 0.0), ZERO, ZERO, ZERO];
        let traj = evolve_reduced(&v0, &params, &linspace(0.0, 60.0, 61)).unwrap();
        assert_eq!(traj.diagnostics.method, Method::MatrixExponential);
        assert!(traj.diagnostics.max_trace_drift < 1e-10);
    }

    #[test]
    fn unitary_cat_dynamics_stays_pure() {
        let params = ModelParams::new(0.0, 1.0, 1.8, 0.0, 0.0).unwrap();
        let psi = fock::coherent_state(params.alpha(), 24).unwrap();
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let traj = evolve_full(&rho0, &params, &linspace(0.0, 2.0, 11), 24, FullMethod::Rk45).unwrap();
        assert_eq!(traj.diagnostics.method, Method::Rk45);
        for s in &traj.states {
            assert!((s.purity() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn pure_loss_decay() {
        let kappa = 0.3;
        let params = ModelParams {
            delta: 0.0,
            kerr: 0.0,
            two_photon: 0.0,
            drive: 0.0,
            kappa,
        };
        let psi = fock::coherent_state(1.5, 30).unwrap();
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let times = linspace(0.0, 10.0, 21);
        for method in [FullMethod::Rk45, FullMethod::Propagator] {
            let traj = evolve_full(&rho0, &params, &times, 30, method).unwrap();
            for (t, obs) in times.iter().zip(&traj.observables) {
                let want = 2.25 * (-kappa * t).exp();
                assert!((obs.photon_number - want).abs() <= 1e-6 * want, "{method:?} t = {t}");
            }
            assert!(traj.diagnostics.max_trace_drift < 1e-8);
        }
    }

    #[test]
    fn parity_decay_rate_matches_population_mode() {
        let params = ExperimentUnits::kerr_cat_device().to_params(KappaConvention::PlainRate).unwrap();
        let params = params.with_drive(0.0);
        let dim = 24;
        let psi = fock::cat_state(params.alpha(), fock::Parity::Even, dim).unwrap();
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let times = linspace(1.0, 4.0, 3);
        let traj = evolve_full(&rho0, &params, &times, dim, FullMethod::Propagator).unwrap();
        let model = CatModel::from_params(&params);
        let rate = model.rate_scale() * model.constants.plus(2);
        // equally spaced samples of P_ss + c e^{−γt}
        let p: Vec<f64> = traj.observables.iter().map(|o| o.parity).collect();
        let fitted = ((p[0] - p[1]) / (p[1] - p[2])).ln() / 1.5;
        assert!((fitted - rate).abs() < 1e-2 * rate, "fitted {fitted} vs {rate}");
    }
}
