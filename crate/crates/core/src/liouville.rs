//! Row-stacked vectorization, the Lindblad superoperator and its spectrum.
//!
//! `vec(ρ)[i·N + j] = ρ[i, j]`. Under this convention `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.

use faer::Mat;

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock;
use crate::linalg::{self, c, ComplexMatrix, C64, I, ZERO};
use crate::model::ModelParams;

/// A density matrix flattened row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedState {
    dim: usize,
    entries: Vec<C64>,
}

impl VectorizedState {
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }
}

pub fn vectorize(rho: &ComplexMatrix) -> Result<VectorizedState> {
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err(Error::Domain(format!("cannot vectorize a {}x{} matrix", n, rho.ncols())));
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(rho[(i, j)]);
        }
    }
    Ok(VectorizedState { dim: n, entries })
}

pub fn devectorize(v: &VectorizedState) -> ComplexMatrix {
    let n = v.dim;
    Mat::from_fn(n, n, |i, j| v.entries[i * n + j])
}

/// Devectorizes a raw slice of length `dim²`.
pub fn devectorize_slice(entries: &[C64], dim: usize) -> Result<ComplexMatrix> {
    if entries.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    Ok(Mat::from_fn(dim, dim, |i, j| entries[i * dim + j]))
}

/// Dense Liouvillian acting on row-stacked density matrices of size `dim`.
#[derive(Debug, Clone)]
pub struct LiouvillianMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl LiouvillianMatrix {
    /// Hilbert-space dimension N (the matrix is N² × N²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.dim * self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        linalg::mat_vec(&self.matrix, v)
    }

    /// `L(ρ)` as a matrix.
    pub fn act(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rho.nrows(),
            });
        }
        let v = vectorize(rho)?;
        devectorize_slice(&self.apply(v.entries()), self.dim)
    }

    /// Largest entry of `vec(I)ᵀ L`, zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let n = self.dim;
        (0..self.size())
            .map(|col| (0..n).map(|i| self.matrix[(i * n + i, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

fn check_square(m: &ComplexMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Domain(format!(
            "operator is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `L = −i(H⊗I − I⊗Hᵀ) + Σ_k [Γ_k⊗Γ_k* − ½Γ_k†Γ_k⊗I − ½I⊗Γ_kᵀΓ_k*]`.
pub fn build_liouvillian(h: &ComplexMatrix, jumps: &[ComplexMatrix]) -> Result<LiouvillianMatrix> {
    let n = h.nrows();
    check_square(h, n)?;
    for g in jumps {
        check_square(g, n)?;
    }
    // Effective non-Hermitian generator acting from the left: −iH − ½ΣΓ†Γ.
    let mut left = Mat::from_fn(n, n, |i, k| -I * h[(i, k)]);
    // Right action: ρ ↦ ρ (iH − ½ΣΓ†Γ).
    let mut right = Mat::from_fn(n, n, |l, j| I * h[(l, j)]);
    for g in jumps {
        let gg = linalg::adjoint(g) * g;
        for i in 0..n {
            for k in 0..n {
                left[(i, k)] -= gg[(i, k)] * 0.5;
                right[(i, k)] -= gg[(i, k)] * 0.5;
            }
        }
    }
    let mut l = Mat::<C64>::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                let v = left[(i, k)];
                if v != ZERO {
                    l[(row, k * n + j)] += v;
                }
            }
            for q in 0..n {
                let v = right[(q, j)];
                if v != ZERO {
                    l[(row, i * n + q)] += v;
                }
            }
        }
    }
    for g in jumps {
        for i in 0..n {
            for k in 0..n {
                let gik = g[(i, k)];
                if gik == ZERO {
                    continue;
                }
                for j in 0..n {
                    for q in 0..n {
                        let gjq = g[(j, q)];
                        if gjq != ZERO {
                            l[(i * n + j, k * n + q)] += gik * gjq.conj();
                        }
                    }
                }
            }
        }
    }
    Ok(LiouvillianMatrix { dim: n, matrix: l })
}

/// Liouvillian of the Kerr-cat model with the single loss channel `√κ a`.
pub fn kerr_cat_liouvillian(params: &ModelParams, dim: usize) -> Result<LiouvillianMatrix> {
    let h = fock::build_hamiltonian(params, dim)?;
    let jump = linalg::scale(&fock::annihilation(dim)?, c(params.kappa.sqrt(), 0.0));
    build_liouvillian(&h, &[jump])
}

/// Right-hand side of the master equation evaluated directly on matrices.
pub fn lindblad_rhs(h: &ComplexMatrix, jumps: &[ComplexMatrix], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = h.nrows();
    check_square(h, n)?;
    check_square(rho, n)?;
    let mut out = linalg::scale(&(h * rho - rho * h), -I);
    for g in jumps {
        check_square(g, n)?;
        let gd = linalg::adjoint(g);
        let gg = &gd * g;
        out = out + g * rho * &gd - linalg::scale(&(&gg * rho + rho * &gg), c(0.5, 0.0));
    }
    Ok(out)
}

/// Eigendecomposition of a Liouvillian.
///
/// Eigenvalues are sorted by descending real part, then ascending imaginary
/// part; real parts closer than `1e-9·max|E|` count as tied. Column `i` of
/// `left` satisfies `left[:, i]ᴴ · right[:, j] = δ_ij`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    pub right_eigenvectors: ComplexMatrix,
    pub left_eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest deviation of `leftᴴ · right` from the identity.
    pub fn biorthogonality_residual(&self) -> f64 {
        let prod = linalg::adjoint(&self.left_eigenvectors) * &self.right_eigenvectors;
        linalg::max_abs_diff(&prod, &linalg::identity(self.len()))
    }
}

/// Indices that put `values` in spectrum order.
pub fn spectral_order(values: &[C64]) -> Vec<usize> {
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let quantum = 1e-9 * scale;
    let key = |v: &C64| (v.re / quantum).round();
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        key(&values[b])
            .total_cmp(&key(&values[a]))
            .then(values[a].im.total_cmp(&values[b].im))
    });
    idx
}

pub fn sort_spectrum(values: &[C64]) -> Vec<C64> {
    spectral_order(values).into_iter().map(|i| values[i]).collect()
}

pub fn spectrum(l: &LiouvillianMatrix) -> Result<Spectrum> {
    let (values, vectors) = linalg::eigen(l.matrix())?;
    let order = spectral_order(&values);
    let n = values.len();
    let right = Mat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    let inv = linalg::inverse(&right);
    let left = Mat::from_fn(n, n, |i, j| inv[(j, i)].conj());
    if !(0..n).all(|j| left[(0, j)].re.is_finite()) {
        return Err(Error::Numeric(format!(
            "eigenvector matrix is singular (condition {:.3e}); generator is at or near an exceptional point",
            linalg::condition_number(&right)
        )));
    }
    Ok(Spectrum {
        eigenvalues: order.into_iter().map(|i| values[i]).collect(),
        right_eigenvectors: right,
        left_eigenvectors: left,
    })
}

/// Sorted eigenvalues without eigenvectors.
pub fn eigenvalues(l: &LiouvillianMatrix) -> Result<Vec<C64>> {
    Ok(sort_spectrum(&linalg::eigenvalues(l.matrix())?))
}

/// Relative size of eigenvalues treated as exact zeros of `L`.
pub const NULL_SPACE_TOL: f64 = 1e-12;

/// Residual bound `‖L vec(ρ_ss)‖₂ ≤ tol·max(1, ‖L‖₁)` accepted for a steady state.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-12;

/// Unique steady state of `L`.
///
/// Eigenvalues within `NULL_SPACE_TOL·‖L‖₁` of zero make up the null space;
/// more than one is an ambiguity error. The null vector is then obtained from
/// the bordered system in which one row of `L` is replaced by the trace
/// functional, Hermitized and trace normalized.
pub fn steady_state(l: &LiouvillianMatrix) -> Result<DensityMatrix> {
    let scale = linalg::norm_one(l.matrix()).max(1.0);
    let values = linalg::eigenvalues(l.matrix())?;
    let tol = NULL_SPACE_TOL * scale;
    let count = values.iter().filter(|v| v.norm() <= tol).count();
    if count > 1 {
        return Err(Error::AmbiguousSteadyState { count, tol });
    }
    let nearest = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if count == 0 {
        return Err(Error::Numeric(format!(
            "no eigenvalue within {tol:.3e} of zero (nearest {nearest:.3e}); the generator is not trace preserving"
        )));
    }
    let n = l.dim();
    let size = l.size();
    let mut bordered = l.matrix().clone();
    for col in 0..size {
        bordered[(0, col)] = ZERO;
    }
    for i in 0..n {
        bordered[(0, i * n + i)] = c(1.0, 0.0);
    }
    let mut rhs = vec![ZERO; size];
    rhs[0] = c(1.0, 0.0);
    let x = linalg::solve(&bordered, &rhs);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numeric("bordered steady-state system is singular".into()));
    }
    let rho = linalg::hermitian_part(&devectorize_slice(&x, n)?);
    let tr = linalg::trace(&rho).re;
    let rho = linalg::scale(&rho, c(1.0 / tr, 0.0));
    let residual = l
        .apply(vectorize(&rho)?.entries())
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if residual > STEADY_RESIDUAL_TOL * scale {
        return Err(Error::Numeric(format!(
            "steady-state residual {residual:.3e} exceeds {:.3e}",
            STEADY_RESIDUAL_TOL * scale
        )));
    }
    DensityMatrix::new(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_residual, max_abs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        Mat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        linalg::hermitian_part(&random_matrix(rng, n))
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n);
        let rho = &a * linalg::adjoint(&a);
        let tr = linalg::trace(&rho).re;
        linalg::scale(&rho, c(1.0 / tr, 0.0))
    }

    #[test]
    fn vectorize_examples() {
        let v = vectorize(&linalg::identity(2)).unwrap();
        assert_eq!(v.entries(), &[c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)]);
        let mut m = Mat::<C64>::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert_eq!(vectorize(&m).unwrap().entries(), &[ZERO, c(1.0, 0.0), ZERO, ZERO]);
        assert!(vectorize(&Mat::<C64>::zeros(2, 3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_matrix(&mut rng, 3);
        assert_eq!(devectorize(&vectorize(&r).unwrap()), r);
    }

    #[test]
    fn zero_generator() {
        let l = build_liouvillian(&Mat::zeros(3, 3), &[]).unwrap();
        assert_eq!(max_abs(l.matrix()), 0.0);
        assert!(build_liouvillian(&Mat::zeros(3, 3), &[Mat::zeros(2, 2)]).is_err());
    }

    #[test]
    fn matches_direct_master_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let h = random_hermitian(&mut rng, n);
        let jumps = vec![random_matrix(&mut rng, n), random_matrix(&mut rng, n)];
        let l = build_liouvillian(&h, &jumps).unwrap();
        assert!(l.trace_residual() < 1e-10);
        for _ in 0..20 {
            let rho = random_hermitian(&mut rng, n);
            let want = lindblad_rhs(&h, &jumps, &rho).unwrap();
            let got = l.act(&rho).unwrap();
            assert!(linalg::max_abs_diff(&got, &want) < 1e-10);
            assert!(hermiticity_residual(&got) < 1e-10);
        }
    }

    #[test]
    fn kerr_cat_generator_is_trace_preserving() {
        let params = ModelParams::from_alpha(1.3, 0.1, 0.4, -0.2).unwrap();
        let l = kerr_cat_liouvillian(&params, 12).unwrap();
        assert!(l.trace_residual() < 1e-10);
    }

    #[test]
    fn unitary_limit_is_imaginary_and_conjugate_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 4);
        let l = build_liouvillian(&h, &[]).unwrap();
        let spec = spectrum(&l).unwrap();
        for e in &spec.eigenvalues {
            assert!(e.re.abs() < 1e-9);
            assert!(spec.eigenvalues.iter().any(|f| (f - e.conj()).norm() < 1e-9));
        }
        let energies = linalg::hermitian_eigenvalues(&h).unwrap();
        for &em in &energies {
            for &en in &energies {
                let want = c(0.0, -(em - en));
                assert!(spec.eigenvalues.iter().any(|f| (f - want).norm() < 1e-9));
            }
        }
    }

    #[test]
    fn dissipative_spectrum_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let params = ModelParams::from_alpha(
                rng.gen_range(0.8..1.6),
                rng.gen_range(0.05..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            )
            .unwrap();
            let l = kerr_cat_liouvillian(&params, 8).unwrap();
            let spec = spectrum(&l).unwrap();
            let total: C64 = spec.eigenvalues.iter().sum();
            let tr = linalg::trace(l.matrix());
            assert!((total - tr).norm() < 1e-8 * tr.norm());
            assert!(spec.eigenvalues[0].norm() < 1e-8);
            for w in spec.eigenvalues.windows(2) {
                assert!(w[0].re >= w[1].re - 1e-9 * tr.norm());
            }
            for e in &spec.eigenvalues {
                assert!(e.re <= 1e-10);
                assert!(spec.eigenvalues.iter().any(|f| (f - e.conj()).norm() < 1e-9));
            }
            assert!(spec.biorthogonality_residual() < 1e-8);
        }
    }

    #[test]
    fn pure_loss_relaxes_to_vacuum() {
        let n = 6;
        let jump = linalg::scale(&fock::annihilation(n).unwrap(), c(0.3f64.sqrt(), 0.0));
        let l = build_liouvillian(&Mat::zeros(n, n), &[jump]).unwrap();
        let rho = steady_state(&l).unwrap();
        assert!((rho.matrix()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(linalg::trace(rho.matrix()).re, 1.0);
    }

    #[test]
    fn closed_system_is_ambiguous() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = build_liouvillian(&random_hermitian(&mut rng, 3), &[]).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::AmbiguousSteadyState { count: 3, .. })));
    }

    #[test]
    fn random_density_maps_to_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = ModelParams::from_alpha(1.1, 0.2, 0.3, 0.1).unwrap();
        let l = kerr_cat_liouvillian(&params, 7).unwrap();
        let rho = random_density(&mut rng, 7);
        let out = l.act(&rho).unwrap();
        assert!(hermiticity_residual(&out) < 1e-10);
        assert!(linalg::trace(&out).norm() < 1e-10);
    }
}
