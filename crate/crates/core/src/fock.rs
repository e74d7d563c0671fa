//! Truncated Fock-space operators, coherent and cat states, the Kerr-cat
//! Hamiltonian and Wigner functions.

use std::f64::consts::PI;

use faer::Mat;
use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexMatrix, C64, ZERO};
use crate::model::ModelParams;

/// Largest photon-number tail a state may lose to truncation.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Default truncation used for the device operating point (α² ≈ 2.3).
pub const DEFAULT_DIM: usize = 40;

/// What to do when a state does not fit in the truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncationPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// A pure state in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    /// Normalized copy of `amplitudes`.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("cannot normalize a zero or non-finite state".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::Domain(format!("Fock state |{n}> does not fit in dim {dim}")));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[n] = c(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply(&self, op: &ComplexMatrix) -> StateVector {
        StateVector::new(linalg::mat_vec(op, &self.amplitudes))
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        self.inner(&self.apply(op))
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::Domain(format!("Fock dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

/// Ladder operator with `a[n-1, n] = √n`.
pub fn annihilation(dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    Ok(Mat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            c((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    }))
}

pub fn creation(dim: usize) -> Result<ComplexMatrix> {
    Ok(linalg::adjoint(&annihilation(dim)?))
}

pub fn number_operator(dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    Ok(Mat::from_fn(dim, dim, |i, j| if i == j { c(i as f64, 0.0) } else { ZERO }))
}

/// Photon-number parity `(-1)^{a†a}`.
pub fn parity_operator(dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    Ok(Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            c(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            ZERO
        }
    }))
}

/// Smallest dimension that the rule of thumb `α² + 8α + 10` considers safe.
pub fn recommended_dim(alpha: f64) -> usize {
    let a2 = alpha * alpha;
    (a2 + 8.0 * alpha.abs() + 10.0).ceil() as usize
}

/// Poisson mass `e^{-α²} Σ_{n ≥ dim} α^{2n}/n!`, summed directly.
pub fn coherent_tail_mass(alpha: f64, dim: usize) -> f64 {
    let a2 = alpha * alpha;
    if a2 == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    // log of the first tail term e^{-α²} α^{2 dim} / dim!
    let mut log_term = -a2 + dim as f64 * a2.ln() - ln_factorial(dim);
    let mut total = 0.0;
    let mut n = dim;
    loop {
        let term = log_term.exp();
        total += term;
        n += 1;
        log_term += a2.ln() - (n as f64).ln();
        if (term < 1e-18 * total.max(1e-300) && n as f64 > a2) || n > dim + 10_000 {
            break;
        }
    }
    total.min(1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Coherent state |α⟩ for real α; errors if the truncation loses more than
/// [`TRUNCATION_TOL`] of the photon-number distribution.
pub fn coherent_state(alpha: f64, dim: usize) -> Result<StateVector> {
    coherent_state_with(alpha, dim, TruncationPolicy::Error)
}

pub fn coherent_state_with(alpha: f64, dim: usize, policy: TruncationPolicy) -> Result<StateVector> {
    check_dim(dim)?;
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("non-finite coherent amplitude {alpha}")));
    }
    let tail = coherent_tail_mass(alpha, dim);
    if tail > TRUNCATION_TOL {
        match policy {
            TruncationPolicy::Error => {
                return Err(Error::Truncation {
                    dim,
                    tail,
                    tol: TRUNCATION_TOL,
                })
            }
            TruncationPolicy::Warn => {
                warn!("coherent state alpha = {alpha} loses {tail:.3e} beyond dim {dim}")
            }
        }
    }
    let mut amplitudes = Vec::with_capacity(dim);
    let mut amp = (-0.5 * alpha * alpha).exp();
    for n in 0..dim {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        amplitudes.push(c(amp, 0.0));
    }
    StateVector::normalized(amplitudes)
}

/// Cat state `N(|α⟩ ± |−α⟩)`.
pub fn cat_state(alpha: f64, parity: Parity, dim: usize) -> Result<StateVector> {
    cat_state_with(alpha, parity, dim, TruncationPolicy::Error)
}

pub fn cat_state_with(alpha: f64, parity: Parity, dim: usize, policy: TruncationPolicy) -> Result<StateVector> {
    if alpha == 0.0 && parity == Parity::Odd {
        return Err(Error::Domain("the odd cat state is undefined at alpha = 0".into()));
    }
    let coherent = coherent_state_with(alpha, dim, policy)?;
    // |−α⟩ has amplitudes (−1)^n c_n, so the superposition keeps one parity.
    let amplitudes = coherent
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, &a)| {
            let keep = match parity {
                Parity::Even => n % 2 == 0,
                Parity::Odd => n % 2 == 1,
            };
            if keep {
                a
            } else {
                ZERO
            }
        })
        .collect();
    StateVector::normalized(amplitudes)
}

/// The computational basis `[|C⁺⟩, |C⁻⟩]`.
pub fn cat_basis(alpha: f64, dim: usize) -> Result<[StateVector; 2]> {
    Ok([cat_state(alpha, Parity::Even, dim)?, cat_state(alpha, Parity::Odd, dim)?])
}

/// `H = Δ a†a − K a†²a² + P(a†² + a²) + ε(a† + a)`.
pub fn build_hamiltonian(params: &ModelParams, dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    let mut h = Mat::<C64>::zeros(dim, dim);
    for n in 0..dim {
        let nf = n as f64;
        h[(n, n)] = c(params.delta * nf - params.kerr * nf * (nf - 1.0), 0.0);
        if n + 1 < dim {
            let v = c(params.drive * (nf + 1.0).sqrt(), 0.0);
            h[(n, n + 1)] = v;
            h[(n + 1, n)] = v;
        }
        if n + 2 < dim {
            let v = c(params.two_photon * ((nf + 1.0) * (nf + 2.0)).sqrt(), 0.0);
            h[(n, n + 2)] = v;
            h[(n + 2, n)] = v;
        }
    }
    Ok(h)
}

/// Displacement operator `exp(βa† − β*a)` of the truncated space.
///
/// Columns near the cutoff are distorted by the truncation; pad `dim` when
/// acting on states with weight in the upper Fock levels.
pub fn displacement(beta: C64, dim: usize) -> Result<ComplexMatrix> {
    let a = annihilation(dim)?;
    let gen = Mat::from_fn(dim, dim, |i, j| beta * a[(j, i)].conj() - beta.conj() * a[(i, j)]);
    linalg::expm(&gen)
}

/// Wigner function `W(x, p) = (2/π) Tr[ρ D(β) Π D†(β)]` with `β = x + ip`.
///
/// The displaced parity `D(β)ΠD†(β) = D(2β)Π` is evaluated through its
/// closed-form Fock matrix elements, so the result is exact for the given
/// (truncated) density matrix. Returns `values[ix][ip]`.
pub fn wigner(rho: &ComplexMatrix, xs: &[f64], ps: &[f64]) -> Result<Vec<Vec<f64>>> {
    let dim = rho.nrows();
    if rho.ncols() != dim {
        return Err(Error::Domain(format!("density matrix is {}x{}", dim, rho.ncols())));
    }
    if xs.iter().chain(ps).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite Wigner grid".into()));
    }
    let edge: f64 = (dim.saturating_sub(2)..dim).map(|n| rho[(n, n)].re.abs()).sum();
    if edge > 1e-8 {
        warn!("density matrix has population {edge:.3e} in its last two Fock levels; Wigner function may be unconverged");
    }
    let mut out = vec![vec![0.0; ps.len()]; xs.len()];
    for (ix, &x) in xs.iter().enumerate() {
        for (ip, &p) in ps.iter().enumerate() {
            out[ix][ip] = wigner_point(rho, x, p);
        }
    }
    Ok(out)
}

pub fn wigner_pure(state: &StateVector, xs: &[f64], ps: &[f64]) -> Result<Vec<Vec<f64>>> {
    wigner(&state.projector(), xs, ps)
}

fn wigner_point(rho: &ComplexMatrix, x: f64, p: f64) -> f64 {
    let dim = rho.nrows();
    let gamma = c(2.0 * x, 2.0 * p);
    let r2 = gamma.norm_sqr();
    let phase = if r2 > 0.0 { gamma / r2.sqrt() } else { c(1.0, 0.0) };
    let mut total = 0.0;
    let mut phase_k = c(1.0, 0.0);
    let mut f = vec![0.0; dim];
    for k in 0..dim {
        displaced_laguerre(r2, k, dim - k, &mut f);
        let mut acc = ZERO;
        for n in 0..dim - k {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += rho[(n, n + k)] * (sign * f[n]);
        }
        if k == 0 {
            total += acc.re;
        } else {
            total += 2.0 * (acc * phase_k).re;
        }
        phase_k *= phase;
    }
    2.0 / PI * total
}

/// Fills `out[j] = √(j!/(j+k)!) x^{k/2} e^{−x/2} L_j^{(k)}(x)` for `j < len`.
fn displaced_laguerre(x: f64, k: usize, len: usize, out: &mut [f64]) {
    if len == 0 {
        return;
    }
    let kf = k as f64;
    out[0] = if k == 0 {
        (-0.5 * x).exp()
    } else if x == 0.0 {
        0.0
    } else {
        (0.5 * kf * x.ln() - 0.5 * x - 0.5 * ln_factorial(k)).exp()
    };
    if len > 1 {
        out[1] = (1.0 + kf - x) * out[0] / (kf + 1.0).sqrt();
    }
    for j in 1..len - 1 {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + kf + 1.0 - x) * out[j] - (jf * (jf + kf)).sqrt() * out[j - 1])
            / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_residual, max_abs_diff};
    use approx::assert_relative_eq;

    const ALPHA: f64 = 1.521;

    #[test]
    fn annihilation_small() {
        let a = annihilation(2).unwrap();
        assert_eq!(a[(0, 1)], c(1.0, 0.0));
        assert_eq!(a[(0, 0)], ZERO);
        assert_eq!(a[(1, 0)], ZERO);
        assert_eq!(a[(1, 1)], ZERO);
        assert!(annihilation(1).is_err());
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = annihilation(4).unwrap();
        let n = linalg::adjoint(&a) * &a;
        assert!(max_abs_diff(&n, &number_operator(4).unwrap()) < 1e-15);
    }

    #[test]
    fn commutator_truncation_artifact() {
        let dim = 6;
        let a = annihilation(dim).unwrap();
        let ad = creation(dim).unwrap();
        let comm = &a * &ad - &ad * &a;
        for i in 0..dim {
            for j in 0..dim {
                let want = if i != j {
                    0.0
                } else if i == dim - 1 {
                    -((dim - 1) as f64)
                } else {
                    1.0
                };
                assert!((comm[(i, j)] - c(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn coherent_state_basics() {
        let vac = coherent_state(0.0, 8).unwrap();
        assert_eq!(vac.amplitudes()[0], c(1.0, 0.0));
        assert!(vac.amplitudes()[1..].iter().all(|a| *a == ZERO));

        let s = coherent_state(ALPHA, 40).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        // Poisson mean α² with α = 1.521.
        let n = s.expectation(&number_operator(40).unwrap()).re;
        assert_relative_eq!(n, ALPHA * ALPHA, max_relative = 1e-12);
        assert_relative_eq!(n, 2.313, max_relative = 1e-3);

        let minus = coherent_state(-ALPHA, 40).unwrap();
        // e^{-2α²} at α = 1.521, 40-digit reference.
        assert_relative_eq!(s.inner(&minus).re, 0.009_785_221_908_058_365, max_relative = 1e-10);
    }

    #[test]
    fn coherent_state_truncation_error() {
        assert!(matches!(coherent_state(3.0, 10), Err(Error::Truncation { .. })));
        assert!(coherent_state_with(3.0, 10, TruncationPolicy::Warn).is_ok());
        assert!(coherent_state(ALPHA, recommended_dim(ALPHA)).is_ok());
    }

    #[test]
    fn cat_states() {
        let [plus, minus] = cat_basis(ALPHA, 40).unwrap();
        assert!(plus.inner(&minus).norm() < 1e-12);
        for (n, a) in plus.amplitudes().iter().enumerate() {
            if n % 2 == 1 {
                assert_eq!(*a, ZERO);
            }
        }
        for (n, a) in minus.amplitudes().iter().enumerate() {
            if n % 2 == 0 {
                assert_eq!(*a, ZERO);
            }
        }
        let consts = crate::model::subspace_constants(ALPHA).unwrap();
        let a = annihilation(40).unwrap();
        // a|C+> = α p |C->
        let lhs = plus.apply(&a);
        let rhs: Vec<C64> = minus.amplitudes().iter().map(|v| v * (ALPHA * consts.p)).collect();
        let err = lhs.amplitudes().iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
        // ⟨n⟩ of the even cat is α²p² = α² tanh(α²).
        let n = plus.expectation(&number_operator(40).unwrap()).re;
        assert_relative_eq!(n, 2.268_604_666_361_792_7, max_relative = 1e-10);
        // in-subspace component of a† obeys a†|C±⟩ = α p^{∓1}|C∓⟩
        let ad = creation(40).unwrap();
        let up = minus.inner(&plus.apply(&ad));
        assert!((up - c(ALPHA / consts.p, 0.0)).norm() < 1e-6);
        let down = plus.inner(&minus.apply(&ad));
        assert!((down - c(ALPHA * consts.p, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn cat_photon_number_converged_in_dim() {
        for alpha in [0.5, 1.0, 1.521, 1.6] {
            let n40 = cat_state(alpha, Parity::Even, 40).unwrap().expectation(&number_operator(40).unwrap()).re;
            let n80 = cat_state(alpha, Parity::Even, 80).unwrap().expectation(&number_operator(80).unwrap()).re;
            assert!((n40 - n80).abs() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_properties() {
        let params = ModelParams::new(0.0, 2.0 * PI * 6.7, 2.0 * PI * 15.5, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&params, 40).unwrap();
        assert_eq!(hermiticity_residual(&h), 0.0);

        let alpha = params.alpha();
        let energy = params.two_photon * params.two_photon / params.kerr;
        for sign in [1.0, -1.0] {
            let s = coherent_state(sign * alpha, 40).unwrap();
            let hs = s.apply(&h);
            let res = hs
                .amplitudes()
                .iter()
                .zip(s.amplitudes())
                .map(|(x, y)| (x - y * energy).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-6, "residual {res}");
        }

        let evals = linalg::hermitian_eigenvalues(&h).unwrap();
        let top = evals[39];
        assert_relative_eq!(top, energy, max_relative = 1e-10);
        assert_relative_eq!(evals[38], energy, max_relative = 1e-6);
        // 4Kα² is the large-α gap; at α² ≈ 2.3 the exact value is two thirds of it
        let gap = top - evals[37];
        let estimate = 4.0 * params.kerr * alpha * alpha;
        assert!(gap > 0.6 * estimate && gap < estimate, "gap {gap} vs {estimate}");
        let big = ModelParams::new(0.0, 1.0, 16.0, 0.0, 0.0).unwrap();
        let evals = linalg::hermitian_eigenvalues(&build_hamiltonian(&big, 80).unwrap()).unwrap();
        assert_relative_eq!(evals[79] - evals[77], 64.0, max_relative = 0.05);

        let zero = ModelParams { delta: 0.0, kerr: 0.0, two_photon: 0.0, drive: 0.0, kappa: 0.0 };
        assert_eq!(linalg::max_abs(&build_hamiltonian(&zero, 5).unwrap()), 0.0);
    }

    #[test]
    fn wigner_origin_values() {
        let vac = StateVector::fock(0, 10).unwrap();
        let w = wigner_pure(&vac, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(w[0][0], 2.0 / PI, max_relative = 1e-14);
        let odd = cat_state(ALPHA, Parity::Odd, 40).unwrap();
        let w = wigner_pure(&odd, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(w[0][0], -2.0 / PI, max_relative = 1e-12);
    }

    #[test]
    fn wigner_coherent_peak_sits_at_alpha() {
        let s = coherent_state(1.2, 30).unwrap();
        let w = wigner_pure(&s, &[1.2, -1.2], &[0.0, 0.3]).unwrap();
        assert_relative_eq!(w[0][0], 2.0 / PI, max_relative = 1e-10);
        assert_relative_eq!(w[0][1], 2.0 / PI * (-2.0f64 * 0.09).exp(), max_relative = 1e-10);
        assert!(w[1][0] < 1e-5);
    }

    #[test]
    fn wigner_matches_padded_displacement() {
        // Oracle: (2/π) ⟨ψ|D Π D†|ψ⟩ with D from a matrix exponential in a
        // much larger space, so the truncated D is accurate on ψ's support.
        let dim = 12;
        let big = 90;
        let psi = StateVector::normalized(
            (0..dim).map(|n| c(1.0 / (1.0 + n as f64), 0.3 * n as f64 - 0.5)).collect(),
        )
        .unwrap();
        let mut padded = psi.amplitudes().to_vec();
        padded.resize(big, ZERO);
        let padded = StateVector::new(padded);
        let parity = parity_operator(big).unwrap();
        for &(x, p) in &[(0.0, 0.0), (0.7, -0.4), (-1.3, 1.1), (2.0, 0.5)] {
            let d = displacement(c(x, p), big).unwrap();
            let op = &d * &parity * linalg::adjoint(&d);
            let want = 2.0 / PI * padded.expectation(&op).re;
            let got = wigner_pure(&psi, &[x], &[p]).unwrap()[0][0];
            assert!((got - want).abs() < 1e-10, "({x}, {p}): {got} vs {want}");
        }
    }

    #[test]
    fn wigner_normalization_even_cat() {
        let s = cat_state(ALPHA, Parity::Even, 40).unwrap();
        let h = 0.05;
        let grid: Vec<f64> = (0..=200).map(|i| -5.0 + h * i as f64).collect();
        let w = wigner_pure(&s, &grid, &grid).unwrap();
        let total: f64 = w.iter().flatten().sum::<f64>() * h * h;
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
        assert!(w.iter().flatten().all(|v| v.is_finite()));
    }
}
