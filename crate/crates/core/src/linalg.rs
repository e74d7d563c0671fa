//! Dense complex linear algebra shared by the operator, superoperator and
//! dynamics modules. Everything is backed by `faer`.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix used for operators, superoperators and states.
pub type ComplexMatrix = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Runs every dense kernel on the calling thread. Results then no longer
/// depend on the size of the surrounding rayon pool.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    Mat::identity(n, n)
}

pub fn scale(m: &ComplexMatrix, s: C64) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint().to_owned()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Largest entry of `|m - m†|`.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Maximum absolute column sum.
pub fn norm_one(m: &ComplexMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max(m[(i, j)].norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn mat_vec(m: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    let col = Col::<C64>::from_fn(v.len(), |i| v[i]);
    let out = m * &col;
    (0..out.nrows()).map(|i| out[i]).collect()
}

/// Eigenvalues and unit-norm eigenvectors of a Hermitian matrix, ascending.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver failed: {e:?}")))?;
    let values = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver failed: {e:?}")))
}

/// General eigendecomposition. Eigenvector columns are normalized to unit
/// Euclidean norm.
pub fn eigen(m: &ComplexMatrix) -> Result<(Vec<C64>, ComplexMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("eigen of non-square {}x{}", m.nrows(), m.ncols())));
    }
    if (0..m.ncols()).any(|j| (0..m.nrows()).any(|i| !(m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))) {
        return Err(Error::Numeric("eigen of a matrix with non-finite entries".into()));
    }
    let evd = m.eigen().map_err(|e| {
        Error::Numeric(format!(
            "eigensolver failed on {}x{} matrix (1-norm {:.3e}): {e:?}",
            m.nrows(),
            m.ncols(),
            norm_one(m)
        ))
    })?;
    let n = m.nrows();
    let values: Vec<C64> = (0..n).map(|i| evd.S()[i]).collect();
    let mut vectors = evd.U().to_owned();
    for j in 0..n {
        let norm = (0..n).map(|i| vectors[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                vectors[(i, j)] /= norm;
            }
        }
    }
    Ok((values, vectors))
}

/// Eigenvalues only of a general matrix.
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!("eigenvalues of non-square {}x{}", m.nrows(), m.ncols())));
    }
    m.eigenvalues().map_err(|e| {
        Error::Numeric(format!(
            "eigensolver failed on {}x{} matrix (1-norm {:.3e}): {e:?}",
            m.nrows(),
            m.ncols(),
            norm_one(m)
        ))
    })
}

pub fn inverse(m: &ComplexMatrix) -> ComplexMatrix {
    m.partial_piv_lu().inverse()
}

/// 1-norm condition number estimate via an explicit inverse.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let inv = inverse(m);
    let k = norm_one(m) * norm_one(&inv);
    if k.is_finite() {
        k
    } else {
        f64::INFINITY
    }
}

/// Solves `m x = rhs` for a single right-hand side.
pub fn solve(m: &ComplexMatrix, rhs: &[C64]) -> Vec<C64> {
    let b = Mat::<C64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = m.partial_piv_lu().solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

/// Square root of a positive semidefinite Hermitian matrix, clipping
/// eigenvalues in `[-clip, 0)` to zero.
pub fn psd_sqrt(m: &ComplexMatrix, clip: f64) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(m)?;
    let n = m.nrows();
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v < -clip {
                Err(Error::InvalidState { min_eig: v })
            } else {
                Ok(v.max(0.0).sqrt())
            }
        })
        .collect::<Result<_>>()?;
    let scaled = Mat::<C64>::from_fn(n, n, |i, j| vectors[(i, j)] * roots[j]);
    Ok(&scaled * vectors.adjoint())
}

// Padé coefficients and θ thresholds for scaling and squaring (Higham 2005).
const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn lin_comb(terms: &[(f64, &ComplexMatrix)], n: usize) -> ComplexMatrix {
    let mut out = Mat::<C64>::zeros(n, n);
    for &(w, m) in terms {
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += m[(i, j)] * w;
            }
        }
    }
    out
}

fn pade_low(a: &ComplexMatrix, b: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let mut powers = vec![id, a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let odd: Vec<(f64, &ComplexMatrix)> = powers.iter().enumerate().map(|(k, p)| (b[2 * k + 1], p)).collect();
    let even: Vec<(f64, &ComplexMatrix)> = powers.iter().enumerate().map(|(k, p)| (b[2 * k], p)).collect();
    let u = a * lin_comb(&odd, n);
    let v = lin_comb(&even, n);
    (u, v)
}

fn pade_13(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.nrows();
    let b = &B13;
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let u_tail = lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)], n);
    let u = a * (u_inner + u_tail);
    let v_inner = &a6 * lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let v_tail = lin_comb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)], n);
    (u, v_inner + v_tail)
}

/// Matrix exponential by Padé scaling and squaring.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Domain(format!("expm of non-square {}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let norm = norm_one(a);
    if !norm.is_finite() {
        return Err(Error::Numeric("expm of a matrix with non-finite entries".into()));
    }
    let ((u, v), squarings) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(3, _)) => (pade_low(a, &B3), 0),
        Some(&(5, _)) => (pade_low(a, &B5), 0),
        Some(&(7, _)) => (pade_low(a, &B7), 0),
        Some(_) => (pade_low(a, &B9), 0),
        None => {
            let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
            let scaled = scale(a, C64::from(0.5f64.powi(s)));
            (pade_13(&scaled), s)
        }
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
