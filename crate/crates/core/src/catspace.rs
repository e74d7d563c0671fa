//! The Liouvillian projected onto the cat manifold `{|C⁺⟩, |C⁻⟩}`, its
//! depressed-cubic invariants and closed-form spectrum.
//!
//! Basis order is `(ρ₊₊, ρ₊₋, ρ₋₊, ρ₋₋)`. Removing the steady-state root and
//! shifting `E = shift + t` leaves `t³ − 3m t − 2q = 0` with real `q`, `m`.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::Result;
use crate::linalg::{self, c, ComplexMatrix, C64, I, ZERO};
use crate::model::{subspace_constants, CatSubspaceConstants, ModelParams};

/// Relative rounding floor below which `q`, `m` and `q² − m³` are snapped to zero.
pub const ROUNDING_FLOOR: f64 = 256.0 * f64::EPSILON;

/// The projected model at fixed α and κ; the remaining knobs are (ε, Δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatModel {
    pub constants: CatSubspaceConstants,
    pub kappa: f64,
}

impl CatModel {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(crate::Error::Domain(format!("kappa must be finite and non-negative, got {kappa}")));
        }
        Ok(Self {
            constants: subspace_constants(alpha)?,
            kappa,
        })
    }

    pub fn from_params(params: &ModelParams) -> Self {
        Self {
            constants: params.constants(),
            kappa: params.kappa,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.constants.alpha
    }

    /// The rate unit `κα²` used to make tolerances dimensionless.
    pub fn rate_scale(&self) -> f64 {
        self.kappa * self.constants.alpha_sq()
    }

    pub fn reduced(&self, eps: f64, delta: f64) -> ReducedLiouvillian {
        let k = &self.constants;
        let a = k.alpha;
        let a2 = k.alpha_sq();
        let kap = self.kappa;
        let p2 = k.p_sq();
        let drive = I * (a * eps * k.plus(1));
        let gain = c(a2 * kap / p2, 0.0);
        let loss = c(a2 * kap * p2, 0.0);
        let coh = c(-0.5 * a2 * kap * k.plus(2), a2 * delta * k.minus(2));
        let flip = c(a2 * kap, 0.0);
        ReducedLiouvillian {
            entries: [
                [-loss, drive, -drive, gain],
                [drive, coh, flip, -drive],
                [-drive, flip, coh.conj(), drive],
                [loss, -drive, drive, -gain],
            ],
        }
    }

    pub fn invariants(&self, eps: f64, delta: f64) -> CubicInvariants {
        let k = &self.constants;
        let a2 = k.alpha_sq();
        let kap = self.kappa;
        let (x, y, k2) = (delta * delta, eps * eps, kap * kap);
        let m_terms = [
            a2 * k2 * (k.plus(4) + 14.0),
            -12.0 * x * a2 * k.minus(2) * k.minus(2),
            -48.0 * y * (k.plus(2) + 2.0),
        ];
        let q_terms = [
            -36.0 * x * a2 * k.minus(4) * k.minus(2),
            -k2 * a2 * k.plus(6),
            33.0 * k2 * a2 * k.plus(2),
            72.0 * y * (k.plus(4) + 8.0 * k.plus(2) + 14.0),
        ];
        let m_pref = a2 / 36.0;
        let q_pref = kap * a2 * a2 / 216.0;
        let mut m = m_pref * m_terms.iter().sum::<f64>();
        let mut q = q_pref * q_terms.iter().sum::<f64>();
        let m_floor = ROUNDING_FLOOR * m_pref * m_terms.iter().map(|t| t.abs()).sum::<f64>();
        let q_floor = ROUNDING_FLOOR * q_pref * q_terms.iter().map(|t| t.abs()).sum::<f64>();
        if m.abs() <= m_floor {
            m = 0.0;
        }
        if q.abs() <= q_floor {
            q = 0.0;
        }
        let shift = -2.0 / 3.0 * kap * a2 * k.plus(2);
        CubicInvariants::from_parts(shift, q, m, q_floor, m_floor)
    }

    pub fn spectrum(&self, eps: f64, delta: f64) -> ReducedSpectrum {
        self.invariants(eps, delta).spectrum()
    }
}

/// The projected 4×4 generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedLiouvillian {
    pub entries: [[C64; 4]; 4],
}

impl ReducedLiouvillian {
    pub fn matrix(&self) -> ComplexMatrix {
        Mat::from_fn(4, 4, |i, j| self.entries[i][j])
    }

    pub fn apply(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (i, row) in self.entries.iter().enumerate() {
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    /// Largest entry of `(1, 0, 0, 1) · L`.
    pub fn trace_residual(&self) -> f64 {
        (0..4)
            .map(|j| (self.entries[0][j] + self.entries[3][j]).norm())
            .fold(0.0, f64::max)
    }

    /// Numerical eigenvalues, in spectrum order.
    pub fn numeric_eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(crate::liouville::sort_spectrum(&linalg::eigenvalues(&self.matrix())?))
    }
}

pub fn reduced_liouvillian(params: &ModelParams) -> ReducedLiouvillian {
    CatModel::from_params(params).reduced(params.drive, params.delta)
}

/// Invariants of the depressed cubic `t³ − 3m t − 2q` with `E = shift + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicInvariants {
    pub shift: f64,
    pub q: f64,
    pub m: f64,
    pub eta_plus: C64,
    pub eta_minus: C64,
    /// `q² − m³`, snapped to zero below its rounding floor.
    pub discriminant: f64,
    /// Absolute rounding floors of `q`, `m` and the discriminant.
    pub q_floor: f64,
    pub m_floor: f64,
    pub disc_floor: f64,
}

impl CubicInvariants {
    /// Builds the invariants from `q`, `m` with zero rounding floors.
    pub fn new(shift: f64, q: f64, m: f64) -> Self {
        Self::from_parts(shift, q, m, 0.0, 0.0)
    }

    fn from_parts(shift: f64, q: f64, m: f64, q_floor: f64, m_floor: f64) -> Self {
        let q2 = q * q;
        let m3 = m * m * m;
        let mut disc = q2 - m3;
        let disc_floor = ROUNDING_FLOOR * (q2 + m3.abs()) + 2.0 * q.abs() * q_floor + 3.0 * m * m * m_floor;
        if disc.abs() <= disc_floor {
            disc = 0.0;
        }
        let (eta_plus, eta_minus) = cube_roots(q, m, disc);
        Self {
            shift,
            q,
            m,
            eta_plus,
            eta_minus,
            discriminant: disc,
            q_floor,
            m_floor,
            disc_floor,
        }
    }

    /// Labelled roots of the cubic plus the steady-state zero.
    pub fn spectrum(&self) -> ReducedSpectrum {
        let (q, m, d, s) = (self.q, self.m, self.discriminant, self.shift);
        let (e2, e3, e4) = if q == 0.0 && m == 0.0 {
            (c(s, 0.0), c(s, 0.0), c(s, 0.0))
        } else if d == 0.0 {
            // Double root; u = v = ∛q.
            let u = self.eta_plus.re;
            let mut t = [2.0 * u, -u, -u];
            t.sort_by(|a, b| b.total_cmp(a));
            (c(s + t[0], 0.0), c(s + t[1], 0.0), c(s + t[2], 0.0))
        } else if d > 0.0 {
            // One real root and a conjugate pair; u, v real with u v = m.
            let u = self.eta_plus.re;
            let v = self.eta_minus.re;
            let re = s - 0.5 * (u + v);
            let im = 0.5 * 3f64.sqrt() * (u - v).abs();
            (c(s + u + v, 0.0), c(re, im), c(re, -im))
        } else {
            // Three real roots: t_k = 2√m cos(θ − 2πk/3).
            let r = 2.0 * m.sqrt();
            let theta = (-d).sqrt().atan2(q) / 3.0;
            let mut t = [0, 1, 2].map(|k| r * (theta - 2.0 * PI * f64::from(k) / 3.0).cos());
            t.sort_by(|a, b| b.total_cmp(a));
            (c(s + t[0], 0.0), c(s + t[1], 0.0), c(s + t[2], 0.0))
        };
        ReducedSpectrum {
            e1: ZERO,
            e2,
            e3,
            e4,
        }
    }
}

/// `η₊` from the larger-magnitude branch `q ± √(q² − m³)`, and `η₋ = m/η₊`.
fn cube_roots(q: f64, m: f64, disc: f64) -> (C64, C64) {
    if disc >= 0.0 {
        let root = disc.sqrt();
        let arg = if q >= 0.0 { q + root } else { q - root };
        let u = arg.cbrt();
        if u == 0.0 {
            return (ZERO, ZERO);
        }
        (c(u, 0.0), c(m / u, 0.0))
    } else {
        let u = c(q, (-disc).sqrt()).powf(1.0 / 3.0);
        (u, c(m, 0.0) / u)
    }
}

pub fn cubic_invariants(params: &ModelParams) -> CubicInvariants {
    CatModel::from_params(params).invariants(params.drive, params.delta)
}

/// The four eigenvalues of the projected generator.
///
/// `e1` is the steady-state zero. When the other three are all real, `e2 ≥ e3 ≥ e4`;
/// otherwise `e2` is the real root and `e3` (`e4`) has positive (negative)
/// imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSpectrum {
    pub e1: C64,
    pub e2: C64,
    pub e3: C64,
    pub e4: C64,
}

impl ReducedSpectrum {
    pub fn as_array(&self) -> [C64; 4] {
        [self.e1, self.e2, self.e3, self.e4]
    }

    pub fn nonzero(&self) -> [C64; 3] {
        [self.e2, self.e3, self.e4]
    }

    /// Largest pairwise distance among the three nonzero eigenvalues.
    pub fn max_spread(&self) -> f64 {
        let e = self.nonzero();
        let d = |a: C64, b: C64| (a - b).norm();
        d(e[0], e[1]).max(d(e[0], e[2])).max(d(e[1], e[2]))
    }

    /// Smallest pairwise distance among the three nonzero eigenvalues.
    pub fn min_gap(&self) -> f64 {
        let e = self.nonzero();
        let d = |a: C64, b: C64| (a - b).norm();
        d(e[0], e[1]).min(d(e[0], e[2])).min(d(e[1], e[2]))
    }
}

pub fn cardano_eigenvalues(params: &ModelParams) -> ReducedSpectrum {
    cubic_invariants(params).spectrum()
}

/// Largest relative mismatch between two eigenvalue multisets under the
/// minimal-distance assignment. Each distance is divided by `max(|a|, |b|, floor)`.
pub fn multiset_mismatch(a: &[C64], b: &[C64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    let mut best_worst = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = (0..n).map(|i| (a[i] - b[p[i]]).norm()).sum();
        if total < best {
            best = total;
            best_worst = (0..n)
                .map(|i| (a[i] - b[p[i]]).norm() / a[i].norm().max(b[p[i]].norm()).max(floor))
                .fold(0.0, f64::max);
        }
    });
    best_worst
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}
