//! Second- and third-order exceptional points of the projected generator in
//! the (ε, Δ) plane.
//!
//! Detection works on the polynomial invariants `q`, `m`: second-order points
//! are zeros of `q² − m³`, third-order points are common zeros of `q` and `m`.
//! Residuals are compared against powers of the rate unit `κα²`.

use serde::{Deserialize, Serialize};

use crate::catspace::{CatModel, CubicInvariants, ReducedLiouvillian};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ModelParams;

/// Default relative tolerance for classifying a point as exceptional.
pub const EP_TOL: f64 = 1e-10;

/// Dimensional scales `(κα²)³`, `(κα²)²` and `(κα²)⁶` for `q`, `m` and `q² − m³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualScales {
    pub q: f64,
    pub m: f64,
    pub disc: f64,
}

impl ResidualScales {
    pub fn of(model: &CatModel) -> Self {
        let r = model.rate_scale();
        Self {
            q: r.powi(3),
            m: r.powi(2),
            disc: r.powi(6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpPoint {
    pub eps: f64,
    pub delta: f64,
    /// 2 or 3.
    pub order: u8,
    /// `|q² − m³|`.
    pub disc_residual: f64,
    pub q: f64,
    pub m: f64,
    /// Largest eigenvector overlap among the nonzero modes.
    pub coalescence: f64,
}

impl EpPoint {
    /// Evaluates the residuals at (ε, Δ) and labels the point with `order`.
    pub fn evaluate(model: &CatModel, eps: f64, delta: f64, order: u8) -> Self {
        let inv = model.invariants(eps, delta);
        let coalescence = coalescence_metric(&model.reduced(eps, delta), 0.0)
            .map(|c| c.largest)
            .unwrap_or(f64::NAN);
        Self {
            eps,
            delta,
            order,
            disc_residual: inv.discriminant.abs(),
            q: inv.q,
            m: inv.m,
            coalescence,
        }
    }
}

/// Order of the exceptional point described by `inv`, if any.
pub fn ep_order(inv: &CubicInvariants, scales: &ResidualScales, tol: f64) -> Option<u8> {
    if inv.q.abs() <= tol * scales.q && inv.m.abs() <= tol * scales.m {
        Some(3)
    } else if inv.discriminant.abs() <= tol * scales.disc {
        Some(2)
    } else {
        None
    }
}

/// `q² − m³` at the given parameters.
pub fn discriminant(params: &ModelParams) -> f64 {
    crate::catspace::cubic_invariants(params).discriminant
}

/// Position `|Δ| = κ/p₂⁻` of the double-root line at ε = 0.
pub fn lep2_delta_at_zero_drive(model: &CatModel) -> f64 {
    model.kappa / model.constants.minus(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lep2Options {
    /// Samples of the Δ ≥ 0 half-line scanned for sign changes.
    pub n_delta: usize,
    /// Upper end of the Δ scan; defaults to three times the larger of the
    /// ε = 0 double-root detuning and the third-order detuning.
    pub delta_max: Option<f64>,
    /// Bisect in ε where the number of roots changes between slices.
    pub refine: bool,
}

impl Default for Lep2Options {
    fn default() -> Self {
        Self {
            n_delta: 4000,
            delta_max: None,
            refine: true,
        }
    }
}

/// A traced curve that stops inside the ε range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTermination {
    pub curve: usize,
    /// ε where the root disappears, refined by bisection when enabled.
    pub eps: f64,
    pub delta: f64,
    /// Whether a closed-form third-order point lies within two ε steps and
    /// about a percent in Δ of the termination.
    pub near_lep3: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lep2Trace {
    pub curves: Vec<Vec<EpPoint>>,
    pub terminations: Vec<CurveTermination>,
}

impl Lep2Trace {
    pub fn points(&self) -> impl Iterator<Item = &EpPoint> {
        self.curves.iter().flatten()
    }
}

fn default_delta_max(model: &CatModel) -> f64 {
    if model.kappa == 0.0 {
        return 1.0;
    }
    let line = lep2_delta_at_zero_drive(model);
    let lep3 = lep3_magnitudes(model).map(|(_, d)| d).unwrap_or(line);
    3.0 * line.max(lep3)
}

/// Roots Δ of `q² − m³` at fixed ε, both signs, ascending.
///
/// Only sign changes of the unsnapped discriminant count, so tangential
/// zeros are not reported. A lossless model has none.
pub fn discriminant_roots(model: &CatModel, eps: f64, delta_max: f64, n_delta: usize) -> Vec<f64> {
    if model.kappa == 0.0 {
        return Vec::new();
    }
    let disc = |d: f64| {
        let inv = model.invariants(eps, d);
        inv.q * inv.q - inv.m * inv.m * inv.m
    };
    let mut roots = Vec::new();
    let n = n_delta.max(2);
    let h = delta_max / n as f64;
    let mut prev_x = 0.0;
    let mut prev = disc(0.0);
    for i in 1..=n {
        let x = h * i as f64;
        let v = disc(x);
        if (v > 0.0) != (prev > 0.0) {
            roots.push(bisect(&disc, prev_x, x, prev));
        }
        prev_x = x;
        prev = v;
    }
    let mut all: Vec<f64> = roots.iter().map(|r| -r).collect();
    all.extend(roots);
    all.sort_by(f64::total_cmp);
    all
}

/// Bisects a sign change of `f` on `[a, b]` down to relative width 1e-14.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || (b - a) <= 1e-14 * mid.abs() {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Traces the double-root curves over `n_eps` slices of `eps_range`.
///
/// Roots of each slice are attached to the curve whose linear extrapolation
/// lands closest; a curve that finds no partner ends with a termination
/// record, and unmatched roots open new curves.
pub fn lep2_trace(model: &CatModel, eps_range: (f64, f64), n_eps: usize, options: &Lep2Options) -> Result<Lep2Trace> {
    let (lo, hi) = eps_range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || n_eps < 2 {
        return Err(Error::Domain(format!("invalid eps range [{lo}, {hi}] with {n_eps} slices")));
    }
    let delta_max = options.delta_max.unwrap_or_else(|| default_delta_max(model));
    let step = (hi - lo) / (n_eps - 1) as f64;
    let d_step = delta_max / options.n_delta.max(2) as f64;
    let lep3 = lep3_magnitudes(model).ok();
    let near_lep3 = |eps: f64, delta: f64| {
        // two cusp branches closer than one scan cell merge early, so allow a
        // percent of slack in Δ
        lep3.is_some_and(|(e3, d3)| {
            (eps.abs() - e3).abs() <= 2.0 * step && (delta.abs() - d3).abs() <= 0.01 * d3 + 2.0 * d_step
        })
    };

    let mut trace = Lep2Trace::default();
    // (curve index, last two (eps, delta))
    let mut active: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    let mut prev_count: Option<usize> = None;
    for i in 0..n_eps {
        let eps = if i + 1 == n_eps { hi } else { lo + step * i as f64 };
        let roots = discriminant_roots(model, eps, delta_max, options.n_delta);

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (a, (_, hist)) in active.iter().enumerate() {
            let predicted = match hist.as_slice() {
                [.., (e0, d0), (e1, d1)] if e1 != e0 => d1 + (d1 - d0) / (e1 - e0) * (eps - e1),
                [.., (_, d1)] => *d1,
                [] => unreachable!(),
            };
            for (r, &root) in roots.iter().enumerate() {
                pairs.push(((root - predicted).abs(), a, r));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut used_curve = vec![false; active.len()];
        let mut used_root = vec![false; roots.len()];
        let mut assignment = vec![None; active.len()];
        for (_, a, r) in pairs {
            if !used_curve[a] && !used_root[r] {
                used_curve[a] = true;
                used_root[r] = true;
                assignment[a] = Some(r);
            }
        }

        let count_changed = prev_count.is_some_and(|c| c != roots.len());
        let mut next_active = Vec::new();
        for (a, (curve, mut hist)) in active.into_iter().enumerate() {
            match assignment[a] {
                Some(r) => {
                    trace.curves[curve].push(EpPoint::evaluate(model, eps, roots[r], 2));
                    hist.push((eps, roots[r]));
                    if hist.len() > 2 {
                        hist.remove(0);
                    }
                    next_active.push((curve, hist));
                }
                None => {
                    let &(e_last, d_last) = hist.last().expect("active curve has history");
                    let (e_end, d_end) = if options.refine && count_changed {
                        refine_end(model, e_last, eps, d_last, delta_max, options.n_delta)
                    } else {
                        (e_last, d_last)
                    };
                    trace.terminations.push(CurveTermination {
                        curve,
                        eps: e_end,
                        delta: d_end,
                        near_lep3: near_lep3(e_end, d_end),
                    });
                }
            }
        }
        for (r, &root) in roots.iter().enumerate() {
            if !used_root[r] {
                let curve = trace.curves.len();
                trace.curves.push(vec![EpPoint::evaluate(model, eps, root, 2)]);
                next_active.push((curve, vec![(eps, root)]));
            }
        }
        active = next_active;
        prev_count = Some(roots.len());
    }
    Ok(trace)
}

/// Locates where a root near `delta` present at `e_in` disappears before `e_out`.
fn refine_end(model: &CatModel, mut e_in: f64, mut e_out: f64, mut delta: f64, delta_max: f64, n_delta: usize) -> (f64, f64) {
    let near = |e: f64, d: f64| {
        discriminant_roots(model, e, delta_max, n_delta)
            .into_iter()
            .min_by(|a, b| (a - d).abs().total_cmp(&(b - d).abs()))
    };
    let tol = 1e-10 * e_in.abs().max(e_out.abs()).max(1e-300);
    for _ in 0..60 {
        if (e_out - e_in).abs() <= tol {
            break;
        }
        let mid = 0.5 * (e_in + e_out);
        let spacing = delta_max / n_delta as f64;
        match near(mid, delta) {
            Some(d) if (d - delta).abs() <= 0.1 * delta.abs() + 4.0 * spacing => {
                e_in = mid;
                delta = d;
            }
            _ => e_out = mid,
        }
    }
    (e_in, delta)
}

/// `(|ε|, |Δ|)` of the third-order points.
pub fn lep3_magnitudes(model: &CatModel) -> Result<(f64, f64)> {
    if !(model.kappa > 0.0) {
        return Err(Error::Domain("third-order points need kappa > 0".into()));
    }
    let k = &model.constants;
    let p = k.p;
    let p2 = k.p_sq();
    let p4 = p2 * p2;
    let one_minus = k.one_minus_p_sq();
    let kap = model.kappa;
    let eps = 6f64.sqrt() * kap / 18.0 * k.alpha * (p4 + 1.0).powf(1.5) / (p * (p2 + 1.0).powi(2));
    let delta = 3f64.sqrt() * kap / 18.0 * (p4 + 6.0 * p2 + 1.0).powf(1.5) / (one_minus * (p2 + 1.0).powi(2));
    if one_minus == 0.0 || !delta.is_finite() || !eps.is_finite() {
        return Err(Error::Numeric(format!(
            "third-order detuning overflows at alpha = {} (1 - p^2 = {one_minus:e})",
            k.alpha
        )));
    }
    Ok((eps, delta))
}

/// The four sign images `(±|ε|, ±|Δ|)` of the third-order point.
pub fn lep3_closed_form(model: &CatModel) -> Result<[EpPoint; 4]> {
    let (e, d) = lep3_magnitudes(model)?;
    Ok([(e, d), (-e, d), (e, -d), (-e, -d)].map(|(eps, delta)| EpPoint::evaluate(model, eps, delta, 3)))
}

/// Newton search for a common zero of `q` and `m` from `seed = (ε, Δ)`.
pub fn lep3_numeric(model: &CatModel, seed: (f64, f64)) -> Result<EpPoint> {
    const MAX_ITER: usize = 100;
    let scales = ResidualScales::of(model);
    if !(scales.q > 0.0) {
        return Err(Error::Domain("third-order search needs kappa > 0".into()));
    }
    let r = model.rate_scale();
    let f = |e: f64, d: f64| {
        let inv = model.invariants(e, d);
        [inv.q / scales.q, inv.m / scales.m]
    };
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let (mut e, mut d) = seed;
    let mut fx = f(e, d);
    let mut history = Vec::new();
    for it in 0..MAX_ITER {
        history.push(format!("#{it}: eps = {e:.6e}, delta = {d:.6e}, |F| = {:.3e}", norm(fx)));
        if norm(fx) <= 1e-12 {
            return Ok(EpPoint::evaluate(model, e, d, 3));
        }
        let he = 1e-6 * e.abs().max(1e-3 * r);
        let hd = 1e-6 * d.abs().max(1e-3 * r);
        let (fe1, fe0) = (f(e + he, d), f(e - he, d));
        let (fd1, fd0) = (f(e, d + hd), f(e, d - hd));
        let j = [
            [(fe1[0] - fe0[0]) / (2.0 * he), (fd1[0] - fd0[0]) / (2.0 * hd)],
            [(fe1[1] - fe0[1]) / (2.0 * he), (fd1[1] - fd0[1]) / (2.0 * hd)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jscale = (j[0][0].abs() + j[0][1].abs()) * (j[1][0].abs() + j[1][1].abs());
        if !(det.abs() > 1e-12 * jscale) || !det.is_finite() {
            return Err(Error::SearchFailure {
                iterations: it,
                reason: format!("singular Jacobian (det = {det:.3e}); {}", history.join("; ")),
            });
        }
        let de = -(j[1][1] * fx[0] - j[0][1] * fx[1]) / det;
        let dd = -(-j[1][0] * fx[0] + j[0][0] * fx[1]) / det;
        // Backtrack until the residual decreases.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = f(e + t * de, d + t * dd);
            if norm(cand) < norm(fx) {
                e += t * de;
                d += t * dd;
                fx = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if norm(fx) <= 1e-10 {
                // stalled at the rounding floor
                return Ok(EpPoint::evaluate(model, e, d, 3));
            }
            return Err(Error::SearchFailure {
                iterations: it,
                reason: format!("line search stalled; {}", history.join("; ")),
            });
        }
    }
    Err(Error::SearchFailure {
        iterations: MAX_ITER,
        reason: format!("no convergence; {}", history.join("; ")),
    })
}

/// Eigenvector overlaps of the three decaying modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coalescence {
    /// Largest `|⟨v_i|v_j⟩|` over distinct unit eigenvectors.
    pub largest: f64,
    pub second: f64,
}

/// Overlaps of the right eigenvectors of the three eigenvalues other than the
/// one closest to zero. `tol` is accepted for interface symmetry with the
/// other detectors; eigenvalues are never discarded by magnitude.
pub fn coalescence_metric(lr: &ReducedLiouvillian, tol: f64) -> Result<Coalescence> {
    let _ = tol;
    let (values, vectors) = linalg::eigen(&lr.matrix())?;
    let zero = (0..4)
        .min_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()))
        .expect("four eigenvalues");
    let keep: Vec<usize> = (0..4).filter(|&i| i != zero).collect();
    let mut overlaps = Vec::new();
    for a in 0..keep.len() {
        for b in a + 1..keep.len() {
            let dot: linalg::C64 = (0..4).map(|i| vectors[(i, keep[a])].conj() * vectors[(i, keep[b])]).sum();
            overlaps.push(dot.norm().min(1.0));
        }
    }
    overlaps.sort_by(|x, y| y.total_cmp(x));
    Ok(Coalescence {
        largest: overlaps[0],
        second: overlaps[1],
    })
}
