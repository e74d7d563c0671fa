//! Resultant vectors of the decaying eigenvalue triple and their winding
//! number along closed contours in the (ε, Δ) plane.
//!
//! `R₁ = −(E₂−E₃)²(E₂−E₄)²(E₃−E₄)²` and
//! `R₂ = −8(E₂+E₃−2E₄)(E₂+E₄−2E₃)(E₃+E₄−2E₂)` are symmetric in the three
//! eigenvalues; both vanish only at a triple root. For the depressed cubic
//! `t³ − 3mt − 2q` they reduce to `108(q² − m³)` and `432q`.
//!
//! Angles are taken on the rescaled plane `(R₁/(κα²)⁶, R₂/(κα²)³)`. Rescaling
//! each axis by a positive constant does not change the winding number.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catspace::{CatModel, CubicInvariants};
use crate::error::{Error, Result};
use crate::linalg::C64;

pub const DEFAULT_SAMPLES: usize = 720;
pub const MAX_SAMPLES: usize = 46_080;
/// Allowed distance of the raw winding from an integer.
pub const QUANTIZATION_TOL: f64 = 1e-3;
/// Contours whose rescaled resultant norm drops below this are rejected.
pub const ZERO_NORM_TOL: f64 = 1e-8;
/// Angle increment above which a contour segment is bisected.
const MAX_ANGLE_STEP: f64 = PI / 4.0;
const MAX_BISECTION_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContourShape {
    Circle { center: (f64, f64), radius: f64 },
    /// Closed polygon through the vertices, parameterized by arc length.
    Polyline { vertices: Vec<(f64, f64)> },
}

/// A closed curve in the (ε, Δ) plane, sampled at `samples` uniform
/// parameter values `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub shape: ContourShape,
    pub samples: usize,
}

impl Contour {
    pub fn circle(center: (f64, f64), radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::Domain(format!("invalid circle at {center:?} with radius {radius}")));
        }
        Ok(Self {
            shape: ContourShape::Circle { center, radius },
            samples: DEFAULT_SAMPLES,
        })
    }

    pub fn polyline(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 || vertices.iter().any(|v| !(v.0.is_finite() && v.1.is_finite())) {
            return Err(Error::Domain("a polyline contour needs at least three finite vertices".into()));
        }
        let c = Self {
            shape: ContourShape::Polyline { vertices },
            samples: DEFAULT_SAMPLES,
        };
        if !(c.perimeter() > 0.0) {
            return Err(Error::Domain("degenerate polyline contour".into()));
        }
        Ok(c)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    fn perimeter(&self) -> f64 {
        match &self.shape {
            ContourShape::Circle { radius, .. } => 2.0 * PI * radius,
            ContourShape::Polyline { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        (b.0 - a.0).hypot(b.1 - a.1)
                    })
                    .sum()
            }
        }
    }

    /// The parameter point `(ε, Δ)` at `φ`; `φ = 2π` maps back to `φ = 0`.
    pub fn point(&self, phi: f64) -> (f64, f64) {
        match &self.shape {
            ContourShape::Circle { center, radius } => {
                if phi == 2.0 * PI {
                    return (center.0 + radius, center.1);
                }
                (center.0 + radius * phi.cos(), center.1 + radius * phi.sin())
            }
            ContourShape::Polyline { vertices } => {
                let n = vertices.len();
                let frac = (phi / (2.0 * PI)).rem_euclid(1.0);
                let mut target = frac * self.perimeter();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let len = (b.0 - a.0).hypot(b.1 - a.1);
                    if target <= len && len > 0.0 {
                        let s = target / len;
                        return (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
                    }
                    target -= len;
                }
                vertices[0]
            }
        }
    }

    /// `samples + 1` parameter values from 0 to 2π inclusive.
    pub fn phi_grid(&self) -> Vec<f64> {
        let n = self.samples.max(1);
        (0..=n)
            .map(|i| if i == n { 2.0 * PI } else { 2.0 * PI * i as f64 / n as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultantVector {
    pub r1: f64,
    pub r2: f64,
}

impl ResultantVector {
    pub fn norm(&self) -> f64 {
        self.r1.hypot(self.r2)
    }

    pub fn angle(&self) -> f64 {
        self.r2.atan2(self.r1)
    }
}

/// Imaginary parts below this fraction of the natural scale (largest
/// eigenvalue gap to the matching power) are dropped.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-9;

/// `(R₁, R₂)` from an eigenvalue triple closed under conjugation.
pub fn resultant_vector(e2: C64, e3: C64, e4: C64) -> Result<ResultantVector> {
    let d = [e2 - e3, e2 - e4, e3 - e4];
    let r1 = -(d[0] * d[0]) * (d[1] * d[1]) * (d[2] * d[2]);
    let r1_mag = d.iter().map(|x| x.norm()).fold(0.0, f64::max).powi(6);
    let s = [e2 + e3 - 2.0 * e4, e2 + e4 - 2.0 * e3, e3 + e4 - 2.0 * e2];
    let r2 = -8.0 * s[0] * s[1] * s[2];
    let r2_mag = 8.0 * s.iter().map(|x| x.norm()).fold(0.0, f64::max).powi(3);
    for (v, mag, name) in [(r1, r1_mag, "R1"), (r2, r2_mag, "R2")] {
        if v.im.abs() > IMAGINARY_RESIDUE_TOL * mag {
            return Err(Error::Domain(format!(
                "{name} has imaginary part {:.3e} (magnitude {mag:.3e}); eigenvalues are not closed under conjugation",
                v.im
            )));
        }
    }
    Ok(ResultantVector { r1: r1.re, r2: r2.re })
}

/// `(108(q² − m³), 432q)`.
pub fn resultant_from_invariants(inv: &CubicInvariants) -> ResultantVector {
    ResultantVector {
        r1: 108.0 * inv.discriminant,
        r2: 432.0 * inv.q,
    }
}

/// Largest relative deviation between the eigenvalue-product resultants and
/// the invariant forms over `draws` random `(q, m) ∈ [−1, 1]²`.
///
/// Deviations are measured against `108·max(q², |m|³)` and `432·max(|q|, |m|^{3/2})`.
pub fn resultant_identity_error(draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let q: f64 = rng.gen_range(-1.0..1.0);
        let m: f64 = rng.gen_range(-1.0..1.0);
        let inv = CubicInvariants::new(0.0, q, m);
        let s = inv.spectrum();
        let r = resultant_vector(s.e2, s.e3, s.e4)?;
        let fast = resultant_from_invariants(&CubicInvariants::new(0.0, q, m));
        let s1 = 108.0 * (q * q).max(m.abs().powi(3));
        let s2 = 432.0 * q.abs().max(m.abs().powf(1.5));
        worst = worst.max((r.r1 - fast.r1).abs() / s1).max((r.r2 - fast.r2).abs() / s2);
    }
    Ok(worst)
}

/// Tolerance the identity oracle must meet before the invariant route is used.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Runs the identity oracle once per process and reports whether the
/// invariant route may be used.
pub fn fast_path_verified() -> bool {
    static VERIFIED: OnceLock<bool> = OnceLock::new();
    *VERIFIED.get_or_init(|| matches!(resultant_identity_error(1000, 0x5eed), Ok(e) if e < IDENTITY_TOL))
}

/// How the resultant vector is evaluated along a contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// `(108(q² − m³), 432q)`, once the identity oracle has passed.
    #[default]
    Invariants,
    /// Products of the closed-form eigenvalues.
    Eigenvalues,
    /// Products of numerically computed eigenvalues of the 4×4 generator.
    Numeric,
}

/// Rescaled resultant vector at one parameter point.
pub fn rescaled_resultant(model: &CatModel, eps: f64, delta: f64, route: Route) -> Result<ResultantVector> {
    let r = model.rate_scale();
    if !(r > 0.0) {
        return Err(Error::Domain("winding needs kappa > 0".into()));
    }
    let raw = match route {
        Route::Invariants if fast_path_verified() => resultant_from_invariants(&model.invariants(eps, delta)),
        Route::Invariants | Route::Eigenvalues => {
            let s = model.spectrum(eps, delta);
            resultant_vector(s.e2, s.e3, s.e4)?
        }
        Route::Numeric => {
            let mut ev = model.reduced(eps, delta).numeric_eigenvalues()?;
            let zero = (0..ev.len())
                .min_by(|&a, &b| ev[a].norm().total_cmp(&ev[b].norm()))
                .expect("four eigenvalues");
            ev.remove(zero);
            resultant_vector(ev[0], ev[1], ev[2])?
        }
    };
    Ok(ResultantVector {
        r1: raw.r1 / r.powi(6),
        r2: raw.r2 / r.powi(3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// Rounded winding number.
    pub winding: i64,
    pub raw: f64,
    /// Uniform samples of the final pass.
    pub samples: usize,
    /// Extra points evaluated by local bisection in the final pass.
    pub bisections: usize,
    /// Smallest rescaled resultant norm met along the contour.
    pub min_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingOptions {
    pub route: Route,
    pub max_samples: usize,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self {
            route: Route::Invariants,
            max_samples: MAX_SAMPLES,
        }
    }
}

struct Pass {
    raw: f64,
    bisections: usize,
    min_norm: f64,
}

fn angle_at(contour: &Contour, model: &CatModel, route: Route, phi: f64, min_norm: &mut f64) -> Result<f64> {
    let (e, d) = contour.point(phi);
    let r = rescaled_resultant(model, e, d, route)?;
    let norm = r.norm();
    *min_norm = min_norm.min(norm);
    if !(norm >= ZERO_NORM_TOL) {
        return Err(Error::ContourThroughZero { phi, norm });
    }
    Ok(r.angle())
}

fn wrap(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn winding_pass(contour: &Contour, model: &CatModel, route: Route) -> Result<Pass> {
    let grid = contour.phi_grid();
    let mut min_norm = f64::INFINITY;
    let angles = grid
        .iter()
        .map(|&phi| angle_at(contour, model, route, phi, &mut min_norm))
        .collect::<Result<Vec<f64>>>()?;
    let mut bisections = 0;
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        total += segment(
            contour,
            model,
            route,
            (grid[i], angles[i]),
            (grid[i + 1], angles[i + 1]),
            MAX_BISECTION_DEPTH,
            &mut bisections,
            &mut min_norm,
        )?;
    }
    Ok(Pass {
        raw: total / (2.0 * PI),
        bisections,
        min_norm,
    })
}

#[allow(clippy::too_many_arguments)]
fn segment(
    contour: &Contour,
    model: &CatModel,
    route: Route,
    a: (f64, f64),
    b: (f64, f64),
    depth: u32,
    count: &mut usize,
    min_norm: &mut f64,
) -> Result<f64> {
    let step = wrap(b.1 - a.1);
    if step.abs() <= MAX_ANGLE_STEP || depth == 0 {
        return Ok(step);
    }
    let mid = 0.5 * (a.0 + b.0);
    let fm = angle_at(contour, model, route, mid, min_norm)?;
    *count += 1;
    Ok(segment(contour, model, route, a, (mid, fm), depth - 1, count, min_norm)?
        + segment(contour, model, route, (mid, fm), b, depth - 1, count, min_norm)?)
}

/// Winding number of the rescaled resultant vector along `contour`.
///
/// Angle increments are unwrapped; any increment above π/4 is bisected
/// locally. If the total is not within [`QUANTIZATION_TOL`] of an integer the
/// uniform sampling is doubled, up to `options.max_samples`.
pub fn winding_number(contour: &Contour, model: &CatModel, options: &WindingOptions) -> Result<WindingResult> {
    let mut c = contour.clone();
    if c.samples < 3 {
        return Err(Error::Domain(format!("contour needs at least 3 samples, got {}", c.samples)));
    }
    loop {
        let pass = winding_pass(&c, model, options.route)?;
        let rounded = pass.raw.round();
        if (pass.raw - rounded).abs() < QUANTIZATION_TOL {
            return Ok(WindingResult {
                winding: rounded as i64,
                raw: pass.raw,
                samples: c.samples,
                bisections: pass.bisections,
                min_norm: pass.min_norm,
            });
        }
        if c.samples * 2 > options.max_samples {
            return Err(Error::Resolution {
                samples: c.samples,
                raw: pass.raw,
            });
        }
        c.samples *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub phi: f64,
    pub r1_norm: f64,
    pub r2_norm: f64,
}

/// The unit vector `R/‖R‖` on the rescaled plane at every uniform sample.
pub fn winding_trajectory(contour: &Contour, model: &CatModel, route: Route) -> Result<Vec<TrajectoryPoint>> {
    contour
        .phi_grid()
        .into_iter()
        .map(|phi| {
            let (e, d) = contour.point(phi);
            let r = rescaled_resultant(model, e, d, route)?;
            let n = r.norm();
            if !(n >= ZERO_NORM_TOL) {
                return Err(Error::ContourThroughZero { phi, norm: n });
            }
            Ok(TrajectoryPoint {
                phi,
                r1_norm: r.r1 / n,
                r2_norm: r.r2 / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exceptional::{lep2_delta_at_zero_drive, lep3_magnitudes};
    use crate::linalg::c;

    fn device() -> CatModel {
        CatModel::new((15.5f64 / 6.7).sqrt(), 1.0 / 15.5).unwrap()
    }

    #[test]
    fn degenerate_triples() {
        let r = resultant_vector(c(-1.0, 0.0), c(-1.0, 0.0), c(-2.0, 0.0)).unwrap();
        assert_eq!(r.r1, 0.0);
        let r = resultant_vector(c(-1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)).unwrap();
        assert_eq!((r.r1, r.r2), (0.0, 0.0));
        assert!(resultant_vector(c(-1.0, 0.5), c(-1.0, 0.2), c(-2.0, 0.0)).is_err());
    }

    #[test]
    fn identity_oracle_passes() {
        let err = resultant_identity_error(1000, 1).unwrap();
        assert!(err < IDENTITY_TOL, "{err}");
        assert!(fast_path_verified());
    }

    #[test]
    fn permutation_invariance() {
        let s = device().spectrum(0.004, 1.2);
        let [a, b, e] = s.nonzero();
        let base = resultant_vector(a, b, e).unwrap();
        for (x, y, z) in [(b, a, e), (e, b, a), (a, e, b), (b, e, a), (e, a, b)] {
            let r = resultant_vector(x, y, z).unwrap();
            assert!((r.r1 - base.r1).abs() <= 1e-12 * base.r1.abs());
            assert!((r.r2 - base.r2).abs() <= 1e-12 * base.r2.abs());
        }
    }

    #[test]
    fn winding_around_third_order_points() {
        let model = device();
        let (e3, d3) = lep3_magnitudes(&model).unwrap();
        let r = 0.3 * e3;
        let opts = WindingOptions::default();
        for (ce, cd) in [(e3, d3), (-e3, d3), (e3, -d3), (-e3, -d3)] {
            let w = winding_number(&Contour::circle((ce, cd), r).unwrap(), &model, &opts).unwrap();
            assert_eq!(w.winding.abs(), 1, "{w:?}");
            assert!((w.raw - w.winding as f64).abs() < QUANTIZATION_TOL);
        }
        let away = winding_number(&Contour::circle((1.5 * e3, 0.0), r).unwrap(), &model, &opts).unwrap();
        assert_eq!(away.winding, 0);
        let line = lep2_delta_at_zero_drive(&model);
        let on_line = winding_number(&Contour::circle((0.0, line), 0.01 * e3).unwrap(), &model, &opts).unwrap();
        assert_eq!(on_line.winding, 0);
    }

    #[test]
    fn routes_agree() {
        let model = device();
        let (e3, d3) = lep3_magnitudes(&model).unwrap();
        for center in [(e3, d3), (-e3, d3), (1.5 * e3, 0.0), (0.5 * e3, 0.9 * d3)] {
            let contour = Contour::circle(center, 0.3 * e3).unwrap();
            let ws: Vec<i64> = [Route::Invariants, Route::Eigenvalues, Route::Numeric]
                .into_iter()
                .map(|route| {
                    winding_number(&contour, &model, &WindingOptions { route, ..Default::default() })
                        .unwrap()
                        .winding
                })
                .collect();
            assert!(ws.iter().all(|&w| w == ws[0]), "{center:?}: {ws:?}");
        }
    }

    #[test]
    fn through_zero_is_rejected() {
        let model = device();
        let (e3, d3) = lep3_magnitudes(&model).unwrap();
        // square polyline with a vertex exactly on the third-order point
        let contour = Contour::polyline(vec![(e3, d3), (2.0 * e3, d3), (2.0 * e3, d3 + e3), (e3, d3 + e3)]).unwrap();
        assert!(matches!(
            winding_number(&contour, &model, &WindingOptions::default()),
            Err(Error::ContourThroughZero { .. })
        ));
    }

    #[test]
    fn trajectory_is_closed() {
        let model = device();
        let (e3, d3) = lep3_magnitudes(&model).unwrap();
        let traj = winding_trajectory(&Contour::circle((e3, d3), 0.3 * e3).unwrap(), &model, Route::Invariants).unwrap();
        let (a, b) = (traj[0], traj[traj.len() - 1]);
        assert!((a.r1_norm - b.r1_norm).abs() < 1e-9 && (a.r2_norm - b.r2_norm).abs() < 1e-9);
        assert_eq!(traj.len(), DEFAULT_SAMPLES + 1);
    }
}
