//! Adaptive Dormand–Prince 5(4) integration of complex linear or nonlinear
//! systems `y' = f(t, y)`, reporting the state at prescribed output times.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the first derivative when `None`.
    pub h0: Option<f64>,
    /// Steps shorter than `h_min_rel · max(1, |t|)` abort with a stiffness error.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h0: None,
            h_min_rel: 1e-13,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &[C64], h: f64, terms: &[(f64, &[C64])], out: &mut [C64]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates from `times[0]` and returns the state at every entry of `times`
/// (which must be non-decreasing). The first output is `y0` itself.
pub fn integrate<F>(mut f: F, times: &[f64], y0: &[C64], opts: &Rk45Options) -> Result<(Vec<Vec<C64>>, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if times.is_empty() {
        return Ok((Vec::new(), OdeStats::default()));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("output times must be finite and non-decreasing".into()));
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut t = times[0];
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            let d0 = rms_scaled(&y, &y, opts);
            let d1 = rms_scaled(&k[0], &y, opts);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        }
    };

    for &t_out in &times[1..] {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Numeric(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
            }
            let h_min = opts.h_min_rel * t.abs().max(1.0);
            let remaining = t_out - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            if step < h_min && !last {
                return Err(Error::Stiff { t, h: step });
            }

            let (k1, rest) = k.split_first_mut().expect("seven stages");
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            combo(&y, step, &[(A21, k1)], &mut tmp);
            f(t + C2 * step, &tmp, k2);
            combo(&y, step, &[(A31, k1), (A32, k2)], &mut tmp);
            f(t + C3 * step, &tmp, k3);
            combo(&y, step, &[(A41, k1), (A42, k2), (A43, k3)], &mut tmp);
            f(t + C4 * step, &tmp, k4);
            combo(&y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], &mut tmp);
            f(t + C5 * step, &tmp, k5);
            combo(&y, step, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], &mut tmp);
            f(t + step, &tmp, k6);
            combo(&y, step, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], &mut y_new);
            f(t + step, &y_new, k7);
            stats.evaluations += 6;

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Numeric(format!("non-finite error estimate at t = {t}")));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t_out } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
                if h < h_min {
                    return Err(Error::Stiff { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn rms_scaled(v: &[C64], y: &[C64], opts: &Rk45Options) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| (a.norm() / (opts.atol + opts.rtol * b.norm())).powi(2))
        .sum();
    (s / v.len().max(1) as f64).sqrt()
}
