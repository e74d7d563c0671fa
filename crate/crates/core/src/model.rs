//! Physical parameters and the cat-subspace constants shared by every closed form.
//!
//! Frequencies are stored as angular rates in rad/µs and times are in µs, so
//! `exp(-i H t)` needs no extra factors. The even/odd cat normalization ratio
//! `p = N⁺/N⁻` is parameterized as `p = exp(-s)` with `s = atanh(exp(-2α²))`,
//! which gives `p² = tanh(α²)` exactly and lets every `p^{-j} ± p^j` be
//! evaluated as `2 cosh(js)` / `2 sinh(js)` without cancellation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this value of α², `p` is clamped to 1.
pub const LARGE_ALPHA_SQ: f64 = 350.0;

/// How the experimental κ figure is converted into a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaConvention {
    /// κ is a plain rate in 1/µs (the inverse single-photon lifetime).
    #[default]
    PlainRate,
    /// κ is given in cyclic MHz and multiplied by 2π like the other knobs.
    Angular,
}

/// The five physical knobs of the driven-dissipative Kerr resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Drive–resonator detuning Δ (rad/µs).
    pub delta: f64,
    /// Kerr coefficient K (rad/µs).
    pub kerr: f64,
    /// Two-photon drive amplitude P (rad/µs).
    pub two_photon: f64,
    /// Single-photon drive amplitude ε (rad/µs).
    pub drive: f64,
    /// Single-photon loss rate κ (1/µs).
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(delta: f64, kerr: f64, two_photon: f64, drive: f64, kappa: f64) -> Result<Self> {
        let params = Self {
            delta,
            kerr,
            two_photon,
            drive,
            kappa,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters with `K = 1` and `P = α²`, for callers that only care
    /// about the cat-subspace model (α, κ, ε, Δ).
    pub fn from_alpha(alpha: f64, kappa: f64, drive: f64, delta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be finite and positive, got {alpha}")));
        }
        Self::new(delta, 1.0, alpha * alpha, drive, kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.delta, self.kerr, self.two_photon, self.drive, self.kappa];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter in {self:?}")));
        }
        if self.kerr <= 0.0 || self.two_photon <= 0.0 {
            return Err(Error::Domain(format!(
                "K and P must be positive (K = {}, P = {})",
                self.kerr, self.two_photon
            )));
        }
        if self.kappa < 0.0 {
            return Err(Error::Domain(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Coherent amplitude α = √(P/K).
    pub fn alpha(&self) -> f64 {
        self.alpha_sq().sqrt()
    }

    pub fn alpha_sq(&self) -> f64 {
        self.two_photon / self.kerr
    }

    pub fn constants(&self) -> CatSubspaceConstants {
        // α > 0 is guaranteed by validation.
        CatSubspaceConstants::from_alpha_sq(self.alpha_sq())
    }

    pub fn with_drive(self, drive: f64) -> Self {
        Self { drive, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// Laboratory-unit description of an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentUnits {
    /// K/2π in MHz.
    pub kerr_mhz: f64,
    /// P/2π in MHz.
    pub two_photon_mhz: f64,
    /// κ as a rate in 1/µs (or cyclic MHz under [`KappaConvention::Angular`]).
    pub kappa: f64,
    /// ε/2π in MHz.
    pub drive_mhz: f64,
    /// Δ/2π in MHz.
    pub delta_mhz: f64,
}

impl ExperimentUnits {
    /// The Kerr-cat device operating point: K/2π = 6.7 MHz, P/2π = 15.5 MHz,
    /// κ = 1/15.5 µs⁻¹ and ε/2π = 0.74 MHz.
    pub fn kerr_cat_device() -> Self {
        Self {
            kerr_mhz: 6.7,
            two_photon_mhz: 15.5,
            kappa: 1.0 / 15.5,
            drive_mhz: 0.74,
            delta_mhz: 0.0,
        }
    }

    pub fn to_params(&self, convention: KappaConvention) -> Result<ModelParams> {
        params_from_experiment(
            self.kerr_mhz,
            self.two_photon_mhz,
            self.kappa,
            self.drive_mhz,
            self.delta_mhz,
            convention,
        )
    }
}

/// Converts cyclic-MHz inputs to angular rad/µs.
///
/// κ is taken as a plain rate unless `convention` asks for the 2π factor.
pub fn params_from_experiment(
    kerr_mhz: f64,
    two_photon_mhz: f64,
    kappa: f64,
    drive_mhz: f64,
    delta_mhz: f64,
    convention: KappaConvention,
) -> Result<ModelParams> {
    let kappa = match convention {
        KappaConvention::PlainRate => kappa,
        KappaConvention::Angular => 2.0 * PI * kappa,
    };
    ModelParams::new(
        2.0 * PI * delta_mhz,
        2.0 * PI * kerr_mhz,
        2.0 * PI * two_photon_mhz,
        2.0 * PI * drive_mhz,
        kappa,
    )
}

/// The indices `j` for which `p_j^±` is tabulated.
pub const PJ_ORDERS: [u32; 4] = [1, 2, 4, 6];

/// Constants of the projected cat-qubit model at fixed α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatSubspaceConstants {
    pub alpha: f64,
    /// `p = N⁺/N⁻`, in (0, 1].
    pub p: f64,
    /// `s = -ln p`.
    pub log_ratio: f64,
    /// `p^{-j} - p^j` for j in [`PJ_ORDERS`].
    pub pj_minus: [f64; 4],
    /// `p^{-j} + p^j` for j in [`PJ_ORDERS`].
    pub pj_plus: [f64; 4],
}

impl CatSubspaceConstants {
    fn from_alpha_sq(alpha_sq: f64) -> Self {
        let log_ratio = if alpha_sq > LARGE_ALPHA_SQ {
            0.0
        } else {
            (-2.0 * alpha_sq).exp().atanh()
        };
        let pj_minus = PJ_ORDERS.map(|j| 2.0 * (f64::from(j) * log_ratio).sinh());
        let pj_plus = PJ_ORDERS.map(|j| 2.0 * (f64::from(j) * log_ratio).cosh());
        Self {
            alpha: alpha_sq.sqrt(),
            p: (-log_ratio).exp(),
            log_ratio,
            pj_minus,
            pj_plus,
        }
    }

    /// `p^{-j} + p^j` for any order `j`.
    pub fn plus(&self, j: u32) -> f64 {
        2.0 * (f64::from(j) * self.log_ratio).cosh()
    }

    /// `p^{-j} - p^j` for any order `j`.
    pub fn minus(&self, j: u32) -> f64 {
        2.0 * (f64::from(j) * self.log_ratio).sinh()
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha * self.alpha
    }

    /// `p²` evaluated as `tanh(α²)`.
    pub fn p_sq(&self) -> f64 {
        (-2.0 * self.log_ratio).exp()
    }

    /// `1 - p²`, evaluated without cancellation.
    pub fn one_minus_p_sq(&self) -> f64 {
        -(-2.0 * self.log_ratio).exp_m1()
    }
}

/// Cat-subspace constants for amplitude `alpha`.
pub fn subspace_constants(alpha: f64) -> Result<CatSubspaceConstants> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be finite and positive, got {alpha}")));
    }
    Ok(CatSubspaceConstants::from_alpha_sq(alpha * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn alpha_1_52_reference_values() {
        // 40-digit evaluation of sqrt(tanh(2.3104)).
        let c = subspace_constants(1.52).unwrap();
        assert_relative_eq!(c.p, 0.990_203_070_610_632_8, max_relative = 1e-13);
        assert_relative_eq!(c.minus(2), 0.039_383_485_047_077_78, max_relative = 1e-11);
    }

    #[test]
    fn large_alpha_limit() {
        let c = subspace_constants(30.0).unwrap();
        assert_eq!(c.p, 1.0);
        assert_eq!(c.plus(1), 2.0);
        assert_eq!(c.minus(2), 0.0);
        // 1 − p is below half an ulp here, but 1 − p² stays resolved
        let c = subspace_constants(6.0).unwrap();
        assert_eq!(c.p, 1.0);
        let x = (-72.0f64).exp();
        assert_relative_eq!(c.one_minus_p_sq(), 2.0 * x / (1.0 + x), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(subspace_constants(0.0).is_err());
        assert!(subspace_constants(-1.0).is_err());
        assert!(subspace_constants(f64::NAN).is_err());
        assert!(subspace_constants(f64::INFINITY).is_err());
    }

    #[test]
    fn experiment_conversion() {
        let p = params_from_experiment(6.7, 15.5, 1.0 / 15.5, 0.74, 0.0, KappaConvention::PlainRate)
            .unwrap();
        assert_relative_eq!(p.alpha_sq(), 15.5 / 6.7, max_relative = 1e-15);
        assert_relative_eq!(p.alpha(), 1.521, max_relative = 1e-3);
        assert_relative_eq!(p.kappa, 1.0 / 15.5);

        let p = params_from_experiment(1.0, 1.0, 0.0, 0.0, 0.0, KappaConvention::PlainRate).unwrap();
        assert_eq!(p.alpha(), 1.0);
        assert_eq!(p.kappa, 0.0);

        let p = params_from_experiment(6.7, 15.5, 1.0 / 15.5, 0.0, 0.2, KappaConvention::PlainRate)
            .unwrap();
        assert_eq!(p.drive, 0.0);
        assert_relative_eq!(p.delta, 0.4 * PI, max_relative = 1e-15);

        let p = params_from_experiment(6.7, 15.5, 1.0 / 15.5, 0.0, 0.0, KappaConvention::Angular)
            .unwrap();
        assert_relative_eq!(p.kappa, 2.0 * PI / 15.5);
    }

    #[test]
    fn rejects_non_positive_kerr_or_drive() {
        let c = KappaConvention::PlainRate;
        assert!(params_from_experiment(0.0, 15.5, 0.1, 0.0, 0.0, c).is_err());
        assert!(params_from_experiment(6.7, -1.0, 0.1, 0.0, 0.0, c).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0, 0.0, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn tanh_form_matches_direct_normalization_ratio(alpha in 0.1f64..5.0) {
            let c = subspace_constants(alpha).unwrap();
            let x = (-2.0 * alpha * alpha).exp();
            let n_plus = 1.0 / (2.0 * (1.0 + x)).sqrt();
            let n_minus = 1.0 / (2.0 * (1.0 - x)).sqrt();
            let direct = n_plus / n_minus;
            prop_assert!((c.p - direct).abs() <= 1e-12 * direct);
            prop_assert!(c.p > 0.0 && c.p <= 1.0);
            prop_assert!(c.one_minus_p_sq() > 0.0);
            if x > f64::EPSILON {
                prop_assert!(c.p < 1.0);
            }
            let p2 = (1.0 - x) / (1.0 + x);
            prop_assert!((c.p_sq() - p2).abs() <= 1e-12 * p2);
        }

        #[test]
        fn pj_identities(alpha in 0.1f64..5.0) {
            let c = subspace_constants(alpha).unwrap();
            prop_assert!((c.plus(2) * c.minus(2) - c.minus(4)).abs() <= 1e-12 * c.minus(4).max(1e-300));
            prop_assert!((c.plus(1).powi(2) - (c.plus(2) + 2.0)).abs() <= 1e-12 * c.plus(1).powi(2));
            for (i, j) in PJ_ORDERS.iter().enumerate() {
                prop_assert!(c.pj_plus[i] >= 2.0);
                prop_assert!(c.pj_minus[i] > 0.0);
                let lhs = c.pj_plus[i].powi(2) - c.pj_minus[i].powi(2);
                prop_assert!((lhs - 4.0).abs() <= 1e-9 * c.pj_plus[i].powi(2), "j = {}", j);
            }
        }

        #[test]
        fn p_is_monotone(a in 0.1f64..4.0, da in 0.01f64..1.0) {
            let lo = subspace_constants(a).unwrap();
            let hi = subspace_constants(a + da).unwrap();
            prop_assert!(hi.p >= lo.p);
        }

        #[test]
        fn alpha_round_trip(k in 0.1f64..20.0, p in 0.1f64..40.0) {
            let params = params_from_experiment(k, p, 0.05, 0.0, 0.0, KappaConvention::PlainRate).unwrap();
            prop_assert!((params.alpha_sq() - p / k).abs() <= 1e-12 * (p / k));
        }
    }
}
