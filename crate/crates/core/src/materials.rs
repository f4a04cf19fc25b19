//! Micro-scale homogenization: fiber and matrix constants plus a fiber volume
//! fraction give the effective elastic constants of a unidirectional ply.
//!
//! Longitudinal modulus and major Poisson ratio follow the rule of mixtures.
//! The transverse modulus (ξ = 2) and in-plane shear modulus (ξ = 1) follow
//! Halpin–Tsai. All moduli are in GPa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Halpin–Tsai reinforcement factor for the transverse modulus.
const XI_TRANSVERSE: f64 = 2.0;
/// Halpin–Tsai reinforcement factor for the in-plane shear modulus.
const XI_SHEAR: f64 = 1.0;

/// Elastic constants of a transversely isotropic fiber and an isotropic matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstituentSet {
    #[serde(rename = "fiber_e1_gpa")]
    pub fiber_e1: f64,
    #[serde(rename = "fiber_e2_gpa")]
    pub fiber_e2: f64,
    #[serde(rename = "fiber_g12_gpa")]
    pub fiber_g12: f64,
    pub fiber_nu12: f64,
    #[serde(rename = "matrix_e_gpa")]
    pub matrix_e: f64,
    pub matrix_nu: f64,
}

impl ConstituentSet {
    /// AS4D carbon fiber in 9310 epoxy.
    pub const AS4D_9310: ConstituentSet = ConstituentSet {
        fiber_e1: 241.0,
        fiber_e2: 40.0,
        fiber_g12: 24.0,
        fiber_nu12: 0.2,
        matrix_e: 3.12,
        matrix_nu: 0.38,
    };

    /// Matrix shear modulus, always derived from `matrix_e` and `matrix_nu`.
    pub fn matrix_g(&self) -> f64 {
        self.matrix_e / (2.0 * (1.0 + self.matrix_nu))
    }

    pub fn validate(&self) -> Result<()> {
        let moduli = [
            ("fiber_e1_gpa", self.fiber_e1),
            ("fiber_e2_gpa", self.fiber_e2),
            ("fiber_g12_gpa", self.fiber_g12),
            ("matrix_e_gpa", self.matrix_e),
        ];
        for (key, value) in moduli {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, format!("modulus must be positive, got {value}")));
            }
        }
        for (key, value) in [("fiber_nu12", self.fiber_nu12), ("matrix_nu", self.matrix_nu)] {
            if !(value > 0.0 && value < 0.5) {
                return Err(Error::config(key, format!("must lie in (0, 0.5), got {value}")));
            }
        }
        Ok(())
    }
}

impl Default for ConstituentSet {
    fn default() -> Self {
        Self::AS4D_9310
    }
}

/// Fiber volume fraction, strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct VolumeFraction(f64);

impl VolumeFraction {
    pub fn new(vf: f64) -> Result<Self> {
        if vf > 0.0 && vf < 1.0 {
            Ok(VolumeFraction(vf))
        } else {
            Err(Error::Domain(format!("volume fraction must lie in (0, 1), got {vf}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Effective in-plane elastic constants of a unidirectional ply (GPa).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminaProperties {
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub nu12: f64,
}

impl LaminaProperties {
    /// Checks `E1 ≥ E2 > 0`, `G12 > 0` and `ν12² < E1/E2`.
    pub fn validate(&self) -> Result<()> {
        if !(self.e2 > 0.0 && self.e1 >= self.e2 && self.g12 > 0.0) {
            return Err(Error::Domain(format!(
                "lamina moduli must satisfy E1 >= E2 > 0 and G12 > 0 (E1={}, E2={}, G12={})",
                self.e1, self.e2, self.g12
            )));
        }
        if self.nu12 * self.nu12 >= self.e1 / self.e2 {
            return Err(Error::Domain(format!(
                "nu12^2 must be below E1/E2 (nu12={}, E1/E2={})",
                self.nu12,
                self.e1 / self.e2
            )));
        }
        Ok(())
    }
}

fn rule_of_mixtures(fiber: f64, matrix: f64, vf: f64) -> f64 {
    vf * fiber + (1.0 - vf) * matrix
}

fn halpin_tsai(fiber: f64, matrix: f64, xi: f64, vf: f64) -> Result<f64> {
    let ratio = fiber / matrix;
    let eta = (ratio - 1.0) / (ratio + xi);
    let denominator = 1.0 - eta * vf;
    if denominator <= 0.0 {
        return Err(Error::Domain(format!(
            "Halpin-Tsai denominator {denominator} is not positive (eta={eta}, vf={vf})"
        )));
    }
    Ok(matrix * (1.0 + xi * eta * vf) / denominator)
}

/// Homogenized ply constants at the given fiber volume fraction.
pub fn homogenize(c: &ConstituentSet, vf: VolumeFraction) -> Result<LaminaProperties> {
    c.validate()?;
    let v = vf.get();
    let props = LaminaProperties {
        e1: rule_of_mixtures(c.fiber_e1, c.matrix_e, v),
        e2: halpin_tsai(c.fiber_e2, c.matrix_e, XI_TRANSVERSE, v)?,
        g12: halpin_tsai(c.fiber_g12, c.matrix_g(), XI_SHEAR, v)?,
        nu12: rule_of_mixtures(c.fiber_nu12, c.matrix_nu, v),
    };
    props.validate()?;
    Ok(props)
}
