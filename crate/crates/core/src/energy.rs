//! The BV double phase energy, its ε-regularized family and the W^{1,1}
//! energy used in the relaxation experiments.
//!
//! All integrals are `h^2`-weighted pixel sums, and every term is built from
//! the same forward-difference gradient so that the TV part and the weighted
//! quadratic part see identical pixelwise slopes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient_forward, pairwise_sum, ScalarField};

/// Which ε-regularization of the double phase energy is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizationMode {
    /// `|∇u|^{1+ε} + (a|∇u|)^2`
    Exponent,
    /// `|∇u| + (ε + a^2)|∇u|^2`
    Weight,
    /// `|∇u|^{1+ε} + (ε + a^2)|∇u|^2`
    Combined,
}

impl RegularizationMode {
    pub fn regularizes_exponent(self) -> bool {
        matches!(self, Self::Exponent | Self::Combined)
    }

    pub fn regularizes_weight(self) -> bool {
        matches!(self, Self::Weight | Self::Combined)
    }
}

impl fmt::Display for RegularizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exponent => "exponent",
            Self::Weight => "weight",
            Self::Combined => "combined",
        })
    }
}

impl FromStr for RegularizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponent" => Ok(Self::Exponent),
            "weight" => Ok(Self::Weight),
            "combined" => Ok(Self::Combined),
            other => Err(Error::param(
                "mode",
                format!("expected exponent|weight|combined, got `{other}`"),
            )),
        }
    }
}

/// Decomposed energy value.
///
/// `tv_part`, `weighted_part` and `fidelity_part` are always the three terms
/// of the unregularized energy evaluated at `u`; `regularizer_surplus` is
/// what the ε-terms add on top of them. In the exponent and combined modes
/// the surplus is negative wherever `|∇u| < 1` dominates, since there
/// `|∇u|^{1+ε} < |∇u|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub tv_part: f64,
    pub weighted_part: f64,
    pub fidelity_part: f64,
    pub regularizer_surplus: f64,
    pub total: f64,
    pub epsilon: f64,
}

impl EnergyReport {
    fn assemble(tv: f64, weighted: f64, fidelity: f64, surplus: f64, epsilon: f64) -> Self {
        Self {
            tv_part: tv,
            weighted_part: weighted,
            fidelity_part: fidelity,
            regularizer_surplus: surplus,
            total: tv + weighted + fidelity + surplus,
            epsilon,
        }
    }

    pub fn zero() -> Self {
        Self::assemble(0.0, 0.0, 0.0, 0.0, 0.0)
    }
}

/// Primal isotropic discrete total variation `h^2 * Σ |∇u|`.
pub fn tv(u: &ScalarField) -> f64 {
    u.cell_area() * pairwise_sum(&gradient_forward(u).magnitudes())
}

fn check_inputs(u: &ScalarField, f: &ScalarField, a: &ScalarField) -> Result<()> {
    u.same_grid(f)?;
    u.same_grid(a)?;
    if let Some(k) = a.values().iter().position(|&v| v < 0.0) {
        return Err(Error::param(
            "a",
            format!("weight must be nonnegative, found {} at index {k}", a.values()[k]),
        ));
    }
    Ok(())
}

struct Densities {
    tv: Vec<f64>,
    weighted: Vec<f64>,
    fidelity: Vec<f64>,
    surplus: Vec<f64>,
}

fn densities(
    u: &ScalarField,
    f: &ScalarField,
    a: &ScalarField,
    eps: f64,
    mode: Option<RegularizationMode>,
) -> Densities {
    let g = gradient_forward(u).magnitudes();
    let n = g.len();
    let mut d = Densities {
        tv: Vec::with_capacity(n),
        weighted: Vec::with_capacity(n),
        fidelity: Vec::with_capacity(n),
        surplus: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = g[k];
        let ak = a.values()[k];
        let r = u.values()[k] - f.values()[k];
        d.tv.push(t);
        d.weighted.push(ak * ak * t * t);
        d.fidelity.push(r * r);
        let mut s = 0.0;
        if let Some(mode) = mode {
            if mode.regularizes_exponent() && t > 0.0 {
                // t^{1+ε} - t, without cancellation
                s += t * (eps * t.ln()).exp_m1();
            }
            if mode.regularizes_weight() {
                s += eps * t * t;
            }
        }
        d.surplus.push(s);
    }
    d
}

/// `|Du|(Ω) + ∫ (a|∇u|)^2 + |u - f|^2`.
pub fn energy_i(u: &ScalarField, f: &ScalarField, a: &ScalarField) -> Result<EnergyReport> {
    check_inputs(u, f, a)?;
    let d = densities(u, f, a, 0.0, None);
    let area = u.cell_area();
    Ok(EnergyReport::assemble(
        area * pairwise_sum(&d.tv),
        area * pairwise_sum(&d.weighted),
        area * pairwise_sum(&d.fidelity),
        0.0,
        0.0,
    ))
}

/// The ε-regularized energy in the requested mode.
pub fn energy_i_eps(
    u: &ScalarField,
    f: &ScalarField,
    a: &ScalarField,
    eps: f64,
    mode: RegularizationMode,
) -> Result<EnergyReport> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::param(
            "eps",
            format!("must be > 0 (use energy_i for the unregularized energy), got {eps}"),
        ));
    }
    check_inputs(u, f, a)?;
    let d = densities(u, f, a, eps, Some(mode));
    let area = u.cell_area();
    Ok(EnergyReport::assemble(
        area * pairwise_sum(&d.tv),
        area * pairwise_sum(&d.weighted),
        area * pairwise_sum(&d.fidelity),
        area * pairwise_sum(&d.surplus),
        eps,
    ))
}

/// The W^{1,1} double phase energy. Every discrete field has a
/// pointwise gradient, so on the grid this coincides with [`energy_i`]; it is
/// kept separate so relaxation experiments name the functional they probe.
pub fn energy_j(u: &ScalarField, f: &ScalarField, a: &ScalarField) -> Result<EnergyReport> {
    energy_i(u, f, a)
}

/// `c(ε) = (1/(1+ε))^{1/ε} · ε/(1-ε)`, which satisfies `t <= t^{1+ε} + c(ε)`
/// for every `t >= 0`.
pub fn young_constant(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", format!("must lie in (0, 1), got {eps}")));
    }
    Ok(young_base(eps) * eps / (1.0 - eps))
}

/// `(1/(1+ε))^{1/ε}`, which tends to `1/e` as ε → 0.
pub fn young_base(eps: f64) -> f64 {
    (-(eps.ln_1p()) / eps).exp()
}
