//! EPR state parameterization, separability classification, thermal
//! photon-number weights and the two-mode squeezed vacuum wavefunction.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance used when comparing `|mc|` against the
/// pure-state boundary `sqrt(nbar (nbar + 1))`.
pub const PURITY_TOL: f64 = 1e-9;

/// Mean photon number per mode and mode-mode correlation amplitude of a
/// mixed EPR state.
///
/// Only `|mc|` enters any observable; the phase is carried so that the
/// second-moment table reproduces `<ab> = -mc` literally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprParams {
    nbar: f64,
    mc: Complex64,
}

impl EprParams {
    /// Validates `nbar >= 0` and finiteness. Physicality is not checked
    /// here because [`classify`] must be able to answer `Unphysical`.
    pub fn new(nbar: f64, mc: Complex64) -> Result<Self> {
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nbar must be finite and >= 0, got {nbar}"
            )));
        }
        if !mc.re.is_finite() || !mc.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mc must be finite, got {mc}"
            )));
        }
        Ok(Self { nbar, mc })
    }

    pub fn real(nbar: f64, mc: f64) -> Result<Self> {
        Self::new(nbar, Complex64::new(mc, 0.0))
    }

    /// Builds the parameters from `|mc|^2`.
    pub fn from_mc_squared(nbar: f64, mc2: f64) -> Result<Self> {
        if !mc2.is_finite() || mc2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "|mc|^2 must be finite and >= 0, got {mc2}"
            )));
        }
        Self::real(nbar, mc2.sqrt())
    }

    /// The pure two-mode squeezed vacuum with mean photon number `nbar`.
    pub fn pure(nbar: f64) -> Result<Self> {
        Self::real(nbar, pure_mc(nbar)?)
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    pub fn mc(&self) -> Complex64 {
        self.mc
    }

    pub fn mc_abs(&self) -> f64 {
        self.mc.norm()
    }

    /// Same state with `mc` rotated by `theta`.
    pub fn with_phase(&self, theta: f64) -> Self {
        Self {
            nbar: self.nbar,
            mc: self.mc * Complex64::from_polar(1.0, theta),
        }
    }

    /// `nbar = mc = 0`, for which ratios such as the visibility are 0/0.
    pub fn is_degenerate(&self) -> bool {
        self.nbar == 0.0 && self.mc_abs() == 0.0
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.mc_abs() <= upper_boundary(self.nbar, tol)
    }

    /// Returns `self` if `|mc| <= sqrt(nbar(nbar+1))` within [`PURITY_TOL`].
    pub fn ensure_physical(&self) -> Result<&Self> {
        if self.is_physical(PURITY_TOL) {
            Ok(self)
        } else {
            Err(Error::Unphysical {
                nbar: self.nbar,
                mc_abs: self.mc_abs(),
                bound: pure_mc_unchecked(self.nbar),
            })
        }
    }

    /// Physical and not degenerate.
    pub fn ensure_nondegenerate(&self) -> Result<&Self> {
        self.ensure_physical()?;
        if self.is_degenerate() {
            return Err(Error::DegenerateState);
        }
        Ok(self)
    }
}

impl fmt::Display for EprParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(nbar={}, mc={})", self.nbar, self.mc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    Separable,
    EntangledMixed,
    EntangledPure,
    Unphysical,
}

impl StateClass {
    pub fn is_entangled(self) -> bool {
        matches!(self, StateClass::EntangledMixed | StateClass::EntangledPure)
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StateClass::Separable => "Separable",
            StateClass::EntangledMixed => "EntangledMixed",
            StateClass::EntangledPure => "EntangledPure",
            StateClass::Unphysical => "Unphysical",
        };
        f.write_str(s)
    }
}

fn pure_mc_unchecked(nbar: f64) -> f64 {
    (nbar * (nbar + 1.0)).sqrt()
}

fn upper_boundary(nbar: f64, tol: f64) -> f64 {
    pure_mc_unchecked(nbar) * (1.0 + tol)
}

/// `sqrt(nbar (nbar + 1))`, the correlation of the pure two-mode squeezed
/// vacuum and the largest physical `|mc|`.
pub fn pure_mc(nbar: f64) -> Result<f64> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "nbar must be finite and >= 0, got {nbar}"
        )));
    }
    Ok(pure_mc_unchecked(nbar))
}

/// Separability class of the mixed EPR state.
///
/// Separable iff `|mc| <= nbar`. The pure boundary `sqrt(nbar(nbar+1))` is
/// matched with relative tolerance `tol`; anything above it is unphysical.
pub fn classify(params: &EprParams, tol: f64) -> Result<StateClass> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be >= 0, got {tol}"
        )));
    }
    let nbar = params.nbar();
    let mc = params.mc_abs();
    let pure = pure_mc_unchecked(nbar);
    let class = if mc > pure * (1.0 + tol) {
        StateClass::Unphysical
    } else if mc <= nbar {
        StateClass::Separable
    } else if nbar > 0.0 && mc >= pure * (1.0 - tol) {
        StateClass::EntangledPure
    } else {
        StateClass::EntangledMixed
    };
    Ok(class)
}

/// Photon-number distribution `p_n = nbar^n / (1 + nbar)^(n+1)` truncated
/// at `nmax`, with the discarded mass kept in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalWeights {
    pub nmax: usize,
    pub weights: Vec<f64>,
    /// `(nbar / (1 + nbar))^(nmax + 1)`
    pub tail_mass: f64,
}

impl ThermalWeights {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn thermal_weights(nbar: f64, nmax: usize) -> Result<ThermalWeights> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "nbar must be finite and >= 0, got {nbar}"
        )));
    }
    let ratio = nbar / (1.0 + nbar);
    let p0 = 1.0 / (1.0 + nbar);
    let mut weights = Vec::with_capacity(nmax + 1);
    let mut p = p0;
    for _ in 0..=nmax {
        weights.push(p);
        p *= ratio;
    }
    let tail_mass = ratio.powi(nmax as i32 + 1);
    Ok(ThermalWeights {
        nmax,
        weights,
        tail_mass,
    })
}

/// Quadrature-space wavefunction of the pure two-mode squeezed vacuum,
/// `exp(-(nbar + 1/2)(xa^2 + xb^2) + 2 sqrt(nbar(nbar+1)) xa xb) / sqrt(pi)`.
pub fn epr_wavefunction(nbar: f64, xa: f64, xb: f64) -> Result<f64> {
    let corr = pure_mc(nbar)?;
    let exponent = -(nbar + 0.5) * (xa * xa + xb * xb) + 2.0 * corr * (xa * xb);
    Ok(exponent.exp() / PI.sqrt())
}

/// Squared overlap between the pure state and its normalized two-term
/// truncation `sqrt(p0)|0,0> + sqrt(p1)|1,1>`, which equals `p0 + p1`.
pub fn weak_approx_fidelity(nbar: f64) -> Result<f64> {
    let w = thermal_weights(nbar, 1)?;
    Ok(w.weights[0] + w.weights[1])
}
