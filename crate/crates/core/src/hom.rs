//! Time-resolved coincidences and the Hong-Ou-Mandel dip.
//!
//! The two input wave packets are modeled as constant-amplitude phase
//! diffusers: `|alpha(t)|^2 = I_a` and `|beta(t)|^2 = I_b` deterministically,
//! with Gaussian phase autocorrelations
//! `<alpha*(t) alpha(t+tau)> = I_a exp(-tau^2/tau_a^2)` (same for `beta`).
//! Under this model only the intensity-product terms and the exchange term
//! survive the phase average, and the coincidence function is stationary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbt::visibility;
use crate::moments::fourth_order_set;
use crate::state::EprParams;

/// Intensities and coherence times of the two stochastic mode functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalParams {
    i_a: f64,
    i_b: f64,
    tau_a: f64,
    tau_b: f64,
}

impl TemporalParams {
    pub fn new(i_a: f64, i_b: f64, tau_a: f64, tau_b: f64) -> Result<Self> {
        for (name, v) in [
            ("I_a", i_a),
            ("I_b", i_b),
            ("tau_a", tau_a),
            ("tau_b", tau_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self {
            i_a,
            i_b,
            tau_a,
            tau_b,
        })
    }

    /// Equal intensities and coherence times.
    pub fn symmetric(intensity: f64, tau: f64) -> Result<Self> {
        Self::new(intensity, intensity, tau, tau)
    }

    pub fn i_a(&self) -> f64 {
        self.i_a
    }

    pub fn i_b(&self) -> f64 {
        self.i_b
    }

    pub fn tau_a(&self) -> f64 {
        self.tau_a
    }

    pub fn tau_b(&self) -> f64 {
        self.tau_b
    }

    pub fn tau_c(&self) -> f64 {
        1.0 / (self.tau_a.powi(-2) + self.tau_b.powi(-2)).sqrt()
    }
}

/// `tau_c` with `1/tau_c^2 = 1/tau_a^2 + 1/tau_b^2`.
pub fn combined_coherence_time(tau_a: f64, tau_b: f64) -> Result<f64> {
    Ok(TemporalParams::new(1.0, 1.0, tau_a, tau_b)?.tau_c())
}

/// Stationary coincidence function `G2(tau)` for arbitrary intensities:
///
/// `nbar^2 (I_a^2 + I_b^2)/2 + (nbar^2 + |mc|^2) I_a I_b (1 - exp(-tau^2/tau_c^2))/2`.
///
/// Assembled from the fourth-order moments so each term maps onto one
/// group of the phase-averaged expansion.
pub fn g2_temporal(params: &EprParams, temporal: &TemporalParams, tau: f64) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tau must be finite, got {tau}"
        )));
    }
    let f = fourth_order_set(params)?;
    let (ia, ib) = (temporal.i_a, temporal.i_b);
    let decay = (-tau * tau / temporal.tau_a.powi(2) - tau * tau / temporal.tau_b.powi(2)).exp();
    // |alpha(t)|^2 |beta(t+tau)|^2 + |alpha(t+tau)|^2 |beta(t)|^2 - 2 Re(exchange)
    let exchange = 2.0 * ia * ib - 2.0 * ia * ib * decay;
    Ok(0.25 * (ia * ia * f.aa + ib * ib * f.bb + exchange * f.ab))
}

/// `G2(tau -> infinity)`.
pub fn g2_stationary_limit(params: &EprParams, temporal: &TemporalParams) -> Result<f64> {
    let f = fourth_order_set(params)?;
    let (ia, ib) = (temporal.i_a, temporal.i_b);
    Ok(0.25 * (ia * ia * f.aa + ib * ib * f.bb + 2.0 * ia * ib * f.ab))
}

/// Normalized coincidence probability `p(T) = 1 - v exp(-T^2)`, `T = tau / tau_c`.
pub fn coincidence_probability(params: &EprParams, t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "T must be finite, got {t}"
        )));
    }
    Ok(1.0 - visibility(params)? * (-t * t).exp())
}

/// Location and depth of the dip: `(0, 1 - v)`.
pub fn dip_minimum(params: &EprParams) -> Result<(f64, f64)> {
    Ok((0.0, coincidence_probability(params, 0.0)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Uniform grid of `steps` points on `[t_min, t_max]`.
pub(crate) fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    let span = stop - start;
    let last = (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                stop
            } else {
                start + span * i as f64 / last
            }
        })
        .collect()
}

/// `p(T)` sampled on `steps` equally spaced times, endpoints included.
pub fn dip_scan(params: &EprParams, t_min: f64, t_max: f64, steps: usize) -> Result<DipCurve> {
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(Error::InvalidParameter(format!(
            "need finite t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    let times = linspace(t_min, t_max, steps);
    let values = times
        .iter()
        .map(|&t| coincidence_probability(params, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DipCurve { times, values })
}
