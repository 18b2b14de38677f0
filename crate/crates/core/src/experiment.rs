//! Shot-noise limited counting experiment.
//!
//! Coincidence counts are Poisson samples around the closed-form rates.
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`): the run seed
//! keys the generator and each setting reads its own stream, selected by
//! the setting's index, so a record never depends on how many draws other
//! settings consumed.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbt::{visibility, CLASSICAL_BOUND};
use crate::hom::coincidence_probability;
use crate::state::EprParams;

/// Rates below this many counts are sampled as exactly zero.
pub const MIN_SAMPLED_RATE: f64 = 1e-6;

const MAX_IRLS_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// Phase difference (radians) or dimensionless delay `T`.
    pub setting: f64,
    pub expected_rate: f64,
    pub counts: u64,
}

/// Records of one simulated acquisition together with the seed that made them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRun {
    pub seed: u64,
    pub records: Vec<CountRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub v_hat: f64,
    pub sigma_v: f64,
    pub baseline_hat: f64,
    pub n_settings: usize,
    pub seed: u64,
    /// `v_hat` was pulled back into `[0, 1]`.
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Witnessed,
    Inconclusive,
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_counts(rate: f64, seed: u64, index: usize) -> Result<u64> {
    if rate < MIN_SAMPLED_RATE {
        return Ok(0);
    }
    let poisson = Poisson::new(rate)
        .map_err(|e| Error::InvalidParameter(format!("Poisson rate {rate}: {e}")))?;
    Ok(poisson.sample(&mut stream_rng(seed, index)) as u64)
}

fn simulate<F>(settings: &[f64], mean_counts: f64, seed: u64, shape: F) -> Result<CountRun>
where
    F: Fn(f64) -> Result<f64>,
{
    if settings.is_empty() {
        return Err(Error::EmptyInput("at least one setting is required"));
    }
    if !(mean_counts.is_finite() && mean_counts > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mean_counts must be finite and > 0, got {mean_counts}"
        )));
    }
    let records = settings
        .iter()
        .enumerate()
        .map(|(index, &setting)| {
            if !setting.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "setting must be finite, got {setting}"
                )));
            }
            let expected_rate = mean_counts * shape(setting)?;
            Ok(CountRecord {
                setting,
                expected_rate,
                counts: sample_counts(expected_rate, seed, index)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountRun { seed, records })
}

/// Coincidence counts along the HBT fringe, rate `mean_counts (1 - v cos dphi)`.
pub fn simulate_fringe_counts(
    params: &EprParams,
    phase_differences: &[f64],
    mean_counts: f64,
    seed: u64,
) -> Result<CountRun> {
    let v = visibility(params)?;
    simulate(phase_differences, mean_counts, seed, |dphi| {
        Ok(1.0 - v * dphi.cos())
    })
}

/// Coincidence counts across the HOM dip, rate `mean_counts p(T)`.
pub fn simulate_hom_counts(
    params: &EprParams,
    times: &[f64],
    mean_counts: f64,
    seed: u64,
) -> Result<CountRun> {
    params.ensure_nondegenerate()?;
    simulate(times, mean_counts, seed, |t| {
        coincidence_probability(params, t)
    })
}

/// Poisson-weighted least squares of the counts on `{1, cos, sin}`.
///
/// Weights are refreshed from the fitted rates until the coefficients settle,
/// which solves the Poisson likelihood equations for this linear model.
/// The visibility is `sqrt(c_cos^2 + c_sin^2) / c_0`, positive when the
/// cosine coefficient is negative (a dip at zero phase difference).
pub fn fit_visibility(run: &CountRun) -> Result<VisibilityEstimate> {
    let records = &run.records;
    if records.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 settings, got {}",
            records.len()
        )));
    }
    let total: u64 = records.iter().map(|r| r.counts).sum();
    if total == 0 {
        return Err(Error::Fit("no counts recorded".into()));
    }
    let rows: Vec<Vector3<f64>> = records
        .iter()
        .map(|r| Vector3::new(1.0, r.setting.cos(), r.setting.sin()))
        .collect();

    let design: Matrix3<f64> = rows.iter().map(|x| x * x.transpose()).sum();
    let eig = SymmetricEigen::new(design).eigenvalues;
    if eig.min() <= 1e-10 * eig.max() {
        return Err(Error::Fit(
            "degenerate design: settings do not separate 1, cos and sin".into(),
        ));
    }

    let counts: Vec<f64> = records.iter().map(|r| r.counts as f64).collect();
    let mut weights: Vec<f64> = counts.iter().map(|&y| 1.0 / y.max(1.0)).collect();
    let mut beta = Vector3::zeros();
    let mut normal = Matrix3::zeros();
    for _ in 0..MAX_IRLS_ITERATIONS {
        normal = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for ((x, &y), &w) in rows.iter().zip(&counts).zip(&weights) {
            normal += w * x * x.transpose();
            rhs += w * y * x;
        }
        let next = normal
            .cholesky()
            .ok_or_else(|| Error::Fit("normal equations are not positive definite".into()))?
            .solve(&rhs);
        let change = (next - beta).amax();
        beta = next;
        // fitted rates below half a count would dominate the weights
        weights = rows.iter().map(|x| 1.0 / x.dot(&beta).max(0.5)).collect();
        if change <= 1e-12 * beta.amax() {
            break;
        }
    }
    let covariance = normal
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular fit covariance".into()))?;

    let (c0, cc, cs) = (beta[0], beta[1], beta[2]);
    if c0 <= 0.0 {
        return Err(Error::Fit(format!("non-positive baseline {c0}")));
    }
    let amplitude = cc.hypot(cs);
    let sign = if cc <= 0.0 { 1.0 } else { -1.0 };
    let raw = sign * amplitude / c0;

    let grad = if amplitude > 0.0 {
        Vector3::new(
            -raw / c0,
            sign * cc / (amplitude * c0),
            sign * cs / (amplitude * c0),
        )
    } else {
        Vector3::new(0.0, 1.0 / c0, 0.0)
    };
    let sigma_v = (grad.transpose() * covariance * grad)[(0, 0)]
        .max(0.0)
        .sqrt();

    let v_hat = raw.clamp(0.0, 1.0);
    Ok(VisibilityEstimate {
        v_hat,
        sigma_v,
        baseline_hat: c0,
        n_settings: records.len(),
        seed: run.seed,
        clipped: v_hat != raw,
    })
}

/// Witnessed iff `v_hat - k_sigma * sigma_v > 1/2`.
pub fn decide_entanglement(estimate: &VisibilityEstimate, k_sigma: f64) -> Result<Verdict> {
    if !(k_sigma.is_finite() && k_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k_sigma must be > 0, got {k_sigma}"
        )));
    }
    Ok(
        if estimate.v_hat - k_sigma * estimate.sigma_v > CLASSICAL_BOUND {
            Verdict::Witnessed
        } else {
            Verdict::Inconclusive
        },
    )
}

/// `n` phase differences evenly spaced on `[0, 2 pi)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn p(nbar: f64, mc: f64) -> EprParams {
        EprParams::real(nbar, mc).unwrap()
    }

    fn estimate(v_hat: f64, sigma_v: f64) -> VisibilityEstimate {
        VisibilityEstimate {
            v_hat,
            sigma_v,
            baseline_hat: 1.0,
            n_settings: 24,
            seed: 0,
            clipped: false,
        }
    }

    #[test]
    fn fringe_rate_examples() {
        let run = simulate_fringe_counts(&p(1.0, 2f64.sqrt()), &[FRAC_PI_2], 1000.0, 7).unwrap();
        assert!((run.records[0].expected_rate - 1000.0).abs() < 1e-9);
        let run = simulate_fringe_counts(&p(0.8, 0.8), &[0.0], 1000.0, 7).unwrap();
        assert!((run.records[0].expected_rate - 500.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_runs_repeat() {
        let params = p(1.0, 1.2);
        let phases = uniform_phases(24);
        let a = simulate_fringe_counts(&params, &phases, 1e3, 99).unwrap();
        let b = simulate_fringe_counts(&params, &phases, 1e3, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_fringe_counts(&params, &phases, 1e3, 100).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn substreams_are_independent_of_setting_list() {
        let params = p(1.0, 1.2);
        let phases = uniform_phases(8);
        let full = simulate_fringe_counts(&params, &phases, 1e3, 5).unwrap();
        let prefix = simulate_fringe_counts(&params, &phases[..3], 1e3, 5).unwrap();
        assert_eq!(&full.records[..3], &prefix.records[..]);
    }

    #[test]
    fn hom_rate_examples() {
        let run = simulate_hom_counts(&p(1.0, 2f64.sqrt()), &[0.0, 5.0], 1000.0, 1).unwrap();
        assert!((run.records[0].expected_rate - 400.0).abs() < 1e-9);
        assert!((run.records[1].expected_rate - 1000.0).abs() <= 1e-8 * 1000.0);
        let run = simulate_hom_counts(&EprParams::pure(0.1).unwrap(), &[0.0], 1000.0, 1).unwrap();
        assert!((run.records[0].expected_rate - 1000.0 / 7.0).abs() < 1e-9);
        assert!((run.records[0].expected_rate - 142.9).abs() < 0.05);
    }

    #[test]
    fn simulate_errors() {
        assert!(matches!(
            simulate_fringe_counts(&p(1.0, 1.0), &[], 10.0, 0),
            Err(Error::EmptyInput(_))
        ));
        assert!(simulate_fringe_counts(&p(1.0, 1.0), &[0.0], 0.0, 0).is_err());
        assert!(simulate_fringe_counts(&p(0.1, 0.5), &[0.0], 10.0, 0).is_err());
        assert!(simulate_hom_counts(&p(0.0, 0.0), &[0.0], 10.0, 0).is_err());
    }

    #[test]
    fn tiny_rates_sample_zero() {
        // p(0) = 1 - v with v -> 1 as nbar -> 0 on the pure curve
        let params = EprParams::pure(1e-9).unwrap();
        let run = simulate_hom_counts(&params, &[0.0], 1.0, 3).unwrap();
        assert!(run.records[0].expected_rate < MIN_SAMPLED_RATE);
        assert_eq!(run.records[0].counts, 0);
    }

    #[test]
    fn noiseless_fit_recovers_generator() {
        let params = p(1.0, 2f64.sqrt());
        let mut run = simulate_fringe_counts(&params, &uniform_phases(24), 1e4, 0).unwrap();
        for r in &mut run.records {
            r.counts = r.expected_rate.round() as u64;
        }
        let est = fit_visibility(&run).unwrap();
        assert!((est.v_hat - 0.6).abs() < 0.01, "{est:?}");
        assert!(est.sigma_v > 0.0);
        assert!((est.baseline_hat - 1e4).abs() < 10.0);
        assert!(!est.clipped);
    }

    #[test]
    fn identical_settings_are_degenerate() {
        let run = CountRun {
            seed: 0,
            records: (0..5)
                .map(|_| CountRecord {
                    setting: 0.3,
                    expected_rate: 100.0,
                    counts: 100,
                })
                .collect(),
        };
        assert!(matches!(fit_visibility(&run), Err(Error::Fit(_))));
    }

    #[test]
    fn too_few_or_empty_records_fail() {
        let run = CountRun {
            seed: 0,
            records: vec![
                CountRecord {
                    setting: 0.0,
                    expected_rate: 1.0,
                    counts: 1
                };
                2
            ],
        };
        assert!(matches!(fit_visibility(&run), Err(Error::Fit(_))));
        let run = CountRun {
            seed: 0,
            records: uniform_phases(6)
                .into_iter()
                .map(|s| CountRecord {
                    setting: s,
                    expected_rate: 0.0,
                    counts: 0,
                })
                .collect(),
        };
        assert!(matches!(fit_visibility(&run), Err(Error::Fit(_))));
    }

    #[test]
    fn decide_examples() {
        assert_eq!(
            decide_entanglement(&estimate(0.6, 0.01), 3.0).unwrap(),
            Verdict::Witnessed
        );
        assert_eq!(
            decide_entanglement(&estimate(0.51, 0.01), 3.0).unwrap(),
            Verdict::Inconclusive
        );
        for (s, k) in [(0.0, 1.0), (0.1, 0.5), (1e-9, 10.0)] {
            assert_eq!(
                decide_entanglement(&estimate(0.5, s), k).unwrap(),
                Verdict::Inconclusive
            );
        }
        assert!(decide_entanglement(&estimate(0.6, 0.01), 0.0).is_err());
    }

    #[test]
    fn fit_reports_seed() {
        let run = simulate_fringe_counts(&p(1.0, 1.0), &uniform_phases(12), 500.0, 42).unwrap();
        let est = fit_visibility(&run).unwrap();
        assert_eq!(est.seed, 42);
        assert_eq!(est.n_settings, 12);
    }
}
