//! Acceptance criteria, one test each. Run with
//! `cargo test -p epr-hbt --test acceptance -- --nocapture --test-threads=1`
//! to see the PASS/FAIL lines.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use epr_hbt::experiment::{
    decide_entanglement, fit_visibility, simulate_fringe_counts, uniform_phases, Verdict,
};
use epr_hbt::fock::{hbt_correlation_exact, moment_exact, oracle_state};
use epr_hbt::hbt::{hbt_correlation, visibility, witness_mean};
use epr_hbt::hom::{coincidence_probability, g2_stationary_limit, g2_temporal, TemporalParams};
use epr_hbt::moments::{covariance_table, fourth_order_set, normally_ordered_moment, OperatorWord};
use epr_hbt::state::{classify, epr_wavefunction, pure_mc, EprParams, PURITY_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, what: &str, ok: bool, detail: String) {
    println!("{id} {} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} failed: {detail}");
}

fn p(nbar: f64, mc: f64) -> EprParams {
    EprParams::real(nbar, mc).unwrap()
}

#[test]
fn ac01_pure_state_visibility_and_dip() {
    let params = p(1.0, 2f64.sqrt());
    let v = visibility(&params).unwrap();
    let pmin = coincidence_probability(&params, 0.0).unwrap();
    let ok = (v - 0.6).abs() <= 1e-12 && (pmin - 0.4).abs() <= 1e-12;
    report(
        "AC1",
        "visibility 0.6 and p_min 0.4 at (1, sqrt 2)",
        ok,
        format!("v={v:.15} p_min={pmin:.15}"),
    );
}

#[test]
fn ac02_weak_squeezing_dip() {
    let pmin = coincidence_probability(&p(0.1, 0.11f64.sqrt()), 0.0).unwrap();
    let ok = (pmin - 1.0 / 7.0).abs() <= 1e-12 && (pmin - 0.14).abs() <= 0.005;
    report(
        "AC2",
        "weak-squeezing p_min 1/7, within 0.005 of 0.14",
        ok,
        format!("p_min={pmin:.15}"),
    );
}

#[test]
fn ac03_thermal_and_border_lines() {
    let mut worst: f64 = 0.0;
    for nbar in [0.01, 0.1, 1.0, 10.0] {
        worst = worst.max((visibility(&p(nbar, 0.0)).unwrap() - 1.0 / 3.0).abs());
        worst = worst.max((visibility(&p(nbar, nbar)).unwrap() - 0.5).abs());
    }
    report(
        "AC3",
        "thermal 1/3 and border 1/2",
        worst <= 1e-12,
        format!("max deviation {worst:e}"),
    );
}

#[test]
fn ac04_witness_identity_and_sign() {
    let mut worst: f64 = 0.0;
    let mut disagreements = 0;
    let mut checked = 0;
    for i in 0..50 {
        let nbar = 0.01 + 9.99 * i as f64 / 49.0;
        let top = pure_mc(nbar).unwrap();
        for j in 0..50 {
            let params = p(nbar, top * j as f64 / 49.0);
            let w = witness_mean(&params).unwrap().value;
            worst = worst.max((w - (0.5 - visibility(&params).unwrap())).abs());
            if (params.mc_abs() - nbar).abs() > 1e-9 * nbar {
                checked += 1;
                let entangled = classify(&params, PURITY_TOL).unwrap().is_entangled();
                if (w < 0.0) != entangled {
                    disagreements += 1;
                }
            }
        }
    }
    report(
        "AC4",
        "witness = 1/2 - v with sign matching classify on 50x50 grid",
        worst <= 1e-12 && disagreements == 0,
        format!("max |w - (1/2 - v)| = {worst:e}, sign disagreements {disagreements}/{checked}"),
    );
}

#[test]
fn ac05_oracle_equivalence() {
    let start = Instant::now();
    let grid = [
        (1.0, 0.0),
        (1.0, 1.0),
        (1.0, 1.2),
        (1.0, 2f64.sqrt()),
        (0.1, 0.1),
        (0.1, 0.11f64.sqrt()),
    ];
    let words: [OperatorWord; 3] =
        ["ad ad a a", "bd bd b b", "ad bd a b"].map(|s| s.parse().unwrap());
    let mut worst: f64 = 0.0;
    for (nbar, mc) in grid {
        let params = p(nbar, mc);
        let state = oracle_state(&params, 1e-10).unwrap();
        let table = covariance_table(&params).unwrap();
        let f = fourth_order_set(&params).unwrap();
        for (w, closed) in words.iter().zip([f.aa, f.bb, f.ab]) {
            let wick = normally_ordered_moment(&table, w).unwrap();
            assert!((wick.re - closed).abs() <= 1e-15 && wick.im == 0.0);
            let exact = moment_exact(&state, w).unwrap();
            worst = worst.max((exact - closed).norm() / closed.abs());
        }
        for dphi in uniform_phases(12) {
            let analytic = hbt_correlation(&params, dphi, 0.0).unwrap();
            let exact = hbt_correlation_exact(&state, dphi, 0.0).unwrap();
            worst = worst.max((exact - analytic).abs() / analytic.abs());
        }
    }
    let elapsed = start.elapsed();
    report(
        "AC5",
        "closed form vs truncated Fock at tail_tol 1e-10",
        worst <= 1e-5 && elapsed <= Duration::from_secs(60),
        format!(
            "max relative error {worst:e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn ac06_temporal_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nbar = rng.random_range(0.01..10.0);
        let params = p(nbar, rng.random_range(0.0..=1.0) * pure_mc(nbar).unwrap());
        let intensity = rng.random_range(0.1..10.0);
        let temporal = TemporalParams::new(
            intensity,
            intensity,
            rng.random_range(0.1..10.0),
            rng.random_range(0.1..10.0),
        )
        .unwrap();
        let tau = rng.random_range(-3.0..3.0) * temporal.tau_c();
        let ratio = g2_temporal(&params, &temporal, tau).unwrap()
            / g2_stationary_limit(&params, &temporal).unwrap();
        let want = coincidence_probability(&params, tau / temporal.tau_c()).unwrap();
        worst = worst.max((ratio - want).abs());
    }
    report(
        "AC6",
        "G2(tau)/G2(inf) equals p(tau/tau_c) at 100 random points",
        worst <= 1e-12,
        format!("max deviation {worst:e}"),
    );
}

/// Reads `mc,visibility` rows out of the CLI's CSV.
fn scan(nbar: &str) -> Vec<(f64, f64)> {
    let out = Command::new(env!("CARGO_BIN_EXE_epr-hbt"))
        .args(["visibility-scan", "--nbar", nbar])
        .env_remove("EPR_HBT_OUTPUT_DIR")
        .output()
        .unwrap();
    assert!(out.status.success());
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn ac07_visibility_scan_crossing() {
    let mut details = Vec::new();
    let mut ok = true;
    for (flag, nbar) in [("1", 1.0), ("0.1", 0.1)] {
        let curve = scan(flag);
        // last grid point at or below 1/2, first strictly above
        let k = curve.iter().rposition(|&(_, v)| v <= 0.5).unwrap();
        let (mut lo, mut hi) = (curve[k].0, curve[k + 1].0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if visibility(&p(nbar, mid)).unwrap() <= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let crossing = 0.5 * (lo + hi);
        ok &= (crossing - nbar).abs() <= 1e-6;
        details.push(format!("nbar={nbar}: crossing at {crossing:.12}"));
    }
    report(
        "AC7",
        "visibility-scan crosses 1/2 at |mc| = nbar",
        ok,
        details.join(", "),
    );
}

#[test]
fn ac08_statistical_estimator() {
    let start = Instant::now();
    let params = p(1.0, 2f64.sqrt());
    let phases = uniform_phases(24);
    let (mut within, mut witnessed) = (0, 0);
    for seed in 0..100 {
        let run = simulate_fringe_counts(&params, &phases, 1e4, seed).unwrap();
        let est = fit_visibility(&run).unwrap();
        if (est.v_hat - 0.6).abs() <= 4.0 * est.sigma_v {
            within += 1;
        }
        if decide_entanglement(&est, 3.0).unwrap() == Verdict::Witnessed {
            witnessed += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "AC8",
        "fringe fit within 4 sigma and witnessed at k=3",
        within >= 99 && witnessed >= 95 && elapsed <= Duration::from_secs(30),
        format!(
            "{within}/100 within 4 sigma, {witnessed}/100 witnessed, {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

/// Trapezoid rule over `[-half, half]^2` with spacing `h`.
fn trapezoid_2d(f: impl Fn(f64, f64) -> f64, half: f64, h: f64) -> f64 {
    let n = (2.0 * half / h).round() as i64;
    let weight = |i: i64| if i == 0 || i == n { 0.5 } else { 1.0 };
    let mut sum = 0.0;
    for i in 0..=n {
        let x = -half + h * i as f64;
        for j in 0..=n {
            let y = -half + h * j as f64;
            sum += weight(i) * weight(j) * f(x, y);
        }
    }
    sum * h * h
}

#[test]
fn ac09_wavefunction_normalization() {
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for nbar in [0.0, 0.5, 1.0] {
        let norm = trapezoid_2d(
            |x, y| epr_wavefunction(nbar, x, y).unwrap().powi(2),
            15.0,
            0.05,
        );
        worst = worst.max((norm - 1.0).abs());
        details.push(format!("nbar={nbar}: {norm:.12}"));
    }
    report(
        "AC9",
        "integral of |psi|^2 is 1",
        worst <= 1e-6,
        details.join(", "),
    );
}

#[test]
fn ac10_property_sweep() {
    let mut failures = Vec::new();
    let mut params_set = Vec::new();
    for nbar in [0.01, 0.1, 0.5, 1.0, 3.0] {
        let top = pure_mc(nbar).unwrap();
        for frac in [0.0, 0.3, nbar / top, 0.8, 1.0] {
            params_set.push(p(nbar, frac * top).with_phase(0.7 * frac));
        }
    }
    let odd: Vec<OperatorWord> = ["a", "ad", "ad a b", "ad bd b", "ad ad bd a b"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    for params in &params_set {
        let table = covariance_table(params).unwrap();
        // oddness
        if odd
            .iter()
            .any(|w| normally_ordered_moment(&table, w).unwrap().norm() != 0.0)
        {
            failures.push(format!("odd word nonzero for {params}"));
        }
        // evenness of the dip and positivity
        for t in [0.1, 0.5, 1.3, 2.7] {
            let (a, b) = (
                coincidence_probability(params, t).unwrap(),
                coincidence_probability(params, -t).unwrap(),
            );
            if a != b || a <= 0.0 {
                failures.push(format!("p(T) not even/positive at T={t} for {params}"));
            }
        }
        // dependence on the phase difference only
        for (d, shift) in [(0.3, 1.0), (2.0, -0.6), (PI, 2.2)] {
            let a = hbt_correlation(params, d, 0.0).unwrap();
            let b = hbt_correlation(params, d + shift, shift).unwrap();
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) || a < 0.0 {
                failures.push(format!("HBT depends on common phase for {params}"));
            }
        }
    }
    // monotonicity of visibility in |mc|
    for nbar in [0.01, 0.1, 1.0, 10.0] {
        let top = pure_mc(nbar).unwrap();
        let v: Vec<f64> = (0..=100)
            .map(|k| visibility(&p(nbar, top * k as f64 / 100.0)).unwrap())
            .collect();
        if !v.windows(2).all(|w| w[0] < w[1]) {
            failures.push(format!("visibility not increasing at nbar={nbar}"));
        }
    }
    // oracle densities are positive semidefinite
    for (nbar, mc) in [(1.0, 0.0), (1.0, 1.2), (0.1, 0.11f64.sqrt())] {
        let min_eig = oracle_state(&p(nbar, mc), 1e-10).unwrap().min_eigenvalue();
        if min_eig < -1e-10 {
            failures.push(format!(
                "oracle density for ({nbar}, {mc}) has eigenvalue {min_eig:e}"
            ));
        }
    }
    report(
        "AC10",
        "oddness, evenness, monotonicity, phase-difference invariance, positivity, PSD",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} states swept; randomized suites in tests/properties.rs, oracle.rs, statistics.rs", params_set.len())
        } else {
            failures.join("; ")
        },
    );
}
