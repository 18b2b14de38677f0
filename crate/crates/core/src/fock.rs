//! Brute-force ground truth in a truncated two-mode Fock basis.
//!
//! States are stored densely over the `(N+1)^2` product basis
//! `|na, nb>` (row-major, `index = na (N+1) + nb`). Operators are built
//! from explicit truncated ladder matrices with `<n|a|n+1> = sqrt(n+1)`,
//! kept sparse because every ladder column has at most one entry.
//!
//! Mixed EPR states are realized as two-mode squeezed thermal states
//! `S(r) (rho_th ⊗ rho_th) S(r)†`, `S(r) = exp(r (ab - a†b†))`, followed by
//! a phase rotation of mode `b` so that `<ab> = -mc` holds literally.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moments::{Ladder, Mode, OperatorWord, SecondMoments};
use crate::state::{thermal_weights, EprParams};

/// Longest word [`moment_exact`] evaluates.
pub const MAX_EXACT_WORD_LEN: usize = 8;

/// Default geometric-tail tolerance for [`truncation_for`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Largest accepted deviation of the block exponentials from orthogonality.
pub const UNITARITY_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum FockData {
    PureVector(DVector<Complex64>),
    DensityMatrix(DMatrix<Complex64>),
}

/// A truncated two-mode state and the probability mass it lost.
#[derive(Debug, Clone, PartialEq)]
pub struct FockArray {
    cutoff: usize,
    data: FockData,
    trace_deficit: f64,
}

impl FockArray {
    /// Per-mode photon-number cutoff `N`.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1) * (self.cutoff + 1)
    }

    pub fn data(&self) -> &FockData {
        &self.data
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn index(&self, na: usize, nb: usize) -> usize {
        na * (self.cutoff + 1) + nb
    }

    /// `<psi|psi>` or `Tr rho`.
    pub fn trace(&self) -> f64 {
        match &self.data {
            FockData::PureVector(psi) => psi.norm_squared(),
            FockData::DensityMatrix(rho) => rho.trace().re,
        }
    }

    /// `Tr rho^2` (for a vector, `<psi|psi>^2`).
    pub fn purity(&self) -> f64 {
        match &self.data {
            FockData::PureVector(psi) => psi.norm_squared().powi(2),
            FockData::DensityMatrix(rho) => rho.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// `max |rho_ij - conj(rho_ji)|`; zero for vectors.
    pub fn hermiticity_defect(&self) -> f64 {
        match &self.data {
            FockData::PureVector(_) => 0.0,
            FockData::DensityMatrix(rho) => {
                let n = rho.nrows();
                let mut worst = 0.0f64;
                for i in 0..n {
                    for j in i..n {
                        worst = worst.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
                    }
                }
                worst
            }
        }
    }

    /// Smallest eigenvalue of the density matrix.
    ///
    /// The matrix is first split into the connected components of its
    /// nonzero pattern, so block-diagonal states are diagonalized block by
    /// block.
    pub fn min_eigenvalue(&self) -> f64 {
        let rho = match &self.data {
            FockData::PureVector(psi) => {
                return if psi.len() > 1 {
                    0.0
                } else {
                    psi.norm_squared()
                };
            }
            FockData::DensityMatrix(rho) => rho,
        };
        let n = rho.nrows();
        let mut dsu = DisjointSets::new(n);
        for i in 0..n {
            for j in i + 1..n {
                if rho[(i, j)] != ZERO || rho[(j, i)] != ZERO {
                    dsu.union(i, j);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            groups[dsu.find(i)].push(i);
        }
        groups
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| {
                let block = DMatrix::from_fn(g.len(), g.len(), |r, c| rho[(g[r], g[c])]);
                SymmetricEigen::new(block).eigenvalues.min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `<psi|op|psi>` or `Tr[rho op]`.
    fn expectation(&self, op: &SparseOp) -> Complex64 {
        let mut total = ZERO;
        match &self.data {
            FockData::PureVector(psi) => {
                for (k, col) in op.cols.iter().enumerate() {
                    for &(i, v) in col {
                        total += psi[i].conj() * v * psi[k];
                    }
                }
            }
            FockData::DensityMatrix(rho) => {
                for (k, col) in op.cols.iter().enumerate() {
                    for &(i, v) in col {
                        total += rho[(k, i)] * v;
                    }
                }
            }
        }
        total
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Column-compressed operator on the truncated two-mode basis.
#[derive(Debug, Clone)]
pub(crate) struct SparseOp {
    cutoff: usize,
    cols: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    fn dim(cutoff: usize) -> usize {
        (cutoff + 1) * (cutoff + 1)
    }

    pub(crate) fn identity(cutoff: usize) -> Self {
        let cols = (0..Self::dim(cutoff))
            .map(|k| vec![(k, Complex64::new(1.0, 0.0))])
            .collect();
        Self { cutoff, cols }
    }

    /// Truncated ladder matrix: `a|n> = sqrt(n)|n-1>`, `a†|n> = sqrt(n+1)|n+1>`
    /// for `n < N`, and `a†|N> = 0`.
    pub(crate) fn ladder(cutoff: usize, op: Ladder) -> Self {
        let side = cutoff + 1;
        let mut cols = Vec::with_capacity(side * side);
        for na in 0..side {
            for nb in 0..side {
                let n = match op.mode {
                    Mode::A => na,
                    Mode::B => nb,
                };
                let target = match (op.dagger, n) {
                    (false, 0) => None,
                    (false, n) => Some((n - 1, (n as f64).sqrt())),
                    (true, n) if n == cutoff => None,
                    (true, n) => Some((n + 1, ((n + 1) as f64).sqrt())),
                };
                cols.push(match target {
                    None => Vec::new(),
                    Some((m, amp)) => {
                        let row = match op.mode {
                            Mode::A => m * side + nb,
                            Mode::B => na * side + m,
                        };
                        vec![(row, Complex64::new(amp, 0.0))]
                    }
                });
            }
        }
        Self { cutoff, cols }
    }

    /// Matrix element `<row|op|col>`.
    #[cfg(test)]
    pub(crate) fn get(&self, row: usize, col: usize) -> Complex64 {
        self.cols[col]
            .iter()
            .filter(|(r, _)| *r == row)
            .map(|(_, v)| *v)
            .sum()
    }

    pub(crate) fn matmul(&self, rhs: &SparseOp) -> SparseOp {
        let cols = rhs
            .cols
            .iter()
            .map(|col| {
                let mut acc: Vec<(usize, Complex64)> = Vec::new();
                for &(k, b) in col {
                    for &(i, a) in &self.cols[k] {
                        acc.push((i, a * b));
                    }
                }
                compress(acc)
            })
            .collect();
        SparseOp {
            cutoff: self.cutoff,
            cols,
        }
    }

    /// `alpha * self + beta * other`
    pub(crate) fn combine(&self, alpha: Complex64, other: &SparseOp, beta: Complex64) -> SparseOp {
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(x, y)| {
                let acc = x
                    .iter()
                    .map(|&(i, v)| (i, alpha * v))
                    .chain(y.iter().map(|&(i, v)| (i, beta * v)))
                    .collect();
                compress(acc)
            })
            .collect();
        SparseOp {
            cutoff: self.cutoff,
            cols,
        }
    }

    pub(crate) fn adjoint(&self) -> SparseOp {
        let mut cols = vec![Vec::new(); self.cols.len()];
        for (k, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((k, v.conj()));
            }
        }
        SparseOp {
            cutoff: self.cutoff,
            cols,
        }
    }
}

fn compress(mut entries: Vec<(usize, Complex64)>) -> Vec<(usize, Complex64)> {
    entries.sort_by_key(|&(i, _)| i);
    let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(entries.len());
    for (i, v) in entries {
        match out.last_mut() {
            Some((j, w)) if *j == i => *w += v,
            _ => out.push((i, v)),
        }
    }
    out.retain(|&(_, v)| v != ZERO);
    out
}

/// `sum_n sqrt(p_n) |n, n>` for `n <= N`.
///
/// This vector has `<ab> = +sqrt(nbar(nbar+1))`, i.e. it is the EPR state
/// with `mc = -sqrt(nbar(nbar+1))`.
pub fn squeezed_vacuum_vector(nbar: f64, cutoff: usize) -> Result<FockArray> {
    let weights = thermal_weights(nbar, cutoff)?;
    let side = cutoff + 1;
    let mut psi = DVector::from_element(side * side, ZERO);
    for (n, p) in weights.weights.iter().enumerate() {
        psi[n * side + n] = Complex64::new(p.sqrt(), 0.0);
    }
    Ok(FockArray {
        cutoff,
        data: FockData::PureVector(psi),
        trace_deficit: weights.tail_mass,
    })
}

/// Thermal occupancy of each input mode and two-mode squeezing strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezerParams {
    pub n_th: f64,
    pub r: f64,
}

impl SqueezerParams {
    /// `(nbar, |mc|)` produced by squeezing two thermal modes:
    /// `nbar = n_th + (2 n_th + 1) sinh^2 r`, `|mc| = (2 n_th + 1) sinh r cosh r`.
    pub fn forward(&self) -> (f64, f64) {
        let scale = 2.0 * self.n_th + 1.0;
        let (s, c) = (self.r.sinh(), self.r.cosh());
        (self.n_th + scale * s * s, scale * s * c)
    }
}

/// Solves the forward map of [`SqueezerParams`] for `(n_th, r)`.
///
/// With `x = 2 n_th + 1`: `x^2 = (2 nbar + 1)^2 - 4 |mc|^2` and
/// `sinh 2r = 2 |mc| / x`.
pub fn invert_params(params: &EprParams) -> Result<SqueezerParams> {
    params.ensure_physical()?;
    let nbar = params.nbar();
    let mc = params.mc_abs();
    // Inside the tolerance band around the pure boundary x^2 may dip just below 1.
    let x2 = (2.0 * nbar + 1.0).powi(2) - 4.0 * mc * mc;
    let x = x2.max(1.0).sqrt();
    Ok(SqueezerParams {
        n_th: (x - 1.0) / 2.0,
        r: 0.5 * (2.0 * mc / x).asinh(),
    })
}

/// Smallest cutoff `N` with `(nbar / (1 + nbar))^(N+1) <= tail_tol`.
///
/// Each mode of the squeezed thermal construction is marginally thermal with
/// mean `nbar`, so this bounds the per-mode probability beyond `N`.
pub fn truncation_for(params: &EprParams, tail_tol: f64) -> Result<usize> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail_tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    let nbar = params.nbar();
    if nbar == 0.0 {
        return Ok(0);
    }
    let ratio = nbar / (1.0 + nbar);
    let tail = |n: usize| ratio.powi(n as i32 + 1);
    let mut n = ((tail_tol.ln() / ratio.ln()).ceil() as usize).saturating_sub(1);
    while tail(n) > tail_tol {
        n += 1;
    }
    while n > 0 && tail(n - 1) <= tail_tol {
        n -= 1;
    }
    Ok(n)
}

/// Two-mode squeezed thermal state with the second moments of `params`.
///
/// The squeezer is exponentiated blockwise in a padded working basis
/// (it conserves `na - nb`) and the result is restricted to cutoff `N`.
/// Fails if `1 - Tr rho` exceeds `max_deficit`, or if the block
/// exponentials stay non-orthogonal after one escalation of the padding.
pub fn squeezed_thermal_density(
    params: &EprParams,
    cutoff: usize,
    max_deficit: f64,
) -> Result<FockArray> {
    let squeezer = invert_params(params)?;
    let theta = if params.mc_abs() > 0.0 {
        params.mc().arg()
    } else {
        0.0
    };

    let pad = (cutoff / 2).max(8);
    let (mut rho, mut defect) = build_density(squeezer, theta, cutoff, cutoff + pad)?;
    if defect > UNITARITY_TOL {
        (rho, defect) = build_density(squeezer, theta, cutoff, cutoff + 4 * pad)?;
        if defect > UNITARITY_TOL {
            return Err(Error::Truncation(format!(
                "squeezer exponential unitarity defect {defect:e} exceeds {UNITARITY_TOL:e}"
            )));
        }
    }
    let trace_deficit = 1.0 - rho.trace().re;
    if trace_deficit > max_deficit {
        return Err(Error::Truncation(format!(
            "trace deficit {trace_deficit:e} at cutoff {cutoff} exceeds the bound {max_deficit:e}"
        )));
    }
    Ok(FockArray {
        cutoff,
        data: FockData::DensityMatrix(rho),
        trace_deficit,
    })
}

/// Density matrix for `params` at the cutoff chosen by [`truncation_for`].
pub fn oracle_state(params: &EprParams, tail_tol: f64) -> Result<FockArray> {
    let cutoff = truncation_for(params, tail_tol)?;
    // Losing either mode's tail costs at most 2 * tail_tol.
    squeezed_thermal_density(params, cutoff, 2.0 * tail_tol + 1e-12)
}

fn build_density(
    squeezer: SqueezerParams,
    theta: f64,
    cutoff: usize,
    work: usize,
) -> Result<(DMatrix<Complex64>, f64)> {
    let side = cutoff + 1;
    let thermal = thermal_weights(squeezer.n_th, work)?.weights;
    let mut rho = DMatrix::from_element(side * side, side * side, ZERO);
    let mut defect = 0.0f64;
    let work = work as i64;

    for k in -work..=work {
        // block states |m + k, m>
        let lo = 0.max(-k);
        let hi = work.min(work - k);
        let states: Vec<(usize, usize)> =
            (lo..=hi).map(|m| ((m + k) as usize, m as usize)).collect();
        let size = states.len();

        let mut generator = DMatrix::<f64>::zeros(size, size);
        for (j, &(na, nb)) in states.iter().enumerate().take(size.saturating_sub(1)) {
            let c = squeezer.r * (((na + 1) * (nb + 1)) as f64).sqrt();
            generator[(j + 1, j)] = -c;
            generator[(j, j + 1)] = c;
        }
        let unitary = generator.exp();
        let gram = unitary.transpose() * &unitary;
        defect = defect.max((gram - DMatrix::<f64>::identity(size, size)).amax());

        let kept: Vec<usize> = (0..size)
            .filter(|&j| states[j].0 <= cutoff && states[j].1 <= cutoff)
            .collect();
        if kept.is_empty() {
            continue;
        }
        let inputs: Vec<f64> = states
            .iter()
            .map(|&(na, nb)| thermal[na] * thermal[nb])
            .collect();
        for &i in &kept {
            for &j in &kept {
                let value: f64 = (0..size)
                    .map(|l| unitary[(i, l)] * inputs[l] * unitary[(j, l)])
                    .sum();
                let (na, nb) = states[i];
                let (ma, mb) = states[j];
                let phase = Complex64::from_polar(1.0, theta * (nb as f64 - mb as f64));
                rho[(na * side + nb, ma * side + mb)] = phase * value;
            }
        }
    }
    Ok((rho, defect))
}

/// `Tr[rho W]` (or `<psi|W|psi>`) for a normal-ordered word `W`, built as a
/// product of explicit ladder matrices.
pub fn moment_exact(state: &FockArray, word: &OperatorWord) -> Result<Complex64> {
    if word.len() > MAX_EXACT_WORD_LEN {
        return Err(Error::WordTooLong {
            len: word.len(),
            max: MAX_EXACT_WORD_LEN,
        });
    }
    for mode in [Mode::A, Mode::B] {
        let reach = word.raising_count(mode);
        if reach > state.cutoff() {
            return Err(Error::Truncation(format!(
                "word '{word}' raises mode {mode:?} {reach} times but the cutoff is {}",
                state.cutoff()
            )));
        }
    }
    let cutoff = state.cutoff();
    let op = word
        .ops()
        .iter()
        .fold(SparseOp::identity(cutoff), |acc, &l| {
            acc.matmul(&SparseOp::ladder(cutoff, l))
        });
    Ok(state.expectation(&op))
}

/// The ten ordered second moments read off the state.
pub fn second_moments(state: &FockArray) -> Result<SecondMoments> {
    let m = |w: &str| -> Result<Complex64> { moment_exact(state, &w.parse::<OperatorWord>()?) };
    Ok(SecondMoments {
        n_a: m("ad a")?.re,
        n_b: m("bd b")?.re,
        m_ab: m("a b")?,
        cross: m("ad b")?,
        s_a: m("a a")?,
        s_b: m("b b")?,
    })
}

/// Positive-frequency detector field `(a ± e^{i phi} b) / sqrt(2)`;
/// detector 1 takes `+`, detector 2 takes `-`.
fn detector_field(cutoff: usize, phi: f64, sign: f64) -> SparseOp {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SparseOp::ladder(cutoff, Ladder::A).combine(
        Complex64::new(s, 0.0),
        &SparseOp::ladder(cutoff, Ladder::B),
        Complex64::from_polar(sign * s, phi),
    )
}

/// `<E1⁻ E2⁻ E2⁺ E1⁺>` by explicit operator products.
pub fn hbt_correlation_exact(state: &FockArray, phi1: f64, phi2: f64) -> Result<f64> {
    let cutoff = state.cutoff();
    let e1 = detector_field(cutoff, phi1, 1.0);
    let e2 = detector_field(cutoff, phi2, -1.0);
    let op = e1.adjoint().matmul(&e2.adjoint()).matmul(&e2).matmul(&e1);
    let value = state.expectation(&op);
    if value.im.abs() > 1e-10 * value.re.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "HBT correlation has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}
