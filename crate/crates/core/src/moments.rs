//! Normally ordered moments of zero-mean two-mode Gaussian states.
//!
//! For a Gaussian state every normally ordered moment is the sum, over all
//! perfect matchings of the operator positions, of the product of the
//! pairwise second moments. Because the input word is normal-ordered and
//! pairs are always read left-to-right, an anti-normal contraction such as
//! `<a a†>` can never be requested and no commutator bookkeeping is needed.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::EprParams;

/// Longest word accepted by [`normally_ordered_moment`]; 12 positions
/// already mean 10395 matchings.
pub const MAX_WORD_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
}

/// A single ladder operator: `a`, `b`, `a†` or `b†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub mode: Mode,
    pub dagger: bool,
}

impl Ladder {
    pub const A: Ladder = Ladder {
        mode: Mode::A,
        dagger: false,
    };
    pub const B: Ladder = Ladder {
        mode: Mode::B,
        dagger: false,
    };
    pub const AD: Ladder = Ladder {
        mode: Mode::A,
        dagger: true,
    };
    pub const BD: Ladder = Ladder {
        mode: Mode::B,
        dagger: true,
    };

    pub fn adjoint(self) -> Ladder {
        Ladder {
            mode: self.mode,
            dagger: !self.dagger,
        }
    }

    fn token(self) -> &'static str {
        match (self.mode, self.dagger) {
            (Mode::A, false) => "a",
            (Mode::B, false) => "b",
            (Mode::A, true) => "ad",
            (Mode::B, true) => "bd",
        }
    }
}

/// A normal-ordered product of ladder operators.
///
/// Text form: whitespace separated tokens `ad bd a b`, e.g. `"ad bd a b"`
/// for `a† b† a b`. The empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorWord(Vec<Ladder>);

impl OperatorWord {
    pub fn new(ops: Vec<Ladder>) -> Result<Self> {
        if let Some(pos) = ops.windows(2).position(|w| !w[0].dagger && w[1].dagger) {
            let word = OperatorWord(ops.clone()).to_string();
            return Err(Error::NotNormalOrdered(format!(
                "'{word}' has a creation operator after an annihilation operator at position {}",
                pos + 1
            )));
        }
        Ok(Self(ops))
    }

    pub fn ops(&self) -> &[Ladder] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hermitian adjoint: reversed order with every operator daggered.
    /// The adjoint of a normal-ordered word is again normal-ordered.
    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().rev().map(|op| op.adjoint()).collect())
    }

    /// Number of creation operators acting on `mode`.
    pub fn raising_count(&self, mode: Mode) -> usize {
        self.0
            .iter()
            .filter(|op| op.dagger && op.mode == mode)
            .count()
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<&str> = self.0.iter().map(|op| op.token()).collect();
        f.write_str(&tokens.join(" "))
    }
}

impl FromStr for OperatorWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .split_whitespace()
            .map(|tok| match tok {
                "a" => Ok(Ladder::A),
                "b" => Ok(Ladder::B),
                "ad" => Ok(Ladder::AD),
                "bd" => Ok(Ladder::BD),
                other => Err(Error::ParseWord(format!(
                    "unknown token '{other}' (expected one of: ad bd a b)"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorWord::new(ops)
    }
}

/// The ordered second moments of two modes.
///
/// Six independent entries are stored; the conjugate entries
/// (`<b†a>`, `<a†b†>`, `<a†a†>`, `<b†b†>`) are derived, so the table is
/// Hermitian by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoments {
    /// `<a†a>`
    pub n_a: f64,
    /// `<b†b>`
    pub n_b: f64,
    /// `<ab>`
    pub m_ab: Complex64,
    /// `<a†b>`
    pub cross: Complex64,
    /// `<aa>`
    pub s_a: Complex64,
    /// `<bb>`
    pub s_b: Complex64,
}

impl SecondMoments {
    pub fn zero() -> Self {
        Self {
            n_a: 0.0,
            n_b: 0.0,
            m_ab: Complex64::new(0.0, 0.0),
            cross: Complex64::new(0.0, 0.0),
            s_a: Complex64::new(0.0, 0.0),
            s_b: Complex64::new(0.0, 0.0),
        }
    }

    /// `<a†b†>`
    pub fn m_ab_conj(&self) -> Complex64 {
        self.m_ab.conj()
    }

    /// Contraction `<x y>` for `x` standing left of `y` in a normal-ordered
    /// word. Returns `None` for the anti-normal case (`x` annihilator, `y`
    /// creator), which normal-ordered input never produces.
    pub fn pair(&self, left: Ladder, right: Ladder) -> Option<Complex64> {
        use Mode::{A, B};
        let value = match (left.dagger, right.dagger) {
            // <x† y†> = conj(<y x>)
            (true, true) => match (left.mode, right.mode) {
                (A, A) => self.s_a.conj(),
                (B, B) => self.s_b.conj(),
                _ => self.m_ab.conj(),
            },
            (true, false) => match (left.mode, right.mode) {
                (A, A) => Complex64::new(self.n_a, 0.0),
                (B, B) => Complex64::new(self.n_b, 0.0),
                (A, B) => self.cross,
                (B, A) => self.cross.conj(),
            },
            (false, false) => match (left.mode, right.mode) {
                (A, A) => self.s_a,
                (B, B) => self.s_b,
                _ => self.m_ab,
            },
            (false, true) => return None,
        };
        Some(value)
    }
}

/// Second moments of the mixed EPR state: `n_a = n_b = nbar`,
/// `<ab> = -mc`, everything else zero.
pub fn covariance_table(params: &EprParams) -> Result<SecondMoments> {
    params.ensure_physical()?;
    Ok(SecondMoments {
        n_a: params.nbar(),
        n_b: params.nbar(),
        m_ab: -params.mc(),
        ..SecondMoments::zero()
    })
}

/// Sum over all perfect matchings of the word positions of the product of
/// pair contractions.
pub fn normally_ordered_moment(table: &SecondMoments, word: &OperatorWord) -> Result<Complex64> {
    let ops = word.ops();
    if ops.len() > MAX_WORD_LEN {
        return Err(Error::WordTooLong {
            len: ops.len(),
            max: MAX_WORD_LEN,
        });
    }
    if ops.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut used = vec![false; ops.len()];
    Ok(sum_matchings(table, ops, &mut used))
}

fn sum_matchings(table: &SecondMoments, ops: &[Ladder], used: &mut [bool]) -> Complex64 {
    let Some(first) = used.iter().position(|u| !u) else {
        return Complex64::new(1.0, 0.0);
    };
    used[first] = true;
    let mut total = Complex64::new(0.0, 0.0);
    for j in first + 1..ops.len() {
        if used[j] {
            continue;
        }
        let c = table
            .pair(ops[first], ops[j])
            .expect("normal-ordered word yields only normal-ordered pairs");
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        used[j] = true;
        total += c * sum_matchings(table, ops, used);
        used[j] = false;
    }
    used[first] = false;
    total
}

/// Parses and evaluates a word in one step; panics only on a malformed
/// literal, so it is meant for fixed words inside this crate.
pub(crate) fn moment_of(table: &SecondMoments, word: &str) -> Complex64 {
    let word: OperatorWord = word.parse().expect("valid built-in word");
    normally_ordered_moment(table, &word).expect("built-in word within length cap")
}

/// The three fourth-order moments entering the HBT and HOM signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthOrder {
    /// `<a†a†aa>`
    pub aa: f64,
    /// `<b†b†bb>`
    pub bb: f64,
    /// `<a†a b†b> = <a†b†ab>`
    pub ab: f64,
}

/// `(<a†a†aa>, <b†b†bb>, <a†a b†b>)` evaluated through the Wick engine.
pub fn fourth_order_set(params: &EprParams) -> Result<FourthOrder> {
    let table = covariance_table(params)?;
    Ok(FourthOrder {
        aa: moment_of(&table, "ad ad a a").re,
        bb: moment_of(&table, "bd bd b b").re,
        ab: moment_of(&table, "ad bd a b").re,
    })
}
