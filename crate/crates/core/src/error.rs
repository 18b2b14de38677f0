use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "unphysical state: |mc| = {mc_abs} exceeds sqrt(nbar(nbar+1)) = {bound} for nbar = {nbar}"
    )]
    Unphysical { nbar: f64, mc_abs: f64, bound: f64 },

    /// nbar = mc = 0: the visibility is 0/0.
    #[error("degenerate state (nbar = mc = 0): visibility is undefined")]
    DegenerateState,

    #[error("operator word is not normal-ordered: {0}")]
    NotNormalOrdered(String),

    #[error("operator word has length {len}, above the supported maximum of {max}")]
    WordTooLong { len: usize, max: usize },

    #[error("cannot parse operator word: {0}")]
    ParseWord(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Two independent evaluation routes disagreed.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}
