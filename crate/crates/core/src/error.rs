//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building or verifying barriers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("denominator vanishes in {0}")]
    DegenerateDenominator(&'static str),
    #[error("admissible b-interval is empty: lower {lo} exceeds upper {hi}")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("point outside barrier support: (x_n/xi)^(2/a) - r^2 = {0} <= 0")]
    OutsideSupport(f64),
    #[error("x_n must be positive, got {0}")]
    NonPositiveXn(f64),
    #[error("eigenvalue lemma hypothesis violated: {0}")]
    LemmaHypothesisViolated(&'static str),
    #[error("negative eigenvalue {lambda} raised to non-integer power {exponent}")]
    NegativeEigenvalue { lambda: f64, exponent: f64 },
    #[error("sigma_k index k={k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("z coincides with the boundary envelope value (zero denominator)")]
    ZeroDenominator,
    #[error("boundary point with dist = 0 and beta < n+1")]
    BoundaryPoint,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("domain is not convex: {0}")]
    NonConvexDomain(String),
    #[error("parameter regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("constant {symbol} is non-positive ({value}) after delta auto-shrink")]
    NonPositiveConstant { symbol: &'static str, value: f64 },
    #[error("sampling region is empty or degenerate")]
    EmptyRegion,
    #[error("point is not on the domain boundary (distance {0})")]
    NotOnBoundary(f64),
    #[error("no valid certificate: {0}")]
    NoCertificate(String),
    #[error("convexity parameter a={a} outside the admissible range for this condition")]
    RangeMismatch { a: f64 },
    #[error("point lies outside region V")]
    OutsideV,
    #[error("chord restriction of u is not unimodal within tolerance")]
    NonConvexSamples,
    #[error("exponent ordering violated: need 0 < nu <= mu <= 1 and M >= m > 0")]
    ParamOrderViolated,
    #[error("sign condition on b violated: {0}")]
    SignConditionViolated(String),
    #[error("xi search exhausted after {0} steps")]
    SearchExhausted(usize),
    #[error("max of u on the lid L is {0} >= 0; supersolution construction needs u < 0 on L")]
    LidNotNegative(f64),
    #[error("solver failed to converge: residual {residual} after {iters} iterations")]
    NonConvergence { residual: f64, iters: usize },
    #[error("right-hand side unbounded at a node; increase the regularization floor")]
    SingularRhs,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
