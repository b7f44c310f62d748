//! Numerical toolkit for boundary Hölder estimates of convex solutions to
//! fully nonlinear elliptic Dirichlet problems F(λ(D²u)) = f(x, u, Du).
//!
//! The crate builds the barrier function W(r, xₙ) = −((xₙ/ξ)^(2/a) − r²)^(1/b),
//! evaluates the structural exponent μ(a) and the constant tables that control
//! sub/supersolution constructions, classifies convex-domain boundary points by
//! their (a, η) / (a, η, ε) convexity type, and certifies H̃[W] ≥ 1 (≤ 1) by
//! grid scans. A small wide-stencil Monge-Ampère solver produces reference
//! solution fields so the predicted boundary exponents can be fitted from data.

pub mod barrier;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod masolver;
pub mod operators;
pub mod params;
pub mod smalleig;
pub mod verifier;

pub use barrier::{BarrierEval, BarrierParams, EigenSet, MagnitudeRegion};
pub use constants::{ConstantSet, Regime};
pub use error::{Error, Result};
pub use geometry::{BoundaryTypeCert, CertKind, ConvexDomain, Frame, HalfRegion, Region};
pub use masolver::{BoundaryData, GridField, NodeKind, SolveConfig};
pub use operators::{
    BoundaryEnvelope, EllipticOperator, EnvelopeKind, PowerOperator, RhsBound, RhsKind,
    SigmaKOperator,
};
pub use params::{BInterval, ExponentResult, MuBranch, Side, StructureParams};
pub use verifier::{SandwichFit, VerificationReport};
