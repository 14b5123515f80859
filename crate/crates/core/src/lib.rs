//! Numerical laboratory for affine connections on chart domains.
//!
//! The crate models a single coordinate chart of a smooth manifold and an
//! affine connection on it, given by closed-form Christoffel symbols. On top
//! of that it provides three independent routes to second-order data attached
//! to the connection:
//!
//! * symbolic: covariant derivatives, torsion, Lie brackets and symmetric
//!   products computed by exact expression algebra ([`geometry`]);
//! * dynamical: flows of lifted vector fields on the tangent bundle, parallel
//!   transport, geodesics, and second-difference estimators extracted from
//!   composite flow curves ([`flows`], [`symprod`], [`bch`]);
//! * variational: rank/membership tests that decide whether distributions are
//!   closed under symmetric products and preserved by geodesics
//!   ([`invariance`]).
//!
//! All three routes are exercised against each other by [`verify`], which is
//! also what the CLI front end drives.

pub mod bch;
pub mod catalog;
pub mod expr;
pub mod flows;
pub mod geometry;
pub mod invariance;
pub mod sample;
pub mod symprod;
pub mod verify;

pub use expr::{CompiledExpr, EvalError, Func, ParseError, ScalarExpr};
pub use flows::{FlowError, IntegratorConfig};
pub use geometry::{
    Bounds, ChartDomain, Connection, GeometryError, MetricField, TangentPoint, TtmPoint,
    VectorField,
};
pub use invariance::{Classification, Distribution, InvarianceError, InvarianceVerdict};
pub use symprod::{EstimatorReport, UpsilonKind};
pub use verify::{CheckResult, SuiteReport, VerifyError};
