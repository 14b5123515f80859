//! Charts, vector fields, affine connections, and second tangent bundle
//! operations.
//!
//! Everything lives on a single chart domain: points are coordinate vectors,
//! vector fields and Christoffel symbols are closed-form expressions in the
//! coordinates. The symbolic operations here (covariant derivative, torsion,
//! Lie bracket, symmetric product) are the reference values that the flow
//! based estimators in [`crate::symprod`] are compared against.

mod chart;
mod connection;
mod field;
mod lifted;
mod metric;
mod ttm;

pub use chart::{Bounds, ChartDomain};
pub(crate) use connection::contract;
pub use connection::Connection;
pub use field::VectorField;
pub use lifted::{
    complete_lift_field, geodesic_spray_field, horizontal_lift_field, tangent_domain,
    vertical_lift_field,
};
pub use metric::{christoffel_from_metric, MetricField};
pub use ttm::{
    add_primary, add_secondary, complete_lift_at, geodesic_spray_at, hlft, involution,
    scale_primary, scale_secondary, sub_primary, sub_secondary, tangent_map_at, vlft,
    TangentPoint, TtmPoint, ANCHOR_TOL,
};

use thiserror::Error;

use crate::expr::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {point:?} lies outside the chart bounds")]
    OutOfDomain { point: Vec<f64> },
    #[error("{slot} anchors differ by {deviation:.3e} (tolerance {ANCHOR_TOL:.0e})")]
    AnchorMismatch { slot: &'static str, deviation: f64 },
    #[error("metric is singular or not positive definite at {point:?}")]
    DegenerateMetric { point: Vec<f64> },
    #[error("metric entries ({i},{j}) and ({j},{i}) differ at {point:?}")]
    AsymmetricMetric { i: usize, j: usize, point: Vec<f64> },
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("component '{src}': {err}")]
    Parse {
        src: String,
        err: crate::expr::ParseError,
    },
}
