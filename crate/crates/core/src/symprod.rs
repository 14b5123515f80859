//! Flow-composition estimators for Lie brackets and symmetric products.
//!
//! Six eight-leg curves t ↦ Υ(t) in the tangent bundle all satisfy Υ(0) = v,
//! Υ′(0) = 0, and ½Υ″(0) = vlft(v, ⟨X₁:X₂⟩(x)). The estimators here evaluate
//! the curves at ±t, form the symmetric second difference
//! ½(Υ(t) + Υ(−t) − 2v)/t², optionally Richardson-extrapolate it, and compare
//! the fiber part against the symbolic symmetric product. The base part of
//! the second difference ("base drift") must tend to zero and is reported as
//! a sanity channel.
//!
//! The same machinery covers the classical commutator-of-flows estimator for
//! the Lie bracket and the mixed horizontal/vertical word whose bracket is a
//! vertically lifted covariant derivative.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bch::{commutator_word, flow_word_steps};
use crate::flows::{
    flow_with_steps, horizontal_flow, max_abs, max_abs_diff, transport_along_field,
    transport_along_geodesic, vertical_flow, FlowError, IntegratorConfig,
};
use crate::geometry::{Connection, TangentPoint, VectorField};

/// The six curve families. `U1`/`U2` conjugate vertical flows with horizontal
/// flows (of the connection resp. its zero-torsion companion); `U3`/`U4`
/// replace the horizontal conjugation by parallel transport along the integral
/// curves of the two fields; `U3Z`/`U4Z` transport along geodesics whose
/// initial velocities are the field values at the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsilonKind {
    U1,
    U2,
    U3,
    U4,
    U3Z,
    U4Z,
}

impl UpsilonKind {
    pub const ALL: [UpsilonKind; 6] = [
        UpsilonKind::U1,
        UpsilonKind::U2,
        UpsilonKind::U3,
        UpsilonKind::U4,
        UpsilonKind::U3Z,
        UpsilonKind::U4Z,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UpsilonKind::U1 => "u1",
            UpsilonKind::U2 => "u2",
            UpsilonKind::U3 => "u3",
            UpsilonKind::U4 => "u4",
            UpsilonKind::U3Z => "u3z",
            UpsilonKind::U4Z => "u4z",
        }
    }

    /// Whether the conjugating transport uses the zero-torsion companion.
    pub fn uses_torsion_free_transport(&self) -> bool {
        matches!(
            self,
            UpsilonKind::U2 | UpsilonKind::U4 | UpsilonKind::U4Z
        )
    }
}

impl fmt::Display for UpsilonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpsilonKind {
    type Err = String;

    fn from_str(s: &str) -> Result<UpsilonKind, String> {
        match s.to_ascii_lowercase().as_str() {
            "u1" => Ok(UpsilonKind::U1),
            "u2" => Ok(UpsilonKind::U2),
            "u3" => Ok(UpsilonKind::U3),
            "u4" => Ok(UpsilonKind::U4),
            "u3z" => Ok(UpsilonKind::U3Z),
            "u4z" => Ok(UpsilonKind::U4Z),
            other => Err(format!(
                "unknown curve kind '{other}' (expected one of u1, u2, u3, u4, u3z, u4z)"
            )),
        }
    }
}

/// Evaluates the eight-leg curve `Υ(t)` of the given kind starting at `v`.
///
/// Legs run over durations ±t with the estimator step rule, so the integrator
/// bias shrinks much faster than the t² scale the curves are probed on.
pub fn upsilon(
    kind: UpsilonKind,
    c: &Connection,
    x1: &VectorField,
    x2: &VectorField,
    v: &TangentPoint,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TangentPoint, FlowError> {
    let cbar = c.torsion_free_part();
    upsilon_impl(kind, c, &cbar, x1, x2, v, t, cfg.estimator_substeps(t))
}

/// One conjugation `leg(−t) ∘ vertical(−t) ∘ leg(t) ∘ vertical(t)` where the
/// outer legs transport the fiber out along a curve and back.
#[allow(clippy::too_many_arguments)]
fn upsilon_impl(
    kind: UpsilonKind,
    c: &Connection,
    cbar: &Connection,
    x1: &VectorField,
    x2: &VectorField,
    v: &TangentPoint,
    t: f64,
    steps: usize,
) -> Result<TangentPoint, FlowError> {
    let transport = if kind.uses_torsion_free_transport() {
        cbar
    } else {
        c
    };
    let mut w = v.clone();
    // first conjugation moves along the X₂ direction and pumps X₁ vertically,
    // the second swaps the roles
    for (curve_field, pumped) in [(x2, x1), (x1, x2)] {
        let anchor = w.base.clone();
        match kind {
            UpsilonKind::U1 | UpsilonKind::U2 => {
                w = horizontal_flow(transport, curve_field, &w, t, steps)?;
                w = vertical_flow(pumped, &w, t)?;
                w = horizontal_flow(transport, curve_field, &w, -t, steps)?;
                w = vertical_flow(pumped, &w, -t)?;
            }
            UpsilonKind::U3 | UpsilonKind::U4 => {
                let out =
                    transport_along_field(transport, curve_field, &anchor, &w.fiber, 0.0, t, steps)?;
                w = TangentPoint::new(out.base, out.vector)?;
                w = vertical_flow(pumped, &w, t)?;
                let back =
                    transport_along_field(transport, curve_field, &anchor, &w.fiber, t, 0.0, steps)?;
                w = TangentPoint::new(back.base, back.vector)?;
                w = vertical_flow(pumped, &w, -t)?;
            }
            UpsilonKind::U3Z | UpsilonKind::U4Z => {
                let ic = curve_field.value_at(&anchor)?;
                let out =
                    transport_along_geodesic(c, transport, &anchor, &ic, &w.fiber, 0.0, t, steps)?;
                w = TangentPoint::new(out.base, out.vector)?;
                w = vertical_flow(pumped, &w, t)?;
                let back =
                    transport_along_geodesic(c, transport, &anchor, &ic, &w.fiber, t, 0.0, steps)?;
                w = TangentPoint::new(back.base, back.vector)?;
                w = vertical_flow(pumped, &w, -t)?;
            }
        }
    }
    Ok(w)
}

/// A second-difference (optionally Richardson-extrapolated) estimate next to
/// its symbolic reference.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    /// Probe step t the curve was evaluated at.
    pub step: f64,
    /// Whether the estimate combines steps t and t/2.
    pub richardson: bool,
    /// Fiber part of the second difference: the quantity the theory pins down.
    pub estimate: Vec<f64>,
    /// Base part of the second difference; must tend to zero. Empty when the
    /// probed curve lives on the base manifold and has no fiber/base split.
    pub base_drift: Vec<f64>,
    /// Symbolic value the estimate is compared against.
    pub reference: Vec<f64>,
    /// `‖estimate − reference‖∞`.
    pub abs_error: f64,
    /// `abs_error / max(1, ‖reference‖∞)`.
    pub rel_error: f64,
}

impl EstimatorReport {
    fn from_parts(
        step: f64,
        richardson: bool,
        estimate: Vec<f64>,
        base_drift: Vec<f64>,
        reference: Vec<f64>,
    ) -> EstimatorReport {
        let abs_error = max_abs_diff(&estimate, &reference);
        let rel_error = abs_error / max_abs(&reference).max(1.0);
        EstimatorReport {
            step,
            richardson,
            estimate,
            base_drift,
            reference,
            abs_error,
            rel_error,
        }
    }
}

/// `½(plus + minus − 2·center)/t²` per coordinate.
fn second_difference(plus: &[f64], minus: &[f64], center: &[f64], t: f64) -> Vec<f64> {
    plus.iter()
        .zip(minus)
        .zip(center)
        .map(|((p, m), c)| 0.5 * (p + m - 2.0 * c) / (t * t))
        .collect()
}

fn richardson_combine(coarse: &[f64], fine: &[f64]) -> Vec<f64> {
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}

/// Estimates `⟨X₁:X₂⟩(x)` from the curve of the given kind and compares it to
/// the symbolic symmetric product.
#[allow(clippy::too_many_arguments)]
pub fn second_derivative_estimate(
    kind: UpsilonKind,
    c: &Connection,
    x1: &VectorField,
    x2: &VectorField,
    v: &TangentPoint,
    t: f64,
    richardson: bool,
    cfg: &IntegratorConfig,
) -> Result<EstimatorReport, FlowError> {
    let n = c.dim();
    let reference = c.symmetric_product(x1, x2)?.value_at(&v.base)?;
    let cbar = c.torsion_free_part();
    let center = v.flat();
    let diff_at = |tt: f64| -> Result<Vec<f64>, FlowError> {
        let steps = cfg.estimator_substeps(tt);
        let plus = upsilon_impl(kind, c, &cbar, x1, x2, v, tt, steps)?.flat();
        let minus = upsilon_impl(kind, c, &cbar, x1, x2, v, -tt, steps)?.flat();
        Ok(second_difference(&plus, &minus, &center, tt))
    };
    let combined = if richardson {
        let coarse = diff_at(t)?;
        let fine = diff_at(0.5 * t)?;
        richardson_combine(&coarse, &fine)
    } else {
        diff_at(t)?
    };
    Ok(EstimatorReport::from_parts(
        t,
        richardson,
        combined[n..].to_vec(),
        combined[..n].to_vec(),
        reference,
    ))
}

/// `‖(Υ(t) − Υ(−t)) / 2t‖∞`: a direct measurement of the curve's slope at 0,
/// which the theory asserts vanishes.
#[allow(clippy::too_many_arguments)]
pub fn first_difference_norm(
    kind: UpsilonKind,
    c: &Connection,
    x1: &VectorField,
    x2: &VectorField,
    v: &TangentPoint,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError> {
    let cbar = c.torsion_free_part();
    let steps = cfg.estimator_substeps(t);
    let plus = upsilon_impl(kind, c, &cbar, x1, x2, v, t, steps)?.flat();
    let minus = upsilon_impl(kind, c, &cbar, x1, x2, v, -t, steps)?.flat();
    let slope = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * t))
        .fold(0.0f64, |acc, s| acc.max(s.abs()));
    Ok(slope)
}

/// The closed form of the fiber-started curve at `v_x = 0`:
/// `t·(τ_{η₂}^{(0,t)}X₁(η₂(t)) − X₁(x) + τ_{η₁}^{(0,t)}X₂(η₁(t)) − X₂(x))`,
/// a curve in T_xM whose base never moves.
pub fn corollary_closed_form(
    c: &Connection,
    x1: &VectorField,
    x2: &VectorField,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TangentPoint, FlowError> {
    let steps = cfg.estimator_substeps(t);
    let pulled = |curve_field: &VectorField, value_field: &VectorField| -> Result<Vec<f64>, FlowError> {
        let endpoint = flow_with_steps(curve_field, x, t, steps)?;
        let far_value = value_field.value_at(&endpoint)?;
        let back = transport_along_field(c, curve_field, x, &far_value, t, 0.0, steps)?;
        Ok(back.vector)
    };
    let along_eta2 = pulled(x2, x1)?;
    let along_eta1 = pulled(x1, x2)?;
    let x1_here = x1.value_at(x)?;
    let x2_here = x2.value_at(x)?;
    let fiber = (0..c.dim())
        .map(|k| t * (along_eta2[k] - x1_here[k] + along_eta1[k] - x2_here[k]))
        .collect();
    Ok(TangentPoint::new(x.to_vec(), fiber)?)
}

/// Second-difference estimate of `[X, Y](x)` from the commutator word
/// `Φ^Y_{−t} Φ^X_{−t} Φ^Y_t Φ^X_t`, with the symbolic bracket as reference.
pub fn lie_bracket_flow_estimate(
    x_field: &VectorField,
    y_field: &VectorField,
    x0: &[f64],
    t: f64,
    richardson: bool,
    cfg: &IntegratorConfig,
) -> Result<EstimatorReport, FlowError> {
    let reference = x_field.lie_bracket(y_field)?.value_at(x0)?;
    let diff_at = |tt: f64| -> Result<Vec<f64>, FlowError> {
        let steps = cfg.estimator_substeps(tt);
        let plus = flow_word_steps(&commutator_word(x_field, y_field, tt), x0, steps)?;
        let minus = flow_word_steps(&commutator_word(x_field, y_field, -tt), x0, steps)?;
        Ok(second_difference(&plus, &minus, x0, tt))
    };
    let estimate = if richardson {
        let coarse = diff_at(t)?;
        let fine = diff_at(0.5 * t)?;
        richardson_combine(&coarse, &fine)
    } else {
        diff_at(t)?
    };
    Ok(EstimatorReport::from_parts(
        t,
        richardson,
        estimate,
        Vec::new(),
        reference,
    ))
}

/// The four-leg word `Φ^{Xᴴ}_{−t} Φ^{Yⱽ}_{−t} Φ^{Xᴴ}_t Φ^{Yⱽ}_t` applied to
/// `v`: vertical pump first, then horizontal conjugation.
pub fn crampin_word(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    v: &TangentPoint,
    t: f64,
    steps: usize,
) -> Result<TangentPoint, FlowError> {
    let mut w = vertical_flow(y_field, v, t)?;
    w = horizontal_flow(c, x_field, &w, t, steps)?;
    w = vertical_flow(y_field, &w, -t)?;
    w = horizontal_flow(c, x_field, &w, -t, steps)?;
    Ok(w)
}

/// Closed form of the same word: `v − t(τ_η^{(0,t)} Y(η(t)) − Y(x))` along
/// the integral curve η of `X` through the base of `v`.
pub fn crampin_word_closed_form(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    v: &TangentPoint,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TangentPoint, FlowError> {
    let steps = cfg.estimator_substeps(t);
    let endpoint = flow_with_steps(x_field, &v.base, t, steps)?;
    let far_value = y_field.value_at(&endpoint)?;
    let pulled = transport_along_field(c, x_field, &v.base, &far_value, t, 0.0, steps)?;
    let y_here = y_field.value_at(&v.base)?;
    let fiber = v
        .fiber
        .iter()
        .zip(&pulled.vector)
        .zip(&y_here)
        .map(|((vf, p), y)| vf - t * (p - y))
        .collect();
    Ok(TangentPoint::new(v.base.clone(), fiber)?)
}

/// Estimates `∇_X Y(x)` as `−½` times the second difference of the mixed
/// horizontal/vertical word (the word realizes the bracket with the vertical
/// leg acting first, which flips the sign of the commutator).
pub fn crampin_check(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    v: &TangentPoint,
    t: f64,
    richardson: bool,
    cfg: &IntegratorConfig,
) -> Result<EstimatorReport, FlowError> {
    let n = c.dim();
    let direction = TangentPoint::new(v.base.clone(), x_field.value_at(&v.base)?)?;
    let reference = c.covariant_derivative_at(&direction, y_field)?;
    let center = v.flat();
    let diff_at = |tt: f64| -> Result<Vec<f64>, FlowError> {
        let steps = cfg.estimator_substeps(tt);
        let plus = crampin_word(c, x_field, y_field, v, tt, steps)?.flat();
        let minus = crampin_word(c, x_field, y_field, v, -tt, steps)?.flat();
        let mut d = second_difference(&plus, &minus, &center, tt);
        for entry in &mut d {
            *entry = -*entry;
        }
        Ok(d)
    };
    let combined = if richardson {
        let coarse = diff_at(t)?;
        let fine = diff_at(0.5 * t)?;
        richardson_combine(&coarse, &fine)
    } else {
        diff_at(t)?
    };
    Ok(EstimatorReport::from_parts(
        t,
        richardson,
        combined[n..].to_vec(),
        combined[..n].to_vec(),
        reference,
    ))
}
