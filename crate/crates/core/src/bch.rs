//! Concatenated flows and their truncated Baker–Campbell–Hausdorff shadow.
//!
//! A word is a sequence of (time, field) pairs flowed one after the other,
//! first entry first. To second order the endpoint agrees with flowing, for
//! unit time, the single field
//!
//!   BCH₁ + BCH₂ = Σᵢ tᵢXᵢ + ½ Σ_{a<b} tₐt_b [Xₐ, X_b],
//!
//! with a residual of order (Σ|tᵢ|)³. [`asymptotic_check`] measures that
//! residual so the cubic decay itself can be verified by halving the times.

use crate::flows::{flow, max_abs_diff, FlowError, IntegratorConfig};
use crate::geometry::{GeometryError, VectorField};

/// A term `coefficient · field` of a Lie-algebra word.
#[derive(Clone)]
pub struct WeightedField<'a> {
    pub coefficient: f64,
    pub field: &'a VectorField,
}

impl<'a> WeightedField<'a> {
    pub fn new(coefficient: f64, field: &'a VectorField) -> WeightedField<'a> {
        WeightedField { coefficient, field }
    }
}

/// First-order term: the plain sum `Σᵢ cᵢ Xᵢ`.
pub fn bch1(word: &[WeightedField]) -> Result<VectorField, GeometryError> {
    assert!(!word.is_empty(), "empty word");
    let fields: Vec<VectorField> = word.iter().map(|w| w.field.clone()).collect();
    let coeffs: Vec<f64> = word.iter().map(|w| w.coefficient).collect();
    VectorField::linear_combination(&fields, &coeffs)
}

/// Second-order term: `½ Σ_{a<b} cₐ c_b [Xₐ, X_b]`, built symbolically.
pub fn bch2(word: &[WeightedField]) -> Result<VectorField, GeometryError> {
    assert!(!word.is_empty(), "empty word");
    let mut acc = VectorField::zero(word[0].field.domain().clone());
    for a in 0..word.len() {
        for b in (a + 1)..word.len() {
            let bracket = word[a].field.lie_bracket(word[b].field)?;
            let c = 0.5 * word[a].coefficient * word[b].coefficient;
            if c != 0.0 {
                acc = acc.add(&bracket.scale(c))?;
            }
        }
    }
    Ok(acc)
}

/// Flows the word left to right: the first entry acts first.
pub fn flow_word(
    word: &[(f64, &VectorField)],
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, FlowError> {
    let mut x = x0.to_vec();
    for (t, field) in word {
        x = flow(field, &x, *t, cfg)?;
    }
    Ok(x)
}

/// Like [`flow_word`] but with the per-leg step count fixed by the caller,
/// for estimator legs whose durations shrink with the probe step.
pub fn flow_word_steps(
    word: &[(f64, &VectorField)],
    x0: &[f64],
    steps: usize,
) -> Result<Vec<f64>, FlowError> {
    let mut x = x0.to_vec();
    for (t, field) in word {
        x = crate::flows::flow_with_steps(field, &x, *t, steps)?;
    }
    Ok(x)
}

/// Endpoints and residual of a word versus its second-order BCH truncation.
#[derive(Debug, Clone)]
pub struct BchReport {
    pub word_endpoint: Vec<f64>,
    pub truncated_endpoint: Vec<f64>,
    /// `‖word − truncation‖∞`; decays like the cube of the word's times.
    pub residual: f64,
}

/// Flows the word sequentially, then flows `BCH₁ + BCH₂` of the same word for
/// unit time, and reports how far apart the two endpoints are.
pub fn asymptotic_check(
    word: &[(f64, &VectorField)],
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<BchReport, FlowError> {
    let weighted: Vec<WeightedField> = word
        .iter()
        .map(|(t, f)| WeightedField::new(*t, f))
        .collect();
    let first = bch1(&weighted)?;
    let second = bch2(&weighted)?;
    let truncated_field = first.add(&second)?;

    let word_endpoint = flow_word(word, x0, cfg)?;
    let truncated_endpoint = flow(&truncated_field, x0, 1.0, cfg)?;
    let residual = max_abs_diff(&word_endpoint, &truncated_endpoint);
    Ok(BchReport {
        word_endpoint,
        truncated_endpoint,
        residual,
    })
}

/// The commutator word `Φ^Y_{−t} Φ^X_{−t} Φ^Y_{t} Φ^X_{t}`, `X` acting first.
pub fn commutator_word<'a>(
    x_field: &'a VectorField,
    y_field: &'a VectorField,
    t: f64,
) -> [(f64, &'a VectorField); 4] {
    [
        (t, x_field),
        (t, y_field),
        (-t, x_field),
        (-t, y_field),
    ]
}
