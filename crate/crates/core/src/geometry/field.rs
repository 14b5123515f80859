use std::sync::OnceLock;

use super::{ChartDomain, GeometryError};
use crate::expr::{CompiledExpr, EvalError, ScalarExpr};

/// A vector field with closed-form components on a chart domain.
///
/// Components are compiled once at construction; the Jacobian is derived
/// symbolically and compiled on first use. Fields are immutable.
#[derive(Debug, Clone)]
pub struct VectorField {
    domain: ChartDomain,
    components: Vec<ScalarExpr>,
    compiled: Vec<CompiledExpr>,
    jacobian: OnceLock<Vec<CompiledExpr>>,
}

impl VectorField {
    pub fn new(domain: ChartDomain, components: Vec<ScalarExpr>) -> Result<VectorField, GeometryError> {
        if components.len() != domain.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: domain.dim(),
                got: components.len(),
            });
        }
        for c in &components {
            if c.dim() != domain.dim() {
                return Err(GeometryError::DimensionMismatch {
                    expected: domain.dim(),
                    got: c.dim(),
                });
            }
        }
        let compiled = components.iter().map(ScalarExpr::compile).collect();
        Ok(VectorField {
            domain,
            components,
            compiled,
            jacobian: OnceLock::new(),
        })
    }

    /// Parses one component string per coordinate.
    pub fn from_strs(domain: ChartDomain, components: &[&str]) -> Result<VectorField, GeometryError> {
        let dim = domain.dim();
        let comps = components
            .iter()
            .map(|s| {
                ScalarExpr::parse(s, dim).map_err(|err| GeometryError::Parse {
                    src: (*s).to_owned(),
                    err,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(domain, comps)
    }

    pub fn zero(domain: ChartDomain) -> VectorField {
        let dim = domain.dim();
        let comps = (0..dim).map(|_| ScalarExpr::zero(dim)).collect();
        VectorField::new(domain, comps).expect("zero field is well formed")
    }

    pub fn constant(domain: ChartDomain, values: &[f64]) -> Result<VectorField, GeometryError> {
        let dim = domain.dim();
        if values.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: values.len(),
            });
        }
        let comps = values.iter().map(|&v| ScalarExpr::constant(v, dim)).collect();
        VectorField::new(domain, comps)
    }

    /// The coordinate field `∂/∂x{index+1}`.
    pub fn coordinate(domain: ChartDomain, index: usize) -> VectorField {
        let dim = domain.dim();
        assert!(index < dim);
        let comps = (0..dim)
            .map(|k| ScalarExpr::constant(if k == index { 1.0 } else { 0.0 }, dim))
            .collect();
        VectorField::new(domain, comps).expect("coordinate field is well formed")
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn component(&self, i: usize) -> &ScalarExpr {
        &self.components[i]
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    /// Evaluates the field at `x`, enforcing the chart bounds.
    pub fn value_at(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.domain.check_point(x)?;
        let mut out = vec![0.0; self.dim()];
        let mut stack = Vec::new();
        self.value_into(x, &mut out, &mut stack)?;
        Ok(out)
    }

    /// Fast-path evaluation without a bounds check; integrators enforce
    /// bounds per accepted step instead of per stage evaluation.
    pub fn value_into(
        &self,
        x: &[f64],
        out: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        debug_assert_eq!(out.len(), self.dim());
        for (o, c) in out.iter_mut().zip(&self.compiled) {
            *o = c.eval_with(x, stack)?;
        }
        Ok(())
    }

    fn jacobian_compiled(&self) -> &[CompiledExpr] {
        self.jacobian.get_or_init(|| {
            let n = self.dim();
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push(self.components[i].differentiate(j).compile());
                }
            }
            out
        })
    }

    /// Symbolic partial `∂X^i/∂x_j`.
    pub fn jacobian_entry(&self, i: usize, j: usize) -> ScalarExpr {
        self.components[i].differentiate(j)
    }

    /// Row-major Jacobian matrix `J[i][j] = ∂X^i/∂x_j` evaluated at `x`.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.domain.check_point(x)?;
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        let mut stack = Vec::new();
        for (o, c) in out.iter_mut().zip(self.jacobian_compiled()) {
            *o = c.eval_with(x, &mut stack)?;
        }
        Ok(out)
    }

    /// `J(x)·v` without allocating the full matrix.
    pub fn jacobian_apply_into(
        &self,
        x: &[f64],
        v: &[f64],
        out: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        let jac = self.jacobian_compiled();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let entry = jac[i * n + j].eval_with(x, stack)?;
                acc += entry * v[j];
            }
            out[i] = acc;
        }
        Ok(())
    }

    /// The Lie bracket `[X, Y]^k = Σ_i X^i ∂_i Y^k − Y^i ∂_i X^k`, built
    /// symbolically.
    pub fn lie_bracket(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        self.check_same_chart(other)?;
        let n = self.dim();
        let mut comps = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = ScalarExpr::zero(n);
            for i in 0..n {
                let first = self.components[i].mul(&other.components[k].differentiate(i));
                let second = other.components[i].mul(&self.components[k].differentiate(i));
                acc = acc.add(&first.sub(&second));
            }
            comps.push(acc);
        }
        VectorField::new(self.domain.clone(), comps)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeometryError> {
        self.check_same_chart(other)?;
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect();
        VectorField::new(self.domain.clone(), comps)
    }

    pub fn scale(&self, k: f64) -> VectorField {
        let comps = self.components.iter().map(|c| c.scale(k)).collect();
        VectorField::new(self.domain.clone(), comps).expect("scaling preserves shape")
    }

    /// `Σ coeffs[i] · fields[i]` with constant coefficients.
    pub fn linear_combination(
        fields: &[VectorField],
        coeffs: &[f64],
    ) -> Result<VectorField, GeometryError> {
        assert!(!fields.is_empty(), "need at least one field");
        if fields.len() != coeffs.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: fields.len(),
                got: coeffs.len(),
            });
        }
        let mut acc = fields[0].scale(coeffs[0]);
        for (f, &c) in fields.iter().zip(coeffs).skip(1) {
            acc = acc.add(&f.scale(c))?;
        }
        Ok(acc)
    }

    fn check_same_chart(&self, other: &VectorField) -> Result<(), GeometryError> {
        if self.dim() != other.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}
