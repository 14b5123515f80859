use super::GeometryError;

/// Axis-aligned box; entries may be infinite for half-open or free axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// The coordinate domain of a chart: a dimension plus optional bounds.
///
/// Bounds are advisory for symbolic work but enforced step-by-step by the
/// integrators: a trajectory leaving the box is an error, not a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    dim: usize,
    bounds: Option<Bounds>,
}

impl ChartDomain {
    pub fn unbounded(dim: usize) -> ChartDomain {
        assert!(dim > 0, "chart dimension must be positive");
        ChartDomain { dim, bounds: None }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<ChartDomain, GeometryError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        assert!(
            lower.iter().zip(&upper).all(|(a, b)| a < b),
            "each lower bound must lie below the matching upper bound"
        );
        Ok(ChartDomain {
            dim: lower.len(),
            bounds: Some(Bounds { lower, upper }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.bounds {
            None => true,
            Some(b) => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= b.lower[i] && v <= b.upper[i]),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(GeometryError::OutOfDomain { point: x.to_vec() })
        }
    }
}
