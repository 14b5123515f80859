use super::{ChartDomain, GeometryError, TangentPoint, VectorField};
use crate::expr::{CompiledExpr, EvalError, ScalarExpr};

/// An affine connection given by closed-form Christoffel symbols.
///
/// `gamma(k, i, j)` is `Γ^k_{ij}` with the convention
/// `(∇_X Y)^k = Σ_i X^i ∂_i Y^k + Σ_{ij} Γ^k_{ij} X^i Y^j`,
/// so the first lower index contracts with the direction and the second with
/// the field being differentiated. Indices are zero-based.
#[derive(Debug, Clone)]
pub struct Connection {
    domain: ChartDomain,
    gamma: Vec<ScalarExpr>,
    compiled: Vec<CompiledExpr>,
}

impl Connection {
    /// `gamma` is flattened as `[(k*n + i)*n + j]`, length `n³`.
    pub fn new(domain: ChartDomain, gamma: Vec<ScalarExpr>) -> Result<Connection, GeometryError> {
        let n = domain.dim();
        if gamma.len() != n * n * n {
            return Err(GeometryError::DimensionMismatch {
                expected: n * n * n,
                got: gamma.len(),
            });
        }
        for g in &gamma {
            if g.dim() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: g.dim(),
                });
            }
        }
        let compiled = gamma.iter().map(ScalarExpr::compile).collect();
        Ok(Connection {
            domain,
            gamma,
            compiled,
        })
    }

    /// Parses an `n×n×n` nested array of symbol strings, `symbols[k][i][j]`.
    pub fn from_strs(
        domain: ChartDomain,
        symbols: &[Vec<Vec<&str>>],
    ) -> Result<Connection, GeometryError> {
        let n = domain.dim();
        if symbols.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: symbols.len(),
            });
        }
        let mut gamma = Vec::with_capacity(n * n * n);
        for plane in symbols {
            if plane.len() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: plane.len(),
                });
            }
            for row in plane {
                if row.len() != n {
                    return Err(GeometryError::DimensionMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
                for s in row {
                    gamma.push(ScalarExpr::parse(s, n).map_err(|err| GeometryError::Parse {
                        src: (*s).to_owned(),
                        err,
                    })?);
                }
            }
        }
        Connection::new(domain, gamma)
    }

    /// The flat connection (all symbols zero) on `domain`.
    pub fn flat(domain: ChartDomain) -> Connection {
        let n = domain.dim();
        let gamma = (0..n * n * n).map(|_| ScalarExpr::zero(n)).collect();
        Connection::new(domain, gamma).expect("flat connection is well formed")
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> &ScalarExpr {
        let n = self.dim();
        &self.gamma[(k * n + i) * n + j]
    }

    /// Evaluates all `n³` symbols at `x` into `out` (same flattened layout).
    pub fn gamma_into(
        &self,
        x: &[f64],
        out: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        debug_assert_eq!(out.len(), self.compiled.len());
        for (o, c) in out.iter_mut().zip(&self.compiled) {
            *o = c.eval_with(x, stack)?;
        }
        Ok(())
    }

    pub fn gamma_at(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.domain.check_point(x)?;
        let n = self.dim();
        let mut out = vec![0.0; n * n * n];
        let mut stack = Vec::new();
        self.gamma_into(x, &mut out, &mut stack)?;
        Ok(out)
    }

    /// `Γ(u, v)^k = Σ_{ij} Γ^k_{ij}(x) u^i v^j`.
    pub fn contract_at(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let n = self.dim();
        if u.len() != n || v.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: u.len().max(v.len()),
            });
        }
        let table = self.gamma_at(x)?;
        let mut out = vec![0.0; n];
        contract(&table, u, v, &mut out);
        Ok(out)
    }

    /// `(∇_X Y)` as a symbolic field.
    pub fn covariant_derivative(
        &self,
        x_field: &VectorField,
        y_field: &VectorField,
    ) -> Result<VectorField, GeometryError> {
        self.check_field(x_field)?;
        self.check_field(y_field)?;
        let n = self.dim();
        let mut comps = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = ScalarExpr::zero(n);
            for i in 0..n {
                acc = acc.add(&x_field.component(i).mul(&y_field.component(k).differentiate(i)));
                for j in 0..n {
                    let term = self
                        .gamma(k, i, j)
                        .mul(x_field.component(i))
                        .mul(y_field.component(j));
                    acc = acc.add(&term);
                }
            }
            comps.push(acc);
        }
        VectorField::new(self.domain.clone(), comps)
    }

    /// `∇_v Y` at a single tangent point `v = (x, u)`; depends only on the
    /// value of the direction at `x`, which the tensoriality tests exercise.
    pub fn covariant_derivative_at(
        &self,
        v: &TangentPoint,
        y_field: &VectorField,
    ) -> Result<Vec<f64>, GeometryError> {
        self.check_field(y_field)?;
        let n = self.dim();
        if v.dim() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: v.dim(),
            });
        }
        self.domain.check_point(&v.base)?;
        let y = y_field.value_at(&v.base)?;
        let jac = y_field.jacobian_at(&v.base)?;
        let table = self.gamma_at(&v.base)?;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += v.fiber[i] * jac[k * n + i];
            }
            out[k] = acc;
        }
        let mut corr = vec![0.0; n];
        contract(&table, &v.fiber, &y, &mut corr);
        for k in 0..n {
            out[k] += corr[k];
        }
        Ok(out)
    }

    /// Torsion `T(X, Y) = ∇_X Y − ∇_Y X − [X, Y]` as a symbolic field.
    pub fn torsion(
        &self,
        x_field: &VectorField,
        y_field: &VectorField,
    ) -> Result<VectorField, GeometryError> {
        let fwd = self.covariant_derivative(x_field, y_field)?;
        let bwd = self.covariant_derivative(y_field, x_field)?;
        let bracket = x_field.lie_bracket(y_field)?;
        fwd.add(&bwd.scale(-1.0))?.add(&bracket.scale(-1.0))
    }

    /// Pointwise torsion `T(u, v)^k = Σ_{ij} (Γ^k_{ij} − Γ^k_{ji}) u^i v^j`.
    pub fn torsion_at(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let n = self.dim();
        let table = self.gamma_at(x)?;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += (table[(k * n + i) * n + j] - table[(k * n + j) * n + i]) * u[i] * v[j];
                }
            }
            out[k] = acc;
        }
        Ok(out)
    }

    /// The torsion-free part: `Γ̄^k_{ij} = (Γ^k_{ij} + Γ^k_{ji})/2`.
    pub fn torsion_free_part(&self) -> Connection {
        let n = self.dim();
        let mut gamma = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma.push(self.gamma(k, i, j).add(self.gamma(k, j, i)).scale(0.5));
                }
            }
        }
        Connection::new(self.domain.clone(), gamma).expect("symmetrization preserves shape")
    }

    /// The symmetric product `⟨X : Y⟩ = ∇_X Y + ∇_Y X` as a symbolic field.
    pub fn symmetric_product(
        &self,
        x_field: &VectorField,
        y_field: &VectorField,
    ) -> Result<VectorField, GeometryError> {
        let fwd = self.covariant_derivative(x_field, y_field)?;
        let bwd = self.covariant_derivative(y_field, x_field)?;
        fwd.add(&bwd)
    }

    fn check_field(&self, f: &VectorField) -> Result<(), GeometryError> {
        if f.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: f.dim(),
            });
        }
        Ok(())
    }
}

/// `out[k] = Σ_{ij} table[(k n + i) n + j] u[i] v[j]` for a flattened 3-tensor.
pub(crate) fn contract(table: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
    let n = out.len();
    for k in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            let row = &table[(k * n + i) * n..(k * n + i) * n + n];
            let mut inner = 0.0;
            for j in 0..n {
                inner += row[j] * v[j];
            }
            acc += ui * inner;
        }
        out[k] = acc;
    }
}
