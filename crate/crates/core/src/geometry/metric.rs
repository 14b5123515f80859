use nalgebra::DMatrix;

use super::{ChartDomain, Connection, GeometryError};
use crate::expr::ScalarExpr;

/// A Riemannian metric with closed-form entries, `entries[i*n + j] = g_{ij}`.
///
/// Symmetry and positive definiteness are semantic requirements on the
/// expressions; they are checked numerically at caller-supplied probe points
/// before the metric is used to build a connection.
#[derive(Debug, Clone)]
pub struct MetricField {
    domain: ChartDomain,
    entries: Vec<ScalarExpr>,
}

impl MetricField {
    pub fn new(domain: ChartDomain, entries: Vec<ScalarExpr>) -> Result<MetricField, GeometryError> {
        let n = domain.dim();
        if entries.len() != n * n {
            return Err(GeometryError::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for e in &entries {
            if e.dim() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: e.dim(),
                });
            }
        }
        Ok(MetricField { domain, entries })
    }

    pub fn from_strs(domain: ChartDomain, rows: &[Vec<&str>]) -> Result<MetricField, GeometryError> {
        let n = domain.dim();
        if rows.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for s in row {
                entries.push(ScalarExpr::parse(s, n).map_err(|err| GeometryError::Parse {
                    src: (*s).to_owned(),
                    err,
                })?);
            }
        }
        MetricField::new(domain, entries)
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.entries[i * self.dim() + j]
    }

    pub fn value_at(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.domain.check_point(x)?;
        self.entries
            .iter()
            .map(|e| e.eval(x).map_err(GeometryError::Eval))
            .collect()
    }

    /// Checks symmetry and positive definiteness at each probe point.
    pub fn validate_at(&self, probes: &[Vec<f64>]) -> Result<(), GeometryError> {
        let n = self.dim();
        for x in probes {
            let g = self.value_at(x)?;
            for i in 0..n {
                for j in (i + 1)..n {
                    let dev = (g[i * n + j] - g[j * n + i]).abs();
                    let scale = 1.0 + g[i * n + j].abs();
                    if dev > 1e-10 * scale {
                        return Err(GeometryError::AsymmetricMetric {
                            i,
                            j,
                            point: x.clone(),
                        });
                    }
                }
            }
            let m = DMatrix::from_row_slice(n, n, &g);
            if m.cholesky().is_none() {
                return Err(GeometryError::DegenerateMetric { point: x.clone() });
            }
        }
        Ok(())
    }
}

/// Determinant of a symbolic matrix by Laplace expansion along the first row.
fn symbolic_det(entries: &[ScalarExpr], n: usize, dim: usize) -> ScalarExpr {
    if n == 1 {
        return entries[0].clone();
    }
    let mut acc = ScalarExpr::zero(dim);
    for col in 0..n {
        let minor = minor_matrix(entries, n, 0, col);
        let term = entries[col].mul(&symbolic_det(&minor, n - 1, dim));
        acc = if col % 2 == 0 {
            acc.add(&term)
        } else {
            acc.sub(&term)
        };
    }
    acc
}

fn minor_matrix(entries: &[ScalarExpr], n: usize, row: usize, col: usize) -> Vec<ScalarExpr> {
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in 0..n {
        if i == row {
            continue;
        }
        for j in 0..n {
            if j == col {
                continue;
            }
            out.push(entries[i * n + j].clone());
        }
    }
    out
}

/// The Levi-Civita connection of `g`:
/// `Γ^k_{ij} = ½ Σ_l g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
///
/// The inverse metric is built symbolically through the adjugate, so the
/// construction stays closed-form in every dimension; `probes` are points at
/// which symmetry and non-degeneracy are verified up front.
pub fn christoffel_from_metric(
    g: &MetricField,
    probes: &[Vec<f64>],
) -> Result<Connection, GeometryError> {
    g.validate_at(probes)?;
    let n = g.dim();
    let entries: Vec<ScalarExpr> = (0..n * n).map(|k| g.entry(k / n, k % n).clone()).collect();
    let det = symbolic_det(&entries, n, n);

    // adjugate: adj[k][l] = (−1)^{k+l} det(minor with row l, col k removed)
    let mut adj = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let minor = minor_matrix(&entries, n, l, k);
            let cof = symbolic_det(&minor, n - 1, n);
            adj.push(if (k + l) % 2 == 0 { cof } else { cof.neg() });
        }
    }

    // partials[a][b][c] = ∂_a g_{bc}
    let partial = |a: usize, b: usize, c: usize| g.entry(b, c).differentiate(a);

    let two_det = det.scale(2.0);
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut numerator = ScalarExpr::zero(n);
                for l in 0..n {
                    let bracket = partial(i, j, l)
                        .add(&partial(j, i, l))
                        .sub(&partial(l, i, j));
                    numerator = numerator.add(&adj[k * n + l].mul(&bracket));
                }
                gamma.push(if numerator.is_zero() {
                    numerator
                } else {
                    numerator.div(&two_det)
                });
            }
        }
    }
    Connection::new(g.domain().clone(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn upper_half_plane() -> ChartDomain {
        ChartDomain::boxed(
            vec![f64::NEG_INFINITY, 1e-6],
            vec![f64::INFINITY, f64::INFINITY],
        )
        .unwrap()
    }

    fn hyperbolic_metric() -> MetricField {
        MetricField::from_strs(
            upper_half_plane(),
            &[vec!["1/x2^2", "0"], vec!["0", "1/x2^2"]],
        )
        .unwrap()
    }

    #[test]
    fn euclidean_metric_gives_flat_connection() {
        let g = MetricField::from_strs(
            ChartDomain::unbounded(2),
            &[vec!["1", "0"], vec!["0", "1"]],
        )
        .unwrap();
        let c = christoffel_from_metric(&g, &[vec![0.0, 0.0], vec![1.0, -2.0]]).unwrap();
        let table = c.gamma_at(&[0.3, 0.4]).unwrap();
        assert!(table.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hyperbolic_half_plane_symbols() {
        let g = hyperbolic_metric();
        let c = christoffel_from_metric(&g, &[vec![0.0, 1.0], vec![2.0, 0.5]]).unwrap();
        for y in [0.5, 1.0, 2.0] {
            let p = [0.7, y];
            // Γ¹₁₂ = Γ¹₂₁ = −1/y, Γ²₁₁ = 1/y, Γ²₂₂ = −1/y, rest zero
            assert!((c.gamma(0, 0, 1).eval(&p).unwrap() + 1.0 / y).abs() < 1e-12);
            assert!((c.gamma(0, 1, 0).eval(&p).unwrap() + 1.0 / y).abs() < 1e-12);
            assert!((c.gamma(1, 0, 0).eval(&p).unwrap() - 1.0 / y).abs() < 1e-12);
            assert!((c.gamma(1, 1, 1).eval(&p).unwrap() + 1.0 / y).abs() < 1e-12);
            assert!(c.gamma(0, 0, 0).eval(&p).unwrap().abs() < 1e-12);
            assert!(c.gamma(1, 0, 1).eval(&p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn levi_civita_matches_finite_difference_oracle() {
        // oracle: evaluate ∂g numerically, invert numerically, apply the formula
        let g = hyperbolic_metric();
        let c = christoffel_from_metric(&g, &[vec![0.0, 1.0]]).unwrap();
        let n = 2;
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0)];
            let gm = |p: &[f64]| DMatrix::from_row_slice(n, n, &g.value_at(p).unwrap());
            let mut dg = vec![DMatrix::zeros(n, n); n];
            for a in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += h;
                xm[a] -= h;
                dg[a] = (gm(&xp) - gm(&xm)) / (2.0 * h);
            }
            let ginv = gm(&x).try_inverse().unwrap();
            let table = c.gamma_at(&x).unwrap();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut oracle = 0.0;
                        for l in 0..n {
                            oracle += 0.5
                                * ginv[(k, l)]
                                * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                        }
                        let sym = table[(k * n + i) * n + j];
                        assert!(
                            (sym - oracle).abs() < 1e-7,
                            "Γ^{k}_{i}{j} at {x:?}: symbolic {sym}, oracle {oracle}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn levi_civita_is_torsion_free() {
        let g = hyperbolic_metric();
        let c = christoffel_from_metric(&g, &[vec![0.0, 1.0]]).unwrap();
        let dom = upper_half_plane();
        let x = VectorField::from_strs(dom.clone(), &["x2", "x1"]).unwrap();
        let y = VectorField::from_strs(dom, &["1", "x1*x2"]).unwrap();
        let t = c.torsion(&x, &y).unwrap();
        for p in [[0.0, 1.0], [1.0, 0.5], [-2.0, 2.0]] {
            let v = t.value_at(&p).unwrap();
            assert!(v.iter().all(|&c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let g = MetricField::from_strs(
            ChartDomain::unbounded(2),
            &[vec!["x1", "0"], vec!["0", "1"]],
        )
        .unwrap();
        // singular (and indefinite) at x1 = 0
        assert!(matches!(
            christoffel_from_metric(&g, &[vec![0.0, 0.0]]),
            Err(GeometryError::DegenerateMetric { .. })
        ));
        // fine at a positive probe
        assert!(christoffel_from_metric(&g, &[vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let g = MetricField::from_strs(
            ChartDomain::unbounded(2),
            &[vec!["1", "x1"], vec!["0", "1"]],
        )
        .unwrap();
        assert!(matches!(
            g.validate_at(&[vec![1.0, 0.0]]),
            Err(GeometryError::AsymmetricMetric { .. })
        ));
    }

    #[test]
    fn three_dimensional_diagonal_metric() {
        // g = diag(1, x1²+1, 1): Γ²₁₂ = Γ²₂₁ = x1/(x1²+1), Γ¹₂₂ = −x1
        let g = MetricField::from_strs(
            ChartDomain::unbounded(3),
            &[
                vec!["1", "0", "0"],
                vec!["0", "x1^2 + 1", "0"],
                vec!["0", "0", "1"],
            ],
        )
        .unwrap();
        let c = christoffel_from_metric(&g, &[vec![0.5, 0.0, 0.0]]).unwrap();
        let p = [2.0, -1.0, 3.0];
        assert!((c.gamma(1, 0, 1).eval(&p).unwrap() - 2.0 / 5.0).abs() < 1e-12);
        assert!((c.gamma(1, 1, 0).eval(&p).unwrap() - 2.0 / 5.0).abs() < 1e-12);
        assert!((c.gamma(0, 1, 1).eval(&p).unwrap() + 2.0).abs() < 1e-12);
        assert!(c.gamma(2, 0, 0).eval(&p).unwrap().abs() < 1e-12);
    }
}
