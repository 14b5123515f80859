//! Lifts of base vector fields to symbolic fields on the tangent bundle.
//!
//! The tangent bundle of an `n`-dimensional chart is treated as a `2n`
//! dimensional chart with coordinates `(x1..xn, v1..vn)`, where `v_j` is the
//! fiber coordinate `x{n+j}`. Building the lifts symbolically means their Lie
//! brackets can be computed by the ordinary expression algebra, which is what
//! the nested-bracket identities are checked against.

use super::{ChartDomain, Connection, GeometryError, VectorField};
use crate::expr::ScalarExpr;

/// The chart of the tangent bundle: base axes keep their bounds, fiber axes
/// are free.
pub fn tangent_domain(base: &ChartDomain) -> ChartDomain {
    let n = base.dim();
    match base.bounds() {
        None => ChartDomain::unbounded(2 * n),
        Some(b) => {
            let mut lower = b.lower.clone();
            let mut upper = b.upper.clone();
            lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, n));
            upper.extend(std::iter::repeat_n(f64::INFINITY, n));
            ChartDomain::boxed(lower, upper).expect("base bounds stay ordered")
        }
    }
}

fn fiber_var(j: usize, n: usize) -> ScalarExpr {
    ScalarExpr::coordinate(n + j, 2 * n)
}

/// `X^V = (0, X(x))`: flows by translating fibers.
pub fn vertical_lift_field(x_field: &VectorField) -> Result<VectorField, GeometryError> {
    let n = x_field.dim();
    let dom = tangent_domain(x_field.domain());
    let mut comps: Vec<ScalarExpr> = (0..n).map(|_| ScalarExpr::zero(2 * n)).collect();
    for k in 0..n {
        comps.push(x_field.component(k).extend_dim(2 * n));
    }
    VectorField::new(dom, comps)
}

/// `X^C = (X(x), DX(x)·v)`: the linearization (variational) field.
pub fn complete_lift_field(x_field: &VectorField) -> Result<VectorField, GeometryError> {
    let n = x_field.dim();
    let dom = tangent_domain(x_field.domain());
    let mut comps: Vec<ScalarExpr> = (0..n)
        .map(|k| x_field.component(k).extend_dim(2 * n))
        .collect();
    for k in 0..n {
        let mut acc = ScalarExpr::zero(2 * n);
        for j in 0..n {
            let partial = x_field.jacobian_entry(k, j).extend_dim(2 * n);
            acc = acc.add(&partial.mul(&fiber_var(j, n)));
        }
        comps.push(acc);
    }
    VectorField::new(dom, comps)
}

/// `X^H = (X(x), −Γ(X(x), v))`: flows by parallel transport along integral
/// curves of `X`.
pub fn horizontal_lift_field(
    c: &Connection,
    x_field: &VectorField,
) -> Result<VectorField, GeometryError> {
    let n = x_field.dim();
    if c.dim() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: c.dim(),
            got: n,
        });
    }
    let dom = tangent_domain(x_field.domain());
    let mut comps: Vec<ScalarExpr> = (0..n)
        .map(|k| x_field.component(k).extend_dim(2 * n))
        .collect();
    for k in 0..n {
        let mut acc = ScalarExpr::zero(2 * n);
        for i in 0..n {
            for j in 0..n {
                let term = c
                    .gamma(k, i, j)
                    .mul(x_field.component(i))
                    .extend_dim(2 * n)
                    .mul(&fiber_var(j, n));
                acc = acc.sub(&term);
            }
        }
        comps.push(acc);
    }
    VectorField::new(dom, comps)
}

/// The geodesic spray `Z = (v, −Γ(v, v))` as a field on the tangent bundle.
pub fn geodesic_spray_field(c: &Connection) -> Result<VectorField, GeometryError> {
    let n = c.dim();
    let dom = tangent_domain(c.domain());
    let mut comps: Vec<ScalarExpr> = (0..n).map(|j| fiber_var(j, n)).collect();
    for k in 0..n {
        let mut acc = ScalarExpr::zero(2 * n);
        for i in 0..n {
            for j in 0..n {
                let term = c
                    .gamma(k, i, j)
                    .extend_dim(2 * n)
                    .mul(&fiber_var(i, n))
                    .mul(&fiber_var(j, n));
                acc = acc.sub(&term);
            }
        }
        comps.push(acc);
    }
    VectorField::new(dom, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{complete_lift_at, geodesic_spray_at, hlft, vlft, TangentPoint};

    fn chart(n: usize) -> ChartDomain {
        ChartDomain::unbounded(n)
    }

    fn tm_point(v: &TangentPoint) -> Vec<f64> {
        v.flat()
    }

    #[test]
    fn lifted_fields_agree_with_pointwise_lifts() {
        let c = Connection::from_strs(
            chart(2),
            &[
                vec![vec!["x1", "1"], vec!["0", "x2"]],
                vec![vec!["0.5", "0"], vec!["x1*x2", "0"]],
            ],
        )
        .unwrap();
        let x_field = VectorField::from_strs(chart(2), &["x2", "x1^2"]).unwrap();
        let v = TangentPoint::new(vec![0.7, -0.4], vec![1.5, 2.0]).unwrap();
        let p = tm_point(&v);

        // vertical: field value = (0, X(x)), which matches the slot (b, c) of vlft at X(x)
        let xv = vertical_lift_field(&x_field).unwrap().value_at(&p).unwrap();
        let want = vlft(&v, &x_field.value_at(&v.base).unwrap()).unwrap();
        assert_eq!(&xv[..2], &want.slot_b[..]);
        assert_eq!(&xv[2..], &want.slot_c[..]);

        let xc = complete_lift_field(&x_field).unwrap().value_at(&p).unwrap();
        let want = complete_lift_at(&x_field, &v).unwrap();
        assert_eq!(&xc[..2], &want.slot_b[..]);
        assert_eq!(&xc[2..], &want.slot_c[..]);

        let xh = horizontal_lift_field(&c, &x_field).unwrap().value_at(&p).unwrap();
        let want = hlft(&c, &v, &x_field.value_at(&v.base).unwrap()).unwrap();
        assert_eq!(&xh[..2], &want.slot_b[..]);
        for (a, b) in xh[2..].iter().zip(&want.slot_c) {
            assert!((a - b).abs() < 1e-15);
        }

        let z = geodesic_spray_field(&c).unwrap().value_at(&p).unwrap();
        let want = geodesic_spray_at(&c, &v).unwrap();
        assert_eq!(&z[..2], &want.slot_b[..]);
        for (a, b) in z[2..].iter().zip(&want.slot_c) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn tangent_domain_frees_fiber_axes() {
        let base = ChartDomain::boxed(vec![0.0], vec![1.0]).unwrap();
        let tm = tangent_domain(&base);
        assert_eq!(tm.dim(), 2);
        assert!(tm.contains(&[0.5, 1e9]));
        assert!(!tm.contains(&[2.0, 0.0]));
    }
}
