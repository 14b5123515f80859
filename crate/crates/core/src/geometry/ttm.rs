//! Points of the tangent and double tangent bundles, lifts, and the two
//! vector-bundle structures on `TTM`.
//!
//! A point of `TTM` is stored as `(x, a, b, c)`: `(x, a)` is the point of
//! `TM` it is attached to, `(x, b)` is its image under the derivative of the
//! bundle projection, and `c` is the remaining fiber slot. The primary
//! addition `+₁` is vector addition in `T_{(x,a)}TM` (adds `b` and `c`); the
//! secondary addition `+₂` is addition in the derived bundle over `(x, b)`
//! (adds `a` and `c`). Both refuse to combine points whose anchors disagree
//! by more than [`ANCHOR_TOL`]: silently mixing fibers of different points is
//! exactly the class of bug these types exist to catch.

use super::{Connection, GeometryError, VectorField};

/// Tolerance for anchor-equality checks in `+₁`/`+₂`.
pub const ANCHOR_TOL: f64 = 1e-12;

/// A tangent vector `(x, v)` at a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPoint {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl TangentPoint {
    pub fn new(base: Vec<f64>, fiber: Vec<f64>) -> Result<TangentPoint, GeometryError> {
        if base.len() != fiber.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: base.len(),
                got: fiber.len(),
            });
        }
        Ok(TangentPoint { base, fiber })
    }

    pub fn zero_vector(base: Vec<f64>) -> TangentPoint {
        let fiber = vec![0.0; base.len()];
        TangentPoint { base, fiber }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Concatenated `(base, fiber)` coordinates on `TM`.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.base.clone();
        out.extend_from_slice(&self.fiber);
        out
    }

    pub fn from_flat(state: &[f64]) -> TangentPoint {
        assert!(state.len() % 2 == 0);
        let n = state.len() / 2;
        TangentPoint {
            base: state[..n].to_vec(),
            fiber: state[n..].to_vec(),
        }
    }
}

/// A point of the double tangent bundle in chart coordinates `(x, a, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtmPoint {
    pub base: Vec<f64>,
    pub slot_a: Vec<f64>,
    pub slot_b: Vec<f64>,
    pub slot_c: Vec<f64>,
}

impl TtmPoint {
    pub fn new(
        base: Vec<f64>,
        slot_a: Vec<f64>,
        slot_b: Vec<f64>,
        slot_c: Vec<f64>,
    ) -> Result<TtmPoint, GeometryError> {
        let n = base.len();
        for s in [&slot_a, &slot_b, &slot_c] {
            if s.len() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
        }
        Ok(TtmPoint {
            base,
            slot_a,
            slot_b,
            slot_c,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Projection to `TM`: the point this element is attached to.
    pub fn anchor_tm(&self) -> TangentPoint {
        TangentPoint {
            base: self.base.clone(),
            fiber: self.slot_a.clone(),
        }
    }

    /// Image under the derivative of the bundle projection `TM → M`.
    pub fn tangent_projection(&self) -> TangentPoint {
        TangentPoint {
            base: self.base.clone(),
            fiber: self.slot_b.clone(),
        }
    }

    /// Concatenated `(x, a, b, c)` coordinates, handy for norms.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.base.clone();
        out.extend_from_slice(&self.slot_a);
        out.extend_from_slice(&self.slot_b);
        out.extend_from_slice(&self.slot_c);
        out
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_anchor(
    slot: &'static str,
    base1: &[f64],
    base2: &[f64],
    s1: &[f64],
    s2: &[f64],
) -> Result<(), GeometryError> {
    if base1.len() != base2.len() || s1.len() != s2.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: base1.len(),
            got: base2.len(),
        });
    }
    let dev = max_abs_diff(base1, base2).max(max_abs_diff(s1, s2));
    if dev > ANCHOR_TOL {
        return Err(GeometryError::AnchorMismatch { slot, deviation: dev });
    }
    Ok(())
}

fn add_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `+₁`: addition in `T_{(x,a)}TM`. Requires equal `(x, a)`; adds `(b, c)`.
pub fn add_primary(u: &TtmPoint, v: &TtmPoint) -> Result<TtmPoint, GeometryError> {
    check_anchor("primary (x, a)", &u.base, &v.base, &u.slot_a, &v.slot_a)?;
    Ok(TtmPoint {
        base: u.base.clone(),
        slot_a: u.slot_a.clone(),
        slot_b: add_slices(&u.slot_b, &v.slot_b),
        slot_c: add_slices(&u.slot_c, &v.slot_c),
    })
}

/// `+₂`: addition in the secondary bundle over `(x, b)`. Adds `(a, c)`.
pub fn add_secondary(u: &TtmPoint, v: &TtmPoint) -> Result<TtmPoint, GeometryError> {
    check_anchor("secondary (x, b)", &u.base, &v.base, &u.slot_b, &v.slot_b)?;
    Ok(TtmPoint {
        base: u.base.clone(),
        slot_a: add_slices(&u.slot_a, &v.slot_a),
        slot_b: u.slot_b.clone(),
        slot_c: add_slices(&u.slot_c, &v.slot_c),
    })
}

/// `λ ·₁ w`: scales the `(b, c)` pair.
pub fn scale_primary(k: f64, w: &TtmPoint) -> TtmPoint {
    TtmPoint {
        base: w.base.clone(),
        slot_a: w.slot_a.clone(),
        slot_b: w.slot_b.iter().map(|x| k * x).collect(),
        slot_c: w.slot_c.iter().map(|x| k * x).collect(),
    }
}

/// `λ ·₂ w`: scales the `(a, c)` pair.
pub fn scale_secondary(k: f64, w: &TtmPoint) -> TtmPoint {
    TtmPoint {
        base: w.base.clone(),
        slot_a: w.slot_a.iter().map(|x| k * x).collect(),
        slot_b: w.slot_b.clone(),
        slot_c: w.slot_c.iter().map(|x| k * x).collect(),
    }
}

pub fn sub_primary(u: &TtmPoint, v: &TtmPoint) -> Result<TtmPoint, GeometryError> {
    add_primary(u, &scale_primary(-1.0, v))
}

pub fn sub_secondary(u: &TtmPoint, v: &TtmPoint) -> Result<TtmPoint, GeometryError> {
    add_secondary(u, &scale_secondary(-1.0, v))
}

/// The canonical involution `(x, a, b, c) ↦ (x, b, a, c)`.
pub fn involution(w: &TtmPoint) -> TtmPoint {
    TtmPoint {
        base: w.base.clone(),
        slot_a: w.slot_b.clone(),
        slot_b: w.slot_a.clone(),
        slot_c: w.slot_c.clone(),
    }
}

/// Vertical lift of `u` to the tangent space at `v`: `(x, v, 0, u)`.
pub fn vlft(v: &TangentPoint, u: &[f64]) -> Result<TtmPoint, GeometryError> {
    if u.len() != v.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: v.dim(),
            got: u.len(),
        });
    }
    Ok(TtmPoint {
        base: v.base.clone(),
        slot_a: v.fiber.clone(),
        slot_b: vec![0.0; v.dim()],
        slot_c: u.to_vec(),
    })
}

/// Horizontal lift of `u` to the tangent space at `v`:
/// `(x, v, u, w)` with `w^k = −Σ_{ij} Γ^k_{ij} u^i v^j`.
pub fn hlft(c: &Connection, v: &TangentPoint, u: &[f64]) -> Result<TtmPoint, GeometryError> {
    let correction = c.contract_at(&v.base, u, &v.fiber)?;
    Ok(TtmPoint {
        base: v.base.clone(),
        slot_a: v.fiber.clone(),
        slot_b: u.to_vec(),
        slot_c: correction.iter().map(|x| -x).collect(),
    })
}

/// The geodesic spray at `v`: `hlft(v, v)`.
pub fn geodesic_spray_at(c: &Connection, v: &TangentPoint) -> Result<TtmPoint, GeometryError> {
    hlft(c, v, &v.fiber)
}

/// Value of the complete lift `X^C` at `v`: `(x, v, X(x), DX(x)·v)`.
pub fn complete_lift_at(x_field: &VectorField, v: &TangentPoint) -> Result<TtmPoint, GeometryError> {
    let n = v.dim();
    let value = x_field.value_at(&v.base)?;
    let jac = x_field.jacobian_at(&v.base)?;
    let mut slot_c = vec![0.0; n];
    for k in 0..n {
        for j in 0..n {
            slot_c[k] += jac[k * n + j] * v.fiber[j];
        }
    }
    Ok(TtmPoint {
        base: v.base.clone(),
        slot_a: v.fiber.clone(),
        slot_b: value,
        slot_c,
    })
}

/// Value of the tangent map `TX` at `u`: `(x, X(x), u, DX(x)·u)`.
pub fn tangent_map_at(x_field: &VectorField, u: &TangentPoint) -> Result<TtmPoint, GeometryError> {
    let n = u.dim();
    let value = x_field.value_at(&u.base)?;
    let jac = x_field.jacobian_at(&u.base)?;
    let mut slot_c = vec![0.0; n];
    for k in 0..n {
        for j in 0..n {
            slot_c[k] += jac[k * n + j] * u.fiber[j];
        }
    }
    Ok(TtmPoint {
        base: u.base.clone(),
        slot_a: value,
        slot_b: u.fiber.clone(),
        slot_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarExpr;
    use crate::geometry::ChartDomain;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chart(n: usize) -> ChartDomain {
        ChartDomain::unbounded(n)
    }

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn additions_require_matching_anchors() {
        let u = TtmPoint::new(vec![0.0], vec![1.0], vec![2.0], vec![3.0]).unwrap();
        let v = TtmPoint::new(vec![0.0], vec![1.0], vec![9.0], vec![1.0]).unwrap();
        let s = add_primary(&u, &v).unwrap();
        assert_eq!(s.slot_b, vec![11.0]);
        assert_eq!(s.slot_c, vec![4.0]);

        let w = TtmPoint::new(vec![0.0], vec![1.0 + 1e-9], vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(
            add_primary(&u, &w),
            Err(GeometryError::AnchorMismatch { .. })
        ));
        // same points are compatible for +₂ only if slot_b matches
        assert!(add_secondary(&u, &v).is_err());
    }

    #[test]
    fn interchange_of_additions() {
        // (u +₂ v) +₁ (w +₂ z) = (u +₁ w) +₂ (v +₁ z) on compatible quadruples
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..4);
            let x = rv(&mut rng, n);
            let (a1, a2) = (rv(&mut rng, n), rv(&mut rng, n));
            let (b1, b2) = (rv(&mut rng, n), rv(&mut rng, n));
            let u = TtmPoint::new(x.clone(), a1.clone(), b1.clone(), rv(&mut rng, n)).unwrap();
            let v = TtmPoint::new(x.clone(), a2.clone(), b1.clone(), rv(&mut rng, n)).unwrap();
            let w = TtmPoint::new(x.clone(), a1.clone(), b2.clone(), rv(&mut rng, n)).unwrap();
            let z = TtmPoint::new(x.clone(), a2.clone(), b2.clone(), rv(&mut rng, n)).unwrap();
            let lhs = add_primary(&add_secondary(&u, &v).unwrap(), &add_secondary(&w, &z).unwrap())
                .unwrap();
            let rhs = add_secondary(&add_primary(&u, &w).unwrap(), &add_primary(&v, &z).unwrap())
                .unwrap();
            let (l, r) = (lhs.flat(), rhs.flat());
            for (a, b) in l.iter().zip(&r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalings_commute_across_structures() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..4);
            let w = TtmPoint::new(rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, n))
                .unwrap();
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let lhs = scale_primary(a, &scale_secondary(b, &w));
            let rhs = scale_secondary(b, &scale_primary(a, &w));
            for (x, y) in lhs.flat().iter().zip(rhs.flat()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn involution_swaps_and_is_involutive() {
        let w = TtmPoint::new(vec![1.0], vec![2.0], vec![3.0], vec![4.0]).unwrap();
        let i = involution(&w);
        assert_eq!(i.slot_a, vec![3.0]);
        assert_eq!(i.slot_b, vec![2.0]);
        assert_eq!(involution(&i), w);
    }

    #[test]
    fn complete_lift_is_involution_of_tangent_map() {
        let x_field = VectorField::from_strs(chart(2), &["x1*x2", "sin(x1)"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let v = TangentPoint::new(rv(&mut rng, 2), rv(&mut rng, 2)).unwrap();
            let lhs = complete_lift_at(&x_field, &v).unwrap();
            let rhs = involution(&tangent_map_at(&x_field, &v).unwrap());
            for (a, b) in lhs.flat().iter().zip(rhs.flat()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertical_lift_secondary_identity() {
        // w +₂ I(vlft(u, z)) = w +₁ vlft(v, z) where v = anchor fiber, u = slot_b of w
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.random_range(1..4);
            let w = TtmPoint::new(rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, n), rv(&mut rng, n))
                .unwrap();
            let z = rv(&mut rng, n);
            let u = TangentPoint::new(w.base.clone(), w.slot_b.clone()).unwrap();
            let v = TangentPoint::new(w.base.clone(), w.slot_a.clone()).unwrap();
            let lhs = add_secondary(&w, &involution(&vlft(&u, &z).unwrap())).unwrap();
            let rhs = add_primary(&w, &vlft(&v, &z).unwrap()).unwrap();
            for (a, b) in lhs.flat().iter().zip(rhs.flat()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bracket_from_tangent_maps() {
        // TY(X(x)) −₁ I(TX(Y(x))) = vlft(Y(x), [X, Y](x))
        let x_field = VectorField::from_strs(chart(2), &["x2", "0"]).unwrap();
        let y_field = VectorField::from_strs(chart(2), &["0", "x1"]).unwrap();
        let bracket = x_field.lie_bracket(&y_field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = rv(&mut rng, 2);
            let xv = TangentPoint::new(p.clone(), x_field.value_at(&p).unwrap()).unwrap();
            let yv = TangentPoint::new(p.clone(), y_field.value_at(&p).unwrap()).unwrap();
            let lhs = sub_primary(
                &tangent_map_at(&y_field, &xv).unwrap(),
                &involution(&tangent_map_at(&x_field, &yv).unwrap()),
            )
            .unwrap();
            let rhs = vlft(&yv, &bracket.value_at(&p).unwrap()).unwrap();
            for (a, b) in lhs.flat().iter().zip(rhs.flat()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hlft_carries_connection_correction() {
        // Γ¹₁₁ = x1 on the line: hlft at x=2, v=3, u=1 has slot_c = −Γ·u·v = −6
        let c = crate::geometry::Connection::from_strs(chart(1), &[vec![vec!["x1"]]]).unwrap();
        let v = TangentPoint::new(vec![2.0], vec![3.0]).unwrap();
        let h = hlft(&c, &v, &[1.0]).unwrap();
        assert_eq!(h.slot_b, vec![1.0]);
        assert_eq!(h.slot_c, vec![-6.0]);
    }

    #[test]
    fn hlft_antisymmetrization_is_vertical_torsion() {
        // hlft(v,u) −₁ I(hlft(u,v)) = vlft(v, T(v,u))
        let n = 3;
        let mut gamma = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..n * n * n {
            gamma.push(ScalarExpr::constant(rng.random_range(-1.0..1.0), n));
        }
        let c = crate::geometry::Connection::new(chart(n), gamma).unwrap();
        for _ in 0..20 {
            let x = rv(&mut rng, n);
            let vv = rv(&mut rng, n);
            let uu = rv(&mut rng, n);
            let v = TangentPoint::new(x.clone(), vv.clone()).unwrap();
            let u = TangentPoint::new(x.clone(), uu.clone()).unwrap();
            let lhs = sub_primary(
                &hlft(&c, &v, &uu).unwrap(),
                &involution(&hlft(&c, &u, &vv).unwrap()),
            )
            .unwrap();
            let rhs = vlft(&v, &c.torsion_at(&x, &vv, &uu).unwrap()).unwrap();
            for (a, b) in lhs.flat().iter().zip(rhs.flat()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lift_values_match_coordinates() {
        let v = TangentPoint::new(vec![1.0, 2.0], vec![0.5, -0.5]).unwrap();
        let l = vlft(&v, &[3.0, 4.0]).unwrap();
        assert_eq!(l.slot_a, vec![0.5, -0.5]);
        assert_eq!(l.slot_b, vec![0.0, 0.0]);
        assert_eq!(l.slot_c, vec![3.0, 4.0]);

        let x_field = VectorField::from_strs(chart(2), &["x2", "0"]).unwrap();
        let cl = complete_lift_at(&x_field, &v).unwrap();
        assert_eq!(cl.slot_b, vec![2.0, 0.0]); // X(x)
        assert_eq!(cl.slot_c, vec![-0.5, 0.0]); // DX·v = (v2, 0)
    }
}
