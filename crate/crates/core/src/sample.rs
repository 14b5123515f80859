//! Seeded, reproducible draws: probe points in boxes, random polynomial
//! fields, and coefficient vectors for distribution scans.
//!
//! Every randomized suite in the workspace funnels through this module so a
//! (seed, draw-order) pair pins the exact inputs. Nothing here reads clocks
//! or global state.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::ScalarExpr;
use crate::geometry::{ChartDomain, GeometryError, TangentPoint, VectorField};

/// The workspace-wide deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the closed box `[lower, upper]`.
pub fn point_in_box(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&lo, &hi)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        })
        .collect()
}

/// Uniform vector with independent components in `[lo, hi)`.
pub fn vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random tangent point with base in the box and fiber components in
/// `[-scale, scale)`.
pub fn tangent_point(
    rng: &mut ChaCha8Rng,
    lower: &[f64],
    upper: &[f64],
    scale: f64,
) -> TangentPoint {
    let base = point_in_box(rng, lower, upper);
    let fiber = vector(rng, base.len(), -scale, scale);
    TangentPoint::new(base, fiber).expect("matched dimensions by construction")
}

/// Axis-aligned lattice over the box, `per_axis` nodes per axis (endpoints
/// included; a single node sits at the box center).
pub fn grid_points(lower: &[f64], upper: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    assert!(per_axis >= 1);
    assert_eq!(lower.len(), upper.len());
    let n = lower.len();
    let axis_nodes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if per_axis == 1 {
                vec![0.5 * (lower[i] + upper[i])]
            } else {
                (0..per_axis)
                    .map(|k| {
                        lower[i] + (upper[i] - lower[i]) * k as f64 / (per_axis - 1) as f64
                    })
                    .collect()
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for nodes in &axis_nodes {
        let mut next = Vec::with_capacity(out.len() * nodes.len());
        for partial in &out {
            for &v in nodes {
                let mut p = partial.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Default probe set: a `per_axis^dim` lattice plus `random_count` seeded
/// uniform draws.
pub fn probe_points(
    lower: &[f64],
    upper: &[f64],
    per_axis: usize,
    random_count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut out = grid_points(lower, upper, per_axis);
    let mut r = rng(seed);
    for _ in 0..random_count {
        out.push(point_in_box(&mut r, lower, upper));
    }
    out
}

/// Coefficient vectors that decide closure of a quadratic form over `m`
/// generators: all units plus all pairwise sums (polarization directions).
pub fn coefficient_probes(m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        out.push(e);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e[j] = 1.0;
            out.push(e);
        }
    }
    out
}

/// `(base, coefficient)` pairs for invariance scans: lattice bases cycle
/// through the deterministic coefficient probes, random bases get random
/// coefficients in `[-1, 1)`.
pub fn paired_probes(
    lower: &[f64],
    upper: &[f64],
    generators: usize,
    per_axis: usize,
    random_count: usize,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let coeffs = coefficient_probes(generators);
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, base) in grid_points(lower, upper, per_axis).into_iter().enumerate() {
        out.push((base, coeffs[i % coeffs.len()].clone()));
    }
    let mut r = rng(seed);
    for _ in 0..random_count {
        let base = point_in_box(&mut r, lower, upper);
        let c = vector(&mut r, generators, -1.0, 1.0);
        out.push((base, c));
    }
    out
}

/// A random vector field with polynomial components of total degree ≤ 2 and
/// coefficients uniform in `[-scale, scale)`.
pub fn polynomial_field(
    rng: &mut ChaCha8Rng,
    domain: &ChartDomain,
    scale: f64,
) -> Result<VectorField, GeometryError> {
    let n = domain.dim();
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let mut acc = ScalarExpr::constant(rng.random_range(-scale..scale), n);
        for i in 0..n {
            let xi = ScalarExpr::coordinate(i, n);
            acc = acc.add(&xi.scale(rng.random_range(-scale..scale)));
            for j in i..n {
                let xj = ScalarExpr::coordinate(j, n);
                let quad = xi.mul(&xj).scale(rng.random_range(-scale..scale));
                acc = acc.add(&quad);
            }
        }
        comps.push(acc);
    }
    VectorField::new(domain.clone(), comps)
}
