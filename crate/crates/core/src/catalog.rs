//! Ready-made connections with known closed-form behaviour.
//!
//! Each entry carries a probe box inside its chart domain on which sampling,
//! flow legs, and membership scans are well conditioned (away from chart
//! boundaries and coordinate degeneracies).

use crate::expr::ScalarExpr;
use crate::geometry::{ChartDomain, Connection, GeometryError, MetricField, VectorField};

/// A named connection together with a box of well-conditioned probe points.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub connection: Connection,
    pub probe_lower: Vec<f64>,
    pub probe_upper: Vec<f64>,
}

/// The Euclidean connection (all symbols zero) on an unbounded chart.
pub fn flat(dim: usize) -> Connection {
    Connection::flat(ChartDomain::unbounded(dim))
}

fn half_plane() -> ChartDomain {
    ChartDomain::boxed(
        vec![f64::NEG_INFINITY, 1e-9],
        vec![f64::INFINITY, f64::INFINITY],
    )
    .unwrap()
}

/// Levi-Civita connection of the hyperbolic upper half-plane, entered
/// directly: Γ¹₁₂ = Γ¹₂₁ = Γ²₂₂ = −1/x2 and Γ²₁₁ = 1/x2.
pub fn hyperbolic_half_plane() -> Connection {
    Connection::from_strs(
        half_plane(),
        &[
            vec![
                vec!["0", "-1/x2"], //
                vec!["-1/x2", "0"],
            ],
            vec![
                vec!["1/x2", "0"], //
                vec!["0", "-1/x2"],
            ],
        ],
    )
    .unwrap()
}

/// The metric ds² = (dx1² + dx2²)/x2² whose Levi-Civita connection is
/// [`hyperbolic_half_plane`]; kept separate so the two constructions can be
/// compared against each other.
pub fn hyperbolic_metric() -> MetricField {
    MetricField::from_strs(half_plane(), &[vec!["1/x2^2", "0"], vec!["0", "1/x2^2"]]).unwrap()
}

/// Round-sphere connection in colatitude/longitude coordinates (x1 = θ,
/// x2 = φ), restricted to θ ∈ [0.5, 2.6] to stay clear of the poles.
pub fn sphere_chart() -> Connection {
    let domain =
        ChartDomain::boxed(vec![0.5, f64::NEG_INFINITY], vec![2.6, f64::INFINITY]).unwrap();
    Connection::from_strs(
        domain,
        &[
            vec![
                vec!["0", "0"], //
                vec!["0", "-sin(x1)*cos(x1)"],
            ],
            vec![
                vec!["0", "cos(x1)/sin(x1)"], //
                vec!["cos(x1)/sin(x1)", "0"],
            ],
        ],
    )
    .unwrap()
}

fn epsilon(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Fully antisymmetric constant symbols Γ^k_{ij} = λ ε_{ijk} on R³.
///
/// The symmetric part vanishes, so geodesics are straight lines, while the
/// torsion is T(u, v) = 2λ u × v.
pub fn constant_torsion(lambda: f64) -> Connection {
    let n = 3;
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gamma.push(ScalarExpr::constant(lambda * epsilon(i, j, k), n));
            }
        }
    }
    Connection::new(ChartDomain::unbounded(n), gamma).unwrap()
}

/// The four standard entries, with probe boxes.
pub fn standard_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "flat3",
            connection: flat(3),
            probe_lower: vec![-2.0, -2.0, -2.0],
            probe_upper: vec![2.0, 2.0, 2.0],
        },
        CatalogEntry {
            name: "hyperbolic",
            connection: hyperbolic_half_plane(),
            probe_lower: vec![-2.0, 0.5],
            probe_upper: vec![2.0, 3.0],
        },
        CatalogEntry {
            name: "sphere",
            connection: sphere_chart(),
            probe_lower: vec![0.8, -2.0],
            probe_upper: vec![2.3, 2.0],
        },
        CatalogEntry {
            name: "torsion",
            connection: constant_torsion(0.4),
            probe_lower: vec![-2.0, -2.0, -2.0],
            probe_upper: vec![2.0, 2.0, 2.0],
        },
    ]
}

pub fn entry_by_name(name: &str) -> Option<CatalogEntry> {
    standard_entries().into_iter().find(|e| e.name == name)
}

/// A distribution paired with a connection and the verdict the invariance
/// machinery is expected to reach on it.
#[derive(Debug, Clone)]
pub struct InvarianceCase {
    pub name: &'static str,
    pub connection: Connection,
    pub generators: Vec<VectorField>,
    pub probe_lower: Vec<f64>,
    pub probe_upper: Vec<f64>,
    pub expected_invariant: bool,
}

fn fields(
    domain: &ChartDomain,
    specs: &[&[&str]],
) -> Result<Vec<VectorField>, GeometryError> {
    specs
        .iter()
        .map(|s| VectorField::from_strs(domain.clone(), s))
        .collect()
}

/// Distributions whose geodesic invariance is known by hand.
pub fn invariance_cases() -> Vec<InvarianceCase> {
    let r3 = ChartDomain::unbounded(3);
    let hp = half_plane();
    let sphere = sphere_chart();

    vec![
        // Coordinate plane in flat space: closed under every construction.
        InvarianceCase {
            name: "flat-coordinate-plane",
            connection: flat(3),
            generators: fields(&r3, &[&["1", "0", "0"], &["0", "1", "0"]]).unwrap(),
            probe_lower: vec![-2.0, -2.0, -2.0],
            probe_upper: vec![2.0, 2.0, 2.0],
            expected_invariant: true,
        },
        // Pure-torsion connection: symmetric parts of Γ vanish, so the same
        // coordinate plane stays invariant even though Γ ≠ 0.
        InvarianceCase {
            name: "torsion-coordinate-plane",
            connection: constant_torsion(0.4),
            generators: fields(&r3, &[&["1", "0", "0"], &["0", "1", "0"]]).unwrap(),
            probe_lower: vec![-2.0, -2.0, -2.0],
            probe_upper: vec![2.0, 2.0, 2.0],
            expected_invariant: true,
        },
        // Vertical lines in the half-plane are geodesics: ∇_{e2}e2 = −e2/x2.
        InvarianceCase {
            name: "hyperbolic-vertical",
            connection: hyperbolic_half_plane(),
            generators: fields(&hp, &[&["0", "1"]]).unwrap(),
            probe_lower: vec![-2.0, 0.5],
            probe_upper: vec![2.0, 3.0],
            expected_invariant: true,
        },
        // Twisted plane: ⟨X₁:X₂⟩ = e3 has no component along the generators.
        InvarianceCase {
            name: "flat-twisted-plane",
            connection: flat(3),
            generators: fields(&r3, &[&["1", "0", "0"], &["0", "1", "x1"]]).unwrap(),
            probe_lower: vec![-2.0, -2.0, -2.0],
            probe_upper: vec![2.0, 2.0, 2.0],
            expected_invariant: false,
        },
        // Horizontal lines in the half-plane: ∇_{e1}e1 = e2/x2 leaves the span.
        InvarianceCase {
            name: "hyperbolic-horizontal",
            connection: hyperbolic_half_plane(),
            generators: fields(&hp, &[&["1", "0"]]).unwrap(),
            probe_lower: vec![-2.0, 0.5],
            probe_upper: vec![2.0, 3.0],
            expected_invariant: false,
        },
        // Circles of constant latitude are not geodesics away from the
        // equator: ∇_{∂φ}∂φ has a −sinθcosθ polar component.
        InvarianceCase {
            name: "sphere-latitude",
            connection: sphere,
            generators: fields(&sphere_chart().domain().clone(), &[&["0", "1"]]).unwrap(),
            probe_lower: vec![0.7, -2.0],
            probe_upper: vec![1.1, 2.0],
            expected_invariant: false,
        },
    ]
}
