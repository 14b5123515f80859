//! Distributions as spanning families, tangency tests, and the three-way
//! equivalence harness.
//!
//! A distribution is a list of generator fields; membership of a tangent
//! vector is the Euclidean distance from its fiber to the span of the
//! generator values at its base, computed against an orthonormalized span so
//! that rescaling generators cannot move any residual. On top of that sit
//! three independent scans — geodesics staying tangent, symmetric products
//! staying inside, and `∇_X X` staying inside for generator combinations —
//! whose verdicts the equivalence theorem forces to agree.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::flows::{geodesic_samples_clipped, max_abs_diff, FlowError, IntegratorConfig};
use crate::geometry::{
    add_primary, complete_lift_at, geodesic_spray_field, hlft, vertical_lift_field, vlft,
    ChartDomain, Connection, GeometryError, TangentPoint, VectorField,
};

/// Default cut between "numerically zero" and "structurally nonzero"
/// residuals; scan verdicts refuse to classify anything within a factor of
/// ten of it.
pub const DECISION_THRESHOLD: f64 = 1e-5;

/// Finite-difference step for the tangent basis of the distribution
/// submanifold inside the tangent bundle.
const FRAME_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum InvarianceError {
    #[error("distribution needs at least one generator")]
    EmptyDistribution,
    #[error("generator {index} has dimension {got}, expected {expected}")]
    GeneratorDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("generator rank {found} at {point:?} drops below declared rank {declared}")]
    RankDrop {
        point: Vec<f64>,
        declared: usize,
        found: usize,
    },
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// A constant-rank distribution given by spanning vector fields on a chart.
#[derive(Debug, Clone)]
pub struct Distribution {
    generators: Vec<VectorField>,
    domain: ChartDomain,
    rank_tolerance: f64,
    declared_rank: Option<usize>,
}

impl Distribution {
    pub fn new(generators: Vec<VectorField>) -> Result<Distribution, InvarianceError> {
        let first = generators.first().ok_or(InvarianceError::EmptyDistribution)?;
        let domain = first.domain().clone();
        for (index, g) in generators.iter().enumerate() {
            if g.dim() != domain.dim() {
                return Err(InvarianceError::GeneratorDimension {
                    index,
                    expected: domain.dim(),
                    got: g.dim(),
                });
            }
        }
        Ok(Distribution {
            generators,
            domain,
            rank_tolerance: 1e-8,
            declared_rank: None,
        })
    }

    pub fn with_rank_tolerance(mut self, tol: f64) -> Distribution {
        self.rank_tolerance = tol;
        self
    }

    /// Declares the rank the generator matrix must reach at every probed
    /// point; membership queries fail loudly where it drops.
    pub fn with_declared_rank(mut self, rank: usize) -> Distribution {
        self.declared_rank = Some(rank);
        self
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.generators
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Generator values at `x` as the columns of an n×m matrix.
    pub fn generator_matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>, InvarianceError> {
        let n = self.dim();
        let m = self.generators.len();
        let mut mat = DMatrix::zeros(n, m);
        for (j, g) in self.generators.iter().enumerate() {
            let v = g.value_at(x)?;
            for i in 0..n {
                mat[(i, j)] = v[i];
            }
        }
        Ok(mat)
    }

    /// Number of singular values of the generator matrix above the rank
    /// tolerance.
    pub fn rank_at(&self, x: &[f64]) -> Result<usize, InvarianceError> {
        let mat = self.generator_matrix_at(x)?;
        let svd = mat.svd(false, false);
        Ok(svd
            .singular_values
            .iter()
            .filter(|s| **s > self.rank_tolerance)
            .count())
    }

    /// Checks that the pointwise rank is the same across all probes and
    /// returns it.
    pub fn check_constant_rank(&self, probes: &[Vec<f64>]) -> Result<usize, InvarianceError> {
        let mut rank: Option<(usize, &[f64])> = None;
        for p in probes {
            let r = self.rank_at(p)?;
            match rank {
                None => rank = Some((r, p)),
                Some((r0, _)) if r == r0 => {}
                Some((r0, _)) => {
                    let (declared, found) = if r < r0 { (r0, r) } else { (r, r0) };
                    return Err(InvarianceError::RankDrop {
                        point: p.clone(),
                        declared,
                        found,
                    });
                }
            }
        }
        Ok(rank.map(|(r, _)| r).unwrap_or(0))
    }

    /// The value of `Σ coeffs_i · X_i` at `x`: a fiber that lies in the
    /// distribution by construction.
    pub fn combination_at(&self, x: &[f64], coeffs: &[f64]) -> Result<Vec<f64>, InvarianceError> {
        if coeffs.len() != self.generators.len() {
            return Err(InvarianceError::CoefficientLength {
                expected: self.generators.len(),
                got: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        for (c, g) in coeffs.iter().zip(&self.generators) {
            let v = g.value_at(x)?;
            for (o, vi) in out.iter_mut().zip(&v) {
                *o += c * vi;
            }
        }
        Ok(out)
    }
}

/// Distance from `w` to the column span of `a`, using the singular directions
/// above `tol`; also reports the rank used.
fn span_residual(a: &DMatrix<f64>, w: &[f64], tol: f64) -> (f64, usize) {
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut resid = DVector::from_column_slice(w);
    let mut rank = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > tol {
            rank += 1;
            let col = u.column(i);
            let coeff = col.dot(&resid);
            resid -= col * coeff;
        }
    }
    (resid.norm(), rank)
}

/// Euclidean distance from the fiber of `v` to the distribution's plane at
/// the base of `v`; zero exactly when `v` is tangent to the distribution.
pub fn membership_residual(d: &Distribution, v: &TangentPoint) -> Result<f64, InvarianceError> {
    d.domain.check_point(&v.base)?;
    let mat = d.generator_matrix_at(&v.base)?;
    let (residual, rank) = span_residual(&mat, &v.fiber, d.rank_tolerance);
    if let Some(declared) = d.declared_rank {
        if rank < declared {
            return Err(InvarianceError::RankDrop {
                point: v.base.clone(),
                declared,
                found: rank,
            });
        }
    }
    Ok(residual)
}

/// Worst membership residual of `(x, X(x))` over the probe points.
pub fn vector_field_in_distribution(
    d: &Distribution,
    x_field: &VectorField,
    probes: &[Vec<f64>],
) -> Result<f64, InvarianceError> {
    let mut worst = 0.0f64;
    for p in probes {
        let v = TangentPoint::new(p.clone(), x_field.value_at(p)?)?;
        worst = worst.max(membership_residual(d, &v)?);
    }
    Ok(worst)
}

/// Outcome of a scan that integrates trajectories: the worst residual seen,
/// how many probes ran, and how many trajectories were cut short at the
/// chart boundary (their accepted prefix still contributes).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanReport {
    pub worst: f64,
    pub probes: usize,
    pub truncated: usize,
}

/// Launches a geodesic from every probe `(base, coefficients)` — the initial
/// velocity is the generator combination, hence exactly tangent — over
/// `[-horizon, horizon]` and records the worst membership residual of
/// `(γ(t), γ′(t))` along the way.
pub fn geodesic_invariance_scan(
    c: &Connection,
    d: &Distribution,
    probes: &[(Vec<f64>, Vec<f64>)],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<ScanReport, InvarianceError> {
    let mut worst = 0.0f64;
    let mut truncated = 0;
    for (base, coeffs) in probes {
        let v0 = d.combination_at(base, coeffs)?;
        for dir in [horizon, -horizon] {
            let (samples, cut) = geodesic_samples_clipped(c, base, &v0, dir, cfg)?;
            if cut {
                truncated += 1;
            }
            for s in &samples {
                let v = TangentPoint::from_flat(&s.state);
                worst = worst.max(membership_residual(d, &v)?);
            }
        }
    }
    Ok(ScanReport {
        worst,
        probes: probes.len(),
        truncated,
    })
}

/// Worst membership residual of the symbolic `⟨X_i : X_j⟩` over all unordered
/// generator pairs (equal pairs included) and all probe points.
pub fn symmetric_closure_scan(
    c: &Connection,
    d: &Distribution,
    probes: &[Vec<f64>],
) -> Result<f64, InvarianceError> {
    let mut worst = 0.0f64;
    let gens = d.generators();
    for i in 0..gens.len() {
        for j in i..gens.len() {
            let product = c.symmetric_product(&gens[i], &gens[j])?;
            worst = worst.max(vector_field_in_distribution(d, &product, probes)?);
        }
    }
    Ok(worst)
}

/// Worst membership residual of `∇_S S` where `S` runs over unit and
/// pairwise-sum combinations of the generators. Single generators alone can
/// miss a failure that polarization exposes: `∇_{X+Y}(X+Y)` picks up the
/// cross term `⟨X:Y⟩`.
pub fn nabla_xx_scan(
    c: &Connection,
    d: &Distribution,
    probes: &[Vec<f64>],
) -> Result<f64, InvarianceError> {
    let mut worst = 0.0f64;
    for coeffs in crate::sample::coefficient_probes(d.generators().len()) {
        let section = VectorField::linear_combination(d.generators(), &coeffs)?;
        let nabla = c.symmetric_product(&section, &section)?.scale(0.5);
        worst = worst.max(vector_field_in_distribution(d, &nabla, probes)?);
    }
    Ok(worst)
}

/// How a scan's worst residual relates to the decision threshold: clearly
/// below, clearly above (by a factor ≥ 10), or too close to call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Holds,
    Fails,
    Indeterminate,
}

impl Classification {
    pub fn classify(worst: f64, threshold: f64) -> Classification {
        if worst <= threshold {
            Classification::Holds
        } else if worst >= 10.0 * threshold {
            Classification::Fails
        } else {
            Classification::Indeterminate
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Classification::Holds)
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Holds => "holds",
            Classification::Fails => "fails",
            Classification::Indeterminate => "indeterminate",
        })
    }
}

/// The three scan verdicts side by side. The equivalence theorem says the
/// three classifications must agree whenever the margins are decisive.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceVerdict {
    pub geodesic_invariant: Classification,
    pub geodesic_worst: f64,
    pub symprod_closed: Classification,
    pub symprod_worst: f64,
    pub nabla_xx_closed: Classification,
    pub nabla_xx_worst: f64,
    pub threshold: f64,
    pub truncated_probes: usize,
    pub probes: String,
}

impl InvarianceVerdict {
    pub fn classifications(&self) -> [Classification; 3] {
        [
            self.geodesic_invariant,
            self.symprod_closed,
            self.nabla_xx_closed,
        ]
    }

    /// Any scan too close to the threshold to call.
    pub fn indeterminate(&self) -> bool {
        self.classifications()
            .iter()
            .any(|c| *c == Classification::Indeterminate)
    }

    /// All three scans decisive and identical.
    pub fn agreement(&self) -> bool {
        let [a, b, c] = self.classifications();
        !self.indeterminate() && a == b && b == c
    }

    /// The common verdict, when there is one.
    pub fn invariant(&self) -> Option<bool> {
        if self.agreement() {
            Some(self.geodesic_invariant.holds())
        } else {
            None
        }
    }
}

/// Runs the geodesic, symmetric-product, and `∇_X X` scans over a shared
/// probe set and classifies each against `threshold`.
pub fn theorem_equivalence_harness(
    c: &Connection,
    d: &Distribution,
    probes: &[(Vec<f64>, Vec<f64>)],
    horizon: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
) -> Result<InvarianceVerdict, InvarianceError> {
    let bases: Vec<Vec<f64>> = probes.iter().map(|(b, _)| b.clone()).collect();
    d.check_constant_rank(&bases)?;
    let geo = geodesic_invariance_scan(c, d, probes, horizon, cfg)?;
    let sym = symmetric_closure_scan(c, d, &bases)?;
    let nxx = nabla_xx_scan(c, d, &bases)?;
    Ok(InvarianceVerdict {
        geodesic_invariant: Classification::classify(geo.worst, threshold),
        geodesic_worst: geo.worst,
        symprod_closed: Classification::classify(sym, threshold),
        symprod_worst: sym,
        nabla_xx_closed: Classification::classify(nxx, threshold),
        nabla_xx_worst: nxx,
        threshold,
        truncated_probes: geo.truncated,
        probes: format!(
            "{} probe points, geodesic horizon ±{horizon}, {} trajectories truncated at the boundary",
            probes.len(),
            geo.truncated
        ),
    })
}

/// Residual of the pointwise decomposition of the complete lift:
/// `X^C(v) = X^H(v) +₁ vlft(v, ∇_v X + T(X(x), v))`. Exact in coordinates.
pub fn xc_xh_identity_check(
    c: &Connection,
    x_field: &VectorField,
    v: &TangentPoint,
) -> Result<f64, InvarianceError> {
    let lhs = complete_lift_at(x_field, v)?;
    let x_value = x_field.value_at(&v.base)?;
    let nabla_v_x = c.covariant_derivative_at(v, x_field)?;
    let torsion = c.torsion_at(&v.base, &x_value, &v.fiber)?;
    let correction: Vec<f64> = nabla_v_x.iter().zip(&torsion).map(|(a, b)| a + b).collect();
    let rhs = add_primary(&hlft(c, v, &x_value)?, &vlft(v, &correction)?)?;
    Ok(max_abs_diff(&lhs.flat(), &rhs.flat()))
}

/// Residual of the nested-bracket identity `[X^V, [Z, Y^V]] = ⟨X:Y⟩^V` at a
/// tangent point, with every field built symbolically on the tangent bundle
/// and brackets taken by exact expression algebra.
pub fn xvzyv_identity_check(
    c: &Connection,
    x_field: &VectorField,
    y_field: &VectorField,
    v: &TangentPoint,
) -> Result<f64, InvarianceError> {
    let xv = vertical_lift_field(x_field)?;
    let yv = vertical_lift_field(y_field)?;
    let spray = geodesic_spray_field(c)?;
    let nested = xv.lie_bracket(&spray.lie_bracket(&yv)?)?;
    let rhs = vertical_lift_field(&c.symmetric_product(x_field, y_field)?)?;
    let p = v.flat();
    Ok(max_abs_diff(&nested.value_at(&p)?, &rhs.value_at(&p)?))
}

/// Tangency of the horizontal lift of a section `S = Σ coeffs_i · X_i` to
/// the distribution submanifold of the tangent bundle, at `v = α·S(x)`.
///
/// The tangent space of the submanifold at `v` is spanned by finite
/// differences of the parametrization `(y, a) ↦ (y, Σ a_i X_i(y))`; the
/// residual is the component of `S^H(v)` outside that span. Note a single
/// generator can be vacuously tangent on a non-invariant distribution —
/// combinations are what separate the cases, mirroring the `∇_S S` scan.
pub fn xh_restricted_check(
    c: &Connection,
    d: &Distribution,
    section: &[f64],
    alpha: f64,
    x: &[f64],
) -> Result<f64, InvarianceError> {
    let m = d.generators().len();
    if section.len() != m {
        return Err(InvarianceError::CoefficientLength {
            expected: m,
            got: section.len(),
        });
    }
    let n = d.dim();
    let coeffs: Vec<f64> = section.iter().map(|s| alpha * s).collect();

    // columns of the parametrization's Jacobian by central differences
    let embed = |y: &[f64], a: &[f64]| -> Result<Vec<f64>, InvarianceError> {
        let mut point = y.to_vec();
        point.extend(d.combination_at(y, a)?);
        Ok(point)
    };
    let mut basis = DMatrix::zeros(2 * n, n + m);
    for k in 0..n + m {
        let (mut yp, mut ap) = (x.to_vec(), coeffs.clone());
        let (mut ym, mut am) = (x.to_vec(), coeffs.clone());
        if k < n {
            yp[k] += FRAME_FD_STEP;
            ym[k] -= FRAME_FD_STEP;
        } else {
            ap[k - n] += FRAME_FD_STEP;
            am[k - n] -= FRAME_FD_STEP;
        }
        let plus = embed(&yp, &ap)?;
        let minus = embed(&ym, &am)?;
        for i in 0..2 * n {
            basis[(i, k)] = (plus[i] - minus[i]) / (2.0 * FRAME_FD_STEP);
        }
    }

    let v = TangentPoint::new(x.to_vec(), d.combination_at(x, &coeffs)?)?;
    let s_value = d.combination_at(x, section)?;
    let lift = hlft(c, &v, &s_value)?;
    let mut w = lift.slot_b.clone();
    w.extend_from_slice(&lift.slot_c);
    let (residual, _) = span_residual(&basis, &w, d.rank_tolerance);
    Ok(residual)
}
