//! Property suites: every identity the library claims, run over seeded draws
//! and reported as named pass/fail checks.
//!
//! Each suite returns a [`SuiteReport`] whose checks carry the measured worst
//! value and the constraint it was held against, so a report is useful both
//! as a gate (the `pass` flags) and as a record of actual margins. Identical
//! `(seed, draws)` inputs produce identical reports, bit for bit.

use serde::Serialize;
use thiserror::Error;

use crate::bch::{asymptotic_check, bch1, bch2, commutator_word, WeightedField};
use crate::catalog;
use crate::flows::{
    covariant_derivative_via_transport, flow_group_deviation, flow_with_steps, geodesic,
    max_abs, max_abs_diff, parallel_transport, transport_along_field, transport_difference_check,
    FlowError, IntegratorConfig, SampledCurve,
};
use crate::geometry::{
    add_primary, add_secondary, complete_lift_at, hlft, horizontal_lift_field, involution,
    sub_primary, tangent_map_at, vertical_lift_field, vlft, ChartDomain,
    GeometryError, TangentPoint, TtmPoint, VectorField,
};
use crate::invariance::{xc_xh_identity_check, xvzyv_identity_check, InvarianceError};
use crate::sample;
use crate::symprod::{
    corollary_closed_form, crampin_word, crampin_word_closed_form, upsilon, UpsilonKind,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Invariance(#[from] InvarianceError),
}

/// One named measurement with the constraint it was checked against.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub constraint: String,
    pub pass: bool,
}

impl CheckResult {
    fn le(name: impl Into<String>, value: f64, bound: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            value,
            constraint: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    fn ge(name: impl Into<String>, value: f64, bound: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            value,
            constraint: format!(">= {bound:e}"),
            pass: value >= bound,
        }
    }

    fn in_range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            value,
            constraint: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

/// A suite's checks plus the inputs that pin its randomness.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub draws: usize,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, draws: usize, checks: Vec<CheckResult>) -> SuiteReport {
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport {
            suite: suite.to_string(),
            seed,
            draws,
            checks,
            pass,
        }
    }
}

fn random_ttm(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> TtmPoint {
    TtmPoint::new(
        sample::vector(rng, n, -2.0, 2.0),
        sample::vector(rng, n, -2.0, 2.0),
        sample::vector(rng, n, -2.0, 2.0),
        sample::vector(rng, n, -2.0, 2.0),
    )
    .expect("matched dimensions")
}

/// Exact coordinate identities of the double tangent bundle, the lifts, and
/// the torsion, over seeded random draws on every catalog connection.
pub fn lemma_suite(seed: u64, draws: usize) -> Result<SuiteReport, VerifyError> {
    let mut rng = sample::rng(seed);
    let mut checks = Vec::new();

    // structural identities of the two additions, no connection involved
    let mut interchange = 0.0f64;
    let mut scalings = 0.0f64;
    let mut invol = 0.0f64;
    for _ in 0..draws {
        let n = 1 + (sample::vector(&mut rng, 1, 0.0, 3.0)[0] as usize);
        let x = sample::vector(&mut rng, n, -2.0, 2.0);
        let (a1, a2) = (
            sample::vector(&mut rng, n, -2.0, 2.0),
            sample::vector(&mut rng, n, -2.0, 2.0),
        );
        let (b1, b2) = (
            sample::vector(&mut rng, n, -2.0, 2.0),
            sample::vector(&mut rng, n, -2.0, 2.0),
        );
        let u = TtmPoint::new(x.clone(), a1.clone(), b1.clone(), sample::vector(&mut rng, n, -2.0, 2.0)).unwrap();
        let v = TtmPoint::new(x.clone(), a2.clone(), b1.clone(), sample::vector(&mut rng, n, -2.0, 2.0)).unwrap();
        let w = TtmPoint::new(x.clone(), a1.clone(), b2.clone(), sample::vector(&mut rng, n, -2.0, 2.0)).unwrap();
        let z = TtmPoint::new(x.clone(), a2, b2, sample::vector(&mut rng, n, -2.0, 2.0)).unwrap();
        let lhs = add_primary(&add_secondary(&u, &v)?, &add_secondary(&w, &z)?)?;
        let rhs = add_secondary(&add_primary(&u, &w)?, &add_primary(&v, &z)?)?;
        interchange = interchange.max(max_abs_diff(&lhs.flat(), &rhs.flat()));

        let p = random_ttm(&mut rng, n);
        let ks = sample::vector(&mut rng, 2, -3.0, 3.0);
        let lhs = crate::geometry::scale_primary(ks[0], &crate::geometry::scale_secondary(ks[1], &p));
        let rhs = crate::geometry::scale_secondary(ks[1], &crate::geometry::scale_primary(ks[0], &p));
        scalings = scalings.max(max_abs_diff(&lhs.flat(), &rhs.flat()));

        // the involution carries +₁ to +₂ on a compatible pair
        let q = TtmPoint::new(
            p.base.clone(),
            p.slot_a.clone(),
            sample::vector(&mut rng, n, -2.0, 2.0),
            sample::vector(&mut rng, n, -2.0, 2.0),
        )
        .unwrap();
        let lhs = involution(&add_primary(&p, &q)?);
        let rhs = add_secondary(&involution(&p), &involution(&q))?;
        invol = invol.max(max_abs_diff(&lhs.flat(), &rhs.flat()));
    }
    checks.push(CheckResult::le("additions interchange", interchange, 1e-10));
    checks.push(CheckResult::le("scalings commute across structures", scalings, 1e-10));
    checks.push(CheckResult::le("involution exchanges the additions", invol, 1e-10));

    // lift identities with random polynomial fields on a free chart
    let dom = ChartDomain::unbounded(3);
    let mut complete_vs_tangent = 0.0f64;
    let mut vertical_secondary = 0.0f64;
    let mut bracket_assembly = 0.0f64;
    for _ in 0..draws {
        let x_field = sample::polynomial_field(&mut rng, &dom, 1.0)?;
        let y_field = sample::polynomial_field(&mut rng, &dom, 1.0)?;
        let v = sample::tangent_point(&mut rng, &[-1.5; 3], &[1.5; 3], 2.0);

        let lhs = complete_lift_at(&x_field, &v)?;
        let rhs = involution(&tangent_map_at(&x_field, &v)?);
        complete_vs_tangent = complete_vs_tangent.max(max_abs_diff(&lhs.flat(), &rhs.flat()));

        let w = random_ttm(&mut rng, 3);
        let z = sample::vector(&mut rng, 3, -2.0, 2.0);
        let u = TangentPoint::new(w.base.clone(), w.slot_b.clone()).unwrap();
        let anchor = TangentPoint::new(w.base.clone(), w.slot_a.clone()).unwrap();
        let lhs = add_secondary(&w, &involution(&vlft(&u, &z)?))?;
        let rhs = add_primary(&w, &vlft(&anchor, &z)?)?;
        vertical_secondary = vertical_secondary.max(max_abs_diff(&lhs.flat(), &rhs.flat()));

        let bracket = x_field.lie_bracket(&y_field)?;
        let p = v.base.clone();
        let xv = TangentPoint::new(p.clone(), x_field.value_at(&p)?)?;
        let yv = TangentPoint::new(p.clone(), y_field.value_at(&p)?)?;
        let lhs = sub_primary(
            &tangent_map_at(&y_field, &xv)?,
            &involution(&tangent_map_at(&x_field, &yv)?),
        )?;
        let rhs = vlft(&yv, &bracket.value_at(&p)?)?;
        bracket_assembly = bracket_assembly.max(max_abs_diff(&lhs.flat(), &rhs.flat()));
    }
    checks.push(CheckResult::le(
        "complete lift is the involuted tangent map",
        complete_vs_tangent,
        1e-10,
    ));
    checks.push(CheckResult::le(
        "vertical lift secondary identity",
        vertical_secondary,
        1e-10,
    ));
    checks.push(CheckResult::le(
        "tangent maps assemble the bracket",
        bracket_assembly,
        1e-10,
    ));

    // connection-bound identities on every catalog entry
    for entry in catalog::standard_entries() {
        let c = &entry.connection;
        let (lo, hi) = (&entry.probe_lower, &entry.probe_upper);
        let mut torsion_split = 0.0f64;
        let mut complete_split = 0.0f64;
        let mut nested = 0.0f64;
        for _ in 0..draws {
            let x = sample::point_in_box(&mut rng, lo, hi);
            let uu = sample::vector(&mut rng, c.dim(), -2.0, 2.0);
            let vv = sample::vector(&mut rng, c.dim(), -2.0, 2.0);
            let v = TangentPoint::new(x.clone(), vv.clone())?;
            let u = TangentPoint::new(x.clone(), uu.clone())?;
            let lhs = sub_primary(&hlft(c, &v, &uu)?, &involution(&hlft(c, &u, &vv)?))?;
            let rhs = vlft(&v, &c.torsion_at(&x, &vv, &uu)?)?;
            torsion_split = torsion_split.max(max_abs_diff(&lhs.flat(), &rhs.flat()));

            let x_field = sample::polynomial_field(&mut rng, c.domain(), 1.0)?;
            let y_field = sample::polynomial_field(&mut rng, c.domain(), 1.0)?;
            complete_split = complete_split.max(xc_xh_identity_check(c, &x_field, &v)?);
            nested = nested.max(xvzyv_identity_check(c, &x_field, &y_field, &v)?);
        }
        checks.push(CheckResult::le(
            format!("horizontal antisymmetrization is torsion ({})", entry.name),
            torsion_split,
            1e-10,
        ));
        checks.push(CheckResult::le(
            format!("complete splits into horizontal plus vertical ({})", entry.name),
            complete_split,
            1e-10,
        ));
        checks.push(CheckResult::le(
            format!("nested vertical brackets give the product ({})", entry.name),
            nested,
            1e-10,
        ));
    }

    Ok(SuiteReport::new("lemmas", seed, draws, checks))
}

/// Flow-word exponential checks: first-order cancellation of the eight-letter
/// word, exactness on degenerate words, and the cubic truncation residual.
pub fn bch_suite(seed: u64, draws: usize) -> Result<SuiteReport, VerifyError> {
    let mut rng = sample::rng(seed);
    let cfg = IntegratorConfig::default();
    let mut checks = Vec::new();

    // the eight-letter alternating word of lifted legs sums to zero at first
    // order for every connection and every field pair
    for entry in catalog::standard_entries() {
        let c = &entry.connection;
        let x1 = sample::polynomial_field(&mut rng, c.domain(), 1.0)?;
        let x2 = sample::polynomial_field(&mut rng, c.domain(), 1.0)?;
        let h1 = horizontal_lift_field(c, &x1)?;
        let h2 = horizontal_lift_field(c, &x2)?;
        let v1 = vertical_lift_field(&x1)?;
        let v2 = vertical_lift_field(&x2)?;
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let t = sample::vector(&mut rng, 1, 0.05, 0.5)[0];
            let word = [
                WeightedField::new(t, &h2),
                WeightedField::new(t, &v1),
                WeightedField::new(-t, &h2),
                WeightedField::new(-t, &v1),
                WeightedField::new(t, &h1),
                WeightedField::new(t, &v2),
                WeightedField::new(-t, &h1),
                WeightedField::new(-t, &v2),
            ];
            let first_order = bch1(&word)?;
            let base = sample::point_in_box(&mut rng, &entry.probe_lower, &entry.probe_upper);
            let fiber = sample::vector(&mut rng, c.dim(), -2.0, 2.0);
            let mut p = base;
            p.extend(fiber);
            worst = worst.max(max_abs(&first_order.value_at(&p)?));
        }
        checks.push(CheckResult::le(
            format!("eight-letter word has no first-order term ({})", entry.name),
            worst,
            1e-10,
        ));
    }

    // a single letter is exactly its own exponential
    let dom = ChartDomain::unbounded(2);
    let mut solo = 0.0f64;
    let mut commuting = 0.0f64;
    let mut second_order = 0.0f64;
    for _ in 0..draws {
        let x_field = sample::polynomial_field(&mut rng, &dom, 0.4)?;
        let x0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let t = sample::vector(&mut rng, 1, -0.5, 0.5)[0];
        let report = asymptotic_check(&[(t, &x_field)], &x0, &cfg)?;
        solo = solo.max(report.residual);

        // coordinate-split pair with vanishing bracket
        let a = VectorField::from_strs(dom.clone(), &["1", "0"])?;
        let b = VectorField::from_strs(dom.clone(), &["0", "x2"])?;
        let s = sample::vector(&mut rng, 2, -0.5, 0.5);
        let report = asymptotic_check(&[(s[0], &a), (s[1], &b)], &x0, &cfg)?;
        commuting = commuting.max(report.residual);

        // BCH₂ of the four-letter commutator word is t²[X, Y]
        let y_field = sample::polynomial_field(&mut rng, &dom, 0.4)?;
        let tt = sample::vector(&mut rng, 1, 0.1, 0.4)[0];
        let word = commutator_word(&x_field, &y_field, tt);
        let weighted: Vec<WeightedField> = word
            .iter()
            .map(|(t, f)| WeightedField::new(*t, f))
            .collect();
        let quadratic = bch2(&weighted)?;
        let reference = x_field.lie_bracket(&y_field)?.scale(tt * tt);
        let p = sample::vector(&mut rng, 2, -1.0, 1.0);
        second_order =
            second_order.max(max_abs_diff(&quadratic.value_at(&p)?, &reference.value_at(&p)?));
    }
    checks.push(CheckResult::le("single letter is its own exponential", solo, 1e-9));
    checks.push(CheckResult::le("commuting letters collapse exactly", commuting, 1e-9));
    checks.push(CheckResult::le(
        "second-order term matches the commutator",
        second_order,
        1e-10,
    ));

    // the truncated exponential misses the word by O(t³)
    let x = VectorField::from_strs(dom.clone(), &["x2", "0"])?;
    let y = VectorField::from_strs(dom, &["0", "x1"])?;
    let residual_at = |t: f64| -> Result<f64, VerifyError> {
        let word = commutator_word(&x, &y, t);
        Ok(asymptotic_check(&word, &[0.7, 0.4], &cfg)?.residual)
    };
    let ratio = residual_at(0.2)? / residual_at(0.1)?;
    checks.push(CheckResult::in_range(
        "truncation residual decays cubically",
        ratio,
        6.0,
        10.0,
    ));

    Ok(SuiteReport::new("bch", seed, draws, checks))
}

/// Integration-quality checks: group action, transport round trips, geodesic
/// closed forms, the transport-difference identity, and the flow-word closed
/// forms that feed the estimators.
pub fn transport_suite(seed: u64, draws: usize) -> Result<SuiteReport, VerifyError> {
    let mut rng = sample::rng(seed);
    let cfg = IntegratorConfig::default();
    let mut checks = Vec::new();

    // flows compose like a one-parameter group
    let flat3 = catalog::flat(3);
    let mut group = 0.0f64;
    for _ in 0..draws {
        let field = sample::polynomial_field(&mut rng, flat3.domain(), 0.3)?;
        let x0 = sample::vector(&mut rng, 3, -1.0, 1.0);
        group = group.max(flow_group_deviation(&field, &x0, 0.1, 0.15, &cfg)?);
    }
    checks.push(CheckResult::le("flow composition is a group action", group, 1e-7));

    // transports on the curved half-plane
    let hyp = catalog::hyperbolic_half_plane();
    let (hlo, hhi) = (vec![-0.6, 0.9], vec![0.6, 1.5]);
    let mut roundtrip = 0.0f64;
    let mut linearity = 0.0f64;
    let mut velocity_parallel = 0.0f64;
    for _ in 0..draws {
        let field = sample::polynomial_field(&mut rng, hyp.domain(), 0.25)?;
        let x0 = sample::point_in_box(&mut rng, &hlo, &hhi);
        let v0 = sample::vector(&mut rng, 2, -1.5, 1.5);
        let steps = cfg.substeps(0.15);
        let out = transport_along_field(&hyp, &field, &x0, &v0, 0.0, 0.15, steps)?;
        let back = transport_along_field(&hyp, &field, &x0, &out.vector, 0.15, 0.0, steps)?;
        roundtrip = roundtrip.max(max_abs_diff(&back.vector, &v0));

        let w0 = sample::vector(&mut rng, 2, -1.5, 1.5);
        let ks = sample::vector(&mut rng, 2, -2.0, 2.0);
        let combined: Vec<f64> = v0
            .iter()
            .zip(&w0)
            .map(|(a, b)| ks[0] * a + ks[1] * b)
            .collect();
        let tv = transport_along_field(&hyp, &field, &x0, &v0, 0.0, 0.15, steps)?;
        let tw = transport_along_field(&hyp, &field, &x0, &w0, 0.0, 0.15, steps)?;
        let tc = transport_along_field(&hyp, &field, &x0, &combined, 0.0, 0.15, steps)?;
        let recombined: Vec<f64> = tv
            .vector
            .iter()
            .zip(&tw.vector)
            .map(|(a, b)| ks[0] * a + ks[1] * b)
            .collect();
        linearity = linearity.max(max_abs_diff(&tc.vector, &recombined));

        // the defining property of geodesics: γ′ is parallel along γ
        let u0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let end = geodesic(&hyp, &x0, &u0, 0.5, &cfg)?;
        let curve = SampledCurve::from_geodesic(&hyp, &x0, &u0, 0.5, 2 * cfg.substeps(0.5))?;
        let carried = parallel_transport(&hyp, &curve, &u0, 0.0, 0.5, cfg.substeps(0.5))?;
        velocity_parallel = velocity_parallel.max(max_abs_diff(&carried, &end.fiber));
    }
    checks.push(CheckResult::le("parallel transport round-trips", roundtrip, 1e-7));
    checks.push(CheckResult::le(
        "transport is linear in the carried vector",
        linearity,
        1e-9,
    ));
    checks.push(CheckResult::le(
        "geodesic velocity stays parallel",
        velocity_parallel,
        1e-7,
    ));

    // closed-form geodesics of the half-plane
    let horizontal_start = geodesic(&hyp, &[0.0, 1.0], &[1.0, 0.0], 1.0, &cfg)?;
    let sech = 1.0 / 1.0f64.cosh();
    let expected = [1.0f64.tanh(), sech, sech * sech, -sech * 1.0f64.tanh()];
    let geo_gap = max_abs_diff(&horizontal_start.flat(), &expected);
    let vertical_start = geodesic(&hyp, &[0.0, 1.0], &[0.0, 1.0], 1.0, &cfg)?;
    let vexp = [0.0, 1.0f64.exp(), 0.0, 1.0f64.exp()];
    let geo_gap = geo_gap.max(max_abs_diff(&vertical_start.flat(), &vexp));
    checks.push(CheckResult::le(
        "half-plane geodesics match closed forms",
        geo_gap,
        1e-6,
    ));

    // covariant derivative recovered from transport differences
    let mut recovered = 0.0f64;
    for _ in 0..draws.min(25) {
        let direction = sample::polynomial_field(&mut rng, hyp.domain(), 0.5)?;
        let target = sample::polynomial_field(&mut rng, hyp.domain(), 0.5)?;
        let x = sample::point_in_box(&mut rng, &hlo, &hhi);
        let numeric = covariant_derivative_via_transport(&hyp, &direction, &target, &x, 1e-4, &cfg)?;
        let dir_v = TangentPoint::new(x.clone(), direction.value_at(&x)?)?;
        let symbolic = hyp.covariant_derivative_at(&dir_v, &target)?;
        recovered = recovered.max(max_abs_diff(&numeric, &symbolic));
    }
    checks.push(CheckResult::le(
        "covariant derivative from transport differences",
        recovered,
        1e-6,
    ));

    // and the differencing is second order in the probe step
    let direction = VectorField::from_strs(hyp.domain().clone(), &["x2", "0.3*x1"])?;
    let target = VectorField::from_strs(hyp.domain().clone(), &["0.5*x1*x2", "x1"])?;
    let x = [0.3, 1.1];
    let dir_v = TangentPoint::new(x.to_vec(), direction.value_at(&x)?)?;
    let symbolic = hyp.covariant_derivative_at(&dir_v, &target)?;
    let err_at = |h: f64| -> Result<f64, VerifyError> {
        let numeric = covariant_derivative_via_transport(&hyp, &direction, &target, &x, h, &cfg)?;
        Ok(max_abs_diff(&numeric, &symbolic))
    };
    checks.push(CheckResult::in_range(
        "transport differencing is second order",
        err_at(0.02)? / err_at(0.01)?,
        3.0,
        5.0,
    ));

    // torsion: bends transport, leaves geodesics alone, and its transport
    // gap is exactly the integrated correction
    let tor = catalog::constant_torsion(0.4);
    let sym_part = tor.torsion_free_part();
    let x0 = [0.2, -0.1, 0.3];
    let u0 = [0.8, 0.3, -0.5];
    let v0 = [0.1, 1.0, 0.4];
    let steps = cfg.substeps(0.5);
    let full = transport_along_field(
        &tor,
        &VectorField::constant(tor.domain().clone(), &u0)?,
        &x0,
        &v0,
        0.0,
        0.5,
        steps,
    )?;
    let sym = transport_along_field(
        &sym_part,
        &VectorField::constant(tor.domain().clone(), &u0)?,
        &x0,
        &v0,
        0.0,
        0.5,
        steps,
    )?;
    checks.push(CheckResult::ge(
        "torsion bends parallel transport",
        max_abs_diff(&full.vector, &sym.vector),
        1e-3,
    ));
    let g_full = geodesic(&tor, &x0, &u0, 0.5, &cfg)?;
    let g_sym = geodesic(&sym_part, &x0, &u0, 0.5, &cfg)?;
    checks.push(CheckResult::le(
        "torsion leaves geodesics alone",
        max_abs_diff(&g_full.flat(), &g_sym.flat()),
        1e-12,
    ));

    let mut identity_dev = 0.0f64;
    let mut magnitude_floor = f64::INFINITY;
    for _ in 0..draws.min(20) {
        let x0 = sample::vector(&mut rng, 3, -1.0, 1.0);
        let u0 = sample::vector(&mut rng, 3, 0.5, 1.5);
        let v0 = sample::vector(&mut rng, 3, 0.5, 1.5);
        let t = sample::vector(&mut rng, 1, 0.2, 0.5)[0];
        let report = transport_difference_check(&tor, &x0, &u0, &v0, t, &cfg)?;
        identity_dev = identity_dev.max(report.deviation);
        magnitude_floor = magnitude_floor.min(report.difference_magnitude);
    }
    checks.push(CheckResult::le(
        "transport gap equals the torsion integral",
        identity_dev,
        1e-5,
    ));
    checks.push(CheckResult::ge(
        "transport gap is materially nonzero under torsion",
        magnitude_floor,
        1e-3,
    ));

    let mut trivial = 0.0f64;
    for _ in 0..draws.min(10) {
        let x0 = sample::point_in_box(&mut rng, &hlo, &hhi);
        let u0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let v0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let report = transport_difference_check(&hyp, &x0, &u0, &v0, 0.4, &cfg)?;
        trivial = trivial.max(report.deviation.max(report.difference_magnitude));
    }
    checks.push(CheckResult::le(
        "transport gap vanishes without torsion",
        trivial,
        1e-8,
    ));

    // closed forms behind the estimators
    let mut mixed_word = 0.0f64;
    let mut zero_fiber = 0.0f64;
    for _ in 0..draws.min(20) {
        let x_field = sample::polynomial_field(&mut rng, hyp.domain(), 0.5)?;
        let y_field = sample::polynomial_field(&mut rng, hyp.domain(), 0.5)?;
        let v = sample::tangent_point(&mut rng, &hlo, &hhi, 1.5);
        let t = sample::vector(&mut rng, 1, 0.02, 0.06)[0];
        let word = crampin_word(&hyp, &x_field, &y_field, &v, t, cfg.estimator_substeps(t))?;
        let closed = crampin_word_closed_form(&hyp, &x_field, &y_field, &v, t, &cfg)?;
        mixed_word = mixed_word.max(max_abs_diff(&word.flat(), &closed.flat()));

        let x = v.base.clone();
        let at_zero = TangentPoint::zero_vector(x.clone());
        let composed = upsilon(UpsilonKind::U1, &hyp, &x_field, &y_field, &at_zero, t, &cfg)?;
        let closed = corollary_closed_form(&hyp, &x_field, &y_field, &x, t, &cfg)?;
        zero_fiber = zero_fiber.max(max_abs_diff(&composed.fiber, &closed.fiber));
    }
    checks.push(CheckResult::le(
        "mixed-word closed form matches the flows",
        mixed_word,
        1e-7,
    ));
    checks.push(CheckResult::le(
        "zero-fiber curve matches its closed form",
        zero_fiber,
        1e-7,
    ));

    // fourth-order integrator: halving the step cuts the error ~16x
    let dom2 = ChartDomain::unbounded(2);
    let rotation = VectorField::from_strs(dom2, &["-x2", "x1"])?;
    let err_with = |steps: usize| -> Result<f64, VerifyError> {
        let end = flow_with_steps(&rotation, &[1.0, 0.0], 1.0, steps)?;
        Ok(max_abs_diff(&end, &[1.0f64.cos(), 1.0f64.sin()]))
    };
    checks.push(CheckResult::in_range(
        "integrator error falls fourth order",
        err_with(25)? / err_with(50)?,
        12.0,
        20.0,
    ));

    Ok(SuiteReport::new("transport", seed, draws, checks))
}

/// All suites in a fixed order.
pub fn all_suites(seed: u64, draws: usize) -> Result<Vec<SuiteReport>, VerifyError> {
    Ok(vec![
        lemma_suite(seed, draws)?,
        bch_suite(seed, draws)?,
        transport_suite(seed, draws)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_suite_passes_and_is_deterministic() {
        let a = lemma_suite(42, 30).unwrap();
        assert!(a.pass, "failing checks: {:?}", failing(&a));
        let b = lemma_suite(42, 30).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = lemma_suite(43, 30).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn bch_suite_passes() {
        let r = bch_suite(7, 25).unwrap();
        assert!(r.pass, "failing checks: {:?}", failing(&r));
        assert_eq!(r.suite, "bch");
    }

    #[test]
    fn transport_suite_passes() {
        let r = transport_suite(11, 20).unwrap();
        assert!(r.pass, "failing checks: {:?}", failing(&r));
    }

    #[test]
    fn reports_serialize_with_stable_shape() {
        let r = bch_suite(1, 5).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("suite").is_some());
        assert!(json.get("checks").unwrap().as_array().unwrap().len() >= 4);
        let first = &json.get("checks").unwrap().as_array().unwrap()[0];
        for key in ["name", "value", "constraint", "pass"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }

    fn failing(r: &SuiteReport) -> Vec<(String, f64, String)> {
        r.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| (c.name.clone(), c.value, c.constraint.clone()))
            .collect()
    }
}
