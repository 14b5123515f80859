//! End-to-end acceptance gate.
//!
//! Eight independent criteria, one test each; every test prints a single
//! `acceptance criterion N (...): PASS|FAIL` line (visible under
//! `--nocapture`) and fails loudly with the offending measurements otherwise.
//! All tolerances are pinned here, all randomness is seeded, and every
//! criterion runs in seconds on one core.

use std::process::Command;

use affinelab_core::bch::{asymptotic_check, commutator_word};
use affinelab_core::catalog;
use affinelab_core::flows::{
    flow_group_deviation, geodesic, parallel_transport, transport_difference_check, SampledCurve,
};
use affinelab_core::geometry::{Connection, TangentPoint, VectorField};
use affinelab_core::invariance::{theorem_equivalence_harness, Distribution, DECISION_THRESHOLD};
use affinelab_core::sample;
use affinelab_core::symprod::{
    first_difference_norm, lie_bracket_flow_estimate, second_derivative_estimate, UpsilonKind,
};
use affinelab_core::verify;
use affinelab_core::IntegratorConfig;
use rand_chacha::ChaCha8Rng;

fn conclude(label: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("acceptance criterion {label}: PASS");
    } else {
        println!("acceptance criterion {label}: FAIL");
        for f in &failures {
            println!("  - {f}");
        }
        panic!("{} measurement(s) out of bounds", failures.len());
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Pulls the probe box of a catalog entry toward its center so that the short
/// flow legs of the estimators cannot reach the chart boundary.
fn shrunk_box(lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(a, b)| a + 0.25 * (b - a))
        .collect();
    let hi: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(a, b)| b - 0.25 * (b - a))
        .collect();
    (lo, hi)
}

fn field_scale(entry_name: &str) -> f64 {
    match entry_name {
        "hyperbolic" | "sphere" => 0.3,
        _ => 0.8,
    }
}

/// One probe: a connection, a field pair, and a base point where the symbolic
/// product is not degenerate (tiny products are redrawn so that bounds stated
/// relative to the reference stay meaningful).
struct SweepCase {
    name: &'static str,
    connection: Connection,
    x1: VectorField,
    x2: VectorField,
    point: Vec<f64>,
}

fn draw_case(
    rng: &mut ChaCha8Rng,
    entry: &catalog::CatalogEntry,
) -> SweepCase {
    let scale = field_scale(entry.name);
    let (lo, hi) = shrunk_box(&entry.probe_lower, &entry.probe_upper);
    for _ in 0..50 {
        let x1 = sample::polynomial_field(rng, entry.connection.domain(), scale).unwrap();
        let x2 = sample::polynomial_field(rng, entry.connection.domain(), scale).unwrap();
        let point = sample::point_in_box(rng, &lo, &hi);
        let reference = entry
            .connection
            .symmetric_product(&x1, &x2)
            .unwrap()
            .value_at(&point)
            .unwrap();
        if max_abs(&reference) >= 0.05 {
            return SweepCase {
                name: entry.name,
                connection: entry.connection.clone(),
                x1,
                x2,
                point,
            };
        }
    }
    panic!("could not draw a non-degenerate pair for {}", entry.name);
}

fn sweep() -> Vec<SweepCase> {
    let mut rng = sample::rng(90210);
    let mut cases = Vec::new();
    for entry in catalog::standard_entries() {
        for _ in 0..5 {
            cases.push(draw_case(&mut rng, &entry));
        }
    }
    cases
}

#[test]
fn six_estimators_agree_with_the_symbolic_product() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    for case in sweep() {
        let v = TangentPoint::zero_vector(case.point.clone());
        let mut estimates: Vec<(UpsilonKind, Vec<f64>)> = Vec::new();
        let mut worst_err = 0.0f64;
        for kind in UpsilonKind::ALL {
            let rep = second_derivative_estimate(
                kind,
                &case.connection,
                &case.x1,
                &case.x2,
                &v,
                1e-2,
                true,
                &cfg,
            )
            .unwrap();
            if rep.rel_error > 1e-3 {
                failures.push(format!(
                    "{} at {:?}: kind {} relative error {:.3e} > 1e-3",
                    case.name,
                    case.point,
                    kind.name(),
                    rep.rel_error
                ));
            }
            worst_err = worst_err.max(rep.abs_error);
            estimates.push((kind, rep.estimate));
        }
        for i in 0..estimates.len() {
            for j in (i + 1)..estimates.len() {
                let gap = max_abs_diff(&estimates[i].1, &estimates[j].1);
                if gap > 2.0 * worst_err {
                    failures.push(format!(
                        "{}: kinds {}/{} disagree by {:.3e} > 2×{:.3e}",
                        case.name,
                        estimates[i].0.name(),
                        estimates[j].0.name(),
                        gap,
                        worst_err
                    ));
                }
            }
        }
    }
    conclude(
        "1 (six curve estimates vs the symbolic product, four connections)",
        failures,
    );
}

#[test]
fn first_differences_vanish_at_the_base_point() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    for case in sweep() {
        let v = TangentPoint::zero_vector(case.point.clone());
        let reference = case
            .connection
            .symmetric_product(&case.x1, &case.x2)
            .unwrap()
            .value_at(&case.point)
            .unwrap();
        let ref_norm = max_abs(&reference);
        for kind in UpsilonKind::ALL {
            for t in [1e-2, 5e-3] {
                let slope = first_difference_norm(
                    kind,
                    &case.connection,
                    &case.x1,
                    &case.x2,
                    &v,
                    t,
                    &cfg,
                )
                .unwrap();
                if slope > 10.0 * t * ref_norm {
                    failures.push(format!(
                        "{} kind {} at t={t:.0e}: slope {:.3e} > 10·t·{:.3e}",
                        case.name,
                        kind.name(),
                        slope,
                        ref_norm
                    ));
                }
            }
        }
    }
    conclude("2 (first differences shrink linearly in t)", failures);
}

#[test]
fn error_ratios_match_the_orders() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    let mut rng = sample::rng(515);
    let flat = catalog::flat(3);
    let x1 = sample::polynomial_field(&mut rng, flat.domain(), 0.8).unwrap();
    let x2 = sample::polynomial_field(&mut rng, flat.domain(), 0.8).unwrap();
    let x0 = vec![0.4, -0.2, 0.3];
    let v = TangentPoint::zero_vector(x0.clone());

    // plain second-difference estimator: halving t divides the error by ~4
    let est = |t: f64| {
        second_derivative_estimate(UpsilonKind::U1, &flat, &x1, &x2, &v, t, false, &cfg)
            .unwrap()
            .abs_error
    };
    let ratio = est(0.04) / est(0.02);
    if !(3.0..=5.0).contains(&ratio) {
        failures.push(format!("estimator ratio {ratio:.2} outside [3, 5]"));
    }

    // flow-composition bracket estimator: same order
    let brk = |t: f64| {
        lie_bracket_flow_estimate(&x1, &x2, &x0, t, false, &cfg)
            .unwrap()
            .abs_error
    };
    let ratio = brk(0.04) / brk(0.02);
    if !(3.0..=5.0).contains(&ratio) {
        failures.push(format!("bracket ratio {ratio:.2} outside [3, 5]"));
    }

    // quadratic truncation of the word exponential: cubic residual
    let dom = flat.domain().clone();
    let a = VectorField::from_strs(dom.clone(), &["x2", "0", "0"]).unwrap();
    let b = VectorField::from_strs(dom, &["0", "x1", "0"]).unwrap();
    let res = |t: f64| {
        let word = commutator_word(&a, &b, t);
        asymptotic_check(&word, &[0.7, 0.4, 0.0], &cfg)
            .unwrap()
            .residual
    };
    let ratio = res(0.2) / res(0.1);
    if !(6.0..=10.0).contains(&ratio) {
        failures.push(format!("truncation ratio {ratio:.2} outside [6, 10]"));
    }

    conclude(
        "3 (error ratios under halving: order two estimators, cubic truncation)",
        failures,
    );
}

#[test]
fn coordinate_identities_hold_to_rounding() {
    let report = verify::lemma_suite(424242, 100).unwrap();
    let mut failures = Vec::new();
    for check in &report.checks {
        if !check.pass || check.value > 1e-10 {
            failures.push(format!(
                "{}: {:.3e} ({})",
                check.name, check.value, check.constraint
            ));
        }
    }
    conclude("4 (exact lift/bracket identities, 100 draws)", failures);
}

#[test]
fn transport_gap_matches_the_torsion_integral() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    let mut rng = sample::rng(1312);

    let tor = catalog::constant_torsion(0.4);
    for _ in 0..20 {
        let x0 = sample::vector(&mut rng, 3, -1.0, 1.0);
        let u0 = sample::vector(&mut rng, 3, 0.5, 1.5);
        let v0 = sample::vector(&mut rng, 3, 0.5, 1.5);
        let t = sample::vector(&mut rng, 1, 0.2, 0.5)[0];
        let report = transport_difference_check(&tor, &x0, &u0, &v0, t, &cfg).unwrap();
        if report.deviation > 1e-5 {
            failures.push(format!(
                "torsion case deviates by {:.3e} at t={t:.2}",
                report.deviation
            ));
        }
    }

    // without torsion the two transports coincide and the integral is zero
    let hyp = catalog::hyperbolic_half_plane();
    let (hlo, hhi) = (vec![-0.6, 0.9], vec![0.6, 1.5]);
    for _ in 0..20 {
        let x0 = sample::point_in_box(&mut rng, &hlo, &hhi);
        let u0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let v0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let report = transport_difference_check(&hyp, &x0, &u0, &v0, 0.4, &cfg).unwrap();
        let both = report.deviation.max(report.difference_magnitude);
        if both > 1e-8 {
            failures.push(format!("torsion-free sides reach {both:.3e}"));
        }
    }

    conclude("5 (transport-difference formula, with and without torsion)", failures);
}

#[test]
fn three_invariance_verdicts_agree_with_decisive_margins() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    let mut invariant = 0usize;
    let mut non_invariant = 0usize;
    for case in catalog::invariance_cases() {
        let d = Distribution::new(case.generators.clone()).unwrap();
        let probes = sample::paired_probes(
            &case.probe_lower,
            &case.probe_upper,
            case.generators.len(),
            2,
            5,
            41,
        );
        let verdict = theorem_equivalence_harness(
            &case.connection,
            &d,
            &probes,
            0.4,
            DECISION_THRESHOLD,
            &cfg,
        )
        .unwrap();
        if !verdict.agreement() {
            failures.push(format!("{}: the three verdicts disagree", case.name));
            continue;
        }
        match verdict.invariant() {
            Some(inv) if inv == case.expected_invariant => {}
            got => {
                failures.push(format!(
                    "{}: expected invariant={}, got {:?}",
                    case.name, case.expected_invariant, got
                ));
                continue;
            }
        }
        let worsts = [
            verdict.geodesic_worst,
            verdict.symprod_worst,
            verdict.nabla_xx_worst,
        ];
        if case.expected_invariant {
            invariant += 1;
            let top = worsts.iter().fold(0.0f64, |m, w| m.max(*w));
            if top > 1e-7 {
                failures.push(format!("{}: pass residual {top:.3e} > 1e-7", case.name));
            }
        } else {
            non_invariant += 1;
            let low = worsts.iter().fold(f64::INFINITY, |m, w| m.min(*w));
            if low < 1e-2 {
                failures.push(format!("{}: fail residual {low:.3e} < 1e-2", case.name));
            }
        }
    }
    if invariant < 2 || non_invariant < 2 {
        failures.push(format!(
            "need at least two cases of each kind, got {invariant} invariant / {non_invariant} not"
        ));
    }
    conclude("6 (geodesic/product/square verdicts on the case catalog)", failures);
}

#[test]
fn integrators_reproduce_closed_forms() {
    let cfg = IntegratorConfig::default();
    let mut failures = Vec::new();
    let hyp = catalog::hyperbolic_half_plane();

    // unit-speed horizontal launch traces (tanh t, sech t)
    let end = geodesic(&hyp, &[0.0, 1.0], &[1.0, 0.0], 1.0, &cfg).unwrap();
    let s = 1.0f64;
    let expected = [
        s.tanh(),
        1.0 / s.cosh(),
        1.0 / (s.cosh() * s.cosh()),
        -s.tanh() / s.cosh(),
    ];
    let err = max_abs_diff(&end.flat(), &expected);
    if err > 1e-6 {
        failures.push(format!("horizontal geodesic off by {err:.3e}"));
    }

    // vertical launch is exponential in x2
    let end = geodesic(&hyp, &[0.0, 1.0], &[0.0, 1.0], 1.0, &cfg).unwrap();
    let expected = [0.0, 1.0f64.exp(), 0.0, 1.0f64.exp()];
    let err = max_abs_diff(&end.flat(), &expected);
    if err > 1e-6 {
        failures.push(format!("vertical geodesic off by {err:.3e}"));
    }

    // transport out and back along a geodesic is the identity
    let mut rng = sample::rng(77);
    for _ in 0..10 {
        let x0 = sample::point_in_box(&mut rng, &[-0.6, 0.9], &[0.6, 1.5]);
        let u0 = sample::vector(&mut rng, 2, -1.0, 1.0);
        let v0 = sample::vector(&mut rng, 2, -1.5, 1.5);
        let curve =
            SampledCurve::from_geodesic(&hyp, &x0, &u0, 0.5, 2 * cfg.substeps(0.5)).unwrap();
        let steps = cfg.substeps(0.5);
        let out = parallel_transport(&hyp, &curve, &v0, 0.0, 0.5, steps).unwrap();
        let back = parallel_transport(&hyp, &curve, &out, 0.5, 0.0, steps).unwrap();
        let err = max_abs_diff(&back, &v0);
        if err > 1e-7 {
            failures.push(format!("transport round-trip off by {err:.3e}"));
        }
    }

    // flowing s then t equals flowing s + t
    let flat = catalog::flat(3);
    for _ in 0..10 {
        let field = sample::polynomial_field(&mut rng, flat.domain(), 0.3).unwrap();
        let x0 = sample::vector(&mut rng, 3, -1.0, 1.0);
        let dev = flow_group_deviation(&field, &x0, 0.1, 0.15, &cfg).unwrap();
        if dev > 1e-7 {
            failures.push(format!("flow group deviation {dev:.3e}"));
        }
    }

    conclude("7 (geodesic closed forms, transport round-trip, flow group law)", failures);
}

#[test]
fn repeated_verify_runs_are_byte_identical() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_affinelab"))
            .args(["verify", "--seed", "42", "--format", "json"])
            .output()
            .expect("binary runs")
    };
    let first = run();
    let second = run();
    let mut failures = Vec::new();
    if !first.status.success() {
        failures.push(format!(
            "first run exited with {:?}: {}",
            first.status.code(),
            String::from_utf8_lossy(&first.stderr)
        ));
    }
    if first.stdout.is_empty() {
        failures.push("no report on stdout".to_string());
    }
    if first.stdout != second.stdout {
        failures.push("two runs with the same seed differ".to_string());
    }
    if serde_json::from_slice::<serde_json::Value>(&first.stdout).is_err() {
        failures.push("stdout is not valid JSON".to_string());
    }
    conclude("8 (verification report is reproducible byte for byte)", failures);
}
