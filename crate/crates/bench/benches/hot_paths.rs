//! Benchmarks for the paths the estimator sweeps spend their time in:
//! expression compilation, one flow-composition curve, parallel transport,
//! and the membership residual of a distribution scan.

use std::hint::black_box;

use affinelab_core::catalog;
use affinelab_core::expr::ScalarExpr;
use affinelab_core::flows::{parallel_transport, SampledCurve};
use affinelab_core::geometry::{TangentPoint, VectorField};
use affinelab_core::invariance::{membership_residual, Distribution};
use affinelab_core::symprod::{second_derivative_estimate, UpsilonKind};
use affinelab_core::IntegratorConfig;
use criterion::{criterion_group, criterion_main, Criterion};

fn expression_pipeline(c: &mut Criterion) {
    let src = "sin(x1*x2) / (1 + x2^2) - 0.5*cos(x1) * exp(-x1*x1)";
    let parsed = ScalarExpr::parse(src, 2).unwrap();
    let compiled = parsed.differentiate(0).compile();
    let x = [0.7, -0.4];

    c.bench_function("parse_differentiate_compile", |b| {
        b.iter(|| {
            ScalarExpr::parse(black_box(src), 2)
                .unwrap()
                .differentiate(0)
                .compile()
        })
    });
    c.bench_function("compiled_eval", |b| {
        b.iter(|| compiled.eval(black_box(&x)).unwrap())
    });
}

fn estimator_curve(c: &mut Criterion) {
    let conn = catalog::hyperbolic_half_plane();
    let x1 = VectorField::from_strs(conn.domain().clone(), &["x2", "0"]).unwrap();
    let x2 = VectorField::from_strs(conn.domain().clone(), &["0", "x1"]).unwrap();
    let v = TangentPoint::zero_vector(vec![0.3, 1.2]);
    let cfg = IntegratorConfig::default();

    c.bench_function("upsilon_u1_second_difference", |b| {
        b.iter(|| {
            second_derivative_estimate(
                UpsilonKind::U1,
                &conn,
                &x1,
                &x2,
                &v,
                black_box(1e-2),
                false,
                &cfg,
            )
            .unwrap()
        })
    });
}

fn transport(c: &mut Criterion) {
    let conn = catalog::hyperbolic_half_plane();
    let cfg = IntegratorConfig::default();
    let curve = SampledCurve::from_geodesic(
        &conn,
        &[0.0, 1.0],
        &[0.8, 0.3],
        0.5,
        2 * cfg.substeps(0.5),
    )
    .unwrap();

    c.bench_function("parallel_transport_half_unit", |b| {
        b.iter(|| {
            parallel_transport(
                &conn,
                &curve,
                black_box(&[1.0, -0.5]),
                0.0,
                0.5,
                cfg.substeps(0.5),
            )
            .unwrap()
        })
    });
}

fn membership(c: &mut Criterion) {
    let cases = catalog::invariance_cases();
    let twisted = cases
        .iter()
        .find(|case| case.name == "flat-twisted-plane")
        .unwrap();
    let d = Distribution::new(twisted.generators.clone()).unwrap();
    let v = TangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]).unwrap();

    c.bench_function("membership_residual", |b| {
        b.iter(|| membership_residual(&d, black_box(&v)).unwrap())
    });
}

criterion_group!(
    benches,
    expression_pipeline,
    estimator_curve,
    transport,
    membership
);
criterion_main!(benches);
