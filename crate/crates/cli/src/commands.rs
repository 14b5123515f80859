//! The four batch commands.
//!
//! Every command renders its whole report into a `String` (so `--out` and
//! stdout see identical bytes) and returns the exit code alongside it.
//! Rendering must stay deterministic: fixed-width float formats, sorted maps,
//! no timestamps.

use std::fmt::Write as _;

use affinelab_core::catalog;
use affinelab_core::geometry::{Connection, TangentPoint, VectorField};
use affinelab_core::invariance::{
    theorem_equivalence_harness, Distribution, DECISION_THRESHOLD,
};
use affinelab_core::sample;
use affinelab_core::symprod::{self, EstimatorReport, UpsilonKind};
use affinelab_core::verify::{self, SuiteReport};
use serde::Serialize;

use crate::config::Problem;
use crate::{CliError, Format};

/// Random draws per verification suite when run from the command line; the
/// library testsuite uses its own counts.
const VERIFY_DRAWS: usize = 25;

type CmdResult = Result<(String, u8), CliError>;

fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

fn fmt_vec(v: &[f64], precision: usize) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.precision$e}")).collect();
    format!("({})", cells.join(", "))
}

/// Vector cell for CSV: semicolon-joined so the column structure survives.
fn csv_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| fmt_f(*x)).collect();
    cells.join(";")
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let p = parts.map_err(|e| CliError::usage(format!("bad point {text:?}: {e}")))?;
    if p.len() != dim {
        return Err(CliError::usage(format!(
            "point has {} coordinates, expected {dim}",
            p.len()
        )));
    }
    Ok(p)
}

fn box_center(lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}

/// Picks the named fields, or the first two in name order when unnamed.
fn pick_pair<'a>(
    problem: &'a Problem,
    names: Option<&'a str>,
) -> Result<[(&'a str, &'a VectorField); 2], CliError> {
    match names {
        Some(spec) => {
            let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(CliError::usage(format!(
                    "--fields wants two comma-separated names, got {spec:?}"
                )));
            }
            let mut out = Vec::new();
            for name in parts {
                let f = problem
                    .fields
                    .get(name)
                    .ok_or_else(|| CliError::usage(format!("unknown field {name}")))?;
                out.push((name, f));
            }
            Ok([out[0], out[1]])
        }
        None => {
            let mut it = problem.fields.iter();
            match (it.next(), it.next()) {
                (Some((a, fa)), Some((b, fb))) => Ok([(a.as_str(), fa), (b.as_str(), fb)]),
                _ => Err(CliError::usage(
                    "config defines fewer than two fields; pass --fields NAME,NAME",
                )),
            }
        }
    }
}

fn parse_kinds(spec: Option<&str>) -> Result<Vec<UpsilonKind>, CliError> {
    match spec {
        None => Ok(UpsilonKind::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|k| k.trim().parse::<UpsilonKind>().map_err(CliError::usage))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// symprod

#[derive(Serialize)]
struct SymprodRow {
    kind: String,
    report: EstimatorReport,
    /// abs_error(t) / abs_error(t/2); `None` when the finer error is zero.
    ratio_half: Option<f64>,
    /// abs_error(t/2) / abs_error(t/4).
    ratio_quarter: Option<f64>,
}

#[derive(Serialize)]
struct SymprodReport {
    fields: [String; 2],
    point: Vec<f64>,
    tolerance: f64,
    rows: Vec<SymprodRow>,
    pass: bool,
}

fn error_ratio(coarse: f64, fine: f64) -> Option<f64> {
    (fine > 0.0).then(|| coarse / fine)
}

pub fn cmd_symprod(
    problem: &Problem,
    fields: Option<&str>,
    point: Option<&str>,
    kinds: Option<&str>,
    tolerance: Option<f64>,
    format: Format,
) -> CmdResult {
    let c = &problem.connection;
    let [(name1, x1), (name2, x2)] = pick_pair(problem, fields)?;
    let x = match point {
        Some(p) => parse_point(p, c.dim())?,
        None => box_center(&problem.probe_lower, &problem.probe_upper),
    };
    if !c.domain().contains(&x) {
        return Err(CliError::usage(format!(
            "point {} is outside the chart domain",
            fmt_vec(&x, 3)
        )));
    }
    let kinds = parse_kinds(kinds)?;
    let tolerance = tolerance.unwrap_or(1e-3);
    let v = TangentPoint::zero_vector(x.clone());

    let mut rows = Vec::new();
    for kind in &kinds {
        let at = |t: f64| -> Result<EstimatorReport, CliError> {
            symprod::second_derivative_estimate(
                *kind,
                c,
                x1,
                x2,
                &v,
                t,
                problem.richardson,
                &problem.integrator,
            )
            .map_err(CliError::run)
        };
        let full = at(problem.step)?;
        let half = at(problem.step / 2.0)?;
        let quarter = at(problem.step / 4.0)?;
        rows.push(SymprodRow {
            kind: kind.name().to_string(),
            ratio_half: error_ratio(full.abs_error, half.abs_error),
            ratio_quarter: error_ratio(half.abs_error, quarter.abs_error),
            report: full,
        });
    }
    let pass = rows.iter().all(|r| r.report.rel_error <= tolerance);
    let report = SymprodReport {
        fields: [name1.to_string(), name2.to_string()],
        point: x,
        tolerance,
        rows,
        pass,
    };

    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::new();
            s.push_str(
                "kind,step,richardson,estimate,reference,abs_error,rel_error,base_drift,\
                 ratio_half,ratio_quarter\n",
            );
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.kind,
                    fmt_f(r.report.step),
                    r.report.richardson,
                    csv_vec(&r.report.estimate),
                    csv_vec(&r.report.reference),
                    fmt_f(r.report.abs_error),
                    fmt_f(r.report.rel_error),
                    csv_vec(&r.report.base_drift),
                    r.ratio_half.map(fmt_f).unwrap_or_default(),
                    r.ratio_quarter.map(fmt_f).unwrap_or_default(),
                );
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "symmetric product of {name1}, {name2} at {} (t = {:.3e}, richardson = {})",
                fmt_vec(&report.point, 3),
                problem.step,
                problem.richardson,
            );
            let _ = writeln!(
                s,
                "{:<5} {:>11} {:>11} {:>11} {:>9} {:>9}  estimate",
                "kind", "abs_error", "rel_error", "drift", "r(t/2)", "r(t/4)"
            );
            for r in &report.rows {
                let drift = r
                    .report
                    .base_drift
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                let _ = writeln!(
                    s,
                    "{:<5} {:>11.3e} {:>11.3e} {:>11.3e} {:>9} {:>9}  {}",
                    r.kind,
                    r.report.abs_error,
                    r.report.rel_error,
                    drift,
                    r.ratio_half.map(|v| format!("{v:.2}")).unwrap_or_default(),
                    r.ratio_quarter
                        .map(|v| format!("{v:.2}"))
                        .unwrap_or_default(),
                    fmt_vec(&r.report.estimate, 6),
                );
            }
            let _ = writeln!(s, "reference {}", fmt_vec(&report.rows[0].report.reference, 6));
            let _ = writeln!(
                s,
                "tolerance {:.3e}: {}",
                tolerance,
                if pass { "PASS" } else { "FAIL" }
            );
            s
        }
    };
    Ok((text, if pass { 0 } else { 1 }))
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Lemmas,
    Bch,
    Transport,
    All,
}

pub fn cmd_verify(suite: Suite, seed: u64, format: Format) -> CmdResult {
    let reports: Vec<SuiteReport> = match suite {
        Suite::Lemmas => vec![verify::lemma_suite(seed, VERIFY_DRAWS).map_err(CliError::run)?],
        Suite::Bch => vec![verify::bch_suite(seed, VERIFY_DRAWS).map_err(CliError::run)?],
        Suite::Transport => {
            vec![verify::transport_suite(seed, VERIFY_DRAWS).map_err(CliError::run)?]
        }
        Suite::All => verify::all_suites(seed, VERIFY_DRAWS).map_err(CliError::run)?,
    };
    let pass = reports.iter().all(|r| r.pass);

    let text = match format {
        Format::Json => to_json(&reports)?,
        Format::Csv => {
            let mut s = String::from("suite,check,value,constraint,pass\n");
            for r in &reports {
                for c in &r.checks {
                    let _ = writeln!(
                        s,
                        "{},{:?},{},{:?},{}",
                        r.suite,
                        c.name,
                        fmt_f(c.value),
                        c.constraint,
                        c.pass
                    );
                }
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for r in &reports {
                let _ = writeln!(s, "suite {} (seed {}, {} draws)", r.suite, r.seed, r.draws);
                for c in &r.checks {
                    let _ = writeln!(
                        s,
                        "  [{}] {:<52} {:>11.3e}  {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.constraint
                    );
                }
            }
            let failed: usize = reports
                .iter()
                .flat_map(|r| &r.checks)
                .filter(|c| !c.pass)
                .count();
            if failed == 0 {
                let _ = writeln!(s, "all checks passed");
            } else {
                let _ = writeln!(s, "{failed} checks failed");
            }
            s
        }
    };
    Ok((text, if pass { 0 } else { 1 }))
}

// ---------------------------------------------------------------------------
// invariance

#[derive(Serialize)]
struct InvarianceReport {
    distribution: String,
    verdict: affinelab_core::InvarianceVerdict,
    agreement: bool,
    /// Set only when the three classifications agree and none is borderline.
    invariant: Option<bool>,
}

pub fn cmd_invariance(
    problem: &Problem,
    connection: Option<&str>,
    distribution: Option<&str>,
    seed: Option<u64>,
    tolerance: Option<f64>,
    format: Format,
) -> CmdResult {
    // a catalog name on the command line overrides the configured connection
    let (c, probe_box): (Connection, Option<(Vec<f64>, Vec<f64>)>) = match connection {
        None => (problem.connection.clone(), None),
        Some(name) => {
            let entry = catalog::entry_by_name(name)
                .ok_or_else(|| CliError::usage(format!("unknown catalog connection {name}")))?;
            if entry.connection.dim() != problem.connection.dim() {
                return Err(CliError::usage(format!(
                    "catalog connection {name} has dimension {}, config has {}",
                    entry.connection.dim(),
                    problem.connection.dim()
                )));
            }
            (
                entry.connection,
                Some((entry.probe_lower, entry.probe_upper)),
            )
        }
    };

    let dist_name = match distribution {
        Some(n) => n.to_string(),
        None => {
            let mut names = problem.distributions.keys();
            match (names.next(), names.next()) {
                (Some(only), None) => only.clone(),
                (None, _) => {
                    return Err(CliError::usage("config defines no distributions"));
                }
                _ => {
                    return Err(CliError::usage(
                        "config defines several distributions; pass --distribution NAME",
                    ));
                }
            }
        }
    };
    let generator_names = problem
        .distributions
        .get(&dist_name)
        .ok_or_else(|| CliError::usage(format!("unknown distribution {dist_name}")))?;
    let generators: Vec<VectorField> = generator_names
        .iter()
        .map(|n| {
            // rebind onto the active chart so a catalog override is honored
            let f = &problem.fields[n];
            VectorField::new(c.domain().clone(), f.components().to_vec())
                .map_err(CliError::usage)
        })
        .collect::<Result<_, _>>()?;
    let d = Distribution::new(generators).map_err(CliError::usage)?;

    let (lower, upper) = probe_box.unwrap_or_else(|| {
        (problem.probe_lower.clone(), problem.probe_upper.clone())
    });
    let probes = sample::paired_probes(
        &lower,
        &upper,
        d.generators().len(),
        problem.grid_per_axis,
        problem.random_count,
        seed.unwrap_or(problem.seed),
    );
    let threshold = tolerance.unwrap_or(DECISION_THRESHOLD);
    let verdict = theorem_equivalence_harness(
        &c,
        &d,
        &probes,
        problem.horizon,
        threshold,
        &problem.integrator,
    )
    .map_err(CliError::run)?;

    let agreement = verdict.agreement();
    let exit = if verdict.indeterminate() {
        2
    } else if agreement {
        0
    } else {
        1
    };
    let report = InvarianceReport {
        distribution: dist_name,
        invariant: verdict.invariant(),
        agreement,
        verdict,
    };

    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let v = &report.verdict;
            let mut s = String::from("check,classification,worst_residual\n");
            let _ = writeln!(
                s,
                "geodesic_scan,{},{}",
                v.geodesic_invariant,
                fmt_f(v.geodesic_worst)
            );
            let _ = writeln!(
                s,
                "symmetric_product_closure,{},{}",
                v.symprod_closed,
                fmt_f(v.symprod_worst)
            );
            let _ = writeln!(
                s,
                "nabla_xx_closure,{},{}",
                v.nabla_xx_closed,
                fmt_f(v.nabla_xx_worst)
            );
            let _ = writeln!(
                s,
                "agreement,{},",
                if report.agreement { "yes" } else { "no" }
            );
            s
        }
        Format::Table => {
            let v = &report.verdict;
            let mut s = String::new();
            let _ = writeln!(
                s,
                "distribution {} (threshold {:.3e}, probes {})",
                report.distribution, v.threshold, v.probes
            );
            let _ = writeln!(
                s,
                "  geodesic scan:             {:<14} worst {:>11.3e}",
                v.geodesic_invariant.to_string(),
                v.geodesic_worst
            );
            let _ = writeln!(
                s,
                "  symmetric-product closure: {:<14} worst {:>11.3e}",
                v.symprod_closed.to_string(),
                v.symprod_worst
            );
            let _ = writeln!(
                s,
                "  covariant-square closure:  {:<14} worst {:>11.3e}",
                v.nabla_xx_closed.to_string(),
                v.nabla_xx_worst
            );
            let line = match (report.agreement, report.invariant) {
                (_, Some(true)) => "three verdicts agree: geodesically invariant",
                (_, Some(false)) => "three verdicts agree: not geodesically invariant",
                (false, None) => "verdicts disagree",
                (true, None) => "indeterminate: residuals too close to the threshold",
            };
            let _ = writeln!(s, "{line}");
            s
        }
    };
    Ok((text, exit))
}

// ---------------------------------------------------------------------------
// convergence

#[derive(Serialize)]
struct LadderPoint {
    t: f64,
    abs_error: f64,
    /// error at the previous, coarser step over this one
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct ConvergenceReport {
    target: String,
    richardson: bool,
    points: Vec<LadderPoint>,
    /// least-squares slope of log error against log t
    fitted_order: Option<f64>,
}

fn fitted_order(points: &[LadderPoint]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.abs_error > 0.0)
        .map(|p| (p.t.ln(), p.abs_error.ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (var > 0.0).then(|| cov / var)
}

pub fn cmd_convergence(problem: &Problem, target: &str, format: Format) -> CmdResult {
    let c = &problem.connection;
    let [(_, x1), (_, x2)] = pick_pair(problem, None)?;
    let x = box_center(&problem.probe_lower, &problem.probe_upper);

    let errors_at = |t: f64| -> Result<f64, CliError> {
        if target == "bracket" {
            return symprod::lie_bracket_flow_estimate(
                x1,
                x2,
                &x,
                t,
                problem.richardson,
                &problem.integrator,
            )
            .map(|r| r.abs_error)
            .map_err(CliError::run);
        }
        let kind: UpsilonKind = target.parse().map_err(CliError::usage)?;
        let v = TangentPoint::zero_vector(x.clone());
        symprod::second_derivative_estimate(
            kind,
            c,
            x1,
            x2,
            &v,
            t,
            problem.richardson,
            &problem.integrator,
        )
        .map(|r| r.abs_error)
        .map_err(CliError::run)
    };

    let mut points: Vec<LadderPoint> = Vec::new();
    let mut t = problem.ladder_start;
    for _ in 0..problem.ladder_points {
        let abs_error = errors_at(t)?;
        let ratio = points
            .last()
            .and_then(|prev| error_ratio(prev.abs_error, abs_error));
        points.push(LadderPoint { t, abs_error, ratio });
        t /= 2.0;
    }
    let report = ConvergenceReport {
        target: target.to_string(),
        richardson: problem.richardson,
        fitted_order: fitted_order(&points),
        points,
    };

    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from("t,abs_error,ratio\n");
            for p in &report.points {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    fmt_f(p.t),
                    fmt_f(p.abs_error),
                    p.ratio.map(fmt_f).unwrap_or_default()
                );
            }
            let _ = writeln!(
                s,
                "# fitted order: {}",
                report
                    .fitted_order
                    .map(|o| format!("{o:.3}"))
                    .unwrap_or_else(|| "n/a".into())
            );
            s
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "error ladder for {} (richardson = {})",
                report.target, report.richardson
            );
            let _ = writeln!(s, "{:>11} {:>12} {:>7}", "t", "abs_error", "ratio");
            for p in &report.points {
                let _ = writeln!(
                    s,
                    "{:>11.4e} {:>12.4e} {:>7}",
                    p.t,
                    p.abs_error,
                    p.ratio.map(|r| format!("{r:.2}")).unwrap_or_default()
                );
            }
            let _ = writeln!(
                s,
                "fitted order: {}",
                report
                    .fitted_order
                    .map(|o| format!("{o:.3}"))
                    .unwrap_or_else(|| "n/a".into())
            );
            s
        }
    };
    Ok((text, 0))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::run)?;
    s.push('\n');
    Ok(s)
}
