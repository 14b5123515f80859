//! Flows, geodesics, and parallel transport.
//!
//! All trajectories are produced by a fixed-step RK4 integrator. Step counts
//! come from [`IntegratorConfig`]: long-time flows resolve a fixed number of
//! steps per unit of flow time, while the short legs used by second-difference
//! estimators shrink their step size like t² so that integrator bias stays far
//! below the O(t²) truncation structure the estimators are trying to measure.
//!
//! Bounds are enforced per accepted step; stage evaluations may momentarily
//! leave the box as long as the expressions still evaluate there.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::geometry::{contract, ChartDomain, Connection, GeometryError, TangentPoint, VectorField};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("trajectory left the chart domain at t = {t}: {point:?}")]
    OutOfDomain { t: f64, point: Vec<f64> },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("right-hand side failed at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("transport matrix is singular at t = {t}")]
    SingularTransport { t: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// RK4 steps per unit of flow time for plain flows and transports.
    pub substeps_per_unit_time: f64,
}

impl Default for IntegratorConfig {
    fn default() -> IntegratorConfig {
        IntegratorConfig {
            substeps_per_unit_time: 200.0,
        }
    }
}

impl IntegratorConfig {
    pub fn substeps(&self, duration: f64) -> usize {
        let raw = (duration.abs() * self.substeps_per_unit_time).ceil();
        (raw as usize).clamp(10, 100_000)
    }

    /// Step count for one leg of length `t` of a second-difference estimator.
    ///
    /// The resulting step size scales like t²/50 per unit substep rate, so the
    /// integrator's O(h⁴) bias decays much faster than the O(t²) Taylor terms
    /// whose coefficient the estimator extracts.
    pub fn estimator_substeps(&self, t: f64) -> usize {
        if t == 0.0 {
            return 10;
        }
        let raw = (0.05 / t.abs() * self.substeps_per_unit_time).ceil();
        (raw as usize).clamp(10, 100_000)
    }
}

/// One accepted integrator step: time and full state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub state: Vec<f64>,
}

/// Fixed-step RK4 over `[t0, t0 + duration]`; `duration` may be negative.
///
/// `check` validates each accepted state (typically a bounds check on the
/// base-point block); `observe` sees `(step_index, t, state)` for the initial
/// state and after every accepted step.
fn integrate<F, C, S>(
    mut f: F,
    state: &mut [f64],
    t0: f64,
    duration: f64,
    steps: usize,
    mut check: C,
    mut observe: S,
) -> Result<(), FlowError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), FlowError>,
    C: FnMut(f64, &[f64]) -> Result<(), FlowError>,
    S: FnMut(usize, f64, &[f64]),
{
    assert!(steps > 0, "integrator needs at least one step");
    let m = state.len();
    let h = duration / steps as f64;
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];

    observe(0, t0, state);
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        f(t, state, &mut k1)?;
        for i in 0..m {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..m {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..m {
            tmp[i] = state[i] + h * k3[i];
        }
        f(t + h, &tmp, &mut k4)?;
        for i in 0..m {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = t0 + (step + 1) as f64 * h;
        if !state.iter().all(|v| v.is_finite()) {
            return Err(FlowError::NonFinite { t: t_next });
        }
        check(t_next, state)?;
        observe(step + 1, t_next, state);
    }
    Ok(())
}

fn in_domain(domain: &ChartDomain) -> impl FnMut(f64, &[f64]) -> Result<(), FlowError> + '_ {
    let n = domain.dim();
    move |t, state| {
        if domain.contains(&state[..n]) {
            Ok(())
        } else {
            Err(FlowError::OutOfDomain {
                t,
                point: state[..n].to_vec(),
            })
        }
    }
}

fn eval_err(t: f64) -> impl Fn(EvalError) -> FlowError {
    move |source| FlowError::Eval { t, source }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Φ_duration(x0)` for the integral curve of `field` through `x0`.
pub fn flow(
    field: &VectorField,
    x0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, FlowError> {
    field.domain().check_point(x0)?;
    let mut state = x0.to_vec();
    let mut stack = Vec::new();
    integrate(
        |t, x, out| field.value_into(x, out, &mut stack).map_err(eval_err(t)),
        &mut state,
        0.0,
        duration,
        cfg.substeps(duration),
        in_domain(field.domain()),
        |_, _, _| {},
    )?;
    Ok(state)
}

/// Like [`flow`] but returns every accepted step, initial point included.
pub fn flow_samples(
    field: &VectorField,
    x0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<CurveSample>, FlowError> {
    field.domain().check_point(x0)?;
    let mut state = x0.to_vec();
    let mut stack = Vec::new();
    let mut samples = Vec::with_capacity(cfg.substeps(duration) + 1);
    integrate(
        |t, x, out| field.value_into(x, out, &mut stack).map_err(eval_err(t)),
        &mut state,
        0.0,
        duration,
        cfg.substeps(duration),
        in_domain(field.domain()),
        |_, t, s| {
            samples.push(CurveSample {
                t,
                state: s.to_vec(),
            })
        },
    )?;
    Ok(samples)
}

/// `‖Φ_{t2}(Φ_{t1}(x)) − Φ_{t1+t2}(x)‖∞`, which vanishes for the exact flow.
pub fn flow_group_deviation(
    field: &VectorField,
    x0: &[f64],
    t1: f64,
    t2: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError> {
    let mid = flow(field, x0, t1, cfg)?;
    let two_leg = flow(field, &mid, t2, cfg)?;
    let direct = flow(field, x0, t1 + t2, cfg)?;
    Ok(max_abs_diff(&two_leg, &direct))
}

/// RHS of the geodesic system on states `[x | v]`: ẋ = v, v̇ = −Γ(v, v).
fn geodesic_rhs<'a>(
    c: &'a Connection,
    stack: &'a mut Vec<f64>,
    table: &'a mut [f64],
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), FlowError> + 'a {
    let n = c.dim();
    move |t, state, out| {
        let (x, v) = state.split_at(n);
        c.gamma_into(x, table, stack).map_err(eval_err(t))?;
        out[..n].copy_from_slice(v);
        contract(table, v, v, &mut out[n..]);
        for o in &mut out[n..] {
            *o = -*o;
        }
        Ok(())
    }
}

/// Geodesic of `c` with `γ(0) = x0`, `γ'(0) = v0`, returned as the endpoint
/// position/velocity pair.
pub fn geodesic(
    c: &Connection,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<TangentPoint, FlowError> {
    let samples = geodesic_samples(c, x0, v0, duration, cfg)?;
    let last = samples.last().expect("at least the initial sample");
    let n = c.dim();
    Ok(TangentPoint::new(
        last.state[..n].to_vec(),
        last.state[n..].to_vec(),
    )?)
}

/// Geodesic trajectory; each sample state is `[x | v]` of length 2n.
pub fn geodesic_samples(
    c: &Connection,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<CurveSample>, FlowError> {
    let n = c.dim();
    c.domain().check_point(x0)?;
    if v0.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: v0.len(),
        }
        .into());
    }
    let mut state = [x0, v0].concat();
    let mut stack = Vec::new();
    let mut table = vec![0.0; n * n * n];
    let mut samples = Vec::new();
    integrate(
        geodesic_rhs(c, &mut stack, &mut table),
        &mut state,
        0.0,
        duration,
        cfg.substeps(duration),
        in_domain(c.domain()),
        |_, t, s| {
            samples.push(CurveSample {
                t,
                state: s.to_vec(),
            })
        },
    )?;
    Ok(samples)
}

/// Geodesic trajectory that tolerates leaving the chart: integration errors
/// after the initial point truncate the trajectory instead of failing, and
/// the flag reports whether truncation happened. Intended for scans that
/// probe many geodesics and should simply use the part that stayed inside.
pub fn geodesic_samples_clipped(
    c: &Connection,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<CurveSample>, bool), FlowError> {
    let n = c.dim();
    c.domain().check_point(x0)?;
    if v0.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: v0.len(),
        }
        .into());
    }
    let mut state = [x0, v0].concat();
    let mut stack = Vec::new();
    let mut table = vec![0.0; n * n * n];
    let mut samples = Vec::new();
    let result = integrate(
        geodesic_rhs(c, &mut stack, &mut table),
        &mut state,
        0.0,
        duration,
        cfg.substeps(duration),
        in_domain(c.domain()),
        |_, t, s| {
            samples.push(CurveSample {
                t,
                state: s.to_vec(),
            })
        },
    );
    Ok((samples, result.is_err()))
}

/// Flow of the vertical lift: `(x, u) ↦ (x, u + t·X(x))`, exactly.
pub fn vertical_flow(
    field: &VectorField,
    v: &TangentPoint,
    t: f64,
) -> Result<TangentPoint, FlowError> {
    let value = field.value_at(&v.base)?;
    let fiber = v
        .fiber
        .iter()
        .zip(&value)
        .map(|(u, xv)| u + t * xv)
        .collect();
    Ok(TangentPoint::new(v.base.clone(), fiber)?)
}

/// Flow of the horizontal lift of `field`: the base moves along the integral
/// curve while the fiber is parallel-transported, jointly integrated as
/// ẋ = X(x), u̇^k = −Γ^k_{ij} X^i u^j.
pub fn horizontal_flow(
    c: &Connection,
    field: &VectorField,
    v: &TangentPoint,
    t: f64,
    steps: usize,
) -> Result<TangentPoint, FlowError> {
    let n = c.dim();
    c.domain().check_point(&v.base)?;
    if field.dim() != n || v.dim() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: field.dim().max(v.dim()),
        }
        .into());
    }
    let mut state = [v.base.as_slice(), v.fiber.as_slice()].concat();
    let mut stack = Vec::new();
    let mut table = vec![0.0; n * n * n];
    integrate(
        |t, s, out: &mut [f64]| {
            let (x, u) = s.split_at(n);
            field
                .value_into(x, &mut out[..n], &mut stack)
                .map_err(eval_err(t))?;
            c.gamma_into(x, &mut table, &mut stack).map_err(eval_err(t))?;
            let (xdot, udot) = out.split_at_mut(n);
            contract(&table, xdot, u, udot);
            for o in udot.iter_mut() {
                *o = -*o;
            }
            Ok(())
        },
        &mut state,
        0.0,
        t,
        steps,
        in_domain(c.domain()),
        |_, _, _| {},
    )?;
    Ok(TangentPoint::new(state[..n].to_vec(), state[n..].to_vec())?)
}

/// Flow of the complete lift of `field`: the base moves along the integral
/// curve while the fiber follows the linearized flow, u̇ = DX(x)·u.
pub fn complete_flow(
    field: &VectorField,
    v: &TangentPoint,
    t: f64,
    steps: usize,
) -> Result<TangentPoint, FlowError> {
    let n = field.dim();
    field.domain().check_point(&v.base)?;
    if v.dim() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: v.dim(),
        }
        .into());
    }
    let mut state = [v.base.as_slice(), v.fiber.as_slice()].concat();
    let mut stack = Vec::new();
    integrate(
        |t, s, out: &mut [f64]| {
            let (x, u) = s.split_at(n);
            let (xdot, udot) = out.split_at_mut(n);
            field.value_into(x, xdot, &mut stack).map_err(eval_err(t))?;
            field
                .jacobian_apply_into(x, u, udot, &mut stack)
                .map_err(eval_err(t))
        },
        &mut state,
        0.0,
        t,
        steps,
        in_domain(field.domain()),
        |_, _, _| {},
    )?;
    Ok(TangentPoint::new(state[..n].to_vec(), state[n..].to_vec())?)
}

/// A parametrized curve that can report position and velocity at any time.
pub trait Curve {
    fn dim(&self) -> usize;
    fn point(&self, t: f64, out: &mut [f64]);
    fn velocity(&self, t: f64, out: &mut [f64]);
}

/// Curve given by closures, for analytically known trajectories.
pub struct ClosureCurve<P, V>
where
    P: Fn(f64, &mut [f64]),
    V: Fn(f64, &mut [f64]),
{
    dim: usize,
    point_fn: P,
    velocity_fn: V,
}

impl<P, V> ClosureCurve<P, V>
where
    P: Fn(f64, &mut [f64]),
    V: Fn(f64, &mut [f64]),
{
    pub fn new(dim: usize, point_fn: P, velocity_fn: V) -> Self {
        ClosureCurve {
            dim,
            point_fn,
            velocity_fn,
        }
    }
}

impl<P, V> Curve for ClosureCurve<P, V>
where
    P: Fn(f64, &mut [f64]),
    V: Fn(f64, &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, t: f64, out: &mut [f64]) {
        (self.point_fn)(t, out)
    }

    fn velocity(&self, t: f64, out: &mut [f64]) {
        (self.velocity_fn)(t, out)
    }
}

/// Densely sampled trajectory with cubic Hermite interpolation between nodes.
///
/// Position interpolates (γ, γ′) and velocity interpolates (γ′, γ″), both
/// with O(h⁴) error; queries aligned with the node grid are exact up to the
/// accuracy of the stored nodes. Sampling a curve at twice the resolution of
/// a downstream transport keeps that transport's RK4 stage times exactly on
/// nodes.
pub struct SampledCurve {
    dim: usize,
    t0: f64,
    dt: f64,
    pos: Vec<Vec<f64>>,
    vel: Vec<Vec<f64>>,
    acc: Vec<Vec<f64>>,
}

impl SampledCurve {
    /// Samples the integral curve of `field` through `x0` over `[0, duration]`
    /// with `nodes` RK4 steps; γ″ = DX·X is attached from the field itself.
    pub fn from_field_flow(
        field: &VectorField,
        x0: &[f64],
        duration: f64,
        nodes: usize,
    ) -> Result<SampledCurve, FlowError> {
        field.domain().check_point(x0)?;
        let n = field.dim();
        let mut state = x0.to_vec();
        let mut stack = Vec::new();
        let mut pos = Vec::with_capacity(nodes + 1);
        integrate(
            |t, x, out| field.value_into(x, out, &mut stack).map_err(eval_err(t)),
            &mut state,
            0.0,
            duration,
            nodes,
            in_domain(field.domain()),
            |_, _, s| pos.push(s.to_vec()),
        )?;
        let mut vel = Vec::with_capacity(pos.len());
        let mut acc = Vec::with_capacity(pos.len());
        for x in &pos {
            let v = field.value_at(x)?;
            let mut a = vec![0.0; n];
            field
                .jacobian_apply_into(x, &v, &mut a, &mut stack)
                .map_err(eval_err(0.0))?;
            vel.push(v);
            acc.push(a);
        }
        Ok(SampledCurve {
            dim: n,
            t0: 0.0,
            dt: duration / nodes as f64,
            pos,
            vel,
            acc,
        })
    }

    /// Samples the geodesic of `c` with initial condition `(x0, v0)`;
    /// γ″ = −Γ(γ′, γ′) comes from the geodesic equation.
    pub fn from_geodesic(
        c: &Connection,
        x0: &[f64],
        v0: &[f64],
        duration: f64,
        nodes: usize,
    ) -> Result<SampledCurve, FlowError> {
        let n = c.dim();
        c.domain().check_point(x0)?;
        let mut state = [x0, v0].concat();
        let mut stack = Vec::new();
        let mut table = vec![0.0; n * n * n];
        let mut pos = Vec::with_capacity(nodes + 1);
        let mut vel = Vec::with_capacity(nodes + 1);
        integrate(
            geodesic_rhs(c, &mut stack, &mut table),
            &mut state,
            0.0,
            duration,
            nodes,
            in_domain(c.domain()),
            |_, _, s| {
                pos.push(s[..n].to_vec());
                vel.push(s[n..].to_vec());
            },
        )?;
        let mut acc = Vec::with_capacity(pos.len());
        for (x, v) in pos.iter().zip(&vel) {
            let gvv = c.contract_at(x, v, v)?;
            acc.push(gvv.into_iter().map(|g| -g).collect());
        }
        Ok(SampledCurve {
            dim: n,
            t0: 0.0,
            dt: duration / nodes as f64,
            pos,
            vel,
            acc,
        })
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let cells = self.pos.len() - 1;
        let raw = ((t - self.t0) / self.dt).clamp(0.0, cells as f64);
        let mut i = raw.floor() as usize;
        if i >= cells {
            i = cells - 1;
        }
        (i, raw - i as f64)
    }

    fn hermite(&self, values: &[Vec<f64>], slopes: &[Vec<f64>], t: f64, out: &mut [f64]) {
        let (i, s) = self.locate(t);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        for k in 0..self.dim {
            out[k] = h00 * values[i][k]
                + h10 * self.dt * slopes[i][k]
                + h01 * values[i + 1][k]
                + h11 * self.dt * slopes[i + 1][k];
        }
    }
}

impl Curve for SampledCurve {
    fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, t: f64, out: &mut [f64]) {
        self.hermite(&self.pos, &self.vel, t, out)
    }

    fn velocity(&self, t: f64, out: &mut [f64]) {
        self.hermite(&self.vel, &self.acc, t, out)
    }
}

/// Parallel transport of `v0 ∈ T_{γ(t_from)}M` to `T_{γ(t_to)}M` along an
/// externally supplied curve, by integrating V̇^k = −Γ^k_{ij} γ'^i V^j.
pub fn parallel_transport<Cv: Curve + ?Sized>(
    c: &Connection,
    curve: &Cv,
    v0: &[f64],
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> Result<Vec<f64>, FlowError> {
    let n = c.dim();
    if curve.dim() != n || v0.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: curve.dim().max(v0.len()),
        }
        .into());
    }
    if t_from == t_to {
        return Ok(v0.to_vec());
    }
    let mut state = v0.to_vec();
    let mut stack = Vec::new();
    let mut table = vec![0.0; n * n * n];
    let mut x = vec![0.0; n];
    let mut xdot = vec![0.0; n];
    integrate(
        |t, v, out: &mut [f64]| {
            curve.point(t, &mut x);
            curve.velocity(t, &mut xdot);
            c.gamma_into(&x, &mut table, &mut stack).map_err(eval_err(t))?;
            contract(&table, &xdot, v, out);
            for o in out.iter_mut() {
                *o = -*o;
            }
            Ok(())
        },
        &mut state,
        t_from,
        t_to - t_from,
        steps,
        |t, _: &[f64]| {
            let mut p = vec![0.0; n];
            curve.point(t, &mut p);
            if c.domain().contains(&p) {
                Ok(())
            } else {
                Err(FlowError::OutOfDomain { t, point: p })
            }
        },
        |_, _, _| {},
    )?;
    Ok(state)
}

/// Endpoint of a transport: the moved vector and the base point it sits at.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub vector: Vec<f64>,
    pub base: Vec<f64>,
}

/// Parallel transport along the integral curve η of `field` through `x0`
/// (η(0) = x0), carrying `v0 ∈ T_{η(t_from)}M` to `T_{η(t_to)}M`.
///
/// The base is first flowed from 0 to `t_from`, then base and vector are
/// integrated jointly; the curve is always anchored at `x0`, so repeated
/// calls with the same anchor transport along the same curve.
pub fn transport_along_field(
    c: &Connection,
    field: &VectorField,
    x0: &[f64],
    v0: &[f64],
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> Result<TransportResult, FlowError> {
    let start = if t_from == 0.0 {
        x0.to_vec()
    } else {
        flow_with_steps(field, x0, t_from, steps)?
    };
    if t_from == t_to {
        return Ok(TransportResult {
            vector: v0.to_vec(),
            base: start,
        });
    }
    let moved = horizontal_flow(
        c,
        field,
        &TangentPoint::new(start, v0.to_vec())?,
        t_to - t_from,
        steps,
    )?;
    Ok(TransportResult {
        vector: moved.fiber,
        base: moved.base,
    })
}

/// [`flow`] with an explicit step count instead of the config's rule,
/// for legs whose step budget is chosen by an estimator.
pub fn flow_with_steps(
    field: &VectorField,
    x0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<Vec<f64>, FlowError> {
    field.domain().check_point(x0)?;
    let mut state = x0.to_vec();
    let mut stack = Vec::new();
    integrate(
        |t, x, out| field.value_into(x, out, &mut stack).map_err(eval_err(t)),
        &mut state,
        0.0,
        duration,
        steps,
        in_domain(field.domain()),
        |_, _, _| {},
    )?;
    Ok(state)
}

/// Parallel transport along the geodesic of `c_spray` with initial condition
/// `(x0, u0)`, using the symbols of `c_transport` to move the vector. The two
/// connections may differ: a connection and its zero-torsion companion share
/// geodesics but transport differently.
pub fn transport_along_geodesic(
    c_spray: &Connection,
    c_transport: &Connection,
    x0: &[f64],
    u0: &[f64],
    v0: &[f64],
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> Result<TransportResult, FlowError> {
    let n = c_spray.dim();
    c_spray.domain().check_point(x0)?;
    if u0.len() != n || v0.len() != n || c_transport.dim() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: u0.len().max(v0.len()).max(c_transport.dim()),
        }
        .into());
    }
    let mut stack = Vec::new();
    let mut spray_table = vec![0.0; n * n * n];
    let mut transport_table = vec![0.0; n * n * n];

    // reach γ(t_from) first
    let mut geo_state = [x0, u0].concat();
    if t_from != 0.0 {
        integrate(
            geodesic_rhs(c_spray, &mut stack, &mut spray_table),
            &mut geo_state,
            0.0,
            t_from,
            steps,
            in_domain(c_spray.domain()),
            |_, _, _| {},
        )?;
    }
    if t_from == t_to {
        return Ok(TransportResult {
            vector: v0.to_vec(),
            base: geo_state[..n].to_vec(),
        });
    }

    let mut state = [&geo_state[..], v0].concat();
    integrate(
        |t, s, out: &mut [f64]| {
            let x = &s[..n];
            let u = &s[n..2 * n];
            let v = &s[2 * n..];
            c_spray
                .gamma_into(x, &mut spray_table, &mut stack)
                .map_err(eval_err(t))?;
            c_transport
                .gamma_into(x, &mut transport_table, &mut stack)
                .map_err(eval_err(t))?;
            out[..n].copy_from_slice(u);
            contract(&spray_table, u, u, &mut out[n..2 * n]);
            contract(&transport_table, u, v, &mut out[2 * n..]);
            for o in &mut out[n..] {
                *o = -*o;
            }
            Ok(())
        },
        &mut state,
        t_from,
        t_to - t_from,
        steps,
        in_domain(c_spray.domain()),
        |_, _, _| {},
    )?;
    Ok(TransportResult {
        vector: state[2 * n..].to_vec(),
        base: state[..n].to_vec(),
    })
}

/// Central-difference approximation of `∇_X Y (x)`:
/// `(τ^{(0,h)} Y(η(h)) − τ^{(0,−h)} Y(η(−h))) / 2h` along the integral curve
/// η of `X` through `x`. The error is O(h²).
pub fn covariant_derivative_via_transport(
    c: &Connection,
    direction: &VectorField,
    target: &VectorField,
    x: &[f64],
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, FlowError> {
    assert!(h > 0.0, "step must be positive");
    let steps = cfg.substeps(h);
    let forward_base = flow_with_steps(direction, x, h, steps)?;
    let backward_base = flow_with_steps(direction, x, -h, steps)?;
    let y_fwd = target.value_at(&forward_base)?;
    let y_bwd = target.value_at(&backward_base)?;
    let pulled_fwd = transport_along_field(c, direction, x, &y_fwd, h, 0.0, steps)?;
    let pulled_bwd = transport_along_field(c, direction, x, &y_bwd, -h, 0.0, steps)?;
    Ok(pulled_fwd
        .vector
        .iter()
        .zip(&pulled_bwd.vector)
        .map(|(f, b)| (f - b) / (2.0 * h))
        .collect())
}

/// Outcome of the transport-difference identity check.
#[derive(Debug, Clone, Copy)]
pub struct TransportDifferenceReport {
    /// `‖(τ^{(t,0)}V − τ̄^{(t,0)}V) − correction‖∞`, where the correction is
    /// the transported torsion integral; small when the identity holds.
    pub deviation: f64,
    /// `‖τ^{(t,0)}V − τ̄^{(t,0)}V‖∞`, the size of the effect being explained.
    pub difference_magnitude: f64,
}

/// Checks, along the geodesic of `c` with initial condition `(x0, u0)`, that
/// the gap between full and torsion-free parallel transport of `v0` equals
/// the transported integral of torsion against the moving frame:
///
/// τ^{(t,0)}V − τ̄^{(t,0)}V = τ̄^{(t,0)}(−½ ∫₀ᵗ τ̄^{(0,s)} T(γ'(s), τ^{(s,0)}V) ds).
///
/// Everything is integrated jointly: the state carries the geodesic, the
/// ∇-transported vector, and the matrix Q(s) of τ̄^{(0,s)} (Q̇ = Q·Γ̄[γ']),
/// with the integrand recorded at the nodes and summed by Simpson's rule;
/// final τ̄^{(t,0)} applications solve against Q(t).
pub fn transport_difference_check(
    c: &Connection,
    x0: &[f64],
    u0: &[f64],
    v0: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<TransportDifferenceReport, FlowError> {
    let n = c.dim();
    c.domain().check_point(x0)?;
    if u0.len() != n || v0.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: u0.len().max(v0.len()),
        }
        .into());
    }
    let cbar = c.torsion_free_part();
    let mut steps = cfg.substeps(t);
    if steps % 2 == 1 {
        steps += 1; // Simpson needs an even node count
    }

    // state: [x | u | V | Q (row-major)], Q(0) = I
    let mut state = vec![0.0; 3 * n + n * n];
    state[..n].copy_from_slice(x0);
    state[n..2 * n].copy_from_slice(u0);
    state[2 * n..3 * n].copy_from_slice(v0);
    for k in 0..n {
        state[3 * n + k * n + k] = 1.0;
    }

    let mut stack = Vec::new();
    let mut table = vec![0.0; n * n * n];
    let mut bar_table = vec![0.0; n * n * n];
    let mut bar_dir = vec![0.0; n * n];

    let mut node_stack = Vec::new();
    let mut node_table = vec![0.0; n * n * n];
    let mut node_f = vec![0.0; n];
    let mut node_g = vec![0.0; n];
    let mut integrand = vec![0.0; n];
    let mut node_error: Option<EvalError> = None;

    integrate(
        |t, s, out: &mut [f64]| {
            let x = &s[..n];
            let u = &s[n..2 * n];
            let v = &s[2 * n..3 * n];
            let q = &s[3 * n..];
            c.gamma_into(x, &mut table, &mut stack).map_err(eval_err(t))?;
            cbar.gamma_into(x, &mut bar_table, &mut stack)
                .map_err(eval_err(t))?;
            out[..n].copy_from_slice(u);
            contract(&table, u, u, &mut out[n..2 * n]);
            contract(&table, u, v, &mut out[2 * n..3 * n]);
            for o in &mut out[n..3 * n] {
                *o = -*o;
            }
            // Γ̄[u]^m_j = Σ_i Γ̄^m_{ij} u^i, then Q̇ = Q·Γ̄[u]
            for m in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (i, ui) in u.iter().enumerate() {
                        acc += bar_table[(m * n + i) * n + j] * ui;
                    }
                    bar_dir[m * n + j] = acc;
                }
            }
            for k in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += q[k * n + m] * bar_dir[m * n + j];
                    }
                    out[3 * n + k * n + j] = acc;
                }
            }
            Ok(())
        },
        &mut state,
        0.0,
        t,
        steps,
        in_domain(c.domain()),
        |step, _, s| {
            if node_error.is_some() {
                return;
            }
            let x = &s[..n];
            let u = &s[n..2 * n];
            let v = &s[2 * n..3 * n];
            let q = &s[3 * n..];
            if let Err(e) = c.gamma_into(x, &mut node_table, &mut node_stack) {
                node_error = Some(e);
                return;
            }
            // torsion against the moving data: T(u, V) = Γ(u, V) − Γ(V, u)
            contract(&node_table, u, v, &mut node_f);
            contract(&node_table, v, u, &mut node_g);
            let weight = if step == 0 || step == steps {
                1.0
            } else if step % 2 == 1 {
                4.0
            } else {
                2.0
            };
            // f = Q · T(u, V)
            for k in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += q[k * n + m] * (node_f[m] - node_g[m]);
                }
                integrand[k] += weight * acc;
            }
        },
    )?;
    if let Some(source) = node_error {
        return Err(FlowError::Eval { t, source });
    }

    let h = t / steps as f64;
    let simpson: Vec<f64> = integrand.iter().map(|v| v * h / 3.0).collect();

    let q_end = DMatrix::from_row_slice(n, n, &state[3 * n..]);
    let lu = q_end.lu();
    let tau_bar_v = lu
        .solve(&DVector::from_column_slice(v0))
        .ok_or(FlowError::SingularTransport { t })?;
    let correction = lu
        .solve(&DVector::from_iterator(n, simpson.iter().map(|v| -0.5 * v)))
        .ok_or(FlowError::SingularTransport { t })?;

    let v_end = &state[2 * n..3 * n];
    let mut deviation = 0.0f64;
    let mut magnitude = 0.0f64;
    for k in 0..n {
        let lhs = v_end[k] - tau_bar_v[k];
        deviation = deviation.max((lhs - correction[k]).abs());
        magnitude = magnitude.max(lhs.abs());
    }
    Ok(TransportDifferenceReport {
        deviation,
        difference_magnitude: magnitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::geometry::ChartDomain;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn rotation_field() -> VectorField {
        VectorField::from_strs(ChartDomain::unbounded(2), &["-x2", "x1"]).unwrap()
    }

    #[test]
    fn substep_rules() {
        let c = cfg();
        assert_eq!(c.substeps(1.0), 200);
        assert_eq!(c.substeps(-1.5), 300);
        assert_eq!(c.substeps(0.001), 10);
        assert_eq!(c.estimator_substeps(0.01), 1000);
        assert_eq!(c.estimator_substeps(-0.1), 100);
        assert_eq!(c.estimator_substeps(10.0), 10);
        assert_eq!(c.estimator_substeps(0.0), 10);
    }

    #[test]
    fn flow_matches_rotation_closed_form() {
        let f = rotation_field();
        let t = 1.5f64;
        let end = flow(&f, &[1.0, 0.0], t, &cfg()).unwrap();
        assert!((end[0] - t.cos()).abs() < 1e-8);
        assert!((end[1] - t.sin()).abs() < 1e-8);
    }

    #[test]
    fn flow_reverses() {
        let f = VectorField::from_strs(ChartDomain::unbounded(2), &["x2", "-sin(x1)"]).unwrap();
        let x0 = [0.4, -0.3];
        let fwd = flow(&f, &x0, 2.0, &cfg()).unwrap();
        let back = flow(&f, &fwd, -2.0, &cfg()).unwrap();
        assert!(max_abs_diff(&back, &x0) < 1e-9);
    }

    #[test]
    fn flow_respects_group_property() {
        let f = VectorField::from_strs(ChartDomain::unbounded(2), &["x2", "-sin(x1)"]).unwrap();
        let dev = flow_group_deviation(&f, &[0.4, -0.3], 0.4, 0.7, &cfg()).unwrap();
        assert!(dev < 1e-9, "group deviation {dev}");
    }

    #[test]
    fn flow_samples_are_consistent_with_flow() {
        let f = rotation_field();
        let samples = flow_samples(&f, &[1.0, 0.0], 1.0, &cfg()).unwrap();
        assert_eq!(samples.len(), 201);
        assert_eq!(samples[0].t, 0.0);
        let end = flow(&f, &[1.0, 0.0], 1.0, &cfg()).unwrap();
        assert_eq!(samples.last().unwrap().state, end);
    }

    #[test]
    fn leaving_the_box_is_an_error() {
        let d = ChartDomain::boxed(vec![-1.0], vec![1.0]).unwrap();
        let f = VectorField::from_strs(d, &["1"]).unwrap();
        match flow(&f, &[0.9], 1.0, &cfg()) {
            Err(FlowError::OutOfDomain { t, point }) => {
                assert!(t > 0.09 && t < 0.2, "exited at t = {t}");
                assert!(point[0] > 1.0);
            }
            other => panic!("expected domain exit, got {other:?}"),
        }
    }

    #[test]
    fn finite_time_blowup_is_caught() {
        let f = VectorField::from_strs(ChartDomain::unbounded(1), &["x1^2"]).unwrap();
        let r = flow(&f, &[1.0], 2.0, &cfg());
        assert!(
            matches!(r, Err(FlowError::NonFinite { .. }) | Err(FlowError::Eval { .. })),
            "blowup must surface as an integration error"
        );
    }

    #[test]
    fn flat_geodesics_are_straight() {
        let c = catalog::flat(3);
        let end = geodesic(&c, &[1.0, 2.0, 3.0], &[0.5, -1.0, 0.25], 2.0, &cfg()).unwrap();
        assert!(max_abs_diff(&end.base, &[2.0, 0.0, 3.5]) < 1e-12);
        assert!(max_abs_diff(&end.fiber, &[0.5, -1.0, 0.25]) < 1e-12);
    }

    #[test]
    fn hyperbolic_geodesic_closed_form() {
        // through (0,1) with unit horizontal velocity: γ(t) = (tanh t, sech t)
        let c = catalog::hyperbolic_half_plane();
        let t = 1.0f64;
        let end = geodesic(&c, &[0.0, 1.0], &[1.0, 0.0], t, &cfg()).unwrap();
        let sech = 1.0 / t.cosh();
        assert!((end.base[0] - t.tanh()).abs() < 1e-8);
        assert!((end.base[1] - sech).abs() < 1e-8);
        assert!((end.fiber[0] - sech * sech).abs() < 1e-8);
        assert!((end.fiber[1] + sech * t.tanh()).abs() < 1e-8);
    }

    #[test]
    fn geodesic_velocity_is_parallel_along_itself() {
        let c = catalog::hyperbolic_half_plane();
        let x0 = [0.3, 1.2];
        let u0 = [0.8, -0.4];
        let t = 1.0;
        let steps = cfg().substeps(t);
        let end = geodesic(&c, &x0, &u0, t, &cfg()).unwrap();
        let moved = transport_along_geodesic(&c, &c, &x0, &u0, &u0, 0.0, t, steps).unwrap();
        assert!(max_abs_diff(&moved.vector, &end.fiber) < 1e-8);
        assert!(max_abs_diff(&moved.base, &end.base) < 1e-10);
    }

    #[test]
    fn clipped_geodesic_truncates_at_the_boundary() {
        let c = catalog::sphere_chart();
        // head for the excluded polar cap: θ̇ = −1 from θ = 1 hits θ = 0.5
        let (samples, truncated) =
            geodesic_samples_clipped(&c, &[1.0, 0.0], &[-1.0, 0.0], 2.0, &cfg()).unwrap();
        assert!(truncated);
        assert!(samples.len() > 10);
        let last = samples.last().unwrap();
        assert!(last.state[0] >= 0.5 && last.state[0] < 0.55);
        // the full-length version fails outright
        assert!(geodesic(&c, &[1.0, 0.0], &[-1.0, 0.0], 2.0, &cfg()).is_err());
    }

    #[test]
    fn vertical_flow_is_exact_translation() {
        let f = rotation_field();
        let v = TangentPoint::new(vec![2.0, 1.0], vec![0.5, 0.5]).unwrap();
        let moved = vertical_flow(&f, &v, 0.25).unwrap();
        assert_eq!(moved.base, vec![2.0, 1.0]);
        // X(2,1) = (−1, 2)
        assert!(max_abs_diff(&moved.fiber, &[0.25, 1.0]) < 1e-15);
    }

    #[test]
    fn horizontal_flow_on_flat_space_keeps_fiber() {
        let c = catalog::flat(2);
        let f = rotation_field();
        let v = TangentPoint::new(vec![1.0, 0.0], vec![0.3, -0.7]).unwrap();
        let moved = horizontal_flow(&c, &f, &v, 1.0, 200).unwrap();
        assert!(max_abs_diff(&moved.fiber, &v.fiber) < 1e-12);
        assert!((moved.base[0] - 1.0f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn horizontal_flow_preserves_hyperbolic_norm() {
        let c = catalog::hyperbolic_half_plane();
        let f = VectorField::from_strs(c.domain().clone(), &["x2", "0.3*x1"]).unwrap();
        let v = TangentPoint::new(vec![0.2, 1.0], vec![0.6, -0.1]).unwrap();
        let norm = |p: &TangentPoint| {
            (p.fiber[0] * p.fiber[0] + p.fiber[1] * p.fiber[1]) / (p.base[1] * p.base[1])
        };
        let moved = horizontal_flow(&c, &f, &v, 1.0, 200).unwrap();
        assert!((norm(&moved) - norm(&v)).abs() < 1e-8);
    }

    #[test]
    fn complete_flow_of_linear_field_is_its_linearization() {
        // X = (−x2, x1): both base and fiber rotate by the same matrix
        let f = rotation_field();
        let v = TangentPoint::new(vec![1.0, 0.5], vec![-0.2, 0.9]).unwrap();
        let t = 0.8f64;
        let moved = complete_flow(&f, &v, t, 200).unwrap();
        let rot = |p: &[f64]| {
            vec![
                t.cos() * p[0] - t.sin() * p[1],
                t.sin() * p[0] + t.cos() * p[1],
            ]
        };
        assert!(max_abs_diff(&moved.base, &rot(&v.base)) < 1e-8);
        assert!(max_abs_diff(&moved.fiber, &rot(&v.fiber)) < 1e-8);
    }

    #[test]
    fn horizontal_flow_matches_transport_along_sampled_curve() {
        // same transport through two code paths: joint integration vs an
        // interpolated curve sampled at twice the transport resolution
        let c = catalog::hyperbolic_half_plane();
        let f = VectorField::from_strs(c.domain().clone(), &["x2", "0.3*x1"]).unwrap();
        let v = TangentPoint::new(vec![0.2, 1.0], vec![0.6, -0.1]).unwrap();
        let t = 1.0;
        let steps = cfg().substeps(t);
        let joint = horizontal_flow(&c, &f, &v, t, steps).unwrap();
        let curve = SampledCurve::from_field_flow(&f, &v.base, t, 2 * steps).unwrap();
        let along = parallel_transport(&c, &curve, &v.fiber, 0.0, t, steps).unwrap();
        assert!(
            max_abs_diff(&joint.fiber, &along) < 1e-9,
            "paths differ by {}",
            max_abs_diff(&joint.fiber, &along)
        );
    }

    #[test]
    fn transport_along_analytic_curve_matches_geodesic_transport() {
        let c = catalog::hyperbolic_half_plane();
        let curve = ClosureCurve::new(
            2,
            |t: f64, out: &mut [f64]| {
                out[0] = t.tanh();
                out[1] = 1.0 / t.cosh();
            },
            |t: f64, out: &mut [f64]| {
                let sech = 1.0 / t.cosh();
                out[0] = sech * sech;
                out[1] = -sech * t.tanh();
            },
        );
        let v0 = [0.25, 0.4];
        let steps = cfg().substeps(1.0);
        let analytic = parallel_transport(&c, &curve, &v0, 0.0, 1.0, steps).unwrap();
        let numeric =
            transport_along_geodesic(&c, &c, &[0.0, 1.0], &[1.0, 0.0], &v0, 0.0, 1.0, steps)
                .unwrap();
        assert!(max_abs_diff(&analytic, &numeric.vector) < 1e-7);
    }

    #[test]
    fn transport_roundtrip_and_linearity() {
        let c = catalog::hyperbolic_half_plane();
        let f = VectorField::from_strs(c.domain().clone(), &["x2", "0.3*x1"]).unwrap();
        let x0 = [0.2, 1.0];
        let steps = cfg().substeps(1.0);
        let v = [0.6, -0.1];
        let w = [0.2, 0.5];
        let out = transport_along_field(&c, &f, &x0, &v, 0.0, 1.0, steps).unwrap();
        let back = transport_along_field(&c, &f, &x0, &out.vector, 1.0, 0.0, steps).unwrap();
        assert!(max_abs_diff(&back.vector, &v) < 1e-9);
        assert!(max_abs_diff(&back.base, &x0) < 1e-10);

        let tv = transport_along_field(&c, &f, &x0, &v, 0.0, 1.0, steps).unwrap();
        let tw = transport_along_field(&c, &f, &x0, &w, 0.0, 1.0, steps).unwrap();
        let combo: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let tcombo = transport_along_field(&c, &f, &x0, &combo, 0.0, 1.0, steps).unwrap();
        for k in 0..2 {
            let lin = 2.0 * tv.vector[k] - 3.0 * tw.vector[k];
            assert!((tcombo.vector[k] - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn torsion_shifts_transport_but_not_geodesics() {
        let c = catalog::constant_torsion(0.4);
        let cbar = c.torsion_free_part();
        let x0 = [0.1, -0.2, 0.3];
        let u0 = [1.0, 0.5, -0.25];
        let v0 = [0.0, 1.0, 0.0];
        let steps = cfg().substeps(1.0);
        let full = transport_along_geodesic(&c, &c, &x0, &u0, &v0, 0.0, 1.0, steps).unwrap();
        let bar = transport_along_geodesic(&c, &cbar, &x0, &u0, &v0, 0.0, 1.0, steps).unwrap();
        assert!(max_abs_diff(&full.base, &bar.base) < 1e-12, "same geodesic");
        assert!(
            max_abs_diff(&full.vector, &bar.vector) > 1e-3,
            "transports must feel the torsion"
        );
    }

    #[test]
    fn transport_difference_identity_with_torsion() {
        let c = catalog::constant_torsion(0.4);
        let r = transport_difference_check(
            &c,
            &[0.1, -0.2, 0.3],
            &[1.0, 0.5, -0.25],
            &[0.0, 1.0, 0.0],
            0.5,
            &cfg(),
        )
        .unwrap();
        assert!(
            r.difference_magnitude > 1e-2,
            "effect too small to be meaningful: {}",
            r.difference_magnitude
        );
        assert!(r.deviation < 1e-8, "identity violated by {}", r.deviation);
    }

    #[test]
    fn transport_difference_trivial_without_torsion() {
        let c = catalog::hyperbolic_half_plane();
        let r = transport_difference_check(&c, &[0.0, 1.0], &[1.0, 0.0], &[0.3, 0.7], 0.5, &cfg())
            .unwrap();
        assert!(r.difference_magnitude < 1e-10);
        assert!(r.deviation < 1e-10);
    }

    #[test]
    fn covariant_derivative_via_transport_matches_symbolic() {
        let c = catalog::hyperbolic_half_plane();
        let x_dir = VectorField::from_strs(c.domain().clone(), &["x2", "0.3*x1"]).unwrap();
        let y = VectorField::from_strs(c.domain().clone(), &["x1*x2", "1"]).unwrap();
        let x = [0.4, 1.3];
        let numeric =
            covariant_derivative_via_transport(&c, &x_dir, &y, &x, 1e-4, &cfg()).unwrap();
        let direction = TangentPoint::new(x.to_vec(), x_dir.value_at(&x).unwrap()).unwrap();
        let symbolic = c.covariant_derivative_at(&direction, &y).unwrap();
        assert!(
            max_abs_diff(&numeric, &symbolic) < 1e-6,
            "difference {}",
            max_abs_diff(&numeric, &symbolic)
        );
    }

    #[test]
    fn integrator_is_fourth_order() {
        let f = rotation_field();
        let t = 1.0f64;
        let exact = [t.cos(), t.sin()];
        let err = |spu: f64| {
            let c = IntegratorConfig {
                substeps_per_unit_time: spu,
            };
            let end = flow(&f, &[1.0, 0.0], t, &c).unwrap();
            max_abs_diff(&end, &exact)
        };
        let ratio = err(25.0) / err(50.0);
        assert!(
            (12.0..20.0).contains(&ratio),
            "halving the step should shrink the error ~16x, got {ratio}"
        );
    }
}
