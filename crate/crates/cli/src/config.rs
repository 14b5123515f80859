//! Problem definitions loaded from JSON.
//!
//! A config names one connection, a set of vector fields, and optionally some
//! distributions over those fields, together with probe / integrator /
//! estimator settings.  Everything downstream of the file is resolved here so
//! the commands only ever see validated objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use affinelab_core::catalog;
use affinelab_core::geometry::{
    christoffel_from_metric, ChartDomain, Connection, MetricField, VectorField,
};
use affinelab_core::sample;
use affinelab_core::IntegratorConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Raw file schema.  `null` in a chart bound means that side is unbounded.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    #[serde(default)]
    pub chart: Option<ChartBounds>,
    pub connection: ConnectionSpec,
    #[serde(default)]
    pub fields: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub distributions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub probes: ProbeSettings,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub estimator: EstimatorSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBounds {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

/// Exactly one of the three ways to give a connection.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ConnectionSpec {
    /// A named entry from the built-in catalog.
    Catalog { catalog: String },
    /// Christoffel symbols Γᵏᵢⱼ as expressions, indexed `[k][i][j]`.
    Christoffel { christoffel: Vec<Vec<Vec<String>>> },
    /// A metric tensor whose Levi-Civita symbols are derived symbolically.
    Metric { metric: Vec<Vec<String>> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    #[serde(default = "default_grid_per_axis")]
    pub grid_per_axis: usize,
    #[serde(default = "default_random_count")]
    pub random_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl Default for ProbeSettings {
    fn default() -> ProbeSettings {
        ProbeSettings {
            lower: None,
            upper: None,
            grid_per_axis: default_grid_per_axis(),
            random_count: default_random_count(),
            seed: 0,
            horizon: default_horizon(),
        }
    }
}

fn default_grid_per_axis() -> usize {
    2
}

fn default_random_count() -> usize {
    20
}

fn default_horizon() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub substeps_per_unit_time: f64,
}

impl Default for IntegratorSettings {
    fn default() -> IntegratorSettings {
        IntegratorSettings {
            substeps_per_unit_time: IntegratorConfig::default().substeps_per_unit_time,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    #[serde(default = "default_step")]
    pub t: f64,
    #[serde(default = "default_richardson")]
    pub richardson: bool,
    #[serde(default = "default_ladder_start")]
    pub ladder_start: f64,
    #[serde(default = "default_ladder_points")]
    pub ladder_points: usize,
}

fn default_step() -> f64 {
    1e-2
}

fn default_richardson() -> bool {
    true
}

fn default_ladder_start() -> f64 {
    0.1
}

fn default_ladder_points() -> usize {
    8
}

impl Default for EstimatorSettings {
    fn default() -> EstimatorSettings {
        EstimatorSettings {
            t: default_step(),
            richardson: default_richardson(),
            ladder_start: default_ladder_start(),
            ladder_points: default_ladder_points(),
        }
    }
}

/// Fully resolved problem: parsed expressions, one connection, a probe box
/// known to sit inside the chart.
pub struct Problem {
    pub connection: Connection,
    pub fields: BTreeMap<String, VectorField>,
    pub distributions: BTreeMap<String, Vec<String>>,
    pub probe_lower: Vec<f64>,
    pub probe_upper: Vec<f64>,
    pub grid_per_axis: usize,
    pub random_count: usize,
    pub seed: u64,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
    pub step: f64,
    pub richardson: bool,
    pub ladder_start: f64,
    pub ladder_points: usize,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<ProblemConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ProblemConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Problem, ConfigError> {
        let n = self.dim;
        if n == 0 {
            return Err(invalid("dim must be at least 1"));
        }

        let (connection, catalog_box) = self.resolve_connection()?;
        let domain = connection.domain().clone();

        let mut fields = BTreeMap::new();
        for (name, exprs) in &self.fields {
            if exprs.len() != n {
                return Err(invalid(format!(
                    "field {name} has {} components, expected {n}",
                    exprs.len()
                )));
            }
            let strs: Vec<&str> = exprs.iter().map(String::as_str).collect();
            let f = VectorField::from_strs(domain.clone(), &strs)
                .map_err(|e| invalid(format!("field {name}: {e}")))?;
            fields.insert(name.clone(), f);
        }

        for (name, gens) in &self.distributions {
            if gens.is_empty() {
                return Err(invalid(format!("distribution {name} has no generators")));
            }
            for g in gens {
                if !fields.contains_key(g) {
                    return Err(invalid(format!(
                        "distribution {name} references unknown field {g}"
                    )));
                }
            }
        }

        let (probe_lower, probe_upper) = self.resolve_probe_box(n, &domain, catalog_box)?;
        if !domain.contains(&probe_lower) || !domain.contains(&probe_upper) {
            return Err(invalid("probe box leaves the chart domain"));
        }

        if self.integrator.substeps_per_unit_time <= 0.0 {
            return Err(invalid("integrator.substeps_per_unit_time must be positive"));
        }
        if !(self.estimator.t.is_finite() && self.estimator.t > 0.0) {
            return Err(invalid("estimator.t must be a positive finite number"));
        }
        if !(self.estimator.ladder_start.is_finite() && self.estimator.ladder_start > 0.0) {
            return Err(invalid("estimator.ladder_start must be positive"));
        }
        if self.estimator.ladder_points == 0 {
            return Err(invalid("estimator.ladder_points must be at least 1"));
        }
        if !(self.probes.horizon.is_finite() && self.probes.horizon > 0.0) {
            return Err(invalid("probes.horizon must be positive"));
        }

        Ok(Problem {
            connection,
            fields,
            distributions: self.distributions.clone(),
            probe_lower,
            probe_upper,
            grid_per_axis: self.probes.grid_per_axis,
            random_count: self.probes.random_count,
            seed: self.probes.seed,
            horizon: self.probes.horizon,
            integrator: IntegratorConfig {
                substeps_per_unit_time: self.integrator.substeps_per_unit_time,
            },
            step: self.estimator.t,
            richardson: self.estimator.richardson,
            ladder_start: self.estimator.ladder_start,
            ladder_points: self.estimator.ladder_points,
        })
    }

    /// Returns the connection plus, for catalog entries, their probe box.
    fn resolve_connection(
        &self,
    ) -> Result<(Connection, Option<(Vec<f64>, Vec<f64>)>), ConfigError> {
        match &self.connection {
            ConnectionSpec::Catalog { catalog: name } => {
                if self.chart.is_some() {
                    return Err(invalid(
                        "chart bounds are fixed by catalog connections; drop the chart key",
                    ));
                }
                let entry = catalog::entry_by_name(name)
                    .ok_or_else(|| invalid(format!("unknown catalog connection {name}")))?;
                if entry.connection.dim() != self.dim {
                    return Err(invalid(format!(
                        "catalog connection {name} lives in dimension {}, config says {}",
                        entry.connection.dim(),
                        self.dim
                    )));
                }
                let probe_box = (entry.probe_lower.clone(), entry.probe_upper.clone());
                Ok((entry.connection, Some(probe_box)))
            }
            ConnectionSpec::Christoffel { christoffel } => {
                let domain = self.resolve_chart()?;
                let rows: Vec<Vec<Vec<&str>>> = christoffel
                    .iter()
                    .map(|plane| {
                        plane
                            .iter()
                            .map(|row| row.iter().map(String::as_str).collect())
                            .collect()
                    })
                    .collect();
                let c = Connection::from_strs(domain, &rows)
                    .map_err(|e| invalid(format!("christoffel symbols: {e}")))?;
                Ok((c, None))
            }
            ConnectionSpec::Metric { metric } => {
                let domain = self.resolve_chart()?;
                let rows: Vec<Vec<&str>> = metric
                    .iter()
                    .map(|row| row.iter().map(String::as_str).collect())
                    .collect();
                let g = MetricField::from_strs(domain.clone(), &rows)
                    .map_err(|e| invalid(format!("metric: {e}")))?;
                // invertibility is checked at the probe grid
                let (lo, hi) = self.resolve_probe_box(self.dim, &domain, None)?;
                let grid = sample::grid_points(&lo, &hi, self.probes.grid_per_axis.max(2));
                let c = christoffel_from_metric(&g, &grid)
                    .map_err(|e| invalid(format!("metric: {e}")))?;
                Ok((c, None))
            }
        }
    }

    fn resolve_chart(&self) -> Result<ChartDomain, ConfigError> {
        let n = self.dim;
        match &self.chart {
            None => Ok(ChartDomain::unbounded(n)),
            Some(b) => {
                if b.lower.len() != n || b.upper.len() != n {
                    return Err(invalid(format!(
                        "chart bounds must have {n} entries per side"
                    )));
                }
                let lower: Vec<f64> = b
                    .lower
                    .iter()
                    .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                    .collect();
                let upper: Vec<f64> = b.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
                ChartDomain::boxed(lower, upper).map_err(|e| invalid(format!("chart bounds: {e}")))
            }
        }
    }

    fn resolve_probe_box(
        &self,
        n: usize,
        domain: &ChartDomain,
        catalog_box: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
        match (&self.probes.lower, &self.probes.upper) {
            (Some(lo), Some(hi)) => {
                if lo.len() != n || hi.len() != n {
                    return Err(invalid(format!("probe box must have {n} entries per side")));
                }
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(invalid("probe box has lower > upper"));
                }
                Ok((lo.clone(), hi.clone()))
            }
            (None, None) => {
                if let Some(b) = catalog_box {
                    return Ok(b);
                }
                // fall back to a finite chart box when there is one
                if let Some(bounds) = domain.bounds() {
                    let lo = bounds.lower.clone();
                    let hi = bounds.upper.clone();
                    if lo.iter().chain(&hi).all(|v| v.is_finite()) {
                        return Ok((lo, hi));
                    }
                }
                Err(invalid(
                    "probes.lower and probes.upper are required for this chart",
                ))
            }
            _ => Err(invalid("probes.lower and probes.upper must come together")),
        }
    }
}
