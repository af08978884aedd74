//! Experiment configuration: TOML with sections `[model]`, `[run]`,
//! `[observables]` and `[output]`.
//!
//! ```toml
//! [model]
//! side = 4
//! dim = 3
//! beta = 2.0
//! u = 1.0
//! spin = 0.5
//!
//! [run]
//! measure_sweeps = 1000
//! ```

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use randloop::graph::Graph;
use randloop::mcmc::RunPlan;
use randloop::model::{ModelParams, Spin};
use randloop::observables::MeasureSettings;
use serde::{Deserialize, Serialize};
use toml::Spanned;

/// A configuration problem, located by line when possible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphSpec {
    PeriodicCube { side: usize, dim: usize },
    /// Path to an edge-list file, relative to the config file.
    EdgeList { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub graph: GraphSpec,
    pub beta: f64,
    pub u: f64,
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin: Option<Spin>,
}

impl ModelConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams { beta: self.beta, u: self.u, theta: self.theta, spin: self.spin }
    }

    /// The spin whose multiplicity is θ, if θ is a positive integer.
    pub fn effective_spin(&self) -> Option<Spin> {
        self.spin.or_else(|| {
            let m = self.theta.round();
            (m == self.theta && m >= 2.0).then(|| Spin::from_twice(m as u32 - 1).ok()).flatten()
        })
    }

    pub fn load_graph(&self, base: &Path) -> Result<Graph, String> {
        match &self.graph {
            GraphSpec::PeriodicCube { side, dim } => Graph::periodic_cubic(*side, *dim).map_err(|e| e.to_string()),
            GraphSpec::EdgeList { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| format!("{}: {e}", full.display()))?;
                Graph::parse_edge_list(&text).map_err(|e| format!("{}: {e}", full.display()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub plan: RunPlan,
    pub chains: u64,
    /// Sweeps between checkpoint writes; `None` writes only at the end.
    pub checkpoint_every: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Correlations,
    Scalars,
    Fourier,
    TauAlpha,
    Partitions,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Correlations, Estimator::Scalars, Estimator::Fourier, Estimator::TauAlpha, Estimator::Partitions];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservablesConfig {
    pub estimators: Vec<Estimator>,
    pub settings: MeasureSettings,
    /// Batch length for batch-means errors; `None` picks one from the run length.
    pub batch_size: Option<u64>,
}

impl ObservablesConfig {
    pub fn enabled(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub observables: ObservablesConfig,
    pub output: OutputConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    run: RawRun,
    #[serde(default)]
    observables: RawObservables,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    side: Option<Spanned<usize>>,
    dim: Option<Spanned<usize>>,
    edge_list: Option<Spanned<String>>,
    beta: Spanned<f64>,
    u: Spanned<f64>,
    theta: Option<Spanned<f64>>,
    spin: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    burn_in_sweeps: u64,
    measure_sweeps: Spanned<u64>,
    thinning: Option<Spanned<u64>>,
    sweep_size: Option<Spanned<u64>>,
    #[serde(default)]
    seed: u64,
    chains: Option<Spanned<u64>>,
    checkpoint_every: Option<Spanned<u64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawObservables {
    estimators: Option<Vec<Estimator>>,
    time_points: Option<Spanned<usize>>,
    full_lattice_cap: Option<usize>,
    all_times_cap: Option<usize>,
    partition_floor: Option<Spanned<f64>>,
    partition_max: Option<usize>,
    batch_size: Option<Spanned<u64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.0.len());
        self.0[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError { line: Some(self.line(span)), message: message.into() })
    }
}

fn at_least_one(lines: &Lines<'_>, v: &Option<Spanned<u64>>, name: &str) -> Result<(), ConfigError> {
    match v {
        Some(s) if *s.get_ref() == 0 => lines.err(s.span(), format!("{name} must be at least 1")),
        _ => Ok(()),
    }
}

/// Parses and validates a configuration. The first problem found is
/// reported with its line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let lines = Lines(text);
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| lines.line(s)),
        message: e.message().trim().to_string(),
    })?;

    let m = raw.model;
    let graph = match (&m.side, &m.dim, &m.edge_list) {
        (Some(side), Some(dim), None) => {
            if *side.get_ref() == 0 {
                return lines.err(side.span(), "side must be at least 1");
            }
            if *dim.get_ref() == 0 {
                return lines.err(dim.span(), "dim must be at least 1");
            }
            GraphSpec::PeriodicCube { side: *side.get_ref(), dim: *dim.get_ref() }
        }
        (None, None, Some(path)) => GraphSpec::EdgeList { path: PathBuf::from(path.get_ref()) },
        (_, _, Some(path)) => return lines.err(path.span(), "give either side and dim or edge_list, not both"),
        (Some(s), None, None) => return lines.err(s.span(), "side needs dim"),
        (None, Some(d), None) => return lines.err(d.span(), "dim needs side"),
        (None, None, None) => {
            return Err(ConfigError { line: None, message: "[model] needs side and dim, or edge_list".into() })
        }
    };
    let beta = *m.beta.get_ref();
    if !(beta.is_finite() && beta > 0.0) {
        return lines.err(m.beta.span(), format!("beta must be > 0, got {beta}"));
    }
    let u = *m.u.get_ref();
    if !(0.0..=1.0).contains(&u) {
        return lines.err(m.u.span(), format!("u must lie in [0, 1], got {u}"));
    }
    let spin = match &m.spin {
        Some(s) => Some(Spin::from_f64(*s.get_ref()).or_else(|e| lines.err(s.span(), e.to_string()))?),
        None => None,
    };
    let theta = match (&m.theta, spin) {
        (Some(t), Some(s)) => {
            let t_val = *t.get_ref();
            if t_val != s.multiplicity() as f64 {
                return lines.err(
                    t.span(),
                    format!("θ ≠ 2S+1: theta = {t_val} but S = {s} gives 2S+1 = {}", s.multiplicity()),
                );
            }
            t_val
        }
        (Some(t), None) => {
            let t_val = *t.get_ref();
            if !(t_val.is_finite() && t_val > 0.0) {
                return lines.err(t.span(), format!("theta must be > 0, got {t_val}"));
            }
            t_val
        }
        (None, Some(s)) => s.multiplicity() as f64,
        (None, None) => return Err(ConfigError { line: None, message: "[model] needs theta or spin".into() }),
    };

    let r = raw.run;
    if *r.measure_sweeps.get_ref() == 0 {
        return lines.err(r.measure_sweeps.span(), "measure_sweeps must be at least 1");
    }
    at_least_one(&lines, &r.thinning, "thinning")?;
    at_least_one(&lines, &r.sweep_size, "sweep_size")?;
    at_least_one(&lines, &r.chains, "chains")?;
    at_least_one(&lines, &r.checkpoint_every, "checkpoint_every")?;
    let plan = RunPlan {
        burn_in_sweeps: r.burn_in_sweeps,
        measure_sweeps: r.measure_sweeps.into_inner(),
        thinning: r.thinning.map_or(1, Spanned::into_inner),
        sweep_size: r.sweep_size.map(Spanned::into_inner),
        seed: r.seed,
    };
    if plan.observations() == 0 {
        return Err(ConfigError { line: None, message: "measure_sweeps / thinning gives no observations".into() });
    }

    let o = raw.observables;
    let defaults = MeasureSettings::default();
    if let Some(tp) = &o.time_points {
        if *tp.get_ref() == 0 {
            return lines.err(tp.span(), "time_points must be at least 1");
        }
    }
    if let Some(pf) = &o.partition_floor {
        if !(0.0..1.0).contains(pf.get_ref()) {
            return lines.err(pf.span(), format!("partition_floor must lie in [0, 1), got {}", pf.get_ref()));
        }
    }
    at_least_one(&lines, &o.batch_size, "batch_size")?;
    let estimators = o.estimators.unwrap_or_else(|| Estimator::ALL.to_vec());
    let settings = MeasureSettings {
        time_points: o.time_points.map_or(defaults.time_points, Spanned::into_inner),
        full_lattice_cap: o.full_lattice_cap.unwrap_or(defaults.full_lattice_cap),
        all_times_cap: o.all_times_cap.unwrap_or(defaults.all_times_cap),
        record_partitions: estimators.contains(&Estimator::Partitions),
        partition_floor: o.partition_floor.map_or(defaults.partition_floor, Spanned::into_inner),
        partition_max: o.partition_max.unwrap_or(defaults.partition_max),
    };

    Ok(ExperimentConfig {
        model: ModelConfig { graph, beta, u, theta, spin },
        run: RunConfig {
            plan,
            chains: r.chains.map_or(1, Spanned::into_inner),
            checkpoint_every: r.checkpoint_every.map(Spanned::into_inner),
        },
        observables: ObservablesConfig { estimators, settings, batch_size: o.batch_size.map(Spanned::into_inner) },
        output: OutputConfig {
            directory: raw.output.directory.unwrap_or_else(|| PathBuf::from("out")),
            formats: raw.output.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json]),
        },
    })
}
