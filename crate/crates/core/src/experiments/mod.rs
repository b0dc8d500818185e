//! Reproducible sweeps that write one CSV per run.
//!
//! Every experiment follows the same life cycle: read and validate the whole
//! configuration, expand it into independent cells, evaluate the cells (in
//! parallel when allowed), then assemble the rows in a fixed order. A cell's
//! randomness depends only on its derived seed, so the output does not depend on
//! scheduling.

pub mod config;
pub mod csv;
pub mod hutter_run;
pub mod phase;
pub mod proxy_eval;
pub mod simulation;

use std::str::FromStr;

pub use config::Config;
pub use csv::{Cell, Table};

use crate::distributions::{Convention, MeanGeometry};
use crate::exec::Execution;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PhaseSweep,
    SimulationScaling,
    HutterScaling,
    ProxyEval,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseSweep => "phase-sweep",
            ExperimentKind::SimulationScaling => "simulation-scaling",
            ExperimentKind::HutterScaling => "hutter-scaling",
            ExperimentKind::ProxyEval => "proxy-eval",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase-sweep" | "phase" => Ok(ExperimentKind::PhaseSweep),
            "simulate" | "simulation" | "simulation-scaling" => Ok(ExperimentKind::SimulationScaling),
            "hutter" | "hutter-scaling" => Ok(ExperimentKind::HutterScaling),
            "proxy" | "proxy-eval" => Ok(ExperimentKind::ProxyEval),
            other => Err(Error::config(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Validate `config` for `kind` and run it. Unknown keys are rejected before any
/// sampling.
pub fn run(kind: ExperimentKind, config: &Config, exec: Execution) -> Result<Table> {
    match kind {
        ExperimentKind::PhaseSweep => phase::PhaseSweep::from_config(config)?.run(exec),
        ExperimentKind::SimulationScaling => simulation::SimulationPlan::from_config(config)?.run(exec),
        ExperimentKind::HutterScaling => hutter_run::HutterPlan::from_config(config)?.run(exec),
        ExperimentKind::ProxyEval => proxy_eval::ProxyPlan::from_config(config)?.run(),
    }
}

pub(crate) fn parse_convention(config: &Config, default: Convention) -> Result<Convention> {
    match config.string("convention").as_deref() {
        None => Ok(default),
        Some("unit_trace" | "unit-trace") => Ok(Convention::UnitTrace),
        Some("simulation") => Ok(Convention::Simulation),
        Some(other) => Err(Error::config(format!(
            "convention must be unit_trace or simulation, got {other:?}"
        ))),
    }
}

pub(crate) fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::UnitTrace => "unit_trace",
        Convention::Simulation => "simulation",
    }
}

pub(crate) fn parse_geometry(config: &Config) -> Result<MeanGeometry> {
    match config.string("geometry").as_deref() {
        None | Some("antipodal") => Ok(MeanGeometry::Antipodal),
        Some("orthogonal") => Ok(MeanGeometry::Orthogonal),
        Some(other) => Err(Error::config(format!(
            "geometry must be antipodal or orthogonal, got {other:?}"
        ))),
    }
}

pub(crate) fn geometry_name(g: MeanGeometry) -> &'static str {
    match g {
        MeanGeometry::Antipodal => "antipodal",
        MeanGeometry::Orthogonal => "orthogonal",
    }
}

/// Error text safe for an unquoted CSV field.
pub(crate) fn status_of(err: &Error) -> String {
    err.to_string()
        .chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect()
}

/// Sample mean and standard deviation (`n − 1` denominator, zero for one value).
pub(crate) fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    mean_sd(&v).map(|(m, _)| m)
}
