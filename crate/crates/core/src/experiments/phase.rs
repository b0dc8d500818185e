//! Accuracy against corruption level for fixed pruners: the phase-transition sweep.
//!
//! Config keys: `d`, `N`, `lambda`, `tau`, `convention`, `p_grid`, `phi`, `psi`,
//! `t`, `seeds`, `label_mode`, plus the optional `geometry`, `prune_angles`,
//! `n_test`, `gtol`, `max_iter` and `seed`.
//!
//! * `label_mode = flip` corrupts true labels with an independent flip of
//!   probability `p`; `label_mode = generator` labels with a linear generator
//!   rotated away from the Bayes direction until its error rate is `p`.
//! * Pruners are `(phi, psi)` channels (paired lists) and/or margin pruners at the
//!   angles in `prune_angles`, measured from the Bayes direction.
//! * `n_test = 0` (the default) reports the exact agreement with the Bayes
//!   classifier instead of a Monte Carlo estimate.

use std::f64::consts::PI;

use super::{convention_name, geometry_name, mean_of, mean_sd, status_of, Cell, Config, Table};
use crate::distributions::{sample_mixture_with, Convention, MeanGeometry, MixtureSpec};
use crate::exec::Execution;
use crate::labelers::{flip_channel, generate_labels_with, LabelMode, LabeledSet, LinearWeights};
use crate::orthant::{keep_rates_from_thresholds, phi_inv};
use crate::pruning::{measure_phi_psi, prune_margin, prune_phi_psi, Channel};
use crate::rng::derive;
use crate::theory::Thresholds;
use crate::trainer::{exact_test_accuracy, masked_train_accuracy, test_accuracy, train, TrainConfig};
use crate::{Error, Result};

pub const COLUMNS: &[&str] = &[
    "row", "label_mode", "pruner", "pruner_index", "phi", "psi", "prune_angle", "p", "seed", "d", "N",
    "lambda", "tau", "convention", "geometry", "t", "p_star", "p_minus", "p_plus", "acc_mean", "acc_sd",
    "acc_se", "n_ok", "phi_hat", "psi_hat", "p_hat", "kept", "train_acc", "iterations", "grad_norm",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLabels {
    Flip,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pruner {
    Channel(Channel),
    /// Margin pruner at this angle from the Bayes direction.
    Margin(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSweep {
    pub spec: MixtureSpec,
    pub n: usize,
    pub train: TrainConfig,
    pub p_grid: Vec<f64>,
    pub pruners: Vec<Pruner>,
    pub t: f64,
    pub seeds: Vec<u64>,
    pub labels: PhaseLabels,
    pub n_test: usize,
    pub seed: u64,
}

/// Outcome of one `(pruner, p, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
struct CellResult {
    predicted: Option<(f64, f64)>,
    accuracy: Option<(f64, Option<f64>)>,
    phi_hat: Option<f64>,
    psi_hat: Option<f64>,
    p_hat: Option<f64>,
    kept: Option<usize>,
    train_acc: Option<f64>,
    iterations: Option<usize>,
    grad_norm: Option<f64>,
    status: String,
}

impl CellResult {
    fn failed(predicted: Option<(f64, f64)>, status: String) -> Self {
        Self {
            predicted,
            accuracy: None,
            phi_hat: None,
            psi_hat: None,
            p_hat: None,
            kept: None,
            train_acc: None,
            iterations: None,
            grad_norm: None,
            status,
        }
    }
}

impl PhaseSweep {
    pub fn from_config(config: &Config) -> Result<Self> {
        let d = config.require_usize("d")?;
        let tau = config.require_f64("tau")?;
        let convention = super::parse_convention(config, Convention::UnitTrace)?;
        let geometry = super::parse_geometry(config)?;
        let spec = MixtureSpec::with_geometry(d, tau, convention, geometry)?;
        let n = config.require_usize("N")?;
        let mut train = TrainConfig::new(config.require_f64("lambda")?);
        train.gtol = config.f64_or("gtol", train.gtol)?;
        train.max_iter = config.usize_or("max_iter", train.max_iter)?;
        let p_grid = config.require_grid("p_grid")?;

        let phis = config.grid("phi")?.unwrap_or_default();
        let psis = config.grid("psi")?.unwrap_or_default();
        if phis.len() != psis.len() {
            return Err(Error::config(format!(
                "phi and psi lists differ in length ({} vs {})",
                phis.len(),
                psis.len()
            )));
        }
        let mut pruners = phis
            .iter()
            .zip(&psis)
            .map(|(&phi, &psi)| Channel::new(phi, psi).map(Pruner::Channel))
            .collect::<Result<Vec<_>>>()?;
        pruners.extend(config.angles("prune_angles")?.unwrap_or_default().into_iter().map(Pruner::Margin));

        let labels = match config.string_or("label_mode", "flip").as_str() {
            "flip" => PhaseLabels::Flip,
            "generator" => PhaseLabels::Generator,
            other => return Err(Error::config(format!("label_mode must be flip or generator, got {other:?}"))),
        };
        let sweep = Self {
            spec,
            n,
            train,
            p_grid,
            pruners,
            t: config.f64_or("t", 0.1)?,
            seeds: config.seeds("seeds")?.unwrap_or_else(|| vec![0]),
            labels,
            n_test: config.usize_or("n_test", 0)?,
            seed: config.usize_or("seed", 0)? as u64,
        };
        config.reject_unknown()?;
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.train.validate()?;
        if self.n == 0 {
            return Err(Error::config("N must be positive"));
        }
        if self.p_grid.is_empty() {
            return Err(Error::config("p_grid is empty"));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::config(format!("corruption level {p} outside [0, 1)")));
        }
        if self.pruners.is_empty() {
            return Err(Error::config("no pruner given: set phi/psi or prune_angles"));
        }
        for pruner in &self.pruners {
            match *pruner {
                Pruner::Channel(c) => {
                    Channel::new(c.phi, c.psi)?;
                }
                Pruner::Margin(theta) if !(0.0..=PI).contains(&theta) => {
                    return Err(Error::config(format!("prune angle {theta} outside [0, pi]")));
                }
                Pruner::Margin(_) if self.spec.d < 2 => {
                    return Err(Error::config("margin pruners need d >= 2"));
                }
                Pruner::Margin(_) => {}
            }
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::config(format!("slack t = {} must lie in (0, 1)", self.t)));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seed list is empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate seeds"));
        }
        if self.labels == PhaseLabels::Generator {
            if self.spec.geometry != MeanGeometry::Antipodal {
                return Err(Error::config("generator labels need the antipodal geometry"));
            }
            if self.spec.d < 2 {
                return Err(Error::config("generator labels need d >= 2"));
            }
        }
        Ok(())
    }

    /// Angle of the linear generator whose error rate against the true label is
    /// `p`, or `None` if no direction reaches it.
    pub fn generator_angle(&self, p: f64) -> Option<f64> {
        let sigma = self.spec.noise_sd();
        let cos = -sigma * phi_inv(p) / self.spec.tau;
        (-1.0..=1.0).contains(&cos).then(|| cos.acos())
    }

    fn unit(&self, angle: f64, side: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.spec.d];
        w[0] = angle.cos();
        w[1] = side * angle.sin();
        w
    }

    /// Closed-form `(φ, ψ)` of a pruner at corruption level `p`.
    fn predicted(&self, pruner: Pruner, p: f64) -> Option<(f64, f64)> {
        match pruner {
            Pruner::Channel(c) => Some((c.phi, c.psi)),
            Pruner::Margin(theta) => {
                let sigma = self.spec.noise_sd();
                let tau = self.spec.tau;
                match self.labels {
                    PhaseLabels::Flip => {
                        let w = LinearWeights::new(self.unit(theta, 1.0)).ok()?;
                        let a = crate::trainer::exact_label_accuracy(&w, &self.spec).ok()?;
                        Some((a, 1.0 - a))
                    }
                    PhaseLabels::Generator => {
                        let theta_gen = self.generator_angle(p)?;
                        let r = keep_rates_from_thresholds(
                            -tau * theta.cos() / sigma,
                            -tau * theta_gen.cos() / sigma,
                            (theta_gen + theta).cos(),
                        );
                        Some((r.phi, r.psi))
                    }
                }
            }
        }
    }

    fn run_cell(&self, pruner: Pruner, p: f64, cell_seed: u64, exec: Execution) -> CellResult {
        let predicted = self.predicted(pruner, p);
        match self.try_cell(pruner, p, cell_seed, exec) {
            Ok(mut r) => {
                r.predicted = predicted;
                r
            }
            Err(e) => CellResult::failed(predicted, status_of(&e)),
        }
    }

    fn try_cell(&self, pruner: Pruner, p: f64, cell_seed: u64, exec: Execution) -> Result<CellResult> {
        let samples = sample_mixture_with(&self.spec, self.n, derive(cell_seed, 0), exec)?;
        let labeled: LabeledSet = match self.labels {
            PhaseLabels::Flip => flip_channel(samples, p, derive(cell_seed, 1))?,
            PhaseLabels::Generator => {
                let angle = self
                    .generator_angle(p)
                    .ok_or(Error::Undefined("corruption level unreachable by a linear generator"))?;
                let gen = LinearWeights::new(self.unit(angle, -1.0))?;
                generate_labels_with(&gen, samples, LabelMode::Deterministic, derive(cell_seed, 1), exec)?
            }
        };
        let pruned = match pruner {
            Pruner::Channel(c) => prune_phi_psi(labeled, c, derive(cell_seed, 2))?,
            Pruner::Margin(theta) => prune_margin(labeled, &LinearWeights::new(self.unit(theta, 1.0))?)?,
        };
        if pruned.kept() == 0 {
            return Err(Error::Undefined("no example survived pruning"));
        }
        let model = train(&pruned, &self.train, None)?;
        let accuracy = if self.n_test == 0 {
            (exact_test_accuracy(&model.weights, &self.spec)?, None)
        } else {
            let e = test_accuracy(&model.weights, &self.spec, self.n_test, derive(cell_seed, 3))?;
            (e.value, Some(e.se))
        };
        let rates = measure_phi_psi(&pruned)?;
        Ok(CellResult {
            predicted: None,
            accuracy: Some(accuracy),
            phi_hat: rates.phi,
            psi_hat: rates.psi,
            p_hat: Some(rates.p),
            kept: Some(pruned.kept()),
            train_acc: Some(masked_train_accuracy(&model.weights, &pruned)?),
            iterations: Some(model.iterations),
            grad_norm: Some(model.grad_norm),
            status: "ok".into(),
        })
    }

    /// Evaluate every cell and return the table: for each pruner and `p`, one row
    /// per seed followed by an aggregate row.
    pub fn run(&self, exec: Execution) -> Result<Table> {
        self.validate()?;
        let np = self.p_grid.len();
        let jobs: Vec<(usize, usize, u64)> = (0..self.pruners.len())
            .flat_map(|j| (0..np).flat_map(move |i| self.seeds.iter().map(move |&s| (j, i, s))))
            .collect();
        let results = exec.map(&jobs, |&(j, i, s)| {
            let cell_seed = derive(derive(self.seed, s), (j * np + i) as u64);
            self.run_cell(self.pruners[j], self.p_grid[i], cell_seed, exec)
        });

        let mut table = Table::new("phase-sweep", COLUMNS);
        let mut results = results.into_iter();
        for (j, &pruner) in self.pruners.iter().enumerate() {
            for &p in &self.p_grid {
                let cells: Vec<(u64, CellResult)> =
                    self.seeds.iter().map(|&s| (s, results.next().expect("one result per job"))).collect();
                for (s, r) in &cells {
                    let acc = r.accuracy;
                    table.push(self.row("cell", j, pruner, p, Some(*s), r, acc.map(|a| a.0), None, acc.and_then(|a| a.1), usize::from(acc.is_some()), r.status.clone()));
                }
                table.push(self.aggregate(j, pruner, p, &cells));
            }
        }
        Ok(table)
    }

    fn aggregate(&self, j: usize, pruner: Pruner, p: f64, cells: &[(u64, CellResult)]) -> Vec<Cell> {
        let accs: Vec<f64> = cells.iter().filter_map(|(_, r)| r.accuracy.map(|a| a.0)).collect();
        let stats = mean_sd(&accs);
        let failed = cells.len() - accs.len();
        let status = match failed {
            0 => "ok".to_string(),
            f if f == cells.len() => "failed".to_string(),
            f => format!("partial {f}/{} failed", cells.len()),
        };
        let merged = CellResult {
            predicted: cells.first().and_then(|(_, r)| r.predicted),
            accuracy: None,
            phi_hat: mean_of(cells.iter().map(|(_, r)| r.phi_hat)),
            psi_hat: mean_of(cells.iter().map(|(_, r)| r.psi_hat)),
            p_hat: mean_of(cells.iter().map(|(_, r)| r.p_hat)),
            kept: None,
            train_acc: mean_of(cells.iter().map(|(_, r)| r.train_acc)),
            iterations: None,
            grad_norm: None,
            status: String::new(),
        };
        let mut row = self.row(
            "aggregate",
            j,
            pruner,
            p,
            None,
            &merged,
            stats.map(|s| s.0),
            stats.map(|s| s.1),
            stats.map(|(_, sd)| sd / (accs.len() as f64).sqrt()),
            accs.len(),
            status,
        );
        let kept = mean_of(cells.iter().map(|(_, r)| r.kept.map(|k| k as f64)));
        row[COLUMNS.iter().position(|c| *c == "kept").expect("column")] = Cell::from(kept);
        row
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        kind: &str,
        j: usize,
        pruner: Pruner,
        p: f64,
        seed: Option<u64>,
        r: &CellResult,
        acc: Option<f64>,
        acc_sd: Option<f64>,
        acc_se: Option<f64>,
        n_ok: usize,
        status: String,
    ) -> Vec<Cell> {
        let (pruner_name, angle) = match pruner {
            Pruner::Channel(_) => ("channel", None),
            Pruner::Margin(theta) => ("margin", Some(theta)),
        };
        let thresholds = r.predicted.and_then(|(phi, psi)| Thresholds::new(phi, psi, self.t).ok());
        vec![
            kind.into(),
            match self.labels {
                PhaseLabels::Flip => "flip",
                PhaseLabels::Generator => "generator",
            }
            .into(),
            pruner_name.into(),
            j.into(),
            r.predicted.map(|x| x.0).into(),
            r.predicted.map(|x| x.1).into(),
            angle.into(),
            p.into(),
            seed.map_or(Cell::Empty, Cell::from),
            self.spec.d.into(),
            self.n.into(),
            self.train.lambda.into(),
            self.spec.tau.into(),
            convention_name(self.spec.convention).into(),
            geometry_name(self.spec.geometry).into(),
            self.t.into(),
            thresholds.map(|t| t.p_star).into(),
            thresholds.map(|t| t.p_minus).into(),
            thresholds.map(|t| t.p_plus).into(),
            acc.into(),
            acc_sd.into(),
            acc_se.into(),
            n_ok.into(),
            r.phi_hat.into(),
            r.psi_hat.into(),
            r.p_hat.into(),
            r.kept.map_or(Cell::Empty, Cell::from),
            r.train_acc.into(),
            r.iterations.map_or(Cell::Empty, Cell::from),
            r.grad_norm.into(),
            status.into(),
        ]
    }
}
