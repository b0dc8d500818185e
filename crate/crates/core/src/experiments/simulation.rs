//! Downstream accuracy against selected-data size for several verifiers.
//!
//! A generator is fit by least squares on `n0` clean samples and labels a stream
//! of fresh mixture draws (sigmoid labels by default). Each strategy keeps the
//! first survivors of that stream, up to the largest `n_prime` or until `n1`
//! draws have been processed, and a downstream model is trained on every prefix
//! size in `n_prime`. Strategies:
//!
//! * `clean`: original labels, no pruning;
//! * `random`: synthesized labels, no pruning;
//! * `verifier`: synthesized labels kept when they agree with the margin pruner
//!   at angle `θ` from the Bayes direction (`θ = 0` is the oracle verifier).
//!
//! Config keys: `d`, `tau`, `convention`, `n0`, `n1`, `n_prime`, `prune_angles`,
//! `lambda`, `lambda_mode` (`per_sample` divides by `n′`, `fixed` does not),
//! `label_mode` (`sigmoid` or `deterministic`), `seeds`, `seed`, `gtol`, `max_iter`.

use super::{convention_name, mean_of, mean_sd, status_of, Cell, Config, Table};
use crate::distributions::{sample_mixture_with, Convention, MixtureSpec, SampleSet};
use crate::exec::{Execution, MC_CHUNK};
use crate::labelers::{generate_labels_with, LabelMode, LabeledSet, LinearWeights};
use crate::proxy::{estimate_phi_psi, proxy_pstar, ScoredSelection};
use crate::pruning::{margin_mask, PrunedDataset};
use crate::rng::derive;
use crate::trainer::{exact_label_accuracy, fit_ols, train, TrainConfig};
use crate::{Error, Result};

pub const COLUMNS: &[&str] = &[
    "row", "strategy", "prune_angle", "n_prime", "seed", "d", "tau", "convention", "n0", "n1", "lambda",
    "lambda_eff", "label_mode", "generator_acc", "pool_used", "survivors", "acc_mean", "acc_sd", "acc_se",
    "n_ok", "proxy_phi", "proxy_psi", "proxy_p", "proxy_pstar", "iterations", "status",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Clean,
    Random,
    Verifier(f64),
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Clean => "clean",
            Strategy::Random => "random",
            Strategy::Verifier(_) => "verifier",
        }
    }

    pub fn angle(self) -> Option<f64> {
        match self {
            Strategy::Verifier(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// `λ_eff = λ/n′`, the scaling of an unnormalized penalty.
    PerSample,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub spec: MixtureSpec,
    pub n0: usize,
    pub n1: usize,
    pub n_prime: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub label_mode: LabelMode,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub seed: u64,
}

/// Result of one `(strategy, seed)` job.
#[derive(Debug, Clone, PartialEq)]
struct Job {
    generator_acc: Option<f64>,
    pool_used: usize,
    survivors: usize,
    proxy: Option<(Option<f64>, Option<f64>, f64, Option<f64>)>,
    /// Per `n′`: accuracy and iterations, or a status message.
    fits: Vec<std::result::Result<(f64, usize), String>>,
}

impl SimulationPlan {
    pub fn from_config(config: &Config) -> Result<Self> {
        let d = config.usize_or("d", 100)?;
        let tau = config.f64_or("tau", 0.15)?;
        let convention = super::parse_convention(config, Convention::Simulation)?;
        let spec = MixtureSpec::new(d, tau, convention)?;
        let lambda_mode = match config.string_or("lambda_mode", "per_sample").as_str() {
            "per_sample" => LambdaMode::PerSample,
            "fixed" => LambdaMode::Fixed,
            other => return Err(Error::config(format!("lambda_mode must be per_sample or fixed, got {other:?}"))),
        };
        let label_mode = match config.string_or("label_mode", "sigmoid").as_str() {
            "sigmoid" => LabelMode::Sigmoid,
            "deterministic" => LabelMode::Deterministic,
            other => {
                return Err(Error::config(format!("label_mode must be sigmoid or deterministic, got {other:?}")))
            }
        };
        let mut strategies = vec![Strategy::Clean, Strategy::Random];
        strategies.extend(
            config
                .angles("prune_angles")?
                .ok_or_else(|| Error::config("missing key \"prune_angles\""))?
                .into_iter()
                .map(Strategy::Verifier),
        );
        let mut train = TrainConfig::new(1.0);
        train.gtol = config.f64_or("gtol", train.gtol)?;
        train.max_iter = config.usize_or("max_iter", train.max_iter)?;
        let plan = Self {
            spec,
            n0: config.usize_or("n0", 1000)?,
            n1: config.usize_or("n1", 1_000_000)?,
            n_prime: config
                .int_grid("n_prime")?
                .ok_or_else(|| Error::config("missing key \"n_prime\""))?,
            strategies,
            lambda: config.f64_or("lambda", 1.0)?,
            lambda_mode,
            label_mode,
            train,
            seeds: config.seeds("seeds")?.unwrap_or_else(|| vec![0]),
            seed: config.usize_or("seed", 0)? as u64,
        };
        config.reject_unknown()?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.spec.d < 2 {
            return Err(Error::config("verifiers need d >= 2"));
        }
        if self.n0 < self.spec.d {
            return Err(Error::config(format!("n0 = {} is below d = {}", self.n0, self.spec.d)));
        }
        if self.n_prime.is_empty() || self.n_prime.contains(&0) {
            return Err(Error::config("n_prime must be a non-empty list of positive sizes"));
        }
        if self.n_prime.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_prime must be increasing"));
        }
        if self.n1 == 0 {
            return Err(Error::config("n1 must be positive"));
        }
        if let Some(t) = self.strategies.iter().filter_map(|s| s.angle()).find(|t| !(0.0..=std::f64::consts::PI).contains(t)) {
            return Err(Error::config(format!("prune angle {t} outside [0, pi]")));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        let mut probe = self.train;
        probe.lambda = self.lambda;
        probe.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("seed list is empty"));
        }
        Ok(())
    }

    pub fn lambda_eff(&self, n: usize) -> f64 {
        match self.lambda_mode {
            LambdaMode::PerSample => self.lambda / n as f64,
            LambdaMode::Fixed => self.lambda,
        }
    }

    fn pruner(&self, theta: f64) -> Result<LinearWeights> {
        let mut w = vec![0.0; self.spec.d];
        w[0] = theta.cos();
        w[1] = theta.sin();
        LinearWeights::new(w)
    }

    fn run_job(&self, strategy: Strategy, seed: u64) -> Result<Job> {
        let base = derive(self.seed, seed);
        let seq = Execution::Sequential;
        let generator = fit_ols(&sample_mixture_with(&self.spec, self.n0, derive(base, 0), seq)?)?;
        let pruner = strategy.angle().map(|t| self.pruner(t)).transpose()?;
        let target = *self.n_prime.last().expect("validated");

        let mut kept = SampleSet::new(self.spec.d);
        let mut kept_labels = Vec::new();
        let (mut correct, mut keep) = (Vec::new(), Vec::new());
        let mut used = 0;
        let mut block = 0u64;
        while kept.len() < target && used < self.n1 {
            let len = MC_CHUNK.min(self.n1 - used);
            let xs = sample_mixture_with(&self.spec, len, derive(derive(base, 1), block), seq)?;
            let labeled = generate_labels_with(&generator, xs, self.label_mode, derive(derive(base, 2), block), seq)?;
            let mask = match &pruner {
                Some(w) => margin_mask(&labeled, w),
                None => vec![true; len],
            };
            for (i, &q) in mask.iter().enumerate() {
                let truth = labeled.samples.label(i);
                let fake = labeled.fake[i];
                correct.push(truth == fake);
                keep.push(q);
                if q && kept.len() < target {
                    kept.push(labeled.samples.row(i), truth);
                    kept_labels.push(if strategy == Strategy::Clean { truth } else { fake });
                }
            }
            used += len;
            block += 1;
        }

        let proxy = (strategy != Strategy::Clean).then(|| {
            let scored = ScoredSelection::from_binary(&correct, &keep).expect("non-empty pool");
            let r = estimate_phi_psi(&scored);
            (r.phi, r.psi, r.p, proxy_pstar(&scored).ok())
        });
        let survivors = kept.len();
        let data = LabeledSet::new(kept, kept_labels)?;
        let fits = self
            .n_prime
            .iter()
            .map(|&n| {
                if n > survivors {
                    return Err(format!("insufficient survivors ({survivors} < {n})"));
                }
                let subset = LabeledSet::new(data.samples.prefix(n), data.fake[..n].to_vec())
                    .map_err(|e| status_of(&e))?;
                let mut cfg = self.train;
                cfg.lambda = self.lambda_eff(n);
                let model = train(&PrunedDataset::unpruned(subset), &cfg, None).map_err(|e| status_of(&e))?;
                let acc = exact_label_accuracy(&model.weights, &self.spec).map_err(|e| status_of(&e))?;
                Ok((acc, model.iterations))
            })
            .collect();
        Ok(Job {
            generator_acc: exact_label_accuracy(&generator, &self.spec).ok(),
            pool_used: used,
            survivors,
            proxy,
            fits,
        })
    }

    /// Rows: for each strategy and `n′`, one row per seed and then an aggregate.
    pub fn run(&self, exec: Execution) -> Result<Table> {
        self.validate()?;
        let jobs: Vec<(usize, u64)> = (0..self.strategies.len())
            .flat_map(|k| self.seeds.iter().map(move |&s| (k, s)))
            .collect();
        let results: Vec<std::result::Result<Job, String>> = exec.map(&jobs, |&(k, s)| {
            self.run_job(self.strategies[k], s).map_err(|e| status_of(&e))
        });

        let mut table = Table::new("simulation-scaling", COLUMNS);
        let ns = self.seeds.len();
        for (k, &strategy) in self.strategies.iter().enumerate() {
            let block = &results[k * ns..(k + 1) * ns];
            for (ni, &n) in self.n_prime.iter().enumerate() {
                let mut accs = Vec::new();
                for (job, &seed) in block.iter().zip(&self.seeds) {
                    let (fit, job) = match job {
                        Ok(j) => (j.fits[ni].clone(), Some(j)),
                        Err(e) => (Err(e.clone()), None),
                    };
                    if let Ok((a, _)) = fit {
                        accs.push(a);
                    }
                    let (acc, iterations, status) = match fit {
                        Ok((a, it)) => (Some(a), Some(it), "ok".to_string()),
                        Err(s) => (None, None, s),
                    };
                    let proxy = job.and_then(|j| j.proxy);
                    table.push(self.row(
                        "cell",
                        strategy,
                        n,
                        Some(seed),
                        job.and_then(|j| j.generator_acc),
                        job.map(|j| j.pool_used as f64),
                        job.map(|j| j.survivors as f64),
                        (acc, None, None),
                        usize::from(acc.is_some()),
                        proxy,
                        iterations,
                        status,
                    ));
                }
                let jobs_ok: Vec<&Job> = block.iter().filter_map(|j| j.as_ref().ok()).collect();
                let stats = mean_sd(&accs);
                let failed = ns - accs.len();
                let status = match failed {
                    0 => "ok".to_string(),
                    f if f == ns => "failed".to_string(),
                    f => format!("partial {f}/{ns} failed"),
                };
                let proxy_mean = |f: fn(&(Option<f64>, Option<f64>, f64, Option<f64>)) -> Option<f64>| {
                    mean_of(jobs_ok.iter().map(|j| j.proxy.as_ref().and_then(f)))
                };
                let proxy = (strategy != Strategy::Clean).then(|| {
                    (
                        proxy_mean(|p| p.0),
                        proxy_mean(|p| p.1),
                        proxy_mean(|p| Some(p.2)).unwrap_or(f64::NAN),
                        proxy_mean(|p| p.3),
                    )
                });
                table.push(self.row(
                    "aggregate",
                    strategy,
                    n,
                    None,
                    mean_of(jobs_ok.iter().map(|j| j.generator_acc)),
                    mean_of(jobs_ok.iter().map(|j| Some(j.pool_used as f64))),
                    mean_of(jobs_ok.iter().map(|j| Some(j.survivors as f64))),
                    (
                        stats.map(|s| s.0),
                        stats.map(|s| s.1),
                        stats.map(|(_, sd)| sd / (accs.len() as f64).sqrt()),
                    ),
                    accs.len(),
                    proxy,
                    None,
                    status,
                ));
            }
        }
        Ok(table)
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        kind: &str,
        strategy: Strategy,
        n: usize,
        seed: Option<u64>,
        generator_acc: Option<f64>,
        pool_used: Option<f64>,
        survivors: Option<f64>,
        acc: (Option<f64>, Option<f64>, Option<f64>),
        n_ok: usize,
        proxy: Option<(Option<f64>, Option<f64>, f64, Option<f64>)>,
        iterations: Option<usize>,
        status: String,
    ) -> Vec<Cell> {
        vec![
            kind.into(),
            strategy.name().into(),
            strategy.angle().into(),
            n.into(),
            seed.map_or(Cell::Empty, Cell::from),
            self.spec.d.into(),
            self.spec.tau.into(),
            convention_name(self.spec.convention).into(),
            self.n0.into(),
            self.n1.into(),
            self.lambda.into(),
            self.lambda_eff(n).into(),
            match self.label_mode {
                LabelMode::Sigmoid => "sigmoid",
                LabelMode::Deterministic => "deterministic",
            }
            .into(),
            generator_acc.into(),
            pool_used.into(),
            survivors.into(),
            acc.0.into(),
            acc.1.into(),
            acc.2.into(),
            n_ok.into(),
            proxy.and_then(|p| p.0).into(),
            proxy.and_then(|p| p.1).into(),
            proxy.map(|p| p.2).into(),
            proxy.and_then(|p| p.3).into(),
            iterations.map_or(Cell::Empty, Cell::from),
            status.into(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(n_prime: &str) -> SimulationPlan {
        let c = Config::parse(&format!(
            "d = 10\ntau = 0.5\nn0 = 200\nn1 = 20000\nn_prime = {n_prime}\nprune_angles = 0, pi/12\nseeds = 1, 2\n"
        ))
        .unwrap();
        SimulationPlan::from_config(&c).unwrap()
    }

    #[test]
    fn strategies_and_rows() {
        let p = plan("100, 1000");
        assert_eq!(p.strategies.len(), 4);
        let t = p.run(Execution::Sequential).unwrap();
        // 4 strategies × 2 sizes × (2 seeds + aggregate)
        assert_eq!(t.rows.len(), 24);
        let status = t.column("status").unwrap();
        assert!(t.rows.iter().all(|r| r[status] == Cell::from("ok")));
        // Proxy p⋆ decreases as the verifier rotates away from the Bayes direction
        // and is undefined for clean data.
        let pstar = t.column("proxy_pstar").unwrap();
        let value = |i: usize| match t.rows[i][pstar] {
            Cell::Num(v) => v,
            _ => panic!("missing p*"),
        };
        assert_eq!(t.rows[0][pstar], Cell::Empty);
        assert!((value(6) - 0.5).abs() < 1e-12);
        assert!(value(12) > value(18) && value(18) > 0.5);
    }

    #[test]
    fn oversized_subset_is_flagged() {
        let p = plan("100, 50000");
        let t = p.run(Execution::Sequential).unwrap();
        let status = t.column("status").unwrap();
        let n_col = t.column("n_prime").unwrap();
        for r in &t.rows {
            let ok = r[status] == Cell::from("ok");
            assert_eq!(ok, r[n_col] == Cell::from(100usize), "{:?}", r[status]);
        }
    }

    #[test]
    fn rejects_decreasing_grid() {
        let c = Config::parse("n_prime = 1000, 100\nprune_angles = 0\n").unwrap();
        assert!(SimulationPlan::from_config(&c).is_err());
    }
}
