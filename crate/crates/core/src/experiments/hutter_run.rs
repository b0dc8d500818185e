//! Excess-error scaling of the plug-in classifier on noisy Zipf data.
//!
//! Config keys: `beta`, `m`, `pi`, `k` (support size), `t_grid`, `seeds`, plus
//! the optional `n_test` (draws used to measure the Bayes predictor, `0` skips
//! it), `regime_c` and `seed`.

use super::{Cell, Config, Table};
use crate::distributions::{ZipfSpec, DEFAULT_ZIPF_SUPPORT};
use crate::exec::Execution;
use crate::hutter::{scaling_experiment, test_error, ScalingFit};
use crate::rng::derive;
use crate::{Error, Result};

pub const COLUMNS: &[&str] = &[
    "row", "beta", "m", "pi", "k", "t", "seed", "error", "excess", "excess_se", "bayes_error", "slope",
    "slope_se", "slope_full", "slope_full_se", "target_slope", "bayes_pred_error", "bayes_pred_se",
    "regime_c", "regime_ok", "warning",
];

#[derive(Debug, Clone, PartialEq)]
pub struct HutterPlan {
    pub spec: ZipfSpec,
    pub t_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub n_test: usize,
    pub regime_c: Option<f64>,
    pub seed: u64,
}

impl HutterPlan {
    pub fn from_config(config: &Config) -> Result<Self> {
        let m = config.require_usize("m")?;
        let spec = ZipfSpec {
            beta: config.require_f64("beta")?,
            k: config.usize_or("k", DEFAULT_ZIPF_SUPPORT)?,
            m: u32::try_from(m).map_err(|_| Error::config(format!("m = {m} is too large")))?,
            pi: config.require_f64("pi")?,
            f0: Default::default(),
        };
        let plan = Self {
            spec,
            t_grid: config
                .int_grid("t_grid")?
                .ok_or_else(|| Error::config("missing key \"t_grid\""))?,
            seeds: config.seeds("seeds")?.unwrap_or_else(|| vec![0]),
            n_test: config.usize_or("n_test", 1_000_000)?,
            regime_c: config.f64("regime_c")?,
            seed: config.usize_or("seed", 0)? as u64,
        };
        config.reject_unknown()?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.t_grid.len() < 2 {
            return Err(Error::config("t_grid needs at least two values"));
        }
        if self.t_grid.contains(&0) || self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("t_grid must be positive and increasing"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seed list is empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate seeds"));
        }
        if let Some(c) = self.regime_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(format!("regime_c must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Fit plus the optional Bayes-predictor measurement.
    pub fn evaluate(&self, exec: Execution) -> Result<(ScalingFit, Option<(f64, f64)>)> {
        self.validate()?;
        let derived: Vec<u64> = self.seeds.iter().map(|&s| derive(self.seed, s)).collect();
        let mut fit = scaling_experiment(&self.spec, &self.t_grid, &derived, self.regime_c, exec)?;
        for cell in &mut fit.cells {
            let idx = derived.iter().position(|&s| s == cell.seed).expect("seed from the list");
            cell.seed = self.seeds[idx];
        }
        let bayes = if self.n_test > 0 {
            let spec = &self.spec;
            let e = test_error(|x| spec.f0(x), spec, self.n_test, derive(self.seed, u64::MAX))?;
            Some((e.value, e.se))
        } else {
            None
        };
        Ok((fit, bayes))
    }

    /// Rows: one per `(T, seed)`, one aggregate per `T`, then a fit summary.
    pub fn run(&self, exec: Execution) -> Result<Table> {
        let (fit, bayes_measured) = self.evaluate(exec)?;
        let mut table = Table::new("hutter-scaling", COLUMNS);
        let base = |kind: &str| -> Vec<Cell> {
            let mut row = vec![Cell::Empty; COLUMNS.len()];
            row[0] = kind.into();
            row[1] = self.spec.beta.into();
            row[2] = (self.spec.m as usize).into();
            row[3] = self.spec.pi.into();
            row[4] = self.spec.k.into();
            row[10] = fit.bayes_error.into();
            row
        };
        for point in &fit.points {
            for cell in fit.cells.iter().filter(|c| c.t == point.t) {
                let mut row = base("cell");
                row[5] = cell.t.into();
                row[6] = cell.seed.into();
                row[7] = cell.error.into();
                row[8] = cell.excess.into();
                table.push(row);
            }
            let mut row = base("aggregate");
            row[5] = point.t.into();
            row[7] = (fit.bayes_error + point.mean_excess).into();
            row[8] = point.mean_excess.into();
            row[9] = point.se.into();
            table.push(row);
        }
        let mut warnings = Vec::new();
        if !fit.regime_ok {
            warnings.push("regime gate failed: pi too small for the noisy-label rate");
        }
        if fit.flagged {
            warnings.push("negative excess error");
        }
        let mut row = base("summary");
        row[11] = fit.slope.into();
        row[12] = fit.slope_se.into();
        row[13] = fit.slope_full.into();
        row[14] = fit.slope_full_se.into();
        row[15] = (-fit.target_c).into();
        row[16] = bayes_measured.map(|b| b.0).into();
        row[17] = bayes_measured.map(|b| b.1).into();
        row[18] = fit.regime_c.into();
        row[19] = fit.regime_ok.into();
        row[20] = warnings.join("; ").into();
        table.push(row);
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(extra: &str) -> Result<HutterPlan> {
        HutterPlan::from_config(&Config::parse(&format!(
            "beta = 2\nm = 10\npi = 0.9\nk = 10000\nt_grid = geom:1024:8192:2\nseeds = 1, 2, 3\nn_test = 20000\n{extra}"
        ))?)
    }

    #[test]
    fn duplicate_seeds_rejected() {
        assert!(plan("").is_ok());
        let err = HutterPlan::from_config(
            &Config::parse("beta = 2\nm = 10\npi = 0.9\nt_grid = 10, 20\nseeds = 1, 1\n").unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn table_layout() {
        let t = plan("").unwrap().run(Execution::Sequential).unwrap();
        // 4 T values × (3 seeds + aggregate) + summary
        assert_eq!(t.rows.len(), 17);
        let last = t.rows.last().unwrap();
        assert_eq!(last[0], Cell::from("summary"));
        assert_eq!(last[t.column("target_slope").unwrap()], Cell::Num(-0.5));
        let bayes = t.column("bayes_error").unwrap();
        assert!(t.rows.iter().all(|r| match r[bayes] {
            Cell::Num(v) => (v - 0.09).abs() < 1e-15,
            _ => false,
        }));
    }

    #[test]
    fn clean_labels_have_zero_bayes_error() {
        let c = Config::parse("beta = 2\nm = 10\npi = 1\nk = 1000\nt_grid = 100, 200\nseeds = 1\nn_test = 1000\n").unwrap();
        let t = HutterPlan::from_config(&c).unwrap().run(Execution::Sequential).unwrap();
        let bayes = t.column("bayes_error").unwrap();
        assert!(t.rows.iter().all(|r| r[bayes] == Cell::Num(0.0)));
    }
}
