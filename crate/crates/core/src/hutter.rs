//! Plug-in classification of noisy Zipf data and its error scaling in the sample
//! size `T`.
//!
//! Inputs follow a truncated Zipf law; the label is the clean `f₀(x)` with
//! probability `π` and uniform otherwise. The plug-in rule predicts the most frequent
//! label seen with each input. Its excess error over the Bayes error
//! `(1 − 1/M)(1 − π)` equals `π Σ_x p(x) 1[f̂(x) ≠ f₀(x)]`, which is evaluated
//! exactly, so the scaling curve carries only sampling noise from the training set.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::distributions::{sample_zipf_with_table, ZipfSpec, ZipfTable};
use crate::exec::Execution;
use crate::rng;
use crate::trainer::Estimate;
use crate::{Error, Result};

/// `err⋆ = (1 − 1/M)(1 − π)`.
pub fn bayes_error(m: u32, pi: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::config("label alphabet needs M >= 2"));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::config(format!("clean-label probability {pi} outside [0, 1]")));
    }
    Ok((1.0 - 1.0 / m as f64) * (1.0 - pi))
}

/// Co-occurrence counts `n_T(x, y)` of a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    /// `(x, y, count)` sorted by `(x, y)`, positive counts only.
    entries: Vec<(u32, u32, u32)>,
    total: u64,
}

impl CountTable {
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        let mut entries: Vec<(u32, u32, u32)> = Vec::new();
        for (x, y) in sorted {
            match entries.last_mut() {
                Some(e) if e.0 == x && e.1 == y => e.2 += 1,
                _ => entries.push((x, y, 1)),
            }
        }
        Self {
            entries,
            total: pairs.len() as u64,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, x: u32, y: u32) -> u32 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(x, y)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0)
    }

    /// Iterate `(x, [(y, count)])` over inputs that were observed.
    pub fn by_input(&self) -> impl Iterator<Item = (u32, &[(u32, u32, u32)])> + '_ {
        self.entries
            .chunk_by(|a, b| a.0 == b.0)
            .map(|group| (group[0].0, group))
    }

    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }
}

/// Label predicted for inputs that were never seen, and for ties.
pub const FALLBACK_LABEL: u32 = 1;

/// `f̂_T(x) = argmax_y n_T(x, y)`, with ties and unseen inputs mapped to label 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluginClassifier {
    seen: BTreeMap<u32, u32>,
}

impl PluginClassifier {
    pub fn predict(&self, x: u32) -> u32 {
        self.seen.get(&x).copied().unwrap_or(FALLBACK_LABEL)
    }

    /// Inputs with at least one observation and their predictions, in increasing
    /// input order so that sums over them are reproducible.
    pub fn observed(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.seen.iter().map(|(&x, &y)| (x, y))
    }
}

pub fn plugin_classifier(table: &CountTable, m: u32) -> Result<PluginClassifier> {
    if m < 2 {
        return Err(Error::config("label alphabet needs M >= 2"));
    }
    let mut seen = BTreeMap::new();
    for (x, group) in table.by_input() {
        let best = group.iter().map(|e| e.2).max().expect("nonempty group");
        let mut winners = group.iter().filter(|e| e.2 == best);
        let first = winners.next().expect("maximum exists").1;
        let label = if winners.next().is_some() {
            FALLBACK_LABEL
        } else {
            first
        };
        if label > m {
            return Err(Error::config(format!("label {label} exceeds M = {m}")));
        }
        seen.insert(x, label);
    }
    Ok(PluginClassifier { seen })
}

/// Monte Carlo misclassification rate of `predict` on fresh draws.
pub fn test_error<F>(predict: F, spec: &ZipfSpec, n_test: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(u32) -> u32 + Sync,
{
    spec.validate()?;
    if n_test == 0 {
        return Err(Error::config("n_test must be at least 1"));
    }
    let table = ZipfTable::new(spec.beta, spec.k)?;
    test_error_with_table(predict, spec, &table, n_test, seed)
}

pub fn test_error_with_table<F>(
    predict: F,
    spec: &ZipfSpec,
    table: &ZipfTable,
    n_test: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(u32) -> u32 + Sync,
{
    let draws = sample_zipf_with_table(spec, table, n_test, seed, Execution::default())?;
    let wrong = draws.iter().filter(|&&(x, y)| predict(x) != y).count() as u64;
    Ok(Estimate::from_hits(wrong, n_test as u64))
}

/// Exact test error `err⋆ + π Σ_x p(x) 1[f̂(x) ≠ f₀(x)]` of a plug-in classifier.
pub fn exact_error(clf: &PluginClassifier, spec: &ZipfSpec, table: &ZipfTable) -> Result<f64> {
    Ok(bayes_error(spec.m, spec.pi)? + spec.pi * disagreement_mass(clf, spec, table))
}

/// `Σ_x p(x) 1[f̂(x) ≠ f₀(x)]`.
pub fn disagreement_mass(clf: &PluginClassifier, spec: &ZipfSpec, table: &ZipfTable) -> f64 {
    // Unseen inputs predict the fallback label, wrong wherever f₀ differs from it.
    let mut mass = fallback_mass(spec, table);
    for (x, label) in clf.observed() {
        let p = table.prob(x);
        let truth = spec.f0(x);
        if truth != FALLBACK_LABEL {
            mass -= p;
        }
        if label != truth {
            mass += p;
        }
    }
    mass.max(0.0)
}

fn fallback_mass(spec: &ZipfSpec, table: &ZipfTable) -> f64 {
    (1..=table.support() as u32)
        .rev()
        .filter(|&x| spec.f0(x) != FALLBACK_LABEL)
        .map(|x| table.prob(x))
        .sum()
}

/// `C_{yy′} = p(x,y)(δ_{yy′} − p(x,y′)) T` with
/// `p(x,y) = p(x)(π 1[y = f₀(x)] + (1 − π)/M)`; rows and columns indexed by `y − 1`.
pub fn count_covariance(spec: &ZipfSpec, x: u32, t: u64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if x < 1 || x as usize > spec.k {
        return Err(Error::config(format!("input {x} outside the support 1..={}", spec.k)));
    }
    let z: f64 = (1..=spec.k).rev().map(|v| (v as f64).powf(-spec.beta)).sum();
    let px = (x as f64).powf(-spec.beta) / z;
    let m = spec.m as usize;
    let joint: Vec<f64> = (1..=spec.m)
        .map(|y| {
            let clean = if y == spec.f0(x) { spec.pi } else { 0.0 };
            px * (clean + (1.0 - spec.pi) / spec.m as f64)
        })
        .collect();
    let t = t as f64;
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    joint[i] * (delta - joint[j]) * t
                })
                .collect()
        })
        .collect())
}

/// Sufficient regime condition `π > (C log M / M) / (½ + C log M / M)`.
pub fn regime_gate(pi: f64, m: u32, c: f64) -> bool {
    let k = c * (m as f64).ln() / m as f64;
    pi > k / (0.5 + k)
}

/// Minimum expected count `p(x) T` for an input to enter the calibration of `C`.
const CALIBRATION_MIN_COUNT: f64 = 32.0;

/// Empirical constant `C` in the noise bound `max_{y≠f₀(x)} n_T(x,y) ≤ C p(x) T (1−π) log M / M`,
/// taken as the largest observed ratio over inputs with expected count at least 32.
/// Returns `None` when `π = 1` (no noise to bound) or no input qualifies.
pub fn calibrate_regime_constant(spec: &ZipfSpec, table: &ZipfTable, counts: &CountTable) -> Option<f64> {
    let t = counts.total() as f64;
    let m = spec.m as f64;
    let noise = (1.0 - spec.pi) * m.ln() / m;
    if noise <= 0.0 {
        return None;
    }
    let mut worst: Option<f64> = None;
    for (x, group) in counts.by_input() {
        let expected = table.prob(x) * t;
        if expected < CALIBRATION_MIN_COUNT {
            continue;
        }
        let truth = spec.f0(x);
        let top_noise = group.iter().filter(|e| e.1 != truth).map(|e| e.2).max().unwrap_or(0);
        let ratio = top_noise as f64 / (expected * noise);
        worst = Some(worst.map_or(ratio, |w: f64| w.max(ratio)));
    }
    worst
}

/// One `(T, seed)` cell of the scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCell {
    pub t: usize,
    pub seed: u64,
    /// Exact test error of the plug-in classifier trained on this sample.
    pub error: f64,
    pub excess: f64,
}

/// Per-`T` aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub t: usize,
    pub mean_excess: f64,
    /// Standard error of the mean over seeds.
    pub se: f64,
}

/// Log-log fit of excess error against `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    pub cells: Vec<ScalingCell>,
    /// Slope over the upper half of the grid.
    pub slope: f64,
    pub slope_se: f64,
    /// Slope over the whole grid.
    pub slope_full: f64,
    pub slope_full_se: f64,
    /// Target exponent `c = 1 − 1/β`; the predicted slope is `−c`.
    pub target_c: f64,
    pub bayes_error: f64,
    /// Regime constant used by the gate, calibrated at the smallest `T` unless given.
    pub regime_c: Option<f64>,
    pub regime_ok: bool,
    /// Set when an excess error is negative, which would indicate a sampling bug.
    pub flagged: bool,
}

/// Least-squares slope and its standard error.
pub fn loglog_slope(ts: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if ts.len() < 2 || ts.len() != ys.len() {
        return Err(Error::config("a slope needs at least two points"));
    }
    if ys.iter().chain(ts).any(|&v| !(v > 0.0)) {
        return Err(Error::Undefined("log-log fit of a non-positive value"));
    }
    let lx: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let se = if lx.len() > 2 {
        let rss: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, se))
}

/// Train a plug-in classifier for every `(T, seed)` and fit the excess-error decay.
///
/// Cell `(i, s)` samples with seed `derive(s, i)`. `regime_c` overrides the
/// calibrated constant of the regime gate.
pub fn scaling_experiment(
    spec: &ZipfSpec,
    t_grid: &[usize],
    seeds: &[u64],
    regime_c: Option<f64>,
    exec: Execution,
) -> Result<ScalingFit> {
    spec.validate()?;
    if t_grid.len() < 2 {
        return Err(Error::config("T grid needs at least two values"));
    }
    if t_grid.contains(&0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("T grid must be positive and increasing"));
    }
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let table = ZipfTable::new(spec.beta, spec.k)?;
    let bayes = bayes_error(spec.m, spec.pi)?;

    let jobs: Vec<(usize, usize, u64)> = t_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| seeds.iter().map(move |&s| (i, t, s)))
        .collect();
    let results = exec.map(&jobs, |&(i, t, s)| -> Result<(ScalingCell, Option<f64>)> {
        let cell_seed = rng::derive(s, i as u64);
        let pairs = sample_zipf_with_table(spec, &table, t, cell_seed, Execution::Sequential)?;
        let counts = CountTable::from_pairs(&pairs);
        let clf = plugin_classifier(&counts, spec.m)?;
        let excess = spec.pi * disagreement_mass(&clf, spec, &table);
        let calibration = (i == 0)
            .then(|| calibrate_regime_constant(spec, &table, &counts))
            .flatten();
        Ok((
            ScalingCell {
                t,
                seed: s,
                error: bayes + excess,
                excess,
            },
            calibration,
        ))
    });
    let mut cells = Vec::with_capacity(jobs.len());
    let mut calibrated: Option<f64> = None;
    for r in results {
        let (cell, cal) = r?;
        if let Some(c) = cal {
            calibrated = Some(calibrated.map_or(c, |v: f64| v.max(c)));
        }
        cells.push(cell);
    }

    let points: Vec<ScalingPoint> = t_grid
        .iter()
        .map(|&t| {
            let vals: Vec<f64> = cells.iter().filter(|c| c.t == t).map(|c| c.excess).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            ScalingPoint {
                t,
                mean_excess: mean,
                se: (var / n).sqrt(),
            }
        })
        .collect();

    let ts: Vec<f64> = points.iter().map(|p| p.t as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_excess).collect();
    let (slope_full, slope_full_se) = loglog_slope(&ts, &ys)?;
    // Upper half of the grid, but never fewer than two points.
    let half = (ts.len() / 2).min(ts.len() - 2);
    let (slope, slope_se) = loglog_slope(&ts[half..], &ys[half..])?;
    let regime_c = regime_c.or(calibrated);
    let regime_ok = spec.pi >= 1.0 || regime_c.is_some_and(|c| regime_gate(spec.pi, spec.m, c));
    let flagged = cells.iter().any(|c| c.excess < 0.0);
    Ok(ScalingFit {
        points,
        cells,
        slope,
        slope_se,
        slope_full,
        slope_full_se,
        target_c: 1.0 - 1.0 / spec.beta,
        bayes_error: bayes,
        regime_c,
        regime_ok,
        flagged,
    })
}

/// A predictor that is always wrong under the clean labeler.
pub fn constant_wrong(spec: &ZipfSpec) -> impl Fn(u32) -> u32 + Sync + '_ {
    move |x| spec.f0(x) % spec.m + 1
}

/// Empirical covariance of `n_T(x, ·)` over independent replicates.
pub fn empirical_count_covariance(
    spec: &ZipfSpec,
    x: u32,
    t: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let table = ZipfTable::new(spec.beta, spec.k)?;
    let m = spec.m as usize;
    let samples: Vec<Vec<f64>> = Execution::default().map_range(replicates, |r| {
        let mut rng = rng::stream(seed, r as u64);
        let mut counts = vec![0.0; m];
        for _ in 0..t {
            let xi = table.draw(&mut rng);
            let y = if rng.random::<f64>() < spec.pi {
                spec.f0(xi)
            } else {
                rng.random_range(1..=spec.m)
            };
            if xi == x {
                counts[y as usize - 1] += 1.0;
            }
        }
        counts
    });
    let n = replicates as f64;
    let mean: Vec<f64> = (0..m).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    samples
                        .iter()
                        .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
                        .sum::<f64>()
                        / (n - 1.0)
                })
                .collect()
        })
        .collect())
}
