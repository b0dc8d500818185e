//! Ridge-regularized logistic regression on pruned data, and its evaluation.
//!
//! The objective is
//! `L(w) = (1/N) Σ_i q_i ℓ(σ(x_i·w), y′_i) + (λ/2)‖w‖²` where `N` counts every
//! example, kept or not, and `ℓ` is binary cross-entropy. Minimization is
//! full-batch gradient descent: each step tries a Barzilai–Borwein length and
//! backtracks (Armijo, `c = 1e-4`, factor ½) until the objective decreases
//! enough, so the objective sequence is monotone.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::distributions::{MixtureSpec, SampleSet};
use crate::exec::Execution;
use crate::labelers::{dot, sigmoid, LinearWeights};
use crate::orthant::{phi2, phi_cdf};
use crate::pruning::PrunedDataset;
use crate::{Error, Result};

/// How the trial step length of each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepPolicy {
    /// Barzilai–Borwein length from the previous step, then backtracking.
    #[default]
    BarzilaiBorwein,
    /// Reuse twice the last accepted length, then backtracking.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Stop once `‖∇L‖ ≤ gtol`.
    pub gtol: f64,
    pub max_iter: usize,
    pub step: StepPolicy,
}

impl TrainConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            gtol: 1e-8,
            max_iter: 20_000,
            step: StepPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("ridge lambda = {} must be positive", self.lambda)));
        }
        if !(self.gtol > 0.0) {
            return Err(Error::config("gradient tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub weights: LinearWeights,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

/// `−y log σ(m) − (1−y) log(1−σ(m))`, written as `softplus(m) − y·m` so it never
/// takes the log of zero.
#[inline]
fn bce_from_margin(m: f64, y: f64) -> f64 {
    let softplus = if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    };
    softplus - y * m
}

/// Survivors of a pruned dataset, viewed as a training problem.
struct Problem<'a> {
    rows: Vec<&'a [f64]>,
    targets: Vec<f64>,
    n_norm: f64,
    d: usize,
    lambda: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a PrunedDataset, lambda: f64) -> Self {
        let mut rows = Vec::with_capacity(data.kept());
        let mut targets = Vec::with_capacity(data.kept());
        for (i, &q) in data.mask.iter().enumerate() {
            if q {
                rows.push(data.data.samples.row(i));
                targets.push(f64::from(data.data.fake[i]));
            }
        }
        Self {
            rows,
            targets,
            n_norm: data.len().max(1) as f64,
            d: data.data.dim(),
            lambda,
        }
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|x| dot(x, w)).collect()
    }

    fn value(&self, margins: &[f64], w_sq: f64) -> f64 {
        let loss: f64 = margins
            .iter()
            .zip(&self.targets)
            .map(|(&m, &y)| bce_from_margin(m, y))
            .sum();
        loss / self.n_norm + 0.5 * self.lambda * w_sq
    }

    fn gradient(&self, w: &[f64], margins: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for ((x, &m), &y) in self.rows.iter().zip(margins).zip(&self.targets) {
            let r = (sigmoid(m) - y) / self.n_norm;
            for (gj, xj) in g.iter_mut().zip(x.iter()) {
                *gj += r * xj;
            }
        }
        for (gj, wj) in g.iter_mut().zip(w) {
            *gj += self.lambda * wj;
        }
        g
    }
}

fn check(w: &[f64], data: &PrunedDataset, lambda: f64) -> Result<()> {
    if w.len() != data.data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.data.dim(),
            found: w.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::config("ridge lambda must be non-negative"));
    }
    Ok(())
}

/// `L(w)` on `data` with ridge `λ`.
pub fn objective(w: &[f64], data: &PrunedDataset, lambda: f64) -> Result<f64> {
    check(w, data, lambda)?;
    let p = Problem::new(data, lambda);
    Ok(p.value(&p.margins(w), dot(w, w)))
}

/// `∇L(w) = (1/N) Σ q_i (σ(x_i·w) − y′_i) x_i + λw`.
pub fn gradient(w: &[f64], data: &PrunedDataset, lambda: f64) -> Result<Vec<f64>> {
    check(w, data, lambda)?;
    let p = Problem::new(data, lambda);
    Ok(p.gradient(w, &p.margins(w)))
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimize `L` from `init` (zero when `None`).
pub fn train(data: &PrunedDataset, config: &TrainConfig, init: Option<&[f64]>) -> Result<TrainedModel> {
    config.validate()?;
    if data.kept() == 0 {
        return Err(Error::Undefined("training on an empty mask"));
    }
    let d = data.data.dim();
    let mut w = match init {
        Some(v) => v.to_vec(),
        None => vec![0.0; d],
    };
    check(&w, data, config.lambda)?;
    let p = Problem::new(data, config.lambda);

    let mut margins = p.margins(&w);
    let mut value = p.value(&margins, dot(&w, &w));
    let mut grad = p.gradient(&w, &margins);
    let mut history = vec![value];

    // Curvature bound of the loss for the first trial step.
    let mean_sq: f64 = p.rows.iter().map(|x| dot(x, x)).sum::<f64>() / p.n_norm;
    let mut step = 1.0 / (0.25 * mean_sq + config.lambda);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 0..config.max_iter {
        let g_sq = dot(&grad, &grad);
        let g_norm = g_sq.sqrt();
        if g_norm <= config.gtol {
            return Ok(TrainedModel {
                weights: LinearWeights::new(w)?,
                objective: value,
                grad_norm: g_norm,
                iterations: it,
                history,
            });
        }

        if let (StepPolicy::BarzilaiBorwein, Some((w_old, g_old))) = (config.step, &prev) {
            let s: Vec<f64> = w.iter().zip(w_old).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(g_old).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-12, 1e12);
            }
        }

        // The trial objective is evaluated exactly, so the accepted value is the
        // one recorded in the history.
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let w_trial: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let trial_margins = p.margins(&w_trial);
            let trial = p.value(&trial_margins, dot(&w_trial, &w_trial));
            // The slack absorbs rounding once the predicted decrease drops below
            // the resolution of the objective itself.
            let slack = 4.0 * f64::EPSILON * value.abs();
            if trial <= value - ARMIJO_C * step * g_sq + slack {
                accepted = Some((w_trial, trial_margins, trial));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, new_margins, new_value)) = accepted else {
            return Err(Error::NonConvergence {
                what: "logistic regression line search",
                iterations: it,
                residual: g_norm,
            });
        };
        margins = new_margins;
        value = new_value;
        history.push(value);
        let g_new = p.gradient(&w_new, &margins);
        prev = Some((std::mem::replace(&mut w, w_new), std::mem::replace(&mut grad, g_new)));
        if config.step == StepPolicy::Backtracking {
            step *= 2.0;
        }
    }
    Err(Error::NonConvergence {
        what: "logistic regression",
        iterations: config.max_iter,
        residual: dot(&grad, &grad).sqrt(),
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_hits(hits: u64, n: u64) -> Self {
        let value = hits as f64 / n as f64;
        Self {
            value,
            se: (value * (1.0 - value) / n as f64).sqrt(),
        }
    }
}

/// Unit direction of the Bayes classifier `x·(μ₁ − μ₀) > 0`.
pub fn bayes_direction(spec: &MixtureSpec) -> Vec<f64> {
    let m1 = spec.class_mean(1);
    let m0 = spec.class_mean(0);
    let diff: Vec<f64> = m1.iter().zip(&m0).map(|(a, b)| a - b).collect();
    let n = dot(&diff, &diff).sqrt();
    diff.into_iter().map(|v| v / n).collect()
}

/// Monte Carlo agreement rate between the model and the Bayes classifier on fresh
/// mixture draws.
pub fn test_accuracy(model: &LinearWeights, spec: &MixtureSpec, n_test: usize, seed: u64) -> Result<Estimate> {
    spec.validate()?;
    model.check_dim(spec.d)?;
    if n_test == 0 {
        return Err(Error::config("n_test must be at least 1"));
    }
    let bayes = bayes_direction(spec);
    let sd = spec.noise_sd();
    let means = [spec.class_mean(0), spec.class_mean(1)];
    let w = model.as_slice();
    let hits: u64 = Execution::default()
        .chunked(n_test, seed, |rng, len| {
            let mut x = vec![0.0; spec.d];
            let mut hits = 0u64;
            for _ in 0..len {
                let mean = &means[usize::from(rng.random::<bool>())];
                for (xi, m) in x.iter_mut().zip(mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = m + sd * z;
                }
                hits += u64::from((dot(&x, w) > 0.0) == (dot(&x, &bayes) > 0.0));
            }
            hits
        })
        .into_iter()
        .sum();
    Ok(Estimate::from_hits(hits, n_test as u64))
}

/// Monte Carlo agreement between `model` and `reference` under `x ~ N(0, I)`.
pub fn isotropic_agreement(model: &LinearWeights, reference: &LinearWeights, n_test: usize, seed: u64) -> Result<Estimate> {
    model.check_dim(reference.dim())?;
    if n_test == 0 {
        return Err(Error::config("n_test must be at least 1"));
    }
    let (u, v) = (model.as_slice(), reference.as_slice());
    let hits: u64 = Execution::default()
        .chunked(n_test, seed, |rng, len| {
            let mut x = vec![0.0; u.len()];
            let mut hits = 0u64;
            for _ in 0..len {
                for xi in x.iter_mut() {
                    *xi = rng.sample(StandardNormal);
                }
                hits += u64::from((dot(&x, u) > 0.0) == (dot(&x, v) > 0.0));
            }
            hits
        })
        .into_iter()
        .sum();
    Ok(Estimate::from_hits(hits, n_test as u64))
}

/// Exact agreement rate with the Bayes classifier, from bivariate normal orthant
/// probabilities.
pub fn exact_test_accuracy(model: &LinearWeights, spec: &MixtureSpec) -> Result<f64> {
    spec.validate()?;
    model.check_dim(spec.d)?;
    let norm = model.norm();
    if norm == 0.0 {
        // x·0 > 0 never holds: the model always predicts 0.
        return Ok(0.5);
    }
    let w: Vec<f64> = model.as_slice().iter().map(|v| v / norm).collect();
    let bayes = bayes_direction(spec);
    let sd = spec.noise_sd();
    let r = dot(&w, &bayes).clamp(-1.0, 1.0);
    let mut total = 0.0;
    for y in [0u8, 1] {
        let m = spec.class_mean(y);
        let a1 = dot(&m, &w) / sd;
        let a2 = dot(&m, &bayes) / sd;
        total += 0.5 * (phi2(a1, a2, r) + phi2(-a1, -a2, r));
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Exact probability that the model predicts the true label.
pub fn exact_label_accuracy(model: &LinearWeights, spec: &MixtureSpec) -> Result<f64> {
    spec.validate()?;
    model.check_dim(spec.d)?;
    let norm = model.norm();
    if norm == 0.0 {
        return Ok(0.5);
    }
    let sd = spec.noise_sd();
    let s1 = dot(&spec.class_mean(1), model.as_slice()) / (sd * norm);
    let s0 = dot(&spec.class_mean(0), model.as_slice()) / (sd * norm);
    Ok(0.5 * (phi_cdf(s1) + phi_cdf(-s0)))
}

/// Fraction of kept examples whose prediction equals the clean label.
pub fn masked_train_accuracy(model: &LinearWeights, data: &PrunedDataset) -> Result<f64> {
    model.check_dim(data.data.dim())?;
    let kept = data.kept();
    if kept == 0 {
        return Err(Error::Undefined("accuracy on an empty mask"));
    }
    let hits = data
        .mask
        .iter()
        .enumerate()
        .filter(|&(i, &q)| {
            q && u8::from(model.margin(data.data.samples.row(i)) > 0.0) == data.data.samples.label(i)
        })
        .count();
    Ok(hits as f64 / kept as f64)
}

/// Ordinary least squares on `±1` targets, `w = (XᵀX)⁻¹ Xᵀ(2y − 1)`.
pub fn fit_ols(samples: &SampleSet) -> Result<LinearWeights> {
    let d = samples.dim();
    if samples.len() < d {
        return Err(Error::config(format!(
            "least squares needs at least d = {d} samples, got {}",
            samples.len()
        )));
    }
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for s in samples.iter() {
        let t = if s.y == 1 { 1.0 } else { -1.0 };
        for i in 0..d {
            rhs[i] += t * s.x[i];
            let xi = s.x[i];
            let row = &mut gram[i * d..i * d + i + 1];
            for (g, xj) in row.iter_mut().zip(s.x) {
                *g += xi * xj;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
    }
    LinearWeights::new(cholesky_solve(&mut gram, &rhs, d)?)
}

/// Solve `G w = b` for symmetric positive definite `G` (overwritten).
fn cholesky_solve(g: &mut [f64], b: &[f64], d: usize) -> Result<Vec<f64>> {
    for j in 0..d {
        let mut diag = g[j * d + j];
        for k in 0..j {
            diag -= g[j * d + k] * g[j * d + k];
        }
        if diag <= 0.0 {
            return Err(Error::config("least-squares Gram matrix is singular"));
        }
        let diag = diag.sqrt();
        g[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = g[i * d + j];
            for k in 0..j {
                v -= g[i * d + k] * g[j * d + k];
            }
            g[i * d + j] = v / diag;
        }
    }
    let mut z = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            z[i] -= g[i * d + k] * z[k];
        }
        z[i] /= g[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            z[i] -= g[k * d + i] * z[k];
        }
        z[i] /= g[i * d + i];
    }
    Ok(z)
}
