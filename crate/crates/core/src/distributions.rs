//! Gaussian-mixture and noisy-Zipf samplers.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::exec::Execution;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// How the noise covariance of the mixture is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `E‖x‖² = 1`: noise covariance `(1 − ‖μ‖²)/d · I`, so `‖μ‖ < 1` is required.
    UnitTrace,
    /// `x | y ~ N(±τ w*, I/d)`.
    Simulation,
}

impl Convention {
    /// Standard deviation of `x·w` around its mean for a unit vector `w`.
    pub fn projection_sd(self, mu_norm: f64, d: usize) -> Result<f64> {
        if d == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        match self {
            Convention::UnitTrace => {
                if !(0.0..1.0).contains(&mu_norm) {
                    return Err(Error::config(format!(
                        "unit-trace convention needs 0 <= |mu| < 1, got {mu_norm}"
                    )));
                }
                Ok(((1.0 - mu_norm * mu_norm) / d as f64).sqrt())
            }
            Convention::Simulation => Ok(1.0 / (d as f64).sqrt()),
        }
    }
}

/// Relative placement of the two class means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanGeometry {
    /// `μ₁ = τe₁ = −μ₀`, giving cross-class similarity `b = −a`.
    #[default]
    Antipodal,
    /// `μ₁ = τe₁`, `μ₀ = τe₂`, giving `b = 0`.
    Orthogonal,
}

/// A balanced two-class Gaussian mixture with isotropic noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub d: usize,
    pub tau: f64,
    pub convention: Convention,
    pub geometry: MeanGeometry,
}

impl MixtureSpec {
    pub fn new(d: usize, tau: f64, convention: Convention) -> Result<Self> {
        Self::with_geometry(d, tau, convention, MeanGeometry::Antipodal)
    }

    pub fn with_geometry(
        d: usize,
        tau: f64,
        convention: Convention,
        geometry: MeanGeometry,
    ) -> Result<Self> {
        let spec = Self {
            d,
            tau,
            convention,
            geometry,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::config("dimension must be positive"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.geometry == MeanGeometry::Orthogonal && self.d < 2 {
            return Err(Error::config("orthogonal means need d >= 2"));
        }
        self.convention.projection_sd(self.tau, self.d).map(|_| ())
    }

    /// Per-coordinate noise standard deviation.
    pub fn noise_sd(&self) -> f64 {
        self.convention
            .projection_sd(self.tau, self.d)
            .expect("validated spec")
    }

    /// Same-class similarity `a = ‖μ‖²`.
    pub fn a(&self) -> f64 {
        self.tau * self.tau
    }

    /// Cross-class similarity `b = μ₁·μ₀`.
    pub fn b(&self) -> f64 {
        match self.geometry {
            MeanGeometry::Antipodal => -self.a(),
            MeanGeometry::Orthogonal => 0.0,
        }
    }

    /// Expected squared norm of a sample.
    pub fn expected_sq_norm(&self) -> f64 {
        let s = self.noise_sd();
        self.a() + self.d as f64 * s * s
    }

    /// Unit direction `w*` of the class-1 mean.
    pub fn mean_direction(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.d];
        w[0] = 1.0;
        w
    }

    /// Mean of class `y`.
    pub fn class_mean(&self, y: u8) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        match (self.geometry, y) {
            (_, 1) => m[0] = self.tau,
            (MeanGeometry::Antipodal, _) => m[0] = -self.tau,
            (MeanGeometry::Orthogonal, _) => m[1] = self.tau,
        }
        m
    }

    /// Accuracy of the Bayes classifier `sign(x·w*)` (antipodal geometry).
    pub fn bayes_accuracy(&self) -> f64 {
        crate::orthant::phi_cdf(self.tau / self.noise_sd())
    }
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub y: u8,
}

/// Row-major feature matrix plus true labels in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    d: usize,
    x: Vec<f64>,
    y: Vec<u8>,
}

impl SampleSet {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn from_parts(d: usize, x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        if d == 0 || x.len() != d * y.len() {
            return Err(Error::DimensionMismatch {
                expected: d * y.len(),
                found: x.len(),
            });
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::config("labels must be 0 or 1"));
        }
        Ok(Self { d, x, y })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn get(&self, i: usize) -> Sample<'_> {
        Sample {
            x: self.row(i),
            y: self.y[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Sample<'_>> + '_ {
        self.x
            .chunks_exact(self.d)
            .zip(self.y.iter())
            .map(|(x, &y)| Sample { x, y })
    }

    pub fn push(&mut self, x: &[f64], y: u8) {
        debug_assert_eq!(x.len(), self.d);
        self.x.extend_from_slice(x);
        self.y.push(y);
    }

    pub fn append(&mut self, other: &SampleSet) {
        debug_assert_eq!(other.d, self.d);
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
    }

    pub fn truncate(&mut self, n: usize) {
        self.y.truncate(n);
        self.x.truncate(n * self.d);
    }

    /// Copy of the first `n` samples.
    pub fn prefix(&self, n: usize) -> SampleSet {
        let n = n.min(self.len());
        SampleSet {
            d: self.d,
            x: self.x[..n * self.d].to_vec(),
            y: self.y[..n].to_vec(),
        }
    }

    /// The set with every feature vector negated and every label flipped.
    pub fn reflected(&self) -> SampleSet {
        SampleSet {
            d: self.d,
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| 1 - v).collect(),
        }
    }
}

/// Rows per independently seeded block when sampling mixtures.
const ROWS_PER_BLOCK: usize = 1024;

/// Draw `n` samples. Reproducible for a given `(spec, n, seed)`.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<SampleSet> {
    sample_mixture_with(spec, n, seed, Execution::default())
}

pub fn sample_mixture_with(
    spec: &MixtureSpec,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<SampleSet> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::config("sample count must be at least 1"));
    }
    let d = spec.d;
    let sd = spec.noise_sd();
    let means = [spec.class_mean(0), spec.class_mean(1)];
    let blocks = n.div_ceil(ROWS_PER_BLOCK);
    let parts = exec.map_range(blocks, |b| {
        let rows = ROWS_PER_BLOCK.min(n - b * ROWS_PER_BLOCK);
        let mut rng = rng::stream(seed, b as u64);
        let mut x = Vec::with_capacity(rows * d);
        let mut y = Vec::with_capacity(rows);
        for _ in 0..rows {
            let label = u8::from(rng.random::<bool>());
            let mean = &means[label as usize];
            x.extend(mean.iter().map(|m| {
                let z: f64 = rng.sample(StandardNormal);
                m + sd * z
            }));
            y.push(label);
        }
        (x, y)
    });
    let mut set = SampleSet::new(d);
    set.x.reserve(n * d);
    set.y.reserve(n);
    for (x, y) in parts {
        set.x.extend_from_slice(&x);
        set.y.extend_from_slice(&y);
    }
    Ok(set)
}

/// Largest deviations of the empirical Gram matrix from its concentration limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    /// `max |‖x_i‖² − E‖x‖²|` (the limit is 1 under the unit-trace convention).
    pub max_norm_dev: f64,
    /// `max |x_i·x_j − a|` over same-label pairs, if any.
    pub max_same_dev: Option<f64>,
    /// `max |x_i·x_j − b|` over cross-label pairs, if any.
    pub max_cross_dev: Option<f64>,
    pub same_pairs: usize,
    pub cross_pairs: usize,
    /// Set when a deviation exceeds the tolerance.
    pub flagged: bool,
    /// Set when only one label is present, so cross-class entries are missing.
    pub partial: bool,
}

impl GramReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_norm_dev
            .max(self.max_same_dev.unwrap_or(0.0))
            .max(self.max_cross_dev.unwrap_or(0.0))
    }
}

/// Compare all norms and pairwise dot products with their limits `E‖x‖²`, `a`, `b`.
pub fn empirical_gram_check(samples: &SampleSet, spec: &MixtureSpec, tol: f64) -> Result<GramReport> {
    spec.validate()?;
    if samples.len() < 2 {
        return Err(Error::config("Gram check needs at least two samples"));
    }
    if samples.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: samples.dim(),
        });
    }
    let (a, b, norm) = (spec.a(), spec.b(), spec.expected_sq_norm());
    let mut max_norm_dev: f64 = 0.0;
    let mut same: Option<f64> = None;
    let mut cross: Option<f64> = None;
    let (mut same_pairs, mut cross_pairs) = (0, 0);
    let n = samples.len();
    for i in 0..n {
        let xi = samples.row(i);
        max_norm_dev = max_norm_dev.max((dot(xi, xi) - norm).abs());
        for j in i + 1..n {
            let v = dot(xi, samples.row(j));
            if samples.label(i) == samples.label(j) {
                same_pairs += 1;
                same = Some(same.unwrap_or(0.0).max((v - a).abs()));
            } else {
                cross_pairs += 1;
                cross = Some(cross.unwrap_or(0.0).max((v - b).abs()));
            }
        }
    }
    let mut report = GramReport {
        max_norm_dev,
        max_same_dev: same,
        max_cross_dev: cross,
        same_pairs,
        cross_pairs,
        flagged: false,
        partial: cross_pairs == 0,
    };
    report.flagged = report.max_deviation() > tol;
    Ok(report)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// --- Zipf ----------------------------------------------------------------------

/// Ground-truth labeler `f₀ : {1..K} → {1..M}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GroundTruth {
    /// `f₀(x) = ((x − 1) mod M) + 1`.
    #[default]
    Cyclic,
    /// Explicit table, `table[x − 1] = f₀(x)`.
    Table(Vec<u32>),
}

/// Noisy-label Zipf source.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipfSpec {
    pub beta: f64,
    pub k: usize,
    pub m: u32,
    /// Probability that a label is the clean `f₀(x)`; otherwise it is uniform.
    pub pi: f64,
    pub f0: GroundTruth,
}

pub const DEFAULT_ZIPF_SUPPORT: usize = 1_000_000;

impl ZipfSpec {
    pub fn new(beta: f64, m: u32, pi: f64) -> Result<Self> {
        let spec = Self {
            beta,
            k: DEFAULT_ZIPF_SUPPORT,
            m,
            pi,
            f0: GroundTruth::Cyclic,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("Zipf exponent must exceed 1, got {}", self.beta)));
        }
        if self.k < 1 {
            return Err(Error::config("Zipf support K must be at least 1"));
        }
        if self.m < 2 {
            return Err(Error::config("label alphabet needs M >= 2"));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::config(format!("clean-label probability {} outside [0, 1]", self.pi)));
        }
        if let GroundTruth::Table(t) = &self.f0 {
            if t.len() != self.k {
                return Err(Error::DimensionMismatch {
                    expected: self.k,
                    found: t.len(),
                });
            }
            if t.iter().any(|&v| v < 1 || v > self.m) {
                return Err(Error::config("ground-truth labels must lie in 1..=M"));
            }
        }
        Ok(())
    }

    /// Clean label of input `x ∈ 1..=K`.
    #[inline]
    pub fn f0(&self, x: u32) -> u32 {
        match &self.f0 {
            GroundTruth::Cyclic => (x - 1) % self.m + 1,
            GroundTruth::Table(t) => t[x as usize - 1],
        }
    }
}

/// Normalized probabilities and cumulative table of a truncated Zipf law.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipfTable {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(beta: f64, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::config("Zipf support K must be at least 1"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("Zipf exponent must be positive"));
        }
        let weights: Vec<f64> = (1..=k).map(|x| (x as f64).powf(-beta)).collect();
        // smallest terms first for an accurate normalizer
        let z: f64 = weights.iter().rev().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("k >= 1") = 1.0;
        Ok(Self { probs, cdf })
    }

    pub fn support(&self) -> usize {
        self.probs.len()
    }

    /// `p(x)` for `x ∈ 1..=K`.
    pub fn prob(&self, x: u32) -> f64 {
        self.probs[x as usize - 1]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF draw by binary search.
    #[inline]
    pub fn draw(&self, rng: &mut Rng) -> u32 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        (i.min(self.cdf.len() - 1) + 1) as u32
    }
}

/// Draw `t` pairs `(x, y)` with `x ~ Zipf(β)` on `1..=K` and `y = f₀(x)` with
/// probability `π`, otherwise uniform on `1..=M`.
pub fn sample_zipf_noisy(spec: &ZipfSpec, t: usize, seed: u64) -> Result<Vec<(u32, u32)>> {
    spec.validate()?;
    let table = ZipfTable::new(spec.beta, spec.k)?;
    sample_zipf_with_table(spec, &table, t, seed, Execution::default())
}

/// As [`sample_zipf_noisy`] with a prebuilt table.
pub fn sample_zipf_with_table(
    spec: &ZipfSpec,
    table: &ZipfTable,
    t: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(u32, u32)>> {
    spec.validate()?;
    if t < 1 {
        return Err(Error::config("sample count must be at least 1"));
    }
    if table.support() != spec.k {
        return Err(Error::DimensionMismatch {
            expected: spec.k,
            found: table.support(),
        });
    }
    let parts = exec.chunked(t, seed, |rng, len| {
        (0..len)
            .map(|_| {
                let x = table.draw(rng);
                let y = if rng.random::<f64>() < spec.pi {
                    spec.f0(x)
                } else {
                    rng.random_range(1..=spec.m)
                };
                (x, y)
            })
            .collect::<Vec<_>>()
    });
    let mut out = Vec::with_capacity(t);
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}
