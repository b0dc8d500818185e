//! Synthesized labels: linear generators and an i.i.d. flip channel.

use rand::Rng as _;

use crate::distributions::SampleSet;
use crate::exec::Execution;
use crate::{Error, Result};

/// Weight vector of a linear classifier without intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWeights {
    w: Vec<f64>,
}

impl LinearWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::config("weight vector is empty"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("weight vector has non-finite entries"));
        }
        Ok(Self { w })
    }

    pub fn zeros(d: usize) -> Self {
        Self { w: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn norm(&self) -> f64 {
        dot(&self.w, &self.w).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            w: self.w.iter().map(|v| c * v).collect(),
        }
    }

    /// `x·w`.
    #[inline]
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x)
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.w.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `1` iff `x·w > 0`; a zero margin gives `0`.
pub fn classify_linear(w: &LinearWeights, x: &[f64]) -> Result<u8> {
    w.check_dim(x.len())?;
    Ok(u8::from(w.margin(x) > 0.0))
}

/// How a generator turns margins into labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// `y′ = 1[x·w > 0]`.
    #[default]
    Deterministic,
    /// `y′ ~ Bernoulli(σ(x·w))`.
    Sigmoid,
}

/// Samples together with their true labels and synthesized labels `y′`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub samples: SampleSet,
    pub fake: Vec<u8>,
}

impl LabeledSet {
    pub fn new(samples: SampleSet, fake: Vec<u8>) -> Result<Self> {
        if fake.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                found: fake.len(),
            });
        }
        if fake.iter().any(|&v| v > 1) {
            return Err(Error::config("labels must be 0 or 1"));
        }
        Ok(Self { samples, fake })
    }

    /// Use the true labels as synthesized labels.
    pub fn clean(samples: SampleSet) -> Self {
        let fake = samples.labels().to_vec();
        Self { samples, fake }
    }

    pub fn len(&self) -> usize {
        self.fake.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fake.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn truth(&self) -> &[u8] {
        self.samples.labels()
    }

    /// Fraction of synthesized labels that differ from the truth.
    pub fn flip_rate(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        let wrong = self
            .fake
            .iter()
            .zip(self.truth())
            .filter(|(a, b)| a != b)
            .count();
        wrong as f64 / self.len() as f64
    }
}

/// Label every sample with `generator`.
pub fn generate_labels(
    generator: &LinearWeights,
    samples: SampleSet,
    mode: LabelMode,
    seed: u64,
) -> Result<LabeledSet> {
    generate_labels_with(generator, samples, mode, seed, Execution::default())
}

pub fn generate_labels_with(
    generator: &LinearWeights,
    samples: SampleSet,
    mode: LabelMode,
    seed: u64,
    exec: Execution,
) -> Result<LabeledSet> {
    generator.check_dim(samples.dim())?;
    let fake = match mode {
        LabelMode::Deterministic => samples
            .iter()
            .map(|s| u8::from(generator.margin(s.x) > 0.0))
            .collect(),
        LabelMode::Sigmoid => exec
            .chunked_ranges(samples.len(), seed, |rng, range| {
                range
                    .map(|i| {
                        let p = sigmoid(generator.margin(samples.row(i)));
                        u8::from(rng.random::<f64>() < p)
                    })
                    .collect::<Vec<u8>>()
            })
            .concat(),
    };
    Ok(LabeledSet { samples, fake })
}

/// Flip each true label independently with probability `p`.
pub fn flip_channel(samples: SampleSet, p: f64, seed: u64) -> Result<LabeledSet> {
    flip_labels(samples.labels(), p, seed).map(|fake| LabeledSet { samples, fake })
}

/// The label sequence produced by an i.i.d. flip channel on `labels`.
pub fn flip_labels(labels: &[u8], p: f64, seed: u64) -> Result<Vec<u8>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("flip probability {p} outside [0, 1)")));
    }
    Ok(Execution::Sequential
        .chunked_ranges(labels.len(), seed, |rng, range| {
            range
                .map(|i| {
                    let flip = rng.random::<f64>() < p;
                    labels[i] ^ u8::from(flip)
                })
                .collect::<Vec<u8>>()
        })
        .concat())
}
