//! Verifier pruning and survival bookkeeping.

use rand::Rng as _;

use crate::exec::Execution;
use crate::labelers::{LabeledSet, LinearWeights};
use crate::{Error, Result};

/// Keep rates of a symmetric verifier channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    /// `P(q = 1 | y′ = y)`.
    pub phi: f64,
    /// `P(q = 1 | y′ ≠ y)`.
    pub psi: f64,
}

impl Channel {
    pub fn new(phi: f64, psi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::config(format!("phi = {phi} must lie in (0, 1]")));
        }
        if !(0.0..=1.0).contains(&psi) {
            return Err(Error::config(format!("psi = {psi} must lie in [0, 1]")));
        }
        Ok(Self { phi, psi })
    }

    pub const NO_PRUNING: Channel = Channel { phi: 1.0, psi: 1.0 };
    pub const ORACLE: Channel = Channel { phi: 1.0, psi: 0.0 };
}

/// A verifier channel together with the corruption level `p = P(y′ ≠ y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneParams {
    pub phi: f64,
    pub psi: f64,
    pub p: f64,
}

impl PruneParams {
    pub fn new(phi: f64, psi: f64, p: f64) -> Result<Self> {
        Channel::new(phi, psi)?;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("corruption level p = {p} must lie in [0, 1)")));
        }
        Ok(Self { phi, psi, p })
    }

    pub fn channel(&self) -> Channel {
        Channel {
            phi: self.phi,
            psi: self.psi,
        }
    }
}

/// Probability that a draw survives with true label `k` and synthesized label `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbs {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl CellProbs {
    pub fn total(&self) -> f64 {
        self.p11 + self.p10 + self.p01 + self.p00
    }
}

/// `p_kk = (1−p)φ/2`, `p_kℓ = pψ/2`.
pub fn phi_psi_to_pkl(params: PruneParams) -> CellProbs {
    let same = 0.5 * (1.0 - params.p) * params.phi;
    let cross = 0.5 * params.p * params.psi;
    CellProbs {
        p11: same,
        p10: cross,
        p01: cross,
        p00: same,
    }
}

/// Invert [`phi_psi_to_pkl`] given the corruption level `p`.
pub fn pkl_to_phi_psi(cells: CellProbs, p: f64) -> Result<PruneParams> {
    const TOL: f64 = 1e-12;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("corruption level p = {p} must lie in [0, 1)")));
    }
    if (cells.p11 - cells.p00).abs() > TOL || (cells.p10 - cells.p01).abs() > TOL {
        return Err(Error::config("cell probabilities are not symmetric"));
    }
    let phi = 2.0 * cells.p11 / (1.0 - p);
    let psi = if p == 0.0 {
        if cells.p01 > 0.0 || cells.p10 > 0.0 {
            return Err(Error::config(
                "p = 0 leaves no mislabeled mass, yet a cross cell is positive",
            ));
        }
        0.0
    } else {
        2.0 * cells.p10 / p
    };
    PruneParams::new(phi, psi, p)
}

/// Number of survivors by (true label, synthesized label), plus the unpruned size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct SurvivalCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
    /// Size `N` of the dataset before pruning.
    pub total: u64,
}

impl SurvivalCounts {
    /// Counts of a fully kept dataset.
    pub fn new(n11: u64, n10: u64, n01: u64, n00: u64) -> Self {
        Self {
            n11,
            n10,
            n01,
            n00,
            total: n11 + n10 + n01 + n00,
        }
    }

    /// Tally survivors.
    pub fn tally(truth: &[u8], fake: &[u8], mask: &[bool]) -> Self {
        let mut c = Self {
            total: truth.len() as u64,
            ..Self::default()
        };
        for ((&y, &yf), &q) in truth.iter().zip(fake).zip(mask) {
            if q {
                match (y, yf) {
                    (1, 1) => c.n11 += 1,
                    (1, _) => c.n10 += 1,
                    (_, 1) => c.n01 += 1,
                    _ => c.n00 += 1,
                }
            }
        }
        c
    }

    /// Number of survivors `Σ N_kℓ`.
    pub fn kept(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Survivors whose synthesized label is correct.
    pub fn correct(&self) -> u64 {
        self.n11 + self.n00
    }

    /// Survivors whose synthesized label is wrong.
    pub fn wrong(&self) -> u64 {
        self.n10 + self.n01
    }
}

/// A labeled set with its keep mask and survival counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedDataset {
    pub data: LabeledSet,
    pub mask: Vec<bool>,
    pub counts: SurvivalCounts,
}

impl PrunedDataset {
    pub fn new(data: LabeledSet, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: mask.len(),
            });
        }
        let counts = SurvivalCounts::tally(data.truth(), &data.fake, &mask);
        Ok(Self { data, mask, counts })
    }

    /// No pruning: every example kept.
    pub fn unpruned(data: LabeledSet) -> Self {
        let mask = vec![true; data.len()];
        Self::new(data, mask).expect("lengths match")
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.counts.kept() as usize
    }

    /// Recount from `(y, y′, q)` and compare with the stored counts.
    pub fn counts_consistent(&self) -> bool {
        SurvivalCounts::tally(self.data.truth(), &self.data.fake, &self.mask) == self.counts
    }

    /// Keep only the first `n` survivors, dropping everything after the last of them.
    pub fn first_survivors(&self, n: usize) -> Result<PrunedDataset> {
        if n > self.kept() {
            return Err(Error::config(format!(
                "requested {n} survivors but only {} are available",
                self.kept()
            )));
        }
        let mut seen = 0;
        let mut cut = 0;
        for (i, &q) in self.mask.iter().enumerate() {
            if seen == n {
                break;
            }
            seen += usize::from(q);
            cut = i + 1;
        }
        let samples = self.data.samples.prefix(cut);
        let data = LabeledSet::new(samples, self.data.fake[..cut].to_vec())?;
        PrunedDataset::new(data, self.mask[..cut].to_vec())
    }

    /// The survivors alone, as a fully kept dataset.
    pub fn compact(&self) -> PrunedDataset {
        let d = self.data.dim();
        let mut samples = crate::distributions::SampleSet::new(d);
        let mut fake = Vec::with_capacity(self.kept());
        for (i, &q) in self.mask.iter().enumerate() {
            if q {
                samples.push(self.data.samples.row(i), self.data.samples.label(i));
                fake.push(self.data.fake[i]);
            }
        }
        PrunedDataset::unpruned(LabeledSet { samples, fake })
    }
}

/// Keep each example independently with probability `φ` if its synthesized label is
/// correct and `ψ` otherwise.
pub fn prune_phi_psi(data: LabeledSet, channel: Channel, seed: u64) -> Result<PrunedDataset> {
    let channel = Channel::new(channel.phi, channel.psi)?;
    let truth = data.truth();
    let fake = &data.fake;
    let mask = Execution::Sequential
        .chunked_ranges(data.len(), seed, |rng, range| {
            range
                .map(|i| {
                    let rate = if truth[i] == fake[i] {
                        channel.phi
                    } else {
                        channel.psi
                    };
                    rng.random::<f64>() < rate
                })
                .collect::<Vec<bool>>()
        })
        .concat();
    PrunedDataset::new(data, mask)
}

/// Keep an example iff the pruner agrees with its synthesized label:
/// `(2y′ − 1)(x·w_prune) > 0`.
pub fn prune_margin(data: LabeledSet, pruner: &LinearWeights) -> Result<PrunedDataset> {
    pruner.check_dim(data.dim())?;
    if pruner.norm() == 0.0 {
        return Err(Error::config("pruner weights are zero"));
    }
    let mask = margin_mask(&data, pruner);
    PrunedDataset::new(data, mask)
}

pub(crate) fn margin_mask(data: &LabeledSet, pruner: &LinearWeights) -> Vec<bool> {
    data.samples
        .iter()
        .zip(&data.fake)
        .map(|(s, &yf)| {
            let sign = if yf == 1 { 1.0 } else { -1.0 };
            sign * pruner.margin(s.x) > 0.0
        })
        .collect()
}

/// Empirical keep rates. A rate whose conditioning event is empty is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredRates {
    pub phi: Option<f64>,
    pub psi: Option<f64>,
    pub p: f64,
    /// `cell[k][ℓ]`: fraction kept among examples with true label `k` and synthesized
    /// label `ℓ`, i.e. the per-class `φ_k` on the diagonal and `ψ_kℓ` off it.
    pub cell: [[Option<f64>; 2]; 2],
}

impl MeasuredRates {
    /// `1/(1 + ψ̂/φ̂)` when both rates are defined and `φ̂ > 0`.
    pub fn breakdown_point(&self) -> Option<f64> {
        match (self.phi, self.psi) {
            (Some(phi), Some(psi)) if phi > 0.0 => Some(1.0 / (1.0 + psi / phi)),
            _ => None,
        }
    }
}

pub fn measure_phi_psi(dataset: &PrunedDataset) -> Result<MeasuredRates> {
    measure_rates(dataset.data.truth(), &dataset.data.fake, &dataset.mask)
}

/// [`measure_phi_psi`] on raw label and mask slices.
pub fn measure_rates(truth: &[u8], fake: &[u8], mask: &[bool]) -> Result<MeasuredRates> {
    if truth.is_empty() {
        return Err(Error::Undefined("keep rates of an empty dataset"));
    }
    if truth.len() != fake.len() || truth.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: fake.len().min(mask.len()),
        });
    }
    let mut seen = [[0u64; 2]; 2];
    let mut kept = [[0u64; 2]; 2];
    for ((&y, &yf), &q) in truth.iter().zip(fake).zip(mask) {
        seen[y as usize][yf as usize] += 1;
        kept[y as usize][yf as usize] += u64::from(q);
    }
    let ratio = |k: u64, n: u64| (n > 0).then(|| k as f64 / n as f64);
    let correct = seen[0][0] + seen[1][1];
    let wrong = seen[0][1] + seen[1][0];
    let mut cell = [[None; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            cell[k][l] = ratio(kept[k][l], seen[k][l]);
        }
    }
    Ok(MeasuredRates {
        phi: ratio(kept[0][0] + kept[1][1], correct),
        psi: ratio(kept[0][1] + kept[1][0], wrong),
        p: wrong as f64 / truth.len() as f64,
        cell,
    })
}
