//! Keep rates and breakdown point estimated from graded similarity scores.
//!
//! A score `s ∈ [0, 1]` generalizes the indicator "the synthesized label is
//! correct": `p = 1 − E[s]`, `φ = E[qs]/(1 − p)` and `ψ = E[q(1 − s)]/p`. With
//! binary scores these are exactly the empirical keep rates.

use std::io::BufRead;
use std::path::Path;

use crate::{Error, Result};

/// Scored examples with their keep bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSelection {
    items: Vec<(f64, bool)>,
}

impl ScoredSelection {
    pub fn new(items: Vec<(f64, bool)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::config("scored selection is empty"));
        }
        if let Some(&(s, _)) = items.iter().find(|(s, _)| !(0.0..=1.0).contains(s)) {
            return Err(Error::config(format!("score {s} outside [0, 1]")));
        }
        Ok(Self { items })
    }

    /// From binary correctness indicators and keep bits.
    pub fn from_binary(correct: &[bool], keep: &[bool]) -> Result<Self> {
        if correct.len() != keep.len() {
            return Err(Error::DimensionMismatch {
                expected: correct.len(),
                found: keep.len(),
            });
        }
        Self::new(
            correct
                .iter()
                .zip(keep)
                .map(|(&c, &q)| (if c { 1.0 } else { 0.0 }, q))
                .collect(),
        )
    }

    pub fn items(&self) -> &[(f64, bool)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Read a two-column `s,q` CSV. A header line and `#` comments are skipped.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(std::io::BufReader::new(file))
    }

    pub fn parse_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut items = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let s = match fields[0].parse::<f64>() {
                Ok(v) => v,
                Err(_) if items.is_empty() && idx == 0 => continue, // header
                Err(e) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("bad score {:?}: {e}", fields[0]),
                    })
                }
            };
            let q = match fields[1] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("keep bit must be 0 or 1, got {other:?}"),
                    })
                }
            };
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("score {s} outside [0, 1]"),
                });
            }
            items.push((s, q));
        }
        Self::new(items)
    }
}

/// `p = 1 − E[s]`, clamped to `[0, 1]`. Computed as `(n − Σs)/n`, which is the
/// exact error fraction for binary scores.
pub fn estimate_p(data: &ScoredSelection) -> f64 {
    let n = data.len() as f64;
    let sum = data.items.iter().map(|(s, _)| s).sum::<f64>();
    ((n - sum) / n).clamp(0.0, 1.0)
}

/// Proxy keep rates. A rate is `None` when its conditioning mass `1 − p` or `p` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyRates {
    pub phi: Option<f64>,
    pub psi: Option<f64>,
    pub p: f64,
}

pub fn estimate_phi_psi(data: &ScoredSelection) -> ProxyRates {
    let n = data.len() as f64;
    let (mut kept_s, mut kept_not_s, mut sum_s) = (0.0, 0.0, 0.0);
    for &(s, q) in &data.items {
        sum_s += s;
        if q {
            kept_s += s;
            kept_not_s += 1.0 - s;
        }
    }
    // Ratios of sums equal the ratios of means and stay exact for binary scores.
    let sum_not_s = n - sum_s;
    ProxyRates {
        phi: (sum_s > 0.0).then(|| kept_s / sum_s),
        psi: (sum_not_s > 0.0).then(|| kept_not_s / sum_not_s),
        p: estimate_p(data),
    }
}

/// `p⋆ = 1/(1 + ψ̂/φ̂)`.
pub fn proxy_pstar(data: &ScoredSelection) -> Result<f64> {
    let rates = estimate_phi_psi(data);
    match (rates.phi, rates.psi) {
        (Some(phi), Some(psi)) if phi > 0.0 => Ok(1.0 / (1.0 + psi / phi)),
        (Some(_), Some(_)) => Err(Error::Undefined("proxy breakdown point with phi = 0")),
        _ => Err(Error::Undefined("proxy keep rates")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_examples() {
        let ones = ScoredSelection::new(vec![(1.0, true); 4]).unwrap();
        assert_eq!(estimate_p(&ones), 0.0);
        let mixed = ScoredSelection::new(vec![(0.8, true), (0.2, false), (0.5, true), (0.5, false)]).unwrap();
        assert!((estimate_p(&mixed) - 0.5).abs() < 1e-15);
        let mut binary = vec![(1.0, true); 6];
        binary.extend(vec![(0.0, true); 4]);
        assert!((estimate_p(&ScoredSelection::new(binary).unwrap()) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn graded_example() {
        let data = ScoredSelection::new(vec![(0.8, true), (0.2, false), (0.6, true), (0.4, false)]).unwrap();
        let r = estimate_phi_psi(&data);
        // E[qs] = 0.35, E[q(1−s)] = 0.15, p = 0.5
        assert!((r.phi.unwrap() - 0.7).abs() < 1e-12);
        assert!((r.psi.unwrap() - 0.3).abs() < 1e-12);
        assert!((proxy_pstar(&data).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn oracle_and_no_selection() {
        let correct = [true, false, true, true, false];
        let oracle = ScoredSelection::from_binary(&correct, &correct).unwrap();
        assert_eq!(proxy_pstar(&oracle).unwrap(), 1.0);
        let all = ScoredSelection::from_binary(&correct, &[true; 5]).unwrap();
        let r = estimate_phi_psi(&all);
        assert_eq!((r.phi, r.psi), (Some(1.0), Some(1.0)));
        assert_eq!(proxy_pstar(&all).unwrap(), 0.5);
    }

    #[test]
    fn undefined_rates() {
        let perfect = ScoredSelection::new(vec![(1.0, true), (1.0, false)]).unwrap();
        assert_eq!(estimate_phi_psi(&perfect).psi, None);
        assert!(proxy_pstar(&perfect).is_err());
        assert!(ScoredSelection::new(vec![]).is_err());
        assert!(ScoredSelection::new(vec![(1.5, true)]).is_err());
    }

    #[test]
    fn csv_parsing() {
        let text = "s,q\n# comment\n0.8,1\n0.2,0\n";
        let data = ScoredSelection::parse_csv(text.as_bytes()).unwrap();
        assert_eq!(data.items(), &[(0.8, true), (0.2, false)]);
        assert!(ScoredSelection::parse_csv("0.5,2\n".as_bytes()).is_err());
        assert!(ScoredSelection::parse_csv("0.5\n".as_bytes()).is_err());
        assert!(ScoredSelection::parse_csv("s,q\n".as_bytes()).is_err());
    }
}
