//! Flat `key = value` configuration files.
//!
//! One key per line, `#` starts a comment. Lists are comma-separated. Numeric
//! grids may also be written as `start:stop:step` (inclusive arithmetic range) or
//! `geom:start:stop:factor` (inclusive geometric range). Angles accept plain
//! radians or multiples of `pi`, e.g. `pi/12`, `2*pi/3`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use crate::{Error, Result};

/// Parsed key/value pairs. Reads are recorded so that unused (misspelled) keys
/// can be reported.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, (String, usize)>,
    used: Mutex<BTreeSet<String>>,
}

impl Clone for Config {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            used: Mutex::new(self.used_keys().clone()),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            if values.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self {
            values,
            used: Default::default(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set or replace a value (used for command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), (value.into(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn used_keys(&self) -> MutexGuard<'_, BTreeSet<String>> {
        self.used.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.used_keys().insert(key.to_string());
        self.values.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn err(key: &str, line: usize, message: impl std::fmt::Display) -> Error {
        if line == 0 {
            Error::config(format!("{key}: {message}"))
        } else {
            Error::Parse {
                line,
                message: format!("{key}: {message}"),
            }
        }
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|(v, _)| v.to_string())
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.string(key).unwrap_or_else(|| default.to_string())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|(v, l)| parse_number(v).map_err(|m| Self::err(key, l, m)))
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::config(format!("missing key {key:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.f64(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53) => Ok(Some(v as usize)),
            Some(v) => Err(Error::config(format!("{key}: expected a non-negative integer, got {v}"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.usize(key)?
            .ok_or_else(|| Error::config(format!("missing key {key:?}")))
    }

    /// A numeric list or grid.
    pub fn grid(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|(v, l)| parse_grid(v).map_err(|m| Self::err(key, l, m)))
            .transpose()
    }

    pub fn require_grid(&self, key: &str) -> Result<Vec<f64>> {
        self.grid(key)?
            .ok_or_else(|| Error::config(format!("missing key {key:?}")))
    }

    /// A grid of non-negative integers.
    pub fn int_grid(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(values) = self.grid(key)? else {
            return Ok(None);
        };
        values
            .into_iter()
            .map(|v| {
                let r = v.round();
                if r >= 0.0 && (v - r).abs() <= 1e-9 * r.max(1.0) {
                    Ok(r as usize)
                } else {
                    Err(Error::config(format!("{key}: expected integers, got {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Seed list; duplicates are rejected.
    pub fn seeds(&self, key: &str) -> Result<Option<Vec<u64>>> {
        let Some(list) = self.int_grid(key)? else {
            return Ok(None);
        };
        let unique: BTreeSet<usize> = list.iter().copied().collect();
        if unique.len() != list.len() {
            return Err(Error::config(format!("{key}: duplicate seeds")));
        }
        Ok(Some(list.into_iter().map(|v| v as u64).collect()))
    }

    /// Comma-separated angle list.
    pub fn angles(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|(v, l)| {
                split_list(v)
                    .iter()
                    .map(|s| parse_angle(s))
                    .collect::<std::result::Result<Vec<_>, String>>()
                    .map_err(|m| Self::err(key, l, m))
            })
            .transpose()
    }

    /// Fail on keys that no reader asked for, which are almost always typos.
    pub fn reject_unknown(&self) -> Result<()> {
        let used = self.used_keys();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(k.as_str()))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

fn split_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_number(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("not a number: {v:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("not finite: {v:?}"))
    }
}

/// Parse a list, `start:stop:step`, or `geom:start:stop:factor`.
pub fn parse_grid(v: &str) -> std::result::Result<Vec<f64>, String> {
    let v = v.trim();
    if let Some(rest) = v.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("geometric grid needs geom:start:stop:factor, got {v:?}"));
        }
        let (start, stop, factor) = (
            parse_number(parts[0])?,
            parse_number(parts[1])?,
            parse_number(parts[2])?,
        );
        if !(start > 0.0 && factor > 1.0 && stop >= start) {
            return Err(format!("invalid geometric grid {v:?}"));
        }
        let count = ((stop / start).ln() / factor.ln() + 1e-9).floor() as i32;
        return Ok((0..=count).map(|k| start * factor.powi(k)).collect());
    }
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range needs start:stop:step, got {v:?}"));
        }
        let (start, stop, step) = (
            parse_number(parts[0])?,
            parse_number(parts[1])?,
            parse_number(parts[2])?,
        );
        if !(step > 0.0 && stop >= start) {
            return Err(format!("invalid range {v:?}"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as i64;
        // Round to 12 significant digits so 0.1 + 2*0.05 prints as 0.2.
        return Ok((0..=count)
            .map(|k| round_sig(start + k as f64 * step, 12))
            .collect());
    }
    let items = split_list(v);
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(parse_number).collect()
}

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Radians, `pi`, or `k*pi/m` forms.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if !t.contains("pi") {
        return parse_number(&t);
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, parse_number(d)?),
        None => (t.as_str(), 1.0),
    };
    let coeff = match num {
        "pi" => 1.0,
        other => {
            let c = other
                .strip_suffix("*pi")
                .ok_or_else(|| format!("cannot read angle {s:?}"))?;
            parse_number(c)?
        }
    };
    if den == 0.0 {
        return Err(format!("division by zero in angle {s:?}"));
    }
    Ok(coeff * PI / den)
}
