//! Proxy breakdown point of a scored selection read from a two-column CSV.
//!
//! Config key: `input`, the path of an `s,q` file (score in `[0, 1]`, keep bit).

use std::path::PathBuf;

use super::{Cell, Config, Table};
use crate::proxy::{estimate_phi_psi, proxy_pstar, ScoredSelection};
use crate::{Error, Result};

pub const COLUMNS: &[&str] = &["row", "n", "kept", "p", "phi", "psi", "p_star", "status"];

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyPlan {
    pub input: PathBuf,
}

impl ProxyPlan {
    pub fn from_config(config: &Config) -> Result<Self> {
        let input = config
            .string("input")
            .ok_or_else(|| Error::config("missing key \"input\""))?;
        config.reject_unknown()?;
        Ok(Self { input: input.into() })
    }

    pub fn run(&self) -> Result<Table> {
        let data = ScoredSelection::read_csv(&self.input)?;
        Ok(evaluate(&data))
    }
}

pub fn evaluate(data: &ScoredSelection) -> Table {
    let rates = estimate_phi_psi(data);
    let kept = data.items().iter().filter(|(_, q)| *q).count();
    let (p_star, status) = match proxy_pstar(data) {
        Ok(v) => (Some(v), "ok".to_string()),
        Err(e) => (None, super::status_of(&e)),
    };
    let mut table = Table::new("proxy-eval", COLUMNS);
    table.push(vec![
        "summary".into(),
        data.len().into(),
        kept.into(),
        rates.p.into(),
        rates.phi.into(),
        rates.psi.into(),
        p_star.into(),
        Cell::from(status),
    ]);
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_row() {
        let data = ScoredSelection::new(vec![(0.8, true), (0.2, false), (0.6, true), (0.4, false)]).unwrap();
        let t = evaluate(&data);
        assert_eq!(t.render(), "# schema=1 kind=proxy-eval\nrow,n,kept,p,phi,psi,p_star,status\nsummary,4,2,0.5,0.7,0.3,0.7,ok\n");
    }

    #[test]
    fn missing_input_key() {
        assert!(ProxyPlan::from_config(&Config::parse("").unwrap()).is_err());
    }
}
