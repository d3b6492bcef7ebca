//! Plain-text model files.
//!
//! ```text
//! # comments start with '#'
//! family = weibull        # weibull | exp_exp | power
//! k = 2                   # weibull shape (k > 1)
//! beta = 1                # power exponent (beta > 0)
//! theta = 0.5             # optional, in (0, 1)
//! q_table = 0,0; 2,0.01; 6,0
//! ```
//!
//! One `key = value` per line; blank lines and `#` comments are ignored;
//! keys may appear at most once. `q_table` is a `;`-separated list of
//! `x,value` pairs with strictly increasing `x`. The perturbation `q` is
//! the piecewise-linear interpolant of the table, held constant beyond
//! its first and last knots.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DensityModel, Family, DEFAULT_THETA};

/// Piecewise-linear perturbation table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    knots: Vec<(f64, f64)>,
}

impl QTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::ModelFile("q_table needs at least one knot".into()));
        }
        if knots.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::ModelFile("q_table entries must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::ModelFile(
                "q_table abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(kx, _)| kx <= x);
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Parsed contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub theta: f64,
    pub q_table: Option<QTable>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<DensityModel> {
        let mut model = DensityModel::builtin(self.family)?.with_theta(self.theta)?;
        if let Some(table) = &self.q_table {
            let table = table.clone();
            model = model.with_q(Arc::new(move |x| table.eval(x)))?;
        }
        Ok(model)
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::ModelFile(format!("{key}: `{value}` is not a number")))
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::ModelFile(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::ModelFile(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }

        let family_name = entries
            .remove("family")
            .ok_or_else(|| Error::ModelFile("missing `family`".into()))?;
        let family = match family_name.as_str() {
            "weibull" => {
                let k = entries
                    .remove("k")
                    .ok_or_else(|| Error::ModelFile("weibull needs `k`".into()))?;
                Family::Weibull {
                    k: parse_f64("k", &k)?,
                }
            }
            "exp_exp" => Family::ExpExp,
            "power" => {
                let beta = entries
                    .remove("beta")
                    .ok_or_else(|| Error::ModelFile("power needs `beta`".into()))?;
                Family::Power {
                    beta: parse_f64("beta", &beta)?,
                }
            }
            other => {
                return Err(Error::ModelFile(format!("unknown family `{other}`")));
            }
        };
        family.validate()?;

        let theta = match entries.remove("theta") {
            Some(v) => parse_f64("theta", &v)?,
            None => DEFAULT_THETA,
        };
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::ModelFile(format!("theta must lie in (0, 1), got {theta}")));
        }

        let q_table = match entries.remove("q_table") {
            Some(v) => {
                let mut knots = Vec::new();
                for pair in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                    let (x, y) = pair.split_once(',').ok_or_else(|| {
                        Error::ModelFile(format!("q_table entry `{pair}` is not `x,value`"))
                    })?;
                    knots.push((parse_f64("q_table", x)?, parse_f64("q_table", y)?));
                }
                Some(QTable::new(knots)?)
            }
            None => None,
        };

        if let Some(key) = entries.keys().next() {
            return Err(Error::ModelFile(format!("unknown key `{key}`")));
        }
        Ok(Self {
            family,
            theta,
            q_table,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Weibull { k } => writeln!(f, "family = weibull\nk = {k}")?,
            Family::ExpExp => writeln!(f, "family = exp_exp")?,
            Family::Power { beta } => writeln!(f, "family = power\nbeta = {beta}")?,
        }
        writeln!(f, "theta = {}", self.theta)?;
        if let Some(t) = &self.q_table {
            let parts: Vec<String> = t.knots().iter().map(|(x, v)| format!("{x},{v}")).collect();
            writeln!(f, "q_table = {}", parts.join("; "))?;
        }
        Ok(())
    }
}
