//! Adversary profit functions `f(π, A)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RestakingGraph;

/// Largest service count [`check_strict_submodularity`] will enumerate.
pub const MAX_SUBMODULARITY_SERVICES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfitSpec {
    /// `Σ π_s`.
    Linear,
    /// `(Σ π_s^p)^(1/p)` with `p > 1`.
    #[serde(rename = "pnorm")]
    PNorm { p: f64 },
    /// `max π_s`, the `p = ∞` limit.
    #[serde(rename = "maxnorm")]
    MaxNorm,
    /// `|A|^(-c) Σ π_s` with `c ∈ (0, 1)`.
    #[serde(rename = "powerscaled")]
    PowerScaled { c: f64 },
}

impl ProfitSpec {
    pub fn pnorm(p: f64) -> Result<Self> {
        Self::PNorm { p }.validated()
    }

    pub fn power_scaled(c: f64) -> Result<Self> {
        Self::PowerScaled { c }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            ProfitSpec::PNorm { p } if !(p > 1.0 && p.is_finite()) => Err(Error::Domain(format!(
                "pnorm needs a finite p > 1 (got {p}); use linear for p = 1 and maxnorm for p = inf"
            ))),
            ProfitSpec::PowerScaled { c } if !(c > 0.0 && c < 1.0) => {
                Err(Error::Domain(format!("powerscaled needs c in (0, 1), got {c}")))
            }
            spec => Ok(spec),
        }
    }

    /// `1/p` for the norm family: 1 for Linear, 0 for MaxNorm.
    pub fn inv_p(&self) -> Option<f64> {
        match self {
            ProfitSpec::Linear => Some(1.0),
            ProfitSpec::PNorm { p } => Some(1.0 / p),
            ProfitSpec::MaxNorm => Some(0.0),
            ProfitSpec::PowerScaled { .. } => None,
        }
    }

    /// Evaluates `f` over the profits of the attacked services.
    pub fn evaluate<I: IntoIterator<Item = f64>>(&self, pis: I) -> f64 {
        let mut n = 0usize;
        let mut acc = 0.0f64;
        match *self {
            ProfitSpec::Linear => {
                for pi in pis {
                    acc += pi;
                }
                acc
            }
            ProfitSpec::PNorm { p } => {
                // Scale by the maximum to keep π^p in range.
                let pis: Vec<f64> = pis.into_iter().collect();
                let m = pis.iter().copied().fold(0.0, f64::max);
                if m == 0.0 {
                    return 0.0;
                }
                for pi in &pis {
                    acc += (pi / m).powf(p);
                }
                m * acc.powf(1.0 / p)
            }
            ProfitSpec::MaxNorm => pis.into_iter().fold(0.0, f64::max),
            ProfitSpec::PowerScaled { c } => {
                for pi in pis {
                    acc += pi;
                    n += 1;
                }
                if n == 0 {
                    0.0
                } else {
                    (n as f64).powf(-c) * acc
                }
            }
        }
    }

    /// `f(π, A)` on a graph.
    pub fn profit(&self, graph: &RestakingGraph, services: &[usize]) -> Result<f64> {
        let mut seen = std::collections::BTreeSet::new();
        for &s in services {
            graph.check_service(s)?;
            seen.insert(s);
        }
        Ok(self.evaluate(seen.into_iter().map(|s| graph.pi(s))))
    }
}

impl fmt::Display for ProfitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfitSpec::Linear => write!(f, "linear"),
            ProfitSpec::PNorm { p } => write!(f, "pnorm:{p}"),
            ProfitSpec::MaxNorm => write!(f, "maxnorm"),
            ProfitSpec::PowerScaled { c } => write!(f, "powerscaled:{c}"),
        }
    }
}

impl FromStr for ProfitSpec {
    type Err = Error;

    /// Parses `linear`, `pnorm:P`, `maxnorm` or `powerscaled:C`.
    /// `pnorm:1` and `pnorm:inf` map to Linear and MaxNorm.
    fn from_str(text: &str) -> Result<Self> {
        let lower = text.trim().to_ascii_lowercase();
        let (kind, arg) = match lower.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (lower.as_str(), None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Domain(format!("profit spec `{text}` needs a parameter")))?;
            a.parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number `{a}` in profit spec `{text}`")))
        };
        match kind {
            "linear" if arg.is_none() => Ok(ProfitSpec::Linear),
            "maxnorm" if arg.is_none() => Ok(ProfitSpec::MaxNorm),
            "pnorm" => {
                let p = number(arg)?;
                if p == 1.0 {
                    Ok(ProfitSpec::Linear)
                } else if p == f64::INFINITY {
                    Ok(ProfitSpec::MaxNorm)
                } else {
                    ProfitSpec::pnorm(p)
                }
            }
            "powerscaled" => ProfitSpec::power_scaled(number(arg)?),
            _ => Err(Error::Domain(format!(
                "unknown profit spec `{text}` (expected linear, pnorm:P, maxnorm or powerscaled:C)"
            ))),
        }
    }
}

/// True iff `f(A ∪ A') + f(A ∩ A') < f(A) + f(A')` for every incomparable
/// pair, with slack above 1e-12.
pub fn check_strict_submodularity(spec: &ProfitSpec, graph: &RestakingGraph) -> Result<bool> {
    let n = graph.num_services();
    if n > MAX_SUBMODULARITY_SERVICES {
        return Err(Error::Resource(format!(
            "strict submodularity check enumerates all pairs; {n} services exceeds {MAX_SUBMODULARITY_SERVICES}"
        )));
    }
    let full = 1usize << n;
    let values: Vec<f64> = (0..full)
        .map(|m| spec.evaluate((0..n).filter(|i| m >> i & 1 == 1).map(|i| graph.pi(i))))
        .collect();
    for a in 0..full {
        for b in (a + 1)..full {
            let meet = a & b;
            if meet == a || meet == b {
                continue;
            }
            if values[a | b] + values[meet] >= values[a] + values[b] - 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(pi: &[f64]) -> RestakingGraph {
        RestakingGraph::from_parts(pi, &vec![0.5; pi.len()], &[1.0], []).unwrap()
    }

    #[test]
    fn worked_values() {
        let g = graph(&[3.0, 4.0]);
        assert!((ProfitSpec::pnorm(2.0).unwrap().profit(&g, &[0, 1]).unwrap() - 5.0).abs() < 1e-12);
        let g = graph(&[1.0, 1.0]);
        assert_eq!(ProfitSpec::Linear.profit(&g, &[0, 1]).unwrap(), 2.0);
        let g = graph(&[1.1, 1.1]);
        assert_eq!(ProfitSpec::MaxNorm.profit(&g, &[1]).unwrap(), 1.1);
        assert_eq!(ProfitSpec::MaxNorm.profit(&g, &[0, 1]).unwrap(), 1.1);
    }

    #[test]
    fn empty_set_is_zero() {
        for spec in [
            ProfitSpec::Linear,
            ProfitSpec::PNorm { p: 2.0 },
            ProfitSpec::MaxNorm,
            ProfitSpec::PowerScaled { c: 0.5 },
        ] {
            assert_eq!(spec.evaluate([]), 0.0);
        }
    }

    #[test]
    fn power_scaled() {
        let v = ProfitSpec::PowerScaled { c: 0.5 }.evaluate([2.0, 2.0, 2.0, 2.0]);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trip() {
        for text in ["linear", "pnorm:2", "maxnorm", "powerscaled:0.25", "pnorm:1.5"] {
            let spec: ProfitSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("pnorm:1".parse::<ProfitSpec>().unwrap(), ProfitSpec::Linear);
        assert_eq!("pnorm:inf".parse::<ProfitSpec>().unwrap(), ProfitSpec::MaxNorm);
        assert!("pnorm:0.5".parse::<ProfitSpec>().is_err());
        assert!("powerscaled:1".parse::<ProfitSpec>().is_err());
        assert!("cubic".parse::<ProfitSpec>().is_err());
    }

    #[test]
    fn submodularity() {
        let g = graph(&[1.0, 2.0, 3.0, 4.0]);
        assert!(check_strict_submodularity(&ProfitSpec::PNorm { p: 2.0 }, &g).unwrap());
        assert!(!check_strict_submodularity(&ProfitSpec::Linear, &g).unwrap());
        assert!(check_strict_submodularity(&ProfitSpec::Linear, &graph(&[1.0])).unwrap());
        assert!(matches!(
            check_strict_submodularity(&ProfitSpec::Linear, &graph(&[1.0; 13])),
            Err(Error::Resource(_))
        ));
    }
}
