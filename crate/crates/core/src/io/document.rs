//! The on-disk graph format.
//!
//! Numbers are written with 17 significant digits (C's `%.17g`), so every
//! `f64` survives a round trip exactly, and documents produced here are
//! canonical: entries sorted by id, edges sorted, pretty-printed with a
//! trailing newline.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::graph::{OperatorRecord, RestakingGraph, ServiceRecord};
use crate::incentive::IncentiveSchedule;
use crate::profit::ProfitSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// An `f64` that serializes as `%.17g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

/// `%.17g`: shortest of fixed or exponent form with 17 significant digits,
/// trailing zeros removed.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let digits = (16 - exp) as usize;
        strip_zeros(&format!("{x:.digits$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_g17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Real)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceEntry {
    pub id: usize,
    pub pi: Real,
    pub alpha: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEntry {
    pub id: usize,
    pub sigma: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfitEntry {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Real>,
}

impl ProfitEntry {
    pub fn from_spec(spec: &ProfitSpec) -> Self {
        let (kind, p, c) = match *spec {
            ProfitSpec::Linear => ("linear", None, None),
            ProfitSpec::PNorm { p } => ("pnorm", Some(Real(p)), None),
            ProfitSpec::MaxNorm => ("maxnorm", None, None),
            ProfitSpec::PowerScaled { c } => ("powerscaled", None, Some(Real(c))),
        };
        ProfitEntry { kind: kind.into(), p, c }
    }

    pub fn to_spec(&self) -> Result<ProfitSpec> {
        let need = |x: Option<Real>, name: &str| {
            x.map(|r| r.0)
                .ok_or_else(|| Error::Document(format!("profit kind `{}` needs `{name}`", self.kind)))
        };
        match self.kind.as_str() {
            "linear" => Ok(ProfitSpec::Linear),
            "pnorm" => ProfitSpec::pnorm(need(self.p, "p")?),
            "maxnorm" => Ok(ProfitSpec::MaxNorm),
            "powerscaled" => ProfitSpec::power_scaled(need(self.c, "c")?),
            other => Err(Error::Document(format!("unknown profit kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub schema_version: u32,
    pub services: Vec<ServiceEntry>,
    pub operators: Vec<OperatorEntry>,
    /// `[operator_id, service_id]` pairs.
    pub edges: Vec<[usize; 2]>,
    pub profit: ProfitEntry,
}

/// Formats a serde_json error with its position.
pub(crate) fn json_error(what: &str, e: &serde_json::Error) -> Error {
    Error::Document(format!("{what}: line {} column {}: {e}", e.line(), e.column()))
}

impl GraphDocument {
    pub fn from_graph(graph: &RestakingGraph, spec: &ProfitSpec, schedule: Option<&IncentiveSchedule>) -> Self {
        let services = graph
            .services()
            .iter()
            .map(|s| ServiceEntry {
                id: s.id,
                pi: Real(s.pi),
                alpha: Real(s.alpha),
                reward: schedule.map(|x| Real(x.reward(s.id))),
                cost: schedule.map(|x| Real(x.cost(s.id))),
                discount: schedule.map(|x| Real(x.discount(s.id))),
            })
            .collect();
        let operators = graph.operators().iter().map(|v| OperatorEntry { id: v.id, sigma: Real(v.sigma) }).collect();
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            services,
            operators,
            edges: graph.edges().map(|(v, s)| [v, s]).collect(),
            profit: ProfitEntry::from_spec(spec),
        }
    }

    /// Parses a document. Syntax and shape errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text).map_err(|e| json_error("graph document", &e))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Document(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("documents always serialize");
        out.push('\n');
        out
    }

    /// Sorts entries and edges into canonical order.
    pub fn canonicalize(&mut self) {
        self.services.sort_by_key(|s| s.id);
        self.operators.sort_by_key(|v| v.id);
        self.edges.sort_by_key(|e| (e[0], e[1]));
    }

    pub fn graph(&self) -> Result<RestakingGraph> {
        let mut services: Vec<ServiceRecord> = self
            .services
            .iter()
            .map(|s| ServiceRecord { id: s.id, pi: s.pi.0, alpha: s.alpha.0 })
            .collect();
        services.sort_by_key(|s| s.id);
        let mut operators: Vec<OperatorRecord> =
            self.operators.iter().map(|v| OperatorRecord { id: v.id, sigma: v.sigma.0 }).collect();
        operators.sort_by_key(|v| v.id);
        RestakingGraph::new(services, operators, self.edges.iter().map(|e| (e[0], e[1])))
    }

    pub fn profit_spec(&self) -> Result<ProfitSpec> {
        self.profit.to_spec()
    }

    pub fn has_incentives(&self) -> bool {
        self.services.iter().any(|s| s.reward.is_some() || s.cost.is_some() || s.discount.is_some())
    }

    /// The incentive schedule, with absent fields read as zero.
    pub fn schedule(&self) -> Result<IncentiveSchedule> {
        let mut entries: Vec<&ServiceEntry> = self.services.iter().collect();
        entries.sort_by_key(|s| s.id);
        let get = |f: fn(&ServiceEntry) -> Option<Real>| entries.iter().map(|s| f(s).map_or(0.0, |r| r.0)).collect();
        IncentiveSchedule::new(get(|s| s.reward), get(|s| s.cost), get(|s| s.discount))
    }
}
