//! Attack validity, exhaustive attack search and γ-security.
//!
//! An attack `(A, B)` is valid when the adversary profits, `f(π, A) ≥ σ_B`,
//! and `B` reaches the collusion threshold of every attacked service,
//! `σ_{B∩∂s} ≥ α_s σ_∂s`. Both sides must be nonempty.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::RestakingGraph;
use crate::mask::{self, Engine};
use crate::numeric;
use crate::profit::ProfitSpec;

pub const MAX_EXHAUSTIVE_SERVICES: usize = 16;
pub const MAX_EXHAUSTIVE_OPERATORS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attack {
    #[serde(rename = "A")]
    pub services: Vec<usize>,
    #[serde(rename = "B")]
    pub operators: Vec<usize>,
}

impl Attack {
    /// Sorts and deduplicates both sides; empty sides are rejected.
    pub fn new(services: impl IntoIterator<Item = usize>, operators: impl IntoIterator<Item = usize>) -> Result<Self> {
        let services: Vec<usize> = services.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let operators: Vec<usize> = operators.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if services.is_empty() || operators.is_empty() {
            return Err(Error::Domain("an attack needs at least one service and one operator".into()));
        }
        Ok(Attack { services, operators })
    }

    pub(crate) fn from_masks(a: mask::Mask, b: mask::Mask) -> Self {
        Attack { services: mask::ids(a), operators: mask::ids(b) }
    }

    fn check_ids(&self, graph: &RestakingGraph) -> Result<()> {
        if self.services.is_empty() || self.operators.is_empty() {
            return Err(Error::Domain("an attack needs at least one service and one operator".into()));
        }
        for &s in &self.services {
            graph.check_service(s)?;
        }
        for &v in &self.operators {
            graph.check_operator(v)?;
        }
        Ok(())
    }
}

/// Outcome of checking one attack, naming the first failed condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    /// `f(π, A) < σ_B`.
    Unprofitable { profit: f64, cost: f64 },
    /// `σ_{B∩∂s} < α_s σ_∂s` for `service`.
    Infeasible { service: usize, colluding: f64, required: f64 },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn condition(&self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Unprofitable { .. } => "profitability",
            Verdict::Infeasible { .. } => "feasibility",
        }
    }
}

/// Checks an attack against `graph`, counting only operators for which
/// `live` holds toward each `σ_∂s`.
pub(crate) fn verdict_with(
    graph: &RestakingGraph,
    spec: &ProfitSpec,
    attack: &Attack,
    live: impl Fn(usize) -> bool,
) -> Result<Verdict> {
    attack.check_ids(graph)?;
    let profit = spec.profit(graph, &attack.services)?;
    let cost = graph.stake_of(&attack.operators)?;
    if !numeric::ge(profit, cost) {
        return Ok(Verdict::Unprofitable { profit, cost });
    }
    for &s in &attack.services {
        let mut pool = 0.0;
        let mut colluding = 0.0;
        for &v in graph.service_neighborhood(s) {
            if !live(v) {
                continue;
            }
            pool += graph.sigma(v);
            if attack.operators.binary_search(&v).is_ok() {
                colluding += graph.sigma(v);
            }
        }
        let required = graph.alpha(s) * pool;
        if !numeric::ge(colluding, required) {
            return Ok(Verdict::Infeasible { service: s, colluding, required });
        }
    }
    Ok(Verdict::Valid)
}

pub fn check_attack(graph: &RestakingGraph, spec: &ProfitSpec, attack: &Attack) -> Result<Verdict> {
    verdict_with(graph, spec, attack, |_| true)
}

pub fn is_valid_attack(graph: &RestakingGraph, spec: &ProfitSpec, attack: &Attack) -> Result<bool> {
    Ok(check_attack(graph, spec, attack)?.is_valid())
}

/// An ordered cascade. Steps are pairwise disjoint on both sides.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttackSequence {
    pub steps: Vec<Attack>,
}

impl AttackSequence {
    pub fn new(steps: Vec<Attack>) -> Result<Self> {
        let seq = AttackSequence { steps };
        seq.check_disjoint()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn check_disjoint(&self) -> Result<()> {
        let mut s_seen = BTreeSet::new();
        let mut v_seen = BTreeSet::new();
        for (t, step) in self.steps.iter().enumerate() {
            for &s in &step.services {
                if !s_seen.insert(s) {
                    return Err(Error::Domain(format!("step {t} reuses service {s}")));
                }
            }
            for &v in &step.operators {
                if !v_seen.insert(v) {
                    return Err(Error::Domain(format!("step {t} reuses operator {v}")));
                }
            }
        }
        Ok(())
    }

    /// Union of all slashed operators, sorted.
    pub fn removed_operators(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.steps.iter().flat_map(|s| s.operators.iter().copied()).collect();
        set.into_iter().collect()
    }

    pub fn removed_services(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.steps.iter().flat_map(|s| s.services.iter().copied()).collect();
        set.into_iter().collect()
    }

    /// Verdict of every step on the graph left by the earlier steps (and by
    /// the `seed` operators removed up front). Invalid steps are still
    /// removed before the next one is checked.
    pub fn verdicts(&self, graph: &RestakingGraph, spec: &ProfitSpec, seed: &[usize]) -> Result<Vec<Verdict>> {
        self.check_disjoint()?;
        let mut dead = vec![false; graph.num_operators()];
        for &v in seed {
            graph.check_operator(v)?;
            dead[v] = true;
        }
        let mut out = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            if let Some(&v) = step.operators.iter().find(|&&v| v < dead.len() && dead[v]) {
                return Err(Error::Domain(format!("operator {v} was already removed")));
            }
            out.push(verdict_with(graph, spec, step, |v| !dead[v])?);
            for &v in &step.operators {
                dead[v] = true;
            }
        }
        Ok(out)
    }

    /// True when every step is valid on its running graph.
    pub fn is_cascade(&self, graph: &RestakingGraph, spec: &ProfitSpec, seed: &[usize]) -> Result<bool> {
        Ok(self.verdicts(graph, spec, seed)?.iter().all(Verdict::is_valid))
    }
}

/// All valid attacks with `|A| ≤ max_services` and `|B| ≤ max_operators`,
/// in canonical order (by `A`, then `B`; each by size then ids).
pub fn find_attacks(
    graph: &RestakingGraph,
    spec: &ProfitSpec,
    max_services: Option<usize>,
    max_operators: Option<usize>,
) -> Result<Vec<Attack>> {
    find_attacks_with(graph, spec, max_services, max_operators, Execution::Auto)
}

pub fn find_attacks_with(
    graph: &RestakingGraph,
    spec: &ProfitSpec,
    max_services: Option<usize>,
    max_operators: Option<usize>,
    exec: Execution,
) -> Result<Vec<Attack>> {
    let engine = Engine::new(graph, spec)?;
    let found = engine.valid_attacks(
        mask::full(engine.ns),
        mask::full(engine.nv),
        max_services.unwrap_or(usize::MAX),
        max_operators.unwrap_or(usize::MAX),
        exec,
    );
    Ok(found.into_iter().map(|(a, b)| Attack::from_masks(a, b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub secure: bool,
    /// First valid attack in canonical order, when insecure.
    pub witness: Option<Attack>,
    /// `min σ_B / f(π, A) − 1` over feasible pairs with `f > 0`; only for
    /// secure graphs. Infinite when no such pair exists.
    pub gamma_star: Option<f64>,
    pub gamma: f64,
    /// `(1+γ) Σ_{s∈∂v} π_s / (α_s σ_∂s) ≤ 1` for every operator.
    pub sufficient_condition_ok: bool,
}

pub fn security_report(graph: &RestakingGraph, spec: &ProfitSpec, gamma: f64) -> Result<SecurityReport> {
    let engine = Engine::new(graph, spec)?;
    let (all_s, all_v) = (mask::full(engine.ns), mask::full(engine.nv));
    let a_sets = mask::submasks(all_s, usize::MAX);
    let per_a = Execution::Auto.map(&a_sets, |&a| {
        let witness = engine.attacks_for(a, all_v, usize::MAX).first().copied();
        let profit = engine.profit(a);
        let ratio = if profit > 0.0 {
            engine.min_feasible_stake(a, all_v).map(|st| st / profit - 1.0)
        } else {
            None
        };
        (witness, ratio)
    });
    let witness = per_a.iter().find_map(|(w, _)| *w).map(|(a, b)| Attack::from_masks(a, b));
    let secure = witness.is_none();
    let gamma_star = secure.then(|| per_a.iter().filter_map(|(_, r)| *r).fold(f64::INFINITY, f64::min));
    Ok(SecurityReport {
        secure,
        witness,
        gamma_star,
        gamma,
        sufficient_condition_ok: sufficient_condition(graph, gamma),
    })
}

/// `∀v: (1+γ) Σ_{s∈∂v} π_s / (α_s σ_∂s) ≤ 1`.
pub fn sufficient_condition(graph: &RestakingGraph, gamma: f64) -> bool {
    (0..graph.num_operators()).all(|v| {
        let load: f64 = graph
            .operator_neighborhood(v)
            .iter()
            .map(|&s| {
                let pi = graph.pi(s);
                if pi == 0.0 {
                    0.0
                } else {
                    pi / (graph.alpha(s) * graph.service_stake(s))
                }
            })
            .sum();
        numeric::le((1.0 + gamma) * load, 1.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionCheck {
    pub each_valid: Vec<bool>,
    pub union_valid: bool,
    /// `Σ_t |A_t|^(1/p) < (min σ) Σ_t |B_t| / max_{∪A} π`; norm specs only.
    pub sufficient_invalidity: Option<bool>,
}

pub fn union_attack_check(graph: &RestakingGraph, spec: &ProfitSpec, sequence: &AttackSequence) -> Result<UnionCheck> {
    let verdicts = sequence.verdicts(graph, spec, &[])?;
    let each_valid = verdicts.iter().map(Verdict::is_valid).collect();
    if sequence.is_empty() {
        return Ok(UnionCheck { each_valid, union_valid: false, sufficient_invalidity: None });
    }
    let union = Attack::new(sequence.removed_services(), sequence.removed_operators())?;
    let union_valid = is_valid_attack(graph, spec, &union)?;
    let sufficient_invalidity = match spec {
        ProfitSpec::PNorm { .. } | ProfitSpec::MaxNorm => {
            let inv_p = spec.inv_p().unwrap_or(0.0);
            let lhs: f64 = sequence.steps.iter().map(|st| (st.services.len() as f64).powf(inv_p)).sum();
            let b_total: usize = sequence.steps.iter().map(|st| st.operators.len()).sum();
            let max_pi = union.services.iter().map(|&s| graph.pi(s)).fold(0.0, f64::max);
            let min_sigma = graph.min_stake().unwrap_or(0.0);
            Some(lhs < min_sigma * b_total as f64 / max_pi)
        }
        _ => None,
    };
    Ok(UnionCheck { each_valid, union_valid, sufficient_invalidity })
}

/// `K·S^(1/p)`, the bound on `|B|` for any p-attack.
pub fn claim1_bound(graph: &RestakingGraph, spec: &ProfitSpec) -> Result<f64> {
    let ProfitSpec::PNorm { p } = spec else {
        return Err(Error::Domain(format!("the |B| bound needs a pnorm profit, got {spec}")));
    };
    let k = graph.stake_profit_ratio()?.k_stake;
    Ok(k * (graph.num_services() as f64).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1(alpha: f64) -> RestakingGraph {
        RestakingGraph::from_parts(&[1.0, 1.0], &[alpha; 2], &[1.1, 1.1], [(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap()
    }

    fn att(a: &[usize], b: &[usize]) -> Attack {
        Attack::new(a.iter().copied(), b.iter().copied()).unwrap()
    }

    #[test]
    fn fig1_validity() {
        let lin = ProfitSpec::Linear;
        assert!(is_valid_attack(&fig1(1.0 / 3.0), &lin, &att(&[0, 1], &[0])).unwrap());
        let v = check_attack(&fig1(1.0 / 3.0), &lin, &att(&[0], &[0])).unwrap();
        assert_eq!(v.condition(), "profitability");
        let v = check_attack(&fig1(0.6), &lin, &att(&[0, 1], &[0])).unwrap();
        assert!(matches!(v, Verdict::Infeasible { service: 0, .. }));
    }

    #[test]
    fn fig1_enumeration() {
        let lin = ProfitSpec::Linear;
        assert!(find_attacks(&fig1(0.6), &lin, None, None).unwrap().is_empty());
        let found = find_attacks(&fig1(1.0 / 3.0), &lin, None, None).unwrap();
        assert_eq!(found, vec![att(&[0, 1], &[0]), att(&[0, 1], &[1])]);
    }

    #[test]
    fn zero_profit_service_is_never_attacked() {
        let g = RestakingGraph::from_parts(&[0.0], &[0.0], &[1.0, 2.0], [(0, 0), (1, 0)]).unwrap();
        assert!(find_attacks(&g, &ProfitSpec::Linear, None, None).unwrap().is_empty());
    }

    #[test]
    fn empty_attack_rejected() {
        assert!(Attack::new([], [0]).is_err());
        assert!(is_valid_attack(&fig1(0.5), &ProfitSpec::Linear, &att(&[0], &[7])).is_err());
    }

    #[test]
    fn security_reports() {
        let r = security_report(&fig1(0.6), &ProfitSpec::Linear, 0.0).unwrap();
        assert!(r.secure && r.witness.is_none());
        // cheapest feasible coalition for {s1, s2} is both operators: 2.2 / 2 − 1
        assert!((r.gamma_star.unwrap() - 0.1).abs() < 1e-12);
        let r = security_report(&fig1(1.0 / 3.0), &ProfitSpec::Linear, 0.0).unwrap();
        assert!(!r.secure);
        assert_eq!(r.witness, Some(att(&[0, 1], &[0])));
        assert_eq!(r.gamma_star, None);
    }

    #[test]
    fn sufficient_condition_boundary() {
        let g = RestakingGraph::from_parts(&[1.0], &[0.5], &[2.0], [(0, 0)]).unwrap();
        assert!(sufficient_condition(&g, 0.0));
        assert!(!sufficient_condition(&g, 0.01));
    }

    #[test]
    fn union_counterexample() {
        let g = RestakingGraph::from_parts(&[1.1, 1.1], &[0.5; 2], &[1.0, 1.0], [(0, 0), (1, 1)]).unwrap();
        let seq = AttackSequence::new(vec![att(&[0], &[0]), att(&[1], &[1])]).unwrap();
        let r = union_attack_check(&g, &ProfitSpec::MaxNorm, &seq).unwrap();
        assert_eq!(r.each_valid, vec![true, true]);
        assert!(!r.union_valid);
        let one = AttackSequence::new(vec![att(&[0], &[0])]).unwrap();
        let r = union_attack_check(&g, &ProfitSpec::MaxNorm, &one).unwrap();
        assert_eq!(r.union_valid, r.each_valid[0]);
        assert!(AttackSequence::new(vec![att(&[0], &[0]), att(&[1], &[0])]).is_err());
    }

    #[test]
    fn claim1_bound_values() {
        let g = RestakingGraph::from_parts(&[1.0; 4], &[0.5; 4], &[1.0; 3], [(0, 0)]).unwrap();
        assert!((claim1_bound(&g, &ProfitSpec::PNorm { p: 2.0 }).unwrap() - 2.0).abs() < 1e-12);
        assert!(claim1_bound(&g, &ProfitSpec::Linear).is_err());
    }
}
