//! Rewards, costs and rebalancing incentives.
//!
//! Each service `s` pays a reward `r_s` split pro rata over its operators and
//! charges each operator a cost `c_s`. A discount `δ_s` lowers the payout of
//! operators that also validate `τ(s)`, the service sharing the most stake
//! with `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RestakingGraph;
use crate::numeric;

/// Largest eligible pool [`max_rebalance_set`] searches exactly.
pub const MAX_EXACT_REBALANCE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveSchedule {
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub discounts: Vec<f64>,
}

impl IncentiveSchedule {
    pub fn zeros(services: usize) -> Self {
        IncentiveSchedule {
            rewards: vec![0.0; services],
            costs: vec![0.0; services],
            discounts: vec![0.0; services],
        }
    }

    pub fn new(rewards: Vec<f64>, costs: Vec<f64>, discounts: Vec<f64>) -> Result<Self> {
        let schedule = IncentiveSchedule { rewards, costs, discounts };
        schedule.validate(schedule.rewards.len())?;
        Ok(schedule)
    }

    /// Same reward and cost everywhere, no discounts.
    pub fn uniform(services: usize, reward: f64, cost: f64) -> Result<Self> {
        Self::new(vec![reward; services], vec![cost; services], vec![0.0; services])
    }

    pub fn validate(&self, services: usize) -> Result<()> {
        if self.rewards.len() != services || self.costs.len() != services || self.discounts.len() != services {
            return Err(Error::InvalidGraph(format!("incentive schedule must cover all {services} services")));
        }
        for s in 0..services {
            let (r, c, d) = (self.rewards[s], self.costs[s], self.discounts[s]);
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidGraph(format!("service {s}: reward must be finite and >= 0")));
            }
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidGraph(format!("service {s}: cost must be finite and >= 0")));
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidGraph(format!("service {s}: discount must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn cost(&self, s: usize) -> f64 {
        self.costs[s]
    }

    pub fn discount(&self, s: usize) -> f64 {
        self.discounts[s]
    }

    /// Drops the entries of removed services, keeping survivors in order.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        IncentiveSchedule {
            rewards: keep.iter().map(|&s| self.rewards[s]).collect(),
            costs: keep.iter().map(|&s| self.costs[s]).collect(),
            discounts: keep.iter().map(|&s| self.discounts[s]).collect(),
        }
    }

    fn check(&self, graph: &RestakingGraph) -> Result<()> {
        if self.rewards.len() != graph.num_services() {
            return Err(Error::InvalidGraph("incentive schedule does not match the graph".into()));
        }
        Ok(())
    }
}

/// `τ(s)`: the lowest-id service with the largest overlap with `s`.
pub fn tau(graph: &RestakingGraph, s: usize) -> Result<Option<usize>> {
    graph.check_service(s)?;
    if graph.num_services() < 2 {
        return Ok(None);
    }
    Ok(graph.overlap_bounds(s)?.tau.first().copied())
}

/// Operators validating `τ(s)`.
pub fn tau_boundary(graph: &RestakingGraph, s: usize) -> Result<Vec<usize>> {
    Ok(match tau(graph, s)? {
        Some(t) => graph.service_neighborhood(t).to_vec(),
        None => Vec::new(),
    })
}

/// `ρ_sv = r_s σ_v / σ_∂s`, scaled by `1 − δ_s` when `v ∈ ∂τ(s)`; zero off
/// the edge set.
pub fn pro_rata_reward(graph: &RestakingGraph, schedule: &IncentiveSchedule, s: usize, v: usize) -> Result<f64> {
    graph.check_service(s)?;
    graph.check_operator(v)?;
    schedule.check(graph)?;
    if !graph.has_edge(v, s) {
        return Ok(0.0);
    }
    let pool = graph.service_stake(s);
    let r = schedule.reward(s);
    if pool == 0.0 {
        return if r > 0.0 { Err(Error::Domain(format!("service {s} has no stake to pay"))) } else { Ok(0.0) };
    }
    Ok(effective_reward(graph, schedule, s, v)? * graph.sigma(v) / pool)
}

/// `σ_v ≥ c_s σ_∂s / r_s`. The pool includes `v` only if `v` is
/// already a member.
pub fn profitable_without_impact(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    v: usize,
    s: usize,
) -> Result<bool> {
    graph.check_service(s)?;
    graph.check_operator(v)?;
    schedule.check(graph)?;
    let (r, c) = (schedule.reward(s), schedule.cost(s));
    if c == 0.0 {
        return Ok(true);
    }
    if r == 0.0 {
        return Ok(false);
    }
    Ok(numeric::ge(graph.sigma(v) * r, c * graph.service_stake(s)))
}

/// `σ_v ≥ c_s σ_∂s / (r_sv − c_s)` with the pool excluding `v`, where
/// `r_sv` is `r_s` discounted by `δ_s` for operators of `τ(s)`.
pub fn profitable_with_impact(graph: &RestakingGraph, schedule: &IncentiveSchedule, v: usize, s: usize) -> Result<bool> {
    graph.check_service(s)?;
    graph.check_operator(v)?;
    schedule.check(graph)?;
    let mut pool = graph.service_stake(s);
    if graph.has_edge(v, s) {
        pool -= graph.sigma(v);
    }
    let r = effective_reward(graph, schedule, s, v)?;
    Ok(joins_profitably(graph.sigma(v), pool, r, schedule.cost(s)))
}

/// `r_sv = (1 − δ_s 1[v ∈ ∂τ(s)]) r_s`.
pub fn effective_reward(graph: &RestakingGraph, schedule: &IncentiveSchedule, s: usize, v: usize) -> Result<f64> {
    let (r, delta) = (schedule.reward(s), schedule.discount(s));
    if delta > 0.0 && tau_boundary(graph, s)?.binary_search(&v).is_ok() {
        Ok(r * (1.0 - delta))
    } else {
        Ok(r)
    }
}

pub(crate) fn joins_profitably(sigma: f64, pool: f64, r: f64, c: f64) -> bool {
    if r <= c {
        return false;
    }
    numeric::ge(sigma * (r - c), c * pool)
}

/// `κ = q / (1 − q)` with `q = |D| c / (r − c)`, when `q < 1`.
pub fn kappa(size: usize, r: f64, c: f64) -> Option<f64> {
    if r <= c {
        return None;
    }
    let q = size as f64 * c / (r - c);
    (q < 1.0).then(|| q / (1.0 - q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebalanceFeasibleSet {
    pub service: usize,
    pub removed: Vec<usize>,
    /// `D_s(B)`: a stake-maximal set of newly profitable joiners, sorted.
    pub members: Vec<usize>,
    pub stake: f64,
    /// `σ_{∂s−B}`.
    pub pool: f64,
    /// `κ` for `|D|`, when defined.
    pub kappa: Option<f64>,
    /// Whether the set was found by exhaustive search.
    pub exact: bool,
}

/// Operators that may join `s` after `removed` is slashed: outside `B` and
/// `∂s`, with `σ_v ≤ c σ_∂s / (r − c)`.
pub fn rebalance_candidates(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    s: usize,
    removed: &[usize],
) -> Result<Vec<usize>> {
    graph.check_service(s)?;
    schedule.check(graph)?;
    for &v in removed {
        graph.check_operator(v)?;
    }
    let (r, c) = (schedule.reward(s), schedule.cost(s));
    if r <= c {
        return Ok(Vec::new());
    }
    let upper = c * graph.service_stake(s) / (r - c);
    Ok((0..graph.num_operators())
        .filter(|v| !removed.contains(v) && !graph.has_edge(*v, s))
        .filter(|&v| numeric::le(graph.sigma(v), upper))
        .collect())
}

/// Whether `D` meets the joining bound `σ_v ≥ c (σ_{∂s−B} + σ_D) / (r − c)`
/// for every member.
pub fn is_rebalance_feasible(sigmas: &[f64], pool: f64, r: f64, c: f64) -> bool {
    let total: f64 = sigmas.iter().sum();
    r > c && sigmas.iter().all(|&sv| numeric::ge(sv * (r - c), c * (pool + total)))
}

/// `D_s(B)`: the largest-stake set of eligible operators that can all join
/// `s` profitably together. Exact up to [`MAX_EXACT_REBALANCE`] eligible
/// operators, greedy with verification beyond. Ties go to the canonically
/// smallest set.
pub fn max_rebalance_set(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    s: usize,
    removed: &[usize],
) -> Result<RebalanceFeasibleSet> {
    let eligible = rebalance_candidates(graph, schedule, s, removed)?;
    let (r, c) = (schedule.reward(s), schedule.cost(s));
    let pool: f64 = graph
        .service_neighborhood(s)
        .iter()
        .filter(|v| !removed.contains(v))
        .map(|&v| graph.sigma(v))
        .sum();
    let mut removed_sorted = removed.to_vec();
    removed_sorted.sort_unstable();
    removed_sorted.dedup();

    // Descending stake, ties by id.
    let mut order = eligible.clone();
    order.sort_by(|&a, &b| graph.sigma(b).total_cmp(&graph.sigma(a)).then(a.cmp(&b)));
    let sig: Vec<f64> = order.iter().map(|&v| graph.sigma(v)).collect();
    let exact = order.len() <= MAX_EXACT_REBALANCE;
    let chosen: Vec<usize> = if r <= c || order.is_empty() {
        Vec::new()
    } else if exact {
        let mut best = Best { stake: 0.0, members: Vec::new() };
        let mut current = Vec::new();
        let suffix: Vec<f64> = (0..=sig.len()).map(|i| sig[i..].iter().sum()).collect();
        search(&sig, &order, pool, r, c, 0, 0.0, &suffix, &mut current, &mut best);
        best.members
    } else {
        let mut picked: Vec<usize> = Vec::new();
        let mut total = 0.0;
        for (i, &sv) in sig.iter().enumerate() {
            // sorted descending, so the newcomer is the smallest member
            if numeric::ge(sv * (r - c), c * (pool + total + sv)) {
                picked.push(order[i]);
                total += sv;
            }
        }
        picked
    };
    let mut members = chosen;
    members.sort_unstable();
    let stake = members.iter().map(|&v| graph.sigma(v)).sum();
    Ok(RebalanceFeasibleSet {
        service: s,
        removed: removed_sorted,
        kappa: if members.is_empty() { None } else { kappa(members.len(), r, c) },
        members,
        stake,
        pool,
        exact,
    })
}

struct Best {
    stake: f64,
    members: Vec<usize>,
}

/// Include/exclude search in descending-stake order. The last included
/// element is the smallest, so a set is feasible iff its sum fits under the
/// bound set by its smallest member.
#[allow(clippy::too_many_arguments)]
fn search(
    sig: &[f64],
    ids: &[usize],
    pool: f64,
    r: f64,
    c: f64,
    i: usize,
    sum: f64,
    suffix: &[f64],
    current: &mut Vec<usize>,
    best: &mut Best,
) {
    if !current.is_empty() {
        let better = numeric::gt(sum, best.stake)
            || (numeric::approx_eq(sum, best.stake) && canonical_less(current, &best.members));
        if better {
            best.stake = sum;
            best.members = current.clone();
        }
    }
    if i == sig.len() || numeric::lt(sum + suffix[i], best.stake) {
        return;
    }
    let with = sum + sig[i];
    if numeric::ge(sig[i] * (r - c), c * (pool + with)) {
        current.push(ids[i]);
        search(sig, ids, pool, r, c, i + 1, with, suffix, current, best);
        current.pop();
    }
    search(sig, ids, pool, r, c, i + 1, sum, suffix, current, best);
}

fn canonical_less(a: &[usize], b: &[usize]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a.len(), a) < (b.len(), b)
}

/// `clamp(1 − S^(1/p) / r_s, 0, 1)`; `p = ∞` gives `S^(1/p) = 1`.
pub fn min_discount(services: usize, p: f64, reward: f64) -> f64 {
    if reward <= 0.0 {
        return 0.0;
    }
    (1.0 - (services as f64).powf(1.0 / p) / reward).clamp(0.0, 1.0)
}
