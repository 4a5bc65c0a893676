//! The iterated game: reward update, one attack, then strategic rebalancing.
//!
//! [`GameState`] keeps only the live part of the graph, compacted, together
//! with the original id of every surviving service and operator. Attacks and
//! logs always use original ids.

use serde::{Deserialize, Serialize};

use crate::attack::{self, Attack, Verdict};
use crate::error::{Error, Result};
use crate::graph::RestakingGraph;
use crate::incentive::{self, IncentiveSchedule, RebalanceFeasibleSet};
use crate::numeric;
use crate::profit::ProfitSpec;

pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Hysteresis band for [`reward_controller`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// Multiplicative reward boost applied below the band.
    pub boost: f64,
    pub r_max: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Domain(format!("controller band needs 0 < lo <= hi, got ({lo}, {hi})")));
        }
        Ok(Band { lo, hi, boost: 0.1, r_max: f64::MAX })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub p: f64,
    pub band: Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: ProfitSpec,
    pub controller: Option<Controller>,
    pub max_sweeps: usize,
}

impl SimConfig {
    pub fn new(spec: ProfitSpec) -> Self {
        SimConfig { spec, controller: None, max_sweeps: DEFAULT_MAX_SWEEPS }
    }
}

/// A scripted adversary: an optional initial loss, then one attack per round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub seed_loss: Vec<usize>,
    pub attacks: Vec<Attack>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub operator: usize,
    pub service: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardChange {
    pub service: usize,
    pub reward_before: f64,
    pub reward_after: f64,
    pub discount_before: f64,
    pub discount_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub service: usize,
    pub theta_min: f64,
    pub theta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub attack: Attack,
    pub verdict: Verdict,
    pub executed: bool,
    pub slashed_stake: f64,
    pub joins: Vec<Membership>,
    pub leaves: Vec<Membership>,
    pub sweeps: usize,
    pub reward_changes: Vec<RewardChange>,
    pub overlap_before: Vec<OverlapEntry>,
    pub overlap_after: Vec<OverlapEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub round: usize,
    pub graph: RestakingGraph,
    pub schedule: IncentiveSchedule,
    /// Original id of each live service, by current index.
    pub service_ids: Vec<usize>,
    pub operator_ids: Vec<usize>,
    pub initial_stake: f64,
    pub seed_loss: Vec<usize>,
    /// Operators slashed by executed attacks, in order.
    pub slashed: Vec<usize>,
    pub trace: Vec<RoundLog>,
}

impl GameState {
    pub fn new(graph: RestakingGraph, schedule: IncentiveSchedule) -> Result<Self> {
        schedule.validate(graph.num_services())?;
        Ok(GameState {
            round: 0,
            service_ids: (0..graph.num_services()).collect(),
            operator_ids: (0..graph.num_operators()).collect(),
            initial_stake: graph.total_stake(),
            graph,
            schedule,
            seed_loss: Vec::new(),
            slashed: Vec::new(),
            trace: Vec::new(),
        })
    }

    fn local_service(&self, id: usize) -> Result<usize> {
        self.service_ids.iter().position(|&x| x == id).ok_or(Error::service(id))
    }

    fn local_operator(&self, id: usize) -> Result<usize> {
        self.operator_ids.iter().position(|&x| x == id).ok_or(Error::operator(id))
    }

    fn remove(&mut self, services: &[usize], operators: &[usize]) -> Result<()> {
        let (graph, remap) = self.graph.remove_attack(services, operators)?;
        let keep_s = remap.service_origins();
        let keep_v = remap.operator_origins();
        self.schedule = self.schedule.restrict(&keep_s);
        self.service_ids = keep_s.iter().map(|&s| self.service_ids[s]).collect();
        self.operator_ids = keep_v.iter().map(|&v| self.operator_ids[v]).collect();
        self.graph = graph;
        Ok(())
    }

    /// Removes operators without an attack or a rebalance.
    pub fn apply_seed_loss(&mut self, operators: &[usize]) -> Result<()> {
        let local = operators.iter().map(|&v| self.local_operator(v)).collect::<Result<Vec<_>>>()?;
        self.remove(&[], &local)?;
        self.seed_loss.extend_from_slice(operators);
        Ok(())
    }

    pub fn live_stake(&self) -> f64 {
        self.graph.total_stake()
    }

    /// Fraction of the initial stake lost to seed loss and executed attacks.
    pub fn lost_fraction(&self) -> f64 {
        1.0 - self.live_stake() / self.initial_stake
    }

    pub fn executed_attacks(&self) -> usize {
        self.trace.iter().filter(|r| r.executed).count()
    }

    /// `∂s` of a live service, in original operator ids.
    pub fn boundary(&self, service: usize) -> Result<Vec<usize>> {
        let s = self.local_service(service)?;
        let mut out: Vec<usize> = self.graph.service_neighborhood(s).iter().map(|&v| self.operator_ids[v]).collect();
        out.sort_unstable();
        Ok(out)
    }

    fn overlaps(&self) -> Vec<OverlapEntry> {
        if self.graph.num_services() < 2 {
            return Vec::new();
        }
        (0..self.graph.num_services())
            .map(|s| {
                let b = self.graph.overlap_bounds(s).expect("two services present");
                OverlapEntry { service: self.service_ids[s], theta_min: b.theta_min, theta_max: b.theta_max }
            })
            .collect()
    }
}

/// The greedy boundary update of one operator: join every service where
/// joining is profitable with impact, leave every service paying less than
/// its cost. Services are visited in id order against the pool as it
/// changes. Returns the new `∂v`.
pub fn strategic_update(graph: &RestakingGraph, schedule: &IncentiveSchedule, operator: usize) -> Result<Vec<usize>> {
    Ok(update_operator(graph, schedule, operator)?.0.operator_neighborhood(operator).to_vec())
}

fn update_operator(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    v: usize,
) -> Result<(RestakingGraph, Vec<usize>, Vec<usize>)> {
    graph.check_operator(v)?;
    let mut g = graph.clone();
    let (mut joined, mut left) = (Vec::new(), Vec::new());
    for s in 0..g.num_services() {
        let mut boundary = g.operator_neighborhood(v).to_vec();
        if g.has_edge(v, s) {
            let rho = incentive::pro_rata_reward(&g, schedule, s, v)?;
            if numeric::lt(rho, schedule.cost(s)) {
                boundary.retain(|&t| t != s);
                g = g.with_boundary(v, &boundary)?;
                left.push(s);
            }
        } else if incentive::profitable_with_impact(&g, schedule, v, s)? {
            boundary.push(s);
            g = g.with_boundary(v, &boundary)?;
            joined.push(s);
        }
    }
    Ok((g, joined, left))
}

/// Sweeps every operator (descending stake, ties by id) until a full sweep
/// changes nothing.
pub fn rebalance(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    max_sweeps: usize,
) -> Result<(RestakingGraph, Vec<Membership>, Vec<Membership>, usize)> {
    let mut order: Vec<usize> = (0..graph.num_operators()).collect();
    order.sort_by(|&a, &b| graph.sigma(b).total_cmp(&graph.sigma(a)).then(a.cmp(&b)));
    let mut g = graph.clone();
    let (mut joins, mut leaves) = (Vec::new(), Vec::new());
    for sweep in 1..=max_sweeps {
        let mut changed = false;
        for &v in &order {
            let (next, joined, left) = update_operator(&g, schedule, v)?;
            if !joined.is_empty() || !left.is_empty() {
                changed = true;
                joins.extend(joined.into_iter().map(|service| Membership { operator: v, service }));
                leaves.extend(left.into_iter().map(|service| Membership { operator: v, service }));
                g = next;
            }
        }
        if !changed {
            return Ok((g, joins, leaves, sweep));
        }
    }
    Err(Error::Convergence(format!(
        "rebalancing did not reach a fixed point within {max_sweeps} sweeps ({} joins, {} leaves so far)",
        joins.len(),
        leaves.len()
    )))
}

/// Plays one round: controller update, the attack if it is valid, then
/// rebalancing to a fixed point.
pub fn play_round(state: &GameState, attack: &Attack, config: &SimConfig) -> Result<(GameState, RoundLog)> {
    let mut next = state.clone();
    next.round += 1;

    let mut reward_changes = Vec::new();
    if let Some(ctrl) = config.controller {
        let updated = reward_controller(&next.graph, &next.schedule, ctrl.p, ctrl.band)?;
        for s in 0..updated.rewards.len() {
            let (rb, ra) = (next.schedule.reward(s), updated.reward(s));
            let (db, da) = (next.schedule.discount(s), updated.discount(s));
            if rb != ra || db != da {
                reward_changes.push(RewardChange {
                    service: next.service_ids[s],
                    reward_before: rb,
                    reward_after: ra,
                    discount_before: db,
                    discount_after: da,
                });
            }
        }
        next.schedule = updated;
    }

    let overlap_before = next.overlaps();
    let local = Attack {
        services: attack.services.iter().map(|&s| next.local_service(s)).collect::<Result<_>>()?,
        operators: attack.operators.iter().map(|&v| next.local_operator(v)).collect::<Result<_>>()?,
    };
    let verdict = match attack::check_attack(&next.graph, &config.spec, &local)? {
        Verdict::Infeasible { service, colluding, required } => {
            Verdict::Infeasible { service: next.service_ids[service], colluding, required }
        }
        v => v,
    };
    let executed = verdict.is_valid();
    let mut slashed_stake = 0.0;
    if executed {
        slashed_stake = next.graph.stake_of(&local.operators)?;
        next.remove(&local.services, &local.operators)?;
        next.slashed.extend_from_slice(&attack.operators);
    }

    let (graph, joins, leaves, sweeps) = rebalance(&next.graph, &next.schedule, config.max_sweeps)?;
    next.graph = graph;
    let to_orig = |m: Membership| Membership {
        operator: next.operator_ids[m.operator],
        service: next.service_ids[m.service],
    };
    let joins = joins.into_iter().map(to_orig).collect();
    let leaves = leaves.into_iter().map(to_orig).collect();
    let log = RoundLog {
        round: next.round,
        attack: attack.clone(),
        verdict,
        executed,
        slashed_stake,
        joins,
        leaves,
        sweeps,
        reward_changes,
        overlap_before,
        overlap_after: next.overlaps(),
    };
    next.trace.push(log.clone());
    Ok((next, log))
}

/// Runs a whole script from `graph` and `schedule`.
pub fn simulate(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    script: &Script,
    config: &SimConfig,
) -> Result<GameState> {
    let mut state = GameState::new(graph.clone(), schedule.clone())?;
    state.apply_seed_loss(&script.seed_loss)?;
    for attack in &script.attacks {
        state = play_round(&state, attack, config)?.0;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltingReport {
    /// Attack 1 is profitable.
    pub attack1_profitable: bool,
    /// Attack 1 is feasible.
    pub attack1_feasible: bool,
    /// Attack 2 is profitable.
    pub attack2_profitable: bool,
    /// Attack 2 is feasible on `G ↘ B₁` without rebalancing.
    pub attack2_feasible_without_rebalance: bool,
    /// Attack 2 is infeasible once each `s ∈ A₂` gains `D_s`.
    pub attack2_infeasible_with_rebalance: bool,
    pub rebalance_sets: Vec<RebalanceFeasibleSet>,
}

impl HaltingReport {
    pub fn all(&self) -> bool {
        self.attack1_profitable
            && self.attack1_feasible
            && self.attack2_profitable
            && self.attack2_feasible_without_rebalance
            && self.attack2_infeasible_with_rebalance
    }
}

/// Evaluates the five halting conditions for two disjoint attacks on `g0`.
pub fn halting_report(
    g0: &RestakingGraph,
    schedule: &IncentiveSchedule,
    spec: &ProfitSpec,
    attack1: &Attack,
    attack2: &Attack,
) -> Result<HaltingReport> {
    attack::AttackSequence::new(vec![attack1.clone(), attack2.clone()])?;
    schedule.validate(g0.num_services())?;
    for a in [attack1, attack2] {
        for &s in &a.services {
            g0.check_service(s)?;
        }
        for &v in &a.operators {
            g0.check_operator(v)?;
        }
    }
    let b1 = &attack1.operators;
    let b2 = &attack2.operators;
    let in_b1 = |v: &usize| b1.binary_search(v).is_ok();
    let in_b2 = |v: &usize| b2.binary_search(v).is_ok();

    let attack1_profitable = numeric::ge(spec.profit(g0, &attack1.services)?, g0.stake_of(b1)?);
    let attack1_feasible = attack1.services.iter().all(|&s| {
        let pool = g0.service_stake(s);
        let colluding: f64 = g0.service_neighborhood(s).iter().filter(|v| in_b1(v)).map(|&v| g0.sigma(v)).sum();
        numeric::ge(colluding, g0.alpha(s) * pool)
    });
    let attack2_profitable = numeric::ge(spec.profit(g0, &attack2.services)?, g0.stake_of(b2)?);

    let mut feasible_without = true;
    let mut infeasible_with = true;
    let mut sets = Vec::new();
    for &s in &attack2.services {
        let surviving: Vec<usize> = g0.service_neighborhood(s).iter().copied().filter(|v| !in_b1(v)).collect();
        let pool: f64 = surviving.iter().map(|&v| g0.sigma(v)).sum();
        let hit: f64 = surviving.iter().filter(|v| in_b2(v)).map(|&v| g0.sigma(v)).sum();
        feasible_without &= numeric::ge(hit, g0.alpha(s) * pool);

        let d = incentive::max_rebalance_set(g0, schedule, s, b1)?;
        let d_hit: f64 = d.members.iter().filter(|v| in_b2(v)).map(|&v| g0.sigma(v)).sum();
        infeasible_with &= numeric::lt(hit + d_hit, g0.alpha(s) * (pool + d.stake));
        sets.push(d);
    }
    Ok(HaltingReport {
        attack1_profitable,
        attack1_feasible,
        attack2_profitable,
        attack2_feasible_without_rebalance: feasible_without,
        attack2_infeasible_with_rebalance: infeasible_with,
        rebalance_sets: sets,
    })
}

/// Overlap-targeting reward update. Above the band the service discounts
/// operators shared with `τ(s)`; below it the discount is lifted and the
/// reward boosted, up to `r_max`. The discount side is checked first.
pub fn reward_controller(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    p: f64,
    band: Band,
) -> Result<IncentiveSchedule> {
    schedule.validate(graph.num_services())?;
    let mut out = schedule.clone();
    let n = graph.num_services();
    let (Some(smin), Some(smax)) = (graph.min_stake(), graph.max_stake()) else {
        return Ok(out);
    };
    if n < 2 {
        return Ok(out);
    }
    let scale = (n as f64).powf(1.0 / p);
    for s in 0..n {
        let b = graph.overlap_bounds(s)?;
        if b.theta_max > band.hi * smax * scale {
            out.discounts[s] = incentive::min_discount(n, p, out.rewards[s]);
        } else if b.theta_min < band.lo * smin * scale {
            out.discounts[s] = 0.0;
            out.rewards[s] = (out.rewards[s] * (1.0 + band.boost)).min(band.r_max);
        }
    }
    Ok(out)
}
