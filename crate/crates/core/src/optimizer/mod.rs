//! Sequential profit, greedy attack sequences and minimal halting rewards.
//!
//! The reward for a service `s` attacked in the second step of a cascade is
//! the smallest `r_s` for which the operators that would rebalance into `s`
//! after the first step make the second step infeasible. The discrete
//! problem over rebalancing sets is relaxed to a concave program over a
//! scaled simplex, which is solved by projected gradient ascent inside a
//! doubling-and-bisection search on `r_s`.

pub mod pga;

use serde::{Deserialize, Serialize};

use crate::attack::{Attack, AttackSequence};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::RestakingGraph;
use crate::incentive::{self, IncentiveSchedule, MAX_EXACT_REBALANCE};
use crate::mask::{self, Engine};
use crate::numeric;
use crate::profit::ProfitSpec;

/// Longest horizon the greedy search accepts.
pub const MAX_GREEDY_HORIZON: usize = 6;
/// Doubling stops here and the instance is declared infeasible.
pub const R_MAX: f64 = 1_152_921_504_606_846_976.0; // 2^60
pub const BISECTION_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct SequentialProfitQuery<'g> {
    pub graph: &'g RestakingGraph,
    pub spec: ProfitSpec,
    pub horizon: usize,
}

impl<'g> SequentialProfitQuery<'g> {
    pub fn new(graph: &'g RestakingGraph, spec: ProfitSpec, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain("the horizon T must be at least 1".into()));
        }
        Ok(SequentialProfitQuery { graph, spec, horizon })
    }

    /// `Σ_t f(π, A_t) − σ_{B_t}` for a valid cascade of at most `T` steps.
    pub fn profit(&self, sequence: &AttackSequence) -> Result<f64> {
        if sequence.len() > self.horizon {
            return Err(Error::Domain(format!(
                "sequence has {} steps, more than the horizon {}",
                sequence.len(),
                self.horizon
            )));
        }
        let verdicts = sequence.verdicts(self.graph, &self.spec, &[])?;
        if let Some((t, v)) = verdicts.iter().enumerate().find(|(_, v)| !v.is_valid()) {
            return Err(Error::Domain(format!("step {t} is not a valid attack ({} fails)", v.condition())));
        }
        sequence
            .steps
            .iter()
            .map(|st| Ok(self.spec.profit(self.graph, &st.services)? - self.graph.stake_of(&st.operators)?))
            .sum()
    }

    /// Greedy sequential maximisation: each step takes the valid attack
    /// with the largest marginal profit on the current graph.
    pub fn greedy(&self) -> Result<AttackSequence> {
        if self.horizon > MAX_GREEDY_HORIZON {
            return Err(Error::Resource(format!(
                "greedy search supports horizons up to {MAX_GREEDY_HORIZON}, got {}",
                self.horizon
            )));
        }
        let engine = Engine::new(self.graph, &self.spec)?;
        let (mut live_s, mut live_v) = (mask::full(engine.ns), mask::full(engine.nv));
        let mut steps = Vec::new();
        while steps.len() < self.horizon {
            let mut best: Option<(f64, mask::Mask, mask::Mask)> = None;
            for a in mask::submasks(live_s, usize::MAX) {
                let Some(b) = engine.cheapest_feasible(a, live_v) else { continue };
                let gain = engine.profit(a) - engine.stake(b);
                if best.is_none_or(|(g, _, _)| numeric::gt(gain, g)) {
                    best = Some((gain, a, b));
                }
            }
            match best {
                Some((gain, a, b)) if numeric::gt(gain, 0.0) => {
                    steps.push(Attack::from_masks(a, b));
                    live_s &= !a;
                    live_v &= !b;
                }
                _ => break,
            }
        }
        Ok(AttackSequence { steps })
    }
}

pub fn sequential_profit(query: &SequentialProfitQuery<'_>, sequence: &AttackSequence) -> Result<f64> {
    query.profit(sequence)
}

pub fn greedy_sequence(query: &SequentialProfitQuery<'_>) -> Result<AttackSequence> {
    query.greedy()
}

/// `α(p) = κ_π S^(−1/p)` and `E(p) = 1 − e^(−α(p))`.
pub fn alpha_and_error(graph: &RestakingGraph, p: f64) -> Result<(f64, f64)> {
    if graph.min_profit().is_some_and(|m| m <= 0.0) {
        return Err(Error::Domain("alpha(p) needs every pi > 0".into()));
    }
    let kappa = graph.stake_profit_ratio()?.kappa_pi;
    let alpha = kappa * (graph.num_services() as f64).powf(-1.0 / p);
    Ok((alpha, 1.0 - (-alpha).exp()))
}

/// The data fixing one service's halting problem: service `s ∈ A₂` after
/// attack 1 slashed `B₁`, facing attack 2's coalition `B₂`.
#[derive(Debug, Clone)]
pub struct HaltingProblem<'g> {
    pub graph: &'g RestakingGraph,
    pub service: usize,
    pub cost: f64,
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
    pub a2: Vec<usize>,
    pool: f64,
    hit: f64,
    /// Operators that may carry relaxed mass: outside `B₁` and `∂s`.
    free: Vec<usize>,
    /// Slack gained per unit of mass on each free operator.
    weight: Vec<f64>,
}

/// One probe of the reward search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub reward: f64,
    pub value: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSearch {
    pub service: usize,
    pub initial: f64,
    pub reward: f64,
    pub probes: Vec<Probe>,
}

struct LogSlack<'a> {
    base: f64,
    weight: &'a [f64],
}

impl pga::Concave for LogSlack<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let slack = self.base + x.iter().zip(self.weight).map(|(a, b)| a * b).sum::<f64>();
        if slack > 0.0 {
            slack.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let slack = self.base + x.iter().zip(self.weight).map(|(a, b)| a * b).sum::<f64>();
        for (o, w) in out.iter_mut().zip(self.weight) {
            *o = w / slack;
        }
    }
}

impl<'g> HaltingProblem<'g> {
    pub fn new(
        graph: &'g RestakingGraph,
        service: usize,
        cost: f64,
        b1: &[usize],
        b2: &[usize],
        a2: &[usize],
    ) -> Result<Self> {
        graph.check_service(service)?;
        for &v in b1.iter().chain(b2) {
            graph.check_operator(v)?;
        }
        for &s in a2 {
            graph.check_service(s)?;
        }
        if !a2.contains(&service) {
            return Err(Error::Domain(format!("service {service} is not attacked in the second step")));
        }
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::Domain("cost must be finite and >= 0".into()));
        }
        let alpha = graph.alpha(service);
        let surviving: Vec<usize> =
            graph.service_neighborhood(service).iter().copied().filter(|v| !b1.contains(v)).collect();
        let pool = surviving.iter().map(|&v| graph.sigma(v)).sum();
        let hit = surviving.iter().filter(|v| b2.contains(v)).map(|&v| graph.sigma(v)).sum();
        let free: Vec<usize> = (0..graph.num_operators())
            .filter(|v| !b1.contains(v) && !graph.has_edge(*v, service))
            .collect();
        let weight = free.iter().map(|v| alpha - if b2.contains(v) { 1.0 } else { 0.0 }).collect();
        Ok(HaltingProblem {
            graph,
            service,
            cost,
            b1: b1.to_vec(),
            b2: b2.to_vec(),
            a2: a2.to_vec(),
            pool,
            hit,
            free,
            weight,
        })
    }

    /// `σ_{∂s−B₁}`.
    pub fn pool(&self) -> f64 {
        self.pool
    }

    /// `α_s σ_{∂s−B₁} − σ_{(∂s−B₁)∩B₂}`: the slack with no rebalancing.
    pub fn base_slack(&self) -> f64 {
        self.graph.alpha(self.service) * self.pool - self.hit
    }

    /// Starting reward `σ_{∂s−B₁} / max σ + c_s`.
    pub fn initial_reward(&self) -> f64 {
        self.pool / self.graph.max_stake().unwrap_or(1.0) + self.cost
    }

    /// Simplex radius `(r − c) k / c − σ_{∂s−B₁}`; infinite when `c = 0`.
    pub fn radius(&self, reward: f64, k: f64) -> f64 {
        if self.cost == 0.0 {
            f64::INFINITY
        } else {
            (reward - self.cost) * k / self.cost - self.pool
        }
    }

    /// `f̂(r, k)`: the relaxed objective, `-inf` when the simplex is empty
    /// or the slack cannot be made positive.
    pub fn relaxed_objective(&self, reward: f64, k: f64) -> Result<f64> {
        Ok(self.relaxed_solution(reward, k)?.map_or(f64::NEG_INFINITY, |s| s.value))
    }

    pub fn relaxed_solution(&self, reward: f64, k: f64) -> Result<Option<pga::Solution>> {
        if !(k > 0.0) {
            return Err(Error::Domain("k must be > 0".into()));
        }
        if reward <= self.cost {
            return Ok(None);
        }
        let radius = self.radius(reward, k);
        if radius < -numeric::tol(radius, self.pool) {
            return Ok(None);
        }
        let radius = radius.max(0.0);
        let base = self.base_slack();
        let n = self.free.len();
        let (best_i, best_w) = self
            .weight
            .iter()
            .enumerate()
            .fold((None, 0.0), |(bi, bw), (i, &w)| if w > bw { (Some(i), w) } else { (bi, bw) });
        if radius.is_infinite() {
            return Ok(if best_i.is_some() {
                Some(pga::Solution { x: vec![f64::INFINITY; 0], value: f64::INFINITY, iterations: 0 })
            } else if base > 0.0 {
                Some(pga::Solution { x: vec![0.0; n], value: base.ln(), iterations: 0 })
            } else {
                None
            });
        }
        // Warm start at the best vertex of the simplex.
        let mut start = vec![0.0; n];
        if let Some(i) = best_i {
            start[i] = radius;
        }
        if base + radius * best_w <= 0.0 {
            return Ok(None);
        }
        let objective = LogSlack { base, weight: &self.weight };
        pga::maximize(&objective, start, radius).map(Some)
    }

    /// `max_k f̂(r, k)` over the distinct operator stakes.
    pub fn best_relaxed(&self, reward: f64) -> Result<f64> {
        let mut ks: Vec<f64> = self.graph.operators().iter().map(|v| v.sigma).collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        let mut best = f64::NEG_INFINITY;
        for k in ks {
            best = best.max(self.relaxed_objective(reward, k)?);
        }
        Ok(best)
    }

    /// The exact objective `f(r)`: the best log-slack over rebalancing sets
    /// in `𝒟_s(B₁, r, c)`, including the empty set.
    pub fn discrete_objective(&self, reward: f64) -> Result<f64> {
        let schedule = self.schedule(reward);
        let elig = incentive::rebalance_candidates(self.graph, &schedule, self.service, &self.b1)?;
        if elig.len() > MAX_EXACT_REBALANCE {
            return Err(Error::Resource(format!(
                "exact objective enumerates subsets of {} candidates (limit {MAX_EXACT_REBALANCE})",
                elig.len()
            )));
        }
        let alpha = self.graph.alpha(self.service);
        let c = self.cost;
        let mut best = log_or_neg_inf(self.base_slack());
        for m in 1u64..(1u64 << elig.len()) {
            let members: Vec<usize> = mask::ids(m).into_iter().map(|i| elig[i]).collect();
            let sig: Vec<f64> = members.iter().map(|&v| self.graph.sigma(v)).collect();
            if !incentive::is_rebalance_feasible(&sig, self.pool, reward, c) {
                continue;
            }
            let total: f64 = sig.iter().sum();
            let hit: f64 = members.iter().filter(|v| self.b2.contains(v)).map(|&v| self.graph.sigma(v)).sum();
            best = best.max(log_or_neg_inf(alpha * (self.pool + total) - self.hit - hit));
        }
        Ok(best)
    }

    fn schedule(&self, reward: f64) -> IncentiveSchedule {
        let n = self.graph.num_services();
        let mut schedule = IncentiveSchedule::zeros(n);
        schedule.rewards[self.service] = reward;
        schedule.costs[self.service] = self.cost;
        schedule
    }

    /// Smallest `r_s` with `max_k f̂(r_s, k) > 0`, found by doubling from
    /// the initial reward and then bisecting to relative width 1e-6.
    pub fn minimal_reward(&self) -> Result<RewardSearch> {
        let initial = self.initial_reward();
        let mut probes = Vec::new();
        let probe = |r: f64, probes: &mut Vec<Probe>| -> Result<bool> {
            let value = self.best_relaxed(r)?;
            let feasible = value > 0.0;
            probes.push(Probe { reward: r, value, feasible });
            Ok(feasible)
        };
        if probe(initial, &mut probes)? {
            return Ok(RewardSearch { service: self.service, initial, reward: initial, probes });
        }
        let mut lo = initial;
        let mut hi = if initial > 0.0 { 2.0 * initial } else { 1.0 };
        while !probe(hi, &mut probes)? {
            lo = hi;
            hi *= 2.0;
            if hi > R_MAX {
                return Err(Error::Infeasible(format!(
                    "no reward up to 2^60 halts the second attack on service {}",
                    self.service
                )));
            }
        }
        while hi - lo > 0.5 * BISECTION_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if probe(mid, &mut probes)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(RewardSearch { service: self.service, initial, reward: hi, probes })
    }
}

fn log_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `f̂(r_s, k)` for service `s`.
#[allow(clippy::too_many_arguments)]
pub fn relaxed_objective(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    s: usize,
    b1: &[usize],
    b2: &[usize],
    a2: &[usize],
    reward: f64,
    k: f64,
) -> Result<f64> {
    HaltingProblem::new(graph, s, schedule.cost(s), b1, b2, a2)?.relaxed_objective(reward, k)
}

pub fn minimal_reward(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    s: usize,
    b1: &[usize],
    b2: &[usize],
    a2: &[usize],
) -> Result<RewardSearch> {
    HaltingProblem::new(graph, s, schedule.cost(s), b1, b2, a2)?.minimal_reward()
}

/// Sampled `max_k f̂(r, k) − f(r)` for one service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub service: usize,
    pub samples: usize,
    /// Largest finite gap seen, if any sample had both sides finite.
    pub max_gap: Option<f64>,
    /// Reward at which the relaxed problem first turns feasible while the
    /// exact one is not yet.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSolution {
    pub rewards: Vec<f64>,
    /// Rewards before the `1/E(p)` inflation.
    pub base_rewards: Vec<f64>,
    pub greedy_sequence: AttackSequence,
    pub greedy_profit: f64,
    pub alpha_p: f64,
    pub approx_error_e: f64,
    pub k_stake: f64,
    pub already_safe: bool,
    pub bisection_traces: Vec<RewardSearch>,
    pub integrality_gap: Vec<GapEstimate>,
}

const GAP_SAMPLES: usize = 16;

/// Greedy attack sequence, minimal rewards for the services of
/// the second attack, then inflation by `1/E(p)`. Services outside `Â₂`
/// keep the initial reward.
pub fn compute_optimal_rewards(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    horizon: usize,
    p: f64,
) -> Result<RewardSolution> {
    compute_optimal_rewards_with(graph, schedule, horizon, p, Execution::Auto)
}

pub fn compute_optimal_rewards_with(
    graph: &RestakingGraph,
    schedule: &IncentiveSchedule,
    horizon: usize,
    p: f64,
    exec: Execution,
) -> Result<RewardSolution> {
    if horizon < 2 {
        return Err(Error::Domain("the horizon T must be at least 2".into()));
    }
    schedule.validate(graph.num_services())?;
    let spec = ProfitSpec::pnorm(p)?;
    let (alpha_p, approx_error_e) = alpha_and_error(graph, p)?;
    let k_stake = graph.stake_profit_ratio()?.k_stake;
    let query = SequentialProfitQuery::new(graph, spec, horizon)?;
    let greedy_sequence = query.greedy()?;
    let greedy_profit = query.profit(&greedy_sequence)?;

    let b1 = greedy_sequence.steps.first().map(|st| st.operators.clone()).unwrap_or_default();
    let services: Vec<usize> = (0..graph.num_services()).collect();
    let initial = |s: usize| {
        let pool: f64 = graph.service_neighborhood(s).iter().filter(|v| !b1.contains(v)).map(|&v| graph.sigma(v)).sum();
        pool / graph.max_stake().unwrap_or(1.0) + schedule.cost(s)
    };

    if greedy_sequence.len() < 2 {
        let rewards: Vec<f64> = services.iter().map(|&s| initial(s)).collect();
        return Ok(RewardSolution {
            base_rewards: rewards.clone(),
            rewards,
            greedy_sequence,
            greedy_profit,
            alpha_p,
            approx_error_e,
            k_stake,
            already_safe: true,
            bisection_traces: Vec::new(),
            integrality_gap: Vec::new(),
        });
    }

    let step2 = &greedy_sequence.steps[1];
    let (b2, a2) = (step2.operators.clone(), step2.services.clone());
    let per_service = exec.map(&services, |&s| -> Result<(f64, Option<RewardSearch>, Option<GapEstimate>)> {
        if !a2.contains(&s) {
            return Ok((initial(s), None, None));
        }
        let problem = HaltingProblem::new(graph, s, schedule.cost(s), &b1, &b2, &a2)?;
        let search = problem.minimal_reward()?;
        let gap = estimate_gap(&problem, search.initial, search.reward)?;
        Ok((search.reward, Some(search), gap))
    });
    let mut base_rewards = Vec::with_capacity(services.len());
    let mut bisection_traces = Vec::new();
    let mut integrality_gap = Vec::new();
    for item in per_service {
        let (r, trace, gap) = item?;
        base_rewards.push(r);
        bisection_traces.extend(trace);
        integrality_gap.extend(gap);
    }
    let rewards = base_rewards.iter().map(|r| r / approx_error_e).collect();
    Ok(RewardSolution {
        rewards,
        base_rewards,
        greedy_sequence,
        greedy_profit,
        alpha_p,
        approx_error_e,
        k_stake,
        already_safe: false,
        bisection_traces,
        integrality_gap,
    })
}

/// Samples the relaxation gap on `[initial, 4 · reward]`. Skipped when the
/// exact objective is too large to enumerate.
fn estimate_gap(problem: &HaltingProblem<'_>, initial: f64, reward: f64) -> Result<Option<GapEstimate>> {
    let hi = (4.0 * reward).max(initial + 1.0);
    let mut max_gap: Option<f64> = None;
    let mut exact_threshold = None;
    for i in 0..GAP_SAMPLES {
        let r = initial + (hi - initial) * i as f64 / (GAP_SAMPLES - 1) as f64;
        let exact = match problem.discrete_objective(r) {
            Ok(v) => v,
            Err(Error::Resource(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let relaxed = problem.best_relaxed(r)?;
        if exact_threshold.is_none() && exact > 0.0 {
            exact_threshold = Some(r);
        }
        if exact.is_finite() && relaxed.is_finite() {
            let g = relaxed - exact;
            max_gap = Some(max_gap.map_or(g, |m: f64| m.max(g)));
        }
    }
    let note = match exact_threshold {
        Some(r) => format!("exact objective first positive near reward {r}; relaxed threshold {reward}"),
        None => format!("exact objective not positive on the sampled range; relaxed threshold {reward}"),
    };
    Ok(Some(GapEstimate { service: problem.service, samples: GAP_SAMPLES, max_gap, note }))
}
