//! Named example graphs and the seeded random generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::Attack;
use crate::dynamics::Script;
use crate::error::{Error, Result};
use crate::graph::RestakingGraph;
use crate::incentive::IncentiveSchedule;
use crate::io::document::GraphDocument;
use crate::numeric;
use crate::profit::ProfitSpec;

/// Service ids of the two-row cascade graph.
pub const FIG2_TOP: usize = 0;
pub const FIG2_BOTTOM: usize = 1;
pub const FIG2_RED: [usize; 4] = [2, 3, 4, 5];
/// Reward and cost of the bottom service in the rebalancing variant.
pub const FIG3_REWARD: f64 = 6.5;
pub const FIG3_COST: f64 = 1.0;

/// Operator id of the `i`-th top-row operator.
pub const fn top(i: usize) -> usize {
    i
}

/// Operator id of the `i`-th bottom-row operator.
pub const fn bottom(i: usize) -> usize {
    6 + i
}

/// Two services fully shared by two operators of stake 1.1.
pub fn fig1(alpha: f64) -> Result<RestakingGraph> {
    RestakingGraph::from_parts(&[1.0, 1.0], &[alpha; 2], &[1.1, 1.1], [(0, 0), (1, 0), (0, 1), (1, 1)])
}

/// Two rows of six unit-stake operators. Each row is one service with
/// `π = 4`; four services with `π = 2` tile the rows in groups of three.
pub fn fig2() -> RestakingGraph {
    let mut edges = Vec::new();
    for i in 0..6 {
        edges.push((top(i), FIG2_TOP));
        edges.push((bottom(i), FIG2_BOTTOM));
    }
    let red = [
        vec![top(0), bottom(0), bottom(1)],
        vec![top(1), top(2), bottom(2)],
        vec![top(3), bottom(3), bottom(4)],
        vec![top(4), top(5), bottom(5)],
    ];
    for (k, ops) in red.iter().enumerate() {
        edges.extend(ops.iter().map(|&v| (v, FIG2_RED[k])));
    }
    RestakingGraph::from_parts(&[4.0, 4.0, 2.0, 2.0, 2.0, 2.0], &[1.0; 6], &[1.0; 12], edges)
        .expect("static graph is valid")
}

/// The four-step cascade after the first top-row operator is lost.
pub fn fig2_script() -> Script {
    let step = |a: &[usize], b: &[usize]| Attack::new(a.iter().copied(), b.iter().copied()).expect("nonempty");
    Script {
        seed_loss: vec![top(0)],
        attacks: vec![
            step(&[FIG2_RED[0]], &[bottom(0), bottom(1)]),
            step(&[FIG2_BOTTOM], &[bottom(2), bottom(3), bottom(4), bottom(5)]),
            step(&[FIG2_RED[2]], &[top(3)]),
            step(&[FIG2_TOP], &[top(1), top(2), top(4), top(5)]),
        ],
    }
}

/// `fig2` with a paying bottom service; every other service pays nothing.
pub fn fig3() -> (RestakingGraph, IncentiveSchedule) {
    (fig2(), fig3_schedule(FIG3_REWARD))
}

pub fn fig3_schedule(bottom_reward: f64) -> IncentiveSchedule {
    let mut schedule = IncentiveSchedule::zeros(6);
    schedule.rewards[FIG2_BOTTOM] = bottom_reward;
    schedule.costs[FIG2_BOTTOM] = FIG3_COST;
    schedule
}

/// Two services sharing one operator `v∩` of stake `Kσ`, each with a private
/// operator of stake `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppBParams {
    pub sigma: f64,
    pub k: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub alpha: f64,
}

impl Default for AppBParams {
    fn default() -> Self {
        AppBParams { sigma: 1.0, k: 1.5, pi1: 1.75, pi2: 1.75, alpha: 0.7 }
    }
}

impl AppBParams {
    /// Every displayed condition, by name.
    pub fn conditions(&self) -> Vec<(&'static str, bool)> {
        let (s, cap, a) = (self.sigma, self.k * self.sigma, self.alpha);
        let mut out = vec![("K >= 1", self.k >= 1.0)];
        for (pi, tag) in [(self.pi1, 1), (self.pi2, 2)] {
            let named = |one: &'static str, two: &'static str| if tag == 1 { one } else { two };
            out.extend([
                (named("pi_1 > sigma_1", "pi_2 > sigma_2"), pi > s),
                (
                    named("sigma_1 < alpha (sigma_1 + sigma_cap)", "sigma_2 < alpha (sigma_2 + sigma_cap)"),
                    s < a * (s + cap),
                ),
                (named("pi_1 > sigma_cap", "pi_2 > sigma_cap"), pi > cap),
                (
                    named("sigma_cap < alpha (sigma_1 + sigma_cap)", "sigma_cap < alpha (sigma_2 + sigma_cap)"),
                    cap < a * (s + cap),
                ),
                (named("pi_1 < sigma_1 + sigma_cap", "pi_2 < sigma_2 + sigma_cap"), pi < s + cap),
            ]);
        }
        out.push(("sigma_i + sigma_cap > alpha (sigma_i + sigma_cap)", a < 1.0));
        out.push(("pi_1 + pi_2 = sigma_V", numeric::approx_eq(self.pi1 + self.pi2, 2.0 * s + cap)));
        out
    }

    pub fn graph(&self) -> Result<RestakingGraph> {
        if let Some((name, _)) = self.conditions().into_iter().find(|c| !c.1) {
            return Err(Error::Domain(format!("overlap-appb parameters violate `{name}`")));
        }
        self.graph_unchecked()
    }

    /// The same topology without the parameter checks, for stake sweeps.
    pub fn graph_unchecked(&self) -> Result<RestakingGraph> {
        RestakingGraph::from_parts(
            &[self.pi1, self.pi2],
            &[self.alpha, self.alpha],
            &[self.sigma, self.k * self.sigma, self.sigma],
            [(0, 0), (1, 0), (1, 1), (2, 1)],
        )
    }
}

/// Two services with `π = 1.1`, each validated by its own unit-stake
/// operator, under max-norm profit.
pub fn union_appa() -> RestakingGraph {
    RestakingGraph::from_parts(&[1.1, 1.1], &[0.5, 0.5], &[1.0, 1.0], [(0, 0), (1, 1)]).expect("static graph is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StakeDist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Integers in `lo..=hi`.
    Integer { lo: u32, hi: u32 },
}

impl StakeDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            StakeDist::Constant { value } => value,
            StakeDist::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            StakeDist::Integer { lo, hi } => rng.random_range(lo..=hi.max(lo)) as f64,
        }
    }

    fn validate(&self, what: &str, allow_zero: bool) -> Result<()> {
        let (lo, hi) = match *self {
            StakeDist::Constant { value } => (value, value),
            StakeDist::Uniform { lo, hi } => (lo, hi),
            StakeDist::Integer { lo, hi } => (lo as f64, hi as f64),
        };
        let lo_ok = if allow_zero { lo >= 0.0 } else { lo > 0.0 };
        if !(lo_ok && lo <= hi && hi.is_finite()) {
            return Err(Error::Domain(format!("bad {what} distribution: [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub seed: u64,
    pub services: usize,
    pub operators: usize,
    pub edge_prob: f64,
    pub stakes: StakeDist,
    pub profits: StakeDist,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl RandomParams {
    pub fn new(seed: u64, services: usize, operators: usize) -> Self {
        RandomParams {
            seed,
            services,
            operators,
            edge_prob: 0.5,
            stakes: StakeDist::Integer { lo: 1, hi: 3 },
            profits: StakeDist::Uniform { lo: 0.5, hi: 4.0 },
            alpha_lo: 0.3,
            alpha_hi: 0.7,
        }
    }

    /// Seeded bipartite graph. Every service gets at least one operator.
    pub fn graph(&self) -> Result<RestakingGraph> {
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Domain("edge_prob must lie in [0, 1]".into()));
        }
        if !(0.0 <= self.alpha_lo && self.alpha_lo <= self.alpha_hi && self.alpha_hi <= 1.0) {
            return Err(Error::Domain("alpha range must satisfy 0 <= lo <= hi <= 1".into()));
        }
        self.stakes.validate("stake", false)?;
        self.profits.validate("profit", true)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sigma: Vec<f64> = (0..self.operators).map(|_| self.stakes.sample(&mut rng)).collect();
        let pi: Vec<f64> = (0..self.services).map(|_| self.profits.sample(&mut rng)).collect();
        let alpha: Vec<f64> = (0..self.services)
            .map(|_| {
                if self.alpha_hi > self.alpha_lo {
                    rng.random_range(self.alpha_lo..self.alpha_hi)
                } else {
                    self.alpha_lo
                }
            })
            .collect();
        let mut edges = Vec::new();
        for s in 0..self.services {
            let mut any = false;
            for v in 0..self.operators {
                if rng.random_bool(self.edge_prob) {
                    edges.push((v, s));
                    any = true;
                }
            }
            if !any && self.operators > 0 {
                edges.push((rng.random_range(0..self.operators), s));
            }
        }
        RestakingGraph::from_parts(&pi, &alpha, &sigma, edges)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Fig1 { alpha: f64 },
    Fig2,
    Fig3,
    OverlapAppB(AppBParams),
    UnionAppA,
    Random(RandomParams),
}

impl Scenario {
    pub const NAMES: [&'static str; 6] = ["fig1", "fig2", "fig3", "overlap-appb", "union-appa", "random"];

    /// Looks up a scenario by name with default parameters.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "fig1" => Scenario::Fig1 { alpha: 1.0 / 3.0 },
            "fig2" => Scenario::Fig2,
            "fig3" => Scenario::Fig3,
            "overlap-appb" => Scenario::OverlapAppB(AppBParams::default()),
            "union-appa" => Scenario::UnionAppA,
            "random" => Scenario::Random(RandomParams::new(0, 4, 6)),
            other => {
                return Err(Error::Domain(format!(
                    "unknown scenario `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn profit_spec(&self) -> ProfitSpec {
        match self {
            Scenario::UnionAppA => ProfitSpec::MaxNorm,
            _ => ProfitSpec::Linear,
        }
    }

    pub fn graph(&self) -> Result<RestakingGraph> {
        match self {
            Scenario::Fig1 { alpha } => fig1(*alpha),
            Scenario::Fig2 | Scenario::Fig3 => Ok(fig2()),
            Scenario::OverlapAppB(p) => p.graph(),
            Scenario::UnionAppA => Ok(union_appa()),
            Scenario::Random(p) => p.graph(),
        }
    }

    pub fn document(&self) -> Result<GraphDocument> {
        let graph = self.graph()?;
        let schedule = matches!(self, Scenario::Fig3).then(|| fig3().1);
        Ok(GraphDocument::from_graph(&graph, &self.profit_spec(), schedule.as_ref()))
    }
}
