mod common;

use common::{config, ge, random_graph, rng, sample, subsets, uniform};
use proptest::prelude::*;
use rand::Rng;
use restake::incentive::{
    kappa, max_rebalance_set, min_discount, pro_rata_reward, profitable_with_impact, profitable_without_impact,
    tau_boundary,
};
use restake::io::scenario::{RandomParams, StakeDist};
use restake::{IncentiveSchedule, RestakingGraph};

fn schedule(r: &mut rand_chacha::ChaCha8Rng, n: usize, discounts: bool) -> IncentiveSchedule {
    let rewards = (0..n).map(|_| uniform(r, 0.5, 20.0)).collect();
    let costs = (0..n).map(|_| uniform(r, 0.05, 2.0)).collect();
    let deltas = (0..n).map(|_| if discounts { uniform(r, 0.0, 0.9) } else { 0.0 }).collect();
    IncentiveSchedule::new(rewards, costs, deltas).unwrap()
}

/// Largest-stake joining set by enumerating every subset of the eligible
/// operators, straight from the joining inequality.
fn brute_rebalance(g: &RestakingGraph, sch: &IncentiveSchedule, s: usize, removed: &[usize]) -> f64 {
    let (r, c) = (sch.reward(s), sch.cost(s));
    if r <= c {
        return 0.0;
    }
    let nbr = g.service_neighborhood(s);
    let upper = c * g.service_stake(s) / (r - c);
    let eligible: Vec<usize> = (0..g.num_operators())
        .filter(|v| !removed.contains(v) && !nbr.contains(v) && g.sigma(*v) <= upper * (1.0 + 1e-9))
        .collect();
    let pool: f64 = nbr.iter().filter(|v| !removed.contains(v)).map(|&v| g.sigma(v)).sum();
    subsets(&eligible)
        .into_iter()
        .filter(|d| {
            let sd: f64 = d.iter().map(|&v| g.sigma(v)).sum();
            d.iter().all(|&v| ge(g.sigma(v) * (r - c), c * (pool + sd)))
        })
        .map(|d| d.iter().map(|&v| g.sigma(v)).sum::<f64>())
        .fold(0.0, f64::max)
}

#[test]
fn joining_set_lower_bound() {
    let (mut checked, mut seed) = (0, 0u64);
    while checked < 200 {
        seed += 1;
        assert!(seed < 50_000, "generator too sparse: {checked} checks");
        let mut r = rng(seed);
        let p = uniform(&mut r, 1.2, 4.0);
        let mut params = RandomParams::new(seed, r.random_range(2..=5), r.random_range(5..=10));
        params.stakes = StakeDist::Uniform { lo: 0.5, hi: 3.0 };
        params.profits = StakeDist::Uniform { lo: 0.2, hi: 1.0 };
        params.edge_prob = 0.4;
        let g = params.graph().unwrap();
        let n = g.num_services();
        let k = g.stake_profit_ratio().unwrap().k_stake;
        let c = uniform(&mut r, 0.2, 2.0);
        let reward = c * (k * (n as f64).powf(1.0 / p) + 1.0) * uniform(&mut r, 1.0, 2.0);
        let sch = IncentiveSchedule::uniform(n, reward, c).unwrap();
        let s = r.random_range(0..n);
        let b = sample(&mut r, g.service_neighborhood(s), 0.5);
        let d = max_rebalance_set(&g, &sch, s, &b).unwrap();
        if d.members.is_empty() {
            continue;
        }
        checked += 1;
        let kap = kappa(d.members.len(), reward, c).expect("κ defined for a nonempty joining set");
        assert!(ge(d.stake, kap * d.pool), "seed {seed}: σ_D = {} < κσ = {}", d.stake, kap * d.pool);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn payout_conservation(seed in 0u64..1_000_000, s in 1usize..5, v in 1usize..9) {
        let g = random_graph(seed, s, v);
        let sch = schedule(&mut rng(seed), s, false);
        for t in 0..s {
            let paid: f64 = (0..v).map(|x| pro_rata_reward(&g, &sch, t, x).unwrap()).sum();
            prop_assert!((paid - sch.reward(t)).abs() <= 1e-9 * sch.reward(t));
        }
    }

    #[test]
    fn discounted_payout_never_exceeds_reward(seed in 0u64..1_000_000, s in 2usize..5, v in 1usize..9) {
        let g = random_graph(seed, s, v);
        let sch = schedule(&mut rng(seed), s, true);
        for t in 0..s {
            let tb = tau_boundary(&g, t).unwrap();
            let paid: f64 = (0..v).map(|x| pro_rata_reward(&g, &sch, t, x).unwrap()).sum();
            prop_assert!(paid <= sch.reward(t) * (1.0 + 1e-9));
            for &x in g.service_neighborhood(t) {
                let full = sch.reward(t) * g.sigma(x) / g.service_stake(t);
                let expect = if tb.contains(&x) { full * (1.0 - sch.discount(t)) } else { full };
                prop_assert!((pro_rata_reward(&g, &sch, t, x).unwrap() - expect).abs() <= 1e-12 * full.max(1.0));
            }
        }
    }

    #[test]
    fn joining_with_impact_implies_profitable_after(seed in 0u64..1_000_000, s in 2usize..5, v in 2usize..9, disc in any::<bool>()) {
        let g = random_graph(seed, s, v);
        let sch = schedule(&mut rng(seed ^ 0xabc), s, disc);
        for t in 0..s {
            for x in 0..v {
                if g.has_edge(x, t) || !profitable_with_impact(&g, &sch, x, t).unwrap() {
                    continue;
                }
                let mut joined: Vec<usize> = g.operator_neighborhood(x).to_vec();
                joined.push(t);
                let after = g.with_boundary(x, &joined).unwrap();
                prop_assert!(profitable_without_impact(&after, &sch, x, t).unwrap());
            }
        }
    }

    #[test]
    fn min_discount_monotone(s in 1usize..64, p in 1.01f64..10.0, a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (min_discount(s, p, lo), min_discount(s, p, hi));
        prop_assert!(x <= y && (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        prop_assert!(min_discount(s, f64::INFINITY, hi) <= 1.0);
    }

    #[test]
    fn rebalance_set_matches_brute_force(seed in 0u64..1_000_000, s in 1usize..4, v in 2usize..11) {
        let mut params = RandomParams::new(seed, s, v);
        params.stakes = StakeDist::Uniform { lo: 0.2, hi: 3.0 };
        params.edge_prob = 0.3;
        let g = params.graph().unwrap();
        let mut r = rng(seed);
        let sch = IncentiveSchedule::uniform(s, uniform(&mut r, 1.5, 30.0), uniform(&mut r, 0.1, 1.0)).unwrap();
        let t = r.random_range(0..s);
        let b = sample(&mut r, g.service_neighborhood(t), 0.5);
        let d = max_rebalance_set(&g, &sch, t, &b).unwrap();
        let best = brute_rebalance(&g, &sch, t, &b);
        prop_assert!(d.exact);
        prop_assert!((d.stake - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", d.stake, best);
        let (rw, c) = (sch.reward(t), sch.cost(t));
        for &x in &d.members {
            prop_assert!(!b.contains(&x) && !g.has_edge(x, t));
            prop_assert!(ge(g.sigma(x) * (rw - c), c * (d.pool + d.stake)));
            prop_assert!(g.sigma(x) * (rw - c) <= c * g.service_stake(t) * (1.0 + 1e-9));
        }
    }
}
