mod common;

use common::{config, overlap_family, random_graph, rng, sample, uniform};
use proptest::prelude::*;
use rand::Rng;
use restake::attack::find_attacks;
use restake::dynamics::{
    play_round, rebalance, simulate, strategic_update, Band, Controller, GameState, Script, SimConfig,
};
use restake::incentive::min_discount;
use restake::{Attack, Error, IncentiveSchedule, ProfitSpec, RestakingGraph};

/// A random script of attacks drawn from the graph's valid attacks plus
/// arbitrary ones; later steps may reference removed ids, so they are
/// filtered to stay disjoint.
fn random_script(g: &RestakingGraph, spec: &ProfitSpec, seed: u64) -> Script {
    let mut r = rng(seed);
    let valid = find_attacks(g, spec, None, None).unwrap();
    let (mut used_s, mut used_v) = (Vec::new(), Vec::new());
    let mut attacks = Vec::new();
    for _ in 0..4 {
        let a = if !valid.is_empty() && r.random_bool(0.6) {
            valid[r.random_range(0..valid.len())].clone()
        } else {
            let s = sample(&mut r, &(0..g.num_services()).collect::<Vec<_>>(), 0.4);
            let v = sample(&mut r, &(0..g.num_operators()).collect::<Vec<_>>(), 0.4);
            match Attack::new(s, v) {
                Ok(a) => a,
                Err(_) => continue,
            }
        };
        if a.services.iter().any(|s| used_s.contains(s)) || a.operators.iter().any(|v| used_v.contains(v)) {
            continue;
        }
        used_s.extend(&a.services);
        used_v.extend(&a.operators);
        attacks.push(a);
    }
    Script { seed_loss: Vec::new(), attacks }
}

fn random_schedule(seed: u64, n: usize) -> IncentiveSchedule {
    let mut r = rng(seed ^ 0x5c4ed);
    let rewards = (0..n).map(|_| uniform(&mut r, 0.0, 12.0)).collect();
    let costs = (0..n).map(|_| uniform(&mut r, 0.1, 1.0)).collect();
    IncentiveSchedule::new(rewards, costs, vec![0.0; n]).unwrap()
}

fn run(g: &RestakingGraph, sch: &IncentiveSchedule, script: &Script, cfg: &SimConfig) -> Option<GameState> {
    match simulate(g, sch, script, cfg) {
        Ok(s) => Some(s),
        Err(Error::Convergence(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn controller_compounds_over_rounds() {
    // complete 2×2 graph, so rebalancing at zero cost changes nothing and
    // θ = 2 < 2·σ·√2 boosts every round
    let g = RestakingGraph::from_parts(&[1.0, 1.0], &[0.5; 2], &[1.0, 1.0], [(0, 0), (1, 0), (0, 1), (1, 1)])
        .unwrap();
    let sch = IncentiveSchedule::uniform(2, 4.0, 0.0).unwrap();
    let mut cfg = SimConfig::new(ProfitSpec::pnorm(2.0).unwrap());
    cfg.controller = Some(Controller { p: 2.0, band: Band::new(2.0, 2.0).unwrap() });
    let dud = Attack::new([0], [0, 1]).unwrap();
    let mut state = GameState::new(g.clone(), sch).unwrap();
    for _ in 0..3 {
        state = play_round(&state, &dud, &cfg).unwrap().0;
    }
    assert!((state.schedule.reward(0) - 4.0 * 1.1f64.powi(3)).abs() < 1e-12);
    assert_eq!(state.trace.iter().map(|r| r.reward_changes.len()).sum::<usize>(), 6);

    // above the band the discount jumps to the minimum discount
    cfg.controller = Some(Controller { p: 2.0, band: Band::new(0.1, 0.5).unwrap() });
    let state = GameState::new(g, IncentiveSchedule::uniform(2, 4.0, 0.0).unwrap()).unwrap();
    let (next, _) = play_round(&state, &dud, &cfg).unwrap();
    assert_eq!(next.schedule.discount(1), min_discount(2, 2.0, 4.0));
}

#[test]
fn monotone_repulsion_is_reported() {
    // Feasibility is not monotone in rewards, so this is measured, not assumed.
    let (mut pairs, mut exceptions) = (0, 0);
    for seed in 0..200 {
        let g = random_graph(seed, 3, 6);
        let spec = ProfitSpec::Linear;
        let Some(attack) = find_attacks(&g, &spec, None, None).unwrap().into_iter().next() else { continue };
        let lo = random_schedule(seed, 3);
        let bump: Vec<f64> = (0..3).map(|s| lo.reward(s) * uniform(&mut rng(seed + s as u64), 1.0, 3.0)).collect();
        let hi = IncentiveSchedule::new(bump, lo.costs.clone(), lo.discounts.clone()).unwrap();
        let cfg = SimConfig::new(spec);
        // an unaffordable first round lets both schedules rebalance before the attack
        let dud = Attack::new([0], 0..g.num_operators()).unwrap();
        let script = Script { seed_loss: Vec::new(), attacks: vec![dud, attack] };
        let (Some(a), Some(b)) = (run(&g, &lo, &script, &cfg), run(&g, &hi, &script, &cfg)) else { continue };
        if a.trace[0].executed || b.trace[0].executed {
            continue;
        }
        if !a.trace[1].executed {
            pairs += 1;
            if b.trace[1].executed {
                exceptions += 1;
            }
        }
    }
    eprintln!("monotone repulsion: {pairs} repelled at r, {exceptions} executed at a higher r'");
}

/// Seed loss, then an adversary that always plays the first valid attack on
/// the live graph, with rebalancing and the minimum discount in force.
#[test]
fn cascade_bounded_with_rebalancing() {
    let (mut runs, mut skipped, mut rounds) = (0, 0, 0);
    for seed in 0..150u64 {
        let Some((g, p, _)) = overlap_family(seed) else { continue };
        let mut r = rng(seed ^ 0x7e0);
        let n = g.num_services();
        let scale = (n as f64).powf(1.0 / p);
        let k = g.stake_profit_ratio().unwrap().k_stake;
        let reward = scale * uniform(&mut r, 1.5, 6.0);
        let cost = reward / ((k * scale + 1.0) * uniform(&mut r, 1.0, 2.0));
        let delta = min_discount(n, p, reward);
        let sch = IncentiveSchedule::new(vec![reward; n], vec![cost; n], vec![delta; n]).unwrap();
        let spec = ProfitSpec::pnorm(p).unwrap();
        let cfg = SimConfig::new(spec);
        let psi = [0.05, 0.1, 0.2][seed as usize % 3];
        let mut seed_loss = Vec::new();
        for v in sample(&mut r, &(0..g.num_operators()).collect::<Vec<_>>(), 0.3) {
            if g.stake_of(&seed_loss).unwrap() + g.sigma(v) <= psi * g.total_stake() {
                seed_loss.push(v);
            }
        }
        let mut state = GameState::new(g.clone(), sch).unwrap();
        state.apply_seed_loss(&seed_loss).unwrap();
        let mut failed = false;
        for _ in 0..n {
            let Some(local) = find_attacks(&state.graph, &spec, None, None).unwrap().into_iter().next() else { break };
            let attack = Attack::new(
                local.services.iter().map(|&s| state.service_ids[s]),
                local.operators.iter().map(|&v| state.operator_ids[v]),
            )
            .unwrap();
            match play_round(&state, &attack, &cfg) {
                Ok((next, _)) => state = next,
                Err(Error::Convergence(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("{e}"),
            }
            rounds += 1;
        }
        if failed {
            skipped += 1;
            continue;
        }
        runs += 1;
        let bound = psi + k * scale / (g.min_stake().unwrap() * n as f64) + 1e-9;
        assert!(state.lost_fraction() <= bound, "seed {seed}: R = {} > {bound}", state.lost_fraction());
    }
    eprintln!("cascade bound: {runs} runs, {rounds} rounds, {skipped} without a rebalance fixed point");
    assert!(runs >= 50);
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn replay_is_deterministic(seed in 0u64..1_000_000, s in 1usize..5, v in 2usize..8) {
        let g = random_graph(seed, s, v);
        let spec = ProfitSpec::Linear;
        let sch = random_schedule(seed, s);
        let script = random_script(&g, &spec, seed);
        let mut cfg = SimConfig::new(spec);
        if seed % 2 == 0 {
            cfg.controller = Some(Controller { p: 2.0, band: Band::new(0.5, 2.0).unwrap() });
        }
        let a = simulate(&g, &sch, &script, &cfg);
        let b = simulate(&g, &sch, &script, &cfg);
        match (a, b) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(&x, &y);
                prop_assert_eq!(serde_json::to_string(&x.trace).unwrap(), serde_json::to_string(&y.trace).unwrap());
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "one replay failed and the other did not"),
        }
    }

    #[test]
    fn stake_is_conserved(seed in 0u64..1_000_000, s in 1usize..5, v in 2usize..8) {
        let g = random_graph(seed, s, v);
        let spec = ProfitSpec::Linear;
        let sch = random_schedule(seed, s);
        let mut script = random_script(&g, &spec, seed);
        let free: Vec<usize> = (0..v).filter(|x| !script.attacks.iter().any(|a| a.operators.contains(x))).collect();
        script.seed_loss = sample(&mut rng(seed), &free, 0.2);
        let Some(end) = run(&g, &sch, &script, &SimConfig::new(spec)) else { return Ok(()) };
        let seeded = g.stake_of(&script.seed_loss).unwrap();
        let slashed: f64 = end.trace.iter().map(|r| r.slashed_stake).sum();
        prop_assert!((end.live_stake() - (g.total_stake() - seeded - slashed)).abs() <= 1e-9 * g.total_stake());
        let by_id = g.stake_of(&end.slashed).unwrap();
        prop_assert!((by_id - slashed).abs() <= 1e-9 * g.total_stake());
        for (i, &orig) in end.operator_ids.iter().enumerate() {
            prop_assert_eq!(end.graph.sigma(i), g.sigma(orig));
        }
    }

    #[test]
    fn rebalance_reaches_a_fixed_point(seed in 0u64..1_000_000, s in 1usize..5, v in 2usize..8) {
        let g = random_graph(seed, s, v);
        let sch = random_schedule(seed, s);
        let Ok((after, joins, leaves, _)) = rebalance(&g, &sch, 100) else { return Ok(()) };
        for x in 0..v {
            prop_assert_eq!(strategic_update(&after, &sch, x).unwrap(), after.operator_neighborhood(x).to_vec());
        }
        let edges = g.num_edges() + joins.len() - leaves.len();
        prop_assert_eq!(after.num_edges(), edges);
    }
}
