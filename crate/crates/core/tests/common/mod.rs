//! Independent brute-force oracles shared by the integration suites.
//!
//! Nothing here calls the library's search code: validity, cascades and
//! sequence optima are recomputed from the graph accessors alone.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restake::{ProfitSpec, RestakingGraph};

pub const REL: f64 = 1e-9;
pub const ABS: f64 = 1e-12;

pub fn ge(a: f64, b: f64) -> bool {
    a >= b - (REL * a.abs().max(b.abs())).max(ABS)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `f(π, A)` written out per variant.
pub fn profit(spec: &ProfitSpec, pis: &[f64]) -> f64 {
    if pis.is_empty() {
        return 0.0;
    }
    match *spec {
        ProfitSpec::Linear => pis.iter().sum(),
        ProfitSpec::PNorm { p } => pis.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p),
        ProfitSpec::MaxNorm => pis.iter().cloned().fold(0.0, f64::max),
        ProfitSpec::PowerScaled { c } => (pis.len() as f64).powf(-c) * pis.iter().sum::<f64>(),
    }
}

pub fn profit_of(g: &RestakingGraph, spec: &ProfitSpec, a: &[usize]) -> f64 {
    profit(spec, &a.iter().map(|&s| g.pi(s)).collect::<Vec<_>>())
}

/// All nonempty subsets of `items`, as sorted vectors.
pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (1u64..1 << items.len())
        .map(|m| (0..items.len()).filter(|i| m >> i & 1 == 1).map(|i| items[i]).collect())
        .collect()
}

pub fn stake(g: &RestakingGraph, ops: &[usize]) -> f64 {
    ops.iter().map(|&v| g.sigma(v)).sum()
}

/// Profitability and per-service feasibility, straight from their definitions.
pub fn valid(g: &RestakingGraph, spec: &ProfitSpec, a: &[usize], b: &[usize]) -> bool {
    if a.is_empty() || b.is_empty() || !ge(profit_of(g, spec, a), stake(g, b)) {
        return false;
    }
    a.iter().all(|&s| {
        let nbr = g.service_neighborhood(s);
        let hit: f64 = nbr.iter().filter(|v| b.contains(v)).map(|&v| g.sigma(v)).sum();
        ge(hit, g.alpha(s) * stake(g, nbr))
    })
}

pub fn all_valid(g: &RestakingGraph, spec: &ProfitSpec) -> Vec<(Vec<usize>, Vec<usize>)> {
    let s: Vec<usize> = (0..g.num_services()).collect();
    let v: Vec<usize> = (0..g.num_operators()).collect();
    let bs = subsets(&v);
    let mut out = Vec::new();
    for a in subsets(&s) {
        for b in &bs {
            if valid(g, spec, &a, b) {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

/// Largest stake removable by any cascade, no memoisation.
pub fn worst_loss(g: &RestakingGraph, spec: &ProfitSpec) -> f64 {
    let mut best = 0.0f64;
    for (a, b) in all_valid(g, spec) {
        let (next, _) = g.remove_attack(&a, &b).unwrap();
        best = best.max(stake(g, &b) + worst_loss(&next, spec));
    }
    best
}

/// `R_ψ` by enumerating every seed coalition and every cascade after it.
pub fn r_psi(g: &RestakingGraph, spec: &ProfitSpec, psi: f64) -> f64 {
    let total = g.total_stake();
    let v: Vec<usize> = (0..g.num_operators()).collect();
    let mut seeds = vec![Vec::new()];
    seeds.extend(subsets(&v));
    let mut best = 0.0f64;
    for d in seeds {
        if !ge(psi * total, stake(g, &d)) {
            continue;
        }
        let (after, _) = g.remove_attack(&[], &d).unwrap();
        best = best.max(psi + worst_loss(&after, spec) / total);
    }
    best.min(1.0)
}

/// Best sequential profit over every valid sequence of at most `t` steps.
pub fn best_sequence_profit(g: &RestakingGraph, spec: &ProfitSpec, t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    for (a, b) in all_valid(g, spec) {
        let gain = profit_of(g, spec, &a) - stake(g, &b);
        let (next, _) = g.remove_attack(&a, &b).unwrap();
        best = best.max(gain + best_sequence_profit(&next, spec, t - 1));
    }
    best
}

/// Uniform draw from `lo..hi`, or `lo` when the range is empty.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A random subset of `items` (each kept with probability `p`).
pub fn sample(rng: &mut ChaCha8Rng, items: &[usize], p: f64) -> Vec<usize> {
    items.iter().copied().filter(|_| rng.random_bool(p)).collect()
}

/// Fixed-seed proptest configuration; no failure files are written.
pub fn config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Default::default()
    }
}

pub fn random_graph(seed: u64, services: usize, operators: usize) -> RestakingGraph {
    restake::io::scenario::RandomParams::new(seed, services, operators).graph().unwrap()
}

/// Three services sharing `n` unit operators, each with one private operator
/// of stake `1 + δ`; built to meet the overlap, θ̄ and discount hypotheses of
/// the |A| bound. Returns the graph, `p` and the bound.
pub fn overlap_family(seed: u64) -> Option<(RestakingGraph, f64, f64)> {
    let mut r = rng(seed);
    let s = 3usize;
    let p = uniform(&mut r, 1.5, 6.0);
    let scale = (s as f64).powf(1.0 / p);
    let eps = 1.0 / (std::f64::consts::E * ((s - 1) as f64).powi(2));
    let delta = (1.0 - eps) / eps * uniform(&mut r, 1.0, 1.5);
    // |∂s ∩ ∂t| = (1+δ)KS^(1/p) and θ̄ = σ_max·KS^(1/p) hold with equality
    let shared = r.random_range(8..=17) as f64;
    let k = shared / ((1.0 + delta) * scale);
    let big = 1.0 + delta;
    let n = shared as usize;
    let mut sigma = vec![1.0; n];
    sigma.extend(std::iter::repeat_n(big, s));
    let mut pi: Vec<f64> = (0..s).map(|_| uniform(&mut r, 0.5 * k, k)).collect();
    pi[r.random_range(0..s)] = k;
    let alpha: Vec<f64> = (0..s).map(|_| uniform(&mut r, 0.005, 0.15)).collect();
    let mut edges = Vec::new();
    for t in 0..s {
        edges.extend((0..n).map(|v| (v, t)));
        edges.push((n + t, t));
    }
    let g = RestakingGraph::from_parts(&pi, &alpha, &sigma, edges).ok()?;

    // hypotheses, checked on the graph itself
    let ratio = g.stake_profit_ratio().unwrap();
    let kk = ratio.k_stake;
    let need = (1.0 + delta) * kk * scale;
    for a in 0..s {
        for b in 0..s {
            let count = g.service_neighborhood(a).iter().filter(|v| g.service_neighborhood(b).contains(v)).count();
            if a != b && (count as f64) < need - 1e-9 {
                return None;
            }
        }
        if g.overlap_bounds(a).unwrap().theta_max > g.max_stake().unwrap() * kk * scale * (1.0 + 1e-12) {
            return None;
        }
    }
    if delta * g.min_stake().unwrap() / g.max_stake().unwrap() < 1.0 - eps {
        return None;
    }
    let bound = (2.0 * kk * (s - 1) as f64 / (s - 2) as f64).powf(p / (p - 1.0));
    Some((g, p, bound))
}
