//! The cascade coefficient `R_ψ(G)`.
//!
//! For every seed coalition `D` with `σ_D ≤ ψ σ_V` the search finds the
//! attack sequence on `G ↘ D` that slashes the most stake. States are
//! `(surviving services, surviving operators)` masks and are memoised across
//! seeds, since the best continuation from a state does not depend on how it
//! was reached.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::attack::{Attack, AttackSequence};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::RestakingGraph;
use crate::mask::{self, Engine, Mask};
use crate::numeric;
use crate::profit::ProfitSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub psi: f64,
    pub best_d: Vec<usize>,
    pub best_sequence: AttackSequence,
    /// `min(1, ψ + σ(∪B_t)/σ_V)` for the reported sequence.
    pub r_psi: f64,
    /// `σ(∪B_t)/σ_V` alone.
    pub slashed_fraction: f64,
    pub seeds_examined: usize,
    pub states_explored: usize,
}

/// Best loss from a state and the first attack achieving it.
type Best = (f64, Option<(Mask, Mask)>);

pub(crate) struct Search<'e> {
    engine: &'e Engine,
    exec: Execution,
    memo: HashMap<(Mask, Mask), Best>,
}

impl<'e> Search<'e> {
    pub fn new(engine: &'e Engine, exec: Execution) -> Self {
        Search { engine, exec, memo: HashMap::new() }
    }

    /// Most stake any cascade can still slash from this state.
    pub fn value(&mut self, live_s: Mask, live_v: Mask) -> f64 {
        if let Some(&(v, _)) = self.memo.get(&(live_s, live_v)) {
            return v;
        }
        let ceiling = self.engine.stake(live_v);
        let moves = self.engine.valid_attacks(live_s, live_v, usize::MAX, usize::MAX, self.exec);
        let mut best = 0.0;
        let mut best_move = None;
        for (a, b) in moves {
            let v = self.engine.stake(b) + self.value(live_s & !a, live_v & !b);
            if best_move.is_none() || numeric::gt(v, best) {
                best = v;
                best_move = Some((a, b));
                if numeric::ge(best, ceiling) {
                    break;
                }
            }
        }
        self.memo.insert((live_s, live_v), (best, best_move));
        best
    }

    pub fn witness(&mut self, mut live_s: Mask, mut live_v: Mask) -> Vec<Attack> {
        self.value(live_s, live_v);
        let mut steps = Vec::new();
        while let Some(&(_, Some((a, b)))) = self.memo.get(&(live_s, live_v)) {
            steps.push(Attack::from_masks(a, b));
            live_s &= !a;
            live_v &= !b;
            self.value(live_s, live_v);
        }
        steps
    }

    pub fn states(&self) -> usize {
        self.memo.len()
    }
}

/// The worst cascade after removing `seed`: the sequence and its slashed stake.
pub fn worst_cascade(graph: &RestakingGraph, spec: &ProfitSpec, seed: &[usize]) -> Result<(f64, AttackSequence)> {
    let engine = Engine::new(graph, spec)?;
    for &v in seed {
        graph.check_operator(v)?;
    }
    let mut search = Search::new(&engine, Execution::Auto);
    let (ls, lv) = (mask::full(engine.ns), mask::full(engine.nv) & !mask::from_ids(seed));
    let value = search.value(ls, lv);
    Ok((value, AttackSequence { steps: search.witness(ls, lv) }))
}

pub fn cascade_coefficient(graph: &RestakingGraph, spec: &ProfitSpec, psi: f64) -> Result<CascadeResult> {
    cascade_coefficient_with(graph, spec, psi, Execution::Auto)
}

pub fn cascade_coefficient_with(
    graph: &RestakingGraph,
    spec: &ProfitSpec,
    psi: f64,
    exec: Execution,
) -> Result<CascadeResult> {
    if !(0.0..1.0).contains(&psi) {
        return Err(Error::Domain(format!("psi must lie in [0, 1), got {psi}")));
    }
    let engine = Engine::new(graph, spec)?;
    let total = graph.total_stake();
    let (all_s, all_v) = (mask::full(engine.ns), mask::full(engine.nv));
    let mut seeds: Vec<Mask> = (0..=all_v).filter(|&d| numeric::le(engine.stake(d), psi * total)).collect();
    seeds.sort_by(|&a, &b| mask::canonical_cmp(a, b));

    let mut search = Search::new(&engine, exec);
    let mut best: Option<(f64, f64, Mask)> = None;
    for &d in &seeds {
        let slashed = search.value(all_s, all_v & !d);
        let r = (psi + slashed / total).min(1.0);
        let sd = engine.stake(d);
        let better = match best {
            None => true,
            Some((br, bsd, _)) => numeric::gt(r, br) || (numeric::approx_eq(r, br) && numeric::gt(sd, bsd)),
        };
        if better {
            best = Some((r, sd, d));
        }
    }
    let (_, _, d) = best.expect("the empty seed always qualifies");
    let steps = search.witness(all_s, all_v & !d);
    let sequence = AttackSequence { steps };
    let slashed = graph.stake_of(&sequence.removed_operators())? / total;
    Ok(CascadeResult {
        psi,
        best_d: mask::ids(d),
        best_sequence: sequence,
        r_psi: (psi + slashed).min(1.0),
        slashed_fraction: slashed,
        seeds_examined: seeds.len(),
        states_explored: search.states(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secure_graph_has_no_cascade() {
        let g = RestakingGraph::from_parts(&[1.0, 1.0], &[0.6; 2], &[1.1, 1.1], [(0, 0), (1, 0), (0, 1), (1, 1)])
            .unwrap();
        let r = cascade_coefficient(&g, &ProfitSpec::Linear, 0.0).unwrap();
        assert_eq!(r.r_psi, 0.0);
        assert!(r.best_sequence.is_empty());
        assert!(cascade_coefficient(&g, &ProfitSpec::Linear, 1.0).is_err());
    }

    #[test]
    fn seed_enables_attack() {
        // s0 needs all of {v0, v1}; losing v1 leaves v0 alone, which is cheap.
        let g = RestakingGraph::from_parts(&[1.5], &[1.0], &[1.0, 1.0, 2.0], [(0, 0), (1, 0)]).unwrap();
        let r = cascade_coefficient(&g, &ProfitSpec::Linear, 0.25).unwrap();
        assert_eq!(r.best_d, vec![0]);
        assert_eq!(r.best_sequence.steps, vec![Attack::new([0], [1]).unwrap()]);
        assert!((r.r_psi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fig2_cascade_uses_the_seed_loss() {
        use crate::io::scenario::{bottom, fig2, top, FIG2_BOTTOM, FIG2_RED, FIG2_TOP};
        let r = cascade_coefficient(&fig2(), &ProfitSpec::Linear, 1.0 / 12.0).unwrap();
        assert!((r.r_psi - 1.0).abs() < 1e-9);
        assert_eq!(r.best_d, vec![top(0)]);
        let expect = vec![
            Attack::new([FIG2_RED[0]], [bottom(0), bottom(1)]).unwrap(),
            Attack::new([FIG2_BOTTOM], [bottom(2), bottom(3), bottom(4), bottom(5)]).unwrap(),
            Attack::new([FIG2_RED[1]], [top(1), top(2)]).unwrap(),
            Attack::new([FIG2_TOP], [top(3), top(4), top(5)]).unwrap(),
        ];
        assert_eq!(r.best_sequence.steps, expect);
    }
}
