//! Bitmask view of a graph for the exhaustive searches.
//!
//! Service and operator sets are `u64` masks (bit `i` = id `i`). The
//! canonical order on masks is by popcount, then by sorted ids.

use std::cmp::Ordering;

use crate::attack::{MAX_EXHAUSTIVE_OPERATORS, MAX_EXHAUSTIVE_SERVICES};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::RestakingGraph;
use crate::numeric;
use crate::profit::ProfitSpec;

pub(crate) type Mask = u64;

pub(crate) fn full(n: usize) -> Mask {
    if n == 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

pub(crate) fn from_ids(ids: &[usize]) -> Mask {
    ids.iter().fold(0, |m, &i| m | 1 << i)
}

pub(crate) fn ids(mut m: Mask) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Size first, then lexicographic on the sorted id lists.
pub(crate) fn canonical_cmp(a: Mask, b: Mask) -> Ordering {
    a.count_ones().cmp(&b.count_ones()).then_with(|| {
        let diff = a ^ b;
        if diff == 0 {
            Ordering::Equal
        } else if a >> diff.trailing_zeros() & 1 == 1 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    })
}

/// Nonempty submasks of `m` with at most `cap` bits, in canonical order.
pub(crate) fn submasks(m: Mask, cap: usize) -> Vec<Mask> {
    let mut out = Vec::new();
    let mut sub = m;
    while sub != 0 {
        if sub.count_ones() as usize <= cap {
            out.push(sub);
        }
        sub = (sub - 1) & m;
    }
    out.sort_by(|&a, &b| canonical_cmp(a, b));
    out
}

pub(crate) fn check_size(graph: &RestakingGraph) -> Result<()> {
    let (ns, nv) = (graph.num_services(), graph.num_operators());
    if ns > MAX_EXHAUSTIVE_SERVICES || nv > MAX_EXHAUSTIVE_OPERATORS {
        return Err(Error::Resource(format!(
            "exhaustive search supports at most {MAX_EXHAUSTIVE_SERVICES} services and \
             {MAX_EXHAUSTIVE_OPERATORS} operators (graph has {ns} and {nv})"
        )));
    }
    Ok(())
}

pub(crate) struct Engine {
    pub ns: usize,
    pub nv: usize,
    pub nbr: Vec<Mask>,
    pub alpha: Vec<f64>,
    stake_table: Vec<f64>,
    profit_table: Vec<f64>,
}

impl Engine {
    pub fn new(graph: &RestakingGraph, spec: &ProfitSpec) -> Result<Self> {
        check_size(graph)?;
        let (ns, nv) = (graph.num_services(), graph.num_operators());
        let sigma: Vec<f64> = graph.operators().iter().map(|v| v.sigma).collect();
        let nbr = (0..ns).map(|s| from_ids(graph.service_neighborhood(s))).collect();
        let alpha = graph.services().iter().map(|s| s.alpha).collect();
        let mut stake_table = vec![0.0; 1 << nv];
        for m in 1..stake_table.len() {
            let low = m.trailing_zeros() as usize;
            stake_table[m] = stake_table[m & (m - 1)] + sigma[low];
        }
        let profit_table = (0..1u64 << ns)
            .map(|a| spec.evaluate(ids(a).into_iter().map(|s| graph.pi(s))))
            .collect();
        Ok(Engine { ns, nv, nbr, alpha, stake_table, profit_table })
    }

    #[inline]
    pub fn stake(&self, m: Mask) -> f64 {
        self.stake_table[m as usize]
    }

    #[inline]
    pub fn profit(&self, a: Mask) -> f64 {
        self.profit_table[a as usize]
    }

    /// Operators of `A` that are still live.
    pub fn boundary(&self, a: Mask, live: Mask) -> Mask {
        ids(a).into_iter().fold(0, |m, s| m | self.nbr[s]) & live
    }

    /// `σ_{B∩∂s} ≥ α_s σ_∂s` for every `s ∈ A`, with `σ_∂s` taken over `live` operators.
    pub fn feasible(&self, a: Mask, b: Mask, live: Mask) -> bool {
        self.first_infeasible(a, b, live).is_none()
    }

    fn first_infeasible(&self, a: Mask, b: Mask, live: Mask) -> Option<(usize, f64, f64)> {
        let mut rest = a;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let pool = self.nbr[s] & live;
            let colluding = self.stake(b & pool);
            let required = self.alpha[s] * self.stake(pool);
            if !numeric::ge(colluding, required) {
                return Some((s, colluding, required));
            }
        }
        None
    }

    /// Every valid attack `(A, B)` with `A ⊆ live_s`, `B ⊆ live_v`, in
    /// canonical order.
    pub fn valid_attacks(
        &self,
        live_s: Mask,
        live_v: Mask,
        cap_a: usize,
        cap_b: usize,
        exec: Execution,
    ) -> Vec<(Mask, Mask)> {
        let a_sets = submasks(live_s, cap_a);
        let per_a = |&a: &Mask| self.attacks_for(a, live_v, cap_b);
        if a_sets.len() * (live_v.count_ones() as usize + 1) >= 256 {
            exec.flat_map(&a_sets, per_a)
        } else {
            a_sets.iter().flat_map(per_a).collect()
        }
    }

    /// Valid `B` for a fixed `A`, as `(A, B)` pairs in canonical `B` order.
    ///
    /// Feasibility only depends on `B ∩ ∂A`, so the inner half is enumerated
    /// first and the outer half is filled in against the remaining profit.
    pub fn attacks_for(&self, a: Mask, live_v: Mask, cap_b: usize) -> Vec<(Mask, Mask)> {
        let profit = self.profit(a);
        let inner = self.boundary(a, live_v);
        let outer_ids = ids(live_v & !inner);
        let mut out = Vec::new();
        let mut sub = inner;
        loop {
            // `sub = 0` can be feasible (α = 0 or no live stake); only its
            // nonempty extensions are attacks.
            if sub.count_ones() as usize <= cap_b && self.feasible(a, sub, live_v) && numeric::ge(profit, self.stake(sub)) {
                if sub != 0 {
                    out.push((a, sub));
                }
                let room = cap_b - sub.count_ones() as usize;
                self.extend_outer(a, profit, sub, &outer_ids, 0, room, &mut out);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & inner;
        }
        out.sort_by(|&x, &y| canonical_cmp(x.1, y.1));
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_outer(
        &self,
        a: Mask,
        profit: f64,
        base: Mask,
        outer: &[usize],
        from: usize,
        room: usize,
        out: &mut Vec<(Mask, Mask)>,
    ) {
        if room == 0 {
            return;
        }
        for (i, &v) in outer.iter().enumerate().skip(from) {
            let b = base | 1 << v;
            if numeric::ge(profit, self.stake(b)) {
                out.push((a, b));
                self.extend_outer(a, profit, b, outer, i + 1, room - 1, out);
            }
        }
    }

    /// The cheapest feasible `B ⊆ ∂A` for `A` (canonically first among
    /// ties), ignoring profitability.
    pub fn cheapest_feasible(&self, a: Mask, live_v: Mask) -> Option<Mask> {
        if self.feasible(a, 0, live_v) {
            return self.cheapest_single(live_v);
        }
        let inner = self.boundary(a, live_v);
        let mut best: Option<(f64, Mask)> = None;
        let mut sub = inner;
        while sub != 0 {
            let st = self.stake(sub);
            let better = match best {
                None => true,
                Some((bs, bm)) => {
                    numeric::lt(st, bs) || (numeric::approx_eq(st, bs) && canonical_cmp(sub, bm) == Ordering::Less)
                }
            };
            if better && self.feasible(a, sub, live_v) {
                best = Some((st, sub));
            }
            sub = (sub - 1) & inner;
        }
        best.map(|b| b.1)
    }

    /// The lowest-stake live operator (lowest id among ties), as a mask.
    fn cheapest_single(&self, live_v: Mask) -> Option<Mask> {
        ids(live_v).into_iter().map(|v| 1u64 << v).min_by(|&x, &y| self.stake(x).total_cmp(&self.stake(y)))
    }

    /// Minimum `σ_B` over feasible `B` for `A` (feasibility only), if any.
    pub fn min_feasible_stake(&self, a: Mask, live_v: Mask) -> Option<f64> {
        if self.feasible(a, 0, live_v) {
            return self.cheapest_single(live_v).map(|m| self.stake(m));
        }
        let inner = self.boundary(a, live_v);
        let mut best: Option<f64> = None;
        let mut sub = inner;
        while sub != 0 {
            let st = self.stake(sub);
            if best.is_none_or(|b| st < b) && self.feasible(a, sub, live_v) {
                best = Some(st);
            }
            sub = (sub - 1) & inner;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let mut masks = vec![0b110, 0b001, 0b011, 0b101, 0b100, 0b010, 0b111];
        masks.sort_by(|&a, &b| canonical_cmp(a, b));
        let lists: Vec<Vec<usize>> = masks.into_iter().map(ids).collect();
        assert_eq!(
            lists,
            vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]
        );
    }

    #[test]
    fn submask_caps() {
        assert_eq!(submasks(0b111, 1), vec![0b001, 0b010, 0b100]);
        assert_eq!(submasks(0b1010, 8).len(), 3);
    }
}
