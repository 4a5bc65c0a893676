//! The restaking graph: services, node operators and the edges between them.
//!
//! Graphs are immutable values. Ids are dense on each side (`0..n`) and every
//! set this module returns is sorted by id.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRecord {
    pub id: usize,
    /// Maximum profit from corrupting the service, in stake units.
    pub pi: f64,
    /// Fraction of the service's stake that must collude to corrupt it.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub id: usize,
    pub sigma: f64,
}

/// A node of the bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Service(usize),
    Operator(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestakingGraph {
    services: Vec<ServiceRecord>,
    operators: Vec<OperatorRecord>,
    /// `(operator, service)` pairs.
    edges: BTreeSet<(usize, usize)>,
    service_ops: Vec<Vec<usize>>,
    operator_svcs: Vec<Vec<usize>>,
}

/// Old-to-new id tables produced by [`RestakingGraph::remove_attack`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdRemap {
    pub services: Vec<Option<usize>>,
    pub operators: Vec<Option<usize>>,
}

impl IdRemap {
    /// Original id of each surviving service, indexed by new id.
    pub fn service_origins(&self) -> Vec<usize> {
        origins(&self.services)
    }

    pub fn operator_origins(&self) -> Vec<usize> {
        origins(&self.operators)
    }
}

fn origins(table: &[Option<usize>]) -> Vec<usize> {
    let mut out = vec![0; table.iter().flatten().count()];
    for (old, new) in table.iter().enumerate() {
        if let Some(new) = new {
            out[*new] = old;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapBounds {
    pub theta_min: f64,
    pub theta_max: f64,
    /// Every partner attaining `theta_max`, in id order.
    pub tau: Vec<usize>,
}

/// The two stake/profit ratios used by the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StakeProfitRatio {
    /// `max_s π_s / min_v σ_v`.
    pub k_stake: f64,
    /// `min_s π_s / max_s π_s`.
    pub kappa_pi: f64,
}

impl RestakingGraph {
    pub fn new(
        services: Vec<ServiceRecord>,
        operators: Vec<OperatorRecord>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        for (i, s) in services.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidGraph(format!(
                    "service ids must be dense and ordered: position {i} has id {}",
                    s.id
                )));
            }
            if !(s.pi.is_finite() && s.pi >= 0.0) {
                return Err(Error::InvalidGraph(format!("service {i}: pi must be finite and >= 0")));
            }
            if !(0.0..=1.0).contains(&s.alpha) {
                return Err(Error::InvalidGraph(format!("service {i}: alpha must lie in [0, 1]")));
            }
        }
        for (i, v) in operators.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidGraph(format!(
                    "operator ids must be dense and ordered: position {i} has id {}",
                    v.id
                )));
            }
            if !(v.sigma.is_finite() && v.sigma > 0.0) {
                return Err(Error::InvalidGraph(format!("operator {i}: sigma must be finite and > 0")));
            }
        }
        let mut set = BTreeSet::new();
        for (v, s) in edges {
            if v >= operators.len() {
                return Err(Error::InvalidGraph(format!("edge ({v}, {s}): unknown operator {v}")));
            }
            if s >= services.len() {
                return Err(Error::InvalidGraph(format!("edge ({v}, {s}): unknown service {s}")));
            }
            if !set.insert((v, s)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({v}, {s})")));
            }
        }
        let mut service_ops = vec![Vec::new(); services.len()];
        let mut operator_svcs = vec![Vec::new(); operators.len()];
        for &(v, s) in &set {
            service_ops[s].push(v);
            operator_svcs[v].push(s);
        }
        for ops in &mut service_ops {
            ops.sort_unstable();
        }
        Ok(RestakingGraph { services, operators, edges: set, service_ops, operator_svcs })
    }

    /// Builds a graph from parallel slices: `pi[s]`, `alpha[s]`, `sigma[v]`.
    pub fn from_parts(
        pi: &[f64],
        alpha: &[f64],
        sigma: &[f64],
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if pi.len() != alpha.len() {
            return Err(Error::InvalidGraph("pi and alpha lengths differ".into()));
        }
        let services = pi
            .iter()
            .zip(alpha)
            .enumerate()
            .map(|(id, (&pi, &alpha))| ServiceRecord { id, pi, alpha })
            .collect();
        let operators = sigma.iter().enumerate().map(|(id, &sigma)| OperatorRecord { id, sigma }).collect();
        Self::new(services, operators, edges)
    }

    pub fn num_services(&self) -> usize {
        self.services.len()
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn services(&self) -> &[ServiceRecord] {
        &self.services
    }

    pub fn operators(&self) -> &[OperatorRecord] {
        &self.operators
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, operator: usize, service: usize) -> bool {
        self.edges.contains(&(operator, service))
    }

    pub fn pi(&self, s: usize) -> f64 {
        self.services[s].pi
    }

    pub fn alpha(&self, s: usize) -> f64 {
        self.services[s].alpha
    }

    pub fn sigma(&self, v: usize) -> f64 {
        self.operators[v].sigma
    }

    pub fn check_service(&self, s: usize) -> Result<()> {
        if s < self.services.len() {
            Ok(())
        } else {
            Err(Error::service(s))
        }
    }

    pub fn check_operator(&self, v: usize) -> Result<()> {
        if v < self.operators.len() {
            Ok(())
        } else {
            Err(Error::operator(v))
        }
    }

    /// `∂s`: operators validating service `s`, sorted.
    pub fn service_neighborhood(&self, s: usize) -> &[usize] {
        &self.service_ops[s]
    }

    /// `∂v`: services validated by operator `v`, sorted.
    pub fn operator_neighborhood(&self, v: usize) -> &[usize] {
        &self.operator_svcs[v]
    }

    pub fn neighborhood(&self, node: Node) -> Result<Vec<usize>> {
        match node {
            Node::Service(s) => {
                self.check_service(s)?;
                Ok(self.service_ops[s].clone())
            }
            Node::Operator(v) => {
                self.check_operator(v)?;
                Ok(self.operator_svcs[v].clone())
            }
        }
    }

    /// `σ_D` for a set of operators. Duplicates are counted once.
    pub fn stake_of(&self, operators: &[usize]) -> Result<f64> {
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for &v in operators {
            self.check_operator(v)?;
            if seen.insert(v) {
                total += self.operators[v].sigma;
            }
        }
        Ok(total)
    }

    /// `σ_∂s`.
    pub fn service_stake(&self, s: usize) -> f64 {
        self.service_ops[s].iter().map(|&v| self.operators[v].sigma).sum()
    }

    /// `σ_V`.
    pub fn total_stake(&self) -> f64 {
        self.operators.iter().map(|v| v.sigma).sum()
    }

    pub fn min_stake(&self) -> Option<f64> {
        self.operators.iter().map(|v| v.sigma).reduce(f64::min)
    }

    pub fn max_stake(&self) -> Option<f64> {
        self.operators.iter().map(|v| v.sigma).reduce(f64::max)
    }

    pub fn min_profit(&self) -> Option<f64> {
        self.services.iter().map(|s| s.pi).reduce(f64::min)
    }

    pub fn max_profit(&self) -> Option<f64> {
        self.services.iter().map(|s| s.pi).reduce(f64::max)
    }

    /// `θ_{s,t} = σ_{∂s ∩ ∂t}`.
    pub fn overlap(&self, s: usize, t: usize) -> Result<f64> {
        self.check_service(s)?;
        self.check_service(t)?;
        if s == t {
            return Err(Error::Domain(format!("overlap of service {s} with itself")));
        }
        Ok(self.overlap_unchecked(s, t))
    }

    fn overlap_unchecked(&self, s: usize, t: usize) -> f64 {
        let (a, b) = (&self.service_ops[s], &self.service_ops[t]);
        let (mut i, mut j, mut total) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    total += self.operators[a[i]].sigma;
                    i += 1;
                    j += 1;
                }
            }
        }
        total
    }

    /// Minimum and maximum overlap of `s` with any other service, plus the
    /// argmax partners.
    pub fn overlap_bounds(&self, s: usize) -> Result<OverlapBounds> {
        self.check_service(s)?;
        if self.services.len() < 2 {
            return Err(Error::Domain("overlap bounds need at least two services".into()));
        }
        let overlaps: Vec<(usize, f64)> = (0..self.services.len())
            .filter(|&t| t != s)
            .map(|t| (t, self.overlap_unchecked(s, t)))
            .collect();
        let theta_min = overlaps.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let theta_max = overlaps.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
        let tau = overlaps
            .iter()
            .filter(|o| numeric::approx_eq(o.1, theta_max))
            .map(|o| o.0)
            .collect();
        Ok(OverlapBounds { theta_min, theta_max, tau })
    }

    /// `G ↘ (A, B)`: deletes services `A`, operators `B` and their edges.
    /// Survivors are renumbered densely in their original order.
    pub fn remove_attack(&self, services: &[usize], operators: &[usize]) -> Result<(RestakingGraph, IdRemap)> {
        let mut drop_s = vec![false; self.services.len()];
        let mut drop_v = vec![false; self.operators.len()];
        for &s in services {
            self.check_service(s)?;
            drop_s[s] = true;
        }
        for &v in operators {
            self.check_operator(v)?;
            drop_v[v] = true;
        }
        let remap_s = renumber(&drop_s);
        let remap_v = renumber(&drop_v);
        let new_services = self
            .services
            .iter()
            .filter_map(|s| remap_s[s.id].map(|id| ServiceRecord { id, ..s.clone() }))
            .collect();
        let new_operators = self
            .operators
            .iter()
            .filter_map(|v| remap_v[v.id].map(|id| OperatorRecord { id, sigma: v.sigma }))
            .collect();
        let new_edges: Vec<_> = self
            .edges
            .iter()
            .filter_map(|&(v, s)| Some((remap_v[v]?, remap_s[s]?)))
            .collect();
        let graph = RestakingGraph::new(new_services, new_operators, new_edges)?;
        Ok((graph, IdRemap { services: remap_s, operators: remap_v }))
    }

    /// Replaces `∂v` with `services`.
    pub fn with_boundary(&self, operator: usize, services: &[usize]) -> Result<RestakingGraph> {
        self.check_operator(operator)?;
        for &s in services {
            self.check_service(s)?;
        }
        let mut edges: BTreeSet<_> = self.edges.iter().copied().filter(|&(v, _)| v != operator).collect();
        edges.extend(services.iter().map(|&s| (operator, s)));
        RestakingGraph::new(self.services.clone(), self.operators.clone(), edges)
    }

    /// Same topology with new service profits.
    pub fn with_profits(&self, pi: &[f64]) -> Result<RestakingGraph> {
        if pi.len() != self.services.len() {
            return Err(Error::InvalidGraph("profit vector length mismatch".into()));
        }
        let services = self
            .services
            .iter()
            .zip(pi)
            .map(|(s, &pi)| ServiceRecord { pi, ..s.clone() })
            .collect();
        RestakingGraph::new(services, self.operators.clone(), self.edges.iter().copied())
    }

    /// Same topology with new operator stakes.
    pub fn with_stakes(&self, sigma: &[f64]) -> Result<RestakingGraph> {
        if sigma.len() != self.operators.len() {
            return Err(Error::InvalidGraph("stake vector length mismatch".into()));
        }
        let operators = self
            .operators
            .iter()
            .zip(sigma)
            .map(|(v, &sigma)| OperatorRecord { id: v.id, sigma })
            .collect();
        RestakingGraph::new(self.services.clone(), operators, self.edges.iter().copied())
    }

    /// Same topology with every threshold set to `alpha[s]`.
    pub fn with_alphas(&self, alpha: &[f64]) -> Result<RestakingGraph> {
        if alpha.len() != self.services.len() {
            return Err(Error::InvalidGraph("alpha vector length mismatch".into()));
        }
        let services = self
            .services
            .iter()
            .zip(alpha)
            .map(|(s, &alpha)| ServiceRecord { alpha, ..s.clone() })
            .collect();
        RestakingGraph::new(services, self.operators.clone(), self.edges.iter().copied())
    }

    pub fn stake_profit_ratio(&self) -> Result<StakeProfitRatio> {
        let (Some(max_pi), Some(min_pi), Some(min_sigma)) = (self.max_profit(), self.min_profit(), self.min_stake())
        else {
            return Err(Error::Domain("stake/profit ratio needs services and operators".into()));
        };
        if max_pi <= 0.0 {
            return Err(Error::Domain("stake/profit ratio undefined when every pi is 0".into()));
        }
        Ok(StakeProfitRatio { k_stake: max_pi / min_sigma, kappa_pi: min_pi / max_pi })
    }
}

fn renumber(dropped: &[bool]) -> Vec<Option<usize>> {
    let mut next = 0;
    dropped
        .iter()
        .map(|&d| {
            if d {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> RestakingGraph {
        RestakingGraph::from_parts(&[1.0, 1.0], &[1.0 / 3.0; 2], &[1.1, 1.1], [(0, 0), (1, 0), (0, 1), (1, 1)])
            .unwrap()
    }

    #[test]
    fn fig1_neighborhood_and_overlap() {
        let g = fig1();
        assert_eq!(g.neighborhood(Node::Service(0)).unwrap(), vec![0, 1]);
        assert!((g.stake_of(&[0, 1]).unwrap() - 2.2).abs() < 1e-12);
        assert!((g.overlap(0, 1).unwrap() - 2.2).abs() < 1e-12);
        let b = g.overlap_bounds(0).unwrap();
        assert!((b.theta_min - 2.2).abs() < 1e-12 && (b.theta_max - 2.2).abs() < 1e-12);
        assert_eq!(b.tau, vec![1]);
    }

    #[test]
    fn isolated_node_has_empty_boundary() {
        let g = RestakingGraph::from_parts(&[1.0, 2.0], &[0.5; 2], &[1.0, 1.0], [(0, 0)]).unwrap();
        assert!(g.neighborhood(Node::Service(1)).unwrap().is_empty());
        assert!(g.neighborhood(Node::Operator(1)).unwrap().is_empty());
        assert_eq!(g.stake_of(&[]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RestakingGraph::from_parts(&[1.0], &[0.5], &[1.0], [(0, 0), (0, 0)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(RestakingGraph::from_parts(&[1.0], &[1.5], &[1.0], []).is_err());
        assert!(RestakingGraph::from_parts(&[-1.0], &[0.5], &[1.0], []).is_err());
        assert!(RestakingGraph::from_parts(&[1.0], &[0.5], &[0.0], []).is_err());
        assert!(RestakingGraph::from_parts(&[1.0], &[0.5], &[1.0], [(3, 0)]).is_err());
        let g = fig1();
        assert_eq!(g.stake_of(&[7]), Err(Error::operator(7)));
        assert!(matches!(g.overlap(1, 1), Err(Error::Domain(_))));
        assert_eq!(g.neighborhood(Node::Service(9)), Err(Error::service(9)));
    }

    #[test]
    fn overlap_bounds_needs_two_services() {
        let g = RestakingGraph::from_parts(&[1.0], &[0.5], &[1.0], [(0, 0)]).unwrap();
        assert!(matches!(g.overlap_bounds(0), Err(Error::Domain(_))));
    }

    #[test]
    fn star_service_without_shared_operators() {
        let g = RestakingGraph::from_parts(
            &[1.0, 1.0, 1.0],
            &[0.5; 3],
            &[1.0, 1.0, 1.0],
            [(0, 0), (1, 1), (2, 2), (1, 2)],
        )
        .unwrap();
        let b = g.overlap_bounds(0).unwrap();
        assert_eq!((b.theta_min, b.theta_max), (0.0, 0.0));
        assert_eq!(b.tau, vec![1, 2]);
    }

    #[test]
    fn remove_attack_identity_and_fig1() {
        let g = fig1();
        let (same, remap) = g.remove_attack(&[], &[]).unwrap();
        assert_eq!(same, g);
        assert_eq!(remap.services, vec![Some(0), Some(1)]);

        let (small, remap) = g.remove_attack(&[0], &[0]).unwrap();
        assert_eq!(small.num_services(), 1);
        assert_eq!(small.num_operators(), 1);
        assert_eq!(small.num_edges(), 1);
        assert_eq!(remap.service_origins(), vec![1]);
        assert_eq!(remap.operator_origins(), vec![1]);
        // the original is untouched
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn ratios() {
        let g = RestakingGraph::from_parts(&[4.0, 2.0], &[1.0; 2], &[1.0, 2.0], [(0, 0), (1, 1)]).unwrap();
        let r = g.stake_profit_ratio().unwrap();
        assert_eq!(r.k_stake, 4.0);
        assert_eq!(r.kappa_pi, 0.5);
        let zero = RestakingGraph::from_parts(&[0.0], &[1.0], &[1.0], []).unwrap();
        assert!(zero.stake_profit_ratio().is_err());
    }

    #[test]
    fn with_boundary_rewires_one_operator() {
        let g = fig1().with_boundary(0, &[1]).unwrap();
        assert_eq!(g.service_neighborhood(0), &[1]);
        assert_eq!(g.service_neighborhood(1), &[0, 1]);
    }
}
