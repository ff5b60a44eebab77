//! Exact optimal transport between two finite distributions: the inner
//! minimization over couplings.
//!
//! Solved with the transportation simplex (u-v potentials) from a northwest
//! corner basis. Entering and leaving cells are both chosen by lowest index,
//! which rules out cycling on degenerate bases.

use std::collections::{BTreeMap, VecDeque};

use num_traits::Zero;

use crate::models::{Distribution, StateIx};
use crate::numeric::{Rational, Scalar};

/// Joint distribution with prescribed marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coupling {
    pub entries: BTreeMap<(StateIx, StateIx), Rational>,
    pub left: Distribution,
    pub right: Distribution,
}

impl Coupling {
    /// The independent coupling `mu x nu`.
    pub fn product(mu: &Distribution, nu: &Distribution) -> Self {
        let entries = mu
            .iter()
            .flat_map(|(u, p)| nu.iter().map(move |(v, q)| ((*u, *v), p * q)))
            .collect();
        Coupling {
            entries,
            left: mu.clone(),
            right: nu.clone(),
        }
    }

    /// Expected cost under this coupling.
    pub fn cost(&self, mut cost: impl FnMut(StateIx, StateIx) -> Rational) -> Rational {
        self.entries
            .iter()
            .map(|((u, v), w)| w * cost(*u, *v))
            .sum()
    }

    /// Same coupling with the roles of the marginals swapped.
    pub fn transpose(&self) -> Self {
        Coupling {
            entries: self.entries.iter().map(|((u, v), w)| ((*v, *u), w.clone())).collect(),
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

/// True iff all entries are nonnegative and both marginals match exactly.
pub fn check_coupling(w: &Coupling) -> bool {
    let mut rows: BTreeMap<StateIx, Rational> = BTreeMap::new();
    let mut cols: BTreeMap<StateIx, Rational> = BTreeMap::new();
    for ((u, v), p) in &w.entries {
        if *p < Rational::zero() {
            return false;
        }
        if p.is_zero() {
            continue;
        }
        *rows.entry(*u).or_default() += p;
        *cols.entry(*v).or_default() += p;
    }
    let matches = |sums: &BTreeMap<StateIx, Rational>, d: &Distribution| {
        sums.len() == d.len() && sums.iter().all(|(k, p)| d.prob(k) == *p)
    };
    matches(&rows, &w.left) && matches(&cols, &w.right)
}

/// Minimal expected cost over all couplings of `mu` and `nu`, with an
/// optimal vertex coupling.
pub fn optimal_coupling(
    mu: &Distribution,
    nu: &Distribution,
    mut cost: impl FnMut(StateIx, StateIx) -> Rational,
) -> (Coupling, Rational) {
    let rows: Vec<(StateIx, Rational)> = mu.iter().map(|(u, p)| (*u, p.clone())).collect();
    let cols: Vec<(StateIx, Rational)> = nu.iter().map(|(v, p)| (*v, p.clone())).collect();
    let supply: Vec<Rational> = rows.iter().map(|r| r.1.clone()).collect();
    let demand: Vec<Rational> = cols.iter().map(|c| c.1.clone()).collect();
    let costs: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(u, _)| cols.iter().map(|(v, _)| cost(*u, *v)).collect())
        .collect();
    let (flow, value) = solve(&supply, &demand, &costs);
    let entries = flow
        .into_iter()
        .filter(|(_, _, x)| !x.is_zero())
        .map(|(i, j, x)| ((rows[i].0, cols[j].0), x))
        .collect();
    (
        Coupling {
            entries,
            left: mu.clone(),
            right: nu.clone(),
        },
        value,
    )
}

/// Dense transportation problem. Supplies and demands must be positive with
/// equal totals. Returns the basic cells `(row, col, flow)` of an optimal
/// basis (zero flows included) and the optimal cost.
pub fn solve<S: Scalar>(supply: &[S], demand: &[S], cost: &[Vec<S>]) -> (Vec<(usize, usize, S)>, S) {
    let (m, k) = (supply.len(), demand.len());
    assert!(m > 0 && k > 0, "empty marginal");
    let mut basis = northwest_corner(supply, demand);
    // Both rules pick the lowest cell index, so the search terminates; the cap
    // only guards the floating-point instantiation.
    let cap = 50 * (m + k) * (m * k + 1);
    for _ in 0..cap {
        let (u, v) = potentials(&basis, m, k, cost);
        let entering = (0..m)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|(i, j)| !basis.iter().any(|(bi, bj, _)| bi == i && bj == j))
            .find(|(i, j)| (cost[*i][*j].clone() - u[*i].clone() - v[*j].clone()).is_neg());
        let Some((ei, ej)) = entering else { break };
        pivot(&mut basis, m, k, ei, ej);
    }
    let value = basis
        .iter()
        .fold(S::zero(), |acc, (i, j, x)| acc + x.clone() * cost[*i][*j].clone());
    (basis, value)
}

fn northwest_corner<S: Scalar>(supply: &[S], demand: &[S]) -> Vec<(usize, usize, S)> {
    let (m, k) = (supply.len(), demand.len());
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut basis = Vec::with_capacity(m + k - 1);
    loop {
        let x = if ra[i] < rb[j] { ra[i].clone() } else { rb[j].clone() };
        ra[i] = ra[i].clone() - x.clone();
        rb[j] = rb[j].clone() - x.clone();
        basis.push((i, j, x));
        if i == m - 1 && j == k - 1 {
            return basis;
        }
        if j == k - 1 || (i < m - 1 && !ra[i].is_pos()) {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Node ids: rows `0..m`, columns `m..m+k`.
fn tree_adjacency<S>(basis: &[(usize, usize, S)], m: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + k];
    for (c, (i, j, _)) in basis.iter().enumerate() {
        adj[*i].push((m + *j, c));
        adj[m + *j].push((*i, c));
    }
    adj
}

fn potentials<S: Scalar>(basis: &[(usize, usize, S)], m: usize, k: usize, cost: &[Vec<S>]) -> (Vec<S>, Vec<S>) {
    let adj = tree_adjacency(basis, m, k);
    let mut pot: Vec<Option<S>> = vec![None; m + k];
    pot[0] = Some(S::zero());
    let mut queue = VecDeque::from([0]);
    while let Some(node) = queue.pop_front() {
        let here = pot[node].clone().unwrap();
        for (other, c) in &adj[node] {
            if pot[*other].is_some() {
                continue;
            }
            let (i, j, _) = &basis[*c];
            // u_i + v_j = c_ij
            pot[*other] = Some(cost[*i][*j].clone() - here.clone());
            queue.push_back(*other);
        }
    }
    let pot: Vec<S> = pot.into_iter().map(|p| p.expect("basis spans all rows and columns")).collect();
    (pot[..m].to_vec(), pot[m..].to_vec())
}

fn pivot<S: Scalar>(basis: &mut [(usize, usize, S)], m: usize, k: usize, ei: usize, ej: usize) {
    let adj = tree_adjacency(basis, m, k);
    // Path in the tree from column ej to row ei.
    let (start, goal) = (m + ej, ei);
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; m + k];
    let mut seen = vec![false; m + k];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for (other, c) in &adj[node] {
            if !seen[*other] {
                seen[*other] = true;
                prev[*other] = Some((node, *c));
                queue.push_back(*other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let (p, c) = prev[node].expect("tree is connected");
        path.push(c);
        node = p;
    }
    path.reverse();
    // path[0] touches column ej and loses flow, then signs alternate.
    let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
    let theta = minus
        .iter()
        .map(|c| basis[*c].2.clone())
        .fold(None, |acc: Option<S>, x| match acc {
            Some(a) if a <= x => Some(a),
            _ => Some(x),
        })
        .expect("cycle has a decreasing cell");
    let leaving = *minus
        .iter()
        .filter(|c| !(basis[**c].2.clone() - theta.clone()).is_pos())
        .min_by_key(|c| basis[**c].0 * k + basis[**c].1)
        .unwrap();
    for (pos, c) in path.iter().enumerate() {
        let x = basis[*c].2.clone();
        basis[*c].2 = if pos % 2 == 0 { x - theta.clone() } else { x + theta.clone() };
    }
    basis[leaving] = (ei, ej, theta);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, rat};

    fn discrete(u: StateIx, v: StateIx) -> Rational {
        if u == v { int(0) } else { int(1) }
    }

    #[test]
    fn identical_marginals_under_discrete_metric_cost_nothing() {
        let mu = Distribution::new([(0, rat(1, 3)), (1, rat(2, 3))]).unwrap();
        let (w, v) = optimal_coupling(&mu, &mu, discrete);
        assert_eq!(v, int(0));
        assert!(check_coupling(&w));
        assert!(w.entries.keys().all(|(a, b)| a == b));
    }

    #[test]
    fn forced_coupling_between_diracs() {
        let (w, v) = optimal_coupling(&Distribution::dirac(0), &Distribution::dirac(1), discrete);
        assert_eq!(v, int(1));
        assert_eq!(w.entries.len(), 1);
    }

    #[test]
    fn two_by_two_discrete_metric() {
        let mu = Distribution::new([(0, rat(2, 3)), (1, rat(1, 3))]).unwrap();
        let nu = Distribution::new([(0, rat(1, 3)), (1, rat(2, 3))]).unwrap();
        let (w, v) = optimal_coupling(&mu, &nu, discrete);
        assert_eq!(v, rat(1, 3));
        assert!(check_coupling(&w));
    }

    #[test]
    fn perturbed_coupling_fails_the_check() {
        let mu = Distribution::new([(0, rat(1, 2)), (1, rat(1, 2))]).unwrap();
        let mut w = Coupling::product(&mu, &mu);
        assert!(check_coupling(&w));
        *w.entries.get_mut(&(0, 0)).unwrap() += rat(1, 1000);
        assert!(!check_coupling(&w));
    }

    #[test]
    fn degenerate_northwest_corner_keeps_a_spanning_basis() {
        let supply = [rat(1, 2), rat(1, 2)];
        let demand = [rat(1, 2), rat(1, 2)];
        let cost = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let (basis, v) = solve(&supply, &demand, &cost);
        assert_eq!(basis.len(), 3);
        assert_eq!(v, int(0));
    }

    #[test]
    fn float_instantiation_agrees() {
        let supply = [0.2, 0.3, 0.5];
        let demand = [0.6, 0.4];
        let cost = vec![vec![0.0, 1.0], vec![0.5, 0.2], vec![0.9, 0.1]];
        let (_, v) = solve(&supply, &demand, &cost);
        // rows 0,1 -> col 0 (0.2*0 + 0.3*0.5), row 2 -> 0.1 col0 + 0.4 col1
        assert!((v - (0.15 + 0.09 + 0.04)).abs() < 1e-12);
    }
}
