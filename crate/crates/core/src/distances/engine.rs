//! Generic pair-chain machinery shared by the exact and floating-point paths.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::bisim::MassKey;
use crate::linalg::{sccs, solve_dense};
use crate::numeric::Scalar;
use crate::transport;

/// A finite chain: successor lists with positive masses, and label ids.
#[derive(Clone, Debug)]
pub(crate) struct Chain<S> {
    pub succ: Vec<Vec<(usize, S)>>,
    pub label: Vec<usize>,
}

impl<S: MassKey> Chain<S> {
    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn partition(&self) -> Vec<usize> {
        crate::bisim::chain_partition(&self.succ, &self.label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Target {
    Zero,
    One,
    Node(usize),
}

/// Basic cells of a coupling: `(u, v, mass)`.
pub(crate) type Cells<S> = Vec<(usize, usize, S)>;

/// Pair nodes of a (possibly restricted) distance computation.
pub(crate) struct PairSystem<'a, S> {
    chain: &'a Chain<S>,
    block: &'a [usize],
    /// Identify `(u, v)` with `(v, u)`.
    symmetric: bool,
    pub nodes: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl<'a, S: MassKey> PairSystem<'a, S> {
    pub fn new(chain: &'a Chain<S>, block: &'a [usize], symmetric: bool) -> Self {
        PairSystem {
            chain,
            block,
            symmetric,
            nodes: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn key(&self, u: usize, v: usize) -> (usize, usize) {
        if self.symmetric && v < u {
            (v, u)
        } else {
            (u, v)
        }
    }

    pub fn is_zero(&self, u: usize, v: usize) -> bool {
        self.block[u] == self.block[v]
    }

    pub fn is_mismatch(&self, u: usize, v: usize) -> bool {
        self.chain.label[u] != self.chain.label[v]
    }

    fn is_unknown(&self, u: usize, v: usize) -> bool {
        !self.is_zero(u, v) && !self.is_mismatch(u, v)
    }

    /// Adds every unknown pair reachable from `seeds` through unknown pairs.
    pub fn close_over(&mut self, seeds: impl IntoIterator<Item = (usize, usize)>) {
        let mut queue = VecDeque::new();
        for (u, v) in seeds {
            self.push(u, v, &mut queue);
        }
        while let Some(p) = queue.pop_front() {
            let (s, t) = self.nodes[p];
            for (u, _) in &self.chain.succ[s] {
                for (v, _) in &self.chain.succ[t] {
                    self.push(*u, *v, &mut queue);
                }
            }
        }
    }

    /// Adds all unknown pairs.
    pub fn all_unknown(&mut self) {
        let n = self.chain.len();
        let mut queue = VecDeque::new();
        for s in 0..n {
            for t in 0..n {
                self.push(s, t, &mut queue);
            }
        }
    }

    fn push(&mut self, u: usize, v: usize, queue: &mut VecDeque<usize>) {
        if !self.is_unknown(u, v) {
            return;
        }
        let key = self.key(u, v);
        if self.index.contains_key(&key) {
            return;
        }
        self.index.insert(key, self.nodes.len());
        queue.push_back(self.nodes.len());
        self.nodes.push(key);
    }

    pub fn node_of(&self, u: usize, v: usize) -> Option<usize> {
        self.index.get(&self.key(u, v)).copied()
    }

    /// Target of pair `(u, v)` given which nodes are settled at one.
    fn target(&self, u: usize, v: usize, live: &[Option<usize>]) -> Target {
        if self.is_zero(u, v) {
            Target::Zero
        } else if self.is_mismatch(u, v) {
            Target::One
        } else {
            match live[self.node_of(u, v).expect("system is closed")] {
                Some(ix) => Target::Node(ix),
                None => Target::One,
            }
        }
    }

    /// Nodes from which some zero pair is reachable through unknown pairs.
    pub fn reaches_zero(&self) -> Vec<bool> {
        let n = self.nodes.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut good = vec![false; n];
        let mut queue = VecDeque::new();
        for (p, (s, t)) in self.nodes.iter().enumerate() {
            for (u, _) in &self.chain.succ[*s] {
                for (v, _) in &self.chain.succ[*t] {
                    if self.is_zero(*u, *v) {
                        if !good[p] {
                            good[p] = true;
                            queue.push_back(p);
                        }
                    } else if let Some(q) = self.node_of(*u, *v) {
                        preds[q].push(p);
                    }
                }
            }
        }
        while let Some(q) = queue.pop_front() {
            for p in &preds[q] {
                if !good[*p] {
                    good[*p] = true;
                    queue.push_back(*p);
                }
            }
        }
        good
    }

    /// Product coupling of the two successor distributions of node `p`.
    pub fn product_cells(&self, p: usize) -> Cells<S> {
        let (s, t) = self.nodes[p];
        let mut cells = Vec::new();
        for (u, a) in &self.chain.succ[s] {
            for (v, b) in &self.chain.succ[t] {
                cells.push((*u, *v, a.clone() * b.clone()));
            }
        }
        cells
    }

    /// Optimal coupling of node `p` under pair costs `cost`.
    pub fn best_cells(&self, p: usize, cost: impl Fn(usize, usize) -> S) -> (Cells<S>, S) {
        let (s, t) = self.nodes[p];
        let (rs, cs) = (&self.chain.succ[s], &self.chain.succ[t]);
        let supply: Vec<S> = rs.iter().map(|r| r.1.clone()).collect();
        let demand: Vec<S> = cs.iter().map(|c| c.1.clone()).collect();
        let costs: Vec<Vec<S>> = rs
            .iter()
            .map(|(u, _)| cs.iter().map(|(v, _)| cost(*u, *v)).collect())
            .collect();
        let (basis, value) = transport::solve(&supply, &demand, &costs);
        let cells = basis
            .into_iter()
            .filter(|(_, _, x)| x.is_pos())
            .map(|(i, j, x)| (rs[i].0, cs[j].0, x))
            .collect();
        (cells, value)
    }

    /// Least fixed point of the policy operator: probability of reaching a
    /// value-one target. `live[p]` maps each node to its row, or `None` for
    /// nodes fixed at one.
    pub fn evaluate(&self, live: &[Option<usize>], policy: &[Cells<S>]) -> Vec<S> {
        let k = policy.len();
        let mut b = vec![S::zero(); k];
        let mut edges: Vec<Vec<(usize, S)>> = vec![Vec::new(); k];
        for (r, cells) in policy.iter().enumerate() {
            for (u, v, w) in cells {
                match self.target(*u, *v, live) {
                    Target::Zero => {}
                    Target::One => b[r] = b[r].clone() + w.clone(),
                    Target::Node(q) => edges[r].push((q, w.clone())),
                }
            }
        }
        // Rows that cannot reach a value-one target have value zero.
        let mut hits: Vec<bool> = b.iter().map(|x| x.is_pos()).collect();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (r, es) in edges.iter().enumerate() {
            for (q, w) in es {
                if w.is_pos() {
                    preds[*q].push(r);
                }
            }
        }
        let mut queue: VecDeque<usize> = (0..k).filter(|r| hits[*r]).collect();
        while let Some(q) = queue.pop_front() {
            for p in &preds[q] {
                if !hits[*p] {
                    hits[*p] = true;
                    queue.push_back(*p);
                }
            }
        }
        let mut x = vec![S::zero(); k];
        let mut solved = vec![false; k];
        let graph_edges = edges
            .iter()
            .enumerate()
            .flat_map(|(r, es)| es.iter().map(move |(q, _)| (r, *q)))
            .filter(|(r, q)| hits[*r] && hits[*q]);
        for comp in sccs(k, graph_edges.collect::<Vec<_>>()) {
            let comp: Vec<usize> = comp.into_iter().filter(|r| hits[*r]).collect();
            if comp.is_empty() {
                continue;
            }
            let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, r)| (*r, i)).collect();
            let size = comp.len();
            let mut a = vec![vec![S::zero(); size]; size];
            let mut rhs = vec![S::zero(); size];
            for (i, r) in comp.iter().enumerate() {
                a[i][i] = S::one();
                rhs[i] = b[*r].clone();
                for (q, w) in &edges[*r] {
                    if let Some(j) = pos.get(q) {
                        a[i][*j] = a[i][*j].clone() - w.clone();
                    } else if solved[*q] {
                        rhs[i] = rhs[i].clone() + w.clone() * x[*q].clone();
                    }
                }
            }
            let sol = solve_dense(a, rhs).expect("policy system is nonsingular after pruning");
            for (i, r) in comp.iter().enumerate() {
                x[*r] = sol[i].clone();
                solved[*r] = true;
            }
        }
        x
    }

    /// Distances of all nodes by policy iteration from product couplings.
    /// Returns node values and, for every node, the final coupling cells.
    pub fn solve(&self) -> (Vec<S>, Vec<Cells<S>>) {
        let n = self.nodes.len();
        let good = self.reaches_zero();
        let rows: Vec<usize> = (0..n).filter(|p| good[*p]).collect();
        let mut live = vec![None; n];
        for (r, p) in rows.iter().enumerate() {
            live[*p] = Some(r);
        }
        let mut policy: Vec<Cells<S>> = rows.iter().map(|p| self.product_cells(*p)).collect();
        let mut x = self.evaluate(&live, &policy);
        loop {
            let value_of = |u: usize, v: usize, x: &[S]| match self.target(u, v, &live) {
                Target::Zero => S::zero(),
                Target::One => S::one(),
                Target::Node(q) => x[q].clone(),
            };
            let improved: Vec<Option<Cells<S>>> = rows
                .par_iter()
                .enumerate()
                .map(|(r, p)| {
                    let (cells, value) = self.best_cells(*p, |u, v| value_of(u, v, &x));
                    (x[r].clone() - value).is_pos().then_some(cells)
                })
                .collect();
            let mut changed = false;
            for (r, cells) in improved.into_iter().enumerate() {
                if let Some(cells) = cells {
                    policy[r] = cells;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            x = self.evaluate(&live, &policy);
        }
        let mut values = vec![S::one(); n];
        let mut cells: Vec<Cells<S>> = Vec::with_capacity(n);
        let mut policy = policy.into_iter();
        for p in 0..n {
            match live[p] {
                Some(r) => {
                    values[p] = x[r].clone();
                    cells.push(policy.next().unwrap());
                }
                None => cells.push(self.product_cells(p)),
            }
        }
        (values, cells)
    }

    /// Value of `(u, v)` given node values.
    pub fn pair_value(&self, u: usize, v: usize, values: &[S]) -> S {
        if self.is_zero(u, v) {
            S::zero()
        } else if self.is_mismatch(u, v) {
            S::one()
        } else {
            values[self.node_of(u, v).expect("system is closed")].clone()
        }
    }
}

/// One application of the distance operator to a dense matrix.
pub(crate) fn delta_step<S: Scalar>(chain: &Chain<S>, e: &[S]) -> Vec<S> {
    let n = chain.label.len();
    (0..n * n)
        .into_par_iter()
        .map(|p| {
            let (s, t) = (p / n, p % n);
            if chain.label[s] != chain.label[t] {
                return S::one();
            }
            let (rs, cs) = (&chain.succ[s], &chain.succ[t]);
            let supply: Vec<S> = rs.iter().map(|r| r.1.clone()).collect();
            let demand: Vec<S> = cs.iter().map(|c| c.1.clone()).collect();
            let costs: Vec<Vec<S>> = rs
                .iter()
                .map(|(u, _)| cs.iter().map(|(v, _)| e[u * n + v].clone()).collect())
                .collect();
            transport::solve(&supply, &demand, &costs).1
        })
        .collect()
}
