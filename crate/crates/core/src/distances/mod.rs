//! Probabilistic bisimilarity distances on finite LMCs.
//!
//! The distance `d` is the least fixed point of the operator `Δ` that is one on
//! label mismatches and otherwise the optimal transport cost of the successor
//! distributions. [`distance_exact`] computes it by policy iteration over
//! couplings after settling the zero pairs (bisimilarity) and the one pairs
//! (no path to a bisimilar pair).

pub(crate) mod engine;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::{One, Zero};

use crate::bisim::{bisim_partition, Partition};
use crate::error::{Error, Result};
use crate::models::{Lmc, StateIx};
use crate::numeric::{Rational, Scalar};
use crate::transport::{check_coupling, Coupling};
use engine::{Cells, Chain, PairSystem};

/// Values on all ordered pairs of states.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix<S = Rational> {
    n: usize,
    values: Vec<S>,
}

impl<S: Clone> DistanceMatrix<S> {
    pub fn filled(n: usize, value: S) -> Self {
        DistanceMatrix {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(StateIx, StateIx) -> S) -> Self {
        let values = (0..n * n).map(|p| f(p / n, p % n)).collect();
        DistanceMatrix { n, values }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: StateIx, t: StateIx) -> &S {
        &self.values[s * self.n + t]
    }

    pub fn set(&mut self, s: StateIx, t: StateIx, value: S) {
        self.values[s * self.n + t] = value;
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }
}

/// One coupling per unknown pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Policy {
    pub choice: BTreeMap<(StateIx, StateIx), Coupling>,
}

impl Policy {
    /// The product coupling on every pair that is neither bisimilar nor
    /// label-mismatched.
    pub fn product(lmc: &Lmc) -> Policy {
        let part = bisim_partition(lmc);
        let choice = unknown_pairs(lmc, &part)
            .map(|(s, t)| ((s, t), Coupling::product(lmc.trans(s), lmc.trans(t))))
            .collect();
        Policy { choice }
    }
}

fn unknown_pairs<'a>(lmc: &'a Lmc, part: &'a Partition) -> impl Iterator<Item = (StateIx, StateIx)> + 'a {
    let n = lmc.len();
    (0..n)
        .flat_map(move |s| (0..n).map(move |t| (s, t)))
        .filter(move |(s, t)| lmc.same_label(*s, *t) && !part.same_block(*s, *t))
}

pub(crate) fn lmc_chain(lmc: &Lmc) -> Chain<Rational> {
    let mut label_ids: HashMap<&str, usize> = HashMap::new();
    let label = (0..lmc.len())
        .map(|s| {
            let fresh = label_ids.len();
            *label_ids.entry(lmc.label(s)).or_insert(fresh)
        })
        .collect();
    let succ = (0..lmc.len())
        .map(|s| lmc.trans(s).iter().map(|(t, p)| (*t, p.clone())).collect())
        .collect();
    Chain { succ, label }
}

/// `Δ(e)`: one on label mismatches, otherwise the optimal transport cost of
/// the successor distributions under cost `e`.
pub fn apply_delta(lmc: &Lmc, e: &DistanceMatrix) -> DistanceMatrix {
    let chain = lmc_chain(lmc);
    DistanceMatrix {
        n: lmc.len(),
        values: engine::delta_step(&chain, &e.values),
    }
}

/// Result of value iteration from the zero function.
#[derive(Clone, Debug, PartialEq)]
pub struct ViResult<S = Rational> {
    /// `Δⁿ(0)`, a pointwise lower bound on the distance.
    pub values: DistanceMatrix<S>,
    pub iterations: usize,
    /// Largest change in the last step.
    pub last_step: S,
}

/// Iterates `Δ` from zero until the largest change is at most `eps`.
pub fn distance_vi(lmc: &Lmc, eps: &Rational) -> ViResult {
    distance_vi_capped(lmc, eps, usize::MAX)
}

/// As [`distance_vi`], stopping after at most `max_iter` steps.
pub fn distance_vi_capped(lmc: &Lmc, eps: &Rational, max_iter: usize) -> ViResult {
    vi_generic(&lmc_chain(lmc), eps.clone(), max_iter)
}

/// Value iteration in floating point.
pub fn distance_vi_f64(lmc: &Lmc, eps: f64, max_iter: usize) -> ViResult<f64> {
    let chain = lmc_chain(lmc);
    let chain = Chain {
        succ: chain
            .succ
            .iter()
            .map(|r| r.iter().map(|(t, p)| (*t, crate::numeric::to_f64(p))).collect())
            .collect(),
        label: chain.label,
    };
    vi_generic(&chain, eps, max_iter)
}

fn vi_generic<S: Scalar>(chain: &Chain<S>, eps: S, max_iter: usize) -> ViResult<S> {
    let n = chain.label.len();
    let mut e = vec![S::zero(); n * n];
    let mut iterations = 0;
    loop {
        let next = engine::delta_step(chain, &e);
        iterations += 1;
        let step = next
            .iter()
            .zip(&e)
            .map(|(a, b)| a.clone() - b.clone())
            .fold(S::zero(), |m, d| if d > m { d } else { m });
        e = next;
        if step <= eps || iterations >= max_iter {
            return ViResult {
                values: DistanceMatrix { n, values: e },
                iterations,
                last_step: step,
            };
        }
    }
}

/// Pairs at distance one: those that cannot reach a bisimilar pair through
/// label-equal pairs in the pair graph.
pub fn distance_one_set(lmc: &Lmc) -> BTreeSet<(StateIx, StateIx)> {
    let n = lmc.len();
    let part = bisim_partition(lmc);
    let mut preds: Vec<Vec<StateIx>> = vec![Vec::new(); n];
    for s in 0..n {
        for t in lmc.trans(s).support() {
            preds[*t].push(s);
        }
    }
    let mut below_one = vec![false; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        for t in 0..n {
            if part.same_block(s, t) {
                below_one[s * n + t] = true;
                queue.push_back((s, t));
            }
        }
    }
    while let Some((u, v)) = queue.pop_front() {
        for s in &preds[u] {
            for t in &preds[v] {
                if !below_one[s * n + t] && lmc.same_label(*s, *t) {
                    below_one[s * n + t] = true;
                    queue.push_back((*s, *t));
                }
            }
        }
    }
    (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .filter(|(s, t)| !below_one[s * n + t])
        .collect()
}

/// True iff `d(s, t) < 1`.
pub fn lt1_lmc(lmc: &Lmc, s: &str, t: &str) -> Result<bool> {
    let (s, t) = (lmc.state(s)?, lmc.state(t)?);
    if s == t {
        return Ok(true);
    }
    if !lmc.same_label(s, t) {
        return Ok(false);
    }
    Ok(!distance_one_set(lmc).contains(&(s, t)))
}

/// The exact distance matrix.
pub fn distance_exact(lmc: &Lmc) -> DistanceMatrix {
    distance_exact_with_policy(lmc).0
}

/// The exact distance matrix together with an optimal policy.
pub fn distance_exact_with_policy(lmc: &Lmc) -> (DistanceMatrix, Policy) {
    let chain = lmc_chain(lmc);
    let block = chain.partition();
    let mut sys = PairSystem::new(&chain, &block, true);
    sys.all_unknown();
    let (values, cells) = sys.solve();
    let n = lmc.len();
    let d = DistanceMatrix::from_fn(n, |s, t| sys.pair_value(s, t, &values));
    let mut policy = Policy::default();
    for (p, (s, t)) in sys.nodes.iter().enumerate() {
        let w = to_coupling(lmc, *s, *t, &cells[p]);
        policy.choice.insert((*t, *s), w.transpose());
        policy.choice.insert((*s, *t), w);
    }
    (d, policy)
}

fn to_coupling(lmc: &Lmc, s: StateIx, t: StateIx, cells: &Cells<Rational>) -> Coupling {
    let mut entries: BTreeMap<(StateIx, StateIx), Rational> = BTreeMap::new();
    for (u, v, w) in cells {
        *entries.entry((*u, *v)).or_default() += w;
    }
    Coupling {
        entries,
        left: lmc.trans(s).clone(),
        right: lmc.trans(t).clone(),
    }
}

/// Exact distance of a single pair, exploring only the pairs reachable from it.
pub fn distance_between(lmc: &Lmc, s: StateIx, t: StateIx) -> Rational {
    pair_distance(&lmc_chain(lmc), s, t)
}

/// Distance of one pair on a generic chain.
pub(crate) fn pair_distance<S: crate::bisim::MassKey>(chain: &Chain<S>, s: StateIx, t: StateIx) -> S {
    let block = chain.partition();
    let mut sys = PairSystem::new(chain, &block, true);
    if sys.is_zero(s, t) {
        return S::zero();
    }
    if sys.is_mismatch(s, t) {
        return S::one();
    }
    sys.close_over([(s, t)]);
    let (values, _) = sys.solve();
    sys.pair_value(s, t, &values)
}

/// Probability of reaching a label-mismatched pair in the pair chain induced
/// by `policy`, as a matrix over all pairs.
pub fn policy_value(lmc: &Lmc, policy: &Policy) -> Result<DistanceMatrix> {
    let chain = lmc_chain(lmc);
    let block = chain.partition();
    let mut sys = PairSystem::new(&chain, &block, false);
    sys.all_unknown();
    let mut cells = Vec::with_capacity(sys.nodes.len());
    for (s, t) in &sys.nodes {
        let w = policy.choice.get(&(*s, *t)).ok_or_else(|| {
            Error::Coupling(format!("no coupling for ({}, {})", lmc.id(*s), lmc.id(*t)))
        })?;
        if !check_coupling(w) || w.left != *lmc.trans(*s) || w.right != *lmc.trans(*t) {
            return Err(Error::Coupling(format!(
                "coupling for ({}, {}) has wrong marginals",
                lmc.id(*s),
                lmc.id(*t)
            )));
        }
        cells.push(
            w.entries
                .iter()
                .map(|((u, v), x)| (*u, *v, x.clone()))
                .collect::<Vec<_>>(),
        );
    }
    let live: Vec<Option<usize>> = (0..sys.nodes.len()).map(Some).collect();
    let values = sys.evaluate(&live, &cells);
    Ok(DistanceMatrix::from_fn(lmc.len(), |s, t| sys.pair_value(s, t, &values)))
}

/// Checks `d(s,s) = 0`, symmetry, range and the triangle inequality.
pub fn is_pseudometric(d: &DistanceMatrix) -> bool {
    let n = d.num_states();
    let (zero, one) = (Rational::zero(), Rational::one());
    for s in 0..n {
        if *d.get(s, s) != zero {
            return false;
        }
        for t in 0..n {
            let v = d.get(s, t);
            if v != d.get(t, s) || *v < zero || *v > one {
                return false;
            }
            for u in 0..n {
                if *v > d.get(s, u) + d.get(u, t) {
                    return false;
                }
            }
        }
    }
    true
}
