//! Distance below one under general strategies: equalizable state sets as a
//! greatest fixed point over set families, the support pair graph, and the
//! reduction from equalizability of a pair to the distance-below-one problem.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::feasible_point;
use crate::models::{Mdp, MdpBuilder, StateIx, DEFAULT_ACTION};
use crate::numeric::Rational;

/// Largest MDP accepted unless overridden.
pub const DEFAULT_CAP: usize = 12;

/// Environment variable overriding [`DEFAULT_CAP`].
pub const CAP_ENV: &str = "BISIMDIST_CAP";

/// States are packed into 64-bit masks.
const HARD_CAP: usize = 64;

/// The cap from `BISIMDIST_CAP`, or [`DEFAULT_CAP`].
pub fn default_cap() -> usize {
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP)
}

fn check_cap(mdp: &Mdp, cap: usize) -> Result<()> {
    let cap = cap.min(HARD_CAP);
    if mdp.len() > cap {
        return Err(Error::CapExceeded {
            states: mdp.len(),
            cap,
        });
    }
    Ok(())
}

type Set = u64;

fn bits(set: Set) -> impl Iterator<Item = StateIx> {
    (0..HARD_CAP).filter(move |s| set >> s & 1 == 1)
}

fn is_single(set: Set) -> bool {
    set.count_ones() == 1
}

struct Context<'a> {
    mdp: &'a Mdp,
    label: Vec<usize>,
    succ: Vec<Set>,
}

impl<'a> Context<'a> {
    fn new(mdp: &'a Mdp) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let label = (0..mdp.len())
            .map(|s| {
                let fresh = ids.len();
                *ids.entry(mdp.label(s)).or_insert(fresh)
            })
            .collect();
        let succ = (0..mdp.len())
            .map(|s| mdp.successors(s).into_iter().fold(0, |m, t| m | 1 << t))
            .collect();
        Context { mdp, label, succ }
    }

    fn homogeneous(&self, set: Set) -> bool {
        let mut it = bits(set).map(|s| self.label[s]);
        match it.next() {
            Some(l) => it.all(|m| m == l),
            None => false,
        }
    }

    fn successors(&self, set: Set) -> Set {
        bits(set).fold(0, |m, s| m | self.succ[s])
    }

    /// Label-homogeneous sets with at least two states that the witnesses of
    /// `seeds` can refer to, transitively.
    fn universe(&self, seeds: impl IntoIterator<Item = Set>) -> HashSet<Set> {
        let mut out = HashSet::new();
        let mut stack: Vec<Set> = Vec::new();
        for x in seeds {
            if !is_single(x) && self.homogeneous(x) && out.insert(x) {
                stack.push(x);
            }
        }
        while let Some(x) = stack.pop() {
            let succ = self.successors(x);
            let mut by_label: BTreeMap<usize, Set> = BTreeMap::new();
            for t in bits(succ) {
                *by_label.entry(self.label[t]).or_default() |= 1 << t;
            }
            for class in by_label.into_values() {
                let mut y = class;
                while y != 0 {
                    if !is_single(y) && out.insert(y) {
                        stack.push(y);
                    }
                    y = (y - 1) & class;
                }
            }
        }
        out
    }

    /// Target sets of the groups of a witness for `x`, if one exists with
    /// classes drawn from `alive` (plus all singletons).
    fn witness(&self, x: Set, alive: &HashSet<Set>) -> Option<Vec<Set>> {
        let succ = self.successors(x);
        let mut candidates: Vec<Set> = alive.iter().copied().filter(|y| y & !succ == 0).collect();
        candidates.extend(bits(succ).map(|t| 1 << t));
        candidates.sort_unstable();
        candidates.dedup();
        // Merging groups keeps the balance equations, so maximal classes suffice.
        let classes: Vec<Set> = candidates
            .iter()
            .copied()
            .filter(|y| !candidates.iter().any(|z| z != y && z & y == *y))
            .collect();
        let options: HashMap<StateIx, Vec<usize>> = bits(succ)
            .map(|t| (t, (0..classes.len()).filter(|c| classes[*c] >> t & 1 == 1).collect()))
            .collect();

        let states: Vec<StateIx> = bits(x).collect();
        let mut blocks: Vec<(usize, Vec<Assignment>)> = Vec::new();
        for (si, s) in states.iter().enumerate() {
            for (_, d) in self.mdp.actions(*s) {
                blocks.push((si, assignments(d.iter().map(|(t, p)| (*t, p.clone())), &options)));
            }
        }
        let mut chosen = Vec::with_capacity(blocks.len());
        search(&blocks, states.len(), &mut chosen)
    }
}

/// Class masses and class target sets of one action under one choice of
/// class per successor.
#[derive(Clone, PartialEq)]
struct Assignment {
    mass: BTreeMap<usize, Rational>,
    targets: BTreeMap<usize, Set>,
}

fn assignments(
    succ: impl Iterator<Item = (StateIx, Rational)>,
    options: &HashMap<StateIx, Vec<usize>>,
) -> Vec<Assignment> {
    let mut out = vec![Assignment {
        mass: BTreeMap::new(),
        targets: BTreeMap::new(),
    }];
    for (t, p) in succ {
        let mut next: Vec<Assignment> = Vec::new();
        for a in &out {
            for c in &options[&t] {
                let mut b = a.clone();
                *b.mass.entry(*c).or_insert_with(Rational::zero) += &p;
                *b.targets.entry(*c).or_default() |= 1 << t;
                if !next.iter().any(|n| n.mass == b.mass) {
                    next.push(b);
                }
            }
        }
        out = next;
    }
    out
}

fn search<'b>(
    blocks: &'b [(usize, Vec<Assignment>)],
    num_states: usize,
    chosen: &mut Vec<&'b Assignment>,
) -> Option<Vec<Set>> {
    if chosen.len() == blocks.len() {
        return balanced(blocks, num_states, chosen);
    }
    let (_, opts) = &blocks[chosen.len()];
    for a in opts {
        chosen.push(a);
        let found = search(blocks, num_states, chosen);
        chosen.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Feasibility of the action weights and class masses for a fixed choice:
/// every state puts the same mass on every class.
fn balanced(blocks: &[(usize, Vec<Assignment>)], num_states: usize, chosen: &[&Assignment]) -> Option<Vec<Set>> {
    let used: BTreeSet<usize> = chosen.iter().flat_map(|a| a.mass.keys().copied()).collect();
    let upsilon: HashMap<usize, usize> = used.iter().enumerate().map(|(i, c)| (*c, blocks.len() + i)).collect();
    let width = blocks.len() + used.len();
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for s in 0..num_states {
        let mut sum = vec![Rational::zero(); width];
        for (k, (owner, _)) in blocks.iter().enumerate() {
            if *owner == s {
                sum[k] = Rational::one();
            }
        }
        rows.push(sum);
        rhs.push(Rational::one());
        for c in &used {
            let mut row = vec![Rational::zero(); width];
            for (k, (owner, _)) in blocks.iter().enumerate() {
                if *owner == s {
                    if let Some(p) = chosen[k].mass.get(c) {
                        row[k] = p.clone();
                    }
                }
            }
            row[upsilon[c]] = -Rational::one();
            rows.push(row);
            rhs.push(Rational::zero());
        }
    }
    feasible_point(&rows, &rhs)?;
    let mut groups: BTreeMap<usize, Set> = BTreeMap::new();
    for a in chosen {
        for (c, t) in &a.targets {
            *groups.entry(*c).or_default() |= t;
        }
    }
    Some(groups.into_values().collect())
}

/// The equalizable sets among a universe of label-homogeneous sets, as the
/// greatest family in which every member has a witness over members.
#[derive(Clone, Debug)]
pub struct EqualizableFamily {
    universe: HashSet<Set>,
    alive: HashSet<Set>,
    rounds: Vec<usize>,
}

impl EqualizableFamily {
    /// Family over every label-homogeneous set of states.
    pub fn compute(mdp: &Mdp, cap: usize) -> Result<Self> {
        check_cap(mdp, cap)?;
        let ctx = Context::new(mdp);
        let mut by_label: BTreeMap<usize, Set> = BTreeMap::new();
        for s in 0..mdp.len() {
            *by_label.entry(ctx.label[s]).or_default() |= 1 << s;
        }
        Ok(Self::fixed_point(&ctx, ctx.universe(by_label.into_values())))
    }

    /// Family over the sets relevant to `seeds`; membership of every seed is
    /// decided.
    pub fn for_seeds(mdp: &Mdp, seeds: &[Vec<StateIx>], cap: usize) -> Result<Self> {
        check_cap(mdp, cap)?;
        let ctx = Context::new(mdp);
        let masks = seeds.iter().map(|s| s.iter().fold(0, |m, x| m | 1 << x));
        Ok(Self::fixed_point(&ctx, ctx.universe(masks)))
    }

    fn fixed_point(ctx: &Context, universe: HashSet<Set>) -> Self {
        let mut alive = universe.clone();
        let mut rounds = vec![alive.len()];
        let mut cache: HashMap<Set, Vec<Set>> = HashMap::new();
        loop {
            let mut current: Vec<Set> = alive.iter().copied().collect();
            current.sort_unstable();
            let member = |g: &Set| is_single(*g) || alive.contains(g);
            let verdicts: Vec<(Set, Option<Vec<Set>>)> = current
                .par_iter()
                .map(|x| match cache.get(x) {
                    Some(w) if w.iter().all(member) => (*x, Some(w.clone())),
                    _ => (*x, ctx.witness(*x, &alive)),
                })
                .collect();
            let mut removed = false;
            for (x, w) in verdicts {
                match w {
                    Some(w) => {
                        cache.insert(x, w);
                    }
                    None => {
                        alive.remove(&x);
                        removed = true;
                    }
                }
            }
            rounds.push(alive.len());
            if !removed {
                break;
            }
        }
        EqualizableFamily {
            universe,
            alive,
            rounds,
        }
    }

    /// Membership of a set of states; `None` for sets outside the computed
    /// universe. The empty set is not a member.
    pub fn contains(&self, states: &[StateIx]) -> Option<bool> {
        let set = states.iter().fold(0, |m, s| m | 1 << s);
        if set == 0 {
            Some(false)
        } else if is_single(set) {
            Some(true)
        } else if self.universe.contains(&set) {
            Some(self.alive.contains(&set))
        } else {
            None
        }
    }

    /// Members with at least two states, each sorted, in ascending order.
    pub fn members(&self) -> Vec<Vec<StateIx>> {
        let mut sets: Vec<Set> = self.alive.iter().copied().collect();
        sets.sort_unstable();
        sets.into_iter().map(|s| bits(s).collect()).collect()
    }

    /// Number of surviving non-singleton sets, initially and after each round.
    pub fn rounds(&self) -> &[usize] {
        &self.rounds
    }
}

fn indices(mdp: &Mdp, ids: &[&str]) -> Result<Vec<StateIx>> {
    ids.iter().map(|id| mdp.state(id)).collect()
}

/// Whether some general strategy makes all of `states` pairwise bisimilar.
pub fn equalizable(mdp: &Mdp, states: &[&str], cap: usize) -> Result<bool> {
    if states.is_empty() {
        return Err(Error::invalid("equalizable", "the state set is empty"));
    }
    let set = indices(mdp, states)?;
    let family = EqualizableFamily::for_seeds(mdp, std::slice::from_ref(&set), cap)?;
    Ok(family.contains(&set).unwrap_or(false))
}

/// Ordered pairs that some general strategy makes bisimilar, diagonal included.
pub fn pair_zero_set(mdp: &Mdp, cap: usize) -> Result<BTreeSet<(StateIx, StateIx)>> {
    check_cap(mdp, cap)?;
    let n = mdp.len();
    let pairs: Vec<Vec<StateIx>> = (0..n)
        .flat_map(|s| (s + 1..n).map(move |t| vec![s, t]))
        .filter(|p| mdp.same_label(p[0], p[1]))
        .collect();
    let family = EqualizableFamily::for_seeds(mdp, &pairs, cap)?;
    let mut out: BTreeSet<(StateIx, StateIx)> = (0..n).map(|s| (s, s)).collect();
    for p in pairs {
        if family.contains(&p) == Some(true) {
            out.insert((p[0], p[1]));
            out.insert((p[1], p[0]));
        }
    }
    Ok(out)
}

/// Graph on ordered state pairs: zero and mismatched pairs carry only a
/// self-loop; every other pair `(s1, s2)` has an edge to each `(t1, t2)` with
/// `t_i` a successor of `s_i` under some action.
#[derive(Clone, Debug)]
pub struct PairGraph {
    n: usize,
    zero: Vec<bool>,
    mismatch: Vec<bool>,
    succ: Vec<Vec<StateIx>>,
}

impl PairGraph {
    pub fn new(mdp: &Mdp, zero: &BTreeSet<(StateIx, StateIx)>) -> Self {
        let n = mdp.len();
        let mut z = vec![false; n * n];
        for (s, t) in zero {
            z[s * n + t] = true;
        }
        let mismatch = (0..n * n).map(|i| !mdp.same_label(i / n, i % n)).collect();
        let succ = (0..n).map(|s| mdp.successors(s).into_iter().collect()).collect();
        PairGraph {
            n,
            zero: z,
            mismatch,
            succ,
        }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self, s: StateIx, t: StateIx) -> bool {
        self.zero[s * self.n + t]
    }

    pub fn is_mismatch(&self, s: StateIx, t: StateIx) -> bool {
        self.mismatch[s * self.n + t]
    }

    pub fn successors(&self, s: StateIx, t: StateIx) -> Vec<(StateIx, StateIx)> {
        if self.is_zero(s, t) || self.is_mismatch(s, t) {
            return vec![(s, t)];
        }
        self.succ[s]
            .iter()
            .flat_map(|a| self.succ[t].iter().map(move |b| (*a, *b)))
            .collect()
    }

    pub fn has_edge(&self, from: (StateIx, StateIx), to: (StateIx, StateIx)) -> bool {
        self.successors(from.0, from.1).contains(&to)
    }

    /// Whether a zero pair is reachable from `(s, t)`.
    pub fn reaches_zero(&self, s: StateIx, t: StateIx) -> bool {
        let mut seen = vec![false; self.n * self.n];
        let mut queue = VecDeque::from([(s, t)]);
        seen[s * self.n + t] = true;
        while let Some((a, b)) = queue.pop_front() {
            if self.is_zero(a, b) {
                return true;
            }
            for (c, d) in self.successors(a, b) {
                if !std::mem::replace(&mut seen[c * self.n + d], true) {
                    queue.push_back((c, d));
                }
            }
        }
        false
    }
}

/// The pair graph of `mdp` with its zero pairs computed by [`pair_zero_set`].
pub fn pair_graph(mdp: &Mdp, cap: usize) -> Result<PairGraph> {
    Ok(PairGraph::new(mdp, &pair_zero_set(mdp, cap)?))
}

/// Whether some general strategy puts `s` and `t` at distance below one.
pub fn decide_lt1(mdp: &Mdp, s: &str, t: &str, cap: usize) -> Result<bool> {
    check_cap(mdp, cap)?;
    let (s, t) = (mdp.state(s)?, mdp.state(t)?);
    if s == t {
        return Ok(true);
    }
    // Label-equal pairs reachable through label-equal pairs; the first zero
    // pair on any path is reached through non-zero pairs only.
    let n = mdp.len();
    let mut seen = vec![false; n * n];
    let mut reached: Vec<(StateIx, StateIx)> = Vec::new();
    let mut queue = VecDeque::new();
    if mdp.same_label(s, t) {
        seen[s * n + t] = true;
        queue.push_back((s, t));
    }
    while let Some((a, b)) = queue.pop_front() {
        reached.push((a, b));
        for c in mdp.successors(a) {
            for d in mdp.successors(b) {
                if mdp.same_label(c, d) && !std::mem::replace(&mut seen[c * n + d], true) {
                    queue.push_back((c, d));
                }
            }
        }
    }
    if reached.iter().any(|(a, b)| a == b) {
        return Ok(true);
    }
    let seeds: Vec<Vec<StateIx>> = reached.iter().map(|(a, b)| vec![*a, *b]).collect();
    let family = EqualizableFamily::for_seeds(mdp, &seeds, cap)?;
    Ok(seeds.iter().any(|p| family.contains(p) == Some(true)))
}

/// Output of [`reduce_bisim_to_lt1`]: the doubled MDP and the images of the
/// two input states.
#[derive(Clone, Debug, PartialEq)]
pub struct Lt1Reduction {
    pub mdp: Mdp,
    pub left: String,
    pub right: String,
}

fn fresh(base: &str, taken: &HashSet<String>) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) {
        name.push('\'');
    }
    name
}

/// Two copies of `mdp` in which every action also moves to a fresh `$` state
/// with probability 1/2, halving its other probabilities; the `$` state of
/// copy `i` returns to the copy of `s_i`. The pair `{s1, s2}` is equalizable
/// in `mdp` iff the returned states are at distance below one under some
/// general strategy.
pub fn reduce_bisim_to_lt1(mdp: &Mdp, s1: &str, s2: &str) -> Result<Lt1Reduction> {
    let starts = [mdp.state(s1)?, mdp.state(s2)?];
    let name = |s: StateIx, i: usize| format!("({},{})", mdp.id(s), i);
    let mut taken: HashSet<String> = (0..mdp.len())
        .flat_map(|s| [name(s, 1), name(s, 2)])
        .collect();
    let labels: HashSet<String> = mdp.states().iter().map(|s| s.label.clone()).collect();
    let dollar = fresh("$", &labels);
    let half = Rational::new(1.into(), 2.into());
    let mut b = MdpBuilder::new();
    for (i, start) in [1, 2].into_iter().zip(starts) {
        let sink = fresh(&format!("${i}"), &taken);
        taken.insert(sink.clone());
        for s in 0..mdp.len() {
            b.add_state(&name(s, i), mdp.label(s));
        }
        b.add_state(&sink, &dollar);
        for s in 0..mdp.len() {
            for (a, d) in mdp.actions(s) {
                for (t, p) in d.iter() {
                    b.add_edge(&name(s, i), a, &name(*t, i), p * &half);
                }
                b.add_edge(&name(s, i), a, &sink, half.clone());
            }
        }
        b.add_edge(&sink, DEFAULT_ACTION, &name(start, i), Rational::one());
    }
    Ok(Lt1Reduction {
        mdp: b.build()?,
        left: name(starts[0], 1),
        right: name(starts[1], 2),
    })
}
