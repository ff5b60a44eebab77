//! Finite labelled models with exact transition probabilities.
//!
//! States are identified by string ids and stored in lexicographic id order,
//! so a state's index is a canonical function of the model. Transitions never
//! carry probability zero: the support of a distribution is exactly its set of
//! stored entries.

mod examples;
mod json;
mod strategy;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numeric::{format_rational, Rational};

pub use examples::{chain_state, gen_example, non3_alternating_strategy, Example, UNCOLOURED};
pub use json::{
    parse_fm_strategy, parse_model, parse_pa, parse_strategy, serialize_fm_strategy,
    serialize_model, serialize_pa, serialize_strategy, Model,
};
pub use strategy::{FiniteMemoryStrategy, MemorylessStrategy};

/// Index of a state inside its model.
pub type StateIx = usize;

/// A finitely supported probability distribution with strictly positive
/// entries summing to exactly one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Distribution<K: Ord = StateIx> {
    entries: BTreeMap<K, Rational>,
}

impl<K: Ord + Clone> Distribution<K> {
    /// Builds a distribution, dropping zero weights. Fails on negative
    /// weights or when the total is not exactly one.
    pub fn new(weights: impl IntoIterator<Item = (K, Rational)>) -> Result<Self> {
        let mut entries: BTreeMap<K, Rational> = BTreeMap::new();
        for (k, p) in weights {
            if p < Rational::zero() {
                return Err(Error::invalid("distribution", "negative probability"));
            }
            *entries.entry(k).or_insert_with(Rational::zero) += p;
        }
        entries.retain(|_, p| !p.is_zero());
        let sum: Rational = entries.values().cloned().sum();
        if !sum.is_one() {
            return Err(Error::BadSum {
                location: "distribution".into(),
                sum: format_rational(&sum),
            });
        }
        Ok(Distribution { entries })
    }

    pub fn dirac(k: K) -> Self {
        Distribution {
            entries: BTreeMap::from([(k, Rational::one())]),
        }
    }

    /// Uniform distribution over the given (deduplicated, nonempty) keys.
    pub fn uniform(keys: impl IntoIterator<Item = K>) -> Self {
        let keys: BTreeSet<K> = keys.into_iter().collect();
        assert!(!keys.is_empty(), "uniform distribution over an empty set");
        let p = Rational::new(1.into(), (keys.len() as i64).into());
        Distribution {
            entries: keys.into_iter().map(|k| (k, p.clone())).collect(),
        }
    }

    pub fn prob(&self, k: &K) -> Rational {
        self.entries.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Rational)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.entries.keys()
    }

    pub fn contains(&self, k: &K) -> bool {
        self.entries.contains_key(k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability mass assigned to the keys selected by `pred`.
    pub fn mass(&self, mut pred: impl FnMut(&K) -> bool) -> Rational {
        self.entries
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(_, p)| p.clone())
            .sum()
    }

    pub fn map_keys<J: Ord + Clone>(&self, mut f: impl FnMut(&K) -> J) -> Distribution<J> {
        let mut entries: BTreeMap<J, Rational> = BTreeMap::new();
        for (k, p) in &self.entries {
            *entries.entry(f(k)).or_insert_with(Rational::zero) += p.clone();
        }
        Distribution { entries }
    }
}

/// Id and observation label of a state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateInfo {
    pub id: String,
    pub label: String,
}

fn index_states(states: &[StateInfo]) -> HashMap<String, StateIx> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), i))
        .collect()
}

/// Finite labelled Markov chain.
#[derive(Clone, Debug)]
pub struct Lmc {
    states: Vec<StateInfo>,
    index: HashMap<String, StateIx>,
    trans: Vec<Distribution>,
}

impl PartialEq for Lmc {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states && self.trans == other.trans
    }
}

impl Lmc {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn id(&self, s: StateIx) -> &str {
        &self.states[s].id
    }

    pub fn label(&self, s: StateIx) -> &str {
        &self.states[s].label
    }

    pub fn index_of(&self, id: &str) -> Option<StateIx> {
        self.index.get(id).copied()
    }

    /// Looks up a state id, reporting unknown ids as errors.
    pub fn state(&self, id: &str) -> Result<StateIx> {
        self.index_of(id).ok_or_else(|| Error::UnknownState {
            location: "lmc".into(),
            state: id.to_string(),
        })
    }

    pub fn trans(&self, s: StateIx) -> &Distribution {
        &self.trans[s]
    }

    pub fn same_label(&self, s: StateIx, t: StateIx) -> bool {
        self.states[s].label == self.states[t].label
    }
}

/// Finite labelled MDP. Actions of each state are kept sorted by name.
#[derive(Clone, Debug)]
pub struct Mdp {
    states: Vec<StateInfo>,
    index: HashMap<String, StateIx>,
    actions: Vec<Vec<(String, Distribution)>>,
}

impl PartialEq for Mdp {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states && self.actions == other.actions
    }
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn id(&self, s: StateIx) -> &str {
        &self.states[s].id
    }

    pub fn label(&self, s: StateIx) -> &str {
        &self.states[s].label
    }

    pub fn index_of(&self, id: &str) -> Option<StateIx> {
        self.index.get(id).copied()
    }

    pub fn state(&self, id: &str) -> Result<StateIx> {
        self.index_of(id).ok_or_else(|| Error::UnknownState {
            location: "mdp".into(),
            state: id.to_string(),
        })
    }

    /// `(action, distribution)` pairs available in `s`, sorted by action name.
    pub fn actions(&self, s: StateIx) -> &[(String, Distribution)] {
        &self.actions[s]
    }

    pub fn action(&self, s: StateIx, name: &str) -> Option<&Distribution> {
        self.actions[s]
            .binary_search_by(|(a, _)| a.as_str().cmp(name))
            .ok()
            .map(|i| &self.actions[s][i].1)
    }

    pub fn same_label(&self, s: StateIx, t: StateIx) -> bool {
        self.states[s].label == self.states[t].label
    }

    /// Union of the supports of all actions of `s`.
    pub fn successors(&self, s: StateIx) -> BTreeSet<StateIx> {
        self.actions[s]
            .iter()
            .flat_map(|(_, d)| d.support().copied())
            .collect()
    }

    /// True when every state has exactly one action.
    pub fn is_deterministic(&self) -> bool {
        self.actions.iter().all(|a| a.len() == 1)
    }

    /// The LMC obtained when every state has a single action.
    pub fn as_lmc(&self) -> Option<Lmc> {
        if !self.is_deterministic() {
            return None;
        }
        Some(Lmc {
            states: self.states.clone(),
            index: self.index.clone(),
            trans: self.actions.iter().map(|a| a[0].1.clone()).collect(),
        })
    }

    /// An MDP with one action `m` per state, mirroring `lmc`.
    pub fn from_lmc(lmc: &Lmc) -> Mdp {
        Mdp {
            states: lmc.states.clone(),
            index: lmc.index.clone(),
            actions: lmc
                .trans
                .iter()
                .map(|d| vec![(DEFAULT_ACTION.to_string(), d.clone())])
                .collect(),
        }
    }
}

/// Name of the single action of states without nondeterminism.
pub const DEFAULT_ACTION: &str = "m";

#[derive(Default)]
struct Staging {
    states: Vec<StateInfo>,
    edges: Vec<(String, String, String, Rational)>,
}

impl Staging {
    fn add_state(&mut self, id: &str, label: &str) {
        self.states.push(StateInfo {
            id: id.to_string(),
            label: label.to_string(),
        });
    }

    fn sorted_states(&self) -> Result<(Vec<StateInfo>, HashMap<String, StateIx>)> {
        let mut states = self.states.clone();
        states.sort_by(|a, b| a.id.cmp(&b.id));
        for w in states.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Duplicate {
                    kind: "state",
                    id: w[0].id.clone(),
                });
            }
        }
        let index = index_states(&states);
        Ok((states, index))
    }
}

/// Incremental constructor for [`Lmc`]. Zero-probability edges are dropped.
#[derive(Default)]
pub struct LmcBuilder {
    staging: Staging,
}

impl LmcBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(mut self, id: &str, label: &str) -> Self {
        self.staging.add_state(id, label);
        self
    }

    pub fn edge(mut self, from: &str, to: &str, prob: Rational) -> Self {
        self.add_edge(from, to, prob);
        self
    }

    pub fn add_state(&mut self, id: &str, label: &str) {
        self.staging.add_state(id, label);
    }

    pub fn add_edge(&mut self, from: &str, to: &str, prob: Rational) {
        self.staging
            .edges
            .push((from.into(), String::new(), to.into(), prob));
    }

    pub fn build(self) -> Result<Lmc> {
        let (states, index) = self.staging.sorted_states()?;
        let mut rows: Vec<Vec<(StateIx, Rational)>> = vec![Vec::new(); states.len()];
        let mut seen = BTreeSet::new();
        for (i, (from, _, to, p)) in self.staging.edges.into_iter().enumerate() {
            let loc = format!("transitions[{i}]");
            let s = lookup(&index, &from, &loc)?;
            let t = lookup(&index, &to, &loc)?;
            if !seen.insert((s, t)) {
                return Err(Error::Duplicate {
                    kind: "transition",
                    id: format!("{from} -> {to}"),
                });
            }
            rows[s].push((t, p));
        }
        let trans = rows
            .into_iter()
            .enumerate()
            .map(|(s, row)| {
                Distribution::new(row).map_err(|e| relocate(e, &format!("state `{}`", states[s].id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Lmc {
            states,
            index,
            trans,
        })
    }
}

/// Incremental constructor for [`Mdp`]. Zero-probability edges are dropped,
/// but an action with only zero edges is still an error.
#[derive(Default)]
pub struct MdpBuilder {
    staging: Staging,
}

impl MdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(mut self, id: &str, label: &str) -> Self {
        self.staging.add_state(id, label);
        self
    }

    pub fn edge(mut self, from: &str, action: &str, to: &str, prob: Rational) -> Self {
        self.add_edge(from, action, to, prob);
        self
    }

    pub fn add_state(&mut self, id: &str, label: &str) {
        self.staging.add_state(id, label);
    }

    pub fn add_edge(&mut self, from: &str, action: &str, to: &str, prob: Rational) {
        self.staging
            .edges
            .push((from.into(), action.into(), to.into(), prob));
    }

    pub fn build(self) -> Result<Mdp> {
        let (states, index) = self.staging.sorted_states()?;
        let mut rows: Vec<BTreeMap<String, Vec<(StateIx, Rational)>>> =
            vec![BTreeMap::new(); states.len()];
        let mut seen = BTreeSet::new();
        for (i, (from, action, to, p)) in self.staging.edges.into_iter().enumerate() {
            let loc = format!("transitions[{i}]");
            let s = lookup(&index, &from, &loc)?;
            let t = lookup(&index, &to, &loc)?;
            if !seen.insert((s, action.clone(), t)) {
                return Err(Error::Duplicate {
                    kind: "transition",
                    id: format!("{from} -{action}-> {to}"),
                });
            }
            rows[s].entry(action).or_default().push((t, p));
        }
        let mut actions = Vec::with_capacity(states.len());
        for (s, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::EmptyActions(states[s].id.clone()));
            }
            let mut acts = Vec::with_capacity(row.len());
            for (a, edges) in row {
                let d = Distribution::new(edges).map_err(|e| {
                    relocate(e, &format!("state `{}` action `{a}`", states[s].id))
                })?;
                acts.push((a, d));
            }
            actions.push(acts);
        }
        Ok(Mdp {
            states,
            index,
            actions,
        })
    }
}

fn lookup(index: &HashMap<String, StateIx>, id: &str, loc: &str) -> Result<StateIx> {
    index.get(id).copied().ok_or_else(|| Error::UnknownState {
        location: loc.to_string(),
        state: id.to_string(),
    })
}

fn relocate(err: Error, location: &str) -> Error {
    match err {
        Error::BadSum { sum, .. } => Error::BadSum {
            location: location.to_string(),
            sum,
        },
        Error::Invalid { message, .. } => Error::invalid(location, message),
        other => other,
    }
}

/// Probabilistic automaton over a finite alphabet with final states.
#[derive(Clone, Debug)]
pub struct ProbAutomaton {
    states: Vec<String>,
    index: HashMap<String, StateIx>,
    initial: StateIx,
    letters: Vec<String>,
    /// `delta[q][letter]`
    delta: Vec<Vec<Distribution>>,
    finals: BTreeSet<StateIx>,
}

impl PartialEq for ProbAutomaton {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states
            && self.initial == other.initial
            && self.letters == other.letters
            && self.delta == other.delta
            && self.finals == other.finals
    }
}

impl ProbAutomaton {
    /// Builds and validates an automaton. `delta` lists
    /// `(from, letter, to, prob)` and must be total on states x letters.
    pub fn new(
        states: &[&str],
        initial: &str,
        letters: &[&str],
        finals: &[&str],
        delta: &[(&str, &str, &str, Rational)],
    ) -> Result<Self> {
        let mut sorted: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Duplicate {
                    kind: "state",
                    id: w[0].clone(),
                });
            }
        }
        let index: HashMap<String, StateIx> =
            sorted.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let letters: Vec<String> = letters.iter().map(|s| s.to_string()).collect();
        for (i, a) in letters.iter().enumerate() {
            if letters[..i].contains(a) {
                return Err(Error::Duplicate {
                    kind: "letter",
                    id: a.clone(),
                });
            }
        }
        let initial_ix = lookup(&index, initial, "initial")?;
        let mut final_set = BTreeSet::new();
        for f in finals {
            final_set.insert(lookup(&index, f, "final")?);
        }
        let mut rows: Vec<Vec<Vec<(StateIx, Rational)>>> =
            vec![vec![Vec::new(); letters.len()]; sorted.len()];
        let mut seen = BTreeSet::new();
        for (i, (from, letter, to, p)) in delta.iter().enumerate() {
            let loc = format!("delta[{i}]");
            let q = lookup(&index, from, &loc)?;
            let r = lookup(&index, to, &loc)?;
            let a = letters
                .iter()
                .position(|l| l == letter)
                .ok_or_else(|| Error::invalid(&loc, format!("unknown letter `{letter}`")))?;
            if !seen.insert((q, a, r)) {
                return Err(Error::Duplicate {
                    kind: "transition",
                    id: format!("{from} -{letter}-> {to}"),
                });
            }
            if *p <= Rational::zero() {
                return Err(Error::invalid(&loc, "probability must be positive"));
            }
            rows[q][a].push((r, p.clone()));
        }
        let mut dist = Vec::with_capacity(sorted.len());
        for (q, row) in rows.into_iter().enumerate() {
            let mut per_letter = Vec::with_capacity(letters.len());
            for (a, edges) in row.into_iter().enumerate() {
                if edges.is_empty() {
                    return Err(Error::invalid(
                        format!("state `{}` letter `{}`", sorted[q], letters[a]),
                        "transition function is not total",
                    ));
                }
                per_letter.push(Distribution::new(edges).map_err(|e| {
                    relocate(e, &format!("state `{}` letter `{}`", sorted[q], letters[a]))
                })?);
            }
            dist.push(per_letter);
        }
        Ok(ProbAutomaton {
            states: sorted,
            index,
            initial: initial_ix,
            letters,
            delta: dist,
            finals: final_set,
        })
    }

    /// Checks the two preconditions of the automaton-to-MDP reduction.
    pub fn check_reduction_form(&self) -> Result<()> {
        if self.letters.len() != 2 {
            return Err(Error::AlphabetSize(self.letters.len()));
        }
        if self.finals.contains(&self.initial) {
            return Err(Error::InitialFinal(self.states[self.initial].clone()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn index_of(&self, q: &str) -> Option<StateIx> {
        self.index.get(q).copied()
    }

    pub fn initial(&self) -> StateIx {
        self.initial
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn is_final(&self, q: StateIx) -> bool {
        self.finals.contains(&q)
    }

    pub fn finals(&self) -> &BTreeSet<StateIx> {
        &self.finals
    }

    /// `delta(q, letters[letter])`
    pub fn delta(&self, q: StateIx, letter: usize) -> &Distribution {
        &self.delta[q][letter]
    }

    /// State distribution after reading `word` (letter indices) from q0.
    pub fn run(&self, word: &[usize]) -> Vec<Rational> {
        let mut cur = vec![Rational::zero(); self.states.len()];
        cur[self.initial] = Rational::one();
        for &a in word {
            let mut next = vec![Rational::zero(); self.states.len()];
            for (q, w) in cur.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                for (r, p) in self.delta[q][a].iter() {
                    next[*r] += w * p;
                }
            }
            cur = next;
        }
        cur
    }

    /// Acceptance probability of a word given as letter indices.
    pub fn accept_prob(&self, word: &[usize]) -> Rational {
        let dist = self.run(word);
        self.finals.iter().map(|q| dist[*q].clone()).sum()
    }

    /// Renders a word of letter indices as a string of letter names.
    pub fn word_text(&self, word: &[usize]) -> String {
        word.iter().map(|a| self.letters[*a].as_str()).collect()
    }
}
