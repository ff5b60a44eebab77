//! LMCs induced by memoryless and finite-memory strategies.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::models::{FiniteMemoryStrategy, Lmc, LmcBuilder, Mdp, MemorylessStrategy, StateIx};
use crate::numeric::Rational;

/// An induced LMC with the origin of each of its states.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedLmc {
    pub lmc: Lmc,
    /// MDP state and memory cell (if any) behind each induced state.
    pub origin: Vec<(StateIx, Option<String>)>,
}

impl InducedLmc {
    /// Induced state for an MDP state and memory cell.
    pub fn find(&self, mdp_state: StateIx, memory: Option<&str>) -> Option<StateIx> {
        self.origin
            .iter()
            .position(|(s, m)| *s == mdp_state && m.as_deref() == memory)
    }
}

/// `τ(s)(t) = Σ_m a(s)(m) φ(s,m)(t)` on the state space of `mdp`.
pub fn induce_memoryless(mdp: &Mdp, strategy: &MemorylessStrategy) -> Result<InducedLmc> {
    strategy.validate(mdp)?;
    let mut b = LmcBuilder::new();
    for s in mdp.states() {
        b.add_state(&s.id, &s.label);
    }
    for s in 0..mdp.len() {
        let mut row: BTreeMap<StateIx, Rational> = BTreeMap::new();
        for (a, pa) in strategy.choice[mdp.id(s)].iter() {
            let d = mdp.action(s, a).expect("validated");
            for (t, p) in d.iter() {
                *row.entry(*t).or_default() += pa * p;
            }
        }
        for (t, p) in row {
            b.add_edge(mdp.id(s), mdp.id(t), p);
        }
    }
    Ok(InducedLmc {
        lmc: b.build()?,
        origin: (0..mdp.len()).map(|s| (s, None)).collect(),
    })
}

/// Product of `mdp` with the strategy memory, restricted to the pairs
/// reachable from `(s, initial_memory)` for every state `s`. Induced ids are
/// `"state@memory"`.
pub fn induce_finite_memory(mdp: &Mdp, strategy: &FiniteMemoryStrategy) -> Result<InducedLmc> {
    strategy.validate(mdp)?;
    let mut ids: HashMap<(StateIx, String), usize> = HashMap::new();
    let mut order: Vec<(StateIx, String)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut visit = |key: (StateIx, String), order: &mut Vec<(StateIx, String)>, queue: &mut VecDeque<usize>| {
        *ids.entry(key.clone()).or_insert_with(|| {
            queue.push_back(order.len());
            order.push(key);
            order.len() - 1
        })
    };
    for s in 0..mdp.len() {
        visit((s, strategy.initial_memory.clone()), &mut order, &mut queue);
    }
    let mut edges: Vec<BTreeMap<usize, Rational>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (s, mem) = order[i].clone();
        let id = mdp.id(s);
        let choice = strategy.choice.get(&(id.to_string(), mem.clone())).ok_or_else(|| {
            Error::Strategy(format!("no choice for state `{id}` in memory `{mem}`"))
        })?;
        let mut row: BTreeMap<usize, Rational> = BTreeMap::new();
        for (a, pa) in choice.iter() {
            let d = mdp.action(s, a).expect("validated");
            for (t, p) in d.iter() {
                let key = (id.to_string(), mem.clone(), a.clone(), mdp.id(*t).to_string());
                let next = strategy.update.get(&key).ok_or_else(|| {
                    Error::Strategy(format!(
                        "no memory update for state `{id}`, memory `{mem}`, action `{a}`, successor `{}`",
                        mdp.id(*t)
                    ))
                })?;
                let j = visit((*t, next.clone()), &mut order, &mut queue);
                *row.entry(j).or_default() += pa * p;
            }
        }
        if edges.len() <= i {
            edges.resize_with(i + 1, BTreeMap::new);
        }
        edges[i] = row;
    }
    let name = |i: usize| format!("{}@{}", mdp.id(order[i].0), order[i].1);
    let mut b = LmcBuilder::new();
    for (i, (s, _)) in order.iter().enumerate() {
        b.add_state(&name(i), mdp.label(*s));
    }
    for (i, row) in edges.iter().enumerate() {
        for (j, p) in row {
            b.add_edge(&name(i), &name(*j), p.clone());
        }
    }
    let lmc = b.build()?;
    let mut origin = vec![(0, None); lmc.len()];
    for (i, (s, m)) in order.iter().enumerate() {
        origin[lmc.index_of(&name(i)).expect("built")] = (*s, Some(m.clone()));
    }
    Ok(InducedLmc { lmc, origin })
}
