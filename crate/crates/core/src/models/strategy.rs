use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::{Distribution, Mdp};
use crate::numeric::Rational;

/// Per-state distribution over action names.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MemorylessStrategy {
    pub choice: BTreeMap<String, Distribution<String>>,
}

impl MemorylessStrategy {
    /// Uniform choice over `Act(s)` in every state.
    pub fn uniform(mdp: &Mdp) -> Self {
        let choice = (0..mdp.len())
            .map(|s| {
                let acts = mdp.actions(s).iter().map(|(a, _)| a.clone());
                (mdp.id(s).to_string(), Distribution::uniform(acts))
            })
            .collect();
        MemorylessStrategy { choice }
    }

    /// Always picks the lexicographically first action, except where `picks`
    /// names another one.
    pub fn pure(mdp: &Mdp, picks: &[(&str, &str)]) -> Result<Self> {
        let mut strategy = Self::first_action(mdp);
        for (state, action) in picks {
            let s = mdp.state(state)?;
            if mdp.action(s, action).is_none() {
                return Err(Error::UnknownAction {
                    location: format!("state `{state}`"),
                    action: action.to_string(),
                });
            }
            strategy
                .choice
                .insert(state.to_string(), Distribution::dirac(action.to_string()));
        }
        Ok(strategy)
    }

    fn first_action(mdp: &Mdp) -> Self {
        let choice = (0..mdp.len())
            .map(|s| {
                (
                    mdp.id(s).to_string(),
                    Distribution::dirac(mdp.actions(s)[0].0.clone()),
                )
            })
            .collect();
        MemorylessStrategy { choice }
    }

    /// Replaces the choice at one state.
    pub fn set(&mut self, state: &str, weights: &[(&str, Rational)]) -> Result<()> {
        let d = Distribution::new(weights.iter().map(|(a, p)| (a.to_string(), p.clone())))?;
        self.choice.insert(state.to_string(), d);
        Ok(())
    }

    /// Checks coverage of every state and that supports lie inside `Act(s)`.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        for s in 0..mdp.len() {
            let id = mdp.id(s);
            let d = self
                .choice
                .get(id)
                .ok_or_else(|| Error::Strategy(format!("no choice for state `{id}`")))?;
            for a in d.support() {
                if mdp.action(s, a).is_none() {
                    return Err(Error::Strategy(format!(
                        "action `{a}` is not available in state `{id}`"
                    )));
                }
            }
        }
        for id in self.choice.keys() {
            if mdp.index_of(id).is_none() {
                return Err(Error::Strategy(format!("unknown state `{id}`")));
            }
        }
        Ok(())
    }
}

/// Strategy with a finite memory: the action choice depends on the current
/// state and memory cell, and the memory is updated after every step.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FiniteMemoryStrategy {
    pub memory: Vec<String>,
    pub initial_memory: String,
    /// `(state, memory) -> distribution over actions`
    pub choice: BTreeMap<(String, String), Distribution<String>>,
    /// `(state, memory, action, next state) -> next memory`
    pub update: BTreeMap<(String, String, String, String), String>,
}

impl FiniteMemoryStrategy {
    /// A one-cell memory strategy that behaves like `strategy`.
    pub fn from_memoryless(mdp: &Mdp, strategy: &MemorylessStrategy) -> Self {
        let cell = "0".to_string();
        let mut fm = FiniteMemoryStrategy {
            memory: vec![cell.clone()],
            initial_memory: cell.clone(),
            ..Default::default()
        };
        for (state, d) in &strategy.choice {
            fm.choice.insert((state.clone(), cell.clone()), d.clone());
            if let Some(s) = mdp.index_of(state) {
                for (a, dist) in mdp.actions(s) {
                    for t in dist.support() {
                        fm.update.insert(
                            (state.clone(), cell.clone(), a.clone(), mdp.id(*t).to_string()),
                            cell.clone(),
                        );
                    }
                }
            }
        }
        fm
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if !self.memory.contains(&self.initial_memory) {
            return Err(Error::Strategy(format!(
                "initial memory `{}` is not declared",
                self.initial_memory
            )));
        }
        for ((state, mem), d) in &self.choice {
            let s = mdp
                .index_of(state)
                .ok_or_else(|| Error::Strategy(format!("unknown state `{state}`")))?;
            if !self.memory.contains(mem) {
                return Err(Error::Strategy(format!("undeclared memory `{mem}`")));
            }
            for a in d.support() {
                if mdp.action(s, a).is_none() {
                    return Err(Error::Strategy(format!(
                        "action `{a}` is not available in state `{state}`"
                    )));
                }
            }
        }
        for next in self.update.values() {
            if !self.memory.contains(next) {
                return Err(Error::Strategy(format!("undeclared memory `{next}`")));
            }
        }
        Ok(())
    }
}
