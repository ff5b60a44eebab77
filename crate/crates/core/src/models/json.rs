//! JSON interchange format for models, automata and strategies.
//!
//! Probabilities are strings `"a/b"` (or `"a"` for integers) parsed exactly.
//! Serialization is canonical: states in id order, transitions sorted by
//! `(from, action, to)`, rationals in lowest terms, two-space indentation and
//! a trailing newline.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    Distribution, FiniteMemoryStrategy, Lmc, LmcBuilder, Mdp, MdpBuilder, MemorylessStrategy,
    ProbAutomaton,
};
use crate::numeric::{format_rational, parse_rational, Rational};

/// A parsed model file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Lmc(Lmc),
    Mdp(Mdp),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(rename = "type")]
    kind: String,
    states: Vec<StateEntry>,
    transitions: Vec<TransitionEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    id: String,
    label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    to: String,
    prob: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaFile {
    #[serde(rename = "type")]
    kind: String,
    states: Vec<String>,
    initial: String,
    #[serde(rename = "final")]
    finals: Vec<String>,
    letters: Vec<String>,
    delta: Vec<PaEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaEdge {
    from: String,
    letter: String,
    to: String,
    prob: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    #[serde(rename = "type")]
    kind: String,
    choice: Vec<ChoiceEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceEntry {
    from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    memory: Option<String>,
    action: String,
    prob: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FmStrategyFile {
    #[serde(rename = "type")]
    kind: String,
    memory: Vec<String>,
    initial_memory: String,
    choice: Vec<ChoiceEntry>,
    update: Vec<UpdateEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UpdateEntry {
    from: String,
    memory: String,
    action: String,
    to: String,
    next: String,
}

fn syntax(err: serde_json::Error) -> Error {
    Error::Syntax(err.to_string())
}

fn to_text<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable");
    out.push('\n');
    out
}

fn positive_prob(text: &str, location: &str) -> Result<Rational> {
    let p = parse_rational(text).map_err(|e| match e {
        Error::Syntax(m) => Error::Syntax(format!("{location}: {m}")),
        other => other,
    })?;
    if p <= Rational::zero() || p > num_traits::One::one() {
        return Err(Error::invalid(
            location,
            format!("probability {} outside (0, 1]", format_rational(&p)),
        ));
    }
    Ok(p)
}

/// Parses an LMC or MDP from the JSON model format.
pub fn parse_model(text: &[u8]) -> Result<Model> {
    let file: ModelFile = serde_json::from_slice(text).map_err(syntax)?;
    match file.kind.as_str() {
        "lmc" => {
            let mut b = LmcBuilder::new();
            for s in &file.states {
                b.add_state(&s.id, &s.label);
            }
            for (i, t) in file.transitions.iter().enumerate() {
                let loc = format!("transitions[{i}]");
                if t.action.is_some() {
                    return Err(Error::invalid(loc, "LMC transitions carry no action"));
                }
                b.add_edge(&t.from, &t.to, positive_prob(&t.prob, &loc)?);
            }
            Ok(Model::Lmc(b.build()?))
        }
        "mdp" => {
            let mut b = MdpBuilder::new();
            for s in &file.states {
                b.add_state(&s.id, &s.label);
            }
            for (i, t) in file.transitions.iter().enumerate() {
                let loc = format!("transitions[{i}]");
                let action = t
                    .action
                    .as_deref()
                    .ok_or_else(|| Error::invalid(&loc, "MDP transition without action"))?;
                b.add_edge(&t.from, action, &t.to, positive_prob(&t.prob, &loc)?);
            }
            Ok(Model::Mdp(b.build()?))
        }
        other => Err(Error::Syntax(format!("unknown model type `{other}`"))),
    }
}

fn states_of(states: &[crate::models::StateInfo]) -> Vec<StateEntry> {
    states
        .iter()
        .map(|s| StateEntry {
            id: s.id.clone(),
            label: s.label.clone(),
        })
        .collect()
}

/// Canonical JSON text of a model.
pub fn serialize_model(model: &Model) -> String {
    let file = match model {
        Model::Lmc(m) => {
            let mut transitions = Vec::new();
            for s in 0..m.len() {
                for (t, p) in m.trans(s).iter() {
                    transitions.push(TransitionEntry {
                        from: m.id(s).to_string(),
                        action: None,
                        to: m.id(*t).to_string(),
                        prob: format_rational(p),
                    });
                }
            }
            ModelFile {
                kind: "lmc".into(),
                states: states_of(m.states()),
                transitions,
            }
        }
        Model::Mdp(m) => {
            let mut transitions = Vec::new();
            for s in 0..m.len() {
                for (a, d) in m.actions(s) {
                    for (t, p) in d.iter() {
                        transitions.push(TransitionEntry {
                            from: m.id(s).to_string(),
                            action: Some(a.clone()),
                            to: m.id(*t).to_string(),
                            prob: format_rational(p),
                        });
                    }
                }
            }
            ModelFile {
                kind: "mdp".into(),
                states: states_of(m.states()),
                transitions,
            }
        }
    };
    to_text(&file)
}

/// Parses a probabilistic automaton. With `for_reduction` set, also enforces
/// a two-letter alphabet and a non-final initial state.
pub fn parse_pa(text: &[u8], for_reduction: bool) -> Result<ProbAutomaton> {
    let file: PaFile = serde_json::from_slice(text).map_err(syntax)?;
    if file.kind != "pa" {
        return Err(Error::Syntax(format!("expected type `pa`, got `{}`", file.kind)));
    }
    let mut delta = Vec::with_capacity(file.delta.len());
    for (i, e) in file.delta.iter().enumerate() {
        let p = positive_prob(&e.prob, &format!("delta[{i}]"))?;
        delta.push((e.from.as_str(), e.letter.as_str(), e.to.as_str(), p));
    }
    let states: Vec<&str> = file.states.iter().map(String::as_str).collect();
    let letters: Vec<&str> = file.letters.iter().map(String::as_str).collect();
    let finals: Vec<&str> = file.finals.iter().map(String::as_str).collect();
    let pa = ProbAutomaton::new(&states, &file.initial, &letters, &finals, &delta)?;
    if for_reduction {
        pa.check_reduction_form()?;
    }
    Ok(pa)
}

pub fn serialize_pa(pa: &ProbAutomaton) -> String {
    let mut delta = Vec::new();
    for q in 0..pa.len() {
        for (a, letter) in pa.letters().iter().enumerate() {
            for (r, p) in pa.delta(q, a).iter() {
                delta.push(PaEdge {
                    from: pa.states()[q].clone(),
                    letter: letter.clone(),
                    to: pa.states()[*r].clone(),
                    prob: format_rational(p),
                });
            }
        }
    }
    let file = PaFile {
        kind: "pa".into(),
        states: pa.states().to_vec(),
        initial: pa.states()[pa.initial()].clone(),
        finals: pa.finals().iter().map(|q| pa.states()[*q].clone()).collect(),
        letters: pa.letters().to_vec(),
        delta,
    };
    to_text(&file)
}

fn group_choices<K: Ord + Clone>(
    entries: impl IntoIterator<Item = (K, String, Rational)>,
) -> Result<BTreeMap<K, Distribution<String>>> {
    let mut grouped: BTreeMap<K, Vec<(String, Rational)>> = BTreeMap::new();
    for (k, a, p) in entries {
        grouped.entry(k).or_default().push((a, p));
    }
    grouped
        .into_iter()
        .map(|(k, w)| Ok((k, Distribution::new(w)?)))
        .collect()
}

/// Parses a memoryless strategy (`"type": "strategy"`).
pub fn parse_strategy(text: &[u8]) -> Result<MemorylessStrategy> {
    let file: StrategyFile = serde_json::from_slice(text).map_err(syntax)?;
    if file.kind != "strategy" {
        return Err(Error::Syntax(format!(
            "expected type `strategy`, got `{}`",
            file.kind
        )));
    }
    let mut entries = Vec::new();
    for (i, c) in file.choice.iter().enumerate() {
        let loc = format!("choice[{i}]");
        if c.memory.is_some() {
            return Err(Error::invalid(loc, "memoryless choice carries a memory cell"));
        }
        entries.push((c.from.clone(), c.action.clone(), positive_prob(&c.prob, &loc)?));
    }
    Ok(MemorylessStrategy {
        choice: group_choices(entries)?,
    })
}

pub fn serialize_strategy(strategy: &MemorylessStrategy) -> String {
    let choice = strategy
        .choice
        .iter()
        .flat_map(|(s, d)| {
            d.iter().map(move |(a, p)| ChoiceEntry {
                from: s.clone(),
                memory: None,
                action: a.clone(),
                prob: format_rational(p),
            })
        })
        .collect();
    to_text(&StrategyFile {
        kind: "strategy".into(),
        choice,
    })
}

/// Parses a finite-memory strategy (`"type": "fm-strategy"`).
pub fn parse_fm_strategy(text: &[u8]) -> Result<FiniteMemoryStrategy> {
    let file: FmStrategyFile = serde_json::from_slice(text).map_err(syntax)?;
    if file.kind != "fm-strategy" {
        return Err(Error::Syntax(format!(
            "expected type `fm-strategy`, got `{}`",
            file.kind
        )));
    }
    let mut entries = Vec::new();
    for (i, c) in file.choice.iter().enumerate() {
        let loc = format!("choice[{i}]");
        let mem = c
            .memory
            .clone()
            .ok_or_else(|| Error::invalid(&loc, "choice without memory cell"))?;
        entries.push(((c.from.clone(), mem), c.action.clone(), positive_prob(&c.prob, &loc)?));
    }
    let mut update = BTreeMap::new();
    for (i, u) in file.update.iter().enumerate() {
        let key = (u.from.clone(), u.memory.clone(), u.action.clone(), u.to.clone());
        if update.insert(key, u.next.clone()).is_some() {
            return Err(Error::Duplicate {
                kind: "update",
                id: format!("update[{i}]"),
            });
        }
    }
    Ok(FiniteMemoryStrategy {
        memory: file.memory,
        initial_memory: file.initial_memory,
        choice: group_choices(entries)?,
        update,
    })
}

pub fn serialize_fm_strategy(strategy: &FiniteMemoryStrategy) -> String {
    let choice = strategy
        .choice
        .iter()
        .flat_map(|((s, m), d)| {
            d.iter().map(move |(a, p)| ChoiceEntry {
                from: s.clone(),
                memory: Some(m.clone()),
                action: a.clone(),
                prob: format_rational(p),
            })
        })
        .collect();
    let update = strategy
        .update
        .iter()
        .map(|((s, m, a, t), next)| UpdateEntry {
            from: s.clone(),
            memory: m.clone(),
            action: a.clone(),
            to: t.clone(),
            next: next.clone(),
        })
        .collect();
    to_text(&FmStrategyFile {
        kind: "fm-strategy".into(),
        memory: strategy.memory.clone(),
        initial_memory: strategy.initial_memory.clone(),
        choice,
        update,
    })
}
