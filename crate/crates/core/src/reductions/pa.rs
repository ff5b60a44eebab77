//! Probabilistic automata as MDPs for general distance minimization, the
//! series expression of the distance, and a bounded emptiness search.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::distances::distance_between;
use crate::error::{Error, Result};
use crate::models::{Mdp, MdpBuilder, MemorylessStrategy, ProbAutomaton, DEFAULT_ACTION};
use crate::numeric::{int, Rational};
use crate::strategies::induce_memoryless;

pub const ACTION_X: &str = "m_x";
pub const ACTION_Y: &str = "m_y";

/// The MDP of an automaton and its two start states.
#[derive(Clone, Debug, PartialEq)]
pub struct PaGadget {
    pub mdp: Mdp,
    pub s1: String,
    pub s2: String,
}

fn pair_state(letter: &str, q: &str) -> String {
    format!("({letter},{q})")
}

/// Two parts: the letter generator `{a, b, $, x, y}` whose `$` chooses
/// between `x` and `y`, and the automaton simulation over letters x states
/// that exits through `$x` or `$y` depending on finality.
pub fn pa_to_mdp(a: &ProbAutomaton) -> Result<PaGadget> {
    a.check_reduction_form()?;
    let letters = a.letters();
    for l in letters {
        if ["$", "x", "y"].contains(&l.as_str()) {
            return Err(Error::invalid("automaton", format!("letter `{l}` clashes with a reserved label")));
        }
    }
    let third = Rational::new(1.into(), 3.into());
    let one = int(1);
    let m = DEFAULT_ACTION;
    let mut b = MdpBuilder::new();
    for l in letters {
        b.add_state(l, l);
    }
    for s in ["$", "x", "y"] {
        b.add_state(s, s);
    }
    for l in letters {
        for t in letters.iter().map(String::as_str).chain(["$"]) {
            b.add_edge(l, m, t, third.clone());
        }
    }
    b.add_edge("$", ACTION_X, "x", one.clone());
    b.add_edge("$", ACTION_Y, "y", one.clone());
    b.add_edge("x", m, "x", one.clone());
    b.add_edge("y", m, "y", one.clone());

    for (sink, label) in [("$x", "$"), ("$y", "$"), ("x'", "x"), ("y'", "y")] {
        b.add_state(sink, label);
    }
    for l in letters {
        for q in 0..a.len() {
            b.add_state(&pair_state(l, &a.states()[q]), l);
        }
    }
    for l in letters {
        for q in 0..a.len() {
            let from = pair_state(l, &a.states()[q]);
            let mut row: BTreeMap<String, Rational> = BTreeMap::new();
            for (k, read) in letters.iter().enumerate() {
                for (r, p) in a.delta(q, k).iter() {
                    *row.entry(pair_state(read, &a.states()[*r])).or_default() += p * &third;
                }
            }
            let exit = if a.is_final(q) { "$y" } else { "$x" };
            *row.entry(exit.to_string()).or_default() += &third;
            for (to, p) in row {
                b.add_edge(&from, m, &to, p);
            }
        }
    }
    b.add_edge("$x", m, "x'", one.clone());
    b.add_edge("$y", m, "y'", one.clone());
    b.add_edge("x'", m, "x'", one.clone());
    b.add_edge("y'", m, "y'", one);
    Ok(PaGadget {
        mdp: b.build()?,
        s1: letters[0].clone(),
        s2: pair_state(&letters[0], &a.states()[a.initial()]),
    })
}

/// The memoryless strategy that always takes `m_x` at `$`.
pub fn always_x(gadget: &PaGadget) -> Result<MemorylessStrategy> {
    MemorylessStrategy::pure(&gadget.mdp, &[("$", ACTION_X)])
}

/// `d(s1, s2)` in the chain induced by [`always_x`].
pub fn pa_theta(a: &ProbAutomaton) -> Result<Rational> {
    let g = pa_to_mdp(a)?;
    let induced = induce_memoryless(&g.mdp, &always_x(&g)?)?;
    let (s1, s2) = (g.mdp.state(&g.s1)?, g.mdp.state(&g.s2)?);
    Ok(distance_between(&induced.lmc, s1, s2))
}

fn third_pow(k: usize) -> Rational {
    Rational::new(1.into(), num_bigint::BigInt::from(3).pow(k as u32))
}

/// `(2/3)^(n+1)`, the largest possible contribution of words longer than `n`.
pub fn series_tail(n: usize) -> Rational {
    let two = num_bigint::BigInt::from(2).pow(n as u32 + 1);
    let three = num_bigint::BigInt::from(3).pow(n as u32 + 1);
    Rational::new(two, three)
}

/// Total acceptance probability of all words of each length `0..=n`.
fn level_mass(a: &ProbAutomaton, n: usize) -> Vec<Rational> {
    let mut cur = vec![Rational::zero(); a.len()];
    cur[a.initial()] = Rational::one();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        out.push(a.finals().iter().map(|q| cur[*q].clone()).sum());
        if k == n {
            break;
        }
        let mut next = vec![Rational::zero(); a.len()];
        for (q, w) in cur.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for l in 0..a.letters().len() {
                for (r, p) in a.delta(q, l).iter() {
                    next[*r] += w * p;
                }
            }
        }
        cur = next;
    }
    out
}

/// Bracket `[lower, lower + (2/3)^(n+1)]` on the distance under the
/// always-`m_x` strategy, where `lower = sum_{|w| <= n} Pr(w) / 3^(|w|+1)`.
pub fn series_value(a: &ProbAutomaton, n: usize) -> (Rational, Rational) {
    let lower: Rational = level_mass(a, n)
        .into_iter()
        .enumerate()
        .map(|(k, mass)| mass * third_pow(k + 1))
        .sum();
    let upper = &lower + series_tail(n);
    (lower, upper)
}

/// A general strategy for the automaton MDP, given by the probability of
/// `m_y` after each listed word; unlisted words take `m_x`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrefixStrategy {
    pub take_y: BTreeMap<Vec<usize>, Rational>,
}

impl PrefixStrategy {
    /// Takes `m_y` exactly after `word`.
    pub fn flip(word: &[usize]) -> Self {
        PrefixStrategy {
            take_y: BTreeMap::from([(word.to_vec(), Rational::one())]),
        }
    }
}

/// Bracket on the distance under `strategy`, from the words of length at
/// most `n`; each word contributes
/// `((1 - Pr(w)) y(w) + Pr(w) (1 - y(w))) / 3^(|w|+1)`.
pub fn strategy_series(a: &ProbAutomaton, strategy: &PrefixStrategy, n: usize) -> (Rational, Rational) {
    let (mut lower, _) = series_value(a, n);
    for (w, y) in &strategy.take_y {
        if w.len() <= n {
            let pr = a.accept_prob(w);
            lower += (Rational::one() - int(2) * pr) * y * third_pow(w.len() + 1);
        }
    }
    let upper = &lower + series_tail(n);
    (lower, upper)
}

/// Exact decrease of the distance when switching to `m_y` after `word`:
/// `(2 Pr(word) - 1) / 3^(|word|+1)`.
pub fn flip_gain(a: &ProbAutomaton, word: &[usize]) -> Rational {
    (int(2) * a.accept_prob(word) - Rational::one()) * third_pow(word.len() + 1)
}

/// First word in length-lexicographic order (letters in declaration order)
/// of length at most `maxlen` accepted with probability above 1/2.
pub fn emptiness_search(a: &ProbAutomaton, maxlen: usize) -> Option<Vec<usize>> {
    let half = Rational::new(1.into(), 2.into());
    let accept = |dist: &[Rational]| -> Rational { a.finals().iter().map(|q| dist[*q].clone()).sum() };
    let mut start = vec![Rational::zero(); a.len()];
    start[a.initial()] = Rational::one();
    let mut level: Vec<(Vec<usize>, Vec<Rational>)> = vec![(Vec::new(), start)];
    for len in 0..=maxlen {
        if let Some((w, _)) = level.iter().find(|(_, d)| accept(d) > half) {
            return Some(w.clone());
        }
        if len == maxlen {
            break;
        }
        let mut next = Vec::with_capacity(level.len() * a.letters().len());
        for (w, d) in &level {
            for l in 0..a.letters().len() {
                let mut e = vec![Rational::zero(); a.len()];
                for (q, x) in d.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    for (r, p) in a.delta(q, l).iter() {
                        e[*r] += x * p;
                    }
                }
                let mut v = w.clone();
                v.push(l);
                next.push((v, e));
            }
        }
        level = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    fn reach_q1() -> ProbAutomaton {
        ProbAutomaton::new(
            &["q0", "q1"],
            "q0",
            &["a", "b"],
            &["q1"],
            &[
                ("q0", "a", "q1", int(1)),
                ("q0", "b", "q1", int(1)),
                ("q1", "a", "q1", int(1)),
                ("q1", "b", "q1", int(1)),
            ],
        )
        .unwrap()
    }

    fn accepts_ab() -> ProbAutomaton {
        ProbAutomaton::new(
            &["q0", "q1", "q2", "z"],
            "q0",
            &["a", "b"],
            &["q2"],
            &[
                ("q0", "a", "q1", int(1)),
                ("q0", "b", "z", int(1)),
                ("q1", "a", "z", int(1)),
                ("q1", "b", "q2", int(1)),
                ("q2", "a", "z", int(1)),
                ("q2", "b", "z", int(1)),
                ("z", "a", "z", int(1)),
                ("z", "b", "z", int(1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn gadget_shape() {
        let a = accepts_ab();
        let g = pa_to_mdp(&a).unwrap();
        assert_eq!(g.mdp.len(), 5 + 2 * a.len() + 4);
        for s in ["a", "b", "x", "y"] {
            assert_eq!(g.mdp.actions(g.mdp.state(s).unwrap()).len(), 1);
        }
        assert_eq!(g.mdp.actions(g.mdp.state("$").unwrap()).len(), 2);
        let fin = g.mdp.state("(b,q2)").unwrap();
        let d = &g.mdp.actions(fin)[0].1;
        assert_eq!(d.prob(&g.mdp.state("$y").unwrap()), rat(1, 3));
        assert_eq!((g.s1.as_str(), g.s2.as_str()), ("a", "(a,q0)"));
    }

    #[test]
    fn theta_of_always_accepting_automaton() {
        let a = reach_q1();
        assert_eq!(pa_theta(&a).unwrap(), rat(2, 3));
        let (lo, hi) = series_value(&a, 20);
        assert!(lo <= rat(2, 3) && rat(2, 3) <= hi);
        assert_eq!(series_value(&a, 0).0, int(0));
    }

    #[test]
    fn empty_final_set_gives_zero() {
        let a = ProbAutomaton::new(&["q"], "q", &["a", "b"], &[], &[("q", "a", "q", int(1)), ("q", "b", "q", int(1))])
            .unwrap();
        assert_eq!(pa_theta(&a).unwrap(), int(0));
        assert_eq!(series_value(&a, 7).0, int(0));
        assert_eq!(emptiness_search(&a, 6), None);
    }

    #[test]
    fn search_and_flip() {
        let a = accepts_ab();
        assert_eq!(emptiness_search(&a, 1), None);
        let w = emptiness_search(&a, 4).unwrap();
        assert_eq!(a.word_text(&w), "ab");
        let theta = pa_theta(&a).unwrap();
        let (lo, hi) = series_value(&a, 20);
        assert!(lo <= theta && theta <= hi);
        let depth = w.len() + 20;
        let (flo, _) = strategy_series(&a, &PrefixStrategy::flip(&w), depth);
        let (xlo, _) = series_value(&a, depth);
        assert_eq!(&xlo - &flo, flip_gain(&a, &w));
        assert_eq!(flip_gain(&a, &w), rat(1, 27));
    }
}
