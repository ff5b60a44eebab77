//! Generators for the noninterference MDPs of the two-thread program
//! `l := h | l := !h` and its looping variants.
//!
//! Each copy `i` (the value of `h`) has a start state `s<i>` with actions `m0`
//! and `m1`, each leading through a three-state chain whose first and last
//! states are coloured with the low value written by the first and second
//! assignment, and an end state `t<i>`. Uncoloured states carry label `u`.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::models::{Distribution, FiniteMemoryStrategy, Mdp, MdpBuilder, DEFAULT_ACTION};
use crate::numeric::Rational;

/// Which example MDP to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example {
    /// Single run of both threads; `t0`, `t1` are sinks.
    Non1,
    /// Loop until `coin(p) || h`; `t0`, `t1` are sinks.
    Non2,
    /// As `Non2`, followed by an endless nondeterministic `l := 0 (+) l := 1`.
    Non3,
}

impl FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non1" => Ok(Example::Non1),
            "non2" => Ok(Example::Non2),
            "non3" => Ok(Example::Non3),
            other => Err(Error::invalid("example", format!("unknown example `{other}`"))),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::Non1 => "non1",
            Example::Non2 => "non2",
            Example::Non3 => "non3",
        })
    }
}

pub const UNCOLOURED: &str = "u";

/// Id of chain state `k` (1..=3) taken from `s<side>` with action `m<action>`.
pub fn chain_state(side: u8, action: u8, k: u8) -> String {
    format!("s{side}_m{action}_{k}")
}

/// Builds the example MDP. `p` is the loop-exit probability and must lie in
/// `(0, 1]`; it is ignored for `Non1`.
pub fn gen_example(which: Example, p: &Rational) -> Result<Mdp> {
    if which != Example::Non1 && (*p <= Rational::zero() || *p > Rational::one()) {
        return Err(Error::OutOfRange(format!("p = {p} must lie in (0, 1]")));
    }
    let one = Rational::one();
    let mut b = MdpBuilder::new();
    for side in 0..2u8 {
        let s = format!("s{side}");
        let t = format!("t{side}");
        b.add_state(&s, UNCOLOURED);
        b.add_state(&t, UNCOLOURED);
        for action in 0..2u8 {
            // m0 runs `l := h` first; m1 runs `l := !h` first.
            let first = side ^ action;
            let colours = [first.to_string(), UNCOLOURED.to_string(), (1 - first).to_string()];
            for (k, label) in (1..=3).zip(&colours) {
                b.add_state(&chain_state(side, action, k), label);
            }
            b.add_edge(&s, &format!("m{action}"), &chain_state(side, action, 1), one.clone());
            b.add_edge(&chain_state(side, action, 1), DEFAULT_ACTION, &chain_state(side, action, 2), one.clone());
            b.add_edge(&chain_state(side, action, 2), DEFAULT_ACTION, &chain_state(side, action, 3), one.clone());
            let last = chain_state(side, action, 3);
            if which == Example::Non1 || side == 1 {
                b.add_edge(&last, DEFAULT_ACTION, &t, one.clone());
            } else {
                b.add_edge(&last, DEFAULT_ACTION, &t, p.clone());
                b.add_edge(&last, DEFAULT_ACTION, &s, &one - p);
            }
        }
        if which == Example::Non3 {
            for (action, label) in [("m2", "0"), ("m3", "1")] {
                let w = format!("{t}_{action}");
                b.add_state(&w, label);
                b.add_edge(&t, action, &w, one.clone());
                b.add_edge(&w, DEFAULT_ACTION, &t, one.clone());
            }
        } else {
            b.add_edge(&t, DEFAULT_ACTION, &t, one.clone());
        }
    }
    b.build()
}

/// The history-dependent strategy for `Non3`: on odd visits to `t0`/`t1`
/// pick `m2`/`m3` uniformly, on even visits pick the one not taken before.
/// `m0`/`m1` are chosen uniformly at `s0`, `s1`.
pub fn non3_alternating_strategy(mdp: &Mdp) -> FiniteMemoryStrategy {
    let cells = ["fresh", "took2", "took3"];
    let mut fm = FiniteMemoryStrategy {
        memory: cells.iter().map(|c| c.to_string()).collect(),
        initial_memory: "fresh".into(),
        ..Default::default()
    };
    for s in 0..mdp.len() {
        let id = mdp.id(s);
        let is_end = id == "t0" || id == "t1";
        for cell in cells {
            let choice = match (is_end, cell) {
                (true, "fresh") => Distribution::uniform(["m2".to_string(), "m3".to_string()]),
                (true, "took2") => Distribution::dirac("m3".to_string()),
                (true, _) => Distribution::dirac("m2".to_string()),
                (false, _) => Distribution::uniform(mdp.actions(s).iter().map(|(a, _)| a.clone())),
            };
            fm.choice.insert((id.to_string(), cell.to_string()), choice);
            for (a, d) in mdp.actions(s) {
                let next = match (is_end, cell, a.as_str()) {
                    (true, "fresh", "m2") => "took2",
                    (true, "fresh", "m3") => "took3",
                    (true, _, _) => "fresh",
                    (false, c, _) => c,
                };
                for t in d.support() {
                    fm.update.insert(
                        (id.to_string(), cell.to_string(), a.clone(), mdp.id(*t).to_string()),
                        next.to_string(),
                    );
                }
            }
        }
    }
    fm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{parse_model, serialize_model, Model};
    use crate::numeric::rat;

    #[test]
    fn non1_has_two_choices_at_each_start() {
        let m = gen_example(Example::Non1, &rat(1, 2)).unwrap();
        assert_eq!(m.len(), 16);
        for s in ["s0", "s1"] {
            let names: Vec<&str> = m.actions(m.state(s).unwrap()).iter().map(|(a, _)| a.as_str()).collect();
            assert_eq!(names, ["m0", "m1"]);
        }
    }

    #[test]
    fn non3_loops_back_with_one_minus_p() {
        let m = gen_example(Example::Non3, &rat(1, 2)).unwrap();
        assert_eq!(m.len(), 20);
        let s0 = m.state("s0").unwrap();
        for action in 0..2 {
            let last = m.state(&chain_state(0, action, 3)).unwrap();
            assert_eq!(m.action(last, DEFAULT_ACTION).unwrap().prob(&s0), rat(1, 2));
        }
        let t0 = m.state("t0").unwrap();
        assert_eq!(m.actions(t0).len(), 2);
    }

    #[test]
    fn non2_with_certain_exit_has_no_loop_back() {
        let m = gen_example(Example::Non2, &rat(1, 1)).unwrap();
        let s0 = m.state("s0").unwrap();
        for s in 0..m.len() {
            if s != s0 {
                assert!(!m.successors(s).contains(&s0));
            }
        }
    }

    #[test]
    fn rejects_p_out_of_range() {
        assert!(matches!(gen_example(Example::Non2, &rat(0, 1)), Err(Error::OutOfRange(_))));
        assert!(matches!(gen_example(Example::Non3, &rat(3, 2)), Err(Error::OutOfRange(_))));
        assert!(gen_example(Example::Non1, &rat(7, 1)).is_ok());
    }

    #[test]
    fn serialization_is_deterministic_and_round_trips() {
        let m = Model::Mdp(gen_example(Example::Non3, &rat(1, 3)).unwrap());
        let a = serialize_model(&m);
        assert_eq!(a, serialize_model(&m));
        assert_eq!(parse_model(a.as_bytes()).unwrap(), m);
    }

    #[test]
    fn alternating_strategy_is_valid() {
        let m = gen_example(Example::Non3, &rat(1, 2)).unwrap();
        non3_alternating_strategy(&m).validate(&m).unwrap();
    }
}
