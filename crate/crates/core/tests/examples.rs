//! Worked examples: small models whose answers are known in closed form.

use std::collections::BTreeSet;

use bisimdist::bisim::{bisim_partition, classify_pairs, is_bisimilar};
use bisimdist::distances::{apply_delta, distance_exact, distance_one_set, distance_vi, lt1_lmc};
use bisimdist::general_lt1::{decide_lt1, equalizable, pair_zero_set, reduce_bisim_to_lt1};
use bisimdist::memoryless_min::{check_witness, minimize_local, objective};
use bisimdist::models::{
    gen_example, non3_alternating_strategy, parse_model, parse_pa, serialize_model, Distribution, Example,
    LmcBuilder, MdpBuilder, MemorylessStrategy, Model,
};
use bisimdist::numeric::{int, rat, to_f64};
use bisimdist::reductions::{
    emptiness_search, etr2_transform, etr3_normalize, etr3_rewrite, pa_theta, pa_to_mdp, poly_to_mdp, series_tail,
    series_value, Polynomial,
};
use bisimdist::strategies::{induce_finite_memory, induce_memoryless};
use bisimdist::transport::{check_coupling, optimal_coupling, Coupling};
use bisimdist::{Error, Lmc, Mdp, ProbAutomaton, Rational};

fn example(which: Example, p: Rational) -> Mdp {
    gen_example(which, &p).unwrap()
}

fn uniform_lmc(mdp: &Mdp) -> Lmc {
    induce_memoryless(mdp, &MemorylessStrategy::uniform(mdp)).unwrap().lmc
}

fn ix(lmc: &Lmc, id: &str) -> usize {
    lmc.state(id).unwrap()
}

fn golden_lines(mdp: &Mdp) -> Vec<String> {
    let mut lines: Vec<String> = mdp.states().iter().map(|s| format!("state {} {}", s.id, s.label)).collect();
    for s in 0..mdp.len() {
        for (action, dist) in mdp.actions(s) {
            for (t, p) in dist.iter() {
                lines.push(format!("edge {} {action} {} {p}", mdp.id(s), mdp.id(*t)));
            }
        }
    }
    lines
}

#[test]
fn first_example_matches_golden_file() {
    let golden = include_str!("data/non1_edges.txt");
    let want: Vec<&str> = golden.lines().collect();
    let got = golden_lines(&example(Example::Non1, rat(1, 2)));
    assert_eq!(got, want);
}

#[test]
fn first_example_shape() {
    let mdp = example(Example::Non1, rat(1, 2));
    for s in ["s0", "s1"] {
        let names: Vec<&str> = mdp.actions(mdp.state(s).unwrap()).iter().map(|(a, _)| a.as_str()).collect();
        assert_eq!(names, ["m0", "m1"]);
    }
    assert!(!mdp.is_deterministic());
}

#[test]
fn third_example_loops_back_with_one_minus_p() {
    let mdp = example(Example::Non3, rat(1, 2));
    let s0 = mdp.state("s0").unwrap();
    for chain in ["s0_m0_3", "s0_m1_3"] {
        let end = mdp.state(chain).unwrap();
        assert_eq!(mdp.actions(end)[0].1.prob(&s0), rat(1, 2));
    }
}

#[test]
fn second_example_with_p_one_has_no_loop() {
    let mdp = example(Example::Non2, int(1));
    let s0 = mdp.state("s0").unwrap();
    for s in 0..mdp.len() {
        if s != s0 {
            for (_, d) in mdp.actions(s) {
                assert!(!d.contains(&s0));
            }
        }
    }
}

#[test]
fn parameter_out_of_range() {
    for p in [int(0), int(2), rat(-1, 2)] {
        assert!(matches!(gen_example(Example::Non2, &p), Err(Error::OutOfRange(_))));
        assert!(matches!(gen_example(Example::Non3, &p), Err(Error::OutOfRange(_))));
    }
}

#[test]
fn parsing_examples() {
    let sinks = r#"{"type":"lmc","states":[{"id":"a","label":"x"},{"id":"b","label":"x"}],
        "transitions":[{"from":"a","to":"a","prob":"1"},{"from":"b","to":"b","prob":"2/2"}]}"#;
    let Model::Lmc(lmc) = parse_model(sinks.as_bytes()).unwrap() else { panic!("expected an LMC") };
    assert_eq!(lmc.len(), 2);

    let bad = r#"{"type":"lmc","states":[{"id":"a","label":"x"},{"id":"b","label":"x"}],
        "transitions":[{"from":"a","to":"a","prob":"1/3"},{"from":"a","to":"b","prob":"1/3"},
        {"from":"a","to":"b","prob":"1/2"},{"from":"b","to":"b","prob":"1"}]}"#;
    let err = parse_model(bad.as_bytes()).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains('a'), "{err}");

    let half = r#"{"type":"lmc","states":[{"id":"a","label":"x"},{"id":"b","label":"x"}],
        "transitions":[{"from":"a","to":"a","prob":"2/4"},{"from":"a","to":"b","prob":"1/2"},{"from":"b","to":"b","prob":"1"}]}"#;
    let text = serialize_model(&parse_model(half.as_bytes()).unwrap());
    assert!(text.contains("\"1/2\"") && !text.contains("2/4"));
}

#[test]
fn serialization_round_trips_and_is_stable() {
    for which in [Example::Non1, Example::Non2, Example::Non3] {
        let mdp = example(which, rat(1, 3));
        let text = serialize_model(&Model::Mdp(mdp.clone()));
        assert_eq!(text, serialize_model(&Model::Mdp(mdp.clone())));
        let back = match parse_model(text.as_bytes()).unwrap() {
            Model::Mdp(m) => m,
            Model::Lmc(l) => Mdp::from_lmc(&l),
        };
        assert_eq!(golden_lines(&back), golden_lines(&mdp));
    }
}

#[test]
fn automaton_parsing() {
    let ok = r#"{"type":"pa","states":["q0","q1"],"initial":"q0","final":["q1"],"letters":["a","b"],
        "delta":[{"from":"q0","letter":"a","to":"q1","prob":"1"},{"from":"q0","letter":"b","to":"q0","prob":"1"},
        {"from":"q1","letter":"a","to":"q1","prob":"1"},{"from":"q1","letter":"b","to":"q1","prob":"1"}]}"#;
    assert!(parse_pa(ok.as_bytes(), false).is_ok());
    let initial_final = ok.replace(r#""final":["q1"]"#, r#""final":["q0"]"#);
    assert!(matches!(parse_pa(initial_final.as_bytes(), true), Err(Error::InitialFinal(_))));
    let three = ok.replace(r#""letters":["a","b"]"#, r#""letters":["a","b","c"]"#).replace(
        r#""delta":["#,
        r#""delta":[{"from":"q0","letter":"c","to":"q0","prob":"1"},{"from":"q1","letter":"c","to":"q1","prob":"1"},"#,
    );
    assert!(parse_pa(three.as_bytes(), false).is_ok());
    assert!(matches!(parse_pa(three.as_bytes(), true), Err(Error::AlphabetSize(_))));
}

#[test]
fn bisimulation_examples() {
    let sinks = LmcBuilder::new()
        .state("a", "x")
        .state("b", "x")
        .edge("a", "a", int(1))
        .edge("b", "b", int(1))
        .build()
        .unwrap();
    assert_eq!(bisim_partition(&sinks).len(), 1);

    let first = uniform_lmc(&example(Example::Non1, rat(1, 2)));
    assert!(is_bisimilar(&first, "s0", "s1").unwrap());
    assert!(is_bisimilar(&first, "s0", "s0").unwrap());
    assert!(!is_bisimilar(&first, "s0_m0_1", "s0_m0_3").unwrap());

    let second = uniform_lmc(&example(Example::Non2, rat(1, 2)));
    let classes = classify_pairs(&second);
    let pair = (ix(&second, "s0"), ix(&second, "s1"));
    assert!(classes.unknown().contains(&pair));
    let n = second.len();
    assert_eq!(classes.zero().len() + classes.one_mismatch().len() + classes.unknown().len(), n * n);
}

#[test]
fn distinct_labels_give_diagonal_zero() {
    let lmc = LmcBuilder::new()
        .state("a", "1")
        .state("b", "2")
        .state("c", "3")
        .edge("a", "b", int(1))
        .edge("b", "c", int(1))
        .edge("c", "a", int(1))
        .build()
        .unwrap();
    let classes = classify_pairs(&lmc);
    assert_eq!(classes.zero(), vec![(0, 0), (1, 1), (2, 2)]);
    assert!(classes.unknown().is_empty());
}

#[test]
fn coupling_examples() {
    let discrete = |u: usize, v: usize| if u == v { int(0) } else { int(1) };
    let mu = Distribution::new([(0, rat(2, 3)), (1, rat(1, 3))]).unwrap();
    let nu = Distribution::new([(0, rat(1, 3)), (1, rat(2, 3))]).unwrap();
    let (w, v) = optimal_coupling(&mu, &mu, discrete);
    assert_eq!(v, int(0));
    assert!(check_coupling(&w));
    let (_, v) = optimal_coupling(&Distribution::dirac(0), &Distribution::dirac(1), discrete);
    assert_eq!(v, int(1));
    let (w, v) = optimal_coupling(&mu, &nu, discrete);
    assert_eq!(v, rat(1, 3));
    assert!(check_coupling(&w));
    assert!(check_coupling(&Coupling::product(&mu, &nu)));
}

#[test]
fn distance_examples() {
    for p in [rat(1, 4), rat(1, 2), rat(3, 4)] {
        let second = uniform_lmc(&example(Example::Non2, p.clone()));
        let d = distance_exact(&second);
        assert_eq!(d.get(ix(&second, "s0"), ix(&second, "s1")), &(int(1) - &p));
        assert_eq!(apply_delta(&second, &d), d);

        let third = uniform_lmc(&example(Example::Non3, p.clone()));
        let d = distance_exact(&third);
        assert_eq!(d.get(ix(&third, "s0"), ix(&third, "t1")), &(int(1) / (int(1) + &p)));
        assert_eq!(d.get(ix(&third, "s0"), ix(&third, "s1")), &((int(1) - &p) / (int(1) + &p)));
    }
}

#[test]
fn value_iteration_approaches_from_below() {
    let second = uniform_lmc(&example(Example::Non2, rat(1, 2)));
    let vi = distance_vi(&second, &rat(1, 1_000_000));
    let v = vi.values.get(ix(&second, "s0"), ix(&second, "s1"));
    assert!(*v <= rat(1, 2) && rat(1, 2) - v <= rat(1, 1_000_000));
}

#[test]
fn distance_below_one_examples() {
    let second = uniform_lmc(&example(Example::Non2, rat(1, 2)));
    let pair = (ix(&second, "s0"), ix(&second, "s1"));
    assert!(!distance_one_set(&second).contains(&pair));
    assert!(lt1_lmc(&second, "s0", "s1").unwrap());
    assert!(lt1_lmc(&second, "s0", "s0").unwrap());
    assert!(!lt1_lmc(&second, "s0_m0_1", "s0_m0_3").unwrap());
}

#[test]
fn induced_chains() {
    let first = example(Example::Non1, rat(1, 2));
    let lmc = uniform_lmc(&first);
    assert_eq!(distance_exact(&lmc).get(ix(&lmc, "s0"), ix(&lmc, "s1")), &int(0));

    let third = example(Example::Non3, rat(1, 2));
    let lmc = uniform_lmc(&third);
    assert_eq!(distance_exact(&lmc).get(ix(&lmc, "s0"), ix(&lmc, "s1")), &rat(1, 3));

    let fm = induce_finite_memory(&third, &non3_alternating_strategy(&third)).unwrap();
    let (s0, s1) = (third.state("s0").unwrap(), third.state("s1").unwrap());
    let init = fm.origin.iter().position(|(s, _)| *s == s0).unwrap();
    let other = fm.origin[init].1.clone();
    let a = fm.find(s0, other.as_deref()).unwrap();
    let b = fm.find(s1, other.as_deref()).unwrap();
    assert!(bisim_partition(&fm.lmc).same_block(a, b));
}

#[test]
fn memoryless_objective_examples() {
    let first = example(Example::Non1, rat(1, 2));
    assert_eq!(objective(&first, "s0", "s1", &MemorylessStrategy::uniform(&first)).unwrap(), int(0));
    assert!(check_witness(&first, "s0", "s1", &rat(1, 100), &MemorylessStrategy::uniform(&first)).unwrap());

    let third = example(Example::Non3, rat(1, 2));
    let uniform = MemorylessStrategy::uniform(&third);
    assert_eq!(objective(&third, "s0", "s1", &uniform).unwrap(), rat(1, 3));
    assert!(!check_witness(&third, "s0", "s1", &rat(1, 3), &uniform).unwrap());
    assert!(check_witness(&third, "s0", "s1", &rat(101, 100), &uniform).is_err());

    let picks: Vec<(&str, &str)> = vec![("s0", "m0"), ("s1", "m0"), ("t0", "m2"), ("t1", "m2")];
    let pure = MemorylessStrategy::pure(&third, &picks).unwrap();
    assert!(objective(&third, "s0", "s1", &pure).unwrap() >= rat(1, 3));
}

#[test]
fn local_search_examples() {
    let first = example(Example::Non1, rat(1, 2));
    let res = minimize_local(&first, "s0", "s1", 8, 200, 1).unwrap();
    assert_eq!(res.best_value, int(0));
    let lmc = induce_memoryless(&first, &res.best_strategy).unwrap().lmc;
    assert!(is_bisimilar(&lmc, "s0", "s1").unwrap());

    let third = example(Example::Non3, rat(1, 2));
    let res = minimize_local(&third, "s0", "s1", 16, 400, 7).unwrap();
    assert!(to_f64(&res.best_value) <= 1.0 / 3.0 + 1e-6);
}

fn two_sinks() -> Mdp {
    MdpBuilder::new()
        .state("a", "x")
        .state("b", "y")
        .edge("a", "m", "a", int(1))
        .edge("b", "m", "b", int(1))
        .build()
        .unwrap()
}

#[test]
fn equalizable_examples() {
    let first = example(Example::Non1, rat(1, 2));
    assert!(equalizable(&first, &["s0", "s1"], 20).unwrap());
    assert!(equalizable(&first, &["t0"], 20).unwrap());
    assert!(!equalizable(&first, &["s0", "s0_m0_1"], 20).unwrap());

    let third = example(Example::Non3, rat(1, 2));
    let zero = pair_zero_set(&third, 24).unwrap();
    let (s0, s1) = (third.state("s0").unwrap(), third.state("s1").unwrap());
    assert!(zero.contains(&(s0, s1)));

    let second = example(Example::Non2, rat(1, 2));
    let zero = pair_zero_set(&second, 24).unwrap();
    let (s0, s1) = (second.state("s0").unwrap(), second.state("s1").unwrap());
    assert!(!zero.contains(&(s0, s1)));
    assert!((0..second.len()).all(|s| zero.contains(&(s, s))));
}

#[test]
fn decide_below_one_examples() {
    let second = example(Example::Non2, rat(1, 2));
    assert!(decide_lt1(&second, "s0", "s1", 16).unwrap());
    assert!(decide_lt1(&second, "s0", "s0", 16).unwrap());
    assert!(!decide_lt1(&two_sinks(), "a", "b", 12).unwrap());
    assert!(matches!(
        decide_lt1(&second, "s0", "s1", 12),
        Err(Error::CapExceeded { states: 16, cap: 12 })
    ));
}

#[test]
fn hardness_reduction_examples() {
    let one = MdpBuilder::new().state("a", "x").edge("a", "m", "a", int(1)).build().unwrap();
    assert_eq!(reduce_bisim_to_lt1(&one, "a", "a").unwrap().mdp.len(), 4);

    let first = example(Example::Non1, rat(1, 2));
    let red = reduce_bisim_to_lt1(&first, "s0", "s1").unwrap();
    assert_eq!(red.mdp.len(), 2 * (first.len() + 1));
    assert!(decide_lt1(&red.mdp, &red.left, &red.right, 40).unwrap());

    let red = reduce_bisim_to_lt1(&two_sinks(), "a", "b").unwrap();
    assert!(!decide_lt1(&red.mdp, &red.left, &red.right, 12).unwrap());
}

fn poly(vars: usize, monomials: &[(Rational, &[u32])]) -> Polynomial {
    Polynomial::new(vars, monomials.iter().map(|(c, e)| (c.clone(), e.to_vec()))).unwrap()
}

#[test]
fn etr2_examples() {
    let q = etr2_transform(&poly(1, &[(int(1), &[1])])).unwrap();
    assert_eq!(q, poly(2, &[(int(-1), &[1, 0]), (int(1), &[0, 1])]));
    let q = etr2_transform(&poly(1, &[(int(1), &[2])])).unwrap();
    assert_eq!(q, poly(2, &[(int(-1), &[2, 0]), (int(2), &[1, 1]), (int(-1), &[0, 2])]));
}

#[test]
fn etr3_examples() {
    let (theta, terms) = etr3_rewrite(&poly(2, &[(int(-1), &[1, 1])])).unwrap();
    assert_eq!(theta, int(1));
    let lits: BTreeSet<Vec<i32>> = terms.iter().map(|t| t.literals.clone()).collect();
    assert_eq!(lits, BTreeSet::from([vec![-1, 2], vec![-2]]));
    assert!(terms.iter().all(|t| t.coef == int(1)));

    let nf = etr3_normalize(&poly(2, &[(int(3), &[1, 0]), (rat(1, 2), &[0, 2])])).unwrap();
    assert_eq!(nf.theta, int(0));
    assert!(nf.terms.iter().all(|t| t.literals.len() == 6));
    assert!(matches!(
        etr3_normalize(&poly(1, &[(int(1), &[7])])),
        Err(Error::DegreeOverflow(7))
    ));
}

#[test]
fn gadget_state_count() {
    let nf = etr3_normalize(&poly(2, &[(int(1), &[1, 1]), (rat(-1, 4), &[0, 0])])).unwrap();
    let g = poly_to_mdp(&nf).unwrap();
    let m = nf.terms.len();
    assert_eq!(g.mdp.len(), 18 * m + 3 + 3 + 3 * nf.vars);
}

fn automaton(finals: &[&str], delta: &[(&str, &str, &str, Rational)]) -> ProbAutomaton {
    ProbAutomaton::new(&["q0", "q1"], "q0", &["a", "b"], finals, delta).unwrap()
}

fn to_q1() -> ProbAutomaton {
    automaton(
        &["q1"],
        &[
            ("q0", "a", "q1", int(1)),
            ("q0", "b", "q1", int(1)),
            ("q1", "a", "q1", int(1)),
            ("q1", "b", "q1", int(1)),
        ],
    )
}

#[test]
fn automaton_gadget_shape() {
    let a = to_q1();
    let g = pa_to_mdp(&a).unwrap();
    assert_eq!(g.mdp.len(), 5 + 2 * a.len() + 4);
    assert_eq!((g.s1.as_str(), g.s2.as_str()), ("a", "(a,q0)"));
    let nondet: Vec<&str> = (0..g.mdp.len())
        .filter(|s| g.mdp.actions(*s).len() > 1)
        .map(|s| g.mdp.id(s))
        .collect();
    assert_eq!(nondet, ["$"]);
    let final_state = g.mdp.state("(a,q1)").unwrap();
    let dy = g.mdp.state("$y").unwrap();
    assert_eq!(g.mdp.actions(final_state)[0].1.prob(&dy), rat(1, 3));
}

#[test]
fn automaton_theta_examples() {
    let empty = automaton(
        &[],
        &[
            ("q0", "a", "q1", int(1)),
            ("q0", "b", "q0", int(1)),
            ("q1", "a", "q1", int(1)),
            ("q1", "b", "q0", int(1)),
        ],
    );
    assert_eq!(pa_theta(&empty).unwrap(), int(0));
    assert_eq!(series_value(&empty, 10).0, int(0));
    assert_eq!(emptiness_search(&empty, 6), None);

    // Every nonempty word is accepted: the series is the full tail from length one.
    let a = to_q1();
    let theta = pa_theta(&a).unwrap();
    assert_eq!(theta, series_tail(0));
    assert_eq!(series_value(&a, 0).0, int(0));
    for n in [0, 5, 20] {
        let (lo, hi) = series_value(&a, n);
        assert!(lo <= theta && theta <= hi);
        assert_eq!(hi - lo, series_tail(n));
    }
    assert!(theta >= int(0) && theta <= int(1));
}

#[test]
fn emptiness_examples() {
    let ab = automaton(
        &["q1"],
        &[
            ("q0", "a", "q0", rat(1, 2)),
            ("q0", "a", "q1", rat(1, 2)),
            ("q0", "b", "q0", int(1)),
            ("q1", "a", "q1", int(1)),
            ("q1", "b", "q0", int(1)),
        ],
    );
    assert_eq!(emptiness_search(&ab, 1), None);
    let w = emptiness_search(&ab, 3).unwrap();
    assert_eq!(ab.word_text(&w), "aa");
    assert_eq!(ab.accept_prob(&w), rat(3, 4));
}
