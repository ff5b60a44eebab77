#![allow(dead_code)]

use bisimdist::models::{LmcBuilder, MdpBuilder};
use bisimdist::numeric::{int, rat};
use bisimdist::reductions::{NormalFormPoly, NormalTerm};
use bisimdist::{Lmc, Mdp, ProbAutomaton, Rational};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn state(i: usize) -> String {
    format!("s{i}")
}

/// Random distribution over `k` distinct targets drawn from `0..n`.
fn random_row(rng: &mut impl Rng, n: usize, max_support: usize) -> Vec<(usize, Rational)> {
    let k = rng.gen_range(1..=max_support.min(n));
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(rng);
    targets.truncate(k);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    targets.into_iter().zip(weights).map(|(t, w)| (t, rat(w, total))).collect()
}

pub fn random_lmc(rng: &mut impl Rng, n: usize, labels: usize) -> Lmc {
    let mut b = LmcBuilder::new();
    for i in 0..n {
        b.add_state(&state(i), &format!("l{}", rng.gen_range(0..labels)));
    }
    for i in 0..n {
        for (t, p) in random_row(rng, n, 3) {
            b.add_edge(&state(i), &state(t), p);
        }
    }
    b.build().unwrap()
}

pub fn random_mdp(rng: &mut impl Rng, n: usize, labels: usize, max_actions: usize) -> Mdp {
    let mut b = MdpBuilder::new();
    for i in 0..n {
        b.add_state(&state(i), &format!("l{}", rng.gen_range(0..labels)));
    }
    for i in 0..n {
        for a in 0..rng.gen_range(1..=max_actions) {
            for (t, p) in random_row(rng, n, 3) {
                b.add_edge(&state(i), &format!("a{a}"), &state(t), p);
            }
        }
    }
    b.build().unwrap()
}

/// Random two-letter automaton with `q0` not final.
pub fn random_pa(rng: &mut impl Rng, n: usize) -> ProbAutomaton {
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let finals: Vec<&str> = names[1..]
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .map(String::as_str)
        .collect();
    let mut delta = Vec::new();
    for q in &names {
        for letter in ["a", "b"] {
            for (t, p) in random_row(rng, n, 2) {
                delta.push((q.clone(), letter, names[t].clone(), p));
            }
        }
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let d: Vec<(&str, &str, &str, Rational)> =
        delta.iter().map(|(q, l, t, p)| (q.as_str(), *l, t.as_str(), p.clone())).collect();
    ProbAutomaton::new(&refs, "q0", &["a", "b"], &finals, &d).unwrap()
}

/// Automaton that follows `word` with probability 9/10 per letter into a final
/// state, leaking into a random non-final noise part otherwise.
pub fn planted_pa(rng: &mut impl Rng, word: &[usize], noise: usize) -> ProbAutomaton {
    let letters = ["a", "b"];
    let len = word.len();
    let mut names: Vec<String> = (0..=len).map(|i| format!("c{i}")).collect();
    names.extend((0..noise).map(|i| format!("n{i}")));
    let noise_state = |rng: &mut dyn rand::RngCore| format!("n{}", rng.gen_range(0..noise));
    let mut delta: Vec<(String, &str, String, Rational)> = Vec::new();
    for (i, w) in word.iter().enumerate() {
        for (l, letter) in letters.iter().enumerate() {
            if l == *w {
                delta.push((format!("c{i}"), letter, format!("c{}", i + 1), rat(9, 10)));
                delta.push((format!("c{i}"), letter, noise_state(rng), rat(1, 10)));
            } else {
                delta.push((format!("c{i}"), letter, noise_state(rng), int(1)));
            }
        }
    }
    for letter in letters {
        delta.push((format!("c{len}"), letter, noise_state(rng), int(1)));
    }
    for i in 0..noise {
        for letter in letters {
            let t = if rng.gen_bool(0.7) { noise_state(rng) } else { "c0".to_string() };
            delta.push((format!("n{i}"), letter, t, int(1)));
        }
    }
    // Merge duplicate targets.
    delta.sort_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)));
    let mut merged: Vec<(String, &str, String, Rational)> = Vec::new();
    for e in delta {
        match merged.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 && last.2 == e.2 => last.3 += e.3,
            _ => merged.push(e),
        }
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let d: Vec<(&str, &str, &str, Rational)> =
        merged.iter().map(|(q, l, t, p)| (q.as_str(), *l, t.as_str(), p.clone())).collect();
    let last = format!("c{len}");
    ProbAutomaton::new(&refs, "c0", &letters, &[last.as_str()], &d).unwrap()
}

/// Random normal form with `m` terms over `n` variables.
pub fn random_normal_form(rng: &mut impl Rng, n: usize, m: usize) -> NormalFormPoly {
    let weights: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    let terms = weights
        .into_iter()
        .map(|w| NormalTerm {
            coef: rat(w, total),
            literals: (0..6)
                .map(|_| {
                    let i = rng.gen_range(1..=n as i32);
                    if rng.gen_bool(0.5) {
                        i
                    } else {
                        -i
                    }
                })
                .collect(),
        })
        .collect();
    NormalFormPoly::new(n, rat(rng.gen_range(0..4), 7), terms).unwrap()
}

/// Random rational in `[0, 1]` with a small denominator.
pub fn unit_rational(rng: &mut impl Rng) -> Rational {
    let d = rng.gen_range(1..=12);
    rat(rng.gen_range(0..=d), d)
}
