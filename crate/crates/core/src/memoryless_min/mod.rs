//! Distance minimization over memoryless strategies: exact objective,
//! multistart local search, and the closed existential formula as SMT-LIB.

mod smt;

pub use smt::{check_smt_assignment, emit_etr_smt, witness_assignment, SmtCheck};

use std::collections::HashMap;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distances::engine::Chain;
use crate::distances::{distance_between, pair_distance};
use crate::error::{Error, Result};
use crate::models::{Distribution, Mdp, MemorylessStrategy, StateIx};
use crate::numeric::{simplest_within, to_f64, Rational};
use crate::strategies::induce_memoryless;

/// Exact `d(s1, s2)` in the LMC induced by `strategy`.
pub fn objective(mdp: &Mdp, s1: &str, s2: &str, strategy: &MemorylessStrategy) -> Result<Rational> {
    let (a, b) = (mdp.state(s1)?, mdp.state(s2)?);
    let induced = induce_memoryless(mdp, strategy)?;
    Ok(distance_between(&induced.lmc, a, b))
}

/// True iff the objective of `strategy` is strictly below `theta`.
pub fn check_witness(
    mdp: &Mdp,
    s1: &str,
    s2: &str,
    theta: &Rational,
    strategy: &MemorylessStrategy,
) -> Result<bool> {
    check_theta(theta)?;
    Ok(objective(mdp, s1, s2, strategy)? < *theta)
}

pub(crate) fn check_theta(theta: &Rational) -> Result<()> {
    if *theta <= Rational::from_integer(0.into()) || *theta > Rational::from_integer(1.into()) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (0, 1]")));
    }
    Ok(())
}

/// Outcome of [`minimize_local`].
#[derive(Clone, Debug, PartialEq)]
pub struct MinimizationResult {
    pub best_strategy: MemorylessStrategy,
    /// Exact objective of `best_strategy`.
    pub best_value: Rational,
    /// `(restart, value)` after every sweep, in floating point.
    pub search_trace: Vec<(usize, f64)>,
}

/// Per-state action weights in the order of `Mdp::actions`.
type Point = Vec<Vec<f64>>;

const START_STEP: f64 = 0.25;
const MIN_STEP: f64 = 1e-7;
const SNAP_TOLERANCES: [f64; 7] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

/// Floating-point objective at a point.
fn float_objective(mdp: &Mdp, label: &[usize], s1: StateIx, s2: StateIx, x: &Point) -> f64 {
    let succ = (0..mdp.len())
        .map(|s| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for ((_, d), w) in mdp.actions(s).iter().zip(&x[s]) {
                if *w <= 0.0 {
                    continue;
                }
                for (t, p) in d.iter() {
                    match row.iter_mut().find(|(u, _)| u == t) {
                        Some(e) => e.1 += w * to_f64(p),
                        None => row.push((*t, w * to_f64(p))),
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let chain = Chain {
        succ,
        label: label.to_vec(),
    };
    pair_distance(&chain, s1, s2)
}

fn project(weights: &mut [f64]) {
    for w in weights.iter_mut() {
        *w = w.clamp(0.0, 1.0);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        let n = weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = 1.0 / n);
    } else {
        weights.iter_mut().for_each(|w| *w /= total);
    }
}

/// Rational strategy from integer weights.
fn rational_point(mdp: &Mdp, weights: &[Vec<u64>]) -> MemorylessStrategy {
    let choice = (0..mdp.len())
        .map(|s| {
            let total: u64 = weights[s].iter().sum();
            let d = Distribution::new(
                mdp.actions(s)
                    .iter()
                    .zip(&weights[s])
                    .map(|((a, _), w)| (a.clone(), Rational::new(BigInt::from(*w), BigInt::from(total)))),
            )
            .expect("weights are normalized");
            (mdp.id(s).to_string(), d)
        })
        .collect();
    MemorylessStrategy { choice }
}

fn float_point(mdp: &Mdp, strategy: &MemorylessStrategy) -> Point {
    (0..mdp.len())
        .map(|s| {
            let d = &strategy.choice[mdp.id(s)];
            mdp.actions(s).iter().map(|(a, _)| to_f64(&d.prob(a))).collect()
        })
        .collect()
}

/// Rounds every weight but the last to the simplest rational within `tol`
/// and gives the remainder to the last action. `None` if that goes negative.
fn snap(mdp: &Mdp, x: &Point, tol: f64) -> Option<MemorylessStrategy> {
    let mut choice = std::collections::BTreeMap::new();
    for s in 0..mdp.len() {
        let acts = mdp.actions(s);
        let mut entries: Vec<(String, Rational)> = Vec::with_capacity(acts.len());
        let mut rest = Rational::from_integer(1.into());
        for ((a, _), w) in acts.iter().zip(&x[s]).take(acts.len() - 1) {
            let r = simplest_within(*w, tol).max(Rational::from_integer(0.into()));
            rest -= &r;
            entries.push((a.clone(), r));
        }
        if rest < Rational::from_integer(0.into()) {
            return None;
        }
        entries.push((acts[acts.len() - 1].0.clone(), rest));
        choice.insert(mdp.id(s).to_string(), Distribution::new(entries).ok()?);
    }
    Some(MemorylessStrategy { choice })
}

struct RestartOutcome {
    index: usize,
    start: MemorylessStrategy,
    best: Point,
    value: f64,
    trace: Vec<(usize, f64)>,
}

fn descend(
    mdp: &Mdp,
    label: &[usize],
    (s1, s2): (StateIx, StateIx),
    free: &[StateIx],
    index: usize,
    start: MemorylessStrategy,
    iters: usize,
) -> RestartOutcome {
    let mut x = float_point(mdp, &start);
    let mut value = float_objective(mdp, label, s1, s2, &x);
    let mut trace = vec![(index, value)];
    let mut step = START_STEP;
    for _ in 0..iters {
        let mut improved = false;
        for &s in free {
            for a in 0..x[s].len() {
                for dir in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[s][a] += dir * step;
                    project(&mut cand[s]);
                    let v = float_objective(mdp, label, s1, s2, &cand);
                    if v < value - 1e-12 {
                        x = cand;
                        value = v;
                        improved = true;
                    }
                }
            }
        }
        trace.push((index, value));
        if !improved {
            step /= 2.0;
            if step < MIN_STEP {
                break;
            }
        }
    }
    RestartOutcome {
        index,
        start,
        best: x,
        value,
        trace,
    }
}

/// Multistart projected coordinate descent over the per-state action simplices.
///
/// Restart 0 starts from the uniform strategy, the others from seeded random
/// rational points. Every start and the snapped end points of the best
/// restarts are re-evaluated exactly; the best exact value wins.
pub fn minimize_local(
    mdp: &Mdp,
    s1: &str,
    s2: &str,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<MinimizationResult> {
    if restarts == 0 || iters == 0 {
        return Err(Error::OutOfRange("restarts and iters must be at least 1".into()));
    }
    let (a, b) = (mdp.state(s1)?, mdp.state(s2)?);
    let mut label_ids: HashMap<&str, usize> = HashMap::new();
    let label: Vec<usize> = (0..mdp.len())
        .map(|s| {
            let fresh = label_ids.len();
            *label_ids.entry(mdp.label(s)).or_insert(fresh)
        })
        .collect();
    let free: Vec<StateIx> = (0..mdp.len()).filter(|s| mdp.actions(*s).len() > 1).collect();
    let starts: Vec<MemorylessStrategy> = (0..restarts)
        .map(|r| {
            if r == 0 {
                return MemorylessStrategy::uniform(mdp);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let weights: Vec<Vec<u64>> = (0..mdp.len())
                .map(|s| (0..mdp.actions(s).len()).map(|_| rng.gen_range(1..=1000)).collect())
                .collect();
            rational_point(mdp, &weights)
        })
        .collect();
    let mut outcomes: Vec<RestartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, start)| descend(mdp, &label, (a, b), &free, r, start, iters))
        .collect();
    outcomes.sort_by(|x, y| x.value.total_cmp(&y.value).then(x.index.cmp(&y.index)));

    let mut candidates: Vec<MemorylessStrategy> = Vec::new();
    for o in outcomes.iter().take(3) {
        candidates.extend(SNAP_TOLERANCES.iter().filter_map(|tol| snap(mdp, &o.best, *tol)));
    }
    let mut by_index: Vec<&RestartOutcome> = outcomes.iter().collect();
    by_index.sort_by_key(|o| o.index);
    candidates.extend(by_index.iter().map(|o| o.start.clone()));
    let mut best: Option<(Rational, MemorylessStrategy)> = None;
    for c in candidates {
        let v = objective(mdp, s1, s2, &c)?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, c));
        }
    }
    let (best_value, best_strategy) = best.expect("at least one candidate");
    let search_trace = by_index.iter().flat_map(|o| o.trace.iter().copied()).collect();
    Ok(MinimizationResult {
        best_strategy,
        best_value,
        search_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gen_example, Example, MdpBuilder};
    use crate::numeric::{int, rat};

    #[test]
    fn uniform_objectives_of_the_examples() {
        let non1 = gen_example(Example::Non1, &rat(1, 2)).unwrap();
        let u = MemorylessStrategy::uniform(&non1);
        assert_eq!(objective(&non1, "s0", "s1", &u).unwrap(), int(0));
        assert!(check_witness(&non1, "s0", "s1", &rat(1, 100), &u).unwrap());

        let non3 = gen_example(Example::Non3, &rat(1, 2)).unwrap();
        let u = MemorylessStrategy::uniform(&non3);
        assert_eq!(objective(&non3, "s0", "s1", &u).unwrap(), rat(1, 3));
        assert!(!check_witness(&non3, "s0", "s1", &rat(1, 3), &u).unwrap());
        assert!(check_witness(&non3, "s0", "s1", &rat(3, 2), &u).is_err());

        let pure = MemorylessStrategy::pure(&non3, &[]).unwrap();
        assert!(objective(&non3, "s0", "s1", &pure).unwrap() >= rat(1, 3));
    }

    #[test]
    fn single_action_search_is_constant() {
        let mdp = MdpBuilder::new()
            .state("a", "x")
            .state("b", "x")
            .state("c", "y")
            .edge("a", "m", "c", rat(1, 2))
            .edge("a", "m", "a", rat(1, 2))
            .edge("b", "m", "c", int(1))
            .edge("c", "m", "c", int(1))
            .build()
            .unwrap();
        let r = minimize_local(&mdp, "a", "b", 3, 5, 7).unwrap();
        let exact = objective(&mdp, "a", "b", &MemorylessStrategy::uniform(&mdp)).unwrap();
        assert_eq!(r.best_value, exact);
        let first = r.search_trace[0].1;
        assert!(r.search_trace.iter().all(|(_, v)| (v - first).abs() < 1e-12));
    }

    #[test]
    fn search_finds_the_bisimilar_strategy() {
        let mdp = gen_example(Example::Non1, &rat(1, 2)).unwrap();
        let r = minimize_local(&mdp, "s0", "s1", 8, 50, 1).unwrap();
        assert_eq!(r.best_value, int(0));
        let again = minimize_local(&mdp, "s0", "s1", 8, 50, 1).unwrap();
        assert_eq!(r, again);
    }
}
