//! Probabilistic bisimilarity by partition refinement, and the induced
//! classification of state pairs.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use crate::error::Result;
use crate::models::{Lmc, StateIx};
use crate::numeric::{Rational, Scalar};

/// Partition of the states into bisimilarity classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<StateIx>>,
    block_of: Vec<usize>,
}

impl Partition {
    /// Builds a partition from a block index per state; blocks are numbered
    /// by their smallest member.
    pub fn from_block_ids(ids: &[usize]) -> Self {
        let mut renumber: HashMap<usize, usize> = HashMap::new();
        let mut blocks: Vec<Vec<StateIx>> = Vec::new();
        let mut block_of = Vec::with_capacity(ids.len());
        for (s, id) in ids.iter().enumerate() {
            let b = *renumber.entry(*id).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(s);
            block_of.push(b);
        }
        Partition { blocks, block_of }
    }

    pub fn blocks(&self) -> &[Vec<StateIx>] {
        &self.blocks
    }

    pub fn block_of(&self, s: StateIx) -> usize {
        self.block_of[s]
    }

    pub fn block_ids(&self) -> &[usize] {
        &self.block_of
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn same_block(&self, s: StateIx, t: StateIx) -> bool {
        self.block_of[s] == self.block_of[t]
    }
}

/// Signature-based refinement. `initial` gives the starting block of every
/// state; `signature(s, block_of)` lists `(block, key)` masses of `s` into the
/// current blocks. Returns the stable partition and the block count after each
/// round (including the initial one).
pub(crate) fn refine<K, F>(initial: Vec<usize>, mut signature: F) -> (Vec<usize>, Vec<usize>)
where
    K: Ord + Hash + Clone,
    F: FnMut(StateIx, &[usize]) -> Vec<(usize, K)>,
{
    let mut block_of = canonical(&initial);
    let mut counts = vec![count_blocks(&block_of)];
    loop {
        let mut keys: HashMap<(usize, Vec<(usize, K)>), usize> = HashMap::new();
        let mut next = Vec::with_capacity(block_of.len());
        for s in 0..block_of.len() {
            let mut sig = signature(s, &block_of);
            sig.sort();
            let fresh = keys.len();
            next.push(*keys.entry((block_of[s], sig)).or_insert(fresh));
        }
        let next = canonical(&next);
        let count = count_blocks(&next);
        let stable = count == *counts.last().unwrap();
        block_of = next;
        counts.push(count);
        if stable {
            return (block_of, counts);
        }
    }
}

fn canonical(ids: &[usize]) -> Vec<usize> {
    let mut renumber = HashMap::new();
    ids.iter()
        .map(|id| {
            let fresh = renumber.len();
            *renumber.entry(*id).or_insert(fresh)
        })
        .collect()
}

fn count_blocks(block_of: &[usize]) -> usize {
    block_of.iter().max().map_or(0, |m| m + 1)
}

fn label_blocks(lmc: &Lmc) -> Vec<usize> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    (0..lmc.len())
        .map(|s| {
            let fresh = ids.len();
            *ids.entry(lmc.label(s)).or_insert(fresh)
        })
        .collect()
}

fn lmc_signature(lmc: &Lmc, s: StateIx, block_of: &[usize]) -> Vec<(usize, Rational)> {
    let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
    for (t, p) in lmc.trans(s).iter() {
        *mass.entry(block_of[*t]).or_default() += p;
    }
    mass.into_iter().collect()
}

/// Coarsest label-respecting partition in which related states give equal
/// mass to every block.
pub fn bisim_partition(lmc: &Lmc) -> Partition {
    bisim_partition_traced(lmc).0
}

/// As [`bisim_partition`], also returning the block count after each round.
pub fn bisim_partition_traced(lmc: &Lmc) -> (Partition, Vec<usize>) {
    let (ids, counts) = refine(label_blocks(lmc), |s, b| lmc_signature(lmc, s, b));
    (Partition::from_block_ids(&ids), counts)
}

/// Key under which transition masses are compared during refinement.
pub(crate) trait MassKey: Scalar {
    type Key: Ord + Hash + Clone;
    fn mass_key(&self) -> Self::Key;
}

impl MassKey for Rational {
    type Key = Rational;
    fn mass_key(&self) -> Rational {
        self.clone()
    }
}

/// Floating-point masses are compared after rounding to 1e-9.
impl MassKey for f64 {
    type Key = i64;
    fn mass_key(&self) -> i64 {
        (self * 1e9).round() as i64
    }
}

/// Bisimulation classes of a chain given as successor lists and label ids.
pub(crate) fn chain_partition<S: MassKey>(succ: &[Vec<(usize, S)>], label: &[usize]) -> Vec<usize> {
    refine(label.to_vec(), |s, block_of| {
        let mut mass: BTreeMap<usize, S> = BTreeMap::new();
        for (t, p) in &succ[s] {
            let e = mass.entry(block_of[*t]).or_insert_with(S::zero);
            *e = e.clone() + p.clone();
        }
        mass.into_iter().map(|(b, m)| (b, m.mass_key())).collect()
    })
    .0
}

pub fn is_bisimilar(lmc: &Lmc, s: &str, t: &str) -> Result<bool> {
    let (s, t) = (lmc.state(s)?, lmc.state(t)?);
    Ok(bisim_partition(lmc).same_block(s, t))
}

/// Class of an ordered state pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairClass {
    /// Bisimilar pair.
    Zero,
    /// Labels differ.
    OneMismatch,
    Unknown,
}

/// Classification of all ordered pairs of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairClassification {
    n: usize,
    class: Vec<PairClass>,
}

impl PairClassification {
    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn class(&self, s: StateIx, t: StateIx) -> PairClass {
        self.class[s * self.n + t]
    }

    fn collect(&self, which: PairClass) -> Vec<(StateIx, StateIx)> {
        (0..self.n)
            .flat_map(|s| (0..self.n).map(move |t| (s, t)))
            .filter(|(s, t)| self.class(*s, *t) == which)
            .collect()
    }

    pub fn zero(&self) -> Vec<(StateIx, StateIx)> {
        self.collect(PairClass::Zero)
    }

    pub fn one_mismatch(&self) -> Vec<(StateIx, StateIx)> {
        self.collect(PairClass::OneMismatch)
    }

    pub fn unknown(&self) -> Vec<(StateIx, StateIx)> {
        self.collect(PairClass::Unknown)
    }
}

pub fn classify_pairs(lmc: &Lmc) -> PairClassification {
    classify_with(lmc, &bisim_partition(lmc))
}

pub fn classify_with(lmc: &Lmc, partition: &Partition) -> PairClassification {
    let n = lmc.len();
    let mut class = Vec::with_capacity(n * n);
    for s in 0..n {
        for t in 0..n {
            class.push(if partition.same_block(s, t) {
                PairClass::Zero
            } else if !lmc.same_label(s, t) {
                PairClass::OneMismatch
            } else {
                PairClass::Unknown
            });
        }
    }
    PairClassification { n, class }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LmcBuilder;
    use crate::numeric::rat;

    #[test]
    fn same_labelled_sinks_share_a_block() {
        let m = LmcBuilder::new()
            .state("a", "x")
            .state("b", "x")
            .edge("a", "a", rat(1, 1))
            .edge("b", "b", rat(1, 1))
            .build()
            .unwrap();
        assert_eq!(bisim_partition(&m).len(), 1);
        assert!(is_bisimilar(&m, "a", "b").unwrap());
        assert!(is_bisimilar(&m, "a", "a").unwrap());
        assert!(is_bisimilar(&m, "a", "zz").is_err());
    }

    #[test]
    fn distinct_labels_give_diagonal_zero_set() {
        let m = LmcBuilder::new()
            .state("a", "x")
            .state("b", "y")
            .state("c", "z")
            .edge("a", "b", rat(1, 1))
            .edge("b", "c", rat(1, 1))
            .edge("c", "a", rat(1, 1))
            .build()
            .unwrap();
        let c = classify_pairs(&m);
        assert_eq!(c.zero(), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(c.unknown().is_empty());
        assert_eq!(c.one_mismatch().len(), 6);
    }

    #[test]
    fn mass_differences_split_blocks() {
        // a reaches the y-state with 1/2, b with 1/3.
        let m = LmcBuilder::new()
            .state("a", "x")
            .state("b", "x")
            .state("c", "y")
            .edge("a", "c", rat(1, 2))
            .edge("a", "a", rat(1, 2))
            .edge("b", "c", rat(1, 3))
            .edge("b", "b", rat(2, 3))
            .edge("c", "c", rat(1, 1))
            .build()
            .unwrap();
        let (p, counts) = bisim_partition_traced(&m);
        assert_eq!(p.len(), 3);
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(classify_pairs(&m).class(0, 1), PairClass::Unknown);
    }
}
