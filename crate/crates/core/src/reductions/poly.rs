//! Polynomials, the two normal-form rewrites, and the polynomial-to-MDP
//! gadget for memoryless minimization.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Mdp, MdpBuilder, MemorylessStrategy, DEFAULT_ACTION};
use crate::numeric::{format_rational, int, parse_rational, Rational};

/// Largest degree accepted by the rewrites.
pub const MAX_DEGREE: u32 = 6;

/// Multivariate polynomial with exact coefficients. Monomials are keyed by
/// exponent vector; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    vars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyFile {
    vars: usize,
    monomials: Vec<MonomialEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonomialEntry {
    coef: String,
    exps: Vec<u32>,
}

impl Polynomial {
    /// Fails on exponent vectors of the wrong length or repeated ones.
    pub fn new(vars: usize, monomials: impl IntoIterator<Item = (Rational, Vec<u32>)>) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for (i, (c, e)) in monomials.into_iter().enumerate() {
            if e.len() != vars {
                return Err(Error::Polynomial(format!(
                    "monomial {i} has {} exponents, expected {vars}",
                    e.len()
                )));
            }
            if terms.contains_key(&e) {
                return Err(Error::Polynomial(format!("monomial {i} repeats exponents {e:?}")));
            }
            terms.insert(e, c);
        }
        terms.retain(|_, c: &mut Rational| !c.is_zero());
        Ok(Polynomial { vars, terms })
    }

    pub fn zero(vars: usize) -> Self {
        Polynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// `(coefficient, exponents)` pairs in exponent order.
    pub fn monomials(&self) -> impl Iterator<Item = (&Rational, &Vec<u32>)> {
        self.terms.iter().map(|(e, c)| (c, e))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        assert_eq!(x.len(), self.vars, "point has the wrong dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut v = c.clone();
                for (xi, k) in x.iter().zip(e) {
                    for _ in 0..*k {
                        v *= xi;
                    }
                }
                v
            })
            .sum()
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rational) {
        let slot = self.terms.entry(e.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.vars);
        for (e, c) in &self.terms {
            for (f, d) in &other.terms {
                let g = e.iter().zip(f).map(|(a, b)| a + b).collect();
                out.add_term(g, c * d);
            }
        }
        out
    }

    pub fn from_json(text: &[u8]) -> Result<Self> {
        let file: PolyFile = serde_json::from_slice(text).map_err(|e| Error::Syntax(e.to_string()))?;
        let mut monomials = Vec::with_capacity(file.monomials.len());
        for m in file.monomials {
            monomials.push((parse_rational(&m.coef)?, m.exps));
        }
        Polynomial::new(file.vars, monomials)
    }

    pub fn to_json(&self) -> String {
        let file = PolyFile {
            vars: self.vars,
            monomials: self
                .terms
                .iter()
                .map(|(e, c)| MonomialEntry {
                    coef: format_rational(c),
                    exps: e.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("serializable");
        s.push('\n');
        s
    }
}

fn check_degree(p: &Polynomial) -> Result<()> {
    match p.degree() {
        d if d > MAX_DEGREE => Err(Error::DegreeOverflow(d)),
        _ => Ok(()),
    }
}

/// `q(y, z) = -p(y - z)` over `2n` variables `y_1..y_n, z_1..z_n`.
pub fn etr2_transform(p: &Polynomial) -> Result<Polynomial> {
    check_degree(p)?;
    let n = p.vars;
    let var = |i: usize| {
        let mut e = vec![0; 2 * n];
        e[i] = 1;
        e
    };
    let diffs: Vec<Polynomial> = (0..n)
        .map(|i| Polynomial::new(2 * n, [(int(1), var(i)), (int(-1), var(n + i))]).expect("well formed"))
        .collect();
    let mut q = Polynomial::zero(2 * n);
    for (e, c) in &p.terms {
        let mut term = Polynomial::new(2 * n, [(-c, vec![0; 2 * n])]).expect("well formed");
        for (i, k) in e.iter().enumerate() {
            for _ in 0..*k {
                term = term.mul(&diffs[i]);
            }
        }
        for (f, d) in term.terms {
            q.add_term(f, d);
        }
    }
    Ok(q)
}

/// A nonnegative coefficient times a product of literals; literal `i > 0`
/// stands for `x_i`, `-i` for `1 - x_i` (variables are 1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalTerm {
    pub coef: Rational,
    pub literals: Vec<i32>,
}

impl NormalTerm {
    /// Product of the literals at `x`, without the coefficient.
    pub fn product(&self, x: &[Rational]) -> Rational {
        let mut v = Rational::one();
        for l in &self.literals {
            let xi = &x[l.unsigned_abs() as usize - 1];
            if *l > 0 {
                v *= xi;
            } else {
                v *= Rational::one() - xi;
            }
        }
        v
    }
}

/// `-theta + sum_j c_j prod_k x_{l(j,k)}` with six literals per term and
/// `sum_j c_j = 1`. `scale` is the factor applied to the source polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalFormPoly {
    pub vars: usize,
    pub theta: Rational,
    pub terms: Vec<NormalTerm>,
    pub scale: Rational,
}

impl NormalFormPoly {
    /// Validates a normal form given directly; `scale` is set to one.
    pub fn new(vars: usize, theta: Rational, terms: Vec<NormalTerm>) -> Result<Self> {
        let nf = NormalFormPoly {
            vars,
            theta,
            terms,
            scale: Rational::one(),
        };
        nf.validate()?;
        Ok(nf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vars == 0 {
            return Err(Error::Polynomial("normal form over zero variables".into()));
        }
        if self.theta.is_negative() {
            return Err(Error::Polynomial("theta is negative".into()));
        }
        for (j, t) in self.terms.iter().enumerate() {
            if t.literals.len() != MAX_DEGREE as usize {
                return Err(Error::Polynomial(format!(
                    "term {j} has {} literals, expected {MAX_DEGREE}",
                    t.literals.len()
                )));
            }
            if t.coef.is_negative() {
                return Err(Error::Polynomial(format!("term {j} has a negative coefficient")));
            }
            if let Some(l) = t.literals.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > self.vars) {
                return Err(Error::Polynomial(format!("term {j} has literal {l} outside 1..={}", self.vars)));
            }
        }
        let sum: Rational = self.terms.iter().map(|t| t.coef.clone()).sum();
        if !sum.is_one() {
            return Err(Error::Polynomial(format!(
                "coefficients sum to {}, expected 1",
                format_rational(&sum)
            )));
        }
        Ok(())
    }

    /// `sum_j c_j prod_k x_{l(j,k)}`, the part without `theta`.
    pub fn positive_part(&self, x: &[Rational]) -> Rational {
        self.terms.iter().map(|t| &t.coef * t.product(x)).sum()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.positive_part(x) - &self.theta
    }
}

/// Rewrites every negative monomial `-c x_{i_1}..x_{i_d}` as
/// `-c + sum_k c (1 - x_{i_k}) x_{i_{k+1}}..x_{i_d}`, giving
/// `p = -theta + sum of terms` before degree padding and rescaling.
pub fn etr3_rewrite(p: &Polynomial) -> Result<(Rational, Vec<NormalTerm>)> {
    check_degree(p)?;
    let mut theta = Rational::zero();
    let mut terms = Vec::new();
    for (e, c) in &p.terms {
        let lits: Vec<i32> = e
            .iter()
            .enumerate()
            .flat_map(|(i, k)| std::iter::repeat_n(i as i32 + 1, *k as usize))
            .collect();
        if c.is_positive() {
            terms.push(NormalTerm {
                coef: c.clone(),
                literals: lits,
            });
        } else {
            let c = -c;
            theta += &c;
            for k in 0..lits.len() {
                let mut l = vec![-lits[k]];
                l.extend_from_slice(&lits[k + 1..]);
                terms.push(NormalTerm {
                    coef: c.clone(),
                    literals: l,
                });
            }
        }
    }
    Ok((theta, terms))
}

/// Normal form of `p`: rewritten, padded to six literals with `x_1` and
/// `1 - x_1`, then scaled so the coefficients sum to one.
pub fn etr3_normalize(p: &Polynomial) -> Result<NormalFormPoly> {
    if p.vars == 0 {
        return Err(Error::Polynomial("constant polynomials over zero variables are rejected".into()));
    }
    let (theta, raw) = etr3_rewrite(p)?;
    let mut terms = Vec::new();
    let mut stack = raw;
    while let Some(t) = stack.pop() {
        if t.literals.len() == MAX_DEGREE as usize {
            terms.push(t);
        } else {
            for l in [-1, 1] {
                let mut literals = t.literals.clone();
                literals.push(l);
                stack.push(NormalTerm {
                    coef: t.coef.clone(),
                    literals,
                });
            }
        }
    }
    terms.reverse();
    let sum: Rational = terms.iter().map(|t| t.coef.clone()).sum();
    if sum.is_zero() {
        return Err(Error::Polynomial("the polynomial has no positive part to normalize".into()));
    }
    let scale = sum.recip();
    for t in &mut terms {
        t.coef *= &scale;
    }
    Ok(NormalFormPoly {
        vars: p.vars,
        theta: theta * &scale,
        terms,
        scale,
    })
}

/// The gadget MDP and its two start states.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyGadget {
    pub mdp: Mdp,
    pub s1: String,
    pub s2: String,
    pub vars: usize,
}

/// Actions of `v_i` towards `w_i` and `w_-i`.
pub const ACTION_X: &str = "x";
pub const ACTION_NOT_X: &str = "not_x";

fn v_state(i: usize) -> String {
    format!("v_{i}")
}

/// MDP whose memoryless strategies correspond to points `x` of `[0,1]^n`,
/// with `d(s1, s2) = 1 - sum_j c_j prod_k x_{l(j,k)} / (n+1)^7`.
pub fn poly_to_mdp(nf: &NormalFormPoly) -> Result<PolyGadget> {
    nf.validate()?;
    let n = nf.vars;
    let zero = "0";
    let one = int(1);
    let m = DEFAULT_ACTION;
    let mut b = MdpBuilder::new();
    // Chain part.
    for s in ["s1", "u'", "t"] {
        b.add_state(s, zero);
    }
    for (j, term) in nf.terms.iter().enumerate() {
        let j = j + 1;
        for (k, l) in term.literals.iter().enumerate() {
            let k = k + 1;
            let (u, v, w) = (format!("u_{j}_{k}"), format!("v_{j}_{k}"), format!("w_{j}_{k}"));
            b.add_state(&u, zero);
            b.add_state(&v, zero);
            b.add_state(&w, &l.to_string());
            b.add_edge(&u, m, &v, one.clone());
            b.add_edge(&v, m, &w, one.clone());
            let next = if k == MAX_DEGREE as usize {
                "u'".to_string()
            } else {
                format!("u_{j}_{}", k + 1)
            };
            b.add_edge(&w, m, &next, one.clone());
        }
        if !term.coef.is_zero() {
            b.add_edge("s1", m, &format!("u_{j}_1"), term.coef.clone());
        }
    }
    b.add_edge("u'", m, "t", one.clone());
    b.add_edge("t", m, "t", one.clone());
    // Gadget part.
    for s in ["s2", "u", "t'"] {
        b.add_state(s, zero);
    }
    b.add_edge("s2", m, "u", one.clone());
    let spread = Rational::new(1.into(), (n as i64 + 1).into());
    b.add_edge("u", m, "t'", spread.clone());
    b.add_edge("t'", m, "t'", one.clone());
    for i in 1..=n {
        let (pos, neg) = (format!("w_{i}"), format!("w_-{i}"));
        b.add_state(&v_state(i), zero);
        b.add_state(&pos, &i.to_string());
        b.add_state(&neg, &format!("-{i}"));
        b.add_edge("u", m, &v_state(i), spread.clone());
        b.add_edge(&v_state(i), ACTION_X, &pos, one.clone());
        b.add_edge(&v_state(i), ACTION_NOT_X, &neg, one.clone());
        b.add_edge(&pos, m, "u", one.clone());
        b.add_edge(&neg, m, "u", one.clone());
    }
    Ok(PolyGadget {
        mdp: b.build()?,
        s1: "s1".into(),
        s2: "s2".into(),
        vars: n,
    })
}

impl PolyGadget {
    /// The strategy `alpha(x)`: `v_i` takes `x` with probability `x_i`.
    pub fn strategy_for(&self, x: &[Rational]) -> Result<MemorylessStrategy> {
        if x.len() != self.vars {
            return Err(Error::OutOfRange(format!("point has {} coordinates, expected {}", x.len(), self.vars)));
        }
        let mut s = MemorylessStrategy::uniform(&self.mdp);
        for (i, xi) in x.iter().enumerate() {
            if xi.is_negative() || *xi > Rational::one() {
                return Err(Error::OutOfRange(format!("x_{} = {xi} lies outside [0, 1]", i + 1)));
            }
            s.set(
                &v_state(i + 1),
                &[(ACTION_X, xi.clone()), (ACTION_NOT_X, Rational::one() - xi)],
            )?;
        }
        Ok(s)
    }

    /// Inverse of [`PolyGadget::strategy_for`].
    pub fn point_of(&self, strategy: &MemorylessStrategy) -> Result<Vec<Rational>> {
        (1..=self.vars)
            .map(|i| {
                strategy
                    .choice
                    .get(&v_state(i))
                    .map(|d| d.prob(&ACTION_X.to_string()))
                    .ok_or_else(|| Error::Strategy(format!("no choice for state `{}`", v_state(i))))
            })
            .collect()
    }

    /// `1 - sum_j c_j prod_k x_{l(j,k)} / (n+1)^7`.
    pub fn expected_distance(nf: &NormalFormPoly, x: &[Rational]) -> Rational {
        let base = Rational::from_integer((nf.vars as i64 + 1).into());
        let denom = (0..7).fold(Rational::one(), |acc, _| acc * &base);
        Rational::one() - nf.positive_part(x) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memoryless_min::objective;
    use crate::numeric::rat;

    fn poly(vars: usize, monos: &[(Rational, &[u32])]) -> Polynomial {
        Polynomial::new(vars, monos.iter().map(|(c, e)| (c.clone(), e.to_vec()))).unwrap()
    }

    #[test]
    fn etr2_linear_and_square() {
        let q = etr2_transform(&poly(1, &[(int(1), &[1])])).unwrap();
        assert_eq!(q, poly(2, &[(int(-1), &[1, 0]), (int(1), &[0, 1])]));
        let q = etr2_transform(&poly(1, &[(int(1), &[2])])).unwrap();
        assert_eq!(
            q,
            poly(2, &[(int(-1), &[2, 0]), (int(2), &[1, 1]), (int(-1), &[0, 2])])
        );
        assert_eq!(
            etr2_transform(&poly(1, &[(int(1), &[7])])),
            Err(Error::DegreeOverflow(7))
        );
    }

    #[test]
    fn etr3_rewrite_of_negative_product() {
        let (theta, terms) = etr3_rewrite(&poly(2, &[(int(-1), &[1, 1])])).unwrap();
        assert_eq!(theta, int(1));
        assert_eq!(
            terms,
            vec![
                NormalTerm { coef: int(1), literals: vec![-1, 2] },
                NormalTerm { coef: int(1), literals: vec![-2] },
            ]
        );
    }

    #[test]
    fn etr3_normal_form_identity() {
        let p = poly(2, &[(int(-1), &[1, 1]), (rat(1, 2), &[0, 2]), (int(3), &[0, 0])]);
        let nf = etr3_normalize(&p).unwrap();
        nf.validate().unwrap();
        for x in [[rat(1, 3), rat(2, 5)], [int(0), int(1)], [rat(7, 9), rat(1, 8)]] {
            assert_eq!(nf.eval(&x), &nf.scale * p.eval(&x));
        }
        let pos = poly(1, &[(int(2), &[1])]);
        assert!(etr3_normalize(&pos).unwrap().theta.is_zero());
        assert!(etr3_normalize(&Polynomial::zero(0)).is_err());
    }

    #[test]
    fn gadget_size_and_identity() {
        let nf = NormalFormPoly::new(
            2,
            rat(1, 10),
            vec![
                NormalTerm { coef: rat(1, 3), literals: vec![1, 1, -2, 2, 1, -1] },
                NormalTerm { coef: rat(2, 3), literals: vec![2, 2, 2, -1, -1, 1] },
            ],
        )
        .unwrap();
        let g = poly_to_mdp(&nf).unwrap();
        assert_eq!(g.mdp.len(), 18 * 2 + 6 + 3 * 2);
        let x = [rat(1, 2), rat(3, 4)];
        let strat = g.strategy_for(&x).unwrap();
        assert_eq!(g.point_of(&strat).unwrap(), x.to_vec());
        let d = objective(&g.mdp, &g.s1, &g.s2, &strat).unwrap();
        assert_eq!(d, PolyGadget::expected_distance(&nf, &x));
    }

    #[test]
    fn short_terms_are_rejected() {
        let nf = NormalFormPoly {
            vars: 1,
            theta: int(0),
            terms: vec![NormalTerm { coef: int(1), literals: vec![1, 1, 1] }],
            scale: int(1),
        };
        assert!(poly_to_mdp(&nf).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = poly(2, &[(rat(-3, 2), &[1, 2]), (int(4), &[0, 0])]);
        assert_eq!(Polynomial::from_json(p.to_json().as_bytes()).unwrap(), p);
        assert!(Polynomial::from_json(br#"{"vars":1,"monomials":[{"coef":"1","exps":[1,2]}]}"#).is_err());
    }
}
