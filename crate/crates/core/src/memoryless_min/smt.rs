//! SMT-LIB2 encoding of "some memoryless strategy has `d(s1, s2) < θ`", and an
//! exact evaluator for checking assignments against the emitted text.
//!
//! Coupling variables `w_s_t_u_v` are only declared for `u`, `v` among the
//! successors of `s` and `t` under some action; the marginal equalities force
//! all other entries to zero.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};

use crate::distances::distance_exact;
use crate::error::{Error, Result};
use crate::models::{Mdp, MemorylessStrategy, StateIx};
use crate::numeric::Rational;
use crate::strategies::induce_memoryless;
use crate::transport::optimal_coupling;

use super::check_theta;

fn is_simple_symbol(name: &str) -> bool {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
}

fn symbol(name: String) -> String {
    if is_simple_symbol(&name) {
        name
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

pub(crate) fn x_var(mdp: &Mdp, s: StateIx, action: &str) -> String {
    symbol(format!("x_{}_{}", mdp.id(s), action))
}

pub(crate) fn w_var(mdp: &Mdp, s: StateIx, t: StateIx, u: StateIx, v: StateIx) -> String {
    symbol(format!("w_{}_{}_{}_{}", mdp.id(s), mdp.id(t), mdp.id(u), mdp.id(v)))
}

pub(crate) fn d_var(mdp: &Mdp, s: StateIx, t: StateIx) -> String {
    symbol(format!("d_{}_{}", mdp.id(s), mdp.id(t)))
}

fn literal(q: &Rational) -> String {
    let body = if q.is_integer() {
        format!("{}.0", q.numer().abs())
    } else {
        format!("(/ {}.0 {}.0)", q.numer().abs(), q.denom())
    };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn sum(terms: &[String]) -> String {
    match terms.len() {
        0 => "0.0".into(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// `τ(s)(u)` as a linear expression in the strategy variables.
fn tau_expr(mdp: &Mdp, s: StateIx, u: StateIx) -> String {
    let terms: Vec<String> = mdp
        .actions(s)
        .iter()
        .filter(|(_, d)| d.contains(&u))
        .map(|(a, d)| {
            let p = d.prob(&u);
            if p.is_one() {
                x_var(mdp, s, a)
            } else {
                format!("(* {} {})", literal(&p), x_var(mdp, s, a))
            }
        })
        .collect();
    sum(&terms)
}

/// The SMT-LIB2 script over QF_NRA.
pub fn emit_etr_smt(mdp: &Mdp, s1: &str, s2: &str, theta: &Rational) -> Result<String> {
    check_theta(theta)?;
    let (a, b) = (mdp.state(s1)?, mdp.state(s2)?);
    let n = mdp.len();
    let succ: Vec<BTreeSet<StateIx>> = (0..n).map(|s| mdp.successors(s)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "(set-logic QF_NRA)");
    let _ = writeln!(
        out,
        "(set-info :source |memoryless strategy with d({s1}, {s2}) < {theta}|)"
    );
    let declare = |out: &mut String, name: &str| {
        let _ = writeln!(out, "(declare-fun {name} () Real)");
        let _ = writeln!(out, "(assert (and (<= 0.0 {name}) (<= {name} 1.0)))");
    };
    for s in 0..n {
        for (act, _) in mdp.actions(s) {
            declare(&mut out, &x_var(mdp, s, act));
        }
    }
    for s in 0..n {
        for t in 0..n {
            if mdp.same_label(s, t) {
                for u in &succ[s] {
                    for v in &succ[t] {
                        declare(&mut out, &w_var(mdp, s, t, *u, *v));
                    }
                }
            }
        }
    }
    for s in 0..n {
        for t in 0..n {
            declare(&mut out, &d_var(mdp, s, t));
        }
    }
    for s in 0..n {
        let xs: Vec<String> = mdp.actions(s).iter().map(|(act, _)| x_var(mdp, s, act)).collect();
        let _ = writeln!(out, "(assert (= {} 1.0))", sum(&xs));
    }
    for s in 0..n {
        for t in 0..n {
            if !mdp.same_label(s, t) {
                continue;
            }
            for u in &succ[s] {
                let row: Vec<String> = succ[t].iter().map(|v| w_var(mdp, s, t, *u, *v)).collect();
                let _ = writeln!(out, "(assert (= {} {}))", sum(&row), tau_expr(mdp, s, *u));
            }
            for v in &succ[t] {
                let col: Vec<String> = succ[s].iter().map(|u| w_var(mdp, s, t, *u, *v)).collect();
                let _ = writeln!(out, "(assert (= {} {}))", sum(&col), tau_expr(mdp, t, *v));
            }
            let products: Vec<String> = succ[s]
                .iter()
                .flat_map(|u| succ[t].iter().map(move |v| (*u, *v)))
                .map(|(u, v)| format!("(* {} {})", w_var(mdp, s, t, u, v), d_var(mdp, u, v)))
                .collect();
            let _ = writeln!(out, "(assert (= {} {}))", sum(&products), d_var(mdp, s, t));
        }
    }
    for s in 0..n {
        for t in 0..n {
            if !mdp.same_label(s, t) {
                let _ = writeln!(out, "(assert (= {} 1.0))", d_var(mdp, s, t));
            }
        }
    }
    let _ = writeln!(out, "(assert (< {} {}))", d_var(mdp, a, b), literal(theta));
    let _ = writeln!(out, "(check-sat)");
    Ok(out)
}

/// Values for every variable of [`emit_etr_smt`] derived from a strategy: its
/// action weights, optimal couplings under the exact distance, and the
/// distance itself. Keys are the symbols as they appear in the script.
pub fn witness_assignment(mdp: &Mdp, strategy: &MemorylessStrategy) -> Result<HashMap<String, Rational>> {
    let induced = induce_memoryless(mdp, strategy)?;
    let lmc = &induced.lmc;
    let d = distance_exact(lmc);
    let n = mdp.len();
    let mut env = HashMap::new();
    for s in 0..n {
        let choice = &strategy.choice[mdp.id(s)];
        for (act, _) in mdp.actions(s) {
            env.insert(x_var(mdp, s, act), choice.prob(act));
        }
    }
    for s in 0..n {
        for t in 0..n {
            env.insert(d_var(mdp, s, t), d.get(s, t).clone());
            if !mdp.same_label(s, t) {
                continue;
            }
            for u in mdp.successors(s) {
                for v in mdp.successors(t) {
                    env.insert(w_var(mdp, s, t, u, v), Rational::zero());
                }
            }
            let (w, _) = optimal_coupling(lmc.trans(s), lmc.trans(t), |u, v| d.get(u, v).clone());
            for ((u, v), p) in w.entries {
                env.insert(w_var(mdp, s, t, u, v), p);
            }
        }
    }
    Ok(env)
}

/// Outcome of evaluating a script under an assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtCheck {
    pub declared: usize,
    pub assertions: usize,
    /// Indices of assertions that evaluate to false.
    pub failed: Vec<usize>,
}

impl SmtCheck {
    pub fn satisfied(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => tokens.push(c.to_string()),
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                let mut sym = String::from('|');
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => sym.push(c),
                        None => return Err(Error::Syntax("unterminated quoted symbol".into())),
                    }
                }
                sym.push('|');
                tokens.push(sym);
            }
            c if c.is_whitespace() => {}
            c => {
                let mut atom = String::from(c);
                while let Some(&next) = chars.peek() {
                    if next.is_whitespace() || next == '(' || next == ')' {
                        break;
                    }
                    atom.push(next);
                    chars.next();
                }
                tokens.push(atom);
            }
        }
    }
    Ok(tokens)
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for tok in tokens {
        match tok.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty());
                let done = done.ok_or_else(|| Error::Syntax("unbalanced `)`".into()))?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(tok)),
        }
    }
    if stack.len() != 1 {
        return Err(Error::Syntax("unbalanced `(`".into()));
    }
    Ok(stack.pop().unwrap())
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Num(Rational),
    Bool(bool),
}

fn numeral(atom: &str) -> Option<Rational> {
    let (int_part, frac) = match atom.split_once('.') {
        Some((i, f)) => (i, f),
        None => (atom, ""),
    };
    if int_part.is_empty() || !int_part.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac}");
    let numer: num_bigint::BigInt = digits.parse().ok()?;
    let denom = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
    Some(Rational::new(numer, denom))
}

fn eval(e: &Sexp, env: &HashMap<String, Rational>) -> Result<Value> {
    let bad = |m: String| Error::Syntax(m);
    match e {
        Sexp::Atom(a) => {
            if let Some(q) = numeral(a) {
                return Ok(Value::Num(q));
            }
            match a.as_str() {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => env
                    .get(a)
                    .or_else(|| env.get(a.trim_matches('|')))
                    .cloned()
                    .map(Value::Num)
                    .ok_or_else(|| bad(format!("unassigned symbol `{a}`"))),
            }
        }
        Sexp::List(items) => {
            let (head, args) = items.split_first().ok_or_else(|| bad("empty application".into()))?;
            let Sexp::Atom(op) = head else {
                return Err(bad("application head is not a symbol".into()));
            };
            let vals = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>>>()?;
            let nums = || {
                vals.iter()
                    .map(|v| match v {
                        Value::Num(q) => Ok(q.clone()),
                        Value::Bool(_) => Err(bad(format!("`{op}` expects numbers"))),
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let chain = |cmp: fn(&Rational, &Rational) -> bool| -> Result<Value> {
                let ns = nums()?;
                Ok(Value::Bool(ns.windows(2).all(|w| cmp(&w[0], &w[1]))))
            };
            match op.as_str() {
                "and" | "or" => {
                    let bs = vals
                        .iter()
                        .map(|v| match v {
                            Value::Bool(b) => Ok(*b),
                            Value::Num(_) => Err(bad(format!("`{op}` expects booleans"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Value::Bool(if op == "and" { bs.iter().all(|b| *b) } else { bs.iter().any(|b| *b) }))
                }
                "not" => match vals.as_slice() {
                    [Value::Bool(b)] => Ok(Value::Bool(!b)),
                    _ => Err(bad("`not` expects one boolean".into())),
                },
                "=" => chain(|a, b| a == b),
                "<" => chain(|a, b| a < b),
                "<=" => chain(|a, b| a <= b),
                ">" => chain(|a, b| a > b),
                ">=" => chain(|a, b| a >= b),
                "+" => Ok(Value::Num(nums()?.into_iter().sum())),
                "*" => Ok(Value::Num(nums()?.into_iter().fold(Rational::one(), |a, b| a * b))),
                "-" => {
                    let ns = nums()?;
                    match ns.split_first() {
                        Some((first, [])) => Ok(Value::Num(-first.clone())),
                        Some((first, rest)) => Ok(Value::Num(rest.iter().fold(first.clone(), |a, b| a - b))),
                        None => Err(bad("`-` without arguments".into())),
                    }
                }
                "/" => {
                    let ns = nums()?;
                    let (first, rest) = ns.split_first().ok_or_else(|| bad("`/` without arguments".into()))?;
                    let mut acc = first.clone();
                    for r in rest {
                        if r.is_zero() {
                            return Err(bad("division by zero".into()));
                        }
                        acc /= r;
                    }
                    Ok(Value::Num(acc))
                }
                other => Err(bad(format!("unsupported operator `{other}`"))),
            }
        }
    }
}

/// Evaluates every `assert` of `script` under `env` exactly.
pub fn check_smt_assignment(script: &str, env: &HashMap<String, Rational>) -> Result<SmtCheck> {
    let mut check = SmtCheck {
        declared: 0,
        assertions: 0,
        failed: Vec::new(),
    };
    for cmd in parse_sexps(script)? {
        let Sexp::List(items) = &cmd else {
            return Err(Error::Syntax("top-level atom".into()));
        };
        let Some(Sexp::Atom(head)) = items.first() else {
            return Err(Error::Syntax("malformed command".into()));
        };
        match head.as_str() {
            "declare-fun" | "declare-const" => {
                let Some(Sexp::Atom(name)) = items.get(1) else {
                    return Err(Error::Syntax("malformed declaration".into()));
                };
                if !env.contains_key(name) {
                    return Err(Error::Syntax(format!("unassigned symbol `{name}`")));
                }
                check.declared += 1;
            }
            "assert" => {
                let body = items.get(1).ok_or_else(|| Error::Syntax("empty assert".into()))?;
                match eval(body, env)? {
                    Value::Bool(true) => {}
                    Value::Bool(false) => check.failed.push(check.assertions),
                    Value::Num(_) => return Err(Error::Syntax("assertion is not boolean".into())),
                }
                check.assertions += 1;
            }
            _ => {}
        }
    }
    Ok(check)
}
