//! `bisimdist` command-line front end.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bisimdist::bisim::bisim_partition_traced;
use bisimdist::distances::{distance_exact, distance_vi_capped, lt1_lmc};
use bisimdist::general_lt1::{decide_lt1, pair_zero_set, reduce_bisim_to_lt1, CAP_ENV, DEFAULT_CAP};
use bisimdist::memoryless_min::{emit_etr_smt, minimize_local};
use bisimdist::models::{
    gen_example, parse_model, parse_pa, parse_strategy, serialize_model, serialize_strategy, Example, Model,
    MemorylessStrategy,
};
use bisimdist::numeric::{format_rational, parse_rational, Rational};
use bisimdist::reductions::{
    emptiness_search, etr3_normalize, pa_theta, pa_to_mdp, poly_to_mdp, series_value, Polynomial,
};
use bisimdist::strategies::induce_memoryless;
use bisimdist::{Error, Lmc, Mdp};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bisimdist", version, about = "Bisimilarity distances on labelled Markov chains and MDPs")]
struct Cli {
    /// Print plain text instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a file is a well-formed model, automaton, strategy or polynomial.
    Validate {
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Kind::Model)]
        kind: Kind,
    },
    /// Bisimilarity classes of an LMC (or of the chain induced by a strategy).
    Bisim {
        input: Option<PathBuf>,
        /// `uniform` or a strategy file.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Bisimilarity distances.
    Distance {
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        /// Pair selector `s,t`; repeatable. All pairs when omitted.
        #[arg(long = "pairs")]
        pairs: Vec<String>,
        #[arg(long)]
        strategy: Option<String>,
        /// Stopping threshold of value iteration.
        #[arg(long, default_value = "1/1000000")]
        epsilon: String,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
    /// Whether pairs of an LMC are at distance below one.
    Lt1Lmc {
        input: Option<PathBuf>,
        #[arg(long = "pairs")]
        pairs: Vec<String>,
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Local search for a memoryless strategy minimizing the distance of a pair.
    Minimize {
        input: Option<PathBuf>,
        #[arg(long = "pairs")]
        pair: String,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 400)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// SMT-LIB script stating that some memoryless strategy gets below theta.
    EmitEtr {
        input: Option<PathBuf>,
        #[arg(long = "pairs")]
        pair: String,
        #[arg(long)]
        theta: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Whether some general strategy puts a pair at distance below one.
    Lt1 {
        input: Option<PathBuf>,
        /// Pair selectors; without them the zero pairs are listed.
        #[arg(long = "pairs")]
        pairs: Vec<String>,
        /// Largest MDP accepted.
        #[arg(long, env = CAP_ENV, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Hardness constructions as model compilers.
    Reduce {
        #[command(subcommand)]
        what: Reduction,
    },
    /// Distance of the automaton MDP under the always-m_x strategy.
    PaTheta {
        input: Option<PathBuf>,
        /// Depth of the series bracket.
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// Shortest word accepted with probability above 1/2, up to a length.
    PaEmpty {
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        maxlen: usize,
    },
    /// One of the noninterference examples as an MDP.
    Example {
        #[arg(value_enum)]
        which: ExampleArg,
        #[arg(long, default_value = "1/2")]
        p: String,
    },
}

#[derive(Subcommand)]
enum Reduction {
    /// Polynomial file to the memoryless-minimization gadget.
    Poly {
        input: Option<PathBuf>,
        /// Print only the model file.
        #[arg(long)]
        model_only: bool,
    },
    /// Two-letter automaton to the general-minimization MDP.
    Pa {
        input: Option<PathBuf>,
        #[arg(long)]
        model_only: bool,
    },
    /// MDP and pair to the doubled MDP of the distance-below-one problem.
    Lt1Hardness {
        input: Option<PathBuf>,
        #[arg(long = "pairs")]
        pair: String,
        #[arg(long)]
        model_only: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Model,
    Pa,
    Strategy,
    Poly,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Vi,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Non1,
    Non2,
    Non3,
}

impl From<ExampleArg> for Example {
    fn from(e: ExampleArg) -> Self {
        match e {
            ExampleArg::Non1 => Example::Non1,
            ExampleArg::Non2 => Example::Non2,
            ExampleArg::Non3 => Example::Non3,
        }
    }
}

/// What a command prints: JSON, its plain-text rendering, or raw text.
enum Output {
    Json(Value, String),
    Raw(String),
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match path {
        Some(p) if p != Path::new("-") => {
            buf = std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
        }
        _ => {
            std::io::stdin().read_to_end(&mut buf).context("cannot read standard input")?;
        }
    }
    Ok(buf)
}

fn invalid(location: &str, message: impl Into<String>) -> anyhow::Error {
    Error::Invalid {
        location: location.into(),
        message: message.into(),
    }
    .into()
}

fn rational_arg(flag: &str, text: &str) -> Result<Rational> {
    parse_rational(text).map_err(|e| invalid(flag, e.to_string()))
}

fn r(x: &Rational) -> Value {
    Value::String(format_rational(x))
}

/// Splits `s,t` at the comma that leaves two known states; ids may contain commas.
fn split_pair(selector: &str, known: impl Fn(&str) -> bool) -> Result<(String, String)> {
    for (i, _) in selector.match_indices(',') {
        let (a, b) = (&selector[..i], &selector[i + 1..]);
        if known(a) && known(b) {
            return Ok((a.to_string(), b.to_string()));
        }
    }
    Err(invalid("--pairs", format!("`{selector}` does not name two states as `s,t`")))
}

fn load_model(input: Option<&Path>) -> Result<Model> {
    Ok(parse_model(&read_input(input)?)?)
}

fn load_mdp(input: Option<&Path>) -> Result<Mdp> {
    match load_model(input)? {
        Model::Mdp(m) => Ok(m),
        Model::Lmc(l) => Ok(Mdp::from_lmc(&l)),
    }
}

fn load_strategy(spec: &str, mdp: &Mdp) -> Result<MemorylessStrategy> {
    if spec == "uniform" {
        return Ok(MemorylessStrategy::uniform(mdp));
    }
    Ok(parse_strategy(&read_input(Some(Path::new(spec)))?)?)
}

/// The chain to analyse: an LMC as given, or the chain an MDP induces under
/// `strategy`. MDPs with one action per state need no strategy.
fn load_chain(input: Option<&Path>, strategy: Option<&str>) -> Result<Lmc> {
    match (load_model(input)?, strategy) {
        (Model::Lmc(l), None) => Ok(l),
        (Model::Lmc(_), Some(_)) => Err(invalid("--strategy", "strategies apply to MDPs only")),
        (Model::Mdp(m), Some(s)) => {
            let strat = load_strategy(s, &m)?;
            Ok(induce_memoryless(&m, &strat)?.lmc)
        }
        (Model::Mdp(m), None) => m
            .as_lmc()
            .ok_or_else(|| invalid("--strategy", "the MDP has nondeterministic states; pass --strategy")),
    }
}

fn json_of(text: &str) -> Value {
    serde_json::from_str(text).expect("serializer emits JSON")
}

fn validate(input: Option<&Path>, kind: Kind) -> Result<Output> {
    let text = read_input(input)?;
    let (kind, summary) = match kind {
        Kind::Model => match parse_model(&text)? {
            Model::Lmc(l) => ("lmc", json!({ "states": l.len() })),
            Model::Mdp(m) => ("mdp", json!({ "states": m.len(), "deterministic": m.is_deterministic() })),
        },
        Kind::Pa => {
            let pa = parse_pa(&text, false)?;
            let ok = pa.check_reduction_form().is_ok();
            ("pa", json!({ "states": pa.len(), "letters": pa.letters(), "reduction_form": ok }))
        }
        Kind::Strategy => {
            let s = parse_strategy(&text)?;
            ("strategy", json!({ "states": s.choice.len() }))
        }
        Kind::Poly => {
            let p = Polynomial::from_json(&text)?;
            ("poly", json!({ "vars": p.vars(), "degree": p.degree() }))
        }
    };
    let human = format!("valid {kind} {summary}");
    Ok(Output::Json(json!({ "valid": true, "type": kind, "summary": summary }), human))
}

fn bisim(input: Option<&Path>, strategy: Option<&str>) -> Result<Output> {
    let lmc = load_chain(input, strategy)?;
    let (part, rounds) = bisim_partition_traced(&lmc);
    let blocks: Vec<Vec<&str>> = part
        .blocks()
        .iter()
        .map(|b| b.iter().map(|s| lmc.id(*s)).collect())
        .collect();
    let human = blocks.iter().map(|b| format!("{{{}}}", b.join(", "))).collect::<Vec<_>>().join("\n");
    Ok(Output::Json(json!({ "blocks": blocks, "rounds": rounds }), human))
}

fn pairs_of(lmc_ids: &[String], selectors: &[String]) -> Result<Vec<(String, String)>> {
    let known = |s: &str| lmc_ids.iter().any(|x| x == s);
    if selectors.is_empty() {
        return Ok(lmc_ids
            .iter()
            .flat_map(|s| lmc_ids.iter().map(move |t| (s.clone(), t.clone())))
            .collect());
    }
    selectors.iter().map(|p| split_pair(p, known)).collect()
}

fn ids(lmc: &Lmc) -> Vec<String> {
    lmc.states().iter().map(|s| s.id.clone()).collect()
}

fn distance(
    input: Option<&Path>,
    method: Method,
    selectors: &[String],
    strategy: Option<&str>,
    epsilon: &str,
    max_iter: usize,
) -> Result<Output> {
    let lmc = load_chain(input, strategy)?;
    let pairs = pairs_of(&ids(&lmc), selectors)?;
    let (matrix, extra) = match method {
        Method::Exact => (distance_exact(&lmc), json!({})),
        Method::Vi => {
            let eps = rational_arg("--epsilon", epsilon)?;
            let vi = distance_vi_capped(&lmc, &eps, max_iter);
            let extra = json!({ "iterations": vi.iterations, "last_step": r(&vi.last_step) });
            (vi.values, extra)
        }
    };
    let mut rows = Vec::new();
    let mut human = Vec::new();
    for (s, t) in &pairs {
        let d = matrix.get(lmc.state(s)?, lmc.state(t)?);
        human.push(format!("d({s}, {t}) = {}", format_rational(d)));
        rows.push(json!({ "s": s, "t": t, "d": r(d) }));
    }
    let method = if method == Method::Exact { "exact" } else { "vi" };
    let mut out = json!({ "method": method, "distances": rows });
    if let (Value::Object(o), Value::Object(e)) = (&mut out, extra) {
        o.extend(e);
    }
    Ok(Output::Json(out, human.join("\n")))
}

fn lt1_lmc_cmd(input: Option<&Path>, selectors: &[String], strategy: Option<&str>) -> Result<Output> {
    let lmc = load_chain(input, strategy)?;
    let pairs = pairs_of(&ids(&lmc), selectors)?;
    let mut rows = Vec::new();
    let mut human = Vec::new();
    for (s, t) in &pairs {
        let v = lt1_lmc(&lmc, s, t)?;
        human.push(format!("d({s}, {t}) < 1: {v}"));
        rows.push(json!({ "s": s, "t": t, "lt1": v }));
    }
    Ok(Output::Json(json!({ "pairs": rows }), human.join("\n")))
}

fn mdp_pair(mdp: &Mdp, selector: &str) -> Result<(String, String)> {
    split_pair(selector, |s| mdp.index_of(s).is_some())
}

fn minimize(input: Option<&Path>, pair: &str, restarts: usize, iters: usize, seed: u64) -> Result<Output> {
    let mdp = load_mdp(input)?;
    let (s, t) = mdp_pair(&mdp, pair)?;
    let res = minimize_local(&mdp, &s, &t, restarts, iters, seed)?;
    let human = format!("best d({s}, {t}) = {}", format_rational(&res.best_value));
    Ok(Output::Json(
        json!({
            "s": s,
            "t": t,
            "best_value": r(&res.best_value),
            "best_strategy": json_of(&serialize_strategy(&res.best_strategy)),
            "sweeps": res.search_trace.len(),
        }),
        human,
    ))
}

fn emit_etr(input: Option<&Path>, pair: &str, theta: &str, output: Option<&Path>) -> Result<Output> {
    let mdp = load_mdp(input)?;
    let (s, t) = mdp_pair(&mdp, pair)?;
    let theta = rational_arg("--theta", theta)?;
    let script = emit_etr_smt(&mdp, &s, &t, &theta)?;
    match output {
        Some(path) => {
            std::fs::write(path, &script).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(Output::Json(
                json!({ "written": path.display().to_string(), "bytes": script.len() }),
                format!("wrote {}", path.display()),
            ))
        }
        None => Ok(Output::Raw(script)),
    }
}

fn lt1(input: Option<&Path>, selectors: &[String], cap: usize) -> Result<Output> {
    let mdp = load_mdp(input)?;
    if selectors.is_empty() {
        let zero: Vec<[&str; 2]> = pair_zero_set(&mdp, cap)?
            .into_iter()
            .map(|(s, t)| [mdp.id(s), mdp.id(t)])
            .collect();
        let human = zero.iter().map(|[s, t]| format!("{s} ~ {t}")).collect::<Vec<_>>().join("\n");
        return Ok(Output::Json(json!({ "zero_pairs": zero }), human));
    }
    let mut rows = Vec::new();
    let mut human = Vec::new();
    for sel in selectors {
        let (s, t) = mdp_pair(&mdp, sel)?;
        let v = decide_lt1(&mdp, &s, &t, cap)?;
        human.push(format!("some strategy gives d({s}, {t}) < 1: {v}"));
        rows.push(json!({ "s": s, "t": t, "lt1": v }));
    }
    Ok(Output::Json(json!({ "pairs": rows }), human.join("\n")))
}

fn model_output(mdp: &Mdp, model_only: bool, mut meta: Value, human: String) -> Output {
    let text = serialize_model(&Model::Mdp(mdp.clone()));
    if model_only {
        return Output::Raw(text);
    }
    if let Value::Object(o) = &mut meta {
        o.insert("model".into(), json_of(&text));
    }
    Output::Json(meta, human)
}

fn reduce(what: &Reduction) -> Result<Output> {
    match what {
        Reduction::Poly { input, model_only } => {
            let p = Polynomial::from_json(&read_input(input.as_deref())?)?;
            let nf = etr3_normalize(&p)?;
            let g = poly_to_mdp(&nf)?;
            let base = Rational::from_integer((nf.vars as i64 + 1).into());
            let denom = (0..7).fold(Rational::from_integer(1.into()), |acc, _| acc * &base);
            let threshold = Rational::from_integer(1.into()) - &nf.theta / denom;
            let human = format!(
                "{} states; p(x) > 0 iff some strategy gives d({}, {}) < {}",
                g.mdp.len(),
                g.s1,
                g.s2,
                format_rational(&threshold)
            );
            let meta = json!({
                "s1": g.s1,
                "s2": g.s2,
                "theta": r(&nf.theta),
                "scale": r(&nf.scale),
                "terms": nf.terms.len(),
                "threshold": r(&threshold),
            });
            Ok(model_output(&g.mdp, *model_only, meta, human))
        }
        Reduction::Pa { input, model_only } => {
            let pa = parse_pa(&read_input(input.as_deref())?, true)?;
            let g = pa_to_mdp(&pa)?;
            let theta = pa_theta(&pa)?;
            let human = format!(
                "{} states; nonempty iff some strategy gives d({}, {}) < {}",
                g.mdp.len(),
                g.s1,
                g.s2,
                format_rational(&theta)
            );
            let meta = json!({ "s1": g.s1, "s2": g.s2, "theta": r(&theta) });
            Ok(model_output(&g.mdp, *model_only, meta, human))
        }
        Reduction::Lt1Hardness { input, pair, model_only } => {
            let mdp = load_mdp(input.as_deref())?;
            let (s, t) = mdp_pair(&mdp, pair)?;
            let red = reduce_bisim_to_lt1(&mdp, &s, &t)?;
            let human = format!("{} states; pair {}, {}", red.mdp.len(), red.left, red.right);
            let meta = json!({ "left": red.left, "right": red.right });
            Ok(model_output(&red.mdp, *model_only, meta, human))
        }
    }
}

fn pa_theta_cmd(input: Option<&Path>, depth: usize) -> Result<Output> {
    let pa = parse_pa(&read_input(input)?, true)?;
    let theta = pa_theta(&pa)?;
    let (lo, hi) = series_value(&pa, depth);
    let human = format!(
        "theta = {} in [{}, {}] at depth {depth}",
        format_rational(&theta),
        format_rational(&lo),
        format_rational(&hi)
    );
    Ok(Output::Json(
        json!({ "theta": r(&theta), "depth": depth, "lower": r(&lo), "upper": r(&hi) }),
        human,
    ))
}

fn pa_empty(input: Option<&Path>, maxlen: usize) -> Result<Output> {
    let pa = parse_pa(&read_input(input)?, false)?;
    Ok(match emptiness_search(&pa, maxlen) {
        Some(w) => {
            let pr = pa.accept_prob(&w);
            let text = pa.word_text(&w);
            let human = format!("`{text}` accepted with probability {}", format_rational(&pr));
            Output::Json(
                json!({ "maxlen": maxlen, "witness": text, "letters": w.len(), "probability": r(&pr) }),
                human,
            )
        }
        None => Output::Json(
            json!({ "maxlen": maxlen, "witness": null }),
            format!("no word of length at most {maxlen} is accepted with probability above 1/2"),
        ),
    })
}

fn example(which: ExampleArg, p: &str) -> Result<Output> {
    let p = rational_arg("--p", p)?;
    let mdp = gen_example(which.into(), &p)?;
    Ok(Output::Raw(serialize_model(&Model::Mdp(mdp))))
}

fn run(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Validate { input, kind } => validate(input.as_deref(), *kind),
        Command::Bisim { input, strategy } => bisim(input.as_deref(), strategy.as_deref()),
        Command::Distance {
            input,
            method,
            pairs,
            strategy,
            epsilon,
            max_iter,
        } => distance(input.as_deref(), *method, pairs, strategy.as_deref(), epsilon, *max_iter),
        Command::Lt1Lmc { input, pairs, strategy } => lt1_lmc_cmd(input.as_deref(), pairs, strategy.as_deref()),
        Command::Minimize {
            input,
            pair,
            restarts,
            iters,
            seed,
        } => minimize(input.as_deref(), pair, *restarts, *iters, *seed),
        Command::EmitEtr {
            input,
            pair,
            theta,
            output,
        } => emit_etr(input.as_deref(), pair, theta, output.as_deref()),
        Command::Lt1 { input, pairs, cap } => lt1(input.as_deref(), pairs, *cap),
        Command::Reduce { what } => reduce(what),
        Command::PaTheta { input, depth } => pa_theta_cmd(input.as_deref(), *depth),
        Command::PaEmpty { input, maxlen } => pa_empty(input.as_deref(), *maxlen),
        Command::Example { which, p } => example(*which, p),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let text = match out {
                Output::Json(_, human) if cli.human => format!("{human}\n"),
                Output::Json(v, _) => format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable")),
                Output::Raw(s) => s,
            };
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
