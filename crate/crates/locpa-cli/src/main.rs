//! `locpa`: normalization, equivalence checking, state-space export and
//! law suites for located truly concurrent process algebra.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locpa_core::alphabet::{Action, Alphabet};
use locpa_core::equiv::{check, RelationKind, Verdict};
use locpa_core::laws::{run_suite, LawOptions, Suite, SuiteReport};
use locpa_core::pes::term_to_pes;
use locpa_core::recursion::{aip_check, cfar_apply, clusters, clusters_json, validate_guarded, AipVerdict};
use locpa_core::rewrite::{default_fuel, normalize};
use locpa_core::sos::{build_lts, Bounds, Mode};
use locpa_core::syntax::{parse_specs, parse_term, print_term};
use locpa_core::term::{Env, System, Term};
use thiserror::Error;

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Ok = 0,
    Inequivalent = 1,
    Input = 2,
    Unknown = 3,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Input(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type CliResult = Result<Status, CliError>;

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser)]
#[command(name = "locpa", version, about = "Workbench for truly concurrent process calculi with localities")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Alphabet file (actions, comm, conflict, causal, relabel, encap, hide)
    #[arg(short = 'a', long, global = true, value_name = "PATH")]
    alphabet: Option<PathBuf>,
    /// Locality semantics: static or dynamic
    #[arg(long, global = true, default_value = "static", value_parser = parse_mode)]
    mode: Mode,
    /// Exploration limits, e.g. `states=5000,depth=200,phi=64,nodes=200000,fuel=10000`
    #[arg(long, global = true, value_name = "LIST")]
    bounds: Option<String>,
    /// Random seed for sampled runs
    #[arg(long, global = true, env = "LOCPA_SEED", default_value_t = 1)]
    seed: u64,
    /// Constant definition `NAME = term` (repeatable)
    #[arg(short = 'D', long = "define", global = true, value_name = "DEF")]
    defines: Vec<String>,
    /// File of linear recursive specifications (repeatable)
    #[arg(long = "spec", global = true, value_name = "PATH")]
    specs: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a term to normal form
    Norm {
        term: String,
        /// Rule system: batc, aptc, encap, proj, tau, hide
        #[arg(long)]
        rules: Option<String>,
        /// Emit every rewrite as a JSON line before the normal form
        #[arg(long)]
        trace: bool,
    },
    /// Decide equivalence of two terms
    Eq {
        lhs: String,
        rhs: String,
        /// Relation, e.g. `step-sl-strong`, `hhp-sl-strong`, `rb-step-sl`
        #[arg(long, default_value = "step-sl-strong")]
        kind: String,
        /// Compare two variables `X@E` by projections up to this depth
        #[arg(long, value_name = "DEPTH")]
        aip: Option<u32>,
        #[arg(long)]
        json: bool,
    },
    /// Run an axiom suite on seeded random instances
    Laws {
        /// Suite name, or `all`
        #[arg(long)]
        suite: String,
        /// Samples per law
        #[arg(short = 'n', long = "samples", default_value_t = 100)]
        samples: usize,
        /// Checker overriding the suite default (repeatable)
        #[arg(long)]
        kind: Vec<String>,
        /// Only run the named law (repeatable)
        #[arg(long)]
        law: Vec<String>,
        /// Worker threads; reports do not depend on this
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Export the labelled transition system of a term
    Lts {
        term: String,
        /// Shorthand for `--mode dynamic`
        #[arg(long = "dyn")]
        dynamic: bool,
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
    },
    /// Export the prime event structure of a term as JSON
    Pes {
        term: String,
        #[arg(long = "dyn")]
        dynamic: bool,
        #[arg(long)]
        json: bool,
    },
    /// Validate the alphabet given with `-a`
    Alphabet,
    /// Report the clusters of a specification for a set of hidden actions
    Clusters {
        /// Specification name; defaults to the first one loaded
        #[arg(long)]
        name: Option<String>,
        /// Hidden actions, comma separated
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<String>,
        /// Also print the fair abstraction of this variable
        #[arg(long, value_name = "VAR")]
        cfar: Option<String>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("expected `static` or `dynamic`, found `{s}`"))
}

/// Splits `fuel=..` off the bounds list; the rest goes to [`Bounds::parse`].
fn parse_bounds(s: Option<&str>) -> Result<(Bounds, Option<usize>), CliError> {
    let Some(s) = s else { return Ok((Bounds::default(), None)) };
    let mut fuel = None;
    let mut rest = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('=') {
            Some((k, v)) if k.trim() == "fuel" => {
                let n = v.trim().parse::<usize>().map_err(|_| input(format!("`{v}` is not a number")))?;
                fuel = Some(n.max(1));
            }
            _ => rest.push(part),
        }
    }
    let bounds = Bounds::parse(&rest.join(",")).map_err(input)?;
    Ok((bounds, fuel))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn term_arg(src: &str, what: &str) -> Result<Term, CliError> {
    parse_term(src).map_err(|e| CliError::Parse(e.render(what)))
}

struct Context {
    env: Env,
    bounds: Bounds,
    fuel: Option<usize>,
    seed: u64,
    mode: Mode,
}

impl Context {
    fn load(common: &Common, fallback: Alphabet) -> Result<Context, CliError> {
        let alphabet = match &common.alphabet {
            Some(path) => {
                let src = read(path)?;
                let alph =
                    Alphabet::parse(&src).map_err(|e| CliError::Parse(format!("{}:{e}", path.display())))?;
                if let Err(issues) = alph.validate() {
                    let lines: Vec<String> = issues.iter().map(|i| format!("{}: {i}", path.display())).collect();
                    return Err(input(lines.join("\n")));
                }
                alph
            }
            None => fallback,
        };
        let mut env = Env::new(alphabet);
        for path in &common.specs {
            let src = read(path)?;
            let specs = parse_specs(&src).map_err(|e| CliError::Parse(e.render(&path.display().to_string())))?;
            for spec in specs {
                env = env.with_spec(spec);
            }
        }
        for def in &common.defines {
            let (name, body) = def
                .split_once('=')
                .ok_or_else(|| input(format!("definition `{def}` is not of the form NAME = term")))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(input(format!("`{name}` is not a constant name")));
            }
            let body = term_arg(body, &format!("-D {name}"))?;
            env.defs.insert(name.to_string(), body);
        }
        let (bounds, fuel) = parse_bounds(common.bounds.as_deref())?;
        Ok(Context { env, bounds, fuel, seed: common.seed, mode: common.mode })
    }
}

fn run(cli: Cli) -> CliResult {
    let fallback = match cli.command {
        Command::Laws { .. } => Alphabet::law_suite(),
        _ => Alphabet::default(),
    };
    let cx = Context::load(&cli.common, fallback)?;
    match cli.command {
        Command::Norm { term, rules, trace } => cmd_norm(&cx, &term, rules.as_deref(), trace),
        Command::Eq { lhs, rhs, kind, aip, json } => cmd_eq(&cx, &lhs, &rhs, &kind, aip, json),
        Command::Laws { suite, samples, kind, law, threads, json } => {
            cmd_laws(&cx, &suite, samples, &kind, &law, threads, json)
        }
        Command::Lts { term, dynamic, dot: _, json } => cmd_lts(&cx, &term, dynamic, json),
        Command::Pes { term, dynamic, json: _ } => cmd_pes(&cx, &term, dynamic),
        Command::Alphabet => cmd_alphabet(&cli.common, &cx),
        Command::Clusters { name, hidden, cfar } => cmd_clusters(&cx, name.as_deref(), &hidden, cfar.as_deref()),
    }
}

fn cmd_norm(cx: &Context, src: &str, rules: Option<&str>, trace: bool) -> CliResult {
    let t = term_arg(src, "<term>")?;
    let system = match rules {
        Some(name) => System::parse(name).ok_or_else(|| input(format!("unknown rule system `{name}`")))?,
        None if t.any(&|s| matches!(s, Term::Hide(..))) => System::Hide,
        None => System::Proj,
    };
    let fuel = cx.fuel.unwrap_or_else(|| default_fuel(&t));
    let (nf, steps) = normalize(&cx.env, &t, system, fuel).map_err(input)?;
    if trace {
        print!("{}", steps.to_json_lines());
    }
    println!("{}", print_term(&nf));
    Ok(Status::Ok)
}

fn verdict_status(v: &Verdict) -> Status {
    match v {
        Verdict::Equivalent { .. } => Status::Ok,
        Verdict::Inequivalent { .. } => Status::Inequivalent,
        Verdict::Unknown { .. } => Status::Unknown,
    }
}

fn cmd_eq(cx: &Context, lhs: &str, rhs: &str, kind: &str, aip: Option<u32>, json: bool) -> CliResult {
    let kind: RelationKind = kind.parse().map_err(input)?;
    let t1 = term_arg(lhs, "<lhs>")?;
    let t2 = term_arg(rhs, "<rhs>")?;
    if let Some(depth) = aip {
        return cmd_aip(cx, &t1, &t2, depth, kind, json);
    }
    let r = check(&cx.env, &t1, &t2, kind, cx.bounds).map_err(input)?;
    if json {
        println!("{}", r.to_json());
    } else {
        println!("{r}");
    }
    Ok(verdict_status(&r.verdict))
}

fn cmd_aip(cx: &Context, t1: &Term, t2: &Term, depth: u32, kind: RelationKind, json: bool) -> CliResult {
    let var = |t: &Term| match t {
        Term::Var(x, e) => cx
            .env
            .specs
            .get(e)
            .map(|s| (s, x.clone()))
            .ok_or_else(|| input(format!("unknown specification `{e}`"))),
        _ => Err(input("--aip compares two variables `X@E`")),
    };
    let (s1, x1) = var(t1)?;
    let (s2, x2) = var(t2)?;
    let r = aip_check(&cx.env, (s1, &x1), (s2, &x2), depth, kind, cx.bounds).map_err(input)?;
    let (name, status, detail) = match &r.verdict {
        AipVerdict::Equivalent => ("equivalent", Status::Ok, serde_json::Value::Null),
        AipVerdict::EquivalentUpTo(n) => ("unknown", Status::Unknown, serde_json::json!({"agree_up_to": n})),
        AipVerdict::Inequivalent { depth, trace } => (
            "inequivalent",
            Status::Inequivalent,
            serde_json::json!({"depth": depth, "trace": trace.iter().map(|p| p.attack.clone()).collect::<Vec<_>>()}),
        ),
        AipVerdict::Unknown { depth, reason } => {
            ("unknown", Status::Unknown, serde_json::json!({"depth": depth, "reason": reason}))
        }
    };
    if json {
        let out = serde_json::json!({
            "kind": kind.to_string(), "verdict": name, "threshold": r.threshold, "detail": detail,
        });
        println!("{out}");
    } else {
        println!("{name} ({kind}; projections compared up to {depth}, threshold {})", r.threshold);
        if !detail.is_null() {
            println!("{detail}");
        }
    }
    Ok(status)
}

fn cmd_laws(
    cx: &Context,
    suite: &str,
    samples: usize,
    kinds: &[String],
    laws: &[String],
    threads: Option<usize>,
    json: bool,
) -> CliResult {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        let s = Suite::parse(suite)
            .ok_or_else(|| input(format!("unknown suite `{suite}`; expected all or one of {}", names.join(", "))))?;
        vec![s]
    };
    let mut opts = LawOptions::new(samples, cx.seed);
    opts.bounds = cx.bounds;
    if let Some(n) = threads {
        opts.threads = n.max(1);
    }
    if !kinds.is_empty() {
        opts.kinds = Some(kinds.iter().map(|k| k.parse()).collect::<Result<_, _>>().map_err(input)?);
    }
    if !laws.is_empty() {
        opts.only = Some(laws.to_vec());
    }
    let reports: Vec<SuiteReport> = suites.iter().map(|s| run_suite(*s, &cx.env.alphabet, &opts)).collect();
    for r in &reports {
        if json {
            println!("{}", r.to_json());
        } else {
            println!("{r}");
        }
    }
    let failed = reports.iter().any(|r| r.failures() > 0);
    Ok(if failed { Status::Inequivalent } else { Status::Ok })
}

fn export_mode(cx: &Context, dynamic: bool) -> Mode {
    if dynamic {
        Mode::Dynamic
    } else {
        cx.mode
    }
}

fn cmd_lts(cx: &Context, src: &str, dynamic: bool, json: bool) -> CliResult {
    let t = term_arg(src, "<term>")?;
    let lts = build_lts(&cx.env, &t, export_mode(cx, dynamic), cx.bounds).map_err(input)?;
    if lts.truncated {
        eprintln!("warning: state space truncated at {} states", lts.len());
    }
    if json {
        println!("{}", lts.to_json());
    } else {
        print!("{}", lts.to_dot());
    }
    Ok(Status::Ok)
}

fn cmd_pes(cx: &Context, src: &str, dynamic: bool) -> CliResult {
    let t = term_arg(src, "<term>")?;
    let pes = term_to_pes(&cx.env, &t, export_mode(cx, dynamic)).map_err(input)?;
    println!("{}", pes.to_json());
    Ok(Status::Ok)
}

fn cmd_alphabet(common: &Common, cx: &Context) -> CliResult {
    if common.alphabet.is_none() {
        return Err(input("no alphabet given; pass one with -a"));
    }
    print!("{}", cx.env.alphabet.render());
    Ok(Status::Ok)
}

fn cmd_clusters(cx: &Context, name: Option<&str>, hidden: &[String], cfar: Option<&str>) -> CliResult {
    let spec = match name {
        Some(n) => cx.env.specs.get(n).ok_or_else(|| input(format!("unknown specification `{n}`")))?,
        None => cx.env.specs.values().next().ok_or_else(|| input("no specification loaded; pass one with --spec"))?,
    };
    validate_guarded(spec).map_err(input)?;
    let hidden: BTreeSet<Action> = hidden.iter().map(|a| Action::new(a.trim())).collect();
    let mut out = clusters_json(&clusters(spec, &hidden));
    if let Some(var) = cfar {
        let r = cfar_apply(spec, &hidden, var).map_err(input)?;
        out["cfar"] = serde_json::json!({"var": var, "term": print_term(&r.term), "exitless": r.exitless});
    }
    println!("{out}");
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Input as u8)
        }
    }
}
