//! Guarded linear recursion: guardedness, finite transition systems of
//! specifications, projections, approximation induction, clusters and the
//! cluster fair abstraction rule.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;
use thiserror::Error;

use crate::alphabet::{Action, ActionId};
use crate::equiv::{check, CheckResult, EquivError, Play, RelationKind, Verdict};
use crate::sos::{build_lts, Bounds, LocatedAction, Lts, Mode, SosError, Step, Target};
use crate::syntax::print_summand;
use crate::term::{Env, LinearSpec, LocWord, SetRef, Summand, Term};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecursionError {
    #[error("unguarded specification: silent cycle through {}", .0.join(" -> "))]
    Unguarded(Vec<String>),
    #[error("variable `{0}` is not defined in specification `{1}`")]
    UnknownVar(String, String),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
}

fn summands<'s>(spec: &'s LinearSpec, var: &str) -> Result<&'s [Summand], RecursionError> {
    spec.summands(var).ok_or_else(|| RecursionError::UnknownVar(var.to_string(), spec.name.clone()))
}

fn silent(s: &Summand) -> bool {
    !s.items.is_empty() && s.items.iter().all(|i| i.action == ActionId::Tau)
}

/// Succeeds iff the graph of purely silent summands is acyclic; otherwise
/// names a cycle.
pub fn validate_guarded(spec: &LinearSpec) -> Result<(), RecursionError> {
    let edges: BTreeMap<&str, Vec<&str>> = spec
        .equations
        .iter()
        .map(|(v, ss)| (v.as_str(), ss.iter().filter(|s| silent(s)).filter_map(|s| s.target.as_deref()).collect()))
        .collect();
    // Depth-first search with an explicit path for the witness.
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        v: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(v, 1);
        path.push(v);
        for &w in edges.get(v).map(Vec::as_slice).unwrap_or(&[]) {
            match state.get(w).copied().unwrap_or(0) {
                1 => {
                    let start = path.iter().position(|x| *x == w).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(w.to_string());
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = visit(w, edges, state, path) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(v, 2);
        None
    }
    for v in spec.vars() {
        if state.get(v).copied().unwrap_or(0) == 0 {
            if let Some(cycle) = visit(v, &edges, &mut state, &mut Vec::new()) {
                return Err(RecursionError::Unguarded(cycle));
            }
        }
    }
    Ok(())
}

/// The step label of a summand's items in static mode.
pub fn summand_step(s: &Summand) -> Option<Step> {
    if s.items.is_empty() {
        return None;
    }
    let mut visible: Vec<LocatedAction> = s
        .items
        .iter()
        .filter_map(|i| {
            i.action.as_visible().map(|a| LocatedAction { action: a.clone(), at: i.at.clone(), via: None })
        })
        .collect();
    if visible.is_empty() {
        return Some(Step::Tau);
    }
    visible.sort();
    Some(Step::Visible(visible))
}

/// The transition system of `⟨var|spec⟩`. Static mode has one state per
/// variable and one transition per summand; dynamic mode explores the
/// located unfolding within `bounds`.
pub fn spec_to_lts(env: &Env, spec: &LinearSpec, var: &str, mode: Mode, bounds: Bounds) -> Result<Lts, RecursionError> {
    summands(spec, var)?;
    if mode == Mode::Dynamic {
        let env = env.clone().with_spec(spec.clone());
        return Ok(build_lts(&env, &Term::Var(var.to_string(), spec.name.clone()), mode, bounds)?);
    }
    let index: BTreeMap<&str, usize> = spec.vars().enumerate().map(|(i, v)| (v, i)).collect();
    let states: Vec<Term> = spec.vars().map(|v| Term::Var(v.to_string(), spec.name.clone())).collect();
    let transitions = spec
        .equations
        .iter()
        .map(|(_, ss)| {
            let mut out: Vec<(Step, Target<usize>)> = ss
                .iter()
                .filter_map(|s| {
                    let step = summand_step(s)?;
                    let target = match &s.target {
                        None => Target::Done,
                        Some(y) => Target::To(index[y.as_str()]),
                    };
                    Some((step, target))
                })
                .collect();
            out.sort();
            out.dedup();
            out
        })
        .collect();
    Ok(Lts { states, initial: index[var], transitions, mode, bounds, truncated: false })
}

/// `Π_n(⟨var|spec⟩)` as a closed recursion-free term: the equations are
/// unfolded `n` times and the remainder cut to deadlock.
pub fn project_spec(spec: &LinearSpec, var: &str, n: u32) -> Result<Term, RecursionError> {
    let mut memo: BTreeMap<(String, u32), Term> = BTreeMap::new();
    project_rec(spec, var, n, &mut memo)
}

fn project_rec(spec: &LinearSpec, var: &str, n: u32, memo: &mut BTreeMap<(String, u32), Term>) -> Result<Term, RecursionError> {
    if n == 0 {
        return Ok(Term::Delta);
    }
    if let Some(t) = memo.get(&(var.to_string(), n)) {
        return Ok(t.clone());
    }
    let mut parts = Vec::new();
    for s in summands(spec, var)? {
        if s.items.is_empty() {
            continue;
        }
        let head = s.items_term();
        parts.push(match &s.target {
            None => head,
            Some(y) => Term::seq(head, project_rec(spec, y, n - 1, memo)?),
        });
    }
    let t = Term::sum(parts);
    memo.insert((var.to_string(), n), t.clone());
    Ok(t)
}

/// Outcome of approximation induction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AipVerdict {
    /// All projections agree up to a depth that decides equivalence.
    Equivalent,
    /// All projections up to the given depth agree.
    EquivalentUpTo(u32),
    Inequivalent { depth: u32, trace: Vec<Play> },
    Unknown { depth: u32, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AipResult {
    pub verdict: AipVerdict,
    /// Depth from which agreement of all projections decides equivalence.
    pub threshold: u32,
}

fn word_count(spec: &LinearSpec) -> usize {
    let words: BTreeSet<&LocWord> =
        spec.equations.iter().flat_map(|(_, ss)| ss.iter().flat_map(|s| s.items.iter().map(|i| &i.at))).collect();
    words.len()
}

/// The projection depth from which agreement implies equivalence.
///
/// Partition refinement over the disjoint union of the two finite systems
/// (with a terminated state) stabilizes within `|V1| + |V2|` rounds, and
/// each round may also grow the location association by one pair.
pub fn aip_threshold(s1: &LinearSpec, s2: &LinearSpec) -> u32 {
    let (v1, v2) = (s1.equations.len(), s2.equations.len());
    let rounds = (v1 * v2).max(v1 + v2 + 1);
    let pairs = word_count(s1) * word_count(s2);
    (rounds * (1 + pairs)) as u32
}

/// Compares `Π_n` of both sides for every `n ≤ max_depth`.
pub fn aip_check(
    env: &Env,
    (s1, x1): (&LinearSpec, &str),
    (s2, x2): (&LinearSpec, &str),
    max_depth: u32,
    kind: RelationKind,
    bounds: Bounds,
) -> Result<AipResult, RecursionError> {
    validate_guarded(s1)?;
    validate_guarded(s2)?;
    summands(s1, x1)?;
    summands(s2, x2)?;
    let threshold = aip_threshold(s1, s2);
    // Projections are checked as `pi(n, X@E)` so that the semantics shares
    // states instead of unfolding an exponentially large term.
    let (s1, s2) = distinct_names(s1, s2);
    let env = env.clone().with_spec(s1.clone()).with_spec(s2.clone());
    for n in 0..=max_depth {
        let p1 = Term::Proj(n, Box::new(Term::Var(x1.to_string(), s1.name.clone())));
        let p2 = Term::Proj(n, Box::new(Term::Var(x2.to_string(), s2.name.clone())));
        let r = check(&env, &p1, &p2, kind, bounds)?;
        match r.verdict {
            Verdict::Equivalent { .. } => {}
            Verdict::Inequivalent { trace } => {
                return Ok(AipResult { verdict: AipVerdict::Inequivalent { depth: n, trace }, threshold });
            }
            Verdict::Unknown { reason } => {
                return Ok(AipResult { verdict: AipVerdict::Unknown { depth: n, reason }, threshold });
            }
        }
    }
    let verdict = if max_depth >= threshold { AipVerdict::Equivalent } else { AipVerdict::EquivalentUpTo(max_depth) };
    Ok(AipResult { verdict, threshold })
}

fn distinct_names(s1: &LinearSpec, s2: &LinearSpec) -> (LinearSpec, LinearSpec) {
    let mut s2 = s2.clone();
    if s1.name == s2.name && *s1 != s2 {
        s2.name = format!("{}_2", s2.name);
    }
    (s1.clone(), s2)
}

/// Direct comparison of the two finite systems.
pub fn spec_check(
    env: &Env,
    (s1, x1): (&LinearSpec, &str),
    (s2, x2): (&LinearSpec, &str),
    kind: RelationKind,
    bounds: Bounds,
) -> Result<CheckResult, RecursionError> {
    let l1 = spec_to_lts(env, s1, x1, kind.locality, bounds)?;
    let l2 = spec_to_lts(env, s2, x2, kind.locality, bounds)?;
    Ok(crate::equiv::check_lts(&l1, &l2, kind, bounds))
}

/// A strongly connected set of variables under summands whose actions
/// are all hidden or silent, with the summands that leave it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub vars: Vec<String>,
    pub exits: Vec<Summand>,
}

impl Cluster {
    /// True when some internal summand stays inside the cluster.
    pub fn is_nontrivial(&self, spec: &LinearSpec, hidden: &BTreeSet<Action>) -> bool {
        self.vars.iter().any(|v| {
            spec.summands(v).unwrap_or(&[]).iter().any(|s| {
                internal(s, hidden) && s.target.as_ref().is_some_and(|t| self.vars.contains(t))
            })
        })
    }
}

fn internal(s: &Summand, hidden: &BTreeSet<Action>) -> bool {
    !s.items.is_empty()
        && s.items.iter().all(|i| match &i.action {
            ActionId::Tau => true,
            ActionId::Visible(a) => hidden.contains(a),
            ActionId::Delta => false,
        })
}

/// Strongly connected components of the internal-summand graph, in order
/// of first variable, each with its exits.
pub fn clusters(spec: &LinearSpec, hidden: &BTreeSet<Action>) -> Vec<Cluster> {
    let vars: Vec<&str> = spec.vars().collect();
    let index: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let succ: Vec<Vec<usize>> = spec
        .equations
        .iter()
        .map(|(_, ss)| {
            ss.iter().filter(|s| internal(s, hidden)).filter_map(|s| s.target.as_deref().map(|t| index[t])).collect()
        })
        .collect();
    let comps = tarjan(&succ);
    let mut out: Vec<Cluster> = comps
        .into_iter()
        .map(|mut comp| {
            comp.sort();
            let names: Vec<String> = comp.iter().map(|&i| vars[i].to_string()).collect();
            let mut exits: Vec<Summand> = Vec::new();
            for &i in &comp {
                for s in spec.summands(vars[i]).unwrap_or(&[]) {
                    let leaves = match &s.target {
                        None => true,
                        Some(t) => !names.contains(t),
                    };
                    if (!internal(s, hidden) || leaves) && !s.items.is_empty() && !exits.contains(s) {
                        exits.push(s.clone());
                    }
                }
            }
            exits.sort();
            Cluster { vars: names, exits }
        })
        .collect();
    out.sort_by_key(|c| c.vars.iter().map(|v| index[v.as_str()]).min());
    out
}

fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        succ: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn go(st: &mut St, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on[v] = true;
        for i in 0..st.succ[v].len() {
            let w = st.succ[v][i];
            match st.index[w] {
                None => {
                    go(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.out.push(comp);
        }
    }
    let n = succ.len();
    let mut st = St { succ, index: vec![None; n], low: vec![0; n], on: vec![false; n], stack: Vec::new(), next: 0, out: Vec::new() };
    for v in 0..n {
        if st.index[v].is_none() {
            go(&mut st, v);
        }
    }
    st.out
}

/// The cluster report `{clusters: [{vars, exits}]}`.
pub fn clusters_json(clusters: &[Cluster]) -> serde_json::Value {
    json!({
        "clusters": clusters.iter().map(|c| json!({
            "vars": c.vars,
            "exits": c.exits.iter().map(print_summand).collect::<Vec<_>>(),
        })).collect::<Vec<_>>()
    })
}

/// The right-hand side of the fair abstraction rule for `var`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfarOutcome {
    pub term: Term,
    /// The cluster has no exits; the sum of exits is deadlock.
    pub exitless: bool,
}

/// `tau ; hide(I, Σ exits)`, each exit as its step followed by `⟨Y|E⟩`
/// when it has a target.
pub fn cfar_apply(spec: &LinearSpec, hidden: &BTreeSet<Action>, var: &str) -> Result<CfarOutcome, RecursionError> {
    summands(spec, var)?;
    validate_guarded(spec)?;
    let all = clusters(spec, hidden);
    let cluster = all.iter().find(|c| c.vars.iter().any(|v| v == var)).expect("every variable lies in a cluster");
    let exits: Vec<Term> = cluster
        .exits
        .iter()
        .map(|s| match &s.target {
            None => s.items_term(),
            Some(y) => Term::seq(s.items_term(), Term::Var(y.clone(), spec.name.clone())),
        })
        .collect();
    let exitless = exits.is_empty();
    let term = Term::seq(Term::Tau, Term::Hide(SetRef::Literal(hidden.clone()), Box::new(Term::sum(exits))));
    Ok(CfarOutcome { term, exitless })
}

/// `tau ; hide(I, ⟨var|spec⟩)`, the left-hand side of the rule.
pub fn cfar_lhs(spec: &LinearSpec, hidden: &BTreeSet<Action>, var: &str) -> Term {
    Term::seq(
        Term::Tau,
        Term::Hide(SetRef::Literal(hidden.clone()), Box::new(Term::Var(var.to_string(), spec.name.clone()))),
    )
}
