//! Structural operational semantics: located step transitions for both
//! calculi, in static or dynamic location mode, and the LTS built from them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::alphabet::{Action, ActionId, Alphabet};
use crate::term::{Dialect, Env, LocWord, Term, TermError};

/// How transitions report locations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Locations are the `u ::` prefixes written in the term.
    #[default]
    Static,
    /// Every fired action mints a fresh location name.
    Dynamic,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "static" => Some(Mode::Static),
            "dynamic" => Some(Mode::Dynamic),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        })
    }
}

/// Exploration limits shared by the LTS builder and the checkers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub states: usize,
    pub depth: usize,
    /// Largest location association a checker may build.
    pub phi_max: usize,
    /// Largest number of game positions a checker may explore.
    pub nodes: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { states: 5000, depth: 200, phi_max: 64, nodes: 200_000 }
    }
}

impl Bounds {
    /// Parses `states=..,depth=..,phi=..,nodes=..`; unspecified keys keep
    /// their defaults.
    pub fn parse(s: &str) -> Result<Bounds, String> {
        let mut b = Bounds::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, found `{part}`"))?;
            let n: usize = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
            match k.trim() {
                "states" => b.states = n.max(1),
                "depth" => b.depth = n,
                "phi" | "phi_max" => b.phi_max = n,
                "nodes" => b.nodes = n.max(1),
                other => return Err(format!("unknown bound `{other}`")),
            }
        }
        Ok(b)
    }
}

/// A visible action performed at a location. Fused communications keep
/// the two participants' words in `via`; matching ignores it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocatedAction {
    pub action: Action,
    pub at: LocWord,
    pub via: Option<(LocWord, LocWord)>,
}

impl fmt::Display for LocatedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.action, self.at)
    }
}

/// A transition label: the silent step or a multiset of located actions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Tau,
    Visible(Vec<LocatedAction>),
}

impl Step {
    pub fn is_tau(&self) -> bool {
        matches!(self, Step::Tau)
    }

    pub fn events(&self) -> &[LocatedAction] {
        match self {
            Step::Tau => &[],
            Step::Visible(v) => v,
        }
    }

    /// The multiset of action names, sorted.
    pub fn action_multiset(&self) -> Vec<&Action> {
        let mut v: Vec<_> = self.events().iter().map(|e| &e.action).collect();
        v.sort();
        v
    }

    fn rename(&self, f: &impl Fn(&str) -> Option<String>) -> Step {
        match self {
            Step::Tau => Step::Tau,
            Step::Visible(v) => {
                let mut evs: Vec<_> = v
                    .iter()
                    .map(|e| LocatedAction {
                        action: e.action.clone(),
                        at: e.at.rename(f),
                        via: e.via.as_ref().map(|(a, b)| (a.rename(f), b.rename(f))),
                    })
                    .collect();
                evs.sort();
                Step::Visible(evs)
            }
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Tau => f.write_str("tau"),
            Step::Visible(v) => {
                let parts: Vec<_> = v.iter().map(|e| e.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

/// Either successful termination or a further state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target<S> {
    Done,
    To(S),
}

impl<S> Target<S> {
    pub fn state(&self) -> Option<&S> {
        match self {
            Target::Done => None,
            Target::To(s) => Some(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SosError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("unguarded recursion through `{0}`")]
    Unguarded(String),
    #[error("theta is not defined on recursive terms")]
    ThetaRecursion,
}

// An event inside a derivation, before the boundary normalization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Ev {
    label: ActionId,
    at: LocWord,
    via: Option<(LocWord, LocWord)>,
}

impl Ev {
    fn prefixed(mut self, u: &LocWord) -> Ev {
        if self.label != ActionId::Tau {
            self.at = u.concat(&self.at);
            self.via = self.via.map(|(a, b)| (u.concat(&a), u.concat(&b)));
        }
        self
    }
}

#[derive(Clone, Debug)]
struct Move {
    evs: Vec<Ev>,
    next: Target<Term>,
}

const PLACEHOLDER: &str = "?";
const MAX_UNFOLD: usize = 256;

struct Deriver<'a> {
    env: &'a Env,
    mode: Mode,
    dialect: Dialect,
    minted: usize,
    unfold: usize,
}

impl<'a> Deriver<'a> {
    fn alph(&self) -> &Alphabet {
        &self.env.alphabet
    }

    fn mint(&mut self) -> LocWord {
        let w = LocWord::single(&format!("{PLACEHOLDER}{}", self.minted));
        self.minted += 1;
        w
    }

    fn moves(&mut self, t: &Term) -> Result<Vec<Move>, SosError> {
        Ok(match t {
            Term::Nil | Term::Delta => vec![],
            Term::Tau => vec![Move { evs: vec![Ev { label: ActionId::Tau, at: LocWord::epsilon(), via: None }], next: Target::Done }],
            Term::Act(a) => {
                let at = match self.mode {
                    Mode::Static => LocWord::epsilon(),
                    Mode::Dynamic => self.mint(),
                };
                vec![Move { evs: vec![Ev { label: ActionId::Visible(a.clone()), at, via: None }], next: Target::Done }]
            }
            Term::Loc(u, p) => self
                .moves(p)?
                .into_iter()
                .map(|m| Move {
                    evs: m.evs.into_iter().map(|e| e.prefixed(u)).collect(),
                    next: match m.next {
                        Target::Done => Target::Done,
                        Target::To(q) => Target::To(Term::loc(u.clone(), q)),
                    },
                })
                .collect(),
            Term::Prefix(items, body) => {
                for (i, x) in items.iter().enumerate() {
                    for y in &items[i + 1..] {
                        if let (ActionId::Visible(a), ActionId::Visible(b)) = (&x.action, &y.action) {
                            if self.alph().communicates(a, b) {
                                return Ok(vec![]);
                            }
                        }
                    }
                }
                let fresh = match self.mode {
                    Mode::Static => LocWord::epsilon(),
                    Mode::Dynamic => self.mint(),
                };
                let evs = items
                    .iter()
                    .map(|it| Ev { label: it.action.clone(), at: fresh.concat(&it.at), via: None })
                    .collect();
                vec![Move { evs, next: Target::To(Term::loc(fresh, (**body).clone())) }]
            }
            Term::Seq(x, y) => {
                let mut out = Vec::new();
                for m in self.moves(x)? {
                    let u = match self.mode {
                        Mode::Static => LocWord::epsilon(),
                        Mode::Dynamic => step_word(&m.evs),
                    };
                    let next = match m.next {
                        Target::Done => Term::loc(u, (**y).clone()),
                        Target::To(x2) => Term::loc(u, Term::seq(x2, (**y).clone())),
                    };
                    out.push(Move { evs: m.evs, next: Target::To(next) });
                }
                out
            }
            Term::Alt(x, y) => {
                let mut out = self.moves(x)?;
                out.extend(self.moves(y)?);
                out
            }
            Term::Par(x, y) if self.dialect == Dialect::Ctc => self.ctc_par(x, y)?,
            Term::Par(x, y) | Term::LeftMerge(x, y) => self.joint(x, y, Fusion::None)?,
            Term::Merge(x, y) => self.joint(x, y, Fusion::Any)?,
            Term::Comm(x, y) => self.joint(x, y, Fusion::NonEmpty)?,
            Term::Theta(x) => {
                let expanded = theta_expand(self.env, x)?;
                self.moves(&expanded)?
            }
            Term::Unless(x, y) => {
                let atoms = y.atoms();
                let alph = self.env.alphabet.clone();
                self.moves(x)?
                    .into_iter()
                    .map(|m| Move {
                        evs: m
                            .evs
                            .into_iter()
                            .map(|mut e| {
                                e.label = unless_label(&alph, &e.label, &atoms);
                                e
                            })
                            .collect(),
                        next: wrap(m.next, |x2| Term::unless(x2, (**y).clone())),
                    })
                    .collect()
            }
            Term::Encap(h, x) => {
                let blocked = self.env.resolve_set(h, false)?;
                self.filtered(x, &blocked, |x2| Term::Encap(h.clone(), Box::new(x2)))?
            }
            Term::Restrict(l, x) => {
                let mut blocked = l.clone();
                blocked.extend(self.alph().co_set(l));
                self.filtered(x, &blocked, |x2| Term::Restrict(l.clone(), Box::new(x2)))?
            }
            Term::Hide(i, x) => {
                let hidden = self.env.resolve_set(i, true)?;
                self.moves(x)?
                    .into_iter()
                    .map(|m| Move {
                        evs: m
                            .evs
                            .into_iter()
                            .map(|mut e| {
                                if e.label.as_visible().is_some_and(|a| hidden.contains(a)) {
                                    e = Ev { label: ActionId::Tau, at: LocWord::epsilon(), via: None };
                                }
                                e
                            })
                            .collect(),
                        next: wrap(m.next, |x2| Term::Hide(i.clone(), Box::new(x2))),
                    })
                    .collect()
            }
            Term::Relabel(f, x) => {
                let table = self.env.resolve_relabel(f)?;
                self.moves(x)?
                    .into_iter()
                    .map(|m| Move {
                        evs: m
                            .evs
                            .into_iter()
                            .map(|mut e| {
                                e.label = table.apply(&e.label);
                                e
                            })
                            .collect(),
                        next: wrap(m.next, |x2| Term::Relabel(f.clone(), Box::new(x2))),
                    })
                    .collect()
            }
            Term::Proj(n, x) => {
                if *n == 0 {
                    vec![]
                } else {
                    let n = *n;
                    self.moves(x)?
                        .into_iter()
                        .map(|m| Move { evs: m.evs, next: wrap(m.next, |x2| Term::Proj(n - 1, Box::new(x2))) })
                        .collect()
                }
            }
            Term::Const(name) => {
                if self.unfold >= MAX_UNFOLD {
                    return Err(SosError::Unguarded(name.clone()));
                }
                self.unfold += 1;
                let body = self.env.constant(name)?.clone();
                let out = self.moves(&body);
                self.unfold -= 1;
                out?
            }
            Term::Var(var, spec) => {
                let summands = self.env.spec_summands(var, spec)?.to_vec();
                let mut out = Vec::new();
                for s in summands {
                    let fresh = match self.mode {
                        Mode::Static => LocWord::epsilon(),
                        Mode::Dynamic => self.mint(),
                    };
                    let evs = s
                        .items
                        .iter()
                        .map(|it| Ev { label: it.action.clone(), at: fresh.concat(&it.at), via: None })
                        .collect();
                    let next = match &s.target {
                        None => Target::Done,
                        Some(y) => Target::To(Term::loc(fresh, Term::Var(y.clone(), spec.clone()))),
                    };
                    out.push(Move { evs, next });
                }
                out
            }
        })
    }

    fn filtered(
        &mut self,
        x: &Term,
        blocked: &BTreeSet<Action>,
        rebuild: impl Fn(Term) -> Term,
    ) -> Result<Vec<Move>, SosError> {
        Ok(self
            .moves(x)?
            .into_iter()
            .filter(|m| !m.evs.iter().any(|e| e.label.as_visible().is_some_and(|a| blocked.contains(a))))
            .map(|m| Move { evs: m.evs, next: wrap(m.next, &rebuild) })
            .collect())
    }

    // APTC operators: both sides move together.
    fn joint(&mut self, x: &Term, y: &Term, fusion: Fusion) -> Result<Vec<Move>, SosError> {
        let mx = self.moves(x)?;
        let my = self.moves(y)?;
        let mut out = Vec::new();
        for m1 in &mx {
            for m2 in &my {
                for evs in fuse(self.alph(), &m1.evs, &m2.evs, fusion) {
                    let next = match (&m1.next, &m2.next) {
                        (Target::Done, Target::Done) => Target::Done,
                        (Target::Done, Target::To(q)) => Target::To(q.clone()),
                        (Target::To(p), Target::Done) => Target::To(p.clone()),
                        (Target::To(p), Target::To(q)) => Target::To(Term::merge(p.clone(), q.clone())),
                    };
                    out.push(Move { evs, next });
                }
            }
        }
        Ok(out)
    }

    // CCS-style parallel: a side with no moves lets the other move alone.
    fn ctc_par(&mut self, x: &Term, y: &Term) -> Result<Vec<Move>, SosError> {
        let mx = self.moves(x)?;
        let my = self.moves(y)?;
        let compose = |p: &Target<Term>, q: &Target<Term>| match (p, q) {
            (Target::Done, Target::Done) => Target::Done,
            (Target::Done, Target::To(q)) => Target::To(q.clone()),
            (Target::To(p), Target::Done) => Target::To(p.clone()),
            (Target::To(p), Target::To(q)) => Target::To(Term::par(p.clone(), q.clone())),
        };
        let stay_x = Target::To(x.clone());
        let stay_y = Target::To(y.clone());
        if mx.is_empty() {
            return Ok(my.into_iter().map(|m| Move { next: compose(&stay_x, &m.next), evs: m.evs }).collect());
        }
        if my.is_empty() {
            return Ok(mx.into_iter().map(|m| Move { next: compose(&m.next, &stay_y), evs: m.evs }).collect());
        }
        let mut out = Vec::new();
        for m1 in &mx {
            for m2 in &my {
                for evs in fuse(self.alph(), &m1.evs, &m2.evs, Fusion::Maximal) {
                    out.push(Move { evs, next: compose(&m1.next, &m2.next) });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fusion {
    None,
    Any,
    NonEmpty,
    /// No unfused cross pair may be able to communicate.
    Maximal,
}

fn wrap(next: Target<Term>, f: impl Fn(Term) -> Term) -> Target<Term> {
    match next {
        Target::Done => Target::Done,
        Target::To(t) => Target::To(f(t)),
    }
}

// Longest common prefix of the visible events' words.
fn step_word(evs: &[Ev]) -> LocWord {
    let mut words = evs.iter().filter(|e| e.label != ActionId::Tau).map(|e| &e.at);
    match words.next() {
        None => LocWord::epsilon(),
        Some(first) => words.fold(first.clone(), |acc, w| acc.common_prefix(w)),
    }
}

/// Every combination of the two event lists in which some cross pairs with
/// a defined communication are fused.
fn fuse(alph: &Alphabet, left: &[Ev], right: &[Ev], fusion: Fusion) -> Vec<Vec<Ev>> {
    if fusion == Fusion::None {
        let mut evs = left.to_vec();
        evs.extend(right.iter().cloned());
        return vec![evs];
    }
    let mut out = Vec::new();
    let mut used = vec![false; right.len()];
    let mut acc = Vec::new();
    let mut skipped = Vec::new();
    fuse_rec(alph, left, right, 0, &mut used, &mut acc, &mut skipped, 0, fusion, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn fuse_rec(
    alph: &Alphabet,
    left: &[Ev],
    right: &[Ev],
    i: usize,
    used: &mut Vec<bool>,
    acc: &mut Vec<Ev>,
    skipped: &mut Vec<usize>,
    fused: usize,
    fusion: Fusion,
    out: &mut Vec<Vec<Ev>>,
) {
    if i == left.len() {
        if fusion == Fusion::NonEmpty && fused == 0 {
            return;
        }
        if fusion == Fusion::Maximal
            && skipped.iter().any(|&k| {
                right.iter().zip(used.iter()).any(|(r, u)| !*u && alph.gamma(&left[k].label, &r.label) != ActionId::Delta)
            })
        {
            return;
        }
        let mut evs = acc.clone();
        evs.extend(right.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(e, _)| e.clone()));
        out.push(evs);
        return;
    }
    acc.push(left[i].clone());
    skipped.push(i);
    fuse_rec(alph, left, right, i + 1, used, acc, skipped, fused, fusion, out);
    skipped.pop();
    acc.pop();
    for j in 0..right.len() {
        if used[j] {
            continue;
        }
        let c = alph.gamma(&left[i].label, &right[j].label);
        if c == ActionId::Delta {
            continue;
        }
        let ev = if c == ActionId::Tau {
            Ev { label: c, at: LocWord::epsilon(), via: None }
        } else {
            Ev {
                label: c,
                at: left[i].at.common_prefix(&right[j].at),
                via: Some((left[i].at.clone(), right[j].at.clone())),
            }
        };
        used[j] = true;
        acc.push(ev);
        fuse_rec(alph, left, right, i + 1, used, acc, skipped, fused + 1, fusion, out);
        acc.pop();
        used[j] = false;
    }
}

/// The label an event of `x` gets in `unless(x, y)`, where `atoms` are the
/// actions occurring in `y`: silent when it conflicts with one of them, or
/// when one of them conflicts with an action that causally precedes it.
pub fn unless_label(alph: &Alphabet, label: &ActionId, atoms: &BTreeSet<Action>) -> ActionId {
    let Some(a) = label.as_visible() else {
        return label.clone();
    };
    for z in atoms {
        if alph.conflicts(a, z) {
            return ActionId::Tau;
        }
    }
    for (p, q) in alph.conflict_pairs() {
        for (z, mid) in [(p, q), (q, p)] {
            if atoms.contains(z) && alph.causes(mid, a) {
                return ActionId::Tau;
            }
        }
    }
    label.clone()
}

/// Unfolds `theta(x)` structurally into a theta-free term.
pub fn theta_expand(env: &Env, x: &Term) -> Result<Term, SosError> {
    let th = |t: &Term| theta_expand(env, t);
    Ok(match x {
        Term::Nil | Term::Delta | Term::Tau | Term::Act(_) => x.clone(),
        Term::Loc(u, p) => Term::loc(u.clone(), th(p)?),
        Term::Prefix(items, p) => Term::prefix(items.clone(), th(p)?),
        Term::Alt(p, q) => {
            Term::alt(Term::unless(th(p)?, (**q).clone()), Term::unless(th(q)?, (**p).clone()))
        }
        Term::Seq(p, q) => Term::seq(th(p)?, th(q)?),
        Term::Par(p, q) | Term::Comm(p, q) | Term::LeftMerge(p, q) => {
            let build: fn(Term, Term) -> Term = match x {
                Term::Par(..) => Term::par,
                Term::Comm(..) => Term::comm,
                _ => Term::left_merge,
            };
            Term::alt(
                build(Term::unless(th(p)?, (**q).clone()), (**q).clone()),
                build(Term::unless(th(q)?, (**p).clone()), (**p).clone()),
            )
        }
        Term::Merge(p, q) => {
            let par = Term::par((**p).clone(), (**q).clone());
            let comm = Term::comm((**p).clone(), (**q).clone());
            Term::alt(Term::unless(th(&par)?, comm.clone()), Term::unless(th(&comm)?, par))
        }
        Term::Theta(p) => th(&th(p)?)?,
        Term::Unless(p, q) => Term::unless(th(p)?, (**q).clone()),
        Term::Encap(h, p) => Term::Encap(h.clone(), Box::new(th(p)?)),
        Term::Hide(i, p) => Term::Hide(i.clone(), Box::new(th(p)?)),
        Term::Proj(n, p) => Term::Proj(*n, Box::new(th(p)?)),
        Term::Restrict(l, p) => Term::Restrict(l.clone(), Box::new(th(p)?)),
        Term::Relabel(f, p) => Term::Relabel(f.clone(), Box::new(th(p)?)),
        Term::Const(_) => th(&x.expand_consts(env)?)?,
        Term::Var(..) => return Err(SosError::ThetaRecursion),
    })
}

// Rename placeholders in order of first appearance so that equal moves
// compare equal regardless of the minting counter.
fn canonical_placeholders(step: &Step, next: &Target<Term>) -> (Step, Target<Term>) {
    let mut order: Vec<String> = Vec::new();
    let mut note = |w: &LocWord| {
        for n in w.names() {
            if n.starts_with(PLACEHOLDER) && !order.iter().any(|o| o == n) {
                order.push(n.to_string());
            }
        }
    };
    for e in step.events() {
        note(&e.at);
        if let Some((a, b)) = &e.via {
            note(a);
            note(b);
        }
    }
    if let Target::To(t) = next {
        t.visit(&mut |s| {
            if let Term::Loc(u, _) = s {
                note(u);
            }
        });
    }
    if order.is_empty() {
        return (step.clone(), next.clone());
    }
    let map: HashMap<String, String> =
        order.iter().enumerate().map(|(i, o)| (o.clone(), format!("{PLACEHOLDER}{i}"))).collect();
    let f = |n: &str| map.get(n).cloned();
    (step.rename(&f), wrap(next.clone(), |t| rename_locs(&t, &f)))
}

/// Renames location names throughout a term.
pub fn rename_locs(t: &Term, f: &impl Fn(&str) -> Option<String>) -> Term {
    match t {
        Term::Loc(u, p) => Term::loc(u.rename(f), rename_locs(p, f)),
        Term::Prefix(items, p) => {
            let items = items
                .iter()
                .map(|it| crate::term::PrefixItem::new(it.at.rename(f), it.action.clone()))
                .collect();
            Term::prefix(items, rename_locs(p, f))
        }
        _ => {
            let kids = t.children().into_iter().map(|c| rename_locs(c, f)).collect();
            t.with_children(kids)
        }
    }
}

fn finish(evs: Vec<Ev>) -> Option<Step> {
    if evs.iter().any(|e| e.label == ActionId::Delta) {
        return None;
    }
    let mut visible: Vec<LocatedAction> = evs
        .into_iter()
        .filter_map(|e| match e.label {
            ActionId::Visible(action) => Some(LocatedAction { action, at: e.at, via: e.via }),
            _ => None,
        })
        .collect();
    if visible.is_empty() {
        return Some(Step::Tau);
    }
    visible.sort();
    Some(Step::Visible(visible))
}

// Successors with placeholder names for minted locations.
fn raw_successors(env: &Env, t: &Term, mode: Mode, dialect: Dialect) -> Result<Vec<(Step, Target<Term>)>, SosError> {
    let mut d = Deriver { env, mode, dialect, minted: 0, unfold: 0 };
    let mut out: Vec<(Step, Target<Term>)> = d
        .moves(t)?
        .into_iter()
        .filter_map(|m| {
            let step = finish(m.evs)?;
            Some(canonical_placeholders(&step, &m.next))
        })
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

// Replaces placeholders with fresh `locN` names.
struct Minter {
    next: usize,
    taken: BTreeSet<String>,
}

impl Minter {
    fn new(t: &Term) -> Self {
        Minter { next: 0, taken: t.loc_names() }
    }

    fn fresh(&mut self) -> String {
        loop {
            let name = format!("loc{}", self.next);
            self.next += 1;
            if !self.taken.contains(&name) {
                return name;
            }
        }
    }

    fn assign(&mut self, step: &Step, next: &Target<Term>) -> (Step, Target<Term>) {
        let mut count = 0;
        let mut bump = |w: &LocWord| {
            for n in w.names() {
                if let Some(k) = n.strip_prefix(PLACEHOLDER) {
                    count = count.max(k.parse::<usize>().unwrap_or(0) + 1);
                }
            }
        };
        for e in step.events() {
            bump(&e.at);
            if let Some((u, w)) = &e.via {
                bump(u);
                bump(w);
            }
        }
        if let Target::To(t) = next {
            t.visit(&mut |s| {
                if let Term::Loc(u, _) = s {
                    bump(u);
                }
            });
        }
        if count == 0 {
            return (step.clone(), next.clone());
        }
        let names: Vec<String> = (0..count).map(|_| self.fresh()).collect();
        let f = |n: &str| n.strip_prefix(PLACEHOLDER).and_then(|k| k.parse::<usize>().ok()).map(|k| names[k].clone());
        (step.rename(&f), wrap(next.clone(), |t| rename_locs(&t, &f)))
    }
}

/// One-step transitions of `t`.
pub fn successors(env: &Env, t: &Term, mode: Mode) -> Result<Vec<(Step, Target<Term>)>, SosError> {
    let dialect = t.dialect(env);
    let raw = raw_successors(env, t, mode, dialect)?;
    let mut minter = Minter::new(t);
    Ok(raw.iter().map(|(s, n)| minter.assign(s, n)).collect())
}

/// A located step-transition system.
#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<Term>,
    pub initial: usize,
    pub transitions: Vec<Vec<(Step, Target<usize>)>>,
    pub mode: Mode,
    pub bounds: Bounds,
    pub truncated: bool,
}

impl Lts {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Location names minted during construction (absent from the initial term).
    pub fn minted_names(&self) -> BTreeSet<String> {
        let base = self.states[self.initial].loc_names();
        let mut out = BTreeSet::new();
        for ts in &self.transitions {
            for (s, _) in ts {
                for e in s.events() {
                    out.extend(e.at.names().filter(|n| !base.contains(*n)).map(str::to_string));
                }
            }
        }
        out
    }

    /// Visible weak steps `tau* X tau*` from `state`.
    pub fn weak_steps(&self, state: usize) -> BTreeSet<(Step, Target<usize>)> {
        let mut out = BTreeSet::new();
        for s in self.tau_closure(state) {
            for (step, target) in &self.transitions[s] {
                if step.is_tau() {
                    continue;
                }
                match target {
                    Target::Done => {
                        out.insert((step.clone(), Target::Done));
                    }
                    Target::To(t) => {
                        for after in self.tau_closure_targets(*t) {
                            out.insert((step.clone(), after));
                        }
                    }
                }
            }
        }
        out
    }

    /// States reachable through silent steps, including `state`.
    pub fn tau_closure(&self, state: usize) -> Vec<usize> {
        let mut seen = BTreeSet::from([state]);
        let mut stack = vec![state];
        while let Some(s) = stack.pop() {
            for (step, target) in &self.transitions[s] {
                if let (Step::Tau, Target::To(t)) = (step, target) {
                    if seen.insert(*t) {
                        stack.push(*t);
                    }
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Silent closure including termination.
    pub fn tau_closure_targets(&self, state: usize) -> Vec<Target<usize>> {
        let mut out: Vec<Target<usize>> = Vec::new();
        for s in self.tau_closure(state) {
            out.push(Target::To(s));
            if self.transitions[s].iter().any(|(st, t)| st.is_tau() && *t == Target::Done) {
                out.push(Target::Done);
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Deterministic DOT rendering; termination is a double circle.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n  node [shape=circle];\n");
        let uses_done = self.transitions.iter().flatten().any(|(_, t)| *t == Target::Done);
        for (i, t) in self.states.iter().enumerate() {
            let shape = if i == self.initial { ", style=bold" } else { "" };
            out.push_str(&format!("  s{i} [label=\"{}\"{shape}];\n", escape(&t.to_string())));
        }
        if uses_done {
            out.push_str("  done [shape=doublecircle, label=\"√\"];\n");
        }
        for (i, ts) in self.transitions.iter().enumerate() {
            for (step, target) in ts {
                let to = match target {
                    Target::Done => "done".to_string(),
                    Target::To(j) => format!("s{j}"),
                };
                out.push_str(&format!("  s{i} -> {to} [label=\"{}\"];\n", escape(&step.to_string())));
            }
        }
        out.push_str("}\n");
        out
    }

    /// JSON rendering: `states` are printed terms, with `"√"` appended as
    /// the last state when termination is reachable (`done` gives its index).
    pub fn to_json(&self) -> serde_json::Value {
        let mut states: Vec<String> = self.states.iter().map(|t| t.to_string()).collect();
        let uses_done = self.transitions.iter().flatten().any(|(_, t)| *t == Target::Done);
        let done = if uses_done {
            states.push("√".to_string());
            Some(states.len() - 1)
        } else {
            None
        };
        let mut transitions = Vec::new();
        for (i, ts) in self.transitions.iter().enumerate() {
            for (step, target) in ts {
                let to = match target {
                    Target::Done => done.expect("done state present"),
                    Target::To(j) => *j,
                };
                transitions.push(json!({"from": i, "step": step_json(step), "to": to}));
            }
        }
        json!({
            "mode": self.mode.to_string(),
            "initial": self.initial,
            "truncated": self.truncated,
            "done": done,
            "states": states,
            "transitions": transitions,
        })
    }
}

/// `[{"a": .., "loc": ..}]`, with `via` for fused events; the silent step is
/// `[{"a": "tau", "loc": "eps"}]`.
pub fn step_json(step: &Step) -> serde_json::Value {
    match step {
        Step::Tau => json!([{"a": "tau", "loc": "eps"}]),
        Step::Visible(v) => serde_json::Value::Array(
            v.iter()
                .map(|e| {
                    let mut obj = json!({"a": e.action.as_str(), "loc": e.at.to_string()});
                    if let Some((u, w)) = &e.via {
                        obj["via"] = json!([u.to_string(), w.to_string()]);
                    }
                    obj
                })
                .collect(),
        ),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Breadth-first closure of [`successors`] within `bounds`.
pub fn build_lts(env: &Env, t: &Term, mode: Mode, bounds: Bounds) -> Result<Lts, SosError> {
    let dialect = t.dialect(env);
    let mut minter = Minter::new(t);
    let mut states = vec![t.clone()];
    let mut index: HashMap<Term, usize> = HashMap::from([(t.clone(), 0)]);
    let mut depth = vec![0usize];
    let mut transitions: Vec<Vec<(Step, Target<usize>)>> = vec![Vec::new()];
    let mut truncated = false;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let raw = raw_successors(env, &states[s], mode, dialect)?;
        if depth[s] >= bounds.depth {
            truncated |= !raw.is_empty();
            continue;
        }
        let mut out = Vec::new();
        for (step, next) in &raw {
            let (step, next) = minter.assign(step, next);
            let target = match next {
                Target::Done => Target::Done,
                Target::To(term) => match index.get(&term) {
                    Some(&j) => Target::To(j),
                    None => {
                        if states.len() >= bounds.states {
                            truncated = true;
                            continue;
                        }
                        let j = states.len();
                        index.insert(term.clone(), j);
                        states.push(term);
                        depth.push(depth[s] + 1);
                        transitions.push(Vec::new());
                        queue.push_back(j);
                        Target::To(j)
                    }
                },
            };
            out.push((step, target));
        }
        out.sort();
        out.dedup();
        transitions[s] = out;
    }
    Ok(Lts { states, initial: 0, transitions, mode, bounds, truncated })
}

/// Visible weak steps of `t`: `tau* X tau*`.
pub fn weak_successors(env: &Env, t: &Term, mode: Mode) -> Result<Vec<(Step, Target<Term>)>, SosError> {
    let lts = build_lts(env, t, mode, Bounds::default())?;
    Ok(lts
        .weak_steps(lts.initial)
        .into_iter()
        .map(|(s, tgt)| (s, wrap_index(&lts, tgt)))
        .collect())
}

fn wrap_index(lts: &Lts, t: Target<usize>) -> Target<Term> {
    match t {
        Target::Done => Target::Done,
        Target::To(i) => Target::To(lts.states[i].clone()),
    }
}

/// Strong bisimilarity with exact labels (used for cross-checking
/// different constructions of the same behaviour).
pub fn exact_bisimilar(
    a: (&[Vec<(Step, Target<usize>)>], usize),
    b: (&[Vec<(Step, Target<usize>)>], usize),
) -> bool {
    // Disjoint union, states of `b` shifted by |a|; one extra node for √.
    let na = a.0.len();
    let nb = b.0.len();
    let done = na + nb;
    let total = done + 1;
    let edges = |i: usize| -> Vec<(Step, usize)> {
        let (ts, off) = if i < na { (&a.0[i], 0) } else if i < done { (&b.0[i - na], na) } else { return vec![] };
        ts.iter()
            .map(|(s, t)| {
                (
                    s.clone(),
                    match t {
                        Target::Done => done,
                        Target::To(j) => j + off,
                    },
                )
            })
            .collect()
    };
    let all: Vec<Vec<(Step, usize)>> = (0..total).map(edges).collect();
    let mut block: Vec<usize> = (0..total).map(|i| usize::from(i == done)).collect();
    loop {
        let mut sigs: BTreeMap<(usize, BTreeSet<(Step, usize)>), usize> = BTreeMap::new();
        let mut next = vec![0; total];
        for i in 0..total {
            let sig: BTreeSet<(Step, usize)> = all[i].iter().map(|(s, t)| (s.clone(), block[*t])).collect();
            let len = sigs.len();
            next[i] = *sigs.entry((block[i], sig)).or_insert(len);
        }
        let stable = sigs.len() == block.iter().collect::<BTreeSet<_>>().len();
        block = next;
        if stable {
            break;
        }
    }
    block[a.1] == block[na + b.1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn env_with(src: &str) -> Env {
        Env::new(Alphabet::parse(src).unwrap())
    }

    fn succ(env: &Env, src: &str, mode: Mode) -> Vec<String> {
        successors(env, &parse_term(src).unwrap(), mode)
            .unwrap()
            .into_iter()
            .map(|(s, t)| match t {
                Target::Done => format!("{s} -> √"),
                Target::To(t) => format!("{s} -> {t}"),
            })
            .collect()
    }

    #[test]
    fn located_atom() {
        assert_eq!(succ(&Env::default(), "l1 :: a", Mode::Static), ["a@l1 -> √"]);
    }

    #[test]
    fn parallel_moves_jointly() {
        assert_eq!(succ(&Env::default(), "a // b", Mode::Static), ["a@eps,b@eps -> √"]);
    }

    #[test]
    fn communication_merge() {
        let env = env_with("comm: a * b = c\n");
        assert_eq!(succ(&env, "a | b", Mode::Static), ["c@eps -> √"]);
        let both = succ(&env, "a || b", Mode::Static);
        assert_eq!(both, ["a@eps,b@eps -> √", "c@eps -> √"]);
    }

    #[test]
    fn multi_prefix_fires_together() {
        assert_eq!(succ(&Env::default(), "<a, b> . 0", Mode::Static), ["a@eps,b@eps -> 0"]);
    }

    #[test]
    fn encapsulation_blocks() {
        assert!(succ(&Env::default(), "encap({a}, a)", Mode::Static).is_empty());
    }

    #[test]
    fn dynamic_prefix_mints() {
        assert_eq!(succ(&Env::default(), "a . 0", Mode::Dynamic), ["a@loc0 -> loc0 :: 0"]);
    }

    #[test]
    fn dynamic_communication_mints_both_partners() {
        let env = env_with("comm: f * g = h\n");
        let lts = build_lts(&env, &parse_term("f || g").unwrap(), Mode::Dynamic, Bounds::default()).unwrap();
        let json = lts.to_json().to_string();
        assert!(json.contains(r#""a":"h""#) && json.contains(r#""via":["loc"#), "{json}");
    }

    #[test]
    fn hiding_produces_tau() {
        assert_eq!(succ(&Env::default(), "hide({a}, a ; b)", Mode::Static), ["tau -> hide({a}, b)"]);
    }

    #[test]
    fn theta_uses_conflicts() {
        let env = env_with("conflict: a # b\n");
        assert_eq!(succ(&env, "theta(a + b)", Mode::Static), ["tau -> √"]);
        assert_eq!(succ(&Env::default(), "theta(a + b)", Mode::Static), ["a@eps -> √", "b@eps -> √"]);
    }

    #[test]
    fn ctc_parallel_interleaves_only_when_stuck() {
        let env = env_with("comm: a * b = tau\n");
        let moves = succ(&env, "a . 0 // b . 0", Mode::Static);
        // Partners never fire side by side unfused.
        assert_eq!(moves, ["tau -> 0 // 0"]);
        assert_eq!(succ(&env, "a . 0 // c . 0", Mode::Static), ["a@eps,c@eps -> 0 // 0"]);
        assert_eq!(succ(&env, "0 // b . 0", Mode::Static), ["b@eps -> 0 // 0"]);
    }

    #[test]
    fn prefix_with_partners_is_blocked() {
        let env = env_with("comm: a * b = tau\n");
        assert!(succ(&env, "<a, b> . 0", Mode::Static).is_empty());
    }

    #[test]
    fn lts_chain_and_truncation() {
        let env = Env::default();
        let t = parse_term("a ; b").unwrap();
        let lts = build_lts(&env, &t, Mode::Static, Bounds::default()).unwrap();
        assert_eq!(lts.len(), 2);
        assert_eq!(lts.transition_count(), 2);
        assert!(!lts.truncated);
        let small = build_lts(&env, &t, Mode::Static, Bounds { states: 1, ..Bounds::default() }).unwrap();
        assert!(small.truncated);
    }

    #[test]
    fn recursion_self_loop() {
        let spec = crate::syntax::parse_spec("spec E { X = <a>.X }").unwrap();
        let env = Env::default().with_spec(spec);
        let lts = build_lts(&env, &parse_term("X@E").unwrap(), Mode::Static, Bounds::default()).unwrap();
        assert_eq!(lts.len(), 1);
        assert_eq!(lts.transitions[0], vec![(lts.transitions[0][0].0.clone(), Target::To(0))]);
    }

    #[test]
    fn weak_steps_skip_tau() {
        let env = Env::default();
        let w = weak_successors(&env, &parse_term("tau ; a").unwrap(), Mode::Static).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].1, Target::Done);
        assert!(weak_successors(&env, &parse_term("tau ; tau ; 0").unwrap(), Mode::Static).unwrap().is_empty());
    }

    #[test]
    fn dot_export_shapes() {
        let env = Env::default();
        let lts = build_lts(&env, &parse_term("a").unwrap(), Mode::Static, Bounds::default()).unwrap();
        let dot = lts.to_dot();
        assert!(dot.contains("doublecircle"));
        assert!(dot.contains("s0 -> done [label=\"a@eps\"]"));
        let lone = build_lts(&env, &parse_term("d").unwrap(), Mode::Static, Bounds::default()).unwrap();
        assert_eq!(lone.to_dot().matches("->").count(), 0);
        let dynamic = build_lts(&env, &parse_term("a ; b").unwrap(), Mode::Dynamic, Bounds::default()).unwrap();
        assert!(dynamic.to_dot().contains("a@loc0"));
        assert!(dynamic.to_dot().contains("b@loc0.loc1"));
    }

    #[test]
    fn static_words_follow_nesting() {
        let env = Env::default();
        assert_eq!(succ(&env, "l1 :: (a ; l2 :: b)", Mode::Static), ["a@l1 -> l1.l2 :: b"]);
    }
}
