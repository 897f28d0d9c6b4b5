//! Prime event structures with located events, compiled from recursion-free
//! terms, with configurations, pomset transitions and maximal steps.
//!
//! Two kinds of pseudo-events model inaction: a *blocking* event stands for
//! deadlock (a maximal step that would contain it is forbidden) and an
//! *idle* event stands for the inert process `0` (it never fires, but while
//! enabled the configuration does not count as terminated).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde_json::json;
use thiserror::Error;

use crate::alphabet::{Action, ActionId};
use crate::sos::{theta_expand, unless_label, LocatedAction, Mode, Step, Target};
use crate::term::{Dialect, Env, LocWord, PrefixItem, Term, TermError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Action,
    Blocking,
    Idle,
}

/// A located event.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub id: usize,
    pub label: ActionId,
    pub at: LocWord,
    pub via: Option<(LocWord, LocWord)>,
    pub kind: EventKind,
}

impl Event {
    fn fires(&self) -> bool {
        self.kind == EventKind::Action
    }
}

/// A set of event ids, closed downward and conflict-free.
pub type Config = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PesError {
    #[error("no event structure for {0}")]
    Unsupported(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// A finite prime event structure; `causes` holds strict predecessors and
/// `conflicts` is symmetric and hereditary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pes {
    pub events: Vec<Event>,
    causes: Vec<BTreeSet<usize>>,
    conflicts: Vec<BTreeSet<usize>>,
}

impl Pes {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn causes(&self, e: usize) -> &BTreeSet<usize> {
        &self.causes[e]
    }

    /// Strict causality `e1 < e2`.
    pub fn before(&self, e1: usize, e2: usize) -> bool {
        self.causes[e2].contains(&e1)
    }

    pub fn in_conflict(&self, e1: usize, e2: usize) -> bool {
        self.conflicts[e1].contains(&e2)
    }

    pub fn concurrent(&self, e1: usize, e2: usize) -> bool {
        e1 != e2 && !self.before(e1, e2) && !self.before(e2, e1) && !self.in_conflict(e1, e2)
    }

    pub fn is_config(&self, c: &Config) -> bool {
        c.iter().all(|&e| self.causes[e].is_subset(c) && self.conflicts[e].is_disjoint(c))
    }

    /// Events outside `c` that may be added to it.
    pub fn enabled(&self, c: &Config) -> Vec<usize> {
        (0..self.len())
            .filter(|e| !c.contains(e) && self.causes[*e].is_subset(c) && self.conflicts[*e].is_disjoint(c))
            .collect()
    }

    /// No event at all is enabled.
    pub fn is_terminal(&self, c: &Config) -> bool {
        self.enabled(c).is_empty()
    }

    /// Maximal conflict-free sets of enabled firing events; sets that could
    /// be extended by a blocking event are dropped.
    pub fn maximal_steps(&self, c: &Config) -> Vec<Config> {
        let candidates: Vec<usize> =
            self.enabled(c).into_iter().filter(|&e| self.events[e].kind != EventKind::Idle).collect();
        let mut out = Vec::new();
        maximal_independent_sets(&candidates, &|a, b| self.in_conflict(a, b), &mut |set| {
            if set.iter().all(|&e| self.events[e].fires()) {
                out.push(set.iter().copied().collect());
            }
        });
        out
    }

    /// All configurations of at most `max` firing events, including the empty one.
    pub fn configurations(&self, max: usize) -> Vec<Config> {
        let mut seen: BTreeSet<Config> = BTreeSet::from([Config::new()]);
        let mut queue = VecDeque::from([Config::new()]);
        while let Some(c) = queue.pop_front() {
            if c.len() >= max {
                continue;
            }
            for e in self.enabled(&c) {
                if !self.events[e].fires() {
                    continue;
                }
                let mut d = c.clone();
                d.insert(e);
                if seen.insert(d.clone()) {
                    queue.push_back(d);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Every configuration that extends `c` by a nonempty set of firing events.
    pub fn extensions(&self, c: &Config) -> Vec<Config> {
        let mut seen: BTreeSet<Config> = BTreeSet::new();
        let mut queue = VecDeque::from([c.clone()]);
        while let Some(d) = queue.pop_front() {
            for e in self.enabled(&d) {
                if !self.events[e].fires() {
                    continue;
                }
                let mut n = d.clone();
                n.insert(e);
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// The labelled poset of the events in `x`.
    pub fn pomset(&self, x: &Config) -> PomsetLabel {
        let ids: Vec<usize> = x.iter().copied().collect();
        let labels = ids.iter().map(|&e| (self.events[e].label.clone(), self.events[e].at.clone())).collect();
        let mut order = BTreeSet::new();
        for (i, &a) in ids.iter().enumerate() {
            for (j, &b) in ids.iter().enumerate() {
                if self.before(a, b) {
                    order.insert((i, j));
                }
            }
        }
        let is_step = order.is_empty();
        PomsetLabel { ids, labels, order, is_step }
    }

    /// Pomset transitions from `c`: every nonempty `X` with `c ∪ X` a configuration.
    pub fn pomset_transitions(&self, c: &Config) -> Vec<(PomsetLabel, Config)> {
        self.extensions(c)
            .into_iter()
            .map(|d| {
                let x: Config = d.difference(c).copied().collect();
                (self.pomset(&x), d)
            })
            .collect()
    }

    /// Weak pomset transitions: silent events are absorbed and the label
    /// keeps visible events only; purely silent extensions are omitted.
    pub fn weak_pomset_transitions(&self, c: &Config) -> Vec<(PomsetLabel, Config)> {
        self.pomset_transitions(c)
            .into_iter()
            .filter_map(|(_, d)| {
                let x: Config = d.difference(c).copied().filter(|&e| !self.events[e].label.is_tau()).collect();
                if x.is_empty() {
                    None
                } else {
                    Some((self.pomset(&x), d))
                }
            })
            .collect()
    }

    /// The step label fired by moving through the events `x`.
    pub fn step_label(&self, x: &Config) -> Step {
        let mut visible: Vec<LocatedAction> = x
            .iter()
            .filter_map(|&e| {
                let ev = &self.events[e];
                ev.label.as_visible().map(|a| LocatedAction { action: a.clone(), at: ev.at.clone(), via: ev.via.clone() })
            })
            .collect();
        if visible.is_empty() {
            return Step::Tau;
        }
        visible.sort();
        Step::Visible(visible)
    }

    /// The graph of configurations reachable by maximal steps, in the shape
    /// of an LTS: terminal configurations become termination.
    pub fn step_graph(&self) -> StepGraph {
        let mut configs = vec![Config::new()];
        let mut index: HashMap<Config, usize> = HashMap::from([(Config::new(), 0)]);
        let mut transitions: Vec<Vec<(Step, Target<usize>)>> = vec![Vec::new()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            let c = configs[i].clone();
            let mut out = Vec::new();
            for x in self.maximal_steps(&c) {
                let d: Config = c.union(&x).copied().collect();
                let target = if self.is_terminal(&d) {
                    Target::Done
                } else {
                    let j = *index.entry(d.clone()).or_insert_with(|| {
                        configs.push(d.clone());
                        transitions.push(Vec::new());
                        queue.push_back(configs.len() - 1);
                        configs.len() - 1
                    });
                    Target::To(j)
                };
                out.push((self.step_label(&x), target));
            }
            out.sort();
            out.dedup();
            transitions[i] = out;
        }
        StepGraph { configs, transitions }
    }

    /// Configurations reachable from the empty one by maximal steps.
    pub fn reachable_configs(&self) -> Vec<Config> {
        let mut seen: BTreeSet<Config> = BTreeSet::from([Config::new()]);
        let mut queue = VecDeque::from([Config::new()]);
        while let Some(c) = queue.pop_front() {
            for x in self.maximal_steps(&c) {
                let d: Config = c.union(&x).copied().collect();
                if seen.insert(d.clone()) {
                    queue.push_back(d);
                }
            }
        }
        seen.into_iter().collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let events: Vec<_> = self
            .events
            .iter()
            .map(|e| {
                let mut obj = json!({"id": e.id, "label": e.label.to_string(), "loc": e.at.to_string()});
                match e.kind {
                    EventKind::Action => {}
                    EventKind::Blocking => obj["kind"] = json!("blocking"),
                    EventKind::Idle => obj["kind"] = json!("idle"),
                }
                obj
            })
            .collect();
        let mut causal = Vec::new();
        let mut conflict = Vec::new();
        for e in 0..self.len() {
            for &c in &self.causes[e] {
                causal.push(json!([c, e]));
            }
            for &f in &self.conflicts[e] {
                if e < f {
                    conflict.push(json!([e, f]));
                }
            }
        }
        json!({"events": events, "causal": causal, "conflict": conflict})
    }

    /// Checks the structural invariants: causality is a strict partial
    /// order, conflict is irreflexive, symmetric and hereditary.
    pub fn check_invariants(&self) -> Result<(), String> {
        for e in 0..self.len() {
            if self.causes[e].contains(&e) {
                return Err(format!("event {e} causes itself"));
            }
            for &c in &self.causes[e] {
                if !self.causes[c].is_subset(&self.causes[e]) {
                    return Err(format!("causality not transitive at {c} < {e}"));
                }
            }
            if self.conflicts[e].contains(&e) {
                return Err(format!("event {e} conflicts with itself"));
            }
            for &f in &self.conflicts[e] {
                if !self.conflicts[f].contains(&e) {
                    return Err(format!("conflict {e} # {f} not symmetric"));
                }
                for g in 0..self.len() {
                    if self.causes[g].contains(&f) && !self.conflicts[e].contains(&g) {
                        return Err(format!("conflict {e} # {f} not inherited by {g}"));
                    }
                }
            }
        }
        Ok(())
    }

    fn push(&mut self, label: ActionId, at: LocWord, via: Option<(LocWord, LocWord)>, kind: EventKind) -> usize {
        let id = self.events.len();
        self.events.push(Event { id, label, at, via, kind });
        self.causes.push(BTreeSet::new());
        self.conflicts.push(BTreeSet::new());
        id
    }

    fn atom(label: ActionId, at: LocWord, kind: EventKind) -> Pes {
        let mut p = Pes::default();
        p.push(label, at, None, kind);
        p
    }

    // Copies `other` into `self`, returning the id offset.
    fn absorb(&mut self, other: &Pes) -> usize {
        let off = self.len();
        for e in &other.events {
            self.push(e.label.clone(), e.at.clone(), e.via.clone(), e.kind);
        }
        for (i, cs) in other.causes.iter().enumerate() {
            self.causes[off + i] = cs.iter().map(|c| c + off).collect();
        }
        for (i, cs) in other.conflicts.iter().enumerate() {
            self.conflicts[off + i] = cs.iter().map(|c| c + off).collect();
        }
        off
    }

    fn add_conflict(&mut self, a: usize, b: usize) {
        self.conflicts[a].insert(b);
        self.conflicts[b].insert(a);
    }

    // Makes conflict hereditary: e # f ≤ g implies e # g.
    fn close_conflicts(&mut self) {
        let n = self.len();
        let down: Vec<BTreeSet<usize>> =
            (0..n).map(|e| self.causes[e].iter().copied().chain([e]).collect()).collect();
        let base = self.conflicts.clone();
        for x in 0..n {
            for y in x + 1..n {
                if down[x].iter().any(|&a| down[y].iter().any(|&b| base[a].contains(&b))) {
                    self.add_conflict(x, y);
                }
            }
        }
    }

    // Drops events that can never occur: those caused by a blocking or idle event.
    fn prune(self) -> Pes {
        let keep: Vec<bool> = (0..self.len())
            .map(|e| self.causes[e].iter().all(|&c| self.events[c].fires()))
            .collect();
        if keep.iter().all(|k| *k) {
            return self;
        }
        let mut map = vec![usize::MAX; self.len()];
        let mut out = Pes::default();
        for e in 0..self.len() {
            if keep[e] {
                let ev = &self.events[e];
                map[e] = out.push(ev.label.clone(), ev.at.clone(), ev.via.clone(), ev.kind);
            }
        }
        for e in 0..self.len() {
            if keep[e] {
                out.causes[map[e]] = self.causes[e].iter().map(|&c| map[c]).collect();
                out.conflicts[map[e]] =
                    self.conflicts[e].iter().filter(|&&c| keep[c]).map(|&c| map[c]).collect();
            }
        }
        out
    }

    fn map_events(mut self, f: impl Fn(&mut Event)) -> Pes {
        for e in &mut self.events {
            f(e);
        }
        self
    }

    fn prefixed(self, u: &LocWord) -> Pes {
        if u.is_empty() {
            return self;
        }
        self.map_events(|e| {
            if e.label != ActionId::Tau {
                e.at = u.concat(&e.at);
                e.via = e.via.take().map(|(a, b)| (u.concat(&a), u.concat(&b)));
            }
        })
    }

    fn has_blocking(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Blocking)
    }
}

/// A labelled poset: events `ids` with labels and the strict order between
/// positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PomsetLabel {
    pub ids: Vec<usize>,
    pub labels: Vec<(ActionId, LocWord)>,
    pub order: BTreeSet<(usize, usize)>,
    pub is_step: bool,
}

/// Configurations reachable by maximal steps, with LTS-shaped transitions.
#[derive(Clone, Debug)]
pub struct StepGraph {
    pub configs: Vec<Config>,
    pub transitions: Vec<Vec<(Step, Target<usize>)>>,
}

/// Enumerates maximal independent sets of `items` under `conflict`.
pub(crate) fn maximal_independent_sets(
    items: &[usize],
    conflict: &impl Fn(usize, usize) -> bool,
    visit: &mut impl FnMut(&[usize]),
) {
    let mut chosen = Vec::new();
    mis_rec(items, 0, conflict, &mut chosen, visit);
}

fn mis_rec(
    items: &[usize],
    i: usize,
    conflict: &impl Fn(usize, usize) -> bool,
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if i == items.len() {
        // Maximal iff every skipped item conflicts with a chosen one.
        let maximal =
            items.iter().all(|&x| chosen.contains(&x) || chosen.iter().any(|&c| conflict(c, x)));
        if maximal && !chosen.is_empty() {
            visit(chosen);
        }
        return;
    }
    let x = items[i];
    if chosen.iter().all(|&c| !conflict(c, x)) {
        chosen.push(x);
        mis_rec(items, i + 1, conflict, chosen, visit);
        chosen.pop();
        // Skipping x is only useful if something later or earlier can block it.
        let blockable = items.iter().any(|&y| y != x && conflict(x, y));
        if blockable {
            mis_rec(items, i + 1, conflict, chosen, visit);
        }
    } else {
        mis_rec(items, i + 1, conflict, chosen, visit);
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Policy {
    /// `//` and `<<`: no communication in the first step, any afterwards.
    FirstUnfused,
    /// `||`: any communication.
    Any,
    /// `|`: the first step consists of communications only.
    FirstFused,
    /// The CCS-style parallel: a cross pair that can communicate never
    /// fires unfused.
    Maximal,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum Origin {
    Left(usize),
    Right(usize),
    Sync(usize, usize),
    Stuck,
}

impl Origin {
    fn left(self) -> Option<usize> {
        match self {
            Origin::Left(a) | Origin::Sync(a, _) => Some(a),
            _ => None,
        }
    }

    fn right(self) -> Option<usize> {
        match self {
            Origin::Right(b) | Origin::Sync(_, b) => Some(b),
            _ => None,
        }
    }
}

struct Compiler<'a> {
    env: &'a Env,
    mode: Mode,
    dialect: Dialect,
    minted: usize,
    taken: BTreeSet<String>,
}

/// Compiles a recursion-free term.
pub fn term_to_pes(env: &Env, t: &Term, mode: Mode) -> Result<Pes, PesError> {
    let t = t.expand_consts(env)?;
    let mut c = Compiler { env, mode, dialect: t.dialect(env), minted: 0, taken: t.loc_names() };
    c.compile(&t)
}

impl<'a> Compiler<'a> {
    fn mint(&mut self) -> LocWord {
        loop {
            let name = format!("loc{}", self.minted);
            self.minted += 1;
            if !self.taken.contains(&name) {
                return LocWord::single(&name);
            }
        }
    }

    fn compile(&mut self, t: &Term) -> Result<Pes, PesError> {
        let out = match t {
            Term::Nil => Pes::atom(ActionId::Delta, LocWord::epsilon(), EventKind::Idle),
            Term::Delta => Pes::atom(ActionId::Delta, LocWord::epsilon(), EventKind::Blocking),
            Term::Tau => Pes::atom(ActionId::Tau, LocWord::epsilon(), EventKind::Action),
            Term::Act(a) => {
                let at = match self.mode {
                    Mode::Static => LocWord::epsilon(),
                    Mode::Dynamic => self.mint(),
                };
                Pes::atom(ActionId::Visible(a.clone()), at, EventKind::Action)
            }
            Term::Loc(u, p) => self.compile(p)?.prefixed(u),
            Term::Prefix(items, body) => self.prefix(items, body)?,
            Term::Seq(x, y) => {
                if self.mode == Mode::Dynamic {
                    return Err(PesError::Unsupported("sequential composition with dynamic locations".into()));
                }
                let px = self.compile(x)?;
                let py = self.compile(y)?;
                seq(&px, &py)
            }
            Term::Alt(x, y) => {
                let px = self.compile(x)?;
                let py = self.compile(y)?;
                let mut out = Pes::default();
                out.absorb(&px);
                let off = out.absorb(&py);
                for a in 0..off {
                    for b in off..out.len() {
                        out.add_conflict(a, b);
                    }
                }
                out
            }
            Term::Par(x, y) if self.dialect == Dialect::Ctc => {
                let px = self.compile(x)?;
                let py = self.compile(y)?;
                if px.has_blocking() || py.has_blocking() {
                    return Err(PesError::Unsupported("CCS-style parallel over a deadlocking component".into()));
                }
                product(self.env, &px, &py, Policy::Maximal)?
            }
            Term::Par(x, y) | Term::LeftMerge(x, y) => self.aptc_product(x, y, Policy::FirstUnfused)?,
            Term::Merge(x, y) => self.aptc_product(x, y, Policy::Any)?,
            Term::Comm(x, y) => self.aptc_product(x, y, Policy::FirstFused)?,
            Term::Encap(h, p) => {
                let blocked = self.env.resolve_set(h, false)?;
                block(self.compile(p)?, &blocked)
            }
            Term::Restrict(l, p) => {
                let mut blocked = l.clone();
                blocked.extend(self.env.alphabet.co_set(l));
                block(self.compile(p)?, &blocked)
            }
            Term::Hide(i, p) => {
                let hidden = self.env.resolve_set(i, true)?;
                self.compile(p)?.map_events(|e| {
                    if e.label.as_visible().is_some_and(|a| hidden.contains(a)) {
                        e.label = ActionId::Tau;
                        e.at = LocWord::epsilon();
                        e.via = None;
                    }
                })
            }
            Term::Relabel(f, p) => {
                let table = self.env.resolve_relabel(f)?;
                self.compile(p)?.map_events(|e| {
                    if e.kind == EventKind::Action {
                        e.label = table.apply(&e.label);
                        if e.label == ActionId::Delta {
                            e.kind = EventKind::Blocking;
                        }
                    }
                })
            }
            Term::Theta(x) => {
                let expanded = theta_expand(self.env, x).map_err(|e| PesError::Unsupported(e.to_string()))?;
                self.compile(&expanded)?
            }
            Term::Unless(x, y) => {
                let atoms = y.atoms();
                let alph = &self.env.alphabet;
                self.compile(x)?.map_events(|e| {
                    e.label = unless_label(alph, &e.label, &atoms);
                    if e.label == ActionId::Tau {
                        e.at = LocWord::epsilon();
                        e.via = None;
                    }
                })
            }
            Term::Proj(n, x) => truncate(self.compile(x)?, *n as usize),
            Term::Var(..) | Term::Const(_) => return Err(PesError::Unsupported("recursion".into())),
        };
        Ok(out.prune())
    }

    fn prefix(&mut self, items: &[PrefixItem], body: &Term) -> Result<Pes, PesError> {
        for (i, x) in items.iter().enumerate() {
            for y in &items[i + 1..] {
                if let (ActionId::Visible(a), ActionId::Visible(b)) = (&x.action, &y.action) {
                    if self.env.alphabet.communicates(a, b) {
                        return Ok(Pes::atom(ActionId::Delta, LocWord::epsilon(), EventKind::Blocking));
                    }
                }
            }
        }
        let fresh = match self.mode {
            Mode::Static => LocWord::epsilon(),
            Mode::Dynamic => self.mint(),
        };
        let mut out = Pes::default();
        for it in items {
            let at = if it.action == ActionId::Tau { LocWord::epsilon() } else { fresh.concat(&it.at) };
            out.push(it.action.clone(), at, None, EventKind::Action);
        }
        let k = out.len();
        let pb = self.compile(body)?.prefixed(&fresh);
        let off = out.absorb(&pb);
        for e in off..out.len() {
            out.causes[e].extend(0..k);
        }
        Ok(out)
    }

    fn aptc_product(&mut self, x: &Term, y: &Term, policy: Policy) -> Result<Pes, PesError> {
        let idle_blocks = |p: Pes| {
            p.map_events(|e| {
                if e.kind == EventKind::Idle {
                    e.kind = EventKind::Blocking;
                }
            })
        };
        let px = idle_blocks(self.compile(x)?);
        let py = idle_blocks(self.compile(y)?);
        product(self.env, &px, &py, policy)
    }
}

// Keeps the first `depth` maximal steps. A firing event occurs exactly one
// step after its last cause, so its step index is its causal height; events
// one step too deep block, and deeper ones are pruned.
fn truncate(mut p: Pes, depth: usize) -> Pes {
    let mut height = vec![0usize; p.len()];
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by_key(|&e| p.causes[e].len());
    for e in order {
        height[e] = 1 + p.causes[e].iter().map(|&c| height[c]).max().unwrap_or(0);
    }
    for (e, h) in height.iter().enumerate() {
        if *h > depth && p.events[e].kind == EventKind::Action {
            let ev = &mut p.events[e];
            ev.kind = EventKind::Blocking;
            ev.label = ActionId::Delta;
            ev.at = LocWord::epsilon();
            ev.via = None;
        }
    }
    p.prune()
}

fn block(p: Pes, blocked: &BTreeSet<Action>) -> Pes {
    p.map_events(|e| {
        if e.label.as_visible().is_some_and(|a| blocked.contains(a)) {
            e.kind = EventKind::Blocking;
            e.label = ActionId::Delta;
            e.via = None;
        }
    })
}

// One copy of `y` per terminal configuration of `x`, caused by it.
fn seq(x: &Pes, y: &Pes) -> Pes {
    let terminals: Vec<Config> = x.reachable_configs().into_iter().filter(|c| x.is_terminal(c)).collect();
    let mut out = Pes::default();
    out.absorb(x);
    for f in &terminals {
        let off = out.absorb(y);
        for e in off..out.len() {
            out.causes[e].extend(f.iter().copied());
            for &c in f {
                let inherited: Vec<usize> = x.conflicts[c].iter().copied().collect();
                for g in inherited {
                    out.add_conflict(e, g);
                }
            }
        }
    }
    out.close_conflicts();
    out
}

// Builds the event structure of a binary parallel operator by exploring
// the maximal steps of the combination. Product events are identified by
// their origin and the set of product events among their causes.
fn product(env: &Env, a: &Pes, b: &Pes, policy: Policy) -> Result<Pes, PesError> {
    let alph = &env.alphabet;
    let mut origins: Vec<(Origin, BTreeSet<usize>)> = Vec::new();
    let mut index: HashMap<(Origin, BTreeSet<usize>), usize> = HashMap::new();
    let mut seen: BTreeSet<Config> = BTreeSet::from([Config::new()]);
    let mut queue = VecDeque::from([Config::new()]);
    let mut sync_clash: BTreeSet<((Origin, BTreeSet<usize>), (Origin, BTreeSet<usize>))> = BTreeSet::new();
    let mut admitted: BTreeMap<Config, BTreeSet<Config>> = BTreeMap::new();
    while let Some(p) = queue.pop_front() {
        let left: Config = p.iter().filter_map(|&q| origins[q].0.left()).collect();
        let right: Config = p.iter().filter_map(|&q| origins[q].0.right()).collect();
        let en_a = a.enabled(&left);
        let en_b = b.enabled(&right);
        let first = p.is_empty();
        // The first step of `|` needs at least one communication; other
        // events of the two sides may join it.
        let first_fused = first && policy == Policy::FirstFused;
        let mut cands: Vec<Origin> = Vec::new();
        let allow_sync = !(first && policy == Policy::FirstUnfused);
        cands.extend(en_a.iter().map(|&e| Origin::Left(e)));
        cands.extend(en_b.iter().map(|&e| Origin::Right(e)));
        if allow_sync {
            for &ea in &en_a {
                for &eb in &en_b {
                    if a.events[ea].fires()
                        && b.events[eb].fires()
                        && alph.gamma(&a.events[ea].label, &b.events[eb].label) != ActionId::Delta
                    {
                        cands.push(Origin::Sync(ea, eb));
                    }
                }
            }
        }
        if cands.is_empty() && !(en_a.is_empty() && en_b.is_empty()) {
            cands.push(Origin::Stuck);
        }
        let keys: Vec<(Origin, BTreeSet<usize>)> = cands
            .iter()
            .map(|&o| {
                // The APTC operators move in lock-step, so every event
                // follows the whole configuration it extends.
                if policy != Policy::Maximal {
                    return (o, p.iter().copied().collect());
                }
                let hist: BTreeSet<usize> = p
                    .iter()
                    .copied()
                    .filter(|&q| {
                        let (oq, _) = origins[q];
                        let la = o.left().zip(oq.left()).is_some_and(|(x, y)| a.before(y, x));
                        let rb = o.right().zip(oq.right()).is_some_and(|(x, y)| b.before(y, x));
                        la || rb
                    })
                    .collect();
                (o, hist)
            })
            .collect();
        let kind = |o: Origin| match o {
            Origin::Left(e) => a.events[e].kind,
            Origin::Right(e) => b.events[e].kind,
            Origin::Sync(..) => EventKind::Action,
            Origin::Stuck => EventKind::Blocking,
        };
        let can_sync = |o1: Origin, o2: Origin| match (o1, o2) {
            (Origin::Left(x), Origin::Right(y)) | (Origin::Right(y), Origin::Left(x)) => {
                alph.gamma(&a.events[x].label, &b.events[y].label) != ActionId::Delta
            }
            _ => false,
        };
        let clash = |i: usize, j: usize| origin_conflict(a, b, keys[i].0, keys[j].0);
        let steppable: Vec<usize> = (0..keys.len()).filter(|&i| kind(keys[i].0) != EventKind::Idle).collect();
        let mut chosen: Vec<Vec<usize>> = Vec::new();
        maximal_independent_sets(&steppable, &clash, &mut |set| {
            if !set.iter().all(|&i| kind(keys[i].0) == EventKind::Action) {
                return;
            }
            if policy == Policy::Maximal && set.iter().any(|&i| set.iter().any(|&j| can_sync(keys[i].0, keys[j].0))) {
                return;
            }
            if first_fused && !set.iter().any(|&i| matches!(keys[i].0, Origin::Sync(..))) {
                return;
            }
            chosen.push(set.to_vec());
        });
        // Under maximal matching only events that occur in some admitted
        // step exist; otherwise every candidate does.
        let mut intern = |key: &(Origin, BTreeSet<usize>)| {
            *index.entry(key.clone()).or_insert_with(|| {
                origins.push(key.clone());
                origins.len() - 1
            })
        };
        if policy == Policy::Maximal {
            for (i, key) in keys.iter().enumerate() {
                if kind(key.0) == EventKind::Idle || chosen.iter().any(|c| c.contains(&i)) {
                    intern(key);
                }
            }
            for i in 0..keys.len() {
                for j in i + 1..keys.len() {
                    if can_sync(keys[i].0, keys[j].0) {
                        sync_clash.insert((keys[i].clone(), keys[j].clone()));
                    }
                }
            }
        } else if first_fused {
            // Events here are private to this configuration (lock-step
            // histories), so conflicts between events that never share an
            // admitted step only shape this one choice.
            let members: Vec<usize> = (0..keys.len()).filter(|i| chosen.iter().any(|c| c.contains(i))).collect();
            for &i in &members {
                intern(&keys[i]);
            }
            for key in &keys {
                if kind(key.0) == EventKind::Blocking {
                    intern(key);
                }
            }
            if chosen.is_empty() && !keys.iter().any(|k| kind(k.0) == EventKind::Blocking) {
                intern(&(Origin::Stuck, BTreeSet::new()));
            }
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    if !chosen.iter().any(|c| c.contains(&i) && c.contains(&j)) {
                        sync_clash.insert((keys[i].clone(), keys[j].clone()));
                    }
                }
            }
        } else {
            for key in &keys {
                intern(key);
            }
        }
        let steps: Vec<Config> = chosen.iter().map(|c| c.iter().map(|&i| index[&keys[i]]).collect()).collect();
        admitted.insert(p.clone(), steps.iter().cloned().collect());
        for s in steps {
            let d: Config = p.union(&s).copied().collect();
            if seen.insert(d.clone()) {
                queue.push_back(d);
            }
        }
    }
    let mut out = Pes::default();
    for (o, _) in &origins {
        match *o {
            Origin::Left(e) => {
                let ev = &a.events[e];
                out.push(ev.label.clone(), ev.at.clone(), ev.via.clone(), ev.kind);
            }
            Origin::Right(e) => {
                let ev = &b.events[e];
                out.push(ev.label.clone(), ev.at.clone(), ev.via.clone(), ev.kind);
            }
            Origin::Sync(ea, eb) => {
                let (x, y) = (&a.events[ea], &b.events[eb]);
                let label = alph.gamma(&x.label, &y.label);
                let (at, via) = if label == ActionId::Tau {
                    (LocWord::epsilon(), None)
                } else {
                    (x.at.common_prefix(&y.at), Some((x.at.clone(), y.at.clone())))
                };
                out.push(label, at, via, EventKind::Action);
            }
            Origin::Stuck => {
                out.push(ActionId::Delta, LocWord::epsilon(), None, EventKind::Blocking);
            }
        }
    }
    for (q, (_, hist)) in origins.iter().enumerate() {
        let mut all = hist.clone();
        for &h in hist {
            all.extend(out.causes[h].iter().copied());
        }
        out.causes[q] = all;
    }
    for q1 in 0..origins.len() {
        for q2 in q1 + 1..origins.len() {
            if origin_conflict(a, b, origins[q1].0, origins[q2].0) {
                out.add_conflict(q1, q2);
            }
        }
    }
    for (k1, k2) in &sync_clash {
        if let (Some(&q1), Some(&q2)) = (index.get(k1), index.get(k2)) {
            out.add_conflict(q1, q2);
        }
    }
    out.close_conflicts();
    // Maximal matching can admit step sets that no event structure has;
    // such products are reported rather than approximated.
    if matches!(policy, Policy::Maximal | Policy::FirstFused)
        && admitted.iter().any(|(c, steps)| out.maximal_steps(c).into_iter().collect::<BTreeSet<_>>() != *steps)
    {
        return Err(PesError::Unsupported("parallel composition whose steps no event structure realizes".into()));
    }
    Ok(out)
}

fn origin_conflict(a: &Pes, b: &Pes, o1: Origin, o2: Origin) -> bool {
    if o1 == Origin::Stuck || o2 == Origin::Stuck {
        return o1 == o2;
    }
    let side = |x: Option<usize>, y: Option<usize>, p: &Pes| match (x, y) {
        (Some(x), Some(y)) => x == y || p.in_conflict(x, y),
        _ => false,
    };
    o1 != o2 && (side(o1.left(), o2.left(), a) || side(o1.right(), o2.right(), b))
}

/// Strong bisimilarity with exact labels between the maximal-step graph of
/// the event structure and the LTS of the same term.
pub fn agrees_with_lts(pes: &Pes, lts: &crate::sos::Lts) -> bool {
    let g = pes.step_graph();
    crate::sos::exact_bisimilar((&g.transitions, 0), (&lts.transitions, lts.initial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::sos::{build_lts, Bounds};
    use crate::syntax::parse_term;

    fn pes(env: &Env, src: &str) -> Pes {
        let p = term_to_pes(env, &parse_term(src).unwrap(), Mode::Static).unwrap();
        p.check_invariants().unwrap();
        p
    }

    fn agree(env: &Env, src: &str) -> bool {
        let t = parse_term(src).unwrap();
        let p = term_to_pes(env, &t, Mode::Static).unwrap();
        let lts = build_lts(env, &t, Mode::Static, Bounds::default()).unwrap();
        agrees_with_lts(&p, &lts)
    }

    #[test]
    fn sequence_is_causal() {
        let p = pes(&Env::default(), "a ; b");
        assert_eq!(p.len(), 2);
        assert!(p.before(0, 1));
        assert!(!p.in_conflict(0, 1));
        let configs = p.configurations(5);
        assert_eq!(configs.len(), 3);
    }

    #[test]
    fn choice_is_conflict() {
        let p = pes(&Env::default(), "a + b");
        assert!(p.in_conflict(0, 1));
        assert_eq!(p.configurations(5).len(), 3);
    }

    #[test]
    fn parallel_is_concurrent() {
        let p = pes(&Env::default(), "a // b");
        assert_eq!(p.len(), 2);
        assert!(p.concurrent(0, 1));
    }

    #[test]
    fn pomset_transitions_of_sequence() {
        let p = pes(&Env::default(), "a ; b");
        let ts = p.pomset_transitions(&Config::new());
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.iter().filter(|(l, _)| l.is_step).count(), 1);
        let full: Config = [0, 1].into_iter().collect();
        assert!(p.pomset_transitions(&full).is_empty());
        let par = pes(&Env::default(), "a // b");
        assert_eq!(par.pomset_transitions(&Config::new()).len(), 3);
    }

    #[test]
    fn weak_pomsets_absorb_tau() {
        let p = pes(&Env::default(), "tau ; a");
        let ts = p.weak_pomset_transitions(&Config::new());
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].0.labels.len(), 1);
        assert!(pes(&Env::default(), "tau").weak_pomset_transitions(&Config::new()).is_empty());
    }

    #[test]
    fn agreement_on_small_terms() {
        let env = Env::new(Alphabet::parse("comm: a * b = c\nencap H: {a}\n").unwrap());
        for src in [
            "a ; b + a ; c",
            "(a + b) ; c",
            "a // b",
            "a // (b + c)",
            "(a ; b) // c",
            "a || b",
            "(a ; a) || (b ; b)",
            "a | b",
            "a | c",
            "a + d",
            "a // d",
            "encap(H, a ; b + b)",
            "l1 :: a // l2 :: (b ; a)",
            "(a + b) // (a ; c)",
            "a << b",
            "(a // b) ; c",
        ] {
            assert!(agree(&env, src), "{src}");
        }
    }

    #[test]
    fn agreement_ccs_style() {
        let env = Env::new(Alphabet::parse("comm: a * b = tau\n").unwrap());
        for src in ["a . 0 // b . 0", "a . b . 0 // 0", "(a . 0 + b . 0) // b . c . 0", "<a, c> . 0 + 0", "tau . a . 0"] {
            assert!(agree(&env, src), "{src}");
        }
    }

    #[test]
    fn agreement_on_random_ccs_terms() {
        use crate::gen::{GenConfig, TermGen};
        let env = Env::new(Alphabet::parse("comm: a * b = tau\ncomm: c * e = f\nrelabel r: a -> c\n").unwrap());
        let mut g = TermGen::new(11, GenConfig::ctc().with_actions(&["a", "b", "c", "e"]));
        let mut compared = 0;
        for _ in 0..600 {
            let t = g.term_up_to(9);
            let Ok(p) = term_to_pes(&env, &t, Mode::Static) else { continue };
            let lts = build_lts(&env, &t, Mode::Static, Bounds::default()).unwrap();
            assert!(agrees_with_lts(&p, &lts), "{t}");
            compared += 1;
        }
        assert!(compared > 300, "{compared}");
    }

    #[test]
    fn conflict_elimination_and_projection() {
        let env = Env::new(Alphabet::law_suite());
        for src in ["theta(a + b)", "unless(a ; c, b)", "theta((a + b) // c)", "pi(1, a ; b)", "pi(2, (a // b) ; (c + e ; f))", "pi(0, a) + b", "pi(1, a ; b) ; c"] {
            assert!(agree(&env, src), "{src}");
        }
        let p = pes(&env, "pi(1, a ; b)");
        assert_eq!(p.len(), 2);
        assert_eq!(p.events[1].kind, EventKind::Blocking);
    }

    #[test]
    fn agreement_on_random_aptc_terms() {
        use crate::gen::{GenConfig, Op, TermGen};
        let env = Env::new(Alphabet::law_suite());
        let cfg = GenConfig::hide().with(Op::Proj, 2).with(Op::Encap, 1).with(Op::Theta, 1).with(Op::Unless, 1);
        let mut g = TermGen::new(5, cfg.with_actions(&["a", "b", "c", "e", "f", "g"]));
        let mut compared = 0;
        for _ in 0..600 {
            let t = g.term_up_to(8);
            let Ok(p) = term_to_pes(&env, &t, Mode::Static) else { continue };
            p.check_invariants().unwrap();
            let lts = build_lts(&env, &t, Mode::Static, Bounds::default()).unwrap();
            assert!(agrees_with_lts(&p, &lts), "{t}");
            compared += 1;
        }
        assert!(compared > 500, "{compared}");
    }

    #[test]
    fn recursion_is_unsupported() {
        let env = Env::default().with_spec(crate::syntax::parse_spec("spec E { X = a . X }").unwrap());
        assert!(term_to_pes(&env, &parse_term("X@E").unwrap(), Mode::Static).is_err());
    }
}
