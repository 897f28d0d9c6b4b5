//! Located process terms, location words and linear recursive specifications.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::alphabet::{Action, ActionId, Alphabet, Relabelling};

/// A word over location names; the empty word is written `eps`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocWord(Vec<Arc<str>>);

impl LocWord {
    pub fn epsilon() -> Self {
        LocWord(Vec::new())
    }

    pub fn single(name: &str) -> Self {
        LocWord(vec![Arc::from(name)])
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        LocWord(names.into_iter().map(Arc::from).collect())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|n| &**n)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &LocWord) -> LocWord {
        let mut parts = self.0.clone();
        parts.extend(other.0.iter().cloned());
        LocWord(parts)
    }

    pub fn is_prefix_of(&self, other: &LocWord) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn common_prefix(&self, other: &LocWord) -> LocWord {
        LocWord(self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).map(|(a, _)| a.clone()).collect())
    }

    /// Neither word extends the other.
    pub fn independent(&self, other: &LocWord) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }

    /// Renames every name through `f`.
    pub fn rename(&self, f: &impl Fn(&str) -> Option<String>) -> LocWord {
        LocWord(self.0.iter().map(|n| f(n).map(|s| Arc::from(s.as_str())).unwrap_or_else(|| n.clone())).collect())
    }
}

impl fmt::Display for LocWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("eps");
        }
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(n)?;
        }
        Ok(())
    }
}

/// Relative position of two location words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocOrder {
    Equal,
    /// The first word is a proper prefix of the second.
    Before,
    /// The second word is a proper prefix of the first.
    After,
    Independent,
}

pub fn loc_compare(u: &LocWord, v: &LocWord) -> LocOrder {
    if u == v {
        LocOrder::Equal
    } else if u.is_prefix_of(v) {
        LocOrder::Before
    } else if v.is_prefix_of(u) {
        LocOrder::After
    } else {
        LocOrder::Independent
    }
}

/// One located item of a multi-action prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrefixItem {
    pub at: LocWord,
    pub action: ActionId,
}

impl PrefixItem {
    pub fn new(at: LocWord, action: ActionId) -> Self {
        PrefixItem { at, action }
    }
}

impl fmt::Display for PrefixItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.at.is_empty() {
            write!(f, "{}", self.action)
        } else {
            write!(f, "{} :: {}", self.at, self.action)
        }
    }
}

/// An action set given by name (resolved in the alphabet) or literally.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetRef {
    Named(String),
    Literal(BTreeSet<Action>),
}

/// A relabelling given by name or as a literal table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelabelRef {
    Named(String),
    Literal(Vec<(Action, Action)>),
}

/// Process terms of both calculi. Location prefixes are kept flat:
/// build them with [`Term::loc`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Nil,
    Delta,
    Tau,
    Act(Action),
    Loc(LocWord, Box<Term>),
    Prefix(Vec<PrefixItem>, Box<Term>),
    Seq(Box<Term>, Box<Term>),
    Alt(Box<Term>, Box<Term>),
    /// `//`: parallel composition.
    Par(Box<Term>, Box<Term>),
    /// `||`: whole merge.
    Merge(Box<Term>, Box<Term>),
    /// `|`: communication merge.
    Comm(Box<Term>, Box<Term>),
    /// `<<`: left parallel composition.
    LeftMerge(Box<Term>, Box<Term>),
    Theta(Box<Term>),
    Unless(Box<Term>, Box<Term>),
    Encap(SetRef, Box<Term>),
    Hide(SetRef, Box<Term>),
    Proj(u32, Box<Term>),
    Restrict(BTreeSet<Action>, Box<Term>),
    Relabel(RelabelRef, Box<Term>),
    Const(String),
    /// `X@E`: variable `X` of the specification `E`.
    Var(String, String),
}

/// Which calculus a term is read in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    /// Truly concurrent process algebra (APTC family).
    Aptc,
    /// Truly concurrent CCS.
    Ctc,
}

/// Rule systems, also used to scope `is_basic`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    Batc,
    Aptc,
    Encap,
    Proj,
    TauLaws,
    Hide,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Batc => "batc_sl",
            System::Aptc => "aptc_sl",
            System::Encap => "encap",
            System::Proj => "proj",
            System::TauLaws => "tau_laws",
            System::Hide => "hide",
        }
    }

    pub fn parse(name: &str) -> Option<System> {
        match name {
            "batc_sl" | "batc" => Some(System::Batc),
            "aptc_sl" | "aptc" => Some(System::Aptc),
            "encap" => Some(System::Encap),
            "proj" => Some(System::Proj),
            "tau_laws" | "tau" => Some(System::TauLaws),
            "hide" => Some(System::Hide),
            _ => None,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("unknown encapsulation or hiding set `{0}`")]
    UnknownSet(String),
    #[error("unknown relabelling `{0}`")]
    UnknownRelabelling(String),
    #[error("undefined constant `{0}`")]
    UndefinedConstant(String),
    #[error("unknown specification `{0}`")]
    UnknownSpec(String),
    #[error("variable `{0}` is not defined in specification `{1}`")]
    UnknownVar(String, String),
    #[error("constant `{0}` is defined through itself")]
    CyclicConstant(String),
}

/// One summand of a linear equation: an action multiset, optionally
/// followed by a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Summand {
    pub items: Vec<PrefixItem>,
    pub target: Option<String>,
}

impl Summand {
    pub fn new(mut items: Vec<PrefixItem>, target: Option<String>) -> Self {
        items.sort();
        Summand { items, target }
    }

    /// The summand without its target as a term: located atoms joined by `<<`.
    pub fn items_term(&self) -> Term {
        let mut atoms = self.items.iter().map(|it| {
            let base = match &it.action {
                ActionId::Visible(a) => Term::Act(a.clone()),
                ActionId::Tau => Term::Tau,
                ActionId::Delta => Term::Delta,
            };
            Term::loc(it.at.clone(), base)
        });
        let first = atoms.next().unwrap_or(Term::Delta);
        atoms.fold(first, |acc, t| Term::LeftMerge(Box::new(acc), Box::new(t)))
    }
}

/// A linear recursive specification `spec E { X = ... ; }`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSpec {
    pub name: String,
    /// Equations in declaration order; an empty summand list means deadlock.
    pub equations: Vec<(String, Vec<Summand>)>,
}

impl LinearSpec {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.equations.iter().map(|(v, _)| v.as_str())
    }

    pub fn summands(&self, var: &str) -> Option<&[Summand]> {
        self.equations.iter().find(|(v, _)| v == var).map(|(_, s)| s.as_slice())
    }

    pub fn first_var(&self) -> Option<&str> {
        self.equations.first().map(|(v, _)| v.as_str())
    }
}

/// Everything a term may refer to: the alphabet, linear specifications
/// and constant definitions.
#[derive(Clone, Debug, Default)]
pub struct Env {
    pub alphabet: Alphabet,
    pub specs: BTreeMap<String, LinearSpec>,
    pub defs: BTreeMap<String, Term>,
}

impl Env {
    pub fn new(alphabet: Alphabet) -> Self {
        Env { alphabet, ..Env::default() }
    }

    pub fn with_spec(mut self, spec: LinearSpec) -> Self {
        self.specs.insert(spec.name.clone(), spec);
        self
    }

    pub fn resolve_set(&self, set: &SetRef, hiding: bool) -> Result<BTreeSet<Action>, TermError> {
        match set {
            SetRef::Literal(s) => Ok(s.clone()),
            SetRef::Named(n) => {
                let found = if hiding { self.alphabet.hide_set(n) } else { self.alphabet.encap_set(n) };
                // A name declared only in the other family is still accepted.
                found
                    .or_else(|| if hiding { self.alphabet.encap_set(n) } else { self.alphabet.hide_set(n) })
                    .cloned()
                    .ok_or_else(|| TermError::UnknownSet(n.clone()))
            }
        }
    }

    pub fn resolve_relabel(&self, f: &RelabelRef) -> Result<Relabelling, TermError> {
        match f {
            RelabelRef::Named(n) => {
                self.alphabet.relabelling(n).cloned().ok_or_else(|| TermError::UnknownRelabelling(n.clone()))
            }
            RelabelRef::Literal(pairs) => {
                let mut r = Relabelling::new();
                for (a, b) in pairs {
                    r.insert(ActionId::Visible(a.clone()), ActionId::Visible(b.clone()));
                }
                Ok(r)
            }
        }
    }

    pub fn spec_summands(&self, var: &str, spec: &str) -> Result<&[Summand], TermError> {
        let s = self.specs.get(spec).ok_or_else(|| TermError::UnknownSpec(spec.to_string()))?;
        s.summands(var).ok_or_else(|| TermError::UnknownVar(var.to_string(), spec.to_string()))
    }

    pub fn constant(&self, name: &str) -> Result<&Term, TermError> {
        self.defs.get(name).ok_or_else(|| TermError::UndefinedConstant(name.to_string()))
    }
}

fn bx(t: Term) -> Box<Term> {
    Box::new(t)
}

impl Term {
    pub fn act(name: &str) -> Term {
        Term::Act(Action::new(name))
    }

    /// `u :: t`, flattening nested prefixes and dropping the empty word.
    pub fn loc(u: LocWord, t: Term) -> Term {
        if u.is_empty() {
            return t;
        }
        match t {
            Term::Loc(v, inner) => Term::Loc(u.concat(&v), inner),
            other => Term::Loc(u, bx(other)),
        }
    }

    pub fn seq(x: Term, y: Term) -> Term {
        Term::Seq(bx(x), bx(y))
    }

    pub fn alt(x: Term, y: Term) -> Term {
        Term::Alt(bx(x), bx(y))
    }

    pub fn par(x: Term, y: Term) -> Term {
        Term::Par(bx(x), bx(y))
    }

    pub fn merge(x: Term, y: Term) -> Term {
        Term::Merge(bx(x), bx(y))
    }

    pub fn comm(x: Term, y: Term) -> Term {
        Term::Comm(bx(x), bx(y))
    }

    pub fn left_merge(x: Term, y: Term) -> Term {
        Term::LeftMerge(bx(x), bx(y))
    }

    pub fn unless(x: Term, y: Term) -> Term {
        Term::Unless(bx(x), bx(y))
    }

    pub fn theta(x: Term) -> Term {
        Term::Theta(bx(x))
    }

    pub fn prefix(mut items: Vec<PrefixItem>, body: Term) -> Term {
        items.sort();
        Term::Prefix(items, bx(body))
    }

    /// Sum of `terms`, or `d` for none.
    pub fn sum(terms: impl IntoIterator<Item = Term>) -> Term {
        let mut it = terms.into_iter();
        match it.next() {
            None => Term::Delta,
            Some(first) => it.fold(first, Term::alt),
        }
    }

    /// Immediate subterms, left to right.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Nil | Term::Delta | Term::Tau | Term::Act(_) | Term::Const(_) | Term::Var(..) => vec![],
            Term::Loc(_, t)
            | Term::Prefix(_, t)
            | Term::Theta(t)
            | Term::Encap(_, t)
            | Term::Hide(_, t)
            | Term::Proj(_, t)
            | Term::Restrict(_, t)
            | Term::Relabel(_, t) => vec![t],
            Term::Seq(x, y)
            | Term::Alt(x, y)
            | Term::Par(x, y)
            | Term::Merge(x, y)
            | Term::Comm(x, y)
            | Term::LeftMerge(x, y)
            | Term::Unless(x, y) => vec![x, y],
        }
    }

    /// Rebuilds this node with new children (same arity and order as
    /// [`Term::children`]).
    pub fn with_children(&self, mut kids: Vec<Term>) -> Term {
        let mut next = || bx(kids.remove(0));
        match self {
            Term::Nil | Term::Delta | Term::Tau | Term::Act(_) | Term::Const(_) | Term::Var(..) => self.clone(),
            Term::Loc(u, _) => Term::loc(u.clone(), *next()),
            Term::Prefix(items, _) => Term::Prefix(items.clone(), next()),
            Term::Theta(_) => Term::Theta(next()),
            Term::Encap(h, _) => Term::Encap(h.clone(), next()),
            Term::Hide(i, _) => Term::Hide(i.clone(), next()),
            Term::Proj(n, _) => Term::Proj(*n, next()),
            Term::Restrict(l, _) => Term::Restrict(l.clone(), next()),
            Term::Relabel(f, _) => Term::Relabel(f.clone(), next()),
            Term::Seq(..) => Term::Seq(next(), next()),
            Term::Alt(..) => Term::Alt(next(), next()),
            Term::Par(..) => Term::Par(next(), next()),
            Term::Merge(..) => Term::Merge(next(), next()),
            Term::Comm(..) => Term::Comm(next(), next()),
            Term::LeftMerge(..) => Term::LeftMerge(next(), next()),
            Term::Unless(..) => Term::Unless(next(), next()),
        }
    }

    /// Number of nodes; location prefixes and prefix items count once each.
    pub fn size(&self) -> usize {
        let own = match self {
            Term::Prefix(items, _) => items.len(),
            _ => 1,
        };
        own + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    /// Visible actions occurring syntactically.
    pub fn atoms(&self) -> BTreeSet<Action> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Action>) {
        match self {
            Term::Act(a) => {
                out.insert(a.clone());
            }
            Term::Prefix(items, body) => {
                for it in items {
                    if let ActionId::Visible(a) = &it.action {
                        out.insert(a.clone());
                    }
                }
                body.collect_atoms(out);
            }
            _ => {
                for c in self.children() {
                    c.collect_atoms(out);
                }
            }
        }
    }

    /// Location names occurring in the term.
    pub fn loc_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| match t {
            Term::Loc(u, _) => out.extend(u.names().map(str::to_string)),
            Term::Prefix(items, _) => {
                for it in items {
                    out.extend(it.at.names().map(str::to_string));
                }
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn any(&self, pred: &impl Fn(&Term) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    /// Contains a constant or a recursion variable.
    pub fn has_references(&self) -> bool {
        self.any(&|t| matches!(t, Term::Const(_) | Term::Var(..)))
    }

    pub fn has_vars(&self) -> bool {
        self.any(&|t| matches!(t, Term::Var(..)))
    }

    /// Replaces every occurrence of constant `name`.
    pub fn subst_const(&self, name: &str, replacement: &Term) -> Term {
        match self {
            Term::Const(n) if n == name => replacement.clone(),
            _ => {
                let kids = self.children().into_iter().map(|c| c.subst_const(name, replacement)).collect();
                self.with_children(kids)
            }
        }
    }

    /// Expands constants through `env` (non-recursive definitions only).
    pub fn expand_consts(&self, env: &Env) -> Result<Term, TermError> {
        self.expand_consts_guarded(env, &mut Vec::new())
    }

    fn expand_consts_guarded(&self, env: &Env, stack: &mut Vec<String>) -> Result<Term, TermError> {
        match self {
            Term::Const(n) => {
                if stack.contains(n) {
                    return Err(TermError::CyclicConstant(n.clone()));
                }
                stack.push(n.clone());
                let out = env.constant(n)?.expand_consts_guarded(env, stack);
                stack.pop();
                out
            }
            _ => {
                let mut kids = Vec::new();
                for c in self.children() {
                    kids.push(c.expand_consts_guarded(env, stack)?);
                }
                Ok(self.with_children(kids))
            }
        }
    }

    /// The calculus the term is read in: CCS-style operators select
    /// [`Dialect::Ctc`].
    pub fn dialect(&self, env: &Env) -> Dialect {
        let mut seen = BTreeSet::new();
        if self.is_ctc(env, &mut seen) {
            Dialect::Ctc
        } else {
            Dialect::Aptc
        }
    }

    fn is_ctc(&self, env: &Env, seen: &mut BTreeSet<String>) -> bool {
        match self {
            Term::Nil | Term::Prefix(..) | Term::Restrict(..) | Term::Relabel(..) => true,
            Term::Const(n) => {
                if !seen.insert(n.clone()) {
                    return false;
                }
                env.defs.get(n).is_some_and(|d| d.is_ctc(env, seen))
            }
            _ => self.children().into_iter().any(|c| c.is_ctc(env, seen)),
        }
    }
}

/// The visible sort of a term: every action it may perform.
pub fn sort(env: &Env, t: &Term) -> Result<BTreeSet<Action>, TermError> {
    let mut visiting = BTreeSet::new();
    sort_rec(env, t, &mut visiting)
}

fn sort_rec(env: &Env, t: &Term, visiting: &mut BTreeSet<String>) -> Result<BTreeSet<Action>, TermError> {
    let alph = &env.alphabet;
    let pair = |x: &Term, y: &Term, visiting: &mut BTreeSet<String>, fused: bool| {
        let sx = sort_rec(env, x, visiting)?;
        let sy = sort_rec(env, y, visiting)?;
        let mut out: BTreeSet<Action> = sx.union(&sy).cloned().collect();
        if fused {
            for a in &sx {
                for b in &sy {
                    if let ActionId::Visible(c) = alph.gamma(&ActionId::Visible(a.clone()), &ActionId::Visible(b.clone()))
                    {
                        out.insert(c);
                    }
                }
            }
        }
        Ok::<_, TermError>(out)
    };
    Ok(match t {
        Term::Nil | Term::Delta | Term::Tau => BTreeSet::new(),
        Term::Act(a) => [a.clone()].into_iter().collect(),
        Term::Loc(_, p) | Term::Theta(p) | Term::Proj(_, p) => sort_rec(env, p, visiting)?,
        Term::Prefix(items, p) => {
            let mut out = sort_rec(env, p, visiting)?;
            for it in items {
                if let ActionId::Visible(a) = &it.action {
                    out.insert(a.clone());
                }
            }
            out
        }
        Term::Seq(x, y) | Term::Alt(x, y) | Term::LeftMerge(x, y) => pair(x, y, visiting, false)?,
        Term::Par(x, y) | Term::Merge(x, y) | Term::Comm(x, y) => pair(x, y, visiting, true)?,
        Term::Unless(x, _) => sort_rec(env, x, visiting)?,
        Term::Encap(h, p) => {
            let h = env.resolve_set(h, false)?;
            sort_rec(env, p, visiting)?.difference(&h).cloned().collect()
        }
        Term::Hide(i, p) => {
            let i = env.resolve_set(i, true)?;
            sort_rec(env, p, visiting)?.difference(&i).cloned().collect()
        }
        Term::Restrict(l, p) => {
            let co = alph.co_set(l);
            sort_rec(env, p, visiting)?.into_iter().filter(|a| !l.contains(a) && !co.contains(a)).collect()
        }
        Term::Relabel(f, p) => {
            let f = env.resolve_relabel(f)?;
            sort_rec(env, p, visiting)?
                .into_iter()
                .filter_map(|a| f.apply(&ActionId::Visible(a)).as_visible().cloned())
                .collect()
        }
        Term::Const(n) => {
            if !visiting.insert(n.clone()) {
                return Ok(BTreeSet::new());
            }
            let out = sort_rec(env, env.constant(n)?, visiting)?;
            visiting.remove(n);
            out
        }
        Term::Var(x, e) => {
            let key = format!("{x}@{e}");
            if !visiting.insert(key) {
                return Ok(BTreeSet::new());
            }
            let mut out = BTreeSet::new();
            for s in env.spec_summands(x, e)? {
                for it in &s.items {
                    if let ActionId::Visible(a) = &it.action {
                        out.insert(a.clone());
                    }
                }
                if let Some(y) = &s.target {
                    out.extend(sort_rec(env, &Term::Var(y.clone(), e.clone()), visiting)?);
                }
            }
            out
        }
    })
}

/// True for located atoms `u::a` (including `a`).
pub fn is_located_atom(t: &Term) -> bool {
    match t {
        Term::Act(_) => true,
        Term::Loc(_, inner) => matches!(**inner, Term::Act(_)),
        _ => false,
    }
}

/// Membership in the basic terms targeted by the elimination theorems.
/// For `batc_sl`: sums of sequences of located atoms. Richer systems also
/// admit `d`, `tau`, steps of atoms joined by `<<` and `|`, and the
/// operators that the system's rules leave in normal form.
pub fn is_basic(t: &Term, system: System) -> bool {
    match system {
        System::Batc => batc_basic(t),
        _ => aptc_basic(t, system),
    }
}

fn batc_basic(t: &Term) -> bool {
    match t {
        Term::Alt(x, y) => batc_basic(x) && batc_basic(y),
        Term::Seq(x, y) => is_located_atom(x) && batc_basic(y),
        other => is_located_atom(other),
    }
}

fn aptc_basic(t: &Term, system: System) -> bool {
    match t {
        Term::Alt(x, y) => aptc_basic(x, system) && aptc_basic(y, system),
        Term::Seq(x, y) => aptc_step(x, system) && aptc_basic(y, system),
        Term::LeftMerge(x, y) => aptc_basic(x, system) && aptc_basic(y, system),
        Term::Delta => true,
        other => aptc_step(other, system),
    }
}

fn aptc_step(t: &Term, system: System) -> bool {
    match t {
        // Silent steps arise from `unless` even without the tau laws.
        Term::Tau => true,
        Term::LeftMerge(x, y) | Term::Comm(x, y) => aptc_step(x, system) && aptc_step(y, system),
        other => is_located_atom(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> LocWord {
        LocWord::from_names(s.split('.'))
    }

    #[test]
    fn loc_compare_cases() {
        assert_eq!(loc_compare(&w("l1"), &w("l1")), LocOrder::Equal);
        assert_eq!(loc_compare(&w("l1"), &w("l1.l2")), LocOrder::Before);
        assert_eq!(loc_compare(&w("l1.l2"), &w("l1")), LocOrder::After);
        assert_eq!(loc_compare(&w("l1"), &w("l2")), LocOrder::Independent);
        assert_eq!(loc_compare(&LocWord::epsilon(), &w("l2")), LocOrder::Before);
    }

    #[test]
    fn loc_flattens() {
        let t = Term::loc(w("l1"), Term::loc(w("l2"), Term::act("a")));
        assert_eq!(t, Term::Loc(w("l1.l2"), Box::new(Term::act("a"))));
        assert_eq!(Term::loc(LocWord::epsilon(), Term::act("a")), Term::act("a"));
    }

    #[test]
    fn common_prefix_and_independence() {
        assert_eq!(w("l1.l2").common_prefix(&w("l1.l3")), w("l1"));
        assert!(w("l1.l2").independent(&w("l1.l3")));
        assert!(!LocWord::epsilon().independent(&w("l1")));
    }

    #[test]
    fn sort_of_restriction_removes_partners() {
        let mut alph = Alphabet::new();
        alph.add_comm(Action::new("a"), Action::new("b"), ActionId::Tau);
        let env = Env::new(alph);
        let body = Term::prefix(
            vec![PrefixItem::new(LocWord::epsilon(), ActionId::visible("a"))],
            Term::prefix(vec![PrefixItem::new(LocWord::epsilon(), ActionId::visible("c"))], Term::Nil),
        );
        let t = Term::Restrict([Action::new("b")].into_iter().collect(), Box::new(body.clone()));
        let expect: BTreeSet<_> = [Action::new("c")].into_iter().collect();
        assert_eq!(sort(&env, &t).unwrap(), expect);
        assert_eq!(sort(&env, &body).unwrap().len(), 2);
    }

    #[test]
    fn basic_terms() {
        let a = Term::act("a");
        let la = Term::loc(w("l1"), Term::act("b"));
        assert!(is_basic(&Term::alt(Term::seq(a.clone(), la.clone()), a.clone()), System::Batc));
        assert!(!is_basic(&Term::seq(Term::seq(a.clone(), a.clone()), a.clone()), System::Batc));
        assert!(!is_basic(&Term::loc(w("l1"), Term::seq(a.clone(), a.clone())), System::Batc));
        assert!(is_basic(&Term::seq(Term::left_merge(a.clone(), la), a.clone()), System::Aptc));
    }

    #[test]
    fn dialect_detection() {
        let env = Env::default();
        assert_eq!(Term::par(Term::act("a"), Term::act("b")).dialect(&env), Dialect::Aptc);
        assert_eq!(Term::par(Term::Nil, Term::act("b")).dialect(&env), Dialect::Ctc);
    }

    #[test]
    fn subst_and_size() {
        let t = Term::seq(Term::Const("X".into()), Term::act("b"));
        let s = t.subst_const("X", &Term::alt(Term::act("a"), Term::act("c")));
        assert_eq!(s.size(), 5);
        assert!(!s.has_references());
    }
}
