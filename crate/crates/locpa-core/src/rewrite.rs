//! Term rewriting for the axiom systems: innermost-leftmost normalization
//! with sums kept in a canonical order, replayable traces, and axiomatic
//! equality of closed terms.

use std::collections::BTreeSet;

use serde_json::json;
use thiserror::Error;

use crate::alphabet::{Action, ActionId, Alphabet};
use crate::sos::unless_label;
use crate::syntax::print_term;
use crate::term::{Dialect, Env, LocWord, System, Term, TermError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewriting did not terminate within {0} steps")]
    FuelExhausted(usize),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("cannot rewrite recursive term {0}")]
    Recursive(String),
}

/// One rewrite: the rule, the path of child indices to the redex, and the
/// redex before and after.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub rule: &'static str,
    pub position: Vec<usize>,
    pub before: Term,
    pub after: Term,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace(pub Vec<RewriteStep>);

impl Trace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One JSON object per line: `{rule, position, before, after}`.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.0 {
            let line = json!({
                "rule": s.rule,
                "position": s.position,
                "before": print_term(&s.before),
                "after": print_term(&s.after),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    /// Applies the recorded steps to `start`, checking every redex.
    pub fn replay(&self, start: &Term) -> Result<Term, String> {
        let mut t = start.clone();
        for (i, s) in self.0.iter().enumerate() {
            t = replace_at(&t, &s.position, &s.before, &s.after)
                .ok_or_else(|| format!("step {} ({}) does not match at {:?}", i + 1, s.rule, s.position))?;
        }
        Ok(t)
    }
}

fn replace_at(t: &Term, path: &[usize], before: &Term, after: &Term) -> Option<Term> {
    match path.split_first() {
        None => (t == before).then(|| after.clone()),
        Some((&i, rest)) => {
            let kids = t.children();
            let target = kids.get(i)?;
            let new = replace_at(target, rest, before, after)?;
            let mut owned: Vec<Term> = kids.into_iter().cloned().collect();
            owned[i] = new;
            Some(t.with_children(owned))
        }
    }
}

/// The default fuel for a term: ten times its size squared.
pub fn default_fuel(t: &Term) -> usize {
    let n = t.size();
    10 * n * n
}

// The rule tables, in the order in which the systems include them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Table {
    Batc,
    Aptc,
    Encap,
    Proj,
    TauLaws,
    Hide,
}

fn table_rank(system: System) -> Table {
    match system {
        System::Batc => Table::Batc,
        System::Aptc => Table::Aptc,
        System::Encap => Table::Encap,
        System::Proj => Table::Proj,
        System::TauLaws => Table::TauLaws,
        System::Hide => Table::Hide,
    }
}

struct Rewriter<'a> {
    env: &'a Env,
    alph: &'a Alphabet,
    upto: Table,
    ctc: bool,
    fuel: usize,
    trace: Vec<RewriteStep>,
}

/// Normalizes `t` with the rules of `system` (which includes the tables
/// of all smaller systems), innermost-leftmost.
pub fn normalize(env: &Env, t: &Term, system: System, fuel: usize) -> Result<(Term, Trace), RewriteError> {
    let t = t.expand_consts(env)?;
    if t.has_vars() {
        return Err(RewriteError::Recursive(print_term(&t)));
    }
    let mut rw = Rewriter {
        env,
        alph: &env.alphabet,
        upto: table_rank(system),
        ctc: t.dialect(env) == Dialect::Ctc,
        fuel,
        trace: Vec::new(),
    };
    let mut path = Vec::new();
    let out = rw.norm(t, &mut path)?;
    Ok((out, Trace(rw.trace)))
}

/// Normalizes both terms and compares the normal forms modulo AC of `+`.
pub fn axiom_equal(env: &Env, t1: &Term, t2: &Term, system: System) -> Result<bool, RewriteError> {
    let (n1, _) = normalize(env, t1, system, default_fuel(t1))?;
    let (n2, _) = normalize(env, t2, system, default_fuel(t2))?;
    Ok(ac_equal(&n1, &n2))
}

/// Syntactic equality after sorting the summands of every sum.
pub fn ac_equal(t1: &Term, t2: &Term) -> bool {
    ac_canonical(t1) == ac_canonical(t2)
}

/// Every sum flattened and its summands sorted (duplicates kept).
pub fn ac_canonical(t: &Term) -> Term {
    let kids: Vec<Term> = t.children().into_iter().map(ac_canonical).collect();
    let t = t.with_children(kids);
    if let Term::Alt(..) = t {
        let mut parts = Vec::new();
        flatten_sum(&t, &mut parts);
        parts.sort();
        Term::sum(parts)
    } else {
        t
    }
}

fn flatten_sum(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Alt(x, y) => {
            flatten_sum(x, out);
            flatten_sum(y, out);
        }
        other => out.push(other.clone()),
    }
}

// A located atom `u::a`, `a` or `tau`.
fn atom(t: &Term) -> Option<(LocWord, ActionId)> {
    match t {
        Term::Act(a) => Some((LocWord::epsilon(), ActionId::Visible(a.clone()))),
        Term::Tau => Some((LocWord::epsilon(), ActionId::Tau)),
        Term::Loc(u, inner) => match &**inner {
            Term::Act(a) => Some((u.clone(), ActionId::Visible(a.clone()))),
            _ => None,
        },
        _ => None,
    }
}

fn visible_atom(t: &Term) -> Option<(LocWord, Action)> {
    match atom(t)? {
        (u, ActionId::Visible(a)) => Some((u, a)),
        _ => None,
    }
}

fn make_atom(at: &LocWord, label: ActionId) -> Term {
    match label {
        ActionId::Visible(a) => Term::loc(at.clone(), Term::Act(a)),
        ActionId::Tau => Term::Tau,
        ActionId::Delta => Term::Delta,
    }
}

// A step: located atoms (or tau) joined by `<<`.
fn is_step(t: &Term) -> bool {
    match t {
        Term::LeftMerge(x, y) => is_step(x) && is_step(y),
        other => atom(other).is_some(),
    }
}

fn seq(x: Term, y: Term) -> Term {
    Term::seq(x, y)
}

fn alt(x: Term, y: Term) -> Term {
    Term::alt(x, y)
}

impl<'a> Rewriter<'a> {
    fn has(&self, table: Table) -> bool {
        table <= self.upto
    }

    fn record(&mut self, rule: &'static str, path: &[usize], before: Term, after: Term) -> Result<(), RewriteError> {
        if self.trace.len() >= self.fuel {
            return Err(RewriteError::FuelExhausted(self.fuel));
        }
        self.trace.push(RewriteStep { rule, position: path.to_vec(), before, after });
        Ok(())
    }

    fn norm(&mut self, t: Term, path: &mut Vec<usize>) -> Result<Term, RewriteError> {
        let kids: Vec<Term> = t.children().into_iter().cloned().collect();
        let t = if kids.is_empty() {
            t
        } else {
            let mut done = Vec::with_capacity(kids.len());
            for (i, k) in kids.into_iter().enumerate() {
                path.push(i);
                done.push(self.norm(k, path)?);
                path.pop();
            }
            t.with_children(done)
        };
        let t = if let Term::Alt(..) = t { self.canonical_sum(t, path)? } else { t };
        match self.rule_at(&t) {
            Some((rule, next)) => {
                self.record(rule, path, t, next.clone())?;
                self.norm(next, path)
            }
            None => Ok(t),
        }
    }

    // Applies A1/A2 (sorting), A3 (duplicates) and A6 (deadlock summands).
    fn canonical_sum(&mut self, t: Term, path: &[usize]) -> Result<Term, RewriteError> {
        let mut parts = Vec::new();
        flatten_sum(&t, &mut parts);
        let mut sorted = parts.clone();
        sorted.sort();
        let mut cur = t;
        if sorted != parts {
            let next = Term::sum(sorted.clone());
            self.record("AC", path, cur, next.clone())?;
            cur = next;
        }
        let mut dedup = sorted.clone();
        dedup.dedup();
        if dedup.len() != sorted.len() {
            let next = Term::sum(dedup.clone());
            self.record("RA3", path, cur, next.clone())?;
            cur = next;
        }
        if self.has(Table::Aptc) && dedup.len() > 1 && dedup.contains(&Term::Delta) {
            dedup.retain(|p| *p != Term::Delta);
            let next = Term::sum(dedup);
            self.record("RA6", path, cur, next.clone())?;
            cur = next;
        }
        Ok(cur)
    }

    fn leq(&self, a: &Action, b: &Action) -> bool {
        a == b || self.alph.causes(a, b)
    }

    fn rule_at(&self, t: &Term) -> Option<(&'static str, Term)> {
        match t {
            Term::Seq(x, z) => self.seq_rules(x, z),
            Term::Loc(u, x) => self.loc_rules(u, x),
            Term::Merge(x, y) if self.has(Table::Aptc) => {
                Some(("RP1", alt(Term::par((**x).clone(), (**y).clone()), Term::comm((**x).clone(), (**y).clone()))))
            }
            Term::Par(x, y) if self.has(Table::Aptc) && !self.ctc => Some((
                "RP4",
                alt(Term::left_merge((**x).clone(), (**y).clone()), Term::left_merge((**y).clone(), (**x).clone())),
            )),
            Term::LeftMerge(x, y) if self.has(Table::Aptc) => self.left_merge_rules(x, y),
            Term::Comm(x, y) if self.has(Table::Aptc) => self.comm_rules(x, y),
            Term::Theta(x) if self.has(Table::Aptc) => self.theta_rules(x),
            Term::Unless(x, y) if self.has(Table::Aptc) => self.unless_rules(x, y),
            Term::Encap(h, x) if self.has(Table::Encap) => {
                let blocked = self.env.resolve_set(h, false).ok()?;
                let wrap = |p: &Term| Term::Encap(h.clone(), Box::new(p.clone()));
                if let Some((_, label)) = atom(x) {
                    return match label.as_visible() {
                        Some(a) if blocked.contains(a) => Some(("RD2", Term::Delta)),
                        _ => Some(("RD1", (**x).clone())),
                    };
                }
                match &**x {
                    Term::Delta => Some(("RD3", Term::Delta)),
                    Term::Alt(p, q) => Some(("RD4", alt(wrap(p), wrap(q)))),
                    Term::Seq(p, q) => Some(("RD5", seq(wrap(p), wrap(q)))),
                    Term::LeftMerge(p, q) => Some(("RD6", Term::left_merge(wrap(p), wrap(q)))),
                    _ => None,
                }
            }
            Term::Proj(n, x) if self.has(Table::Proj) => self.proj_rules(*n, x),
            Term::Hide(i, x) if self.has(Table::Hide) => {
                let hidden = self.env.resolve_set(i, true).ok()?;
                let wrap = |p: &Term| Term::Hide(i.clone(), Box::new(p.clone()));
                if let Some((u, label)) = atom(x) {
                    let hide = label.as_visible().is_some_and(|a| hidden.contains(a));
                    let located = !u.is_empty();
                    return Some(match (hide, located) {
                        (true, false) => ("TI2", Term::Tau),
                        (true, true) => ("L16", Term::Tau),
                        (false, false) => ("TI1", (**x).clone()),
                        (false, true) => ("L15", (**x).clone()),
                    });
                }
                match &**x {
                    Term::Delta => Some(("TI3", Term::Delta)),
                    Term::Alt(p, q) => Some(("TI4", alt(wrap(p), wrap(q)))),
                    Term::Seq(p, q) => Some(("TI5", seq(wrap(p), wrap(q)))),
                    Term::LeftMerge(p, q) => Some(("TI6", Term::left_merge(wrap(p), wrap(q)))),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    fn seq_rules(&self, x: &Term, z: &Term) -> Option<(&'static str, Term)> {
        match x {
            Term::Alt(p, q) => return Some(("RA4", alt(seq((**p).clone(), z.clone()), seq((**q).clone(), z.clone())))),
            Term::Seq(p, q) => return Some(("RA5", seq((**p).clone(), seq((**q).clone(), z.clone())))),
            Term::Delta if self.has(Table::Aptc) => return Some(("RA7", Term::Delta)),
            _ => {}
        }
        if self.has(Table::TauLaws) && visible_atom(x).is_some() {
            if *z == Term::Tau {
                return Some(("B1", x.clone()));
            }
            if let Some(body) = b2_match(z) {
                return Some(("B2", seq(x.clone(), body)));
            }
        }
        None
    }

    fn loc_rules(&self, u: &LocWord, x: &Term) -> Option<(&'static str, Term)> {
        let at = |p: &Term| Term::loc(u.clone(), p.clone());
        if u.is_empty() {
            return Some(("RL1", x.clone()));
        }
        let aptc = self.has(Table::Aptc);
        match x {
            Term::Loc(v, inner) => Some(("RL4", Term::loc(u.concat(v), (**inner).clone()))),
            Term::Seq(p, q) => Some(("RL2", seq(at(p), at(q)))),
            Term::Alt(p, q) => Some(("RL3", alt(at(p), at(q)))),
            Term::Merge(p, q) if aptc => Some(("RL5", Term::merge(at(p), at(q)))),
            Term::Par(p, q) if aptc => Some(("RL6", Term::par(at(p), at(q)))),
            Term::LeftMerge(p, q) if aptc => Some(("RL6a", Term::left_merge(at(p), at(q)))),
            Term::Comm(p, q) if aptc => Some(("RL7", Term::comm(at(p), at(q)))),
            Term::Theta(p) if aptc => Some(("RL8", Term::theta(at(p)))),
            Term::Unless(p, q) if aptc => Some(("RL9", Term::unless(at(p), at(q)))),
            Term::Delta if aptc => Some(("RL10", Term::Delta)),
            Term::Encap(h, p) if self.has(Table::Encap) => Some(("RL11", Term::Encap(h.clone(), Box::new(at(p))))),
            Term::Proj(n, p) if self.has(Table::Proj) => Some(("RL12", Term::Proj(*n, Box::new(at(p))))),
            Term::Tau if self.has(Table::TauLaws) => Some(("L13", Term::Tau)),
            Term::Hide(i, p) if self.has(Table::Hide) => Some(("L14", Term::Hide(i.clone(), Box::new(at(p))))),
            _ => None,
        }
    }

    fn left_merge_rules(&self, x: &Term, y: &Term) -> Option<(&'static str, Term)> {
        let lm = |p: &Term, q: &Term| Term::left_merge(p.clone(), q.clone());
        match x {
            Term::Alt(p, q) => return Some(("RP8", alt(lm(p, y), lm(q, y)))),
            Term::Delta => return Some(("RP9", Term::Delta)),
            _ => {}
        }
        if self.has(Table::TauLaws) && *y == Term::Tau {
            return Some(("B3", x.clone()));
        }
        let ordered = |p: &Term, q: &Term| match (visible_atom(p), visible_atom(q)) {
            (Some((_, a)), Some((_, b))) => self.leq(&a, &b),
            _ => false,
        };
        match (x, y) {
            (e1, Term::Seq(e2, rest)) if ordered(e1, e2) => Some(("RP5", seq(lm(e1, e2), (**rest).clone()))),
            (Term::Seq(e1, rest), e2) if ordered(e1, e2) => Some(("RP6", seq(lm(e1, e2), (**rest).clone()))),
            (Term::Seq(e1, r1), Term::Seq(e2, r2)) if ordered(e1, e2) => {
                Some(("RP7", seq(lm(e1, e2), Term::merge((**r1).clone(), (**r2).clone()))))
            }
            _ => None,
        }
    }

    fn gamma(&self, p: &Term, q: &Term) -> Option<Term> {
        let (u, a) = atom(p)?;
        let (v, b) = atom(q)?;
        let label = self.alph.gamma(&a, &b);
        let at = if label == ActionId::Tau { LocWord::epsilon() } else { u.common_prefix(&v) };
        Some(make_atom(&at, label))
    }

    fn comm_rules(&self, x: &Term, y: &Term) -> Option<(&'static str, Term)> {
        let cm = |p: &Term, q: &Term| Term::comm(p.clone(), q.clone());
        if *x == Term::Delta {
            return Some(("RC7", Term::Delta));
        }
        if *y == Term::Delta {
            return Some(("RC8", Term::Delta));
        }
        if let Term::Alt(p, q) = x {
            return Some(("RC5", alt(cm(p, y), cm(q, y))));
        }
        if let Term::Alt(p, q) = y {
            return Some(("RC6", alt(cm(x, p), cm(x, q))));
        }
        if let Some(g) = self.gamma(x, y) {
            return Some(("RC1", g));
        }
        match (x, y) {
            (Term::Seq(e1, r1), Term::Seq(e2, r2)) => {
                Some(("RC4", seq(self.gamma(e1, e2)?, Term::merge((**r1).clone(), (**r2).clone()))))
            }
            (e1, Term::Seq(e2, rest)) => Some(("RC2", seq(self.gamma(e1, e2)?, (**rest).clone()))),
            (Term::Seq(e1, rest), e2) => Some(("RC3", seq(self.gamma(e1, e2)?, (**rest).clone()))),
            _ => None,
        }
    }

    fn theta_rules(&self, x: &Term) -> Option<(&'static str, Term)> {
        let th = |p: &Term| Term::theta(p.clone());
        let un = |p: Term, q: &Term| Term::unless(p, q.clone());
        if atom(x).is_some() {
            return Some(("RCE1", x.clone()));
        }
        match x {
            Term::Delta => Some(("RCE2", Term::Delta)),
            Term::Alt(p, q) => Some(("RCE3", alt(un(th(p), q), un(th(q), p)))),
            Term::Seq(p, q) => Some(("RCE4", seq(th(p), th(q)))),
            Term::Par(p, q) => Some((
                "RCE5",
                alt(Term::par(un(th(p), q), (**q).clone()), Term::par(un(th(q), p), (**p).clone())),
            )),
            Term::LeftMerge(p, q) => Some((
                "RCE5a",
                alt(Term::left_merge(un(th(p), q), (**q).clone()), Term::left_merge(un(th(q), p), (**p).clone())),
            )),
            Term::Comm(p, q) => Some((
                "RCE6",
                alt(Term::comm(un(th(p), q), (**q).clone()), Term::comm(un(th(q), p), (**p).clone())),
            )),
            _ => None,
        }
    }

    fn unless_rules(&self, x: &Term, z: &Term) -> Option<(&'static str, Term)> {
        let un = |p: &Term, q: &Term| Term::unless(p.clone(), q.clone());
        if let Some((u, label)) = atom(x) {
            if *z == Term::Delta {
                return Some(("RU4", x.clone()));
            }
            if let Some((_, other)) = atom(z) {
                let atoms: BTreeSet<Action> = other.as_visible().cloned().into_iter().collect();
                let out = unless_label(self.alph, &label, &atoms);
                let rule = match (&label, &other, out == label) {
                    (ActionId::Visible(a), ActionId::Visible(b), false) if self.alph.conflicts(a, b) => "RU1",
                    (_, _, false) => "RU3",
                    (ActionId::Visible(a), ActionId::Visible(b), true)
                        if self.alph.actions().iter().any(|m| self.alph.conflicts(a, m) && self.alph.causes(m, b)) =>
                    {
                        "RU2"
                    }
                    _ => "RU0",
                };
                return Some((rule, make_atom(&u, out)));
            }
        }
        if *x == Term::Delta && (atom(z).is_some() || *z == Term::Delta) {
            return Some(("RU5", Term::Delta));
        }
        match x {
            Term::Alt(p, q) => return Some(("RU6", alt(un(p, z), un(q, z)))),
            Term::Seq(p, q) => return Some(("RU7", seq(un(p, z), un(q, z)))),
            Term::LeftMerge(p, q) => return Some(("RU8", Term::left_merge(un(p, z), un(q, z)))),
            Term::Comm(p, q) => return Some(("RU9", Term::comm(un(p, z), un(q, z)))),
            _ => {}
        }
        match z {
            Term::Alt(p, q) => Some(("RU10", un(&un(x, p), q))),
            Term::Seq(p, q) => Some(("RU11", un(&un(x, p), q))),
            Term::LeftMerge(p, q) => Some(("RU12", un(&un(x, p), q))),
            Term::Comm(p, q) => Some(("RU13", un(&un(x, p), q))),
            _ => None,
        }
    }

    fn proj_rules(&self, n: u32, x: &Term) -> Option<(&'static str, Term)> {
        let pr = |k: u32, p: &Term| Term::Proj(k, Box::new(p.clone()));
        if n == 0 {
            return Some(("PR5", Term::Delta));
        }
        if is_step(x) {
            return Some(("PR3", x.clone()));
        }
        match x {
            Term::Delta => Some(("PR6", Term::Delta)),
            Term::Alt(p, q) => Some(("PR1", alt(pr(n, p), pr(n, q)))),
            Term::LeftMerge(p, q) => Some(("PR2", Term::left_merge(pr(n, p), pr(n, q)))),
            Term::Seq(p, q) if is_step(p) => Some(("PR4", seq((**p).clone(), pr(n - 1, q)))),
            _ => None,
        }
    }
}

// `tau ; (x + y) + x`, read modulo AC: a summand `tau ; T` and remaining
// summands X with X ⊆ summands(T) and T \ X nonempty. Returns `x + y`.
fn b2_match(z: &Term) -> Option<Term> {
    let mut parts = Vec::new();
    flatten_sum(z, &mut parts);
    if parts.len() < 2 {
        return None;
    }
    for (i, p) in parts.iter().enumerate() {
        let Term::Seq(head, body) = p else { continue };
        if **head != Term::Tau {
            continue;
        }
        let mut inner = Vec::new();
        flatten_sum(body, &mut inner);
        let rest: Vec<&Term> = parts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t).collect();
        if rest.iter().all(|r| inner.contains(r)) && inner.iter().any(|t| !rest.contains(&t)) {
            return Some((**body).clone());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;
    use crate::term::is_basic;

    fn env() -> Env {
        let mut alph = Alphabet::parse("comm: a * b = c\nconflict: a # b\ncausal: b < e\n").unwrap();
        alph.add_encap_set("H", [Action::new("a")].into_iter().collect());
        Env::new(alph)
    }

    fn nf(src: &str, system: System) -> String {
        let t = parse_term(src).unwrap();
        let (out, trace) = normalize(&env(), &t, system, default_fuel(&t)).unwrap();
        assert_eq!(trace.replay(&t).unwrap(), out, "replay of {src}");
        print_term(&out)
    }

    #[test]
    fn batc_examples() {
        assert_eq!(nf("(a + b) ; c", System::Batc), "a ; c + b ; c");
        assert_eq!(nf("eps :: a", System::Batc), "a");
        assert_eq!(nf("l1 :: (l2 :: a)", System::Batc), "l1.l2 :: a");
        assert_eq!(nf("(a ; b) ; c", System::Batc), "a ; (b ; c)");
        assert_eq!(nf("l1 :: (a ; b + a ; b)", System::Batc), "l1 :: a ; l1 :: b");
    }

    #[test]
    fn aptc_examples() {
        assert_eq!(nf("a || b", System::Aptc), "c + a << b + b << a");
        assert_eq!(nf("theta(a)", System::Aptc), "a");
        assert_eq!(nf("unless(a, b)", System::Aptc), "tau");
        assert_eq!(nf("unless(a, d)", System::Aptc), "a");
        assert_eq!(nf("l1 :: a | l2 :: b", System::Aptc), "c");
        assert_eq!(nf("l1 :: (a ; e) | l1 :: b", System::Aptc), "l1 :: c ; l1 :: e");
        assert_eq!(nf("a | e", System::Aptc), "d");
    }

    #[test]
    fn other_tables() {
        assert_eq!(nf("encap({a}, a + b)", System::Encap), "b");
        assert_eq!(nf("pi(1, a ; b)", System::Proj), "a ; d");
        assert_eq!(nf("pi(2, a ; b)", System::Proj), "a ; b");
        assert_eq!(nf("hide({a}, a ; b)", System::Hide), "tau ; b");
        assert_eq!(nf("a ; tau", System::TauLaws), "a");
        assert_eq!(nf("b ; (tau ; (a + c) + a)", System::TauLaws), "b ; (a + c)");
    }

    #[test]
    fn equality_modulo_ac() {
        let p = |s: &str| parse_term(s).unwrap();
        assert!(ac_equal(&p("a + b"), &p("b + a")));
        assert!(ac_equal(&p("a + (b + c)"), &p("(a + b) + c")));
        assert!(!ac_equal(&p("a ; b"), &p("b ; a")));
        let e = env();
        assert!(axiom_equal(&e, &p("a + a"), &p("a"), System::Batc).unwrap());
        assert!(axiom_equal(&e, &p("l1 :: (a + b)"), &p("l1 :: a + l1 :: b"), System::Batc).unwrap());
        assert!(!axiom_equal(&e, &p("a"), &p("b"), System::Batc).unwrap());
    }

    #[test]
    fn normal_forms_are_basic() {
        for src in ["(a + b) ; (c + l1 :: (a ; b))", "a // (b ; c)", "(a ; b) || (c + e)", "theta(a // b)"] {
            let t = parse_term(src).unwrap();
            let system = if src.contains("//") || src.contains("||") || src.contains("theta") { System::Aptc } else { System::Batc };
            let (out, _) = normalize(&env(), &t, system, default_fuel(&t)).unwrap();
            assert!(is_basic(&out, system), "{src} -> {}", print_term(&out));
        }
    }

    #[test]
    fn trace_json_lines() {
        let t = parse_term("(a + b) ; c").unwrap();
        let (_, trace) = normalize(&env(), &t, System::Batc, 100).unwrap();
        let first = trace.to_json_lines().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(v["rule"], "RA4");
        assert_eq!(v["position"], json!([]));
    }

    #[test]
    fn fuel_is_enforced() {
        let t = parse_term("l1 :: ((a + b) ; c)").unwrap();
        assert!(matches!(normalize(&env(), &t, System::Batc, 1), Err(RewriteError::FuelExhausted(1))));
    }
}
