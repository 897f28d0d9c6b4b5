//! The expansion law for located compositions
//! `(P1[f1] // ... // Pn[fn]) \ L`: one summand per simultaneous move of
//! all components, plus one communication summand per pair of components.

use std::collections::BTreeSet;

use crate::alphabet::{Action, ActionId};
use crate::gen::TermGen;
use crate::sos::{successors, Mode, SosError, Step, Target};
use crate::term::{Env, LocWord, PrefixItem, RelabelRef, Term};

/// A parallel composition of located components under optional
/// relabellings and an optional restriction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Composition {
    pub components: Vec<Term>,
    pub relabellings: Vec<Option<RelabelRef>>,
    pub restriction: Option<BTreeSet<Action>>,
}

impl Composition {
    fn component(&self, i: usize, body: Term) -> Term {
        match &self.relabellings[i] {
            Some(f) => Term::Relabel(f.clone(), Box::new(body)),
            None => body,
        }
    }

    fn close(&self, parts: Vec<Term>) -> Term {
        let par = parts.into_iter().reduce(Term::par).unwrap_or(Term::Nil);
        match &self.restriction {
            Some(l) => Term::Restrict(l.clone(), Box::new(par)),
            None => par,
        }
    }

    /// The composition as a term.
    pub fn term(&self) -> Term {
        self.close((0..self.components.len()).map(|i| self.component(i, self.components[i].clone())).collect())
    }
}

fn residual(t: &Target<Term>) -> Term {
    match t {
        Target::Done => Term::Nil,
        Target::To(p) => p.clone(),
    }
}

/// The right-hand side of the expansion law for `c`.
pub fn expand(env: &Env, c: &Composition) -> Result<Term, SosError> {
    let n = c.components.len();
    let current: Vec<Term> = (0..n).map(|i| c.component(i, c.components[i].clone())).collect();
    let moves: Vec<Vec<(Step, Target<Term>)>> =
        current.iter().map(|p| successors(env, p, Mode::Static)).collect::<Result<_, _>>()?;
    let blocked: BTreeSet<Action> = match &c.restriction {
        Some(l) => {
            let mut b = l.clone();
            b.extend(env.alphabet.co_set(l));
            b
        }
        None => BTreeSet::new(),
    };
    let allowed = |a: &Action| !blocked.contains(a);
    let mut summands: Vec<Term> = Vec::new();

    // Every component moves.
    let mut choice = vec![0usize; n];
    if moves.iter().all(|m| !m.is_empty()) {
        loop {
            let picked: Vec<&(Step, Target<Term>)> = (0..n).map(|i| &moves[i][choice[i]]).collect();
            let visible_ok = picked.iter().all(|(s, _)| s.events().iter().all(|e| allowed(&e.action)));
            if visible_ok {
                let mut items = Vec::new();
                for (s, _) in &picked {
                    match s {
                        Step::Tau => items.push(PrefixItem::new(LocWord::epsilon(), ActionId::Tau)),
                        Step::Visible(evs) => items.extend(
                            evs.iter().map(|e| PrefixItem::new(e.at.clone(), ActionId::Visible(e.action.clone()))),
                        ),
                    }
                }
                let body = c.close(picked.iter().map(|(_, t)| residual(t)).collect());
                summands.push(Term::prefix(items, body));
            }
            let mut k = 0;
            while k < n {
                choice[k] += 1;
                if choice[k] < moves[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }

    // Two components communicate; the others stay put.
    for i in 0..n {
        for j in i + 1..n {
            for (si, ti) in &moves[i] {
                for (sj, tj) in &moves[j] {
                    let ([ei], [ej]) = (si.events(), sj.events()) else { continue };
                    let label = env.alphabet.gamma(&ActionId::Visible(ei.action.clone()), &ActionId::Visible(ej.action.clone()));
                    let item = match &label {
                        ActionId::Delta => continue,
                        ActionId::Tau => PrefixItem::new(LocWord::epsilon(), ActionId::Tau),
                        ActionId::Visible(a) if allowed(a) => PrefixItem::new(ei.at.common_prefix(&ej.at), label.clone()),
                        ActionId::Visible(_) => continue,
                    };
                    let mut parts = current.clone();
                    parts[i] = residual(ti);
                    parts[j] = residual(tj);
                    summands.push(Term::prefix(vec![item], c.close(parts)));
                }
            }
        }
    }
    Ok(if summands.is_empty() { Term::Nil } else { Term::sum(summands) })
}

/// A random composition of 1 to `max_components` components
/// `l_i :: (α1 . Q1 + ...)`, each able to move on its own.
pub fn random_composition(env: &Env, g: &mut TermGen, max_components: usize, body_size: usize) -> Composition {
    let n = 1 + g.below(max_components.max(1));
    let mut components = Vec::new();
    let mut relabellings = Vec::new();
    while components.len() < n {
        let k = 1 + g.below(2);
        let alts: Vec<Term> = (0..k)
            .map(|_| {
                let width = if g.chance(0.2) { 2 } else { 1 };
                let items: Vec<PrefixItem> = (0..width)
                    .map(|_| {
                        let id = if g.chance(0.1) { ActionId::Tau } else { ActionId::Visible(g.action()) };
                        PrefixItem::new(LocWord::epsilon(), id)
                    })
                    .collect();
                let body = g.term_up_to(body_size);
                Term::prefix(items, body)
            })
            .collect();
        let loc = LocWord::single(&format!("l{}", components.len() + 1));
        let f = if g.chance(0.3) { Some(RelabelRef::Named(g.config.relabelling.clone())) } else { None };
        let candidate = Term::loc(loc, Term::sum(alts));
        let wrapped = match &f {
            Some(f) => Term::Relabel(f.clone(), Box::new(candidate.clone())),
            None => candidate.clone(),
        };
        if successors(env, &wrapped, Mode::Static).is_ok_and(|m| !m.is_empty()) {
            components.push(candidate);
            relabellings.push(f);
        }
    }
    let restriction = if g.chance(0.3) { Some([g.action()].into_iter().collect()) } else { None };
    Composition { components, relabellings, restriction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::equiv::{check, Flavor, RelationKind, Strength};
    use crate::sos::Bounds;
    use crate::syntax::{parse_term, print_term};

    fn comp(parts: &[&str]) -> Composition {
        Composition {
            components: parts.iter().map(|p| parse_term(p).unwrap()).collect(),
            relabellings: vec![None; parts.len()],
            restriction: None,
        }
    }

    #[test]
    fn two_components() {
        let env = Env::new(Alphabet::parse("comm: a * b = tau\n").unwrap());
        let c = comp(&["l1 :: a . 0", "l2 :: b . 0"]);
        let e = expand(&env, &c).unwrap();
        assert_eq!(print_term(&e), "<l1 :: a, l2 :: b> . (l1 :: 0 // l2 :: 0) + tau . (l1 :: 0 // l2 :: 0)");
        let kind = RelationKind::new(Flavor::Step, Mode::Static, Strength::Strong);
        assert!(check(&env, &c.term(), &e, kind, Bounds::default()).unwrap().is_equivalent());
    }

    #[test]
    fn restriction_filters_moves() {
        let env = Env::default();
        let mut c = comp(&["l1 :: (a . 0 + c . 0)"]);
        c.restriction = Some([Action::new("a")].into_iter().collect());
        let e = expand(&env, &c).unwrap();
        assert_eq!(print_term(&e), "<l1 :: c> . restrict({a}, l1 :: 0)");
    }
}
