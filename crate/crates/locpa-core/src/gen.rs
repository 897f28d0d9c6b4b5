//! Seeded random and exhaustive generators for closed terms and linear
//! specifications.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{Action, ActionId};
use crate::term::{LinearSpec, LocWord, PrefixItem, RelabelRef, SetRef, Summand, Term};

/// Term constructors the random generator can choose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Op {
    Atom,
    Tau,
    Delta,
    Nil,
    Loc,
    Seq,
    Alt,
    Par,
    Merge,
    Comm,
    LeftMerge,
    Theta,
    Unless,
    Encap,
    Hide,
    Proj,
    Prefix,
    Restrict,
    Relabel,
}

impl Op {
    fn arity(self) -> usize {
        match self {
            Op::Atom | Op::Tau | Op::Delta | Op::Nil => 0,
            Op::Loc | Op::Theta | Op::Encap | Op::Hide | Op::Proj | Op::Prefix | Op::Restrict | Op::Relabel => 1,
            _ => 2,
        }
    }
}

/// Weighted grammar for the random generator.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub actions: Vec<Action>,
    pub locations: Vec<String>,
    /// Longest location word placed by a single `::`.
    pub max_word: usize,
    pub ops: Vec<(Op, u32)>,
    /// Named sets and relabellings used by `encap`, `hide` and `relabel`.
    pub encap_set: String,
    pub hide_set: String,
    pub relabelling: String,
}

impl GenConfig {
    fn with_ops(ops: &[(Op, u32)]) -> Self {
        GenConfig {
            actions: ["a", "b", "c", "e"].iter().map(|n| Action::new(n)).collect(),
            locations: vec!["l1".into(), "l2".into()],
            max_word: 2,
            ops: ops.to_vec(),
            encap_set: "H".into(),
            hide_set: "I".into(),
            relabelling: "r".into(),
        }
    }

    /// Atoms, `::`, `;` and `+`.
    pub fn batc() -> Self {
        Self::with_ops(&[(Op::Atom, 6), (Op::Loc, 2), (Op::Seq, 3), (Op::Alt, 3)])
    }

    /// Adds deadlock and the parallel operators.
    pub fn aptc() -> Self {
        let mut c = Self::batc();
        c.ops.extend([(Op::Delta, 1), (Op::Par, 2), (Op::Merge, 1), (Op::Comm, 1), (Op::LeftMerge, 1)]);
        c
    }

    pub fn encap() -> Self {
        let mut c = Self::aptc();
        c.ops.push((Op::Encap, 2));
        c
    }

    pub fn proj() -> Self {
        let mut c = Self::aptc();
        c.ops.push((Op::Proj, 2));
        c
    }

    pub fn tau() -> Self {
        let mut c = Self::aptc();
        c.ops.push((Op::Tau, 2));
        c
    }

    pub fn hide() -> Self {
        let mut c = Self::tau();
        c.ops.push((Op::Hide, 2));
        c
    }

    /// The CTC dialect: nil, prefixes, `::`, `+`, `//`, restriction and
    /// relabelling.
    pub fn ctc() -> Self {
        Self::with_ops(&[
            (Op::Nil, 3),
            (Op::Prefix, 6),
            (Op::Loc, 2),
            (Op::Alt, 3),
            (Op::Par, 2),
            (Op::Restrict, 1),
            (Op::Relabel, 1),
        ])
    }

    pub fn with_actions(mut self, names: &[&str]) -> Self {
        self.actions = names.iter().map(|n| Action::new(n)).collect();
        self
    }

    pub fn without(mut self, op: Op) -> Self {
        self.ops.retain(|(o, _)| *o != op);
        self
    }

    pub fn with(mut self, op: Op, weight: u32) -> Self {
        self.ops.retain(|(o, _)| *o != op);
        self.ops.push((op, weight));
        self
    }
}

/// A reproducible random source of terms.
pub struct TermGen {
    rng: ChaCha8Rng,
    pub config: GenConfig,
}

impl TermGen {
    pub fn new(seed: u64, config: GenConfig) -> Self {
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), config }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn action(&mut self) -> Action {
        self.config.actions.choose(&mut self.rng).expect("nonempty action list").clone()
    }

    /// A word of length at most `max_word`, possibly empty.
    pub fn word(&mut self) -> LocWord {
        let len = self.rng.gen_range(0..=self.config.max_word);
        self.nonempty_word_of(len)
    }

    /// A word of length between 1 and `max_word`.
    pub fn nonempty_word(&mut self) -> LocWord {
        let len = self.rng.gen_range(1..=self.config.max_word.max(1));
        self.nonempty_word_of(len)
    }

    fn nonempty_word_of(&mut self, len: usize) -> LocWord {
        let names: Vec<String> =
            (0..len).map(|_| self.config.locations.choose(&mut self.rng).expect("nonempty locations").clone()).collect();
        LocWord::from_names(names.iter().map(String::as_str))
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn pick_leaf(&mut self) -> Op {
        let choices: Vec<(Op, u32)> = self.config.ops.iter().copied().filter(|(o, _)| o.arity() == 0).collect();
        choices.choose_weighted(&mut self.rng, |(_, w)| *w).map(|c| c.0).unwrap_or(Op::Atom)
    }

    fn pick_inner(&mut self, unary_only: bool) -> Option<Op> {
        let choices: Vec<(Op, u32)> = self
            .config
            .ops
            .iter()
            .copied()
            .filter(|(o, _)| if unary_only { o.arity() == 1 } else { o.arity() > 0 })
            .collect();
        choices.choose_weighted(&mut self.rng, |(_, w)| *w).ok().map(|c| c.0)
    }

    /// A closed term with exactly `size` nodes as counted by
    /// [`Term::size`], except where flattening of `::` merges nodes.
    pub fn term(&mut self, size: usize) -> Term {
        let size = size.max(1);
        if size == 1 {
            return self.leaf();
        }
        let unary_only = size == 2;
        let op = self.pick_inner(unary_only);
        let Some(op) = op else { return self.leaf() };
        match op.arity() {
            1 => {
                let body = self.term(size - 1);
                self.unary(op, body)
            }
            _ => {
                let left = self.rng.gen_range(1..=size - 2);
                let right = size - 1 - left;
                let x = self.term(left);
                let y = self.term(right);
                binary(op, x, y)
            }
        }
    }

    /// A term whose size is drawn uniformly from `1..=max`.
    pub fn term_up_to(&mut self, max: usize) -> Term {
        let n = self.rng.gen_range(1..=max.max(1));
        self.term(n)
    }

    fn leaf(&mut self) -> Term {
        match self.pick_leaf() {
            Op::Tau => Term::Tau,
            Op::Delta => Term::Delta,
            Op::Nil => Term::Nil,
            _ => Term::Act(self.action()),
        }
    }

    fn unary(&mut self, op: Op, body: Term) -> Term {
        match op {
            Op::Loc => {
                let u = self.nonempty_word();
                Term::loc(u, body)
            }
            Op::Theta => Term::theta(body),
            Op::Encap => Term::Encap(SetRef::Named(self.config.encap_set.clone()), Box::new(body)),
            Op::Hide => Term::Hide(SetRef::Named(self.config.hide_set.clone()), Box::new(body)),
            Op::Proj => Term::Proj(self.rng.gen_range(0..=3), Box::new(body)),
            Op::Prefix => {
                let n = if self.chance(0.2) { 2 } else { 1 };
                let mut items: Vec<PrefixItem> = Vec::new();
                while items.len() < n {
                    let id = if self.chance(0.1) { ActionId::Tau } else { ActionId::Visible(self.action()) };
                    items.push(PrefixItem::new(LocWord::epsilon(), id));
                }
                Term::prefix(items, body)
            }
            Op::Restrict => {
                let set: BTreeSet<Action> = (0..self.rng.gen_range(1..=2)).map(|_| self.action()).collect();
                Term::Restrict(set, Box::new(body))
            }
            Op::Relabel => Term::Relabel(RelabelRef::Named(self.config.relabelling.clone()), Box::new(body)),
            _ => body,
        }
    }

    /// A located atom `u::a` (with `u` possibly empty).
    pub fn located_atom(&mut self) -> Term {
        let a = self.action();
        let u = self.word();
        Term::loc(u, Term::Act(a))
    }

    /// A random linear specification named `name` with variables
    /// `X0..X{vars-1}`. Summands carry one or two located items over the
    /// configured actions, with `tau` when `silent` is positive.
    pub fn spec(&mut self, name: &str, vars: usize, max_summands: usize, silent: f64) -> LinearSpec {
        let names: Vec<String> = (0..vars.max(1)).map(|i| format!("X{i}")).collect();
        let equations = names
            .iter()
            .map(|v| {
                let k = self.rng.gen_range(1..=max_summands.max(1));
                let mut summands: Vec<Summand> = Vec::new();
                for _ in 0..k {
                    let n = if self.chance(0.2) { 2 } else { 1 };
                    let items: Vec<PrefixItem> = (0..n)
                        .map(|_| {
                            let id = if self.chance(silent) { ActionId::Tau } else { ActionId::Visible(self.action()) };
                            let at = if self.chance(0.3) { self.nonempty_word() } else { LocWord::epsilon() };
                            PrefixItem::new(at, id)
                        })
                        .collect();
                    let target = if self.chance(0.8) { Some(names.choose(&mut self.rng).unwrap().clone()) } else { None };
                    let s = Summand::new(items, target);
                    if !summands.contains(&s) {
                        summands.push(s);
                    }
                }
                (v.clone(), summands)
            })
            .collect();
        LinearSpec { name: name.to_string(), equations }
    }
}

pub fn binary(op: Op, x: Term, y: Term) -> Term {
    match op {
        Op::Seq => Term::seq(x, y),
        Op::Alt => Term::alt(x, y),
        Op::Par => Term::par(x, y),
        Op::Merge => Term::merge(x, y),
        Op::Comm => Term::comm(x, y),
        Op::LeftMerge => Term::left_merge(x, y),
        Op::Unless => Term::unless(x, y),
        _ => Term::alt(x, y),
    }
}

/// All distinct closed terms of size at most `max_size` built from the
/// given atoms with the given binary operators and `u::_` for each
/// nonempty word in `words` (the empty word adds nothing since `eps::x`
/// is stored as `x`). Terms are listed by size, then in term order.
pub fn enumerate_terms(max_size: usize, actions: &[&str], words: &[LocWord], binaries: &[Op]) -> Vec<Term> {
    let mut by_size: Vec<Vec<Term>> = vec![Vec::new(); max_size + 1];
    if max_size == 0 {
        return Vec::new();
    }
    let mut seen: BTreeSet<Term> = BTreeSet::new();
    for a in actions {
        let t = Term::act(a);
        if seen.insert(t.clone()) {
            by_size[1].push(t);
        }
    }
    for n in 2..=max_size {
        let mut fresh: Vec<Term> = Vec::new();
        for u in words.iter().filter(|w| !w.is_empty()) {
            for t in &by_size[n - 1] {
                fresh.push(Term::loc(u.clone(), t.clone()));
            }
        }
        for left in 1..n - 1 {
            let right = n - 1 - left;
            for &op in binaries {
                for x in &by_size[left] {
                    for y in &by_size[right] {
                        fresh.push(binary(op, x.clone(), y.clone()));
                    }
                }
            }
        }
        fresh.sort();
        for t in fresh {
            if seen.insert(t.clone()) {
                by_size[n].push(t);
            }
        }
    }
    by_size.into_iter().flatten().collect()
}

/// All linear specifications with variables `X0..X{vars-1}`, at most
/// `max_summands` summands per variable, each summand a single action from
/// `actions` optionally followed by a variable. Summand lists are sets.
pub fn enumerate_specs(name: &str, vars: usize, max_summands: usize, actions: &[&str]) -> Vec<LinearSpec> {
    let names: Vec<String> = (0..vars).map(|i| format!("X{i}")).collect();
    let mut atoms: Vec<Summand> = Vec::new();
    for a in actions {
        let item = PrefixItem::new(LocWord::epsilon(), ActionId::visible(a));
        atoms.push(Summand::new(vec![item.clone()], None));
        for v in &names {
            atoms.push(Summand::new(vec![item.clone()], Some(v.clone())));
        }
    }
    let mut choices: Vec<Vec<Summand>> = vec![Vec::new()];
    let mut frontier: Vec<(usize, Vec<Summand>)> = vec![(0, Vec::new())];
    for _ in 0..max_summands {
        let mut next = Vec::new();
        for (start, list) in &frontier {
            for (i, s) in atoms.iter().enumerate().skip(*start) {
                let mut l = list.clone();
                l.push(s.clone());
                choices.push(l.clone());
                next.push((i + 1, l));
            }
        }
        frontier = next;
    }
    let mut out = Vec::new();
    let mut index = vec![0usize; vars];
    loop {
        let equations = names.iter().zip(&index).map(|(v, &i)| (v.clone(), choices[i].clone())).collect();
        out.push(LinearSpec { name: name.to_string(), equations });
        let mut k = 0;
        loop {
            if k == vars {
                return out;
            }
            index[k] += 1;
            if index[k] < choices.len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}
