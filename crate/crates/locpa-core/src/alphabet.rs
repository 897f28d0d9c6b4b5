//! Action alphabets: names, the communication function, conflict and causal
//! relations, relabellings and the named action sets used by encapsulation
//! and abstraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A visible action name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(Arc<str>);

impl Action {
    pub fn new(name: &str) -> Self {
        Action(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        Action::new(s)
    }
}

/// An action identifier: a visible action, the silent step or deadlock.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionId {
    Visible(Action),
    Tau,
    Delta,
}

impl ActionId {
    pub fn visible(name: &str) -> Self {
        ActionId::Visible(Action::new(name))
    }

    pub fn as_visible(&self) -> Option<&Action> {
        match self {
            ActionId::Visible(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, ActionId::Tau)
    }

    fn parse(word: &str) -> ActionId {
        match word {
            "tau" => ActionId::Tau,
            "d" | "delta" => ActionId::Delta,
            other => ActionId::visible(other),
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionId::Visible(a) => write!(f, "{a}"),
            ActionId::Tau => f.write_str("tau"),
            ActionId::Delta => f.write_str("d"),
        }
    }
}

/// A finite relabelling; unlisted actions map to themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Relabelling {
    table: BTreeMap<ActionId, ActionId>,
}

impl Relabelling {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: ActionId, to: ActionId) {
        self.table.insert(from, to);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ActionId, &ActionId)> {
        self.table.iter()
    }

    pub fn apply(&self, id: &ActionId) -> ActionId {
        match id {
            ActionId::Tau => ActionId::Tau,
            ActionId::Delta => ActionId::Delta,
            other => self.table.get(other).cloned().unwrap_or_else(|| other.clone()),
        }
    }
}

/// Problems found by [`Alphabet::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("communication is not symmetric: {a} * {b} = {ab} but {b} * {a} = {ba}")]
    AsymmetricComm { a: Action, b: Action, ab: ActionId, ba: ActionId },
    #[error("conflict relation is reflexive on {0}")]
    ReflexiveConflict(Action),
    #[error("causal order has a cycle through {0}")]
    CyclicCausal(Action),
    #[error("relabelling {name} does not fix {moved}")]
    RelabelMovesSilent { name: String, moved: ActionId },
}

/// Parse errors for alphabet files.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct AlphabetError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// An action alphabet with its relations and named sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    actions: BTreeSet<Action>,
    comm: BTreeMap<(Action, Action), ActionId>,
    conflict: BTreeSet<(Action, Action)>,
    causal: BTreeSet<(Action, Action)>,
    relabellings: BTreeMap<String, Relabelling>,
    encap_sets: BTreeMap<String, BTreeSet<Action>>,
    hide_sets: BTreeMap<String, BTreeSet<Action>>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_action(&mut self, a: Action) {
        self.actions.insert(a);
    }

    pub fn actions(&self) -> &BTreeSet<Action> {
        &self.actions
    }

    /// Declares `a * b = c`.
    pub fn add_comm(&mut self, a: Action, b: Action, c: ActionId) {
        self.actions.insert(a.clone());
        self.actions.insert(b.clone());
        if let ActionId::Visible(v) = &c {
            self.actions.insert(v.clone());
        }
        self.comm.insert((a, b), c);
    }

    pub fn add_conflict(&mut self, a: Action, b: Action) {
        self.actions.insert(a.clone());
        self.actions.insert(b.clone());
        self.conflict.insert((a, b));
    }

    pub fn add_causal(&mut self, a: Action, b: Action) {
        self.actions.insert(a.clone());
        self.actions.insert(b.clone());
        self.causal.insert((a, b));
    }

    pub fn add_relabelling(&mut self, name: &str, from: ActionId, to: ActionId) {
        for id in [&from, &to] {
            if let ActionId::Visible(a) = id {
                self.actions.insert(a.clone());
            }
        }
        self.relabellings.entry(name.to_string()).or_default().insert(from, to);
    }

    pub fn add_encap_set(&mut self, name: &str, set: BTreeSet<Action>) {
        self.actions.extend(set.iter().cloned());
        self.encap_sets.insert(name.to_string(), set);
    }

    pub fn add_hide_set(&mut self, name: &str, set: BTreeSet<Action>) {
        self.actions.extend(set.iter().cloned());
        self.hide_sets.insert(name.to_string(), set);
    }

    /// The communication function. Undefined pairs, and pairs involving
    /// silent or deadlock actions, yield [`ActionId::Delta`].
    pub fn gamma(&self, a: &ActionId, b: &ActionId) -> ActionId {
        match (a, b) {
            (ActionId::Visible(x), ActionId::Visible(y)) => self
                .comm
                .get(&(x.clone(), y.clone()))
                .or_else(|| self.comm.get(&(y.clone(), x.clone())))
                .cloned()
                .unwrap_or(ActionId::Delta),
            _ => ActionId::Delta,
        }
    }

    /// True when `a` and `b` can communicate.
    pub fn communicates(&self, a: &Action, b: &Action) -> bool {
        self.gamma(&ActionId::Visible(a.clone()), &ActionId::Visible(b.clone())) != ActionId::Delta
    }

    /// Actions that can communicate with some member of `set`.
    pub fn co_set(&self, set: &BTreeSet<Action>) -> BTreeSet<Action> {
        let mut out = BTreeSet::new();
        for (a, b) in self.comm.keys() {
            if self.comm[&(a.clone(), b.clone())] == ActionId::Delta {
                continue;
            }
            if set.contains(a) {
                out.insert(b.clone());
            }
            if set.contains(b) {
                out.insert(a.clone());
            }
        }
        out
    }

    /// Symmetric conflict.
    pub fn conflicts(&self, a: &Action, b: &Action) -> bool {
        self.conflict.contains(&(a.clone(), b.clone())) || self.conflict.contains(&(b.clone(), a.clone()))
    }

    /// Transitive causal order (strict when the declaration is acyclic).
    pub fn causes(&self, a: &Action, b: &Action) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![a.clone()];
        while let Some(x) = stack.pop() {
            for (p, q) in &self.causal {
                if *p == x {
                    if q == b {
                        return true;
                    }
                    if seen.insert(q.clone()) {
                        stack.push(q.clone());
                    }
                }
            }
        }
        false
    }

    pub fn conflict_pairs(&self) -> impl Iterator<Item = &(Action, Action)> {
        self.conflict.iter()
    }

    pub fn causal_pairs(&self) -> impl Iterator<Item = &(Action, Action)> {
        self.causal.iter()
    }

    pub fn comm_pairs(&self) -> impl Iterator<Item = (&(Action, Action), &ActionId)> {
        self.comm.iter()
    }

    pub fn relabelling(&self, name: &str) -> Option<&Relabelling> {
        self.relabellings.get(name)
    }

    pub fn relabellings(&self) -> impl Iterator<Item = (&String, &Relabelling)> {
        self.relabellings.iter()
    }

    pub fn encap_set(&self, name: &str) -> Option<&BTreeSet<Action>> {
        self.encap_sets.get(name)
    }

    pub fn encap_sets(&self) -> impl Iterator<Item = (&String, &BTreeSet<Action>)> {
        self.encap_sets.iter()
    }

    pub fn hide_set(&self, name: &str) -> Option<&BTreeSet<Action>> {
        self.hide_sets.get(name)
    }

    pub fn hide_sets(&self) -> impl Iterator<Item = (&String, &BTreeSet<Action>)> {
        self.hide_sets.iter()
    }

    /// Checks the well-formedness conditions on the declared relations.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        for ((a, b), ab) in &self.comm {
            if a < b {
                if let Some(ba) = self.comm.get(&(b.clone(), a.clone())) {
                    if ba != ab {
                        issues.push(ValidationIssue::AsymmetricComm {
                            a: a.clone(),
                            b: b.clone(),
                            ab: ab.clone(),
                            ba: ba.clone(),
                        });
                    }
                }
            }
        }
        for (a, b) in &self.conflict {
            if a == b {
                issues.push(ValidationIssue::ReflexiveConflict(a.clone()));
            }
        }
        let mut on_cycle = BTreeSet::new();
        for (a, _) in &self.causal {
            if self.causes(a, a) {
                on_cycle.insert(a.clone());
            }
        }
        if let Some(a) = on_cycle.into_iter().next() {
            issues.push(ValidationIssue::CyclicCausal(a));
        }
        for (name, f) in &self.relabellings {
            for (from, to) in f.entries() {
                if matches!(from, ActionId::Tau | ActionId::Delta) && from != to {
                    issues.push(ValidationIssue::RelabelMovesSilent { name: name.clone(), moved: from.clone() });
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// Parses the line-oriented alphabet format.
    pub fn parse(src: &str) -> Result<Alphabet, AlphabetError> {
        let mut alph = Alphabet::new();
        for (idx, raw) in src.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                // `conflict: a # b` uses `#` as an operator, so only strip
                // comments that start a line or follow whitespace at the end.
                Some(pos) if !raw.trim_start().starts_with("conflict") => &raw[..pos],
                _ => raw,
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let col = line.len() - line.trim_start().len() + 1;
            let err = |message: String| AlphabetError { line: line_no, col, message };
            let (head, body) = trimmed
                .split_once(':')
                .ok_or_else(|| err(format!("expected `keyword:` in `{trimmed}`")))?;
            let mut head_words = head.split_whitespace();
            let keyword = head_words.next().unwrap_or("");
            let name = head_words.next();
            let body = body.trim();
            match keyword {
                "actions" => {
                    for word in split_list(body) {
                        alph.add_action(parse_action(word).map_err(err)?);
                    }
                }
                "comm" => {
                    for decl in split_list(body) {
                        let (lhs, rhs) =
                            decl.split_once('=').ok_or_else(|| err(format!("expected `a * b = c`, found `{decl}`")))?;
                        let (a, b) =
                            lhs.split_once('*').ok_or_else(|| err(format!("expected `a * b = c`, found `{decl}`")))?;
                        let a = parse_action(a.trim()).map_err(err)?;
                        let b = parse_action(b.trim()).map_err(err)?;
                        alph.add_comm(a, b, ActionId::parse(rhs.trim()));
                    }
                }
                "conflict" => {
                    // The first `#` of a declaration is the operator; a
                    // second one starts a comment.
                    for decl in body.split(',') {
                        let Some((a, rest)) = decl.split_once('#') else {
                            if decl.trim().is_empty() {
                                continue;
                            }
                            return Err(err(format!("expected `a # b`, found `{}`", decl.trim())));
                        };
                        let (b, comment) = match rest.split_once('#') {
                            Some((b, _)) => (b, true),
                            None => (rest, false),
                        };
                        alph.add_conflict(parse_action(a.trim()).map_err(err)?, parse_action(b.trim()).map_err(err)?);
                        if comment {
                            break;
                        }
                    }
                }
                "causal" => {
                    for decl in split_list(body) {
                        let (a, b) =
                            decl.split_once('<').ok_or_else(|| err(format!("expected `a < b`, found `{decl}`")))?;
                        alph.add_causal(parse_action(a.trim()).map_err(err)?, parse_action(b.trim()).map_err(err)?);
                    }
                }
                "relabel" => {
                    let name = name.ok_or_else(|| err("relabelling needs a name".to_string()))?;
                    alph.relabellings.entry(name.to_string()).or_default();
                    for decl in split_list(body) {
                        let (a, b) =
                            decl.split_once("->").ok_or_else(|| err(format!("expected `a -> b`, found `{decl}`")))?;
                        alph.add_relabelling(name, ActionId::parse(a.trim()), ActionId::parse(b.trim()));
                    }
                }
                "encap" | "hide" => {
                    let name = name.ok_or_else(|| err(format!("{keyword} set needs a name")))?;
                    let inner = body
                        .strip_prefix('{')
                        .and_then(|s| s.strip_suffix('}'))
                        .ok_or_else(|| err(format!("expected `{{a, b}}`, found `{body}`")))?;
                    let mut set = BTreeSet::new();
                    for word in split_list(inner) {
                        set.insert(parse_action(word).map_err(err)?);
                    }
                    if keyword == "encap" {
                        alph.add_encap_set(name, set);
                    } else {
                        alph.add_hide_set(name, set);
                    }
                }
                other => return Err(err(format!("unknown declaration `{other}`"))),
            }
        }
        Ok(alph)
    }

    /// Renders the alphabet in the file format accepted by [`Alphabet::parse`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        let names: Vec<_> = self.actions.iter().map(|a| a.to_string()).collect();
        out.push_str(&format!("actions: {}\n", names.join(", ")));
        for ((a, b), c) in &self.comm {
            out.push_str(&format!("comm: {a} * {b} = {c}\n"));
        }
        for (a, b) in &self.conflict {
            out.push_str(&format!("conflict: {a} # {b}\n"));
        }
        for (a, b) in &self.causal {
            out.push_str(&format!("causal: {a} < {b}\n"));
        }
        for (name, f) in &self.relabellings {
            for (a, b) in f.entries() {
                out.push_str(&format!("relabel {name}: {a} -> {b}\n"));
            }
        }
        for (name, set) in &self.encap_sets {
            out.push_str(&format!("encap {name}: {{{}}}\n", join_actions(set)));
        }
        for (name, set) in &self.hide_sets {
            out.push_str(&format!("hide {name}: {{{}}}\n", join_actions(set)));
        }
        out
    }

    /// The alphabet used by the law suites: actions a..h with
    /// `f * g = h`, `a # b`, `b < c`, `H = {a, c}`, `I = {b, c}` and the
    /// relabelling `r: a -> b, e -> a`.
    pub fn law_suite() -> Alphabet {
        let src = "\
actions: a, b, c, e, f, g, h
comm: f * g = h
conflict: a # b
causal: b < c
relabel r: a -> b, e -> a
encap H: {a, c}
hide I: {b, c}
";
        Alphabet::parse(src).expect("built-in alphabet parses")
    }
}

fn join_actions(set: &BTreeSet<Action>) -> String {
    set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

fn split_list(body: &str) -> impl Iterator<Item = &str> {
    body.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_action(word: &str) -> Result<Action, String> {
    let valid = word.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !valid {
        return Err(format!("invalid action name `{word}`"));
    }
    if matches!(word, "tau" | "d" | "eps") {
        return Err(format!("`{word}` is reserved"));
    }
    Ok(Action::new(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Action {
        Action::new(s)
    }

    #[test]
    fn gamma_is_symmetric_and_partial() {
        let alph = Alphabet::parse("comm: a * b = c\n").unwrap();
        assert_eq!(alph.gamma(&ActionId::visible("a"), &ActionId::visible("b")), ActionId::visible("c"));
        assert_eq!(alph.gamma(&ActionId::visible("b"), &ActionId::visible("a")), ActionId::visible("c"));
        assert_eq!(alph.gamma(&ActionId::visible("a"), &ActionId::visible("a")), ActionId::Delta);
        assert_eq!(alph.gamma(&ActionId::Tau, &ActionId::visible("b")), ActionId::Delta);
    }

    #[test]
    fn parse_full_file() {
        let src = "\
# example
actions: a, b, c
comm: a * b = c
conflict: a # b   # trailing comment
causal: a < c
relabel f: a -> b
encap H: {a, b}
hide I: {c}
";
        let alph = Alphabet::parse(src).unwrap();
        assert!(alph.conflicts(&act("b"), &act("a")));
        assert!(alph.causes(&act("a"), &act("c")));
        assert!(!alph.causes(&act("c"), &act("a")));
        assert_eq!(alph.relabelling("f").unwrap().apply(&ActionId::visible("a")), ActionId::visible("b"));
        assert_eq!(alph.relabelling("f").unwrap().apply(&ActionId::Tau), ActionId::Tau);
        assert_eq!(alph.encap_set("H").unwrap().len(), 2);
        assert_eq!(alph.hide_set("I").unwrap().len(), 1);
        assert!(alph.validate().is_ok());
        assert_eq!(Alphabet::parse(&alph.render()).unwrap(), alph);
    }

    #[test]
    fn validate_reports_reflexive_conflict() {
        let alph = Alphabet::parse("conflict: a # a\n").unwrap();
        assert_eq!(alph.validate().unwrap_err(), vec![ValidationIssue::ReflexiveConflict(act("a"))]);
    }

    #[test]
    fn validate_reports_cycles_and_asymmetry() {
        let alph = Alphabet::parse("causal: a < b\ncausal: b < a\n").unwrap();
        assert!(matches!(alph.validate().unwrap_err()[0], ValidationIssue::CyclicCausal(_)));
        let alph = Alphabet::parse("comm: a * b = c\ncomm: b * a = e\n").unwrap();
        assert!(matches!(alph.validate().unwrap_err()[0], ValidationIssue::AsymmetricComm { .. }));
        let alph = Alphabet::parse("relabel f: tau -> a\n").unwrap();
        assert!(matches!(alph.validate().unwrap_err()[0], ValidationIssue::RelabelMovesSilent { .. }));
    }

    #[test]
    fn co_set_collects_partners() {
        let alph = Alphabet::parse("comm: a * b = tau\ncomm: c * e = f\n").unwrap();
        let l: BTreeSet<_> = [act("a"), act("e")].into_iter().collect();
        let co: BTreeSet<_> = [act("b"), act("c")].into_iter().collect();
        assert_eq!(alph.co_set(&l), co);
    }

    #[test]
    fn bad_lines_carry_positions() {
        let err = Alphabet::parse("actions: a\n  bogus: x\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
        assert!(Alphabet::parse("actions: Tau\n").is_err());
    }

    #[test]
    fn law_suite_alphabet_is_valid() {
        let alph = Alphabet::law_suite();
        assert!(alph.validate().is_ok());
        assert!(alph.communicates(&act("g"), &act("f")));
    }
}
