//! Location-sensitive bisimulation checkers: {static, dynamic} localities,
//! {pomset, step, hp, hhp} flavors and {strong, weak, branching, rooted
//! branching} strengths, decided as a greatest fixpoint over game
//! positions that carry the location association built so far.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::alphabet::Action;
use crate::pes::{term_to_pes, Config, Pes, PesError};
use crate::sos::{build_lts, Bounds, Lts, Mode, SosError, Step, Target};
use crate::term::{Env, LocWord, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Pomset,
    Step,
    Hp,
    Hhp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Strong,
    Weak,
    Branching,
    RootedBranching,
}

/// Which equivalence to decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RelationKind {
    pub flavor: Flavor,
    pub locality: Mode,
    pub strength: Strength,
}

impl RelationKind {
    pub fn new(flavor: Flavor, locality: Mode, strength: Strength) -> Self {
        RelationKind { flavor, locality, strength }
    }

    pub fn with_flavor(self, flavor: Flavor) -> Self {
        RelationKind { flavor, ..self }
    }

    pub fn with_strength(self, strength: Strength) -> Self {
        RelationKind { strength, ..self }
    }

    fn tracks_history(self) -> bool {
        matches!(self.flavor, Flavor::Hp | Flavor::Hhp)
    }
}

impl Default for RelationKind {
    fn default() -> Self {
        RelationKind::new(Flavor::Step, Mode::Static, Strength::Strong)
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Pomset => "pomset",
            Flavor::Step => "step",
            Flavor::Hp => "hp",
            Flavor::Hhp => "hhp",
        })
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strength::Strong => "strong",
            Strength::Weak => "weak",
            Strength::Branching => "br",
            Strength::RootedBranching => "rb",
        })
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let loc = match self.locality {
            Mode::Static => "sl",
            Mode::Dynamic => "dl",
        };
        write!(f, "{}-{}-{}", self.flavor, loc, self.strength)
    }
}

impl FromStr for RelationKind {
    type Err = EquivError;

    /// Accepts dash-separated tokens in any order, e.g. `step-sl-strong`,
    /// `rb-step-sl` or `hhp`; missing parts default to step, static, strong.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace("rooted-branching", "rb").replace("rooted_branching", "rb");
        let mut kind = RelationKind::default();
        for tok in norm.split('-').filter(|t| !t.is_empty()) {
            match tok {
                "pomset" => kind.flavor = Flavor::Pomset,
                "step" => kind.flavor = Flavor::Step,
                "hp" => kind.flavor = Flavor::Hp,
                "hhp" => kind.flavor = Flavor::Hhp,
                "sl" | "static" => kind.locality = Mode::Static,
                "dl" | "dynamic" => kind.locality = Mode::Dynamic,
                "strong" => kind.strength = Strength::Strong,
                "weak" => kind.strength = Strength::Weak,
                "br" | "branching" => kind.strength = Strength::Branching,
                "rb" => kind.strength = Strength::RootedBranching,
                other => return Err(EquivError::Kind(format!("unknown token `{other}` in `{s}`"))),
            }
        }
        Ok(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("bad relation kind: {0}")]
    Kind(String),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Pes(#[from] PesError),
}

/// A location association: pairs of words matched so far.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocAssoc(pub Vec<(LocWord, LocWord)>);

impl LocAssoc {
    pub fn is_consistent(&self) -> bool {
        cla_consistent(&self.0)
    }

    /// Adds pairs, keeping the set sorted; `None` if the result is inconsistent.
    pub fn extended(&self, pairs: impl IntoIterator<Item = (LocWord, LocWord)>) -> Option<LocAssoc> {
        let mut out = self.0.clone();
        for (u, v) in pairs {
            if out.iter().any(|(a, b)| *a == u && *b == v) {
                continue;
            }
            if out.iter().any(|(a, b)| dependent(a, &u) != dependent(b, &v)) {
                return None;
            }
            out.push((u, v));
        }
        out.sort();
        Some(LocAssoc(out))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn dependent(u: &LocWord, v: &LocWord) -> bool {
    !u.independent(v)
}

/// Independence is preserved in both directions by every two pairs.
pub fn cla_consistent(pairs: &[(LocWord, LocWord)]) -> bool {
    pairs.iter().enumerate().all(|(i, (u, v))| {
        pairs[i + 1..].iter().all(|(u2, v2)| dependent(u, u2) == dependent(v, v2))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayKind {
    /// The attacker performs a transition and the defender answers.
    Move,
    /// The attacker retracts a maximal event of the history.
    Undo,
}

/// One round of the attacker's play. The final round has no response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Play {
    pub kind: PlayKind,
    /// 1 or 2: the side the attacker moves on.
    pub attacker: u8,
    pub attack: String,
    pub response: Option<String>,
    /// Which position of a compound answer the play continues from.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub follow: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equivalent { witness_size: usize },
    Inequivalent { trace: Vec<Play> },
    Unknown { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub kind: RelationKind,
    pub verdict: Verdict,
    pub bounds_hit: bool,
    pub note: Option<String>,
}

impl CheckResult {
    pub fn is_equivalent(&self) -> bool {
        matches!(self.verdict, Verdict::Equivalent { .. })
    }

    pub fn is_inequivalent(&self) -> bool {
        matches!(self.verdict, Verdict::Inequivalent { .. })
    }

    pub fn trace(&self) -> Option<&[Play]> {
        match &self.verdict {
            Verdict::Inequivalent { trace } => Some(trace),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut out = json!({"kind": self.kind.to_string(), "bounds_hit": self.bounds_hit});
        match &self.verdict {
            Verdict::Equivalent { witness_size } => {
                out["verdict"] = json!("equivalent");
                out["witness_size"] = json!(witness_size);
            }
            Verdict::Inequivalent { trace } => {
                out["verdict"] = json!("inequivalent");
                out["trace"] = serde_json::to_value(trace).unwrap_or_default();
            }
            Verdict::Unknown { reason } => {
                out["verdict"] = json!("unknown");
                out["reason"] = json!(reason);
            }
        }
        if let Some(n) = &self.note {
            out["note"] = json!(n);
        }
        out
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.verdict {
            Verdict::Equivalent { witness_size } => {
                write!(f, "equivalent ({}; relation of {witness_size} positions)", self.kind)?
            }
            Verdict::Inequivalent { trace } => {
                writeln!(f, "inequivalent ({})", self.kind)?;
                for (i, p) in trace.iter().enumerate() {
                    let verb = match p.kind {
                        PlayKind::Move => "moves",
                        PlayKind::Undo => "retracts",
                    };
                    match &p.response {
                        Some(r) => writeln!(f, "  {}. side {} {verb} {}; answered by {r}", i + 1, p.attacker, p.attack)?,
                        None => write!(f, "  {}. side {} {verb} {}; no answer", i + 1, p.attacker, p.attack)?,
                    }
                }
            }
            Verdict::Unknown { reason } => write!(f, "unknown ({}): {reason}", self.kind)?,
        }
        if let Some(n) = &self.note {
            write!(f, "\nnote: {n}")?;
        }
        Ok(())
    }
}

// A transition label as seen by the game: termination, or visible events
// (action, word, event id) sorted, with the strict order between positions.
// The silent step has no events.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Label {
    Tick,
    Obs { events: Vec<(Action, LocWord, usize)>, order: Vec<(usize, usize)> },
}

impl Label {
    fn is_tau(&self) -> bool {
        matches!(self, Label::Obs { events, .. } if events.is_empty())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tick => f.write_str("√"),
            Label::Obs { events, .. } if events.is_empty() => f.write_str("tau"),
            Label::Obs { events, order } => {
                let names: Vec<String> = events.iter().map(|(a, u, _)| format!("{a}@{u}")).collect();
                f.write_str(&names.join(","))?;
                if !order.is_empty() {
                    let rel: Vec<String> = order.iter().map(|(i, j)| format!("{}<{}", names[*i], names[*j])).collect();
                    write!(f, " [{}]", rel.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Move {
    label: Label,
    target: usize,
}

// One side of the game: an LTS, or the configurations of an event structure.
struct Side<'p> {
    pes: Option<&'p Pes>,
    flavor: Flavor,
    initial: usize,
    // For event structures: `None` is the terminated state.
    configs: Vec<Option<Config>>,
    index: HashMap<Config, usize>,
    moves: Vec<Option<Rc<[Move]>>>,
    closures: HashMap<usize, Rc<[usize]>>,
}

impl<'p> Side<'p> {
    fn from_lts(lts: &Lts) -> Side<'p> {
        let done = lts.transitions.len();
        let mut moves: Vec<Option<Rc<[Move]>>> = lts
            .transitions
            .iter()
            .map(|ts| {
                let v: Vec<Move> = ts
                    .iter()
                    .map(|(step, target)| Move {
                        label: step_label(step),
                        target: match target {
                            Target::Done => done,
                            Target::To(s) => *s,
                        },
                    })
                    .collect();
                Some(v.into())
            })
            .collect();
        moves.push(Some(vec![Move { label: Label::Tick, target: done }].into()));
        Side {
            pes: None,
            flavor: Flavor::Step,
            initial: lts.initial,
            configs: Vec::new(),
            index: HashMap::new(),
            moves,
            closures: HashMap::new(),
        }
    }

    fn from_pes(pes: &'p Pes, flavor: Flavor) -> Side<'p> {
        let mut side = Side {
            pes: Some(pes),
            flavor,
            initial: 1,
            configs: vec![None],
            index: HashMap::new(),
            moves: vec![None],
            closures: HashMap::new(),
        };
        side.intern(Config::new());
        side
    }

    fn intern(&mut self, c: Config) -> usize {
        if let Some(&i) = self.index.get(&c) {
            return i;
        }
        self.configs.push(Some(c.clone()));
        self.moves.push(None);
        self.index.insert(c, self.configs.len() - 1);
        self.configs.len() - 1
    }

    fn config(&self, s: usize) -> Option<&Config> {
        self.configs.get(s).and_then(|c| c.as_ref())
    }

    fn moves(&mut self, s: usize) -> Rc<[Move]> {
        if let Some(m) = &self.moves[s] {
            return m.clone();
        }
        let pes = self.pes.expect("lazy moves only for event structures");
        let out: Vec<Move> = match self.configs[s].clone() {
            None => vec![Move { label: Label::Tick, target: 0 }],
            Some(c) => {
                let mut out = Vec::new();
                let targets: Vec<Config> = match self.flavor {
                    Flavor::Pomset => step_closure(pes, &c),
                    _ => pes.maximal_steps(&c).into_iter().map(|x| c.union(&x).copied().collect()).collect(),
                };
                for d in targets {
                    let x: Config = d.difference(&c).copied().collect();
                    let label = pes_label(pes, &x);
                    let target = self.intern(d);
                    out.push(Move { label, target });
                }
                if pes.is_terminal(&c) {
                    out.push(Move { label: Label::Tick, target: 0 });
                }
                out
            }
        };
        let rc: Rc<[Move]> = out.into();
        self.moves[s] = Some(rc.clone());
        rc
    }

    fn tau_closure(&mut self, s: usize) -> Rc<[usize]> {
        if let Some(c) = self.closures.get(&s) {
            return c.clone();
        }
        let mut seen = BTreeSet::from([s]);
        let mut order = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for m in self.moves(x).iter() {
                if m.label.is_tau() && seen.insert(m.target) {
                    order.push(m.target);
                    queue.push_back(m.target);
                }
            }
        }
        let rc: Rc<[usize]> = order.into();
        self.closures.insert(s, rc.clone());
        rc
    }

    fn remove(&mut self, s: usize, e: usize) -> usize {
        let mut c = self.config(s).cloned().unwrap_or_default();
        c.remove(&e);
        self.intern(c)
    }
}

fn step_label(step: &Step) -> Label {
    let mut events: Vec<(Action, LocWord, usize)> =
        step.events().iter().map(|e| (e.action.clone(), e.at.clone(), 0)).collect();
    events.sort();
    for (i, e) in events.iter_mut().enumerate() {
        e.2 = i;
    }
    Label::Obs { events, order: Vec::new() }
}

fn pes_label(pes: &Pes, x: &Config) -> Label {
    let mut events: Vec<(Action, LocWord, usize)> = x
        .iter()
        .filter_map(|&e| {
            let ev = &pes.events[e];
            ev.label.as_visible().map(|a| (a.clone(), ev.at.clone(), e))
        })
        .collect();
    events.sort();
    let mut order = Vec::new();
    for (i, a) in events.iter().enumerate() {
        for (j, b) in events.iter().enumerate() {
            if pes.before(a.2, b.2) {
                order.push((i, j));
            }
        }
    }
    Label::Obs { events, order }
}

// Configurations reachable from `c` by one or more maximal steps.
fn step_closure(pes: &Pes, c: &Config) -> Vec<Config> {
    let mut seen: BTreeSet<Config> = BTreeSet::new();
    let mut queue = VecDeque::from([c.clone()]);
    while let Some(d) = queue.pop_front() {
        for x in pes.maximal_steps(&d) {
            let n: Config = d.union(&x).copied().collect();
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct NodeKey {
    s1: usize,
    s2: usize,
    phi: usize,
    hist: usize,
    rooted: bool,
}

struct Alt {
    response: String,
    nodes: Vec<usize>,
}

struct Challenge {
    kind: PlayKind,
    attacker: u8,
    attack: String,
    alts: Vec<Alt>,
}

struct Game<'p> {
    kind: RelationKind,
    bounds: Bounds,
    sides: [Side<'p>; 2],
    phis: Vec<Rc<LocAssoc>>,
    phi_index: HashMap<Rc<LocAssoc>, usize>,
    hists: Vec<Rc<BTreeMap<usize, usize>>>,
    hist_index: HashMap<Rc<BTreeMap<usize, usize>>, usize>,
    nodes: Vec<NodeKey>,
    node_index: HashMap<NodeKey, usize>,
    challenges: Vec<Option<Vec<Challenge>>>,
    queue: VecDeque<usize>,
    bounds_hit: bool,
}

impl<'p> Game<'p> {
    fn new(kind: RelationKind, bounds: Bounds, sides: [Side<'p>; 2]) -> Game<'p> {
        let mut g = Game {
            kind,
            bounds,
            sides,
            phis: Vec::new(),
            phi_index: HashMap::new(),
            hists: Vec::new(),
            hist_index: HashMap::new(),
            nodes: Vec::new(),
            node_index: HashMap::new(),
            challenges: Vec::new(),
            queue: VecDeque::new(),
            bounds_hit: false,
        };
        g.intern_phi(LocAssoc::default());
        g.intern_hist(BTreeMap::new());
        let root = NodeKey {
            s1: g.sides[0].initial,
            s2: g.sides[1].initial,
            phi: 0,
            hist: 0,
            rooted: kind.strength == Strength::RootedBranching,
        };
        g.node(root);
        g
    }

    fn intern_phi(&mut self, phi: LocAssoc) -> usize {
        if let Some(&i) = self.phi_index.get(&phi) {
            return i;
        }
        let rc = Rc::new(phi);
        self.phis.push(rc.clone());
        self.phi_index.insert(rc, self.phis.len() - 1);
        self.phis.len() - 1
    }

    fn intern_hist(&mut self, h: BTreeMap<usize, usize>) -> usize {
        if let Some(&i) = self.hist_index.get(&h) {
            return i;
        }
        let rc = Rc::new(h);
        self.hists.push(rc.clone());
        self.hist_index.insert(rc, self.hists.len() - 1);
        self.hists.len() - 1
    }

    fn node(&mut self, key: NodeKey) -> usize {
        if let Some(&i) = self.node_index.get(&key) {
            return i;
        }
        self.nodes.push(key);
        self.challenges.push(None);
        self.node_index.insert(key, self.nodes.len() - 1);
        self.queue.push_back(self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn explore(&mut self) {
        while let Some(id) = self.queue.pop_front() {
            let key = self.nodes[id];
            if self.nodes.len() > self.bounds.nodes || self.phis[key.phi].len() > self.bounds.phi_max {
                // Left unexplored and assumed related.
                self.bounds_hit = true;
                continue;
            }
            debug_assert!(self.phis[key.phi].is_consistent());
            let ch = self.challenges_of(key);
            self.challenges[id] = Some(ch);
        }
    }

    fn orient(attacker: usize, a: usize, d: usize) -> (usize, usize) {
        if attacker == 0 {
            (a, d)
        } else {
            (d, a)
        }
    }

    fn challenges_of(&mut self, key: NodeKey) -> Vec<Challenge> {
        let mut out = Vec::new();
        let strength = if key.rooted { Strength::Strong } else { self.kind.strength };
        for attacker in 0..2 {
            let def = 1 - attacker;
            let (sa, sd) = Self::orient(attacker, key.s1, key.s2);
            let moves = self.sides[attacker].moves(sa);
            for m in moves.iter() {
                let mut alts = Vec::new();
                let next = |g: &mut Game, a: usize, d: usize, phi: usize, hist: usize| {
                    let (s1, s2) = Self::orient(attacker, a, d);
                    g.node(NodeKey { s1, s2, phi, hist, rooted: false })
                };
                match strength {
                    Strength::Strong => {
                        for m2 in self.sides[def].moves(sd).iter() {
                            for (phi, hist) in self.matchings(attacker, &m.label, &m2.label, key.phi, key.hist) {
                                let n = next(self, m.target, m2.target, phi, hist);
                                alts.push(Alt { response: m2.label.to_string(), nodes: vec![n] });
                            }
                        }
                    }
                    Strength::Weak => {
                        let reach = self.sides[def].tau_closure(sd);
                        if m.label.is_tau() {
                            for &t in reach.iter() {
                                let n = next(self, m.target, t, key.phi, key.hist);
                                alts.push(Alt { response: "tau*".into(), nodes: vec![n] });
                            }
                        } else {
                            for &mid in reach.iter() {
                                for m2 in self.sides[def].moves(mid).iter() {
                                    if m2.label.is_tau() {
                                        continue;
                                    }
                                    let matches = self.matchings(attacker, &m.label, &m2.label, key.phi, key.hist);
                                    if matches.is_empty() {
                                        continue;
                                    }
                                    let after = self.sides[def].tau_closure(m2.target);
                                    for (phi, hist) in matches {
                                        for &t in after.iter() {
                                            let n = next(self, m.target, t, phi, hist);
                                            alts.push(Alt { response: format!("tau* {} tau*", m2.label), nodes: vec![n] });
                                        }
                                    }
                                }
                            }
                        }
                    }
                    Strength::Branching | Strength::RootedBranching => {
                        let reach = self.sides[def].tau_closure(sd);
                        for &mid in reach.iter() {
                            let stay = next(self, sa, mid, key.phi, key.hist);
                            if m.label.is_tau() {
                                let n = next(self, m.target, mid, key.phi, key.hist);
                                alts.push(Alt { response: "tau* (stutter)".into(), nodes: vec![stay, n] });
                            }
                            for m2 in self.sides[def].moves(mid).iter() {
                                for (phi, hist) in self.matchings(attacker, &m.label, &m2.label, key.phi, key.hist) {
                                    let n = next(self, m.target, m2.target, phi, hist);
                                    alts.push(Alt { response: format!("tau* {}", m2.label), nodes: vec![stay, n] });
                                }
                            }
                        }
                    }
                }
                out.push(Challenge { kind: PlayKind::Move, attacker: attacker as u8 + 1, attack: m.label.to_string(), alts });
            }
        }
        if self.kind.flavor == Flavor::Hhp {
            self.undo_challenges(key, &mut out);
        }
        out
    }

    // Hereditary obligations: retracting a maximal event of the history on
    // one side must be matched by retracting its image on the other.
    fn undo_challenges(&mut self, key: NodeKey, out: &mut Vec<Challenge>) {
        let (Some(c1), Some(c2)) = (self.sides[0].config(key.s1).cloned(), self.sides[1].config(key.s2).cloned())
        else {
            return;
        };
        let (p1, p2) = (self.sides[0].pes.expect("event structure"), self.sides[1].pes.expect("event structure"));
        let hist = self.hists[key.hist].clone();
        for (&e1, &e2) in hist.iter() {
            if c1.iter().any(|&x| p1.before(e1, x)) {
                continue;
            }
            let attack = format!("{}@{}", p1.events[e1].label, p1.events[e1].at);
            let response = format!("{}@{}", p2.events[e2].label, p2.events[e2].at);
            let mut alts = Vec::new();
            if !c2.iter().any(|&x| p2.before(e2, x)) {
                let s1 = self.sides[0].remove(key.s1, e1);
                let s2 = self.sides[1].remove(key.s2, e2);
                let mut h = (*hist).clone();
                h.remove(&e1);
                let hist = self.intern_hist(h);
                let n = self.node(NodeKey { s1, s2, phi: key.phi, hist, rooted: false });
                alts.push(Alt { response, nodes: vec![n] });
            }
            out.push(Challenge { kind: PlayKind::Undo, attacker: 1, attack, alts });
        }
    }

    // All ways of matching an attacking label against a defending one:
    // label-preserving bijections that respect the order of the labels and,
    // for history-preserving flavors, the order relative to the history.
    fn matchings(&mut self, attacker: usize, la: &Label, ld: &Label, phi: usize, hist: usize) -> Vec<(usize, usize)> {
        let (l1, l2) = if attacker == 0 { (la, ld) } else { (ld, la) };
        match (l1, l2) {
            (Label::Tick, Label::Tick) => vec![(phi, hist)],
            (Label::Obs { events: e1, order: o1 }, Label::Obs { events: e2, order: o2 }) => {
                if e1.len() != e2.len() || e1.iter().zip(e2.iter()).any(|(a, b)| a.0 != b.0) {
                    return Vec::new();
                }
                let mut found: Vec<Vec<usize>> = Vec::new();
                let mut assign = Vec::new();
                let mut used = vec![false; e2.len()];
                let ctx = MatchCtx {
                    e1,
                    e2,
                    o1: o1.iter().copied().collect(),
                    o2: o2.iter().copied().collect(),
                    hist: if self.kind.tracks_history() { Some(&self.hists[hist]) } else { None },
                    pes: [self.sides[0].pes, self.sides[1].pes],
                    dynamic: self.kind.locality == Mode::Dynamic,
                };
                ctx.search(&mut assign, &mut used, &mut found);
                let mut out = Vec::new();
                for g in found {
                    let new_phi = if self.kind.locality == Mode::Static {
                        let pairs = g.iter().enumerate().map(|(i, &j)| (e1[i].1.clone(), e2[j].1.clone()));
                        match self.phis[phi].extended(pairs) {
                            Some(p) => self.intern_phi(p),
                            None => continue,
                        }
                    } else {
                        phi
                    };
                    let new_hist = if self.kind.tracks_history() {
                        let mut h = (*self.hists[hist]).clone();
                        for (i, &j) in g.iter().enumerate() {
                            h.insert(e1[i].2, e2[j].2);
                        }
                        self.intern_hist(h)
                    } else {
                        hist
                    };
                    if !out.contains(&(new_phi, new_hist)) {
                        out.push((new_phi, new_hist));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    // Greatest fixpoint; returns the round in which each position was
    // refuted (0 for positions that stay related).
    fn solve(&self) -> Vec<u32> {
        let n = self.nodes.len();
        let mut dead = vec![0u32; n];
        let mut round = 0;
        loop {
            round += 1;
            let newly: Vec<usize> = (0..n)
                .filter(|&i| dead[i] == 0)
                .filter(|&i| match &self.challenges[i] {
                    None => false,
                    Some(chs) => chs.iter().any(|ch| !ch.alts.iter().any(|a| a.nodes.iter().all(|&j| dead[j] == 0))),
                })
                .collect();
            if newly.is_empty() {
                return dead;
            }
            for i in newly {
                dead[i] = round;
            }
        }
    }

    // Follows the attacker's refuting challenges from the root, letting the
    // defender pick the answer that survives longest.
    fn trace(&self, dead: &[u32]) -> Vec<Play> {
        let mut plays = Vec::new();
        let mut at = 0usize;
        loop {
            let r = dead[at];
            let chs = self.challenges[at].as_ref().expect("refuted positions are explored");
            let refuted = |a: &Alt| a.nodes.iter().any(|&j| dead[j] != 0 && dead[j] < r);
            let ch = chs
                .iter()
                .find(|ch| ch.alts.iter().all(refuted))
                .expect("a refuted position has a refuting challenge");
            let best = ch
                .alts
                .iter()
                .map(|a| {
                    let (k, j) = a
                        .nodes
                        .iter()
                        .enumerate()
                        .filter(|(_, &j)| dead[j] != 0 && dead[j] < r)
                        .min_by_key(|(_, &j)| dead[j])
                        .map(|(k, &j)| (k, j))
                        .expect("refuted answer");
                    (dead[j], k, j, a)
                })
                .max_by_key(|(rank, ..)| *rank);
            match best {
                None => {
                    plays.push(Play { kind: ch.kind, attacker: ch.attacker, attack: ch.attack.clone(), response: None, follow: 0 });
                    return plays;
                }
                Some((_, k, j, a)) => {
                    plays.push(Play {
                        kind: ch.kind,
                        attacker: ch.attacker,
                        attack: ch.attack.clone(),
                        response: Some(a.response.clone()),
                        follow: k,
                    });
                    at = j;
                }
            }
        }
    }

    fn run(mut self) -> (Verdict, bool) {
        self.explore();
        let dead = self.solve();
        if dead[0] != 0 {
            return (Verdict::Inequivalent { trace: self.trace(&dead) }, self.bounds_hit);
        }
        if self.bounds_hit {
            return (Verdict::Unknown { reason: "exploration bound reached".into() }, true);
        }
        let size = dead.iter().zip(&self.challenges).filter(|(d, c)| **d == 0 && c.is_some()).count();
        (Verdict::Equivalent { witness_size: size }, false)
    }

    fn replay(mut self, trace: &[Play]) -> bool {
        self.explore();
        let mut frontier: BTreeSet<usize> = BTreeSet::from([0]);
        for (i, play) in trace.iter().enumerate() {
            let last = i + 1 == trace.len();
            let mut next = BTreeSet::new();
            for &at in &frontier {
                let Some(chs) = &self.challenges[at] else { continue };
                for ch in chs.iter().filter(|c| c.kind == play.kind && c.attacker == play.attacker && c.attack == play.attack) {
                    match &play.response {
                        None if last => {
                            if ch.alts.is_empty() {
                                return true;
                            }
                        }
                        None => {}
                        Some(r) => {
                            for a in ch.alts.iter().filter(|a| &a.response == r) {
                                if let Some(&j) = a.nodes.get(play.follow) {
                                    next.insert(j);
                                }
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
        false
    }
}

struct MatchCtx<'a> {
    e1: &'a [(Action, LocWord, usize)],
    e2: &'a [(Action, LocWord, usize)],
    o1: BTreeSet<(usize, usize)>,
    o2: BTreeSet<(usize, usize)>,
    hist: Option<&'a BTreeMap<usize, usize>>,
    pes: [Option<&'a Pes>; 2],
    dynamic: bool,
}

impl MatchCtx<'_> {
    fn fits(&self, assign: &[usize], i: usize, j: usize) -> bool {
        if self.e1[i].0 != self.e2[j].0 || (self.dynamic && self.e1[i].1 != self.e2[j].1) {
            return false;
        }
        for (k, &gk) in assign.iter().enumerate() {
            if self.o1.contains(&(k, i)) != self.o2.contains(&(gk, j))
                || self.o1.contains(&(i, k)) != self.o2.contains(&(j, gk))
            {
                return false;
            }
        }
        if let (Some(hist), [Some(p1), Some(p2)]) = (self.hist, self.pes) {
            let (x1, x2) = (self.e1[i].2, self.e2[j].2);
            if hist.iter().any(|(&c1, &c2)| p1.before(c1, x1) != p2.before(c2, x2)) {
                return false;
            }
        }
        true
    }

    fn search(&self, assign: &mut Vec<usize>, used: &mut [bool], found: &mut Vec<Vec<usize>>) {
        let i = assign.len();
        if i == self.e1.len() {
            found.push(assign.clone());
            return;
        }
        for j in 0..self.e2.len() {
            if !used[j] && self.fits(assign, i, j) {
                used[j] = true;
                assign.push(j);
                self.search(assign, used, found);
                assign.pop();
                used[j] = false;
            }
        }
    }
}

fn result(kind: RelationKind, (verdict, bounds_hit): (Verdict, bool), note: Option<String>) -> CheckResult {
    CheckResult { kind, verdict, bounds_hit, note }
}

fn truncated(kind: RelationKind) -> CheckResult {
    CheckResult {
        kind,
        verdict: Verdict::Unknown { reason: "state space truncated".into() },
        bounds_hit: true,
        note: None,
    }
}

/// Step-flavored check over two prebuilt transition systems.
pub fn check_lts(l1: &Lts, l2: &Lts, kind: RelationKind, bounds: Bounds) -> CheckResult {
    if l1.truncated || l2.truncated {
        return truncated(kind);
    }
    let game = Game::new(kind.with_flavor(Flavor::Step), bounds, [Side::from_lts(l1), Side::from_lts(l2)]);
    result(kind, game.run(), None)
}

pub fn check_step(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<CheckResult, EquivError> {
    let l1 = build_lts(env, t1, kind.locality, bounds)?;
    let l2 = build_lts(env, t2, kind.locality, bounds)?;
    Ok(check_lts(&l1, &l2, kind, bounds))
}

fn event_structures(env: &Env, t1: &Term, t2: &Term, mode: Mode) -> Result<Result<(Pes, Pes), String>, EquivError> {
    let conv = |t: &Term| match term_to_pes(env, t, mode) {
        Ok(p) => Ok(Ok(p)),
        Err(PesError::Unsupported(why)) => Ok(Err(why)),
        Err(e) => Err(EquivError::Pes(e)),
    };
    Ok(match (conv(t1)?, conv(t2)?) {
        (Ok(p1), Ok(p2)) => Ok((p1, p2)),
        (Err(w), _) | (_, Err(w)) => Err(w),
    })
}

fn check_on_pes(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<CheckResult, EquivError> {
    match event_structures(env, t1, t2, kind.locality)? {
        Ok((p1, p2)) => {
            let game = Game::new(kind, bounds, [Side::from_pes(&p1, kind.flavor), Side::from_pes(&p2, kind.flavor)]);
            Ok(result(kind, game.run(), None))
        }
        Err(why) => {
            let mut r = check_step(env, t1, t2, kind.with_flavor(Flavor::Step), bounds)?;
            r.kind = kind;
            r.note = Some(format!("{why}; step verdict reported instead"));
            Ok(r)
        }
    }
}

pub fn check_pomset(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<CheckResult, EquivError> {
    check_on_pes(env, t1, t2, kind.with_flavor(Flavor::Pomset), bounds)
}

/// History-preserving check; `kind.flavor` selects hp or hhp.
pub fn check_hp(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<CheckResult, EquivError> {
    let kind = if kind.tracks_history() { kind } else { kind.with_flavor(Flavor::Hp) };
    check_on_pes(env, t1, t2, kind, bounds)
}

/// Dispatches on `kind.flavor`.
pub fn check(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<CheckResult, EquivError> {
    match kind.flavor {
        Flavor::Step => check_step(env, t1, t2, kind, bounds),
        Flavor::Pomset => check_pomset(env, t1, t2, kind, bounds),
        Flavor::Hp | Flavor::Hhp => check_hp(env, t1, t2, kind, bounds),
    }
}

/// A distinguishing play, when the terms are inequivalent.
pub fn distinguish(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds) -> Result<Option<Vec<Play>>, EquivError> {
    Ok(check(env, t1, t2, kind, bounds)?.trace().map(<[Play]>::to_vec))
}

/// Replays a distinguishing play against freshly built semantics and
/// confirms that it ends in an unanswerable attack.
pub fn replay(env: &Env, t1: &Term, t2: &Term, kind: RelationKind, bounds: Bounds, trace: &[Play]) -> Result<bool, EquivError> {
    if kind.flavor == Flavor::Step {
        let l1 = build_lts(env, t1, kind.locality, bounds)?;
        let l2 = build_lts(env, t2, kind.locality, bounds)?;
        return Ok(Game::new(kind, bounds, [Side::from_lts(&l1), Side::from_lts(&l2)]).replay(trace));
    }
    match event_structures(env, t1, t2, kind.locality)? {
        Ok((p1, p2)) => Ok(Game::new(kind, bounds, [Side::from_pes(&p1, kind.flavor), Side::from_pes(&p2, kind.flavor)]).replay(trace)),
        Err(_) => replay(env, t1, t2, kind.with_flavor(Flavor::Step), bounds, trace),
    }
}

/// Replays a play against two prebuilt transition systems.
pub fn replay_lts(l1: &Lts, l2: &Lts, kind: RelationKind, bounds: Bounds, trace: &[Play]) -> bool {
    Game::new(kind.with_flavor(Flavor::Step), bounds, [Side::from_lts(l1), Side::from_lts(l2)]).replay(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::syntax::parse_term;

    fn w(s: &str) -> LocWord {
        if s == "eps" {
            LocWord::epsilon()
        } else {
            LocWord::from_names(s.split('.'))
        }
    }

    fn run(src1: &str, src2: &str, kind: &str) -> CheckResult {
        let env = Env::new(Alphabet::default());
        let (t1, t2) = (parse_term(src1).unwrap(), parse_term(src2).unwrap());
        let kind: RelationKind = kind.parse().unwrap();
        let r = check(&env, &t1, &t2, kind, Bounds::default()).unwrap();
        if let Some(trace) = r.trace() {
            assert!(replay(&env, &t1, &t2, kind, Bounds::default(), trace).unwrap(), "replay of {src1} vs {src2}");
        }
        r
    }

    #[test]
    fn consistency_of_associations() {
        assert!(cla_consistent(&[(w("l1"), w("l2"))]));
        assert!(cla_consistent(&[(w("l1"), w("l1")), (w("l1.l2"), w("l1.l3"))]));
        assert!(!cla_consistent(&[(w("l1"), w("l3")), (w("l1.l2"), w("l4"))]));
    }

    #[test]
    fn kind_parsing() {
        let k: RelationKind = "rb-step-sl".parse().unwrap();
        assert_eq!(k.strength, Strength::RootedBranching);
        assert_eq!(k.to_string(), "step-sl-rb");
        assert!("frob".parse::<RelationKind>().is_err());
    }

    #[test]
    fn step_examples() {
        assert!(run("l1 :: a", "l2 :: a", "step-sl-strong").is_equivalent());
        assert!(run("a ; tau", "a", "step-sl-strong").is_inequivalent());
        assert!(run("a ; tau", "a", "step-sl-rb").is_equivalent());
        assert!(run("a ; tau", "a", "step-sl-weak").is_equivalent());
        assert!(run("a", "b", "step-sl-strong").is_inequivalent());
        assert!(run("a + b", "b + a", "step-dl-strong").is_equivalent());
        assert!(run("tau ; a + b", "a + b", "step-sl-rb").is_inequivalent());
        assert!(run("tau ; a + b", "a + b", "step-sl-weak").is_inequivalent());
        assert!(run("a ; (tau ; (b + c) + b)", "a ; (b + c)", "step-sl-br").is_equivalent());
    }

    #[test]
    fn termination_is_observed() {
        assert!(run("a ; d", "a", "step-sl-strong").is_inequivalent());
        assert!(run("a + d", "a", "step-sl-strong").is_equivalent());
    }

    #[test]
    fn location_structure_matters() {
        assert!(run("l1 :: a // l2 :: b", "l1 :: (a // b)", "step-sl-strong").is_inequivalent());
        assert!(run("l1 :: a // l2 :: b", "l3 :: b // l4 :: a", "step-sl-strong").is_equivalent());
    }

    #[test]
    fn pomset_examples() {
        assert!(run("(a + b) // c", "(a // c) + (b // c)", "pomset-sl-strong").is_equivalent());
        assert!(run("a ; b", "a // b", "pomset-sl-strong").is_inequivalent());
        assert!(run("a ; b", "a // b", "step-sl-strong").is_inequivalent());
    }

    #[test]
    fn history_preserving_separation() {
        for (x, y) in [("(a + b) // c", "(a // c) + (b // c)"), ("a // (b + c)", "(a // b) + (a // c)")] {
            assert!(run(x, y, "hp-sl-strong").is_equivalent(), "{x}");
            let r = run(x, y, "hhp-sl-strong");
            assert!(r.is_inequivalent(), "{x}");
            assert!(r.trace().unwrap().iter().any(|p| p.kind == PlayKind::Undo));
        }
        assert!(run("a", "a", "hhp-sl-strong").is_equivalent());
    }

    #[test]
    fn verdict_json_shape() {
        let r = run("a", "b", "step-sl-strong");
        let j = r.to_json();
        assert_eq!(j["verdict"], "inequivalent");
        assert_eq!(j["trace"][0]["attack"], "a@eps");
    }
}
