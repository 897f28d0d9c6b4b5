//! Seeded soundness suites: each law is a pair of term templates plus a
//! side condition; instances are drawn at random and compared by the
//! checker the corresponding soundness result names.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alphabet::{Action, ActionId, Alphabet};
use crate::equiv::{check, Flavor, RelationKind, Strength, Verdict};
use crate::expand::{expand, random_composition};
use crate::gen::{GenConfig, TermGen};
use crate::recursion::{cfar_apply, cfar_lhs, clusters, validate_guarded};
use crate::sos::{Bounds, Mode};
use crate::syntax::{parse_term, print_term};
use crate::term::{sort, Env, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Batc,
    Aptc,
    Encap,
    Proj,
    Tau,
    Hide,
    CtcStatic,
    CtcLocation,
    Expansion,
    Cfar,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Batc,
        Suite::Aptc,
        Suite::Encap,
        Suite::Proj,
        Suite::Tau,
        Suite::Hide,
        Suite::CtcStatic,
        Suite::CtcLocation,
        Suite::Expansion,
        Suite::Cfar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Batc => "batc",
            Suite::Aptc => "aptc",
            Suite::Encap => "encap",
            Suite::Proj => "proj",
            Suite::Tau => "tau",
            Suite::Hide => "hide",
            Suite::CtcStatic => "ctc-static",
            Suite::CtcLocation => "ctc-location",
            Suite::Expansion => "expansion",
            Suite::Cfar => "cfar",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// The checkers the suite runs by default.
    pub fn default_kinds(self) -> Vec<RelationKind> {
        let strong = RelationKind::new(Flavor::Step, Mode::Static, Strength::Strong);
        match self {
            Suite::Tau | Suite::Hide | Suite::Cfar => vec![strong.with_strength(Strength::RootedBranching)],
            Suite::CtcLocation => vec![strong.with_flavor(Flavor::Pomset), strong, strong.with_flavor(Flavor::Hp)],
            _ => vec![strong],
        }
    }

    fn gen_config(self) -> GenConfig {
        let aptc_actions = ["a", "b", "c", "e", "f", "g"];
        match self {
            Suite::Batc => GenConfig::batc().with_actions(&["a", "b", "c", "e"]),
            Suite::Aptc => GenConfig::aptc().with_actions(&aptc_actions),
            Suite::Encap => GenConfig::encap().with_actions(&aptc_actions),
            Suite::Proj => GenConfig::proj().with_actions(&aptc_actions),
            Suite::Tau => GenConfig::tau().with_actions(&aptc_actions),
            Suite::Hide => GenConfig::hide().with_actions(&aptc_actions),
            Suite::CtcStatic | Suite::CtcLocation | Suite::Expansion => GenConfig::ctc().with_actions(&aptc_actions),
            Suite::Cfar => GenConfig::batc().with_actions(&["a", "b", "c"]),
        }
    }

    /// The laws of the suite, in table order.
    pub fn laws(self) -> Vec<Law> {
        use Cond::*;
        let t = |name, lhs, rhs| Law { name, shape: Shape::Template { lhs, rhs, cond: Always } };
        let c = |name, lhs, rhs, cond| Law { name, shape: Shape::Template { lhs, rhs, cond } };
        match self {
            Suite::Batc => vec![
                t("A1", "{X} + {Y}", "{Y} + {X}"),
                t("A2", "({X} + {Y}) + {Z}", "{X} + ({Y} + {Z})"),
                t("A3", "{X} + {X}", "{X}"),
                t("A4", "({X} + {Y}) ; {Z}", "{X} ; {Z} + {Y} ; {Z}"),
                t("A5", "({X} ; {Y}) ; {Z}", "{X} ; ({Y} ; {Z})"),
                t("L1", "eps :: {X}", "{X}"),
                t("L2", "{u} :: ({X} ; {Y})", "{u} :: {X} ; {u} :: {Y}"),
                t("L3", "{u} :: ({X} + {Y})", "{u} :: {X} + {u} :: {Y}"),
                t("L4", "{u} :: ({v} :: {X})", "{uv} :: {X}"),
            ],
            Suite::Aptc => vec![
                t("A6", "{X} + d", "{X}"),
                t("A7", "d ; {X}", "d"),
                t("P1", "{X} || {Y}", "{X} // {Y} + {X} | {Y}"),
                t("P2", "{X} // {Y}", "{Y} // {X}"),
                t("P3", "({X} // {Y}) // {Z}", "{X} // ({Y} // {Z})"),
                t("P4", "{X} // {Y}", "{X} << {Y} + {Y} << {X}"),
                c("P5", "{E1} << ({E2} ; {Y})", "({E1} << {E2}) ; {Y}", Le12),
                c("P6", "({E1} ; {X}) << {E2}", "({E1} << {E2}) ; {X}", Le12),
                c("P7", "({E1} ; {X}) << ({E2} ; {Y})", "({E1} << {E2}) ; ({X} || {Y})", Le12),
                t("P8", "({X} + {Y}) << {Z}", "{X} << {Z} + {Y} << {Z}"),
                t("P9", "d << {X}", "d"),
                t("C1", "{E1} | {E2}", "{G12}"),
                t("C2", "{E1} | ({E2} ; {Y})", "{G12} ; {Y}"),
                t("C3", "({E1} ; {X}) | {E2}", "{G12} ; {X}"),
                t("C4", "({E1} ; {X}) | ({E2} ; {Y})", "{G12} ; ({X} || {Y})"),
                t("C5", "({X} + {Y}) | {Z}", "{X} | {Z} + {Y} | {Z}"),
                t("C6", "{X} | ({Y} + {Z})", "{X} | {Y} + {X} | {Z}"),
                t("C7", "d | {X}", "d"),
                t("C8", "{X} | d", "d"),
                t("CE1", "theta({E})", "{E}"),
                t("CE2", "theta(d)", "d"),
                t("CE3", "theta({X} + {Y})", "unless(theta({X}), {Y}) + unless(theta({Y}), {X})"),
                t("CE4", "theta({X} ; {Y})", "theta({X}) ; theta({Y})"),
                t("CE5", "theta({X} // {Y})", "unless(theta({X}), {Y}) // {Y} + unless(theta({Y}), {X}) // {X}"),
                t("CE6", "theta({X} | {Y})", "unless(theta({X}), {Y}) | {Y} + unless(theta({Y}), {X}) | {X}"),
                c("U1", "unless({E1}, {E2})", "tau", Conflict12),
                c("U2", "unless({E1}, {E3})", "{E1}", ConflictLe),
                c("U3", "unless({E3}, {E1})", "tau", ConflictLe),
                t("U4", "unless({E}, d)", "{E}"),
                t("U5", "unless(d, {E})", "d"),
                t("U6", "unless({X} + {Y}, {Z})", "unless({X}, {Z}) + unless({Y}, {Z})"),
                t("U7", "unless({X} ; {Y}, {Z})", "unless({X}, {Z}) ; unless({Y}, {Z})"),
                t("U8", "unless({X} << {Y}, {Z})", "unless({X}, {Z}) << unless({Y}, {Z})"),
                t("U9", "unless({X} | {Y}, {Z})", "unless({X}, {Z}) | unless({Y}, {Z})"),
                t("U10", "unless({X}, {Y} + {Z})", "unless(unless({X}, {Y}), {Z})"),
                t("U11", "unless({X}, {Y} ; {Z})", "unless(unless({X}, {Y}), {Z})"),
                t("U12", "unless({X}, {Y} << {Z})", "unless(unless({X}, {Y}), {Z})"),
                t("U13", "unless({X}, {Y} | {Z})", "unless(unless({X}, {Y}), {Z})"),
                t("L5", "{u} :: ({X} || {Y})", "{u} :: {X} || {u} :: {Y}"),
                t("L6", "{u} :: ({X} // {Y})", "{u} :: {X} // {u} :: {Y}"),
                t("L7", "{u} :: ({X} | {Y})", "{u} :: {X} | {u} :: {Y}"),
                t("L8", "{u} :: theta({X})", "theta({u} :: {X})"),
                t("L9", "{u} :: unless({X}, {Y})", "unless({u} :: {X}, {u} :: {Y})"),
                t("L10", "{u} :: d", "d"),
            ],
            Suite::Encap => vec![
                c("D1", "encap(H, {E})", "{E}", NotInH),
                c("D2", "encap(H, {E})", "d", InH),
                t("D3", "encap(H, d)", "d"),
                t("D4", "encap(H, {X} + {Y})", "encap(H, {X}) + encap(H, {Y})"),
                t("D5", "encap(H, {X} ; {Y})", "encap(H, {X}) ; encap(H, {Y})"),
                t("D6", "encap(H, {X} << {Y})", "encap(H, {X}) << encap(H, {Y})"),
                t("L11", "{u} :: encap(H, {X})", "encap(H, {u} :: {X})"),
            ],
            Suite::Proj => vec![
                t("PR1", "pi({n}, {X} + {Y})", "pi({n}, {X}) + pi({n}, {Y})"),
                t("PR2", "pi({n}, {X} << {Y})", "pi({n}, {X}) << pi({n}, {Y})"),
                t("PR3", "pi({n1}, {S})", "{S}"),
                t("PR4", "pi({n1}, ({S}) ; {X})", "({S}) ; pi({n}, {X})"),
                t("PR5", "pi(0, {X})", "d"),
                t("PR6", "pi({n}, d)", "d"),
                t("L12", "{u} :: pi({n}, {X})", "pi({n}, {u} :: {X})"),
            ],
            Suite::Tau => vec![
                t("B1", "{E} ; tau", "{E}"),
                t("B2", "{E} ; (tau ; ({X} + {Y}) + {X})", "{E} ; ({X} + {Y})"),
                t("B3", "{X} << tau", "{X}"),
                t("L13", "{u} :: tau", "tau"),
            ],
            Suite::Hide => vec![
                c("TI1", "hide(I, {E})", "{E}", NotInI),
                c("TI2", "hide(I, {E})", "tau", InI),
                t("TI3", "hide(I, d)", "d"),
                t("TI4", "hide(I, {X} + {Y})", "hide(I, {X}) + hide(I, {Y})"),
                t("TI5", "hide(I, {X} ; {Y})", "hide(I, {X}) ; hide(I, {Y})"),
                t("TI6", "hide(I, {X} << {Y})", "hide(I, {X}) << hide(I, {Y})"),
                t("L14", "{u} :: hide(I, {X})", "hide(I, {u} :: {X})"),
                c("L15", "hide(I, {u} :: {E})", "{u} :: {E}", NotInI),
                c("L16", "hide(I, {u} :: {E})", "tau", InI),
            ],
            Suite::CtcStatic => vec![
                t("M1", "{P} + {Q}", "{Q} + {P}"),
                t("M2", "{P} + ({Q} + {R})", "({P} + {Q}) + {R}"),
                t("M3", "{P} + {P}", "{P}"),
                t("M4", "{P} + 0", "{P}"),
                t("S1", "{P} // {Q}", "{Q} // {P}"),
                t("S2", "{P} // ({Q} // {R})", "({P} // {Q}) // {R}"),
                t("S3", "{P} // 0", "{P}"),
                c("S4", "restrict({L}, {P})", "{P}", SortDisjoint),
                t("S5", "restrict({L}, restrict({K}, {P}))", "restrict({KL}, {P})"),
                t("S6", "restrict({L}, relabel({f}, {P}))", "relabel({f}, restrict({Lf}, {P}))"),
                c("S7", "restrict({L}, {P} // {Q})", "restrict({L}, {P}) // restrict({L}, {Q})", NoCrossComm),
                t("S8", "relabel({}, {P})", "{P}"),
                t("S9", "relabel({f}, {P})", "relabel({f2}, {P})"),
                t("S10", "relabel({g}, relabel({f}, {P}))", "relabel({gf}, {P})"),
                c("S11", "relabel({f}, {P} // {Q})", "relabel({f}, {P}) // relabel({f}, {Q})", InjectiveOnSort),
            ],
            Suite::CtcLocation => vec![
                t("LL1", "eps :: {P}", "{P}"),
                t("LL2", "{u} :: 0", "0"),
                t("LL3", "{u} :: ({al} . {P})", "<{u} :: {al}> . ({u} :: {P})"),
                t("LL4", "{u} :: ({P} + {Q})", "{u} :: {P} + {u} :: {Q}"),
                t("LL5", "{u} :: ({P} // {Q})", "{u} :: {P} // {u} :: {Q}"),
                t("LL6", "{u} :: restrict({L}, {P})", "restrict({L}, {u} :: {P})"),
                t("LL7", "{u} :: relabel({f}, {P})", "relabel({f}, {u} :: {P})"),
                t("LL8", "{u} :: ({v} :: {P})", "{uv} :: {P}"),
            ],
            Suite::Expansion => vec![Law { name: "EXP", shape: Shape::Expansion }],
            Suite::Cfar => vec![Law { name: "CFAR", shape: Shape::Cfar }],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Side conditions of the axiom schemas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cond {
    Always,
    /// `E1 ≤ E2`: equal, or `E1` causally precedes `E2`.
    Le12,
    /// `E1 # E2`.
    Conflict12,
    /// `E1 # E2` and `E2 < E3`.
    ConflictLe,
    InH,
    NotInH,
    InI,
    NotInI,
    /// The sort of `P` avoids `L` and its co-names.
    SortDisjoint,
    /// No communication between `P` and `Q` through `L` or its co-names.
    NoCrossComm,
    /// `f` is one-to-one on the sorts of `P` and `Q` and their co-names.
    InjectiveOnSort,
}

#[derive(Clone, Debug)]
enum Shape {
    Template { lhs: &'static str, rhs: &'static str, cond: Cond },
    Expansion,
    Cfar,
}

#[derive(Clone, Debug)]
pub struct Law {
    pub name: &'static str,
    shape: Shape,
}

impl Law {
    /// The schema as `lhs = rhs`, for reports.
    pub fn schema(&self) -> String {
        match &self.shape {
            Shape::Template { lhs, rhs, .. } => format!("{lhs} = {rhs}"),
            Shape::Expansion => "P = expand(P)".into(),
            Shape::Cfar => "tau ; hide(I, <X|E>) = tau ; hide(I, exits)".into(),
        }
    }
}

/// A closed instance of a law.
#[derive(Clone, Debug)]
pub struct Instance {
    pub lhs: Term,
    pub rhs: Term,
    pub env: Env,
}

const MAX_TRIES: usize = 500;
const TERM_SIZE: usize = 6;

/// Substitutes `{name}` occurrences in one left-to-right pass; unknown
/// names (and the empty relabelling `{}`) are copied verbatim.
fn fill(template: &str, values: &HashMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        match tail.find('}') {
            Some(close) => {
                let key = &tail[1..close];
                match values.get(key) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&tail[..=close]),
                }
                rest = &tail[close + 1..];
            }
            None => {
                out.push_str(tail);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn set_text(s: &BTreeSet<Action>) -> String {
    format!("{{{}}}", s.iter().map(Action::as_str).collect::<Vec<_>>().join(", "))
}

fn id_text(id: &ActionId) -> String {
    match id {
        ActionId::Visible(a) => a.to_string(),
        ActionId::Tau => "tau".into(),
        ActionId::Delta => "d".into(),
    }
}

/// A finite relabelling over plain actions, kept as a total map on
/// `domain` so it can be composed and compared.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Map(Vec<(Action, Action)>);

impl Map {
    fn apply(&self, a: &Action) -> Action {
        self.0.iter().find(|(x, _)| x == a).map(|(_, y)| y.clone()).unwrap_or_else(|| a.clone())
    }

    fn text(&self) -> String {
        let body: Vec<String> = self.0.iter().filter(|(x, y)| x != y).map(|(x, y)| format!("{x} -> {y}")).collect();
        format!("{{{}}}", body.join(", "))
    }

    fn then(&self, after: &Map, domain: &[Action]) -> Map {
        Map(domain.iter().map(|a| (a.clone(), after.apply(&self.apply(a)))).collect())
    }

    fn inverse_image(&self, set: &BTreeSet<Action>, universe: &BTreeSet<Action>) -> BTreeSet<Action> {
        universe.iter().filter(|a| set.contains(&self.apply(a))).cloned().collect()
    }
}

/// Actions literal relabellings may touch; they avoid communicating
/// actions so relabelling never creates or breaks a handshake.
fn relabel_domain() -> Vec<Action> {
    ["a", "b", "c", "e"].iter().map(|n| Action::new(n)).collect()
}

fn random_map(g: &mut TermGen) -> Map {
    let dom = relabel_domain();
    Map(dom
        .iter()
        .map(|a| {
            let to = if g.chance(0.5) { dom[g.below(dom.len())].clone() } else { a.clone() };
            (a.clone(), to)
        })
        .collect())
}

fn random_set(g: &mut TermGen) -> BTreeSet<Action> {
    (0..1 + g.below(2)).map(|_| g.action()).collect()
}

/// Everything a template can mention, drawn for one sample.
struct Draw {
    values: HashMap<&'static str, String>,
    atoms: [Action; 3],
    terms: [Term; 3],
    restriction: BTreeSet<Action>,
    relabelling: Map,
}

fn atoms_for(cond: Cond, g: &mut TermGen, alph: &Alphabet) -> Option<[Action; 3]> {
    let pool = g.config.actions.clone();
    let mut triples = Vec::new();
    for x in &pool {
        for y in &pool {
            for z in &pool {
                let keep = match cond {
                    Cond::Le12 => x == y || alph.causes(x, y),
                    Cond::Conflict12 => alph.conflicts(x, y),
                    Cond::ConflictLe => alph.conflicts(x, y) && alph.causes(y, z),
                    _ => true,
                };
                if keep {
                    triples.push([x.clone(), y.clone(), z.clone()]);
                }
            }
        }
    }
    if triples.is_empty() {
        None
    } else {
        let i = g.below(triples.len());
        Some(triples.swap_remove(i))
    }
}

fn draw(cond: Cond, g: &mut TermGen, alph: &Alphabet, ctc: bool) -> Option<Draw> {
    let atoms = atoms_for(cond, g, alph)?;
    let terms = [g.term_up_to(TERM_SIZE), g.term_up_to(TERM_SIZE), g.term_up_to(TERM_SIZE)];
    let (u, v) = (g.word(), g.word());
    let n = g.below(3) as u32;
    let k = 1 + g.below(3);
    let chain: Vec<String> = (0..k).map(|_| g.action().to_string()).collect();
    let restriction = random_set(g);
    let other = random_set(g);
    let f = random_map(g);
    let after = random_map(g);
    let dom = relabel_domain();
    let universe: BTreeSet<Action> = alph.actions().clone();
    let p_sort = sort(&Env::new(alph.clone()), &terms[0]).unwrap_or_default();
    let agreeing = Map(dom
        .iter()
        .map(|a| if p_sort.contains(a) { (a.clone(), f.apply(a)) } else { (a.clone(), dom[g.below(dom.len())].clone()) })
        .collect());
    let al = if g.chance(0.2) { "tau".to_string() } else { g.action().to_string() };

    let mut values: HashMap<&'static str, String> = HashMap::new();
    let names = if ctc { ["P", "Q", "R"] } else { ["X", "Y", "Z"] };
    for (name, t) in names.iter().zip(&terms) {
        values.insert(name, format!("({})", print_term(t)));
    }
    values.insert("E", atoms[0].to_string());
    values.insert("E1", atoms[0].to_string());
    values.insert("E2", atoms[1].to_string());
    values.insert("E3", atoms[2].to_string());
    let g12 = alph.gamma(&ActionId::Visible(atoms[0].clone()), &ActionId::Visible(atoms[1].clone()));
    values.insert("G12", id_text(&g12));
    values.insert("u", u.to_string());
    values.insert("v", v.to_string());
    values.insert("uv", u.concat(&v).to_string());
    values.insert("n", n.to_string());
    values.insert("n1", (n + 1).to_string());
    values.insert("S", chain.join(" << "));
    values.insert("L", set_text(&restriction));
    values.insert("K", set_text(&other));
    values.insert("KL", set_text(&restriction.union(&other).cloned().collect()));
    values.insert("Lf", set_text(&f.inverse_image(&restriction, &universe)));
    values.insert("f", f.text());
    values.insert("f2", agreeing.text());
    values.insert("g", after.text());
    values.insert("gf", f.then(&after, &dom).text());
    values.insert("al", al);
    Some(Draw { values, atoms, terms, restriction, relabelling: f })
}

fn holds(cond: Cond, d: &Draw, env: &Env) -> bool {
    let alph = &env.alphabet;
    let e = &d.atoms[0];
    let in_set = |name: &str, hiding: bool| {
        let set = if hiding { alph.hide_set(name) } else { alph.encap_set(name) };
        set.is_some_and(|s| s.contains(e))
    };
    let sort_of = |t: &Term| sort(env, t).unwrap_or_default();
    let with_co = |s: &BTreeSet<Action>| -> BTreeSet<Action> {
        let mut out = s.clone();
        out.extend(alph.co_set(s));
        out
    };
    match cond {
        Cond::Always | Cond::Le12 | Cond::Conflict12 | Cond::ConflictLe => true,
        Cond::InH => in_set("H", false),
        Cond::NotInH => !in_set("H", false),
        Cond::InI => in_set("I", true),
        Cond::NotInI => !in_set("I", true),
        Cond::SortDisjoint => sort_of(&d.terms[0]).is_disjoint(&with_co(&d.restriction)),
        Cond::NoCrossComm => {
            let co_q = alph.co_set(&sort_of(&d.terms[1]));
            let guarded = with_co(&d.restriction);
            !sort_of(&d.terms[0]).iter().any(|a| co_q.contains(a) && guarded.contains(a))
        }
        Cond::InjectiveOnSort => {
            let mut names = sort_of(&d.terms[0]);
            names.extend(sort_of(&d.terms[1]));
            let names = with_co(&names);
            let images: BTreeSet<Action> = names.iter().map(|a| d.relabelling.apply(a)).collect();
            images.len() == names.len()
        }
    }
}

impl Law {
    /// Draws one instance, or `None` when no draw within the retry budget
    /// met the side condition.
    pub fn instance(&self, suite: Suite, seed: u64, alph: &Alphabet) -> Result<Option<Instance>, String> {
        let mut g = TermGen::new(seed, suite.gen_config());
        let env = Env::new(alph.clone());
        match &self.shape {
            Shape::Template { lhs, rhs, cond } => {
                let ctc = matches!(suite, Suite::CtcStatic | Suite::CtcLocation);
                for _ in 0..MAX_TRIES {
                    let Some(d) = draw(*cond, &mut g, alph, ctc) else { return Ok(None) };
                    if !holds(*cond, &d, &env) {
                        continue;
                    }
                    let parse = |tpl: &str| {
                        let text = fill(tpl, &d.values);
                        parse_term(&text).map_err(|e| format!("{}: `{text}`: {}", self.name, e.message))
                    };
                    return Ok(Some(Instance { lhs: parse(lhs)?, rhs: parse(rhs)?, env }));
                }
                Ok(None)
            }
            Shape::Expansion => {
                let c = random_composition(&env, &mut g, 3, 3);
                let rhs = expand(&env, &c).map_err(|e| e.to_string())?;
                Ok(Some(Instance { lhs: c.term(), rhs, env }))
            }
            Shape::Cfar => {
                for _ in 0..MAX_TRIES {
                    let vars = 1 + g.below(3);
                    let spec = g.spec("E", vars, 2, 0.15);
                    if validate_guarded(&spec).is_err() {
                        continue;
                    }
                    let hidden = random_set(&mut g);
                    let Some(cluster) =
                        clusters(&spec, &hidden).into_iter().find(|c| c.is_nontrivial(&spec, &hidden) && !c.exits.is_empty())
                    else {
                        continue;
                    };
                    let var = cluster.vars[g.below(cluster.vars.len())].clone();
                    let out = cfar_apply(&spec, &hidden, &var).map_err(|e| e.to_string())?;
                    let lhs = cfar_lhs(&spec, &hidden, &var);
                    return Ok(Some(Instance { lhs, rhs: out.term, env: env.with_spec(spec) }));
                }
                Ok(None)
            }
        }
    }
}

/// Outcome of one sample under one checker.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Outcome {
    Pass { fallback: bool },
    Fail { lhs: String, rhs: String, trace: String },
    Unknown { reason: String },
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub sample: usize,
    pub lhs: String,
    pub rhs: String,
    pub trace: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub kind: String,
    pub passed: usize,
    pub failed: usize,
    pub unknown: usize,
    pub skipped: usize,
    /// Passes decided by the step checker because no event structure was
    /// available for the instance.
    pub fallback: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_unknown: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LawReport {
    pub law: String,
    pub schema: String,
    pub checks: Vec<Tally>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub laws: Vec<LawReport>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.laws.iter().flat_map(|l| &l.checks).map(|t| t.failed).sum()
    }

    pub fn unknowns(&self) -> usize {
        self.laws.iter().flat_map(|l| &l.checks).map(|t| t.unknown).sum()
    }

    pub fn law(&self, name: &str) -> Option<&LawReport> {
        self.laws.iter().find(|l| l.law == name)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} seed {} samples {}", self.suite, self.seed, self.samples)?;
        for law in &self.laws {
            for t in &law.checks {
                write!(
                    f,
                    "{:<5} {:<16} pass {:>4}  fail {:>4}  unknown {:>4}  skipped {:>4}",
                    law.law, t.kind, t.passed, t.failed, t.unknown, t.skipped
                )?;
                if t.fallback > 0 {
                    write!(f, "  (step fallback {})", t.fallback)?;
                }
                writeln!(f)?;
                if let Some(x) = &t.first_failure {
                    writeln!(f, "      sample {}: {}  vs  {}", x.sample, x.lhs, x.rhs)?;
                    if !x.trace.is_empty() {
                        writeln!(f, "      trace: {}", x.trace)?;
                    }
                }
            }
        }
        let checks: usize = self.laws.iter().flat_map(|l| &l.checks).map(|t| t.passed + t.failed + t.unknown).sum();
        write!(f, "total: {} laws, {} checks, {} failures, {} unknown", self.laws.len(), checks, self.failures(), self.unknowns())
    }
}

/// How to run a suite.
#[derive(Clone, Debug)]
pub struct LawOptions {
    pub samples: usize,
    pub seed: u64,
    /// Overrides the suite's default checkers.
    pub kinds: Option<Vec<RelationKind>>,
    /// Restricts the run to these law names.
    pub only: Option<Vec<String>>,
    pub bounds: Bounds,
    pub threads: usize,
}

impl LawOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        LawOptions { samples, seed, kinds: None, only: None, bounds: Bounds::default(), threads }
    }
}

fn law_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn trace_text(v: &Verdict) -> String {
    match v {
        Verdict::Inequivalent { trace } => trace
            .iter()
            .map(|p| match &p.response {
                Some(r) => format!("{} / {}", p.attack, r),
                None => p.attack.clone(),
            })
            .collect::<Vec<_>>()
            .join("; "),
        _ => String::new(),
    }
}

fn run_sample(law: &Law, suite: Suite, seed: u64, alph: &Alphabet, kinds: &[RelationKind], bounds: Bounds) -> Vec<Outcome> {
    let inst = match law.instance(suite, seed, alph) {
        Ok(Some(i)) => i,
        Ok(None) => return vec![Outcome::Skipped; kinds.len()],
        Err(reason) => return vec![Outcome::Unknown { reason }; kinds.len()],
    };
    kinds
        .iter()
        .map(|kind| match check(&inst.env, &inst.lhs, &inst.rhs, *kind, bounds) {
            Ok(r) => match &r.verdict {
                Verdict::Equivalent { .. } => Outcome::Pass { fallback: r.note.is_some() },
                Verdict::Inequivalent { .. } => Outcome::Fail {
                    lhs: print_term(&inst.lhs),
                    rhs: print_term(&inst.rhs),
                    trace: trace_text(&r.verdict),
                },
                Verdict::Unknown { reason } => Outcome::Unknown { reason: reason.clone() },
            },
            Err(e) => Outcome::Unknown { reason: e.to_string() },
        })
        .collect()
}

/// Runs every law of `suite` (or those named in `opts.only`).
pub fn run_suite(suite: Suite, alph: &Alphabet, opts: &LawOptions) -> SuiteReport {
    let kinds = opts.kinds.clone().unwrap_or_else(|| suite.default_kinds());
    let mut laws = Vec::new();
    for (index, law) in suite.laws().iter().enumerate() {
        if opts.only.as_ref().is_some_and(|names| !names.iter().any(|n| n.eq_ignore_ascii_case(law.name))) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(law_seed(opts.seed, index));
        let seeds: Vec<u64> = (0..opts.samples).map(|_| rng.next_u64()).collect();
        let results = parallel_map(&seeds, opts.threads, |s| run_sample(law, suite, *s, alph, &kinds, opts.bounds));
        let checks = kinds
            .iter()
            .enumerate()
            .map(|(k, kind)| {
                let mut t = Tally {
                    kind: kind.to_string(),
                    passed: 0,
                    failed: 0,
                    unknown: 0,
                    skipped: 0,
                    fallback: 0,
                    first_failure: None,
                    first_unknown: None,
                };
                for (sample, outcomes) in results.iter().enumerate() {
                    match &outcomes[k] {
                        Outcome::Pass { fallback } => {
                            t.passed += 1;
                            t.fallback += usize::from(*fallback);
                        }
                        Outcome::Fail { lhs, rhs, trace } => {
                            t.failed += 1;
                            t.first_failure.get_or_insert_with(|| Failure {
                                sample,
                                lhs: lhs.clone(),
                                rhs: rhs.clone(),
                                trace: trace.clone(),
                            });
                        }
                        Outcome::Unknown { reason } => {
                            t.unknown += 1;
                            t.first_unknown.get_or_insert_with(|| reason.clone());
                        }
                        Outcome::Skipped => t.skipped += 1,
                    }
                }
                t
            })
            .collect();
        laws.push(LawReport { law: law.name.to_string(), schema: law.schema(), checks });
    }
    SuiteReport { suite: suite.name().to_string(), seed: opts.seed, samples: opts.samples, laws }
}

/// Maps `f` over `items` on up to `threads` scoped workers, keeping the
/// input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("law worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(suite: Suite, samples: usize) -> SuiteReport {
        let mut opts = LawOptions::new(samples, 11);
        opts.threads = 2;
        run_suite(suite, &Alphabet::law_suite(), &opts)
    }

    #[test]
    fn fill_is_single_pass() {
        let mut v = HashMap::new();
        v.insert("L", "{f}".to_string());
        v.insert("f", "{a -> b}".to_string());
        assert_eq!(fill("restrict({L}, relabel({f}, {}))", &v), "restrict({f}, relabel({a -> b}, {}))");
    }

    #[test]
    fn every_template_parses() {
        let alph = Alphabet::law_suite();
        for suite in Suite::ALL {
            for law in suite.laws() {
                for seed in 0..20 {
                    law.instance(suite, seed, &alph).unwrap_or_else(|e| panic!("{e}"));
                }
            }
        }
    }

    #[test]
    fn batc_suite_passes() {
        let r = run(Suite::Batc, 30);
        assert_eq!(r.failures(), 0, "{r}");
        assert_eq!(r.laws.len(), 9);
    }

    #[test]
    fn b1_separates_strong_from_rooted_branching() {
        let mut opts = LawOptions::new(20, 3);
        opts.only = Some(vec!["B1".into()]);
        let alph = Alphabet::law_suite();
        assert_eq!(run_suite(Suite::Tau, &alph, &opts).failures(), 0);
        opts.kinds = Some(vec![RelationKind::default()]);
        assert!(run_suite(Suite::Tau, &alph, &opts).failures() > 0);
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run(Suite::Encap, 10).to_string();
        let b = run(Suite::Encap, 10).to_string();
        assert_eq!(a, b);
    }
}
