use locpa_core::alphabet::Alphabet;
use locpa_core::equiv::{check, Flavor, RelationKind, Strength};
use locpa_core::gen::{GenConfig, TermGen};
use locpa_core::pes::{agrees_with_lts, term_to_pes};
use locpa_core::rewrite::{ac_equal, default_fuel, normalize};
use locpa_core::sos::{build_lts, Bounds, Mode};
use locpa_core::syntax::{parse_spec, parse_term, print_spec, print_term};
use locpa_core::term::{is_basic, Env, LocWord, System};
use proptest::prelude::*;

fn step() -> RelationKind {
    RelationKind::new(Flavor::Step, Mode::Static, Strength::Strong)
}

fn env() -> Env {
    Env::new(Alphabet::law_suite())
}

fn configs() -> impl Strategy<Value = GenConfig> {
    prop_oneof![
        Just(GenConfig::batc()),
        Just(GenConfig::aptc()),
        Just(GenConfig::encap()),
        Just(GenConfig::proj()),
        Just(GenConfig::hide()),
        Just(GenConfig::ctc()),
    ]
}

fn word() -> impl Strategy<Value = LocWord> {
    prop::collection::vec(prop::sample::select(vec!["l1", "l2", "l3"]), 0..4).prop_map(LocWord::from_names)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_round_trips(seed: u64, config in configs(), size in 1usize..12) {
        let t = TermGen::new(seed, config).term(size);
        let printed = print_term(&t);
        prop_assert_eq!(parse_term(&printed).unwrap(), t, "{}", printed);
    }

    #[test]
    fn specs_round_trip(seed: u64, vars in 1usize..4, summands in 1usize..4) {
        // Summands form a set; the parser keeps them sorted.
        let mut spec = TermGen::new(seed, GenConfig::batc()).spec("E", vars, summands, 0.2);
        let printed = print_spec(&spec);
        for (_, ss) in &mut spec.equations {
            ss.sort();
        }
        prop_assert_eq!(parse_spec(&printed).unwrap(), spec, "{}", printed);
    }

    #[test]
    fn batc_normal_forms_are_basic_and_sound(seed: u64, size in 1usize..9) {
        let env = env();
        let t = TermGen::new(seed, GenConfig::batc()).term(size);
        let (nf, trace) = normalize(&env, &t, System::Batc, default_fuel(&t)).unwrap();
        prop_assert!(is_basic(&nf, System::Batc), "{}", print_term(&nf));
        prop_assert_eq!(trace.replay(&t).unwrap(), nf.clone());
        prop_assert!(check(&env, &t, &nf, step(), Bounds::default()).unwrap().is_equivalent());
    }

    #[test]
    fn normalization_is_idempotent(seed: u64, config in configs(), size in 1usize..8) {
        let env = env();
        let t = TermGen::new(seed, config).term(size);
        let system = if t.any(&|s| matches!(s, locpa_core::term::Term::Hide(..))) { System::Hide } else { System::Proj };
        if let Ok((nf, _)) = normalize(&env, &t, system, default_fuel(&t)) {
            let (again, steps) = normalize(&env, &nf, system, default_fuel(&nf)).unwrap();
            prop_assert!(ac_equal(&nf, &again));
            prop_assert!(steps.is_empty(), "{} rewrote again", print_term(&nf));
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric(seed: u64, config in configs(), size in 1usize..7) {
        let env = env();
        let mut g = TermGen::new(seed, config);
        let (x, y) = (g.term(size), g.term(size));
        for flavor in [Flavor::Step, Flavor::Pomset, Flavor::Hp] {
            let kind = step().with_flavor(flavor);
            prop_assert!(check(&env, &x, &x, kind, Bounds::default()).unwrap().is_equivalent());
            let forward = check(&env, &x, &y, kind, Bounds::default()).unwrap().is_equivalent();
            let backward = check(&env, &y, &x, kind, Bounds::default()).unwrap().is_equivalent();
            prop_assert_eq!(forward, backward);
        }
    }

    #[test]
    fn finer_relations_imply_coarser(seed: u64, size in 1usize..6) {
        let env = env();
        let mut g = TermGen::new(seed, GenConfig::aptc());
        let (x, y) = (g.term(size), g.term(size));
        let verdict = |flavor| check(&env, &x, &y, step().with_flavor(flavor), Bounds::default()).unwrap().is_equivalent();
        let (st, po, hp, hhp) = (verdict(Flavor::Step), verdict(Flavor::Pomset), verdict(Flavor::Hp), verdict(Flavor::Hhp));
        prop_assert!(!hhp || hp);
        prop_assert!(!hp || po);
        prop_assert!(!po || st);
    }

    #[test]
    fn event_structures_match_transition_systems(seed: u64, config in configs(), size in 1usize..8) {
        let env = env();
        let t = TermGen::new(seed, config).term(size);
        if let Ok(p) = term_to_pes(&env, &t, Mode::Static) {
            prop_assert!(p.check_invariants().is_ok());
            let lts = build_lts(&env, &t, Mode::Static, Bounds::default()).unwrap();
            prop_assert!(agrees_with_lts(&p, &lts), "{}", print_term(&t));
        }
    }

    #[test]
    fn exports_are_deterministic(seed: u64, config in configs(), size in 1usize..8) {
        let env = env();
        let t = TermGen::new(seed, config).term(size);
        for mode in [Mode::Static, Mode::Dynamic] {
            let a = build_lts(&env, &t, mode, Bounds::default()).unwrap();
            let b = build_lts(&env, &t, mode, Bounds::default()).unwrap();
            prop_assert_eq!(a.to_dot(), b.to_dot());
            prop_assert_eq!(a.to_json(), b.to_json());
        }
    }

    #[test]
    fn common_prefix_is_a_prefix(u in word(), v in word()) {
        let p = u.common_prefix(&v);
        prop_assert!(p.is_prefix_of(&u) && p.is_prefix_of(&v));
        prop_assert_eq!(u.independent(&v), v.independent(&u));
        prop_assert_eq!(u.independent(&v), !u.is_prefix_of(&v) && !v.is_prefix_of(&u));
        prop_assert!(u.is_prefix_of(&u.concat(&v)));
    }

    #[test]
    fn bounds_parse_keeps_values(states in 1usize..10_000, depth in 0usize..500, phi in 0usize..100) {
        let b = Bounds::parse(&format!("states={states}, depth={depth},phi={phi}")).unwrap();
        prop_assert_eq!((b.states, b.depth, b.phi_max), (states, depth, phi));
        prop_assert_eq!(b.nodes, Bounds::default().nodes);
    }
}

#[test]
fn alphabet_render_round_trips() {
    let a = Alphabet::law_suite();
    assert_eq!(Alphabet::parse(&a.render()).unwrap(), a);
}
