//! Golden results on the bundled bit-transmission instance.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use epens::actions::{group_announcement, EpistemicAction};
use epens::engine::{compound_relation, config_step, evaluate, explore, Config, SyntacticEnv, Truth};
use epens::equivalence::{check_compound_simulation, check_simulation, f_equivalent};
use epens::formula::{ActionSym, AgentId, Formula};
use epens::kripke::KripkeBuilder;
use epens::prover::Prover;
use epens::semantic::{SemanticEnv, StateClass};
use epens::symbolic::{search_representative, sym_update, verify_table, SymbolicEnv, SymbolicState, TableProblem};

fn edge_set(spec: &epens::dsl::ProblemSpec) -> BTreeSet<(String, String, String, String)> {
    let g = explore(&SyntacticEnv, Config { ensemble: spec.ensemble.clone(), state: () }, 100).unwrap();
    g.edges
        .iter()
        .map(|e| {
            (
                g.nodes[e.from].ensemble.to_string(),
                g.nodes[e.to].ensemble.to_string(),
                e.guard.to_string(),
                e.action.to_string(),
            )
        })
        .collect()
}

#[test]
fn syntactic_transition_system() {
    let spec = bundled();
    let g = explore(&SyntacticEnv, Config { ensemble: spec.ensemble.clone(), state: () }, 100).unwrap();
    assert!(g.is_closed());
    assert_eq!(g.nodes.len(), 4);
    assert_eq!(g.edges.len(), 8);

    let ag1 = spec.processes["Ag1"].to_string();
    let ag2 = spec.processes["Ag2"].to_string();
    let node = |p: &str, q: &str| {
        let wrap = |s: &str| if s == "nil" || s.starts_with('[') { s.to_string() } else { format!("({s})") };
        format!("a1 : {} || a2 : {}", wrap(p), wrap(q))
    };
    let s00 = node(&ag1, &ag2);
    let s01 = node(&ag1, "nil");
    let s10 = node("nil", &ag2);
    let s11 = node("nil", "nil");
    let tell = f("~K[a1] Kw[a2] x1 & K[a1] x1").to_string();
    let telln = f("~K[a1] Kw[a2] x1 & K[a1] ~x1").to_string();
    let stop = f("K[a1] Kw[a2] x1").to_string();
    let ack = f("Kw[a2] x1").to_string();
    let e = |a: &str, b: &str, g: &str, n: &str| (a.to_string(), b.to_string(), g.to_string(), n.to_string());
    let expected = BTreeSet::from([
        e(&s00, &s00, &tell, "tell12_x1"),
        e(&s00, &s00, &telln, "tell12_nx1"),
        e(&s00, &s10, &stop, "stop"),
        e(&s00, &s01, &ack, "ack21_x1"),
        e(&s01, &s01, &tell, "tell12_x1"),
        e(&s01, &s01, &telln, "tell12_nx1"),
        e(&s10, &s11, &ack, "ack21_x1"),
        e(&s01, &s11, &stop, "stop"),
    ]);
    assert_eq!(edge_set(&spec), expected);
}

#[test]
fn exploration_is_deterministic() {
    let spec = bundled();
    let env = SemanticEnv::new(&spec.actions);
    let root = Config { ensemble: spec.ensemble.clone(), state: spec.initial_class().unwrap() };
    let a = explore(&env, root.clone(), 1000).unwrap();
    let b = explore(&env, root, 1000).unwrap();
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.edges, b.edges);
}

#[test]
fn table_verifies_and_preliminary_focus_fails_on_acknowledgement_only() {
    let spec = bundled();
    let prover = Prover::with_agents(spec.signature.agents().clone());
    let mut table = spec.repr.clone().unwrap();
    let diags = verify_table(&mut table, &spec.actions, spec.focus.as_ref().unwrap(), &prover).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    assert!(table.is_verified());

    let mut table = spec.repr.clone().unwrap();
    let prelim = spec.focus_set(Some("preliminary")).unwrap();
    let diags = verify_table(&mut table, &spec.actions, prelim, &prover).unwrap();
    let cells: BTreeSet<(String, String)> = diags
        .iter()
        .map(|d| (d.action.clone(), d.formula.as_ref().map(|f| f.to_string()).unwrap_or_default()))
        .collect();
    assert_eq!(
        cells,
        BTreeSet::from([
            ("ack21_x1@ek".to_string(), "K[a1] x1".to_string()),
            ("ack21_x1@ek".to_string(), "K[a1] ~x1".to_string()),
        ])
    );
    assert!(diags.iter().all(|d| matches!(d.problem, TableProblem::OutsideClosure { .. })));
    assert!(!table.is_verified());
}

#[test]
fn a_wrong_representative_is_reported() {
    let spec = bundled();
    let prover = Prover::with_agents(spec.signature.agents().clone());
    let mut table = spec.repr.clone().unwrap();
    let a = spec.pointed_action("tell12_x1@ek").unwrap();
    table.set_wlp(a, f("K[a1] ~x1"), Formula::Top);
    let diags = verify_table(&mut table, &spec.actions, spec.focus.as_ref().unwrap(), &prover).unwrap();
    assert_eq!(diags.len(), 1);
    assert!(matches!(diags[0].problem, TableProblem::NotEquivalent { .. }));
}

#[test]
fn representative_search_recovers_the_acknowledgement_cell() {
    let spec = bundled();
    let prover = Prover::with_agents(spec.signature.agents().clone());
    let a = spec.pointed_action("ack21_x1@ek").unwrap();
    let r = search_representative(&a, &f("K[a1] x1"), spec.focus.as_ref().unwrap(), 4, &prover)
        .unwrap()
        .expect("representable");
    assert!(prover.equivalent(&r, &f("Kw[a2] x1 -> K[a1] M[a2] x1")).unwrap());
    let none = search_representative(&a, &f("K[a1] x1"), spec.focus_set(Some("preliminary")).unwrap(), 4, &prover)
        .unwrap();
    assert_eq!(none, None);
}

#[test]
fn group_announcement_to_the_receiver() {
    let est0 = KripkeBuilder::new(["a1", "a2"])
        .world("w0", ["x1"])
        .world("w1", Vec::<&str>::new())
        .block("a2", &["w0", "w1"])
        .build_pointed("w0")
        .unwrap();
    let agents = BTreeSet::from([AgentId::new("a1"), AgentId::new("a2")]);
    let model = Arc::new(group_announcement("ga", &agents, &BTreeSet::from([AgentId::new("a2")]), f("K[a1] x1")).unwrap());
    let ek = EpistemicAction::at(model.clone(), "ek").unwrap();
    let en = EpistemicAction::at(model, "en").unwrap();

    let after = est0.product_update(&ek).unwrap().unwrap();
    assert_eq!(after.structure.world_count(), 3);
    assert!(after.structure.world_index("(w1,ek)").is_none());
    assert!(after.satisfies(&f("K[a2] K[a1] x1")).unwrap());
    assert!(after.satisfies(&f("~K[a1] K[a2] K[a1] x1")).unwrap());

    let expected = KripkeBuilder::new(["a1", "a2"])
        .world("k0", ["x1"])
        .world("n0", ["x1"])
        .world("n1", Vec::<&str>::new())
        .block("a1", &["k0", "n0"])
        .block("a2", &["n0", "n1"])
        .build_pointed("k0")
        .unwrap();
    assert_eq!(after.minimize(), expected.minimize());
    assert_eq!(after.minimize().structure.world_count(), 3);

    let lost = est0.product_update(&en).unwrap().unwrap();
    assert!(lost.satisfies(&f("~K[a2] K[a1] x1")).unwrap());
    let lost_expected = KripkeBuilder::new(["a1", "a2"])
        .world("k0", ["x1"])
        .world("n0", ["x1"])
        .world("n1", Vec::<&str>::new())
        .block("a1", &["k0", "n0"])
        .block("a2", &["n0", "n1"])
        .build_pointed("n0")
        .unwrap();
    assert_eq!(lost.minimize(), lost_expected.minimize());
}

fn enabled(spec: &epens::dsl::ProblemSpec, class: StateClass) -> BTreeSet<String> {
    let env = SemanticEnv::new(&spec.actions);
    config_step(&env, &Config { ensemble: spec.ensemble.clone(), state: class })
        .unwrap()
        .into_iter()
        .map(|s| s.action.to_string())
        .collect()
}

fn class(spec: &epens::dsl::ProblemSpec, names: &[&str]) -> StateClass {
    StateClass::new(names.iter().map(|n| spec.states[*n].clone())).unwrap()
}

#[test]
fn enablement_depends_on_uniform_knowledge() {
    let spec = bundled();
    let only = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(enabled(&spec, spec.initial_class().unwrap()), only(&["tell12_x1"]));
    assert_eq!(enabled(&spec, class(&spec, &["est0_w1"])), only(&["tell12_nx1"]));
    assert_eq!(enabled(&spec, class(&spec, &["est0", "est0_w1"])), only(&[]));
    assert_eq!(enabled(&spec, class(&spec, &["known"])), only(&["ack21_x1", "stop"]));
}

#[test]
fn lossy_telling_splits_into_two_singletons() {
    let spec = bundled();
    let env = SemanticEnv::new(&spec.actions);
    let steps = config_step(&env, &Config { ensemble: spec.ensemble.clone(), state: class(&spec, &["est0"]) }).unwrap();
    assert_eq!(steps.len(), 2);
    assert!(steps.iter().all(|s| s.action == ActionSym::new("tell12_x1") && s.target.state.len() == 1));
    let a2_learns: Vec<bool> = steps.iter().map(|s| s.target.state.satisfies(&f("K[a2] x1")).unwrap()).collect();
    assert!(a2_learns.contains(&true) && a2_learns.contains(&false));
}

#[test]
fn dynamic_formulas_hold_in_both_engines() {
    let spec = bundled();
    let focus = spec.focus.as_ref().unwrap();
    let table = verified_table(&spec);
    let sem = SemanticEnv::new(&spec.actions);
    let sym = SymbolicEnv::new(focus, &table, &spec.actions).unwrap();
    let g_sem = explore(&sem, Config { ensemble: spec.ensemble.clone(), state: spec.initial_class().unwrap() }, 1000).unwrap();
    let root = sym.configuration(spec.ensemble.clone(), spec.initial_symbolic.clone().unwrap()).unwrap();
    let g_sym = explore(&sym, root, 1000).unwrap();
    assert!(g_sem.is_closed() && g_sym.is_closed());
    assert!(f_equivalent(&g_sem.nodes[0].state, &g_sym.nodes[0].state, focus).unwrap());
    for name in ["liveness", "liveness_literal", "reachability"] {
        let psi = spec.formula(name).unwrap();
        assert_eq!(evaluate(&sem, &g_sem, psi).unwrap()[0], Truth::True, "{name} semantic");
        assert_eq!(evaluate(&sym, &g_sym, psi).unwrap()[0], Truth::True, "{name} symbolic");
    }
    // a2 never learns x1 before some telling, so this must fail at the root.
    let early = spec.parse_ensemble_formula("Kw[a2] x1").unwrap();
    assert_eq!(evaluate(&sem, &g_sem, &early).unwrap()[0], Truth::False);
    assert_eq!(evaluate(&sym, &g_sym, &early).unwrap()[0], Truth::False);
}

#[test]
fn some_star_reaches_everything_and_stop_ends_agent_one() {
    let spec = bundled();
    let g = explore(&SyntacticEnv, Config { ensemble: spec.ensemble.clone(), state: () }, 100).unwrap();
    let some_star = epens::formula::CompoundAction::star(spec.compounds["some"].clone());
    let star = compound_relation(&SyntacticEnv, &g, &some_star).unwrap();
    assert_eq!(star.succ[0].len(), g.nodes.len());
    let stop = compound_relation(&SyntacticEnv, &g, &epens::formula::CompoundAction::atom("stop")).unwrap();
    for &v in &stop.succ[0] {
        assert!(g.nodes[v].ensemble.process(&AgentId::new("a1")).unwrap().to_string() == "nil");
        assert_eq!(g.nodes[v].ensemble.process(&AgentId::new("a2")), spec.ensemble.process(&AgentId::new("a2")));
    }
}

#[test]
fn engines_simulate_each_other_to_closure() {
    let spec = bundled();
    let focus = spec.focus.as_ref().unwrap();
    let table = verified_table(&spec);
    let sem = SemanticEnv::new(&spec.actions);
    let sym = SymbolicEnv::new(focus, &table, &spec.actions).unwrap();
    let c_sem = Config { ensemble: spec.ensemble.clone(), state: spec.initial_class().unwrap() };
    let c_sym = sym.configuration(spec.ensemble.clone(), spec.initial_symbolic.clone().unwrap()).unwrap();
    let report = check_simulation(&sem, &sym, c_sem.clone(), c_sym.clone(), None).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.pairs_checked >= 5);

    let g_sem = explore(&sem, c_sem, 1000).unwrap();
    let g_sym = explore(&sym, c_sym, 1000).unwrap();
    let actions: Vec<_> = spec.compounds.values().cloned().chain(spec.compounds.values().cloned().map(epens::formula::CompoundAction::star)).collect();
    let report = check_compound_simulation(&sem, &sym, &g_sem, &g_sym, &actions).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn update_commutes_with_the_abstraction_on_one_step() {
    let spec = bundled();
    let focus = spec.focus.as_ref().unwrap();
    let table = verified_table(&spec);
    let ek = spec.pointed_action("tell12_x1@ek").unwrap();
    let root = spec.initial_class().unwrap();
    let s0 = spec.initial_symbolic.clone().unwrap();
    assert!(f_equivalent(&root, &s0, focus).unwrap());
    let after = root.update(&ek).unwrap().unwrap();
    let s1 = sym_update(&s0, &ek, &table, focus).unwrap();
    assert!(f_equivalent(&after, &s1, focus).unwrap());
    assert!(s1.contains(&f("Kw[a2] x1")));

    // A state that only records what a1 knows about x1.
    let small = epens::formula::FocusSet::new([f("K[a1] x1")]);
    let mut t = epens::symbolic::RepresentativeTable::default();
    t.set_pre(ek.clone(), f("K[a1] x1"));
    t.set_wlp(ek.clone(), f("K[a1] x1"), Formula::Top);
    let prover = Prover::with_agents(spec.signature.agents().clone());
    let diags = verify_table(&mut t, &single(&spec, "tell12_x1", &ek), &small, &prover).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
    let s = SymbolicState::new([f("K[a1] x1")], &small).unwrap();
    assert!(f_equivalent(&after, &sym_update(&s, &ek, &t, &small).unwrap(), &small).unwrap());
}

fn single(spec: &epens::dsl::ProblemSpec, sym: &str, a: &EpistemicAction) -> epens::actions::ActionInterpretation {
    let _ = spec;
    epens::actions::ActionInterpretation::new(
        [(ActionSym::new(sym), epens::actions::ChoiceAction::single(a.clone()))].into_iter().collect(),
    )
}
