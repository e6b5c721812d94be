//! Class environments against their members.

mod common;

use common::member_wise::*;
use common::*;
use epens::formula::{ActionSym, Prop};
use epens::kripke::PointedKripke;
use epens::random;
use epens::semantic::{SemanticEnv, StateClass};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Up to three states over x1 and x2, unrelated to each other.
fn any_class(rng: &mut StdRng) -> StateClass {
    let ag = agents(&["a1", "a2"]);
    let pr = props(&["x1", "x2"]);
    let n = rng.gen_range(1..=3);
    StateClass::new((0..n).map(|_| random::kripke(rng, &ag, &pr, 3))).unwrap()
}

/// Up to three states that differ only in x2.
fn uniform_class(rng: &mut StdRng) -> StateClass {
    let ag = agents(&["a1", "a2"]);
    let base = random::kripke(rng, &ag, &props(&["x1"]), 3);
    let n = rng.gen_range(1..=3);
    let members: Vec<PointedKripke> = (0..n).map(|_| decorate(rng, &base, &Prop::new("x2"))).collect();
    StateClass::new(members).unwrap()
}

fn atoms() -> Vec<ActionSym> {
    ["stop", "tell12_x1", "tell12_nx1", "ack21_x1"].into_iter().map(ActionSym::new).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn class_successors_come_from_members(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let class = any_class(&mut rng);
        let act = random::action(&mut rng, &agents(&["a1", "a2"]), &props(&["x1", "x2"]), 3, 2);
        let v = zag_violations(&class, &all_events(&act));
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn member_steps_extend_to_uniform_classes(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let class = uniform_class(&mut rng);
        let act = random::action(&mut rng, &agents(&["a1", "a2"]), &props(&["x1"]), 3, 2);
        let v = zig_violations(&class, &all_events(&act));
        prop_assert!(v.is_empty(), "{:?}", v);
        prop_assert!(zag_violations(&class, &all_events(&act)).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn compound_edges_project_to_members(seed in any::<u64>()) {
        let spec = bundled();
        let env = SemanticEnv::new(&spec.actions);
        let mut rng = StdRng::seed_from_u64(seed);
        let focus = spec.focus.clone().unwrap();
        let action = random::compound(&mut rng, &atoms(), &focus, 3);
        let class = any_class(&mut rng);
        if let Some(o) = compound_zigzag(&env, &spec.ensemble, &class, &action, 50) {
            prop_assert_eq!(o.zag, 0, "{}", action);
        }
        let class = uniform_class(&mut rng);
        if let Some(o) = compound_zigzag(&env, &spec.ensemble, &class, &action, 50) {
            prop_assert_eq!(o.zag, 0, "{}", action);
            prop_assert_eq!(o.zig, 0, "{}", action);
        }
    }

    #[test]
    fn uniform_classes_decompose(seed in any::<u64>()) {
        let spec = bundled();
        let env = SemanticEnv::new(&spec.actions);
        let mut rng = StdRng::seed_from_u64(seed);
        let focus = spec.focus.clone().unwrap();
        let psi = random::ensemble_formula(&mut rng, &atoms(), &focus, 2);
        let class = uniform_class(&mut rng);
        if let Some(ok) = decomposes(&env, &spec.ensemble, &class, &psi, 200) {
            prop_assert!(ok, "{}", psi);
        }
    }
}

/// A class mixing a state where a1 knows x1 with one where a1 knows ~x1
/// cannot move, although each member can.
#[test]
fn mixed_classes_refute_member_wise_reasoning() {
    let spec = bundled();
    let env = SemanticEnv::new(&spec.actions);
    let mixed = StateClass::new([spec.states["est0"].clone(), spec.states["est0_w1"].clone()]).unwrap();
    let tell = spec.actions.get(&ActionSym::new("tell12_x1")).unwrap();
    assert!(!zig_violations(&mixed, tell).is_empty());
    assert!(zag_violations(&mixed, tell).is_empty());

    let stuck = spec.parse_ensemble_formula("[some] false").unwrap();
    assert_eq!(decomposes(&env, &spec.ensemble, &mixed, &stuck, 100), Some(false));
    let not_all_know = spec.parse_ensemble_formula("!K[a1] x1").unwrap();
    assert_eq!(decomposes(&env, &spec.ensemble, &mixed, &not_all_know, 100), Some(false));
    // Epistemic formulas are read member-wise and always decompose.
    let all_ignorant = spec.parse_ensemble_formula("~K[a1] x1").unwrap();
    assert_eq!(decomposes(&env, &spec.ensemble, &mixed, &all_ignorant, 100), Some(true));
}
