//! The symbolic engine against the class semantics.

mod common;

use common::*;
use epens::engine::Config;
use epens::equivalence::{check_bcl_agreement, check_simulation, differential_check, f_equivalent};
use epens::formula::{ActionSym, FocusSet, Formula, Prop};
use epens::kripke::PointedKripke;
use epens::random;
use epens::semantic::{SemanticEnv, StateClass};
use epens::symbolic::{sym_satisfies, sym_update, SymbolicEnv, SymbolicState};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// A class of states that differ only in x2, and the focus formulas its
/// members satisfy.
fn uniform_pair(rng: &mut StdRng, focus: &FocusSet) -> (StateClass, SymbolicState) {
    let ag = agents(&["a1", "a2"]);
    let base = random::kripke(rng, &ag, &props(&["x1"]), 3);
    let members: Vec<PointedKripke> = (0..rng.gen_range(1..=3)).map(|_| decorate(rng, &base, &Prop::new("x2"))).collect();
    let sat: Vec<Formula> = focus.iter().filter(|f| base.satisfies(f).unwrap()).cloned().collect();
    (StateClass::new(members).unwrap(), SymbolicState::new(sat, focus).unwrap())
}

fn atoms() -> Vec<ActionSym> {
    ["stop", "tell12_x1", "tell12_nx1", "ack21_x1"].into_iter().map(ActionSym::new).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closure_agreement_iff_focus_agreement(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ag = agents(&["a1", "a2"]);
        let focus = FocusSet::new((0..rng.gen_range(1..=4)).map(|_| random::formula(&mut rng, &ag, &props(&["x1"]), 2)));
        let (class, s) = uniform_pair(&mut rng, &focus);
        prop_assert!(f_equivalent(&class, &s, &focus).unwrap());
        let samples: Vec<Formula> = (0..20).map(|_| random::closure_formula(&mut rng, &focus, 3)).collect();
        let report = check_bcl_agreement(&class, &s, &focus, &samples).unwrap();
        prop_assert!(report.passed(), "{}", report);
        for beta in &samples {
            let verdict = sym_satisfies(&s, beta, &focus).unwrap();
            prop_assert_eq!(class.satisfies(beta).unwrap(), verdict);
            // Equivalent closure formulas get the same verdict.
            for same in [
                Formula::not(Formula::not(beta.clone())),
                Formula::and(beta.clone(), Formula::Top),
                Formula::and(beta.clone(), beta.clone()),
            ] {
                prop_assert_eq!(sym_satisfies(&s, &same, &focus).unwrap(), verdict);
            }
        }

        // Any other subset disagrees on some focus formula, hence on the closure.
        let f = focus.iter().nth(rng.gen_range(0..focus.len())).unwrap().clone();
        let other = s.toggled(&f);
        prop_assert!(!f_equivalent(&class, &other, &focus).unwrap());
        let members: Vec<Formula> = focus.iter().cloned().collect();
        prop_assert!(!check_bcl_agreement(&class, &other, &focus, &members).unwrap().passed());
    }

    #[test]
    fn updates_preserve_focus_equivalence(seed in any::<u64>()) {
        let spec = bundled();
        let focus = spec.focus.clone().unwrap();
        let table = verified_table(&spec);
        let mut rng = StdRng::seed_from_u64(seed);
        let (class, s) = uniform_pair(&mut rng, &focus);
        for alpha in table.actions() {
            let pre = class.satisfies(alpha.pre()).unwrap();
            prop_assert_eq!(pre, sym_satisfies(&s, table.pre(&alpha).unwrap(), &focus).unwrap());
            if pre {
                let next = class.update(&alpha).unwrap().unwrap();
                let s2 = sym_update(&s, &alpha, &table, &focus).unwrap();
                prop_assert!(f_equivalent(&next, &s2, &focus).unwrap(), "{}", alpha);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn engines_simulate_from_random_equivalent_roots(seed in any::<u64>()) {
        let spec = bundled();
        let focus = spec.focus.clone().unwrap();
        let table = verified_table(&spec);
        let sem = SemanticEnv::new(&spec.actions);
        let sym = SymbolicEnv::new(&focus, &table, &spec.actions).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let (class, s) = uniform_pair(&mut rng, &focus);
        let c_sem = Config { ensemble: spec.ensemble.clone(), state: class };
        let c_sym = sym.configuration(spec.ensemble.clone(), s).unwrap();
        let report = check_simulation(&sem, &sym, c_sem.clone(), c_sym.clone(), None).unwrap();
        prop_assert!(report.passed(), "{}", report);
        let formulas: Vec<_> = (0..5).map(|_| random::ensemble_formula(&mut rng, &atoms(), &focus, 3)).collect();
        let report = differential_check(&sem, &sym, c_sem, c_sym, &formulas, 1000).unwrap();
        prop_assert!(report.passed(), "{}", report);
    }
}

#[test]
fn differential_fuzz_on_the_bundled_roots() {
    let spec = bundled();
    let focus = spec.focus.clone().unwrap();
    let table = verified_table(&spec);
    let sem = SemanticEnv::new(&spec.actions);
    let sym = SymbolicEnv::new(&focus, &table, &spec.actions).unwrap();
    let c_sem = Config { ensemble: spec.ensemble.clone(), state: spec.initial_class().unwrap() };
    let c_sym = sym.configuration(spec.ensemble.clone(), spec.initial_symbolic.clone().unwrap()).unwrap();
    let mut rng = StdRng::seed_from_u64(100);
    let formulas: Vec<_> = (0..100).map(|_| random::ensemble_formula(&mut rng, &atoms(), &focus, 3)).collect();
    let report = differential_check(&sem, &sym, c_sem, c_sym, &formulas, 1000).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.pairs_checked, 100);
}
