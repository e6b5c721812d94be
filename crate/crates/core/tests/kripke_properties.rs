//! Randomized properties of updates, minimization and wlp.

mod common;

use common::*;
use epens::kripke::PointedKripke;
use epens::random;
use epens::symbolic::wlp;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn setup() -> (Vec<epens::formula::AgentId>, Vec<epens::formula::Prop>) {
    (agents(&["a", "b"]), props(&["p", "q"]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wlp_matches_update_semantics(seed in any::<u64>()) {
        let (ag, pr) = setup();
        let mut rng = StdRng::seed_from_u64(seed);
        let est = random::kripke(&mut rng, &ag, &pr, 4);
        let act = random::action(&mut rng, &ag, &pr, 3, 2);
        let phi = random::formula(&mut rng, &ag, &pr, 3);
        let lhs = est.satisfies(&wlp(&act, &phi)).unwrap();
        let rhs = match update_oracle(&est, &act) {
            None => true,
            Some(next) => next.satisfies(&phi).unwrap(),
        };
        prop_assert_eq!(lhs, rhs, "state {:?} action {} formula {}", est, act, phi);
    }

    #[test]
    fn update_agrees_with_the_oracle(seed in any::<u64>()) {
        let (ag, pr) = setup();
        let mut rng = StdRng::seed_from_u64(seed);
        let est = random::kripke(&mut rng, &ag, &pr, 4);
        let act = random::action(&mut rng, &ag, &pr, 3, 2);
        let ours = est.product_update(&act).unwrap();
        let oracle = update_oracle(&est, &act);
        prop_assert_eq!(ours.is_some(), oracle.is_some());
        if let (Some(a), Some(b)) = (ours, oracle) {
            prop_assert!(a.structure.validate_s5().is_empty());
            prop_assert_eq!(a.minimize(), b.minimize());
        }
    }

    #[test]
    fn minimization_preserves_truth(seed in any::<u64>()) {
        let (ag, pr) = setup();
        let mut rng = StdRng::seed_from_u64(seed);
        let est = random::kripke(&mut rng, &ag, &pr, 5);
        let min = est.minimize();
        prop_assert!(min.structure.world_count() <= est.structure.world_count());
        prop_assert_eq!(min.minimize(), min.clone());
        for _ in 0..10 {
            let phi = random::formula(&mut rng, &ag, &pr, 3);
            prop_assert_eq!(est.satisfies(&phi).unwrap(), min.satisfies(&phi).unwrap(), "{}", phi);
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let (ag, pr) = setup();
        let mut rng = StdRng::seed_from_u64(seed);
        let est = random::kripke(&mut rng, &ag, &pr, 4);
        let text = serde_json::to_string(&est.to_json()).unwrap();
        let back = PointedKripke::from_json(&serde_json::from_str(&text).unwrap(), false).unwrap();
        prop_assert_eq!(back, est);
    }

    #[test]
    fn class_update_matches_wlp(seed in any::<u64>()) {
        let (ag, pr) = setup();
        let mut rng = StdRng::seed_from_u64(seed);
        let members: Vec<PointedKripke> = (0..rand::Rng::gen_range(&mut rng, 1..=3))
            .map(|_| random::kripke(&mut rng, &ag, &pr, 3))
            .collect();
        let act = random::action(&mut rng, &ag, &pr, 3, 2);
        let phi = random::formula(&mut rng, &ag, &pr, 3);
        let class = epens::semantic::StateClass::new(members.clone()).unwrap();
        let lhs = class.satisfies(&wlp(&act, &phi)).unwrap();
        // Members failing the precondition drop out of the update.
        let rhs = members.iter().all(|m| match m.product_update(&act).unwrap() {
            None => true,
            Some(n) => n.satisfies(&phi).unwrap(),
        });
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn wlp_oracle_on_five_hundred_instances() {
    let (ag, pr) = setup();
    let mut rng = StdRng::seed_from_u64(500);
    for i in 0..500 {
        let est = random::kripke(&mut rng, &ag, &pr, 4);
        let act = random::action(&mut rng, &ag, &pr, 3, 3);
        let phi = random::formula(&mut rng, &ag, &pr, 3);
        let lhs = est.satisfies(&wlp(&act, &phi)).unwrap();
        let rhs = match est.product_update(&act).unwrap() {
            None => true,
            Some(next) => next.satisfies(&phi).unwrap(),
        };
        assert_eq!(lhs, rhs, "instance {i}: {phi} under {act}");
    }
}
